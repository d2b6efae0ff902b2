#include "skit/ilp.hpp"

#include "skit/textio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace skit::alloc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string IlpVar::name() const {
    std::ostringstream out;
    switch (kind) {
        case Kind::x: out << "x_v" << stream << "_d" << detector << "_b" << bitrate; break;
        case Kind::y: out << "y_v" << stream << "_d" << detector << "_f" << frame; break;
        case Kind::link_used: out << "link_v" << stream << "_s" << site; break;
    }
    return out.str();
}

int IlpInstance::n_streams() const { return static_cast<int>(problem->streams.size()); }
int IlpInstance::n_bitrates() const { return static_cast<int>(problem->bitrates_kbps.size()); }
int IlpInstance::n_sites() const { return static_cast<int>(problem->sites.size()); }

int IlpInstance::stream_stride() const {
    return n_detectors() * (n_bitrates() + cp_lcm) + n_sites();
}

int IlpInstance::var_x(int v, int d, int b) const {
    return v * stream_stride() + d * n_bitrates() + b;
}

int IlpInstance::var_y(int v, int d, int f) const {
    return v * stream_stride() + n_detectors() * n_bitrates() + d * cp_lcm + f;
}

int IlpInstance::var_link(int v, int s) const {
    return v * stream_stride() + n_detectors() * (n_bitrates() + cp_lcm) + s;
}

IlpInstance build_ilp(const AllocationProblem& p) {
    auto feasible = get_detectors(p);
    if (feasible.empty()) throw std::runtime_error("cannot build ILP: no feasible detectors");
    int cp = get_lcm(feasible);
    return build_ilp(p, std::move(feasible), cp);
}

IlpInstance build_ilp(const AllocationProblem& p, std::vector<FeasibleDetector> feasible,
                      int cp_lcm) {
    IlpInstance inst;
    inst.problem = &p;
    inst.feasible = std::move(feasible);
    inst.cp_lcm = cp_lcm;

    const int nv = static_cast<int>(p.streams.size());
    const int nd = inst.n_detectors();
    const int nb = static_cast<int>(p.bitrates_kbps.size());
    const int ns = static_cast<int>(p.sites.size());
    const int nf = cp_lcm;

    inst.vars.resize(static_cast<size_t>(nv) * inst.stream_stride());
    inst.objective.assign(inst.vars.size(), 0.0);
    for (int v = 0; v < nv; ++v) {
        for (int d = 0; d < nd; ++d) {
            const FeasibleDetector& fd = inst.feasible[d];
            const DetectorProfile& prof = p.detectors[fd.det_index];
            for (int b = 0; b < nb; ++b) {
                int idx = inst.var_x(v, d, b);
                inst.vars[idx] = {IlpVar::Kind::x, v, d, b, -1, -1, 0.0, 1.0};
                double bitrate = p.bitrates_kbps[b];
                inst.objective[idx] = p.w * bitrate / fd.period * prof.accuracy_at(bitrate);
            }
            for (int f = 0; f < nf; ++f)
                inst.vars[inst.var_y(v, d, f)] = {IlpVar::Kind::y, v, d, -1, f, -1, 0.0, 1.0};
        }
        for (int s = 0; s < ns; ++s) {
            int idx = inst.var_link(v, s);
            inst.vars[idx] = {IlpVar::Kind::link_used, v, -1, -1, -1, s, 0.0, static_cast<double>(ns)};
            inst.objective[idx] = -(1.0 - p.w);
        }
    }

    // detPerStream: sum_b sum_d x_vdb <= dps, per stream
    for (int v = 0; v < nv; ++v) {
        IlpRow row{"detPerStream", -kInf, static_cast<double>(p.det_per_stream), {}};
        for (int d = 0; d < nd; ++d)
            for (int b = 0; b < nb; ++b) row.terms.push_back({inst.var_x(v, d, b), 1.0});
        inst.rows.push_back(std::move(row));
    }
    // detPerFrame: 1 <= sum_d y_vdf <= dpf, per stream and frame (two rows)
    for (int v = 0; v < nv; ++v) {
        for (int f = 0; f < nf; ++f) {
            IlpRow lo{"detPerFrame.lo", 1.0, kInf, {}};
            IlpRow hi{"detPerFrame.hi", -kInf, static_cast<double>(p.det_per_frame), {}};
            for (int d = 0; d < nd; ++d) {
                lo.terms.push_back({inst.var_y(v, d, f), 1.0});
                hi.terms.push_back({inst.var_y(v, d, f), 1.0});
            }
            inst.rows.push_back(std::move(lo));
            inst.rows.push_back(std::move(hi));
        }
    }
    // frame timing: every period-length window holds exactly sum_b x_vdb runs
    for (int v = 0; v < nv; ++v) {
        for (int d = 0; d < nd; ++d) {
            int period = inst.feasible[d].period;
            for (int k = 0; k + period <= nf; ++k) {
                IlpRow row{"frameTiming", 0.0, 0.0, {}};
                for (int f = k; f < k + period; ++f) row.terms.push_back({inst.var_y(v, d, f), 1.0});
                for (int b = 0; b < nb; ++b) row.terms.push_back({inst.var_x(v, d, b), -1.0});
                inst.rows.push_back(std::move(row));
            }
        }
    }
    // bandwidth: sum over detectors at the site of bitrate/period * x <= link bw
    for (int v = 0; v < nv; ++v) {
        for (int s = 0; s < ns; ++s) {
            Bandwidth bw = p.link(v, s);
            IlpRow row{"bandwidth", -kInf, bw.infinite ? kInf : bw.kbps, {}};
            for (int d = 0; d < nd; ++d) {
                if (inst.feasible[d].site_index != s) continue;
                for (int b = 0; b < nb; ++b)
                    row.terms.push_back(
                        {inst.var_x(v, d, b), p.bitrates_kbps[b] / inst.feasible[d].period});
            }
            inst.rows.push_back(std::move(row));
        }
    }
    // RAM per machine, or the simplified one-use-per-machine form
    for (size_t m = 0; m < p.machines.size(); ++m) {
        IlpRow row{"ram", -kInf, p.exclusive_machines ? 1.0 : p.machines[m].ram_mb, {}};
        for (int v = 0; v < nv; ++v)
            for (int d = 0; d < nd; ++d) {
                if (inst.feasible[d].machine_index != static_cast<int>(m)) continue;
                double coeff =
                    p.exclusive_machines ? 1.0 : p.detectors[inst.feasible[d].det_index].ram_mb;
                for (int b = 0; b < nb; ++b) row.terms.push_back({inst.var_x(v, d, b), coeff});
            }
        inst.rows.push_back(std::move(row));
    }
    // link counting: sum_d_at_site sum_b x <= |S| * linkUsed
    for (int v = 0; v < nv; ++v) {
        for (int s = 0; s < ns; ++s) {
            IlpRow row{"linkUsed", -kInf, 0.0, {}};
            for (int d = 0; d < nd; ++d) {
                if (inst.feasible[d].site_index != s) continue;
                for (int b = 0; b < nb; ++b) row.terms.push_back({inst.var_x(v, d, b), 1.0});
            }
            row.terms.push_back({inst.var_link(v, s), -static_cast<double>(ns)});
            inst.rows.push_back(std::move(row));
        }
    }
    return inst;
}

void write_lp(const IlpInstance& inst, std::ostream& out) {
    out << "Maximize\n obj:";
    bool first = true;
    for (size_t i = 0; i < inst.vars.size(); ++i) {
        double c = inst.objective[i];
        if (c == 0.0) continue;
        out << (c >= 0 ? (first ? " " : " + ") : " - ") << fmt_double(std::fabs(c), 12) << ' '
            << inst.vars[i].name();
        first = false;
    }
    if (first) out << " 0 " << inst.vars.front().name();
    out << "\nSubject To\n";
    for (size_t r = 0; r < inst.rows.size(); ++r) {
        const IlpRow& row = inst.rows[r];
        auto write_terms = [&out, &inst, &row]() {
            bool f = true;
            for (const auto& [idx, coeff] : row.terms) {
                out << (coeff >= 0 ? (f ? " " : " + ") : " - ") << fmt_double(std::fabs(coeff), 12)
                    << ' ' << inst.vars[idx].name();
                f = false;
            }
            if (f) out << " 0 " << inst.vars.front().name();
        };
        out << " c" << r << "_" << row.tag << ":";
        if (row.terms.empty() && row.lo == -kInf) {
            // keep empty rows so the exported model matches the formulation size
        }
        if (row.lo == row.hi) {
            write_terms();
            out << " = " << fmt_double(row.lo, 12) << "\n";
        } else if (row.lo == -kInf) {
            write_terms();
            out << " <= " << fmt_double(row.hi == kInf ? 1e30 : row.hi, 12) << "\n";
        } else {
            write_terms();
            out << " >= " << fmt_double(row.lo, 12) << "\n";
        }
    }
    out << "Bounds\n";
    for (const auto& v : inst.vars)
        if (v.kind == IlpVar::Kind::link_used)
            out << " 0 <= " << v.name() << " <= " << fmt_double(v.hi, 12) << "\n";
    out << "Binaries\n";
    int col = 0;
    for (const auto& v : inst.vars) {
        if (v.kind == IlpVar::Kind::link_used) continue;
        out << ' ' << v.name();
        if (++col % 8 == 0) out << "\n";
    }
    out << "\nGenerals\n";
    for (const auto& v : inst.vars)
        if (v.kind == IlpVar::Kind::link_used) out << ' ' << v.name();
    out << "\nEnd\n";
}

std::map<std::string, double> read_solution_values(const std::string& path) {
    std::map<std::string, double> values;
    for (const auto& ln : read_sectioned_file(path)) {
        auto toks = split_ws(ln.text);
        if (toks.size() != 2) throw ParseError(path, ln.number, "expected: variable value");
        values[toks[0]] = parse_double(toks[1], ln, path);
    }
    return values;
}

Assignment assignment_from_values(const IlpInstance& inst,
                                  const std::map<std::string, double>& values) {
    Assignment a;
    a.cp_lcm = inst.cp_lcm;
    a.schedule.assign(inst.n_streams(), std::vector<std::vector<int>>(inst.cp_lcm));
    auto value_of = [&values](const std::string& name) {
        auto it = values.find(name);
        return it == values.end() ? 0.0 : it->second;
    };
    for (const auto& v : inst.vars) {
        double val = value_of(v.name());
        bool on = std::lround(val) >= 1;
        if (v.kind == IlpVar::Kind::x && on) a.chosen.push_back({v.stream, v.detector, v.bitrate});
        if (v.kind == IlpVar::Kind::y && on) a.schedule[v.stream][v.frame].push_back(v.detector);
        if (v.kind == IlpVar::Kind::link_used && std::lround(val) >= 1)
            a.links_used[{v.stream, v.site}] = static_cast<int>(std::lround(val));
    }
    std::sort(a.chosen.begin(), a.chosen.end());
    for (auto& frames : a.schedule)
        for (auto& dets : frames) std::sort(dets.begin(), dets.end());
    a.objective = objective_value(*inst.problem, inst.feasible, a.chosen);
    return a;
}

} // namespace skit::alloc
