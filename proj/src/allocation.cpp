#include "skit/allocation.hpp"

#include "skit/ilp.hpp"
#include "skit/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace skit::alloc {

namespace {

int find_id(const std::vector<std::string>& ids, const std::string& id) {
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == id) return static_cast<int>(i);
    return -1;
}

} // namespace

double DetectorProfile::accuracy_at(double bitrate_kbps) const {
    auto it = accuracy.find(bitrate_kbps);
    if (it == accuracy.end())
        throw std::invalid_argument("detector " + id + " has no accuracy for bitrate " +
                                    fmt_double(bitrate_kbps));
    return it->second;
}

int AllocationProblem::stream_index(const std::string& id) const { return find_id(streams, id); }
int AllocationProblem::site_index(const std::string& id) const { return find_id(sites, id); }

int AllocationProblem::machine_index(const std::string& id) const {
    for (size_t i = 0; i < machines.size(); ++i)
        if (machines[i].id == id) return static_cast<int>(i);
    return -1;
}

int AllocationProblem::detector_index(const std::string& id) const {
    for (size_t i = 0; i < detectors.size(); ++i)
        if (detectors[i].id == id) return static_cast<int>(i);
    return -1;
}

Bandwidth AllocationProblem::link(int stream, int site) const {
    auto it = links.find({stream, site});
    return it == links.end() ? Bandwidth::unreachable() : it->second;
}

int period_from_time(double nominal_time_s, double rate_hz) {
    if (nominal_time_s <= 0.0 || rate_hz <= 0.0)
        throw std::invalid_argument("period requires positive time and rate");
    // Small backoff so that times meant as an exact number of frames do not
    // round up through floating-point noise (e.g. 0.1 s at 30 Hz).
    double frames = nominal_time_s * rate_hz;
    int period = static_cast<int>(std::ceil(frames - 1e-9));
    return std::max(period, 1);
}

double max_frame_time(const AllocationProblem& p) {
    return std::min(p.max_processing_time_s, p.det_per_stream / p.processing_frame_rate);
}

std::vector<FeasibleDetector> get_detectors(const AllocationProblem& p) {
    double limit = max_frame_time(p);
    std::vector<FeasibleDetector> out;
    for (size_t i = 0; i < p.detectors.size(); ++i) {
        const DetectorProfile& d = p.detectors[i];
        if (d.nominal_time_s > limit + 1e-12) continue;
        int mi = p.machine_index(d.machine_id);
        if (mi < 0) throw std::invalid_argument("detector " + d.id + " references unknown machine");
        int si = p.site_index(p.machines[mi].site_id);
        out.push_back({static_cast<int>(i), mi, si,
                       period_from_time(d.nominal_time_s, p.processing_frame_rate)});
    }
    return out;
}

int get_lcm(std::span<const FeasibleDetector> detectors) {
    if (detectors.empty()) throw std::runtime_error("cyclic horizon undefined: no detectors");
    long long l = 1;
    for (const auto& d : detectors) {
        l = std::lcm(l, static_cast<long long>(d.period));
        if (l > kMaxCyclicHorizon)
            throw std::runtime_error("cyclic horizon " + std::to_string(l) + " exceeds the cap of " +
                                     std::to_string(kMaxCyclicHorizon) + " frames");
    }
    return static_cast<int>(l);
}

ProblemSize problem_size(const AllocationProblem& p) {
    auto feasible = get_detectors(p);
    long long f = get_lcm(feasible);
    long long v = static_cast<long long>(p.streams.size());
    long long d = static_cast<long long>(feasible.size());
    long long b = static_cast<long long>(p.bitrates_kbps.size());
    long long s = static_cast<long long>(p.sites.size());
    long long m = static_cast<long long>(p.machines.size());

    ProblemSize out;
    out.n_vars = v * (d * (b + f) + s);
    long long windows = 0;
    for (const auto& fd : feasible) windows += f - fd.period + 1;
    out.n_constraints = m + v * (1 + 2 * (f + s)) + v * windows;
    return out;
}

std::map<std::pair<int, int>, int> links_used_for(const AllocationProblem& p,
                                                  std::span<const FeasibleDetector> feasible,
                                                  std::span<const ChosenTriple> chosen) {
    int big_m = static_cast<int>(p.sites.size());
    std::map<std::pair<int, int>, int> counts;
    for (const auto& c : chosen) counts[{c.stream, feasible[c.detector].site_index}] += 1;
    std::map<std::pair<int, int>, int> out;
    for (const auto& [key, count] : counts)
        out[key] = (count + big_m - 1) / big_m; // minimal linkUsed satisfying count <= M * linkUsed
    return out;
}

double objective_value(const AllocationProblem& p, std::span<const FeasibleDetector> feasible,
                       std::span<const ChosenTriple> chosen) {
    double acc_obj = 0.0;
    for (const auto& c : chosen) {
        const FeasibleDetector& fd = feasible[c.detector];
        const DetectorProfile& prof = p.detectors[fd.det_index];
        double bitrate = p.bitrates_kbps[c.bitrate];
        acc_obj += bitrate / fd.period * prof.accuracy_at(bitrate);
    }
    double penalty = 0.0;
    for (const auto& [key, used] : links_used_for(p, feasible, chosen)) penalty += used;
    return acc_obj * p.w - penalty * (1.0 - p.w);
}

SolveResult assign_detectors(const AllocationProblem& p, double time_budget_s) {
    auto feasible = get_detectors(p);
    if (feasible.empty()) {
        SolveResult r;
        r.status = SolveStatus::no_feasible_detectors;
        r.assignment = Assignment{};
        return r;
    }
    int cp = get_lcm(feasible);
    IlpInstance inst = build_ilp(p, std::move(feasible), cp);
    return solve_ilp(inst, time_budget_s);
}

// ---- problem file -------------------------------------------------------

AllocationProblem parse_problem(const std::string& content, const std::string& name) {
    AllocationProblem p;
    std::vector<TextLine> lines = parse_sectioned_text(content, name);

    // ids first so that later sections can resolve references in any order
    for (const auto& ln : lines) {
        if (ln.section == "streams") p.streams.push_back(ln.text);
        if (ln.section == "sites") p.sites.push_back(ln.text);
    }

    for (const auto& ln : lines) {
        if (ln.section == "params") {
            std::string key, value;
            if (!split_key_value(ln.text, key, value))
                throw ParseError(name, ln.number, "expected key = value");
            if (key == "processing_frame_rate") p.processing_frame_rate = parse_double(value, ln, name);
            else if (key == "max_processing_time_ms") p.max_processing_time_s = parse_double(value, ln, name) / 1000.0;
            else if (key == "det_per_stream") p.det_per_stream = static_cast<int>(parse_int(value, ln, name));
            else if (key == "det_per_frame") p.det_per_frame = static_cast<int>(parse_int(value, ln, name));
            else if (key == "w") p.w = parse_double(value, ln, name);
            else if (key == "exclusive_machines") p.exclusive_machines = parse_int(value, ln, name) != 0;
            else if (key == "bitrates_kbps") {
                for (const auto& tok : split_ws(value)) p.bitrates_kbps.push_back(parse_double(tok, ln, name));
            } else {
                throw ParseError(name, ln.number, "unknown parameter '" + key + "'");
            }
        } else if (ln.section == "machines") {
            auto toks = split_ws(ln.text);
            if (toks.size() != 4) throw ParseError(name, ln.number, "expected: id site ram_mb cpu|gpu");
            Machine m;
            m.id = toks[0];
            m.site_id = toks[1];
            m.ram_mb = parse_double(toks[2], ln, name);
            if (toks[3] == "cpu") m.kind = Machine::Kind::cpu;
            else if (toks[3] == "gpu") m.kind = Machine::Kind::gpu;
            else throw ParseError(name, ln.number, "machine kind must be cpu or gpu");
            if (m.ram_mb <= 0) throw ParseError(name, ln.number, "machine RAM must be positive");
            if (p.site_index(m.site_id) < 0)
                throw ParseError(name, ln.number, "unknown site '" + m.site_id + "'");
            p.machines.push_back(std::move(m));
        } else if (ln.section == "detectors") {
            auto toks = split_ws(ln.text);
            if (toks.size() < 5)
                throw ParseError(name, ln.number,
                                 "expected: id machine time_ms ram_mb bitrate:acc ...");
            DetectorProfile d;
            d.id = toks[0];
            d.machine_id = toks[1];
            d.nominal_time_s = parse_double(toks[2], ln, name) / 1000.0;
            d.ram_mb = parse_double(toks[3], ln, name);
            if (d.nominal_time_s <= 0) throw ParseError(name, ln.number, "detector time must be positive");
            if (d.ram_mb <= 0) throw ParseError(name, ln.number, "detector RAM must be positive");
            for (size_t i = 4; i < toks.size(); ++i) {
                auto colon = toks[i].find(':');
                if (colon == std::string::npos)
                    throw ParseError(name, ln.number, "expected bitrate:acc, got '" + toks[i] + "'");
                double bitrate = parse_double(toks[i].substr(0, colon), ln, name);
                double acc = parse_double(toks[i].substr(colon + 1), ln, name);
                if (acc < 0.0 || acc > 1.0)
                    throw ParseError(name, ln.number, "accuracy must be in [0,1]");
                d.accuracy[bitrate] = acc;
            }
            p.detectors.push_back(std::move(d));
        } else if (ln.section == "links") {
            auto toks = split_ws(ln.text);
            if (toks.size() != 3) throw ParseError(name, ln.number, "expected: stream site bandwidth");
            int v = p.stream_index(toks[0]);
            int s = p.site_index(toks[1]);
            if (v < 0) throw ParseError(name, ln.number, "unknown stream '" + toks[0] + "'");
            if (s < 0) throw ParseError(name, ln.number, "unknown site '" + toks[1] + "'");
            Bandwidth bw;
            if (toks[2] == "inf") bw = Bandwidth::intra_site();
            else {
                bw = Bandwidth::of(parse_double(toks[2], ln, name));
                if (bw.kbps < 0) throw ParseError(name, ln.number, "bandwidth must be >= 0");
            }
            p.links[{v, s}] = bw;
        } else if (ln.section != "streams" && ln.section != "sites") {
            throw ParseError(name, ln.number, "unknown section [" + ln.section + "]");
        }
    }

    if (p.streams.empty()) throw std::invalid_argument(name + ": no streams");
    if (p.sites.empty()) throw std::invalid_argument(name + ": no sites");
    if (p.bitrates_kbps.empty()) throw std::invalid_argument(name + ": no bitrate levels");
    if (!std::is_sorted(p.bitrates_kbps.begin(), p.bitrates_kbps.end()))
        throw std::invalid_argument(name + ": bitrate levels must be ascending");
    if (p.det_per_frame < 1) throw std::invalid_argument(name + ": det_per_frame must be >= 1");
    if (p.det_per_stream < 1) throw std::invalid_argument(name + ": det_per_stream must be >= 1");
    if (p.w < 0.0 || p.w > 1.0) throw std::invalid_argument(name + ": w must be in [0,1]");
    for (const auto& d : p.detectors) {
        if (p.machine_index(d.machine_id) < 0)
            throw std::invalid_argument(name + ": detector " + d.id + " references unknown machine");
        for (double b : p.bitrates_kbps)
            if (!d.accuracy.count(b))
                throw std::invalid_argument(name + ": detector " + d.id +
                                            " lacks accuracy for bitrate " + fmt_double(b));
    }
    for (auto& d : p.detectors)
        d.period = period_from_time(d.nominal_time_s, p.processing_frame_rate);
    return p;
}

AllocationProblem load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_problem(buf.str(), path);
}

std::string assignment_text(const AllocationProblem& p, std::span<const FeasibleDetector> feasible,
                            const Assignment& a, SolveStatus status) {
    std::ostringstream out;
    out << "[assignment]\n";
    const char* status_s = status == SolveStatus::optimal ? "optimal"
                           : status == SolveStatus::timeout_incumbent ? "timeout_incumbent"
                           : status == SolveStatus::no_feasible_detectors ? "empty"
                                                                          : "infeasible";
    out << "status = " << status_s << "\n";
    out << "objective = " << fmt_double(a.objective, 15) << "\n";
    out << "cp_lcm = " << a.cp_lcm << "\n";
    out << "\n[chosen]\n";
    for (const auto& c : a.chosen) {
        out << p.streams[c.stream] << ' ' << p.detectors[feasible[c.detector].det_index].id << ' '
            << fmt_double(p.bitrates_kbps[c.bitrate]) << "\n";
    }
    out << "\n[schedule]\n";
    for (size_t v = 0; v < a.schedule.size(); ++v) {
        for (int f = 0; f < static_cast<int>(a.schedule[v].size()); ++f) {
            out << p.streams[v] << ' ' << f;
            for (int d : a.schedule[v][f]) out << ' ' << p.detectors[feasible[d].det_index].id;
            out << "\n";
        }
    }
    out << "\n[links_used]\n";
    for (const auto& [key, used] : a.links_used)
        out << p.streams[key.first] << ' ' << p.sites[key.second] << ' ' << used << "\n";
    return out.str();
}

Assignment load_assignment(const std::string& path, const AllocationProblem& p) {
    Assignment a;
    auto feasible = get_detectors(p);
    auto fd_index = [&feasible](int det_index) {
        for (size_t i = 0; i < feasible.size(); ++i)
            if (feasible[i].det_index == det_index) return static_cast<int>(i);
        return -1;
    };

    for (const auto& ln : read_sectioned_file(path)) {
        auto toks = split_ws(ln.text);
        if (ln.section == "assignment") {
            std::string key, value;
            if (!split_key_value(ln.text, key, value)) continue;
            if (key == "objective") a.objective = parse_double(value, ln, path);
            if (key == "cp_lcm") a.cp_lcm = static_cast<int>(parse_int(value, ln, path));
        } else if (ln.section == "chosen") {
            if (toks.size() != 3) throw ParseError(path, ln.number, "expected: stream detector bitrate");
            ChosenTriple c;
            c.stream = p.stream_index(toks[0]);
            int di = p.detector_index(toks[1]);
            c.detector = di < 0 ? -1 : fd_index(di);
            double bitrate = parse_double(toks[2], ln, path);
            c.bitrate = -1;
            for (size_t i = 0; i < p.bitrates_kbps.size(); ++i)
                if (p.bitrates_kbps[i] == bitrate) c.bitrate = static_cast<int>(i);
            if (c.stream < 0 || c.detector < 0 || c.bitrate < 0)
                throw ParseError(path, ln.number, "unresolvable chosen triple");
            a.chosen.push_back(c);
        } else if (ln.section == "schedule") {
            if (toks.size() < 2) throw ParseError(path, ln.number, "expected: stream frame detectors...");
            int v = p.stream_index(toks[0]);
            if (v < 0) throw ParseError(path, ln.number, "unknown stream '" + toks[0] + "'");
            int f = static_cast<int>(parse_int(toks[1], ln, path));
            if (a.schedule.size() < p.streams.size()) a.schedule.resize(p.streams.size());
            if (static_cast<int>(a.schedule[v].size()) <= f) a.schedule[v].resize(f + 1);
            for (size_t i = 2; i < toks.size(); ++i) {
                int di = p.detector_index(toks[i]);
                int fi = di < 0 ? -1 : fd_index(di);
                if (fi < 0) throw ParseError(path, ln.number, "unknown detector '" + toks[i] + "'");
                a.schedule[v][f].push_back(fi);
            }
        } else if (ln.section == "links_used") {
            if (toks.size() != 3) throw ParseError(path, ln.number, "expected: stream site count");
            int v = p.stream_index(toks[0]);
            int s = p.site_index(toks[1]);
            if (v < 0 || s < 0) throw ParseError(path, ln.number, "unknown stream or site");
            a.links_used[{v, s}] = static_cast<int>(parse_int(toks[2], ln, path));
        }
    }
    std::sort(a.chosen.begin(), a.chosen.end());
    if (a.schedule.empty()) a.schedule.resize(p.streams.size());
    for (auto& frames : a.schedule)
        if (static_cast<int>(frames.size()) < a.cp_lcm) frames.resize(a.cp_lcm);
    return a;
}

std::string schedule_csv(const AllocationProblem& p, std::span<const FeasibleDetector> feasible,
                         const Assignment& a) {
    std::ostringstream out;
    out << "stream,frame,detector,period\n";
    for (size_t v = 0; v < a.schedule.size(); ++v)
        for (int f = 0; f < static_cast<int>(a.schedule[v].size()); ++f)
            for (int d : a.schedule[v][f])
                out << p.streams[v] << ',' << f << ',' << p.detectors[feasible[d].det_index].id
                    << ',' << feasible[d].period << "\n";
    return out.str();
}

} // namespace skit::alloc
