#include "skit/ilp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

namespace skit::alloc {

namespace {

using Clock = std::chrono::steady_clock;

// ---- cyclic phase scheduling ---------------------------------------------
//
// A detector of period p chosen for a stream must process exactly one frame
// in every window of p consecutive frames, which on the cyclic horizon means
// y is 1 exactly on the frames congruent to some phase mod p. Scheduling a
// stream therefore reduces to picking one phase per chosen detector so that
// every frame is covered at least once and at most detPerFrame times.

struct PhaseKey {
    int horizon;
    int dpf;
    std::vector<int> periods; // sorted

    bool operator<(const PhaseKey& o) const {
        return std::tie(horizon, dpf, periods) < std::tie(o.horizon, o.dpf, o.periods);
    }
};

class PhaseScheduler {
public:
    // Phases for `periods` (input order) on [0, horizon), or nullopt when no
    // assignment satisfies 1 <= load <= dpf on every frame.
    std::optional<std::vector<int>> solve(const std::vector<int>& periods, int horizon, int dpf) {
        if (periods.empty()) return std::nullopt;

        std::vector<int> order(periods.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return periods[a] < periods[b]; });
        std::vector<int> sorted(periods.size());
        for (size_t i = 0; i < order.size(); ++i) sorted[i] = periods[order[i]];

        PhaseKey key{horizon, dpf, sorted};
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(key, search(sorted, horizon, dpf)).first;
        if (!it->second) return std::nullopt;

        std::vector<int> phases(periods.size());
        for (size_t i = 0; i < order.size(); ++i) phases[order[i]] = (*it->second)[i];
        return phases;
    }

private:
    static std::optional<std::vector<int>> search(const std::vector<int>& periods, int horizon,
                                                  int dpf) {
        long long capacity = 0;
        for (int p : periods) capacity += horizon / p;
        if (capacity < horizon) return std::nullopt;                       // cannot cover
        if (capacity > static_cast<long long>(dpf) * horizon) return std::nullopt; // must overflow

        std::vector<int> load(horizon, 0);
        std::vector<int> phases(periods.size(), 0);
        std::vector<long long> tail_capacity(periods.size() + 1, 0);
        for (size_t i = periods.size(); i-- > 0;)
            tail_capacity[i] = tail_capacity[i + 1] + horizon / periods[i];

        // Greedy earliest-fit first, exact backtracking as the fallback; the
        // greedy alone is not guaranteed complete.
        if (greedy(periods, horizon, dpf, load, phases)) return phases;
        std::fill(load.begin(), load.end(), 0);
        std::fill(phases.begin(), phases.end(), 0);
        int uncovered = horizon;
        if (backtrack(periods, horizon, dpf, 0, uncovered, tail_capacity, load, phases))
            return phases;
        return std::nullopt;
    }

    static void apply(std::vector<int>& load, int period, int phase, int delta, int& uncovered) {
        for (int f = phase; f < static_cast<int>(load.size()); f += period) {
            if (delta > 0 && load[f] == 0) --uncovered;
            load[f] += delta;
            if (delta < 0 && load[f] == 0) ++uncovered;
        }
    }

    static bool greedy(const std::vector<int>& periods, int horizon, int dpf,
                       std::vector<int>& load, std::vector<int>& phases) {
        int uncovered = horizon;
        for (size_t i = 0; i < periods.size(); ++i) {
            int phase = -1;
            for (int f = 0; f < horizon; ++f)
                if (load[f] == 0) {
                    phase = f % periods[i];
                    break;
                }
            if (phase < 0) {
                // everything covered; park the detector on the least loaded phase
                int best_peak = dpf + 1;
                for (int cand = 0; cand < periods[i]; ++cand) {
                    int peak = 0;
                    for (int f = cand; f < horizon; f += periods[i])
                        peak = std::max(peak, load[f] + 1);
                    if (peak < best_peak) {
                        best_peak = peak;
                        phase = cand;
                    }
                }
                if (best_peak > dpf) return false;
            }
            phases[i] = phase;
            apply(load, periods[i], phase, +1, uncovered);
            for (int f = phase; f < horizon; f += periods[i])
                if (load[f] > dpf) return false;
        }
        return uncovered == 0;
    }

    static bool backtrack(const std::vector<int>& periods, int horizon, int dpf, size_t i,
                          int& uncovered, const std::vector<long long>& tail_capacity,
                          std::vector<int>& load, std::vector<int>& phases) {
        if (uncovered > tail_capacity[i]) return false;
        if (i == periods.size()) return uncovered == 0;
        for (int phase = 0; phase < periods[i]; ++phase) {
            bool ok = true;
            for (int f = phase; f < horizon; f += periods[i])
                if (load[f] + 1 > dpf) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            apply(load, periods[i], phase, +1, uncovered);
            phases[i] = phase;
            if (backtrack(periods, horizon, dpf, i + 1, uncovered, tail_capacity, load, phases))
                return true;
            apply(load, periods[i], phase, -1, uncovered);
        }
        return false;
    }

    std::map<PhaseKey, std::optional<std::vector<int>>> cache_;
};

// ---- branch and bound over the x selection --------------------------------

class Searcher {
public:
    Searcher(const IlpInstance& inst, double budget_s)
        : inst_(inst), p_(*inst.problem),
          nv_(inst.n_streams()), nd_(inst.n_detectors()), nb_(inst.n_bitrates()),
          ns_(inst.n_sites()),
          deadline_(Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                       std::chrono::duration<double>(budget_s))) {
        gain_.assign(nd_, std::vector<double>(nb_, 0.0));
        best_gain_.assign(nd_, 0.0);
        for (int d = 0; d < nd_; ++d) {
            const FeasibleDetector& fd = inst_.feasible[d];
            const DetectorProfile& prof = p_.detectors[fd.det_index];
            for (int b = 0; b < nb_; ++b) {
                double bitrate = p_.bitrates_kbps[b];
                gain_[d][b] = p_.w * bitrate / fd.period * prof.accuracy_at(bitrate);
                best_gain_[d] = std::max(best_gain_[d], gain_[d][b]);
            }
        }
        std::vector<double> sorted = best_gain_;
        std::sort(sorted.rbegin(), sorted.rend());
        full_stream_gain_ = 0.0;
        for (int i = 0; i < std::min<int>(p_.det_per_stream, nd_); ++i)
            full_stream_gain_ += std::max(sorted[i], 0.0);

        choice_.assign(static_cast<size_t>(nv_) * nd_, -1);
        machine_ram_.assign(p_.machines.size(), 0.0);
        machine_count_.assign(p_.machines.size(), 0);
        site_rate_.assign(static_cast<size_t>(nv_) * ns_, 0.0);
        site_count_.assign(static_cast<size_t>(nv_) * ns_, 0);
        stream_count_.assign(nv_, 0);
    }

    SolveResult run() {
        dfs(0, 0, 0.0);
        SolveResult result;
        if (found_) {
            result.status = timed_out_ ? SolveStatus::timeout_incumbent : SolveStatus::optimal;
            result.assignment = build_assignment();
        } else {
            result.status = timed_out_ ? SolveStatus::timeout_incumbent : SolveStatus::infeasible;
        }
        return result;
    }

private:
    bool expired() {
        if (timed_out_) return true;
        if (++ticks_ % 1024 == 0 && Clock::now() > deadline_) timed_out_ = true;
        return timed_out_;
    }

    double bound(int v, int d, double partial_gain) const {
        double opt = partial_gain;
        // remaining slots of the current stream, best detectors from d onward
        int slots = p_.det_per_stream - stream_count_[v];
        if (slots > 0) {
            std::vector<double> rest;
            rest.reserve(nd_ - d);
            for (int i = d; i < nd_; ++i)
                if (best_gain_[i] > 0.0) rest.push_back(best_gain_[i]);
            std::sort(rest.rbegin(), rest.rend());
            for (int i = 0; i < std::min<int>(slots, rest.size()); ++i) opt += rest[i];
        }
        opt += (nv_ - v - 1) * full_stream_gain_;
        // links already used can only stay or grow; streams without any
        // detector yet must still open at least one link
        double penalty = 0.0;
        for (int vv = 0; vv < nv_; ++vv) {
            bool any = false;
            for (int s = 0; s < ns_; ++s) {
                int count = site_count_[vv * ns_ + s];
                if (count > 0) {
                    penalty += (count + ns_ - 1) / ns_;
                    any = true;
                }
            }
            if (!any) penalty += 1.0;
        }
        return opt - (1.0 - p_.w) * penalty;
    }

    bool stream_feasible(int v) {
        std::vector<int> periods;
        for (int d = 0; d < nd_; ++d)
            if (choice_[static_cast<size_t>(v) * nd_ + d] >= 0)
                periods.push_back(inst_.feasible[d].period);
        return scheduler_.solve(periods, inst_.cp_lcm, p_.det_per_frame).has_value();
    }

    void dfs(int v, int d, double partial_gain) {
        if (expired()) return;
        if (d == nd_) {
            if (!stream_feasible(v)) return;
            if (v + 1 == nv_) {
                record(partial_gain);
                return;
            }
            dfs(v + 1, 0, partial_gain);
            return;
        }
        if (found_ && bound(v, d, partial_gain) < best_obj_ - 1e-9) return;

        const FeasibleDetector& fd = inst_.feasible[d];
        size_t vd = static_cast<size_t>(v) * nd_ + d;
        size_t vs = static_cast<size_t>(v) * ns_ + fd.site_index;
        Bandwidth bw = p_.link(v, fd.site_index);

        if (stream_count_[v] < p_.det_per_stream) {
            for (int b = 0; b < nb_; ++b) {
                double rate = p_.bitrates_kbps[b] / fd.period;
                if (!bw.infinite && site_rate_[vs] + rate > bw.kbps + 1e-9) continue;
                if (p_.exclusive_machines) {
                    if (machine_count_[fd.machine_index] + 1 > 1) continue;
                } else if (machine_ram_[fd.machine_index] + p_.detectors[fd.det_index].ram_mb >
                           p_.machines[fd.machine_index].ram_mb + 1e-9) {
                    continue;
                }
                if (site_count_[vs] + 1 > ns_ * ns_) continue; // linkUsed cannot exceed |S|

                choice_[vd] = b;
                machine_ram_[fd.machine_index] += p_.detectors[fd.det_index].ram_mb;
                machine_count_[fd.machine_index] += 1;
                site_rate_[vs] += rate;
                site_count_[vs] += 1;
                stream_count_[v] += 1;

                dfs(v, d + 1, partial_gain + gain_[d][b]);

                choice_[vd] = -1;
                machine_ram_[fd.machine_index] -= p_.detectors[fd.det_index].ram_mb;
                machine_count_[fd.machine_index] -= 1;
                site_rate_[vs] -= rate;
                site_count_[vs] -= 1;
                stream_count_[v] -= 1;
                if (timed_out_) return;
            }
        }
        dfs(v, d + 1, partial_gain);
    }

    std::vector<ChosenTriple> current_triples() const {
        std::vector<ChosenTriple> triples;
        for (int v = 0; v < nv_; ++v)
            for (int d = 0; d < nd_; ++d) {
                int b = choice_[static_cast<size_t>(v) * nd_ + d];
                if (b >= 0) triples.push_back({v, d, b});
            }
        return triples;
    }

    void record(double) {
        auto triples = current_triples();
        double obj = objective_value(p_, inst_.feasible, triples);
        if (!found_ || obj > best_obj_ + 1e-12 ||
            (std::fabs(obj - best_obj_) <= 1e-12 && triples < best_triples_)) {
            found_ = true;
            best_obj_ = obj;
            best_triples_ = std::move(triples);
        }
    }

    Assignment build_assignment() {
        Assignment a;
        a.chosen = best_triples_;
        a.cp_lcm = inst_.cp_lcm;
        a.schedule.assign(nv_, std::vector<std::vector<int>>(inst_.cp_lcm));
        for (int v = 0; v < nv_; ++v) {
            std::vector<int> dets, periods;
            for (const auto& c : best_triples_)
                if (c.stream == v) {
                    dets.push_back(c.detector);
                    periods.push_back(inst_.feasible[c.detector].period);
                }
            auto phases = scheduler_.solve(periods, inst_.cp_lcm, p_.det_per_frame);
            for (size_t i = 0; i < dets.size(); ++i)
                for (int f = (*phases)[i]; f < inst_.cp_lcm; f += periods[i])
                    a.schedule[v][f].push_back(dets[i]);
            for (auto& frame : a.schedule[v]) std::sort(frame.begin(), frame.end());
        }
        a.links_used = links_used_for(p_, inst_.feasible, a.chosen);
        a.objective = objective_value(p_, inst_.feasible, a.chosen);
        return a;
    }

    const IlpInstance& inst_;
    const AllocationProblem& p_;
    int nv_, nd_, nb_, ns_;
    Clock::time_point deadline_;
    long long ticks_ = 0;
    bool timed_out_ = false;

    std::vector<std::vector<double>> gain_;
    std::vector<double> best_gain_;
    double full_stream_gain_ = 0.0;

    std::vector<int> choice_;
    std::vector<double> machine_ram_;
    std::vector<int> machine_count_;
    std::vector<double> site_rate_;
    std::vector<int> site_count_;
    std::vector<int> stream_count_;

    bool found_ = false;
    double best_obj_ = 0.0;
    std::vector<ChosenTriple> best_triples_;
    PhaseScheduler scheduler_;
};

} // namespace

SolveResult solve_ilp(const IlpInstance& inst, double time_budget_s) {
    return Searcher(inst, time_budget_s).run();
}

} // namespace skit::alloc
