#include "skit/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace skit::alloc {

// Re-derives every constraint of the formulation from the raw problem data
// and the assignment alone; deliberately shares nothing with the instance
// builder or the solver beyond the Algorithm-2 preprocessing.
std::vector<std::string> verify_assignment(const AllocationProblem& p, const Assignment& a) {
    std::vector<std::string> violations;
    auto flag = [&violations](const std::string& tag) {
        if (std::find(violations.begin(), violations.end(), tag) == violations.end())
            violations.push_back(tag);
    };

    auto feasible = get_detectors(p);
    const int nv = static_cast<int>(p.streams.size());
    const int ns = static_cast<int>(p.sites.size());
    const int big_m = ns;

    for (const auto& c : a.chosen) {
        if (c.stream < 0 || c.stream >= nv || c.detector < 0 ||
            c.detector >= static_cast<int>(feasible.size()) || c.bitrate < 0 ||
            c.bitrate >= static_cast<int>(p.bitrates_kbps.size())) {
            flag("structure");
            return violations;
        }
    }
    if (static_cast<int>(a.schedule.size()) != nv && !a.chosen.empty()) flag("structure");

    // detPerStream
    std::vector<int> per_stream(nv, 0);
    for (const auto& c : a.chosen) per_stream[c.stream] += 1;
    for (int v = 0; v < nv; ++v)
        if (per_stream[v] > p.det_per_stream) flag("detPerStream");

    // detPerFrame bounds over the cyclic horizon
    for (int v = 0; v < static_cast<int>(a.schedule.size()); ++v) {
        for (const auto& frame : a.schedule[v]) {
            if (static_cast<int>(frame.size()) < 1) flag("detPerFrame.lo");
            if (static_cast<int>(frame.size()) > p.det_per_frame) flag("detPerFrame.hi");
        }
    }

    // frame timing: for every feasible detector, every period-length window
    // of the stream's schedule holds exactly as many runs as bitrates chosen
    std::map<std::pair<int, int>, int> x_count; // (stream, feasible det) -> sum_b x
    for (const auto& c : a.chosen) x_count[{c.stream, c.detector}] += 1;
    for (int v = 0; v < static_cast<int>(a.schedule.size()); ++v) {
        int horizon = static_cast<int>(a.schedule[v].size());
        for (int d = 0; d < static_cast<int>(feasible.size()); ++d) {
            int period = feasible[d].period;
            int expected = 0;
            if (auto it = x_count.find({v, d}); it != x_count.end()) expected = it->second;
            for (int k = 0; k + period <= horizon; ++k) {
                int runs = 0;
                for (int f = k; f < k + period; ++f)
                    runs += std::count(a.schedule[v][f].begin(), a.schedule[v][f].end(), d);
                if (runs != expected) {
                    flag("frameTiming");
                    break;
                }
            }
        }
    }

    // bandwidth per (stream, site)
    for (int v = 0; v < nv; ++v) {
        for (int s = 0; s < ns; ++s) {
            double used = 0.0;
            for (const auto& c : a.chosen) {
                if (c.stream != v || feasible[c.detector].site_index != s) continue;
                used += p.bitrates_kbps[c.bitrate] / feasible[c.detector].period;
            }
            Bandwidth bw = p.link(v, s);
            if (!bw.infinite && used > bw.kbps + 1e-9) flag("bandwidth");
        }
    }

    // RAM per machine (or single use in the exclusive form)
    for (int m = 0; m < static_cast<int>(p.machines.size()); ++m) {
        double used = 0.0;
        int uses = 0;
        for (const auto& c : a.chosen) {
            if (feasible[c.detector].machine_index != m) continue;
            used += p.detectors[feasible[c.detector].det_index].ram_mb;
            uses += 1;
        }
        if (p.exclusive_machines ? uses > 1 : used > p.machines[m].ram_mb + 1e-9) flag("ram");
    }

    // link counting with M = |S|
    for (int v = 0; v < nv; ++v) {
        for (int s = 0; s < ns; ++s) {
            int count = 0;
            for (const auto& c : a.chosen)
                if (c.stream == v && feasible[c.detector].site_index == s) ++count;
            int used = 0;
            if (auto it = a.links_used.find({v, s}); it != a.links_used.end()) used = it->second;
            if (used < 0 || used > ns) flag("linkUsed");
            if (count > big_m * used) flag("linkUsed");
        }
    }

    // objective restated from first principles with the assignment's own
    // linkUsed values
    double acc_obj = 0.0;
    for (const auto& c : a.chosen) {
        double bitrate = p.bitrates_kbps[c.bitrate];
        acc_obj += bitrate / feasible[c.detector].period *
                   p.detectors[feasible[c.detector].det_index].accuracy_at(bitrate);
    }
    double penalty = 0.0;
    for (const auto& [key, used] : a.links_used) penalty += used;
    double objective = acc_obj * p.w - penalty * (1.0 - p.w);
    if (std::fabs(objective - a.objective) > 1e-9 * std::max(1.0, std::fabs(objective)))
        flag("objective");

    return violations;
}

} // namespace skit::alloc
