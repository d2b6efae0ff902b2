#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace skit::alloc {

// Link bandwidth; intra-site transfer is a reserved sentinel, never a large
// finite number.
struct Bandwidth {
    double kbps = 0.0; // 0 = unreachable
    bool infinite = false;

    static Bandwidth unreachable() { return {0.0, false}; }
    static Bandwidth intra_site() { return {0.0, true}; }
    static Bandwidth of(double kbps) { return {kbps, false}; }
};

struct Machine {
    std::string id;
    std::string site_id;
    double ram_mb = 0.0;
    enum class Kind { cpu, gpu } kind = Kind::cpu;
};

struct DetectorProfile {
    std::string id;
    std::string machine_id;
    double nominal_time_s = 0.0;            // per-frame execution time
    double ram_mb = 0.0;
    std::map<double, double> accuracy;      // bitrate kbps -> accuracy in [0,1]
    int period = 0;                         // frames, from nominal time and frame rate

    double accuracy_at(double bitrate_kbps) const;
};

struct AllocationProblem {
    std::vector<std::string> streams;
    std::vector<std::string> sites;
    std::vector<Machine> machines;
    std::vector<DetectorProfile> detectors;
    std::vector<double> bitrates_kbps;      // ascending
    double processing_frame_rate = 30.0;    // Hz
    double max_processing_time_s = 1.0;
    int det_per_stream = 1;
    int det_per_frame = 1;
    double w = 0.6;
    bool exclusive_machines = false;        // use the one-detector-per-machine RAM form
    std::map<std::pair<int, int>, Bandwidth> links; // (stream index, site index)

    int stream_index(const std::string& id) const;
    int site_index(const std::string& id) const;
    int machine_index(const std::string& id) const;
    int detector_index(const std::string& id) const;
    Bandwidth link(int stream, int site) const;
};

// A detector that survived the execution-time filter, with its placement
// resolved to indices.
struct FeasibleDetector {
    int det_index = 0;
    int machine_index = 0;
    int site_index = 0;
    int period = 0;
};

struct ChosenTriple {
    int stream = 0;   // stream index
    int detector = 0; // index into the feasible detector list
    int bitrate = 0;  // index into bitrates_kbps

    auto operator<=>(const ChosenTriple&) const = default;
};

struct Assignment {
    std::vector<ChosenTriple> chosen;                       // lexicographically sorted
    int cp_lcm = 0;
    std::vector<std::vector<std::vector<int>>> schedule;    // [stream][frame] -> feasible det indices
    std::map<std::pair<int, int>, int> links_used;          // (stream, site) -> count, nonzero only
    double objective = 0.0;

    bool empty() const { return chosen.empty(); }
};

enum class SolveStatus {
    optimal,
    timeout_incumbent, // best feasible found within the budget, optimality unproven
    infeasible,
    no_feasible_detectors,
};

struct SolveResult {
    SolveStatus status = SolveStatus::infeasible;
    std::optional<Assignment> assignment;
};

// ceil(nominal_time * rate), at least 1 frame.
int period_from_time(double nominal_time_s, double rate_hz);

// maxFrameTime = min(maxProcessingTime, detPerStream / processingFrameRate)
double max_frame_time(const AllocationProblem& p);

// Detectors whose nominal execution time fits within max_frame_time, with
// periods computed at the problem's processing rate.
std::vector<FeasibleDetector> get_detectors(const AllocationProblem& p);

// Least common multiple of the feasible periods; the cyclic horizon is capped
// at 5040 frames and exceeding it is a sizing error.
int get_lcm(std::span<const FeasibleDetector> detectors);

inline constexpr int kMaxCyclicHorizon = 5040;

// Closed-form variable/constraint counts of the ILP for this problem.
struct ProblemSize {
    long long n_vars = 0;
    long long n_constraints = 0;
};
ProblemSize problem_size(const AllocationProblem& p);

// Canonical objective: w * sum (bitrate_b / period_d) * acc_d^b  -  (1-w) * sum linkUsed.
double objective_value(const AllocationProblem& p, std::span<const FeasibleDetector> feasible,
                       std::span<const ChosenTriple> chosen);

// linkUsed values implied by a selection: minimal integers satisfying the
// link-counting constraint with M = |S|.
std::map<std::pair<int, int>, int> links_used_for(const AllocationProblem& p,
                                                  std::span<const FeasibleDetector> feasible,
                                                  std::span<const ChosenTriple> chosen);

// Full Algorithm-2 pipeline: time filter, cyclic horizon, ILP build + solve.
// Returns an empty assignment when no detector passes the time filter.
SolveResult assign_detectors(const AllocationProblem& p, double time_budget_s = 60.0);

// Independent re-check of every constraint and of the stated objective,
// straight from the problem data. Returns the violated constraint tags
// (empty = pass).
std::vector<std::string> verify_assignment(const AllocationProblem& p, const Assignment& a);

// ---- file formats -------------------------------------------------------

// Sections: [params], [streams], [sites], [machines], [detectors], [links].
// Bitrates in kbps, times in ms. See README for the field layout.
AllocationProblem load_problem(const std::string& path);
AllocationProblem parse_problem(const std::string& content, const std::string& name);

std::string assignment_text(const AllocationProblem& p, std::span<const FeasibleDetector> feasible,
                            const Assignment& a, SolveStatus status);
// Reads an assignment written by assignment_text (detector/site names are
// resolved against the problem).
Assignment load_assignment(const std::string& path, const AllocationProblem& p);

// One row per (stream, frame, detector): CSV suitable for Gantt-style plots.
std::string schedule_csv(const AllocationProblem& p, std::span<const FeasibleDetector> feasible,
                         const Assignment& a);

} // namespace skit::alloc
