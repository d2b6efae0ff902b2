#pragma once

#include "skit/allocation.hpp"

#include <iosfwd>

namespace skit::alloc {

struct IlpVar {
    enum class Kind { x, y, link_used };
    Kind kind = Kind::x;
    int stream = -1;
    int detector = -1; // feasible-list index
    int bitrate = -1;
    int frame = -1;
    int site = -1;
    double lo = 0.0;
    double hi = 1.0;

    std::string name() const;
};

// One linear row, lo <= sum(terms) <= hi; equality when lo == hi. Every row
// carries the tag of the constraint family it implements so the verifier and
// the LP export can name violations.
struct IlpRow {
    std::string tag;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::pair<int, double>> terms;
};

struct IlpInstance {
    const AllocationProblem* problem = nullptr;
    std::vector<FeasibleDetector> feasible;
    int cp_lcm = 0;
    std::vector<IlpVar> vars;
    std::vector<IlpRow> rows;
    std::vector<double> objective; // maximised

    int n_streams() const;
    int n_detectors() const { return static_cast<int>(feasible.size()); }
    int n_bitrates() const;
    int n_sites() const;
    int stream_stride() const;

    int var_x(int v, int d, int b) const;
    int var_y(int v, int d, int f) const;
    int var_link(int v, int s) const;
};

// Variable layout and row order follow the formulation exactly, so
// vars.size() and rows.size() reproduce the closed-form problem size.
IlpInstance build_ilp(const AllocationProblem& p);
IlpInstance build_ilp(const AllocationProblem& p, std::vector<FeasibleDetector> feasible,
                      int cp_lcm);

// Exact branch-and-bound over the x selection with an LP-free greedy
// relaxation bound; frame schedules come from a phase search that is exact on
// the cyclic horizon. Deterministic: equal-objective optima resolve to the
// lexicographically smallest chosen-triple list.
SolveResult solve_ilp(const IlpInstance& inst, double time_budget_s = 60.0);

// External-solver adapter: CPLEX-LP-format text out, "name value" lines in.
void write_lp(const IlpInstance& inst, std::ostream& out);
std::map<std::string, double> read_solution_values(const std::string& path);
Assignment assignment_from_values(const IlpInstance& inst,
                                  const std::map<std::string, double>& values);

} // namespace skit::alloc
