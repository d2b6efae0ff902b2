#include "skit/allocation.hpp"
#include "skit/ilp.hpp"
#include "skit/manifest.hpp"
#include "skit/metrics.hpp"
#include "skit/scenario.hpp"
#include "skit/textio.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

int cmd_eval(const std::string& gt_path, const std::string& det_path, const std::string& out_dir) {
    auto t0 = Clock::now();
    skit::metrics::Dataset data = skit::metrics::load_dataset(gt_path, det_path);
    double load_ms = ms_since(t0);

    // per-image evaluation wall time (the synthetic stand-in for detector
    // execution statistics)
    double tmin = 1e300, tmax = 0.0, tsum = 0.0;
    for (const auto& img : data) {
        auto ti = Clock::now();
        skit::metrics::match_detections(img.gts, img.dts, 0.5);
        double ms = ms_since(ti);
        tmin = std::min(tmin, ms);
        tmax = std::max(tmax, ms);
        tsum += ms;
    }
    double tmean = data.empty() ? 0.0 : tsum / data.size();
    if (data.empty()) tmin = 0.0;

    auto te = Clock::now();
    auto rows = skit::metrics::evaluate_all(data);
    double eval_ms = ms_since(te);

    skit::write_file(out_dir + "/report.csv", skit::metrics::report_csv(rows));

    std::ostringstream chars;
    chars << "# detector characteristics (DetectorProfile accuracy candidates)\n";
    for (const auto& r : rows) {
        if (r.metric == "oLRP" && r.bucket == "all")
            chars << "one_minus_olrp = " << skit::fmt_double(1.0 - r.value) << "\n";
        if (r.metric == "AR" && r.bucket == "all" && r.max_det == 10)
            chars << "ar_10 = " << skit::fmt_double(r.value) << "\n";
        if (r.metric == "AP" && r.iou == "0.50:0.95" && r.bucket == "all")
            chars << "ap_coco = " << skit::fmt_double(r.value) << "\n";
    }
    chars << "eval_time_ms_min = " << skit::fmt_double(tmin, 6) << "\n";
    chars << "eval_time_ms_mean = " << skit::fmt_double(tmean, 6) << "\n";
    chars << "eval_time_ms_max = " << skit::fmt_double(tmax, 6) << "\n";
    skit::write_file(out_dir + "/characteristics.txt", chars.str());

    skit::RunManifest manifest;
    manifest.subcommand = "eval";
    manifest.inputs = {{gt_path, skit::fnv1a_file(gt_path)}, {det_path, skit::fnv1a_file(det_path)}};
    manifest.timings_ms = {{"load", load_ms}, {"evaluate", eval_ms}};
    manifest.write(out_dir);

    std::cout << "eval: " << data.size() << " images, report written to " << out_dir
              << "/report.csv\n";
    return 0;
}

void apply_alloc_config(skit::alloc::AllocationProblem& p, const std::string& key,
                        const std::string& value) {
    if (key == "w") p.w = std::stod(value);
    else if (key == "exclusive_machines") p.exclusive_machines = std::stoi(value) != 0;
    else throw std::invalid_argument("unknown allocation config key '" + key + "'");
}

int cmd_alloc(const std::string& problem_path, const std::string& out_dir, double time_budget,
              bool exclusive, std::optional<double> w, const std::string& emit_lp,
              const std::string& import_solution, const std::string& config_path) {
    auto p = skit::alloc::load_problem(problem_path);
    if (!config_path.empty())
        for (const auto& ln : skit::read_sectioned_file(config_path)) {
            std::string key, value;
            if (skit::split_key_value(ln.text, key, value)) apply_alloc_config(p, key, value);
        }
    if (exclusive) p.exclusive_machines = true;
    if (w) p.w = *w;

    auto t0 = Clock::now();
    auto feasible = skit::alloc::get_detectors(p);

    if (!emit_lp.empty()) {
        auto inst = skit::alloc::build_ilp(p);
        std::ostringstream lp;
        skit::alloc::write_lp(inst, lp);
        skit::write_file(emit_lp, lp.str());
        std::cout << "LP model written to " << emit_lp << "\n";
    }

    skit::alloc::SolveResult result;
    if (!import_solution.empty()) {
        auto inst = skit::alloc::build_ilp(p);
        result.assignment = skit::alloc::assignment_from_values(
            inst, skit::alloc::read_solution_values(import_solution));
        result.status = skit::alloc::SolveStatus::optimal;
    } else {
        result = skit::alloc::assign_detectors(p, time_budget);
    }
    double solve_ms = ms_since(t0);

    if (result.status == skit::alloc::SolveStatus::infeasible || !result.assignment) {
        std::cout << "infeasible\n";
        return 3;
    }
    const auto& a = *result.assignment;
    auto violations = skit::alloc::verify_assignment(p, a);

    skit::write_file(out_dir + "/assignment.txt",
                     skit::alloc::assignment_text(p, feasible, a, result.status));
    skit::write_file(out_dir + "/schedule.csv", skit::alloc::schedule_csv(p, feasible, a));

    skit::RunManifest manifest;
    manifest.subcommand = "alloc";
    manifest.inputs = {{problem_path, skit::fnv1a_file(problem_path)}};
    manifest.config = {{"w", skit::fmt_double(p.w)},
                       {"exclusive_machines", p.exclusive_machines ? "1" : "0"},
                       {"time_budget_s", skit::fmt_double(time_budget)}};
    manifest.timings_ms = {{"solve", solve_ms}};
    manifest.write(out_dir);

    std::cout << "status: "
              << (result.status == skit::alloc::SolveStatus::optimal ? "optimal"
                  : result.status == skit::alloc::SolveStatus::timeout_incumbent
                      ? "timeout (best incumbent, non-optimal)"
                      : "empty (no feasible detectors)")
              << "\n";
    std::cout << "objective: " << skit::fmt_double(a.objective, 12) << "\n";
    std::cout << "chosen: " << a.chosen.size() << " detector assignments, cp_lcm=" << a.cp_lcm
              << "\n";
    if (!violations.empty()) {
        std::cout << "verification FAILED:";
        for (const auto& v : violations) std::cout << ' ' << v;
        std::cout << "\n";
        return 2;
    }
    return 0;
}

int cmd_verify(const std::string& problem_path, const std::string& assignment_path) {
    auto p = skit::alloc::load_problem(problem_path);
    auto a = skit::alloc::load_assignment(assignment_path, p);
    auto violations = skit::alloc::verify_assignment(p, a);
    if (violations.empty()) {
        std::cout << "PASS\n";
        return 0;
    }
    std::cout << "violated:";
    for (const auto& v : violations) std::cout << ' ' << v;
    std::cout << "\n";
    return 2;
}

int cmd_size(const std::string& problem_path) {
    auto p = skit::alloc::load_problem(problem_path);
    auto size = skit::alloc::problem_size(p);
    std::cout << "variables: " << size.n_vars << "\nconstraints: " << size.n_constraints << "\n";
    return 0;
}

int cmd_replay(const std::string& scenario_path, const std::string& out_dir,
               const std::string& alloc_path, const std::vector<std::string>& overrides,
               std::optional<double> grid_res, std::optional<std::uint64_t> seed,
               const std::string& config_path, double time_budget) {
    auto s = skit::sim::load_scenario(scenario_path);
    skit::sim::RunConfig cfg;
    std::optional<double> p_det_rel_override;

    auto apply = [&s, &p_det_rel_override](const std::string& kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override must be key=value: " + kv);
        skit::sim::apply_override(s, kv.substr(0, eq), kv.substr(eq + 1), p_det_rel_override);
    };
    if (!config_path.empty())
        for (const auto& ln : skit::read_sectioned_file(config_path)) apply(ln.text);
    for (const auto& kv : overrides) apply(kv);
    if (grid_res) s.fusion.grid_resolution = *grid_res;
    if (seed) s.seed = *seed;
    cfg.p_det_rel_override = p_det_rel_override;

    skit::RunManifest manifest;
    manifest.subcommand = "replay";
    manifest.inputs = {{scenario_path, skit::fnv1a_file(scenario_path)}};

    if (!alloc_path.empty()) {
        auto p = skit::alloc::load_problem(alloc_path);
        auto result = skit::alloc::assign_detectors(p, time_budget);
        if (!result.assignment || result.assignment->empty()) {
            std::cout << "allocation produced no usable assignment\n";
            return 3;
        }
        const auto& a = *result.assignment;
        cfg.runs = skit::sim::runs_from_assignment(s, p, a);
        s.frame_rate = p.processing_frame_rate; // replay at the allocated processing rate
        manifest.inputs.push_back({alloc_path, skit::fnv1a_file(alloc_path)});
        skit::write_file(out_dir + "/assignment.txt",
                         skit::alloc::assignment_text(p, skit::alloc::get_detectors(p), a,
                                                      result.status));
    }

    auto t0 = Clock::now();
    auto report = skit::sim::run_experiment(s, cfg);
    double run_ms = ms_since(t0);

    skit::write_file(out_dir + "/report.txt", skit::sim::report_summary(report));
    skit::write_file(out_dir + "/salient.csv", report.salient_csv);
    skit::write_file(out_dir + "/grid.csv", report.grid_csv);
    skit::write_file(out_dir + "/trajectory.txt", report.trajectory_txt);
    std::ostringstream errors;
    errors << "object,x,y,salient_index,error\n";
    for (const auto& o : report.objects) {
        auto pos = s.object_position(s.objects[o.object], s.duration());
        errors << o.object << ',' << skit::fmt_double(pos.x, 12) << ','
               << skit::fmt_double(pos.y, 12) << ',' << o.salient_index << ','
               << (o.salient_index >= 0 ? skit::fmt_double(o.error, 12) : "") << "\n";
    }
    skit::write_file(out_dir + "/errors.csv", errors.str());

    manifest.seed = s.seed;
    manifest.config = {
        {"grid_resolution", skit::fmt_double(s.fusion.grid_resolution)},
        {"p_positive_max", skit::fmt_double(s.fusion.p_positive_max)},
        {"p_negative_max", skit::fmt_double(s.fusion.p_negative_max)},
        {"clamp_log_odds", skit::fmt_double(s.fusion.clamp_log_odds)},
        {"extraction_threshold", skit::fmt_double(s.fusion.extraction_threshold)},
        {"cluster_link_dist", skit::fmt_double(s.fusion.cluster_link_dist)},
        {"min_detectable_px", skit::fmt_double(s.fusion.min_detectable_px)},
        {"frame_rate", skit::fmt_double(s.frame_rate)},
        {"p_det_rel_override",
         cfg.p_det_rel_override ? skit::fmt_double(*cfg.p_det_rel_override) : "none"},
    };
    manifest.timings_ms = {{"replay", run_ms}};
    manifest.write(out_dir);

    std::cout << skit::sim::report_summary(report);
    std::cout << "report written to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"detector evaluation, allocation and saliency-map replay toolkit"};
    app.require_subcommand(1);

    std::string out_dir = "out";
    std::string config_path;
    std::optional<std::uint64_t> seed;
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--config", config_path, "key = value config file overriding defaults");
    app.add_option("--seed", seed, "override the scenario seed");
    app.fallthrough();

    auto* eval = app.add_subcommand("eval", "score detections against ground truth");
    std::string gt_path, det_path;
    eval->add_option("gt", gt_path, "ground-truth box file")->required();
    eval->add_option("detections", det_path, "detection box file")->required();

    auto* alloc = app.add_subcommand("alloc", "solve a detector-assignment problem");
    std::string problem_path, emit_lp, import_solution;
    double time_budget = 60.0;
    bool exclusive = false;
    std::optional<double> w_flag;
    alloc->add_option("problem", problem_path, "problem file")->required();
    alloc->add_option("--time-budget", time_budget, "solver budget, seconds")
        ->capture_default_str();
    alloc->add_flag("--exclusive-machines", exclusive, "one detector per machine");
    alloc->add_option("--w", w_flag, "accuracy/penalty weight in [0,1]");
    alloc->add_option("--emit-lp", emit_lp, "write the model in LP format");
    alloc->add_option("--import-solution", import_solution,
                      "read an externally solved 'name value' solution");

    auto* verify = app.add_subcommand("verify", "re-check an assignment against a problem");
    std::string verify_problem, verify_assignment;
    verify->add_option("problem", verify_problem)->required();
    verify->add_option("assignment", verify_assignment)->required();

    auto* size = app.add_subcommand("size", "closed-form ILP size of a problem");
    std::string size_problem;
    size->add_option("problem", size_problem)->required();

    auto* replay = app.add_subcommand("replay", "run a scenario end to end");
    std::string scenario_path, alloc_path;
    std::vector<std::string> overrides;
    std::optional<double> grid_res;
    replay->add_option("scenario", scenario_path, "scenario file")->required();
    replay->add_option("--alloc", alloc_path, "solve this problem and replay its allocation");
    replay->add_option("--override", overrides, "key=value parameter override")->take_all();
    replay->add_option("--grid-res", grid_res, "fusion grid resolution, meters");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(eval)) return cmd_eval(gt_path, det_path, out_dir);
        if (app.got_subcommand(alloc))
            return cmd_alloc(problem_path, out_dir, time_budget, exclusive, w_flag, emit_lp,
                             import_solution, config_path);
        if (app.got_subcommand(verify)) return cmd_verify(verify_problem, verify_assignment);
        if (app.got_subcommand(size)) return cmd_size(size_problem);
        if (app.got_subcommand(replay))
            return cmd_replay(scenario_path, out_dir, alloc_path, overrides, grid_res, seed,
                              config_path, time_budget);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
