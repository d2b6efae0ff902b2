#pragma once

#include "skit/allocation.hpp"
#include "skit/fusion.hpp"
#include "skit/heightfield.hpp"
#include "skit/salient.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace skit::sim {

struct WorldObject {
    double x = 0.0, y = 0.0; // ground position; z always on the terrain surface
    std::string class_id = "object";
    double width_m = 0.5;
    double height_m = 1.7;
    double vx = 0.0, vy = 0.0; // ground velocity, m/s
};

// Characterised synthetic detector standing in for a network: TP rate by
// object pixel size, Poisson clutter, bounding-box noise, score models.
struct SyntheticDetectorSpec {
    std::string profile_id = "det";
    int period = 1; // frames between runs in a standalone replay
    double f_c = 1.0; // relative accuracy measure feeding p_det_rel
    double tp_small = 1.0, tp_medium = 1.0, tp_large = 1.0;
    double fp_per_frame = 0.0;
    double center_noise_px = 0.0;
    double scale_noise = 0.0; // std of log size ratio
    double tp_score_mean = 0.9, tp_score_std = 0.0;
    double fp_score_mean = 0.3, fp_score_std = 0.0;
    double fp_size_min_px = 8.0, fp_size_max_px = 96.0;
    std::map<double, double> bitrate_tp_scale; // kbps -> TP-rate multiplier

    double tp_rate_for_size(double pixel_size) const; // piecewise linear over sqrt(area)
};

struct TrajectorySpec {
    std::vector<Vec3> waypoints; // absolute coordinates
    double speed = 3.0;          // m/s along the path
    double tilt_deg = 45.0;      // camera tilt down from horizontal
    double yaw_deg = 0.0;        // heading when hovering

    double path_length() const;
};

struct FusionParams {
    double grid_resolution = 0.5;
    double p_positive_max = 0.4;
    double p_negative_max = 0.05;
    double clamp_log_odds = 3.5;
    double extraction_threshold = 0.75;
    double cluster_link_dist = 2.0;
    double min_detectable_px = 8.0;
    double match_radius = 3.0; // salient-to-object association radius
};

struct Scenario {
    HeightField terrain;
    std::vector<WorldObject> objects;
    TrajectorySpec trajectory;
    fusion::CameraIntrinsics camera;
    std::map<std::string, fusion::ObjectClassSpec> classes;
    std::vector<SyntheticDetectorSpec> detectors;
    FusionParams fusion;
    double frame_rate = 5.0;
    double duration_s = 0.0; // 0: derived from the trajectory
    std::uint64_t seed = 1;

    double duration() const;
    const fusion::ObjectClassSpec& class_spec(const std::string& id) const;
    Vec3 object_position(const WorldObject& o, double t) const;
    double pool_max_fc() const;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& content, const std::string& name);

// Replay parameter overrides, e.g. "p_det_rel=0.49" or "grid_resolution=0.25".
void apply_override(Scenario& s, const std::string& key, const std::string& value,
                    std::optional<double>& p_det_rel_override);

// ---- frame generation -------------------------------------------------------

struct Projection {
    int object_index = -1;
    metrics::BoundingBox bbox; // ideal input-resolution box, clipped to the image
    Vec3 ground_point;         // object base on the terrain
    double dist = 0.0;         // camera to base
};

// Pose interpolated along the trajectory; exact at waypoint times.
// Throws std::out_of_range outside [0, duration].
fusion::CameraModel render_pose(const Scenario& s, double t);

// Ideal projections of the objects visible at time t: inside the image,
// positive depth, not hidden by terrain. Box extents follow the same
// projection math the fusion side expects.
std::vector<Projection> render_frame(const Scenario& s, double t);

struct SampledDetection {
    fusion::Detection detection;
    bool is_tp = false;
    int object_index = -1;
};

std::vector<SampledDetection> sample_detections_full(const SyntheticDetectorSpec& spec,
                                                     const Scenario& s,
                                                     std::span<const Projection> projections,
                                                     double t, std::mt19937_64& rng,
                                                     double tp_scale = 1.0);
std::vector<fusion::Detection> sample_detections(const SyntheticDetectorSpec& spec,
                                                 const Scenario& s,
                                                 std::span<const Projection> projections, double t,
                                                 std::mt19937_64& rng, double tp_scale = 1.0);

// Deterministic per-(seed, frame, detector) engine for the sampling streams.
std::mt19937_64 frame_rng(std::uint64_t seed, long long frame, int detector_index);

// ---- end-to-end replay --------------------------------------------------------

// A detector instantiated for a replay; when frames_on is empty the detector
// runs on every frame index divisible by its period.
struct DetectorRun {
    SyntheticDetectorSpec spec;
    int detector_index = 0; // position in the scenario pool (seeds the rng stream)
    double p_det_rel = 1.0;
    double tp_scale = 1.0;
    std::vector<int> frames_on; // schedule slots within one cyclic period
    int cycle = 0;              // cyclic horizon of frames_on

    bool runs_on(long long frame) const;
};

struct RunConfig {
    std::optional<double> p_det_rel_override;
    bool parallel = true;
    std::optional<std::vector<DetectorRun>> runs; // default: the scenario pool
};

struct ObjectOutcome {
    int object = -1;
    int salient_index = -1; // -1: missed
    double error = 0.0;     // geolocation error when matched
};

struct RunReport {
    std::vector<salient::SalientLocation> salient;
    std::vector<ObjectOutcome> objects;
    std::vector<int> unmatched_salient; // reported false-positive locations
    double mean_geolocation_error = 0.0;
    double mean_salient_probability = 0.0;
    double mean_tp_score = 0.0;
    long long n_true_positive_dets = 0;
    long long n_false_positive_dets = 0;
    int n_missed = 0;
    long long n_frames = 0;
    std::string grid_csv;
    std::string salient_csv;
    std::string trajectory_txt;
};

RunReport run_experiment(const Scenario& s, const RunConfig& config = {});

std::string report_summary(const RunReport& r);

// Instantiates the detectors an assignment chose for the first stream:
// synthetic specs are resolved by profile id against the scenario pool, the
// frame schedule and bitrate follow the assignment.
std::vector<DetectorRun> runs_from_assignment(const Scenario& s,
                                              const alloc::AllocationProblem& p,
                                              const alloc::Assignment& a);

} // namespace skit::sim
