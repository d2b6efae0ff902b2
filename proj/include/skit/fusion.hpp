#pragma once

#include "skit/heightfield.hpp"
#include "skit/metrics.hpp"
#include "skit/vec.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace skit::fusion {

// ---- camera ---------------------------------------------------------------

struct CameraIntrinsics {
    double f_x = 0.0; // pixels, at calibration resolution
    double f_y = 0.0;
    double calib_w = 0.0;
    double calib_h = 0.0;
    double input_w = 0.0; // detector input resolution
    double input_h = 0.0;
};

struct CameraModel {
    CameraIntrinsics intr;
    Vec3 position;
    Mat3 rotation; // world <- camera; camera looks along +z, image y grows down
};

// Pixel in detector-input coordinates, principal point at the image centre.
// Empty when the point is at or behind the camera plane.
std::optional<Vec2> project(const CameraModel& cam, const Vec3& world);

// World-frame unit direction through an input pixel.
Vec3 pixel_ray(const CameraModel& cam, const Vec2& pixel);

// ---- sensor model -----------------------------------------------------------

struct ObjectClassSpec {
    std::string class_id = "object";
    double obj_w_min = 0.0, obj_w_max = 0.0; // meters
    double obj_h_min = 0.0, obj_h_max = 0.0;
    enum class SignificantPoint { bbox_center, bbox_bottom_center };
    SignificantPoint significant_point = SignificantPoint::bbox_bottom_center;
    double tukey_alpha = 0.5;
};

struct SensorModelParams {
    double p_det_rel = 1.0;       // relative detector fidelity, f_c / max over the pool
    double p_positive_max = 0.4;  // in [0, 0.5]
    double p_negative_max = 0.05; // in [0, 0.5]
    double min_detectable_px = 8.0;
};

// Projected size in input pixels of an object of metric size obj_m at dist.
double projected_extent_px(double img_input, double focal, double obj_m, double img_calib,
                           double dist);

struct BBoxExtent {
    double min_w = 0.0, max_w = 0.0; // pixels
    double min_h = 0.0, max_h = 0.0;
};
BBoxExtent expected_bbox_extent(const ObjectClassSpec& cls, const CameraIntrinsics& intr,
                                double dist);

// Cosine-tapered window mapped onto [lo, hi]: 0 outside, 1 in the flat
// middle, a cosine ramp over a fraction alpha/2 at each edge.
double tukey_weight(double value, double lo, double hi, double alpha);

// Distance at which the minimum object size shrinks to min_px input pixels.
double max_detection_distance(const ObjectClassSpec& cls, const CameraIntrinsics& intr,
                              double min_px);

// max(1 - dist / max_distance, 0)
double distance_factor(double dist, double max_distance);

// ---- log-odds grid ----------------------------------------------------------

double log_odds_from_p(double p); // throws for p outside (0,1)
double p_from_log_odds(double l);

// One surface cell per (x, y) column at terrain height; absent updates mean
// the 0.5 prior (log-odds 0).
class VoxelGrid {
public:
    VoxelGrid(const HeightField& terrain, double resolution, double clamp_log_odds = 3.5);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double resolution() const { return res_; }
    double origin_x() const { return x0_; }
    double origin_y() const { return y0_; }
    double clamp_log_odds() const { return clamp_; }

    bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < nx_ && iy >= 0 && iy < ny_; }
    std::optional<std::pair<int, int>> cell_of(double x, double y) const;
    Vec3 cell_center(int ix, int iy) const;

    double log_odds(int ix, int iy) const { return log_odds_[index(ix, iy)]; }
    double probability(int ix, int iy) const { return p_from_log_odds(log_odds(ix, iy)); }
    bool touched(int ix, int iy) const { return touched_[index(ix, iy)] != 0; }

    // L <- clamp(L + log(p/(1-p))); throws for p in {0,1}.
    void update(int ix, int iy, double p_update);

    // Detection world points kept per cell for salient-centroid refinement.
    void add_point(int ix, int iy, const Vec3& world_point);
    int point_count(int ix, int iy) const { return point_count_[index(ix, iy)]; }
    std::optional<Vec3> mean_point(int ix, int iy) const;

    std::string to_csv() const; // touched cells only, with a geometry header
    static VoxelGrid from_csv(const std::string& content, const HeightField& terrain,
                              const std::string& name = "grid");

private:
    size_t index(int ix, int iy) const { return ix + static_cast<size_t>(iy) * nx_; }

    double x0_, y0_, res_, clamp_;
    int nx_, ny_;
    std::vector<double> log_odds_;
    std::vector<double> cell_z_;
    std::vector<Vec3> point_sum_;
    std::vector<int> point_count_;
    std::vector<unsigned char> touched_;
};

// ---- frame updates ----------------------------------------------------------

struct Detection {
    metrics::BoundingBox bbox; // detector-input pixel coordinates
    double score = 0.0;
    std::string detector_id;
    double timestamp = 0.0;
};

struct PositiveOutcome {
    bool applied = false; // false: off-terrain hit or a zero factor
    int ix = 0, iy = 0;
    Vec3 world_point;
    double p = 0.5;
};

// Casts the significant point onto the terrain and raises the hit cell by the
// sensor model; skipped entirely for false positives that hit no surface cell
// and for updates with any zero factor.
PositiveOutcome positive_update(VoxelGrid& grid, const HeightField& terrain, const Detection& det,
                                const CameraModel& cam, const ObjectClassSpec& cls,
                                const SensorModelParams& params);

struct CellObs {
    int ix = 0, iy = 0;
    double distance = 0.0;
};

// Terrain cells whose centre projects into the input image with positive
// depth, survives the height-field self-occlusion ray test, and falls outside
// every detection bounding box. The parallel version splits rows across
// OpenMP threads; the serial version is the reference the tests compare
// against.
std::vector<CellObs> visible_cells(const VoxelGrid& grid, const HeightField& terrain,
                                   const CameraModel& cam, std::span<const Detection> detections);
std::vector<CellObs> visible_cells_serial(const VoxelGrid& grid, const HeightField& terrain,
                                          const CameraModel& cam,
                                          std::span<const Detection> detections);

// Lowers every visible cell by the distance-weighted sensor model.
void negative_update(VoxelGrid& grid, const HeightField& terrain, const CameraModel& cam,
                     std::span<const Detection> detections, const ObjectClassSpec& cls,
                     const SensorModelParams& params, bool parallel = true);

// One frame from one detector: positive updates for each detection, then a
// single negative sweep.
void update_from_frame(VoxelGrid& grid, const HeightField& terrain,
                       std::span<const Detection> detections, const CameraModel& cam,
                       const ObjectClassSpec& cls, const SensorModelParams& params,
                       bool parallel = true);

// ---- trajectory file --------------------------------------------------------

struct TimedPose {
    double t = 0.0;
    Vec3 position;
    Quat orientation; // world <- camera
};

std::string trajectory_text(std::span<const TimedPose> poses);
std::vector<TimedPose> load_trajectory(const std::string& path);

} // namespace skit::fusion
