#include "skit/fusion.hpp"

#include "skit/textio.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace skit::fusion {

namespace {
constexpr double kProbEpsilon = 1e-6; // pulls computed updates off the {0,1} poles
}

std::optional<Vec2> project(const CameraModel& cam, const Vec3& world) {
    Vec3 pc = cam.rotation.tmul(world - cam.position);
    if (pc.z <= 0.0) return std::nullopt;
    double fx = cam.intr.f_x * cam.intr.input_w / cam.intr.calib_w;
    double fy = cam.intr.f_y * cam.intr.input_h / cam.intr.calib_h;
    return Vec2{cam.intr.input_w / 2.0 + fx * pc.x / pc.z,
                cam.intr.input_h / 2.0 + fy * pc.y / pc.z};
}

Vec3 pixel_ray(const CameraModel& cam, const Vec2& pixel) {
    double fx = cam.intr.f_x * cam.intr.input_w / cam.intr.calib_w;
    double fy = cam.intr.f_y * cam.intr.input_h / cam.intr.calib_h;
    Vec3 dir_cam{(pixel.x - cam.intr.input_w / 2.0) / fx,
                 (pixel.y - cam.intr.input_h / 2.0) / fy, 1.0};
    return normalized(cam.rotation * dir_cam);
}

double projected_extent_px(double img_input, double focal, double obj_m, double img_calib,
                           double dist) {
    if (dist <= 0.0) throw std::invalid_argument("distance must be positive");
    return img_input * focal * obj_m / (img_calib * dist);
}

BBoxExtent expected_bbox_extent(const ObjectClassSpec& cls, const CameraIntrinsics& intr,
                                double dist) {
    BBoxExtent e;
    e.min_w = projected_extent_px(intr.input_w, intr.f_x, cls.obj_w_min, intr.calib_w, dist);
    e.max_w = projected_extent_px(intr.input_w, intr.f_x, cls.obj_w_max, intr.calib_w, dist);
    e.min_h = projected_extent_px(intr.input_h, intr.f_y, cls.obj_h_min, intr.calib_h, dist);
    e.max_h = projected_extent_px(intr.input_h, intr.f_y, cls.obj_h_max, intr.calib_h, dist);
    return e;
}

double tukey_weight(double value, double lo, double hi, double alpha) {
    if (!(lo < hi)) throw std::invalid_argument("tukey window needs lo < hi");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("tukey alpha must be in [0,1]");
    if (value < lo || value > hi) return 0.0;
    if (alpha <= 0.0) return 1.0;
    double t = (value - lo) / (hi - lo);
    double edge = alpha / 2.0;
    if (t >= edge && t <= 1.0 - edge) return 1.0;
    double u = std::min(t, 1.0 - t); // distance into the taper from the nearer edge
    return 0.5 * (1.0 + std::cos(M_PI * (2.0 * u / alpha - 1.0)));
}

double max_detection_distance(const ObjectClassSpec& cls, const CameraIntrinsics& intr,
                              double min_px) {
    if (min_px <= 0.0) throw std::invalid_argument("minimum pixel extent must be positive");
    double dist_w = intr.input_w * intr.f_x * cls.obj_w_min / (intr.calib_w * min_px);
    double dist_h = intr.input_h * intr.f_y * cls.obj_h_min / (intr.calib_h * min_px);
    return std::min(dist_w, dist_h);
}

double distance_factor(double dist, double max_distance) {
    if (dist < 0.0 || max_distance <= 0.0)
        throw std::invalid_argument("distance factor needs dist >= 0 and max_distance > 0");
    return std::max(1.0 - dist / max_distance, 0.0);
}

double log_odds_from_p(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("log-odds undefined for probability " + fmt_double(p));
    return std::log(p / (1.0 - p));
}

double p_from_log_odds(double l) { return 1.0 / (1.0 + std::exp(-l)); }

VoxelGrid::VoxelGrid(const HeightField& terrain, double resolution, double clamp_log_odds)
    : x0_(terrain.x0), y0_(terrain.y0), res_(resolution), clamp_(clamp_log_odds) {
    if (resolution <= 0.0) throw std::invalid_argument("grid resolution must be positive");
    if (clamp_log_odds <= 0.0) throw std::invalid_argument("log-odds clamp must be positive");
    nx_ = std::max(1, static_cast<int>(std::floor(terrain.width() / res_ + 1e-9)));
    ny_ = std::max(1, static_cast<int>(std::floor(terrain.depth() / res_ + 1e-9)));
    size_t n = static_cast<size_t>(nx_) * ny_;
    log_odds_.assign(n, 0.0);
    cell_z_.resize(n);
    point_sum_.assign(n, Vec3{});
    point_count_.assign(n, 0);
    touched_.assign(n, 0);
    for (int iy = 0; iy < ny_; ++iy)
        for (int ix = 0; ix < nx_; ++ix)
            cell_z_[index(ix, iy)] =
                terrain.height(x0_ + (ix + 0.5) * res_, y0_ + (iy + 0.5) * res_);
}

std::optional<std::pair<int, int>> VoxelGrid::cell_of(double x, double y) const {
    int ix = static_cast<int>(std::floor((x - x0_) / res_));
    int iy = static_cast<int>(std::floor((y - y0_) / res_));
    if (!in_bounds(ix, iy)) return std::nullopt;
    return std::make_pair(ix, iy);
}

Vec3 VoxelGrid::cell_center(int ix, int iy) const {
    return {x0_ + (ix + 0.5) * res_, y0_ + (iy + 0.5) * res_, cell_z_[index(ix, iy)]};
}

void VoxelGrid::update(int ix, int iy, double p_update) {
    double delta = log_odds_from_p(p_update);
    size_t i = index(ix, iy);
    log_odds_[i] = std::clamp(log_odds_[i] + delta, -clamp_, clamp_);
    touched_[i] = 1;
}

void VoxelGrid::add_point(int ix, int iy, const Vec3& world_point) {
    size_t i = index(ix, iy);
    point_sum_[i] = point_sum_[i] + world_point;
    point_count_[i] += 1;
}

std::optional<Vec3> VoxelGrid::mean_point(int ix, int iy) const {
    size_t i = index(ix, iy);
    if (point_count_[i] == 0) return std::nullopt;
    return point_sum_[i] * (1.0 / point_count_[i]);
}

std::string VoxelGrid::to_csv() const {
    std::ostringstream out;
    out << "# grid res=" << fmt_double(res_, 12) << " x0=" << fmt_double(x0_, 12)
        << " y0=" << fmt_double(y0_, 12) << " nx=" << nx_ << " ny=" << ny_
        << " clamp=" << fmt_double(clamp_, 12) << "\n";
    out << "ix,iy,x,y,z,log_odds,probability\n";
    for (int iy = 0; iy < ny_; ++iy) {
        for (int ix = 0; ix < nx_; ++ix) {
            if (!touched(ix, iy)) continue;
            Vec3 c = cell_center(ix, iy);
            out << ix << ',' << iy << ',' << fmt_double(c.x, 12) << ',' << fmt_double(c.y, 12)
                << ',' << fmt_double(c.z, 12) << ',' << fmt_double(log_odds(ix, iy), 17) << ','
                << fmt_double(probability(ix, iy), 12) << "\n";
        }
    }
    return out.str();
}

VoxelGrid VoxelGrid::from_csv(const std::string& content, const HeightField& terrain,
                              const std::string& name) {
    std::istringstream in(content);
    std::string header;
    std::getline(in, header);
    double res = 0.0;
    {
        std::istringstream hs(header);
        std::string tok;
        while (hs >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            if (tok.substr(0, eq) == "res") res = std::stod(tok.substr(eq + 1));
        }
    }
    if (res <= 0.0) throw std::runtime_error(name + ": missing grid resolution header");
    VoxelGrid grid(terrain, res);

    std::string line;
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line[0] == '#' || line.rfind("ix,", 0) == 0) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        int ix, iy;
        double x, y, z, l, p;
        if (!(ls >> ix >> iy >> x >> y >> z >> l >> p))
            throw ParseError(name, number, "malformed grid row");
        if (!grid.in_bounds(ix, iy)) throw ParseError(name, number, "cell outside the grid");
        size_t i = grid.index(ix, iy);
        grid.log_odds_[i] = l;
        grid.touched_[i] = 1;
    }
    return grid;
}

PositiveOutcome positive_update(VoxelGrid& grid, const HeightField& terrain, const Detection& det,
                                const CameraModel& cam, const ObjectClassSpec& cls,
                                const SensorModelParams& params) {
    PositiveOutcome out;
    Vec2 sig{(det.bbox.x_min + det.bbox.x_max) / 2.0,
             cls.significant_point == ObjectClassSpec::SignificantPoint::bbox_center
                 ? (det.bbox.y_min + det.bbox.y_max) / 2.0
                 : det.bbox.y_max};
    Vec3 dir = pixel_ray(cam, sig);
    auto hit = raycast_terrain(terrain, cam.position, dir, grid.resolution() / 2.0);
    if (!hit) return out; // false positive over no surface
    auto cell = grid.cell_of(hit->x, hit->y);
    if (!cell) return out;

    double dist = distance(cam.position, *hit);
    BBoxExtent extent = expected_bbox_extent(cls, cam.intr, dist);
    double ww = tukey_weight(det.bbox.width(), extent.min_w, extent.max_w, cls.tukey_alpha);
    double wh = tukey_weight(det.bbox.height(), extent.min_h, extent.max_h, cls.tukey_alpha);
    double p_bbox_area = std::sqrt(ww * wh);

    double p = 0.5 + p_bbox_area * params.p_det_rel * det.score * params.p_positive_max;
    if (p == 0.5) return out; // zero factor: exact no-op, nothing recorded
    p = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);

    grid.update(cell->first, cell->second, p);
    grid.add_point(cell->first, cell->second, *hit);
    out.applied = true;
    out.ix = cell->first;
    out.iy = cell->second;
    out.world_point = *hit;
    out.p = p;
    return out;
}

namespace {

// Elementary visibility of one cell; shared by the serial reference and the
// parallel kernel so both produce bit-identical observations.
inline bool cell_visibility(const VoxelGrid& grid, const HeightField& terrain,
                            const CameraModel& cam, std::span<const Detection> detections, int ix,
                            int iy, double& dist_out) {
    Vec3 center = grid.cell_center(ix, iy);
    auto px = project(cam, center);
    if (!px) return false;
    if (px->x < 0.0 || px->x >= cam.intr.input_w || px->y < 0.0 || px->y >= cam.intr.input_h)
        return false;
    for (const auto& det : detections) {
        if (px->x >= det.bbox.x_min && px->x <= det.bbox.x_max && px->y >= det.bbox.y_min &&
            px->y <= det.bbox.y_max)
            return false; // behind a bounding box, not observed
    }
    Vec3 to_cell = center - cam.position;
    double dist = norm(to_cell);
    if (dist <= 0.0) return false;
    auto hit = raycast_terrain(terrain, cam.position, to_cell * (1.0 / dist),
                               grid.resolution() / 2.0, dist + grid.resolution());
    if (!hit) return false;
    // visible iff the first terrain hit is this cell
    double half = grid.resolution() / 2.0 + 1e-6;
    if (std::fabs(hit->x - center.x) > half || std::fabs(hit->y - center.y) > half) return false;
    dist_out = dist;
    return true;
}

std::vector<CellObs> scan_row(const VoxelGrid& grid, const HeightField& terrain,
                              const CameraModel& cam, std::span<const Detection> detections,
                              int iy) {
    std::vector<CellObs> row;
    for (int ix = 0; ix < grid.nx(); ++ix) {
        double dist = 0.0;
        if (cell_visibility(grid, terrain, cam, detections, ix, iy, dist))
            row.push_back({ix, iy, dist});
    }
    return row;
}

} // namespace

std::vector<CellObs> visible_cells_serial(const VoxelGrid& grid, const HeightField& terrain,
                                          const CameraModel& cam,
                                          std::span<const Detection> detections) {
    std::vector<CellObs> out;
    for (int iy = 0; iy < grid.ny(); ++iy) {
        auto row = scan_row(grid, terrain, cam, detections, iy);
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

std::vector<CellObs> visible_cells(const VoxelGrid& grid, const HeightField& terrain,
                                   const CameraModel& cam, std::span<const Detection> detections) {
    std::vector<std::vector<CellObs>> rows(grid.ny());
#pragma omp parallel for schedule(dynamic, 4)
    for (int iy = 0; iy < grid.ny(); ++iy)
        rows[iy] = scan_row(grid, terrain, cam, detections, iy);

    std::vector<CellObs> out;
    for (auto& row : rows) out.insert(out.end(), row.begin(), row.end());
    return out;
}

void negative_update(VoxelGrid& grid, const HeightField& terrain, const CameraModel& cam,
                     std::span<const Detection> detections, const ObjectClassSpec& cls,
                     const SensorModelParams& params, bool parallel) {
    double max_dist = max_detection_distance(cls, cam.intr, params.min_detectable_px);
    auto cells = parallel ? visible_cells(grid, terrain, cam, detections)
                          : visible_cells_serial(grid, terrain, cam, detections);
    for (const auto& obs : cells) {
        double p = 0.5 - distance_factor(obs.distance, max_dist) * params.p_det_rel *
                             params.p_negative_max;
        if (p == 0.5) continue;
        p = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
        grid.update(obs.ix, obs.iy, p);
    }
}

void update_from_frame(VoxelGrid& grid, const HeightField& terrain,
                       std::span<const Detection> detections, const CameraModel& cam,
                       const ObjectClassSpec& cls, const SensorModelParams& params,
                       bool parallel) {
    for (const auto& det : detections) positive_update(grid, terrain, det, cam, cls, params);
    negative_update(grid, terrain, cam, detections, cls, params, parallel);
}

std::string trajectory_text(std::span<const TimedPose> poses) {
    std::ostringstream out;
    out << "# t x y z qw qx qy qz\n";
    for (const auto& p : poses) {
        out << fmt_double(p.t, 12) << ' ' << fmt_double(p.position.x, 12) << ' '
            << fmt_double(p.position.y, 12) << ' ' << fmt_double(p.position.z, 12) << ' '
            << fmt_double(p.orientation.w, 12) << ' ' << fmt_double(p.orientation.x, 12) << ' '
            << fmt_double(p.orientation.y, 12) << ' ' << fmt_double(p.orientation.z, 12) << "\n";
    }
    return out.str();
}

std::vector<TimedPose> load_trajectory(const std::string& path) {
    std::vector<TimedPose> out;
    for (const auto& ln : read_sectioned_file(path)) {
        auto toks = split_ws(ln.text);
        if (toks.size() != 8)
            throw ParseError(path, ln.number, "expected: t x y z qw qx qy qz");
        TimedPose p;
        p.t = parse_double(toks[0], ln, path);
        p.position = {parse_double(toks[1], ln, path), parse_double(toks[2], ln, path),
                      parse_double(toks[3], ln, path)};
        p.orientation = {parse_double(toks[4], ln, path), parse_double(toks[5], ln, path),
                         parse_double(toks[6], ln, path), parse_double(toks[7], ln, path)};
        out.push_back(p);
    }
    return out;
}

} // namespace skit::fusion
