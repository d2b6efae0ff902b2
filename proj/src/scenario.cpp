#include "skit/scenario.hpp"

#include "skit/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace skit::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

} // namespace

double SyntheticDetectorSpec::tp_rate_for_size(double pixel_size) const {
    // anchored at the COCO size-bucket boundaries on sqrt(area)
    if (pixel_size <= 32.0) return tp_small;
    if (pixel_size >= 96.0) return tp_large;
    if (pixel_size <= 64.0) return tp_small + (tp_medium - tp_small) * (pixel_size - 32.0) / 32.0;
    return tp_medium + (tp_large - tp_medium) * (pixel_size - 64.0) / 32.0;
}

double TrajectorySpec::path_length() const {
    double len = 0.0;
    for (size_t i = 1; i < waypoints.size(); ++i) len += norm(waypoints[i] - waypoints[i - 1]);
    return len;
}

double Scenario::duration() const {
    if (duration_s > 0.0) return duration_s;
    double len = trajectory.path_length();
    if (trajectory.speed <= 0.0 || len <= 0.0)
        throw std::invalid_argument("scenario needs either waypoints with speed or a duration");
    return len / trajectory.speed;
}

const fusion::ObjectClassSpec& Scenario::class_spec(const std::string& id) const {
    auto it = classes.find(id);
    if (it == classes.end()) throw std::invalid_argument("unknown object class '" + id + "'");
    return it->second;
}

Vec3 Scenario::object_position(const WorldObject& o, double t) const {
    double x = o.x + o.vx * t;
    double y = o.y + o.vy * t;
    return {x, y, terrain.height(x, y)};
}

double Scenario::pool_max_fc() const {
    double best = 0.0;
    for (const auto& d : detectors) best = std::max(best, d.f_c);
    return best > 0.0 ? best : 1.0;
}

fusion::CameraModel render_pose(const Scenario& s, double t) {
    const TrajectorySpec& traj = s.trajectory;
    if (traj.waypoints.empty()) throw std::invalid_argument("trajectory has no waypoints");
    if (t < -1e-9 || t > s.duration() + 1e-9)
        throw std::out_of_range("time outside the trajectory duration");

    Vec3 pos = traj.waypoints.front();
    double yaw = traj.yaw_deg * M_PI / 180.0;
    double remaining = std::max(t, 0.0) * traj.speed;
    for (size_t i = 1; i < traj.waypoints.size(); ++i) {
        Vec3 a = traj.waypoints[i - 1], b = traj.waypoints[i];
        double seg = norm(b - a);
        if (seg <= 0.0) continue;
        Vec3 dir = (b - a) * (1.0 / seg);
        if (remaining <= seg || i + 1 == traj.waypoints.size()) {
            double d = std::min(remaining, seg);
            pos = a + dir * d;
            yaw = std::atan2(dir.y, dir.x);
            remaining = 0.0;
            break;
        }
        remaining -= seg;
        pos = b;
    }

    double tilt = traj.tilt_deg * M_PI / 180.0;
    double ct = std::cos(tilt), st = std::sin(tilt);
    double cy = std::cos(yaw), sy = std::sin(yaw);
    Vec3 view{ct * cy, ct * sy, -st};       // camera z: optical axis
    Vec3 down{-st * cy, -st * sy, -ct};     // camera y: image down
    Vec3 right = cross(down, view);         // camera x

    fusion::CameraModel cam;
    cam.intr = s.camera;
    cam.position = pos;
    cam.rotation = Mat3::from_columns(right, down, view);
    return cam;
}

std::vector<Projection> render_frame(const Scenario& s, double t) {
    fusion::CameraModel cam = render_pose(s, t);
    std::vector<Projection> out;
    for (size_t i = 0; i < s.objects.size(); ++i) {
        const WorldObject& o = s.objects[i];
        Vec3 base = s.object_position(o, t);
        if (!s.terrain.contains(base.x, base.y)) continue;
        auto px = fusion::project(cam, base);
        if (!px) continue;
        if (px->x < 0.0 || px->x >= s.camera.input_w || px->y < 0.0 || px->y >= s.camera.input_h)
            continue;

        double dist = distance(cam.position, base);
        // terrain self-occlusion: the first surface hit must be the object base
        Vec3 dir = (base - cam.position) * (1.0 / dist);
        auto hit = raycast_terrain(s.terrain, cam.position, dir, s.terrain.res / 2.0, dist + 2.0);
        if (hit && distance(cam.position, *hit) < dist - 0.5) continue;

        double w = fusion::projected_extent_px(s.camera.input_w, s.camera.f_x, o.width_m,
                                               s.camera.calib_w, dist);
        double h = fusion::projected_extent_px(s.camera.input_h, s.camera.f_y, o.height_m,
                                               s.camera.calib_h, dist);
        Projection proj;
        proj.object_index = static_cast<int>(i);
        proj.bbox.x_min = std::max(px->x - w / 2.0, 0.0);
        proj.bbox.x_max = std::min(px->x + w / 2.0, s.camera.input_w);
        proj.bbox.y_min = std::max(px->y - h, 0.0);
        proj.bbox.y_max = std::min(px->y, s.camera.input_h);
        if (proj.bbox.width() < 2.0 || proj.bbox.height() < 2.0) continue;
        proj.ground_point = base;
        proj.dist = dist;
        out.push_back(proj);
    }
    return out;
}

std::mt19937_64 frame_rng(std::uint64_t seed, long long frame, int detector_index) {
    std::uint64_t state = splitmix64(seed);
    state = splitmix64(state ^ static_cast<std::uint64_t>(frame + 1));
    state = splitmix64(state ^ (static_cast<std::uint64_t>(detector_index + 1) << 32));
    return std::mt19937_64(state);
}

std::vector<SampledDetection> sample_detections_full(const SyntheticDetectorSpec& spec,
                                                     const Scenario& s,
                                                     std::span<const Projection> projections,
                                                     double t, std::mt19937_64& rng,
                                                     double tp_scale) {
    std::vector<SampledDetection> out;
    std::uniform_real_distribution<double> uni01(0.0, 1.0);

    auto noisy_score = [&rng](double mean, double std) {
        if (std <= 0.0) return std::clamp(mean, 0.01, 1.0);
        std::normal_distribution<double> n(mean, std);
        return std::clamp(n(rng), 0.01, 1.0);
    };
    auto clip = [&s](metrics::BoundingBox& b) {
        b.x_min = std::max(b.x_min, 0.0);
        b.y_min = std::max(b.y_min, 0.0);
        b.x_max = std::min(b.x_max, s.camera.input_w);
        b.y_max = std::min(b.y_max, s.camera.input_h);
        return b.width() >= 1.0 && b.height() >= 1.0;
    };

    for (const auto& proj : projections) {
        double rate = clamp01(spec.tp_rate_for_size(std::sqrt(proj.bbox.area())) * tp_scale);
        if (uni01(rng) >= rate) continue;

        metrics::BoundingBox b = proj.bbox;
        double cx = (b.x_min + b.x_max) / 2.0, cy = (b.y_min + b.y_max) / 2.0;
        double w = b.width(), h = b.height();
        if (spec.center_noise_px > 0.0) {
            std::normal_distribution<double> n(0.0, spec.center_noise_px);
            cx += n(rng);
            cy += n(rng);
        }
        if (spec.scale_noise > 0.0) {
            std::normal_distribution<double> n(0.0, spec.scale_noise);
            double factor = std::exp(n(rng));
            w *= factor;
            h *= factor;
        }
        b.x_min = cx - w / 2.0;
        b.x_max = cx + w / 2.0;
        b.y_min = cy - h / 2.0;
        b.y_max = cy + h / 2.0;
        if (!clip(b)) continue;

        SampledDetection det;
        det.detection.bbox = b;
        det.detection.score = noisy_score(spec.tp_score_mean, spec.tp_score_std);
        det.detection.detector_id = spec.profile_id;
        det.detection.timestamp = t;
        det.is_tp = true;
        det.object_index = proj.object_index;
        out.push_back(std::move(det));
    }

    if (spec.fp_per_frame > 0.0) {
        std::poisson_distribution<int> pois(spec.fp_per_frame);
        int n_fp = pois(rng);
        std::uniform_real_distribution<double> ux(0.0, s.camera.input_w);
        std::uniform_real_distribution<double> uy(0.0, s.camera.input_h);
        std::uniform_real_distribution<double> usz(spec.fp_size_min_px, spec.fp_size_max_px);
        for (int i = 0; i < n_fp; ++i) {
            double cx = ux(rng), cy = uy(rng), w = usz(rng), h = usz(rng);
            metrics::BoundingBox b;
            b.x_min = cx - w / 2.0;
            b.y_min = cy - h / 2.0;
            b.x_max = cx + w / 2.0;
            b.y_max = cy + h / 2.0;
            if (!clip(b)) continue;
            SampledDetection det;
            det.detection.bbox = b;
            det.detection.score = noisy_score(spec.fp_score_mean, spec.fp_score_std);
            det.detection.detector_id = spec.profile_id;
            det.detection.timestamp = t;
            out.push_back(std::move(det));
        }
    }
    return out;
}

std::vector<fusion::Detection> sample_detections(const SyntheticDetectorSpec& spec,
                                                 const Scenario& s,
                                                 std::span<const Projection> projections, double t,
                                                 std::mt19937_64& rng, double tp_scale) {
    std::vector<fusion::Detection> out;
    for (auto& d : sample_detections_full(spec, s, projections, t, rng, tp_scale))
        out.push_back(std::move(d.detection));
    return out;
}

bool DetectorRun::runs_on(long long frame) const {
    if (frames_on.empty()) {
        int period = std::max(spec.period, 1);
        return frame % period == 0;
    }
    long long slot = frame % std::max(cycle, 1);
    return std::find(frames_on.begin(), frames_on.end(), static_cast<int>(slot)) !=
           frames_on.end();
}

RunReport run_experiment(const Scenario& s, const RunConfig& config) {
    if (s.objects.empty() && s.classes.empty())
        throw std::invalid_argument("scenario defines no objects and no classes");

    // one grid per class; replay scenarios use a single class
    std::string class_id =
        !s.objects.empty() ? s.objects.front().class_id : s.classes.begin()->first;
    for (const auto& o : s.objects)
        if (o.class_id != class_id)
            throw std::invalid_argument("replay supports one object class per grid");
    const fusion::ObjectClassSpec& cls = s.class_spec(class_id);

    std::vector<DetectorRun> runs;
    if (config.runs) {
        runs = *config.runs;
    } else {
        for (size_t i = 0; i < s.detectors.size(); ++i) {
            if (s.detectors[i].period <= 0) continue; // fidelity-pool reference only
            DetectorRun run;
            run.spec = s.detectors[i];
            run.detector_index = static_cast<int>(i);
            run.p_det_rel = s.detectors[i].f_c / s.pool_max_fc();
            runs.push_back(std::move(run));
        }
    }
    if (runs.empty()) throw std::invalid_argument("no detectors to run");

    fusion::VoxelGrid grid(s.terrain, s.fusion.grid_resolution, s.fusion.clamp_log_odds);

    double duration = s.duration();
    long long n_frames = static_cast<long long>(std::floor(duration * s.frame_rate + 1e-9)) + 1;

    RunReport report;
    report.n_frames = n_frames;
    double tp_score_sum = 0.0;
    std::vector<fusion::TimedPose> poses;

    for (long long frame = 0; frame < n_frames; ++frame) {
        double t = frame / s.frame_rate;
        fusion::CameraModel cam = render_pose(s, std::min(t, duration));
        poses.push_back({t, cam.position, quat_from_mat(cam.rotation)});
        std::vector<Projection> projections = render_frame(s, std::min(t, duration));

        for (const auto& run : runs) {
            if (!run.runs_on(frame)) continue;
            auto rng = frame_rng(s.seed, frame, run.detector_index);
            auto sampled = sample_detections_full(run.spec, s, projections, t, rng, run.tp_scale);

            std::vector<fusion::Detection> dets;
            dets.reserve(sampled.size());
            for (auto& sd : sampled) {
                if (sd.is_tp) {
                    report.n_true_positive_dets += 1;
                    tp_score_sum += sd.detection.score;
                } else {
                    report.n_false_positive_dets += 1;
                }
                dets.push_back(sd.detection);
            }

            fusion::SensorModelParams params;
            params.p_det_rel = config.p_det_rel_override.value_or(run.p_det_rel);
            params.p_positive_max = s.fusion.p_positive_max;
            params.p_negative_max = s.fusion.p_negative_max;
            params.min_detectable_px = s.fusion.min_detectable_px;
            fusion::update_from_frame(grid, s.terrain, dets, cam, cls, params, config.parallel);
        }
    }

    report.salient =
        salient::salient_locations(grid, s.fusion.extraction_threshold, s.fusion.cluster_link_dist);

    // greedy nearest-neighbour association between salient locations and the
    // objects' final ground-truth positions
    std::vector<Vec3> truth;
    for (const auto& o : s.objects) truth.push_back(s.object_position(o, duration));
    struct Cand {
        double dist;
        int si, oi;
    };
    std::vector<Cand> cands;
    for (size_t si = 0; si < report.salient.size(); ++si)
        for (size_t oi = 0; oi < truth.size(); ++oi) {
            Vec3 d = report.salient[si].position - truth[oi];
            double dd = std::sqrt(d.x * d.x + d.y * d.y); // ground-plane error
            if (dd <= s.fusion.match_radius)
                cands.push_back({dd, static_cast<int>(si), static_cast<int>(oi)});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return std::tie(a.dist, a.si, a.oi) < std::tie(b.dist, b.si, b.oi);
    });
    std::vector<bool> s_used(report.salient.size(), false), o_used(truth.size(), false);
    double err_sum = 0.0;
    int matched = 0;
    report.objects.assign(truth.size(), ObjectOutcome{});
    for (size_t oi = 0; oi < truth.size(); ++oi) report.objects[oi].object = static_cast<int>(oi);
    for (const auto& c : cands) {
        if (s_used[c.si] || o_used[c.oi]) continue;
        s_used[c.si] = o_used[c.oi] = true;
        report.objects[c.oi].salient_index = c.si;
        report.objects[c.oi].error = c.dist;
        err_sum += c.dist;
        ++matched;
    }
    for (size_t si = 0; si < report.salient.size(); ++si)
        if (!s_used[si]) report.unmatched_salient.push_back(static_cast<int>(si));
    report.n_missed = static_cast<int>(truth.size()) - matched;
    report.mean_geolocation_error = matched > 0 ? err_sum / matched : 0.0;

    double prob_sum = 0.0;
    for (const auto& loc : report.salient) prob_sum += loc.probability;
    report.mean_salient_probability =
        report.salient.empty() ? 0.0 : prob_sum / report.salient.size();
    report.mean_tp_score =
        report.n_true_positive_dets > 0 ? tp_score_sum / report.n_true_positive_dets : 0.0;

    report.grid_csv = grid.to_csv();
    report.salient_csv = salient::salient_csv(report.salient);
    report.trajectory_txt = fusion::trajectory_text(poses);
    return report;
}

std::string report_summary(const RunReport& r) {
    std::ostringstream out;
    out << "frames: " << r.n_frames << "\n";
    out << "salient_locations: " << r.salient.size() << "\n";
    out << "matched_objects: " << (r.objects.size() - r.n_missed) << "/" << r.objects.size()
        << "\n";
    out << "missed_objects: " << r.n_missed << "\n";
    out << "false_positive_locations: " << r.unmatched_salient.size() << "\n";
    out << "mean_geolocation_error_m: " << fmt_double(r.mean_geolocation_error, 6) << "\n";
    out << "mean_salient_probability: " << fmt_double(r.mean_salient_probability, 6) << "\n";
    out << "mean_tp_score: " << fmt_double(r.mean_tp_score, 6) << "\n";
    out << "true_positive_detections: " << r.n_true_positive_dets << "\n";
    out << "false_positive_detections: " << r.n_false_positive_dets << "\n";
    return out.str();
}

// ---- scenario file ----------------------------------------------------------

Scenario parse_scenario(const std::string& content, const std::string& name) {
    Scenario s;
    double tx0 = 0, ty0 = 0, twidth = 0, theight = 0, tres = 1.0, tbase = 0.0;
    struct Ridge {
        double ax, ay, bx, by, peak, half_width;
    };
    std::vector<Ridge> ridges;

    for (const auto& ln : parse_sectioned_text(content, name)) {
        std::string key, value;
        if (!split_key_value(ln.text, key, value))
            throw ParseError(name, ln.number, "expected key = value");
        auto toks = split_ws(value);
        auto num = [&](size_t i) { return parse_double(toks[i], ln, name); };

        if (ln.section == "terrain") {
            if (key == "x0") tx0 = num(0);
            else if (key == "y0") ty0 = num(0);
            else if (key == "width") twidth = num(0);
            else if (key == "height") theight = num(0);
            else if (key == "resolution") tres = num(0);
            else if (key == "base") tbase = num(0);
            else if (key == "ridge") {
                if (toks.size() != 6)
                    throw ParseError(name, ln.number, "ridge = ax ay bx by peak half_width");
                ridges.push_back({num(0), num(1), num(2), num(3), num(4), num(5)});
            } else throw ParseError(name, ln.number, "unknown terrain key '" + key + "'");
        } else if (ln.section == "camera") {
            if (key == "f_x") s.camera.f_x = num(0);
            else if (key == "f_y") s.camera.f_y = num(0);
            else if (key == "calib_w") s.camera.calib_w = num(0);
            else if (key == "calib_h") s.camera.calib_h = num(0);
            else if (key == "input_w") s.camera.input_w = num(0);
            else if (key == "input_h") s.camera.input_h = num(0);
            else throw ParseError(name, ln.number, "unknown camera key '" + key + "'");
        } else if (ln.section == "trajectory") {
            if (key == "speed") s.trajectory.speed = num(0);
            else if (key == "tilt_deg") s.trajectory.tilt_deg = num(0);
            else if (key == "yaw_deg") s.trajectory.yaw_deg = num(0);
            else if (key == "waypoint") {
                if (toks.size() != 3) throw ParseError(name, ln.number, "waypoint = x y z");
                s.trajectory.waypoints.push_back({num(0), num(1), num(2)});
            } else throw ParseError(name, ln.number, "unknown trajectory key '" + key + "'");
        } else if (ln.section == "objects") {
            if (key != "object" || (toks.size() != 5 && toks.size() != 7))
                throw ParseError(name, ln.number, "object = x y class w h [vx vy]");
            WorldObject o;
            o.x = num(0);
            o.y = num(1);
            o.class_id = toks[2];
            o.width_m = num(3);
            o.height_m = num(4);
            if (toks.size() == 7) {
                o.vx = num(5);
                o.vy = num(6);
            }
            s.objects.push_back(std::move(o));
        } else if (ln.section == "classes") {
            if (key != "class" || toks.size() != 7)
                throw ParseError(name, ln.number,
                                 "class = id w_min w_max h_min h_max alpha center|bottom_center");
            fusion::ObjectClassSpec cls;
            cls.class_id = toks[0];
            cls.obj_w_min = num(1);
            cls.obj_w_max = num(2);
            cls.obj_h_min = num(3);
            cls.obj_h_max = num(4);
            cls.tukey_alpha = num(5);
            if (toks[6] == "center")
                cls.significant_point = fusion::ObjectClassSpec::SignificantPoint::bbox_center;
            else if (toks[6] == "bottom_center")
                cls.significant_point =
                    fusion::ObjectClassSpec::SignificantPoint::bbox_bottom_center;
            else throw ParseError(name, ln.number, "significant point must be center|bottom_center");
            s.classes[cls.class_id] = std::move(cls);
        } else if (ln.section == "detectors") {
            if (key != "detector" || toks.size() < 13)
                throw ParseError(name, ln.number,
                                 "detector = id period f_c tp_s tp_m tp_l fp_rate noise_px "
                                 "scale_noise tp_mean tp_std fp_mean fp_std [scale@KBPS=MULT...]");
            SyntheticDetectorSpec d;
            d.profile_id = toks[0];
            d.period = static_cast<int>(parse_int(toks[1], ln, name));
            d.f_c = num(2);
            d.tp_small = num(3);
            d.tp_medium = num(4);
            d.tp_large = num(5);
            d.fp_per_frame = num(6);
            d.center_noise_px = num(7);
            d.scale_noise = num(8);
            d.tp_score_mean = num(9);
            d.tp_score_std = num(10);
            d.fp_score_mean = num(11);
            d.fp_score_std = num(12);
            for (size_t i = 13; i < toks.size(); ++i) {
                if (toks[i].rfind("scale@", 0) != 0)
                    throw ParseError(name, ln.number, "expected scale@KBPS=MULT");
                auto eq = toks[i].find('=');
                double kbps = parse_double(toks[i].substr(6, eq - 6), ln, name);
                d.bitrate_tp_scale[kbps] = parse_double(toks[i].substr(eq + 1), ln, name);
            }
            s.detectors.push_back(std::move(d));
        } else if (ln.section == "fusion") {
            if (key == "grid_resolution") s.fusion.grid_resolution = num(0);
            else if (key == "p_positive_max") s.fusion.p_positive_max = num(0);
            else if (key == "p_negative_max") s.fusion.p_negative_max = num(0);
            else if (key == "clamp_log_odds") s.fusion.clamp_log_odds = num(0);
            else if (key == "extraction_threshold") s.fusion.extraction_threshold = num(0);
            else if (key == "cluster_link_dist") s.fusion.cluster_link_dist = num(0);
            else if (key == "min_detectable_px") s.fusion.min_detectable_px = num(0);
            else if (key == "match_radius") s.fusion.match_radius = num(0);
            else throw ParseError(name, ln.number, "unknown fusion key '" + key + "'");
        } else if (ln.section == "sim") {
            if (key == "frame_rate") s.frame_rate = num(0);
            else if (key == "seed") s.seed = static_cast<std::uint64_t>(parse_int(toks[0], ln, name));
            else if (key == "duration") s.duration_s = num(0);
            else throw ParseError(name, ln.number, "unknown sim key '" + key + "'");
        } else {
            throw ParseError(name, ln.number, "unknown section [" + ln.section + "]");
        }
    }

    if (twidth <= 0 || theight <= 0)
        throw std::invalid_argument(name + ": terrain needs positive width and height");
    s.terrain = HeightField::flat(tx0, ty0, twidth, theight, tres, tbase);
    for (const auto& r : ridges)
        s.terrain.add_ridge(r.ax, r.ay, r.bx, r.by, r.peak, r.half_width);
    if (s.camera.f_x <= 0 || s.camera.f_y <= 0 || s.camera.calib_w <= 0 || s.camera.calib_h <= 0 ||
        s.camera.input_w <= 0 || s.camera.input_h <= 0)
        throw std::invalid_argument(name + ": camera intrinsics incomplete");
    for (const auto& o : s.objects)
        if (!s.classes.count(o.class_id))
            throw std::invalid_argument(name + ": object references unknown class '" + o.class_id +
                                        "'");
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

std::vector<DetectorRun> runs_from_assignment(const Scenario& s,
                                              const alloc::AllocationProblem& p,
                                              const alloc::Assignment& a) {
    auto feasible = alloc::get_detectors(p);
    std::vector<DetectorRun> runs;
    for (const auto& c : a.chosen) {
        if (c.stream != 0) continue; // the replay drives the first stream
        const auto& prof = p.detectors[feasible[c.detector].det_index];
        int pool_index = -1;
        for (size_t i = 0; i < s.detectors.size(); ++i)
            if (s.detectors[i].profile_id == prof.id) pool_index = static_cast<int>(i);
        if (pool_index < 0)
            throw std::invalid_argument("scenario has no synthetic detector '" + prof.id + "'");
        DetectorRun run;
        run.spec = s.detectors[pool_index];
        run.detector_index = pool_index;
        run.p_det_rel = s.detectors[pool_index].f_c / s.pool_max_fc();
        double bitrate = p.bitrates_kbps[c.bitrate];
        if (auto it = run.spec.bitrate_tp_scale.find(bitrate); it != run.spec.bitrate_tp_scale.end())
            run.tp_scale = it->second;
        run.cycle = a.cp_lcm;
        for (int f = 0; f < a.cp_lcm; ++f) {
            const auto& frame = a.schedule[c.stream][f];
            if (std::find(frame.begin(), frame.end(), c.detector) != frame.end())
                run.frames_on.push_back(f);
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

void apply_override(Scenario& s, const std::string& key, const std::string& value,
                    std::optional<double>& p_det_rel_override) {
    auto d = [&value] { return std::stod(value); };
    if (key == "p_det_rel") p_det_rel_override = d();
    else if (key == "grid_resolution" || key == "grid-res") s.fusion.grid_resolution = d();
    else if (key == "p_positive_max") s.fusion.p_positive_max = d();
    else if (key == "p_negative_max") s.fusion.p_negative_max = d();
    else if (key == "clamp_log_odds") s.fusion.clamp_log_odds = d();
    else if (key == "extraction_threshold") s.fusion.extraction_threshold = d();
    else if (key == "cluster_link_dist") s.fusion.cluster_link_dist = d();
    else if (key == "min_detectable_px") s.fusion.min_detectable_px = d();
    else if (key == "match_radius") s.fusion.match_radius = d();
    else if (key == "frame_rate") s.frame_rate = d();
    else if (key == "seed") s.seed = std::stoull(value);
    else if (key == "duration") s.duration_s = d();
    else throw std::invalid_argument("unknown override '" + key + "'");
}

} // namespace skit::sim
