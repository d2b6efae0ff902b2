#include "skit/scenario.hpp"

#include "skit/textio.hpp"

#include <doctest.h>

#include <cmath>

using namespace skit;
using namespace skit::sim;

namespace {

const char* kHoverScenario = R"(
[terrain]
x0 = 0
y0 = 0
width = 40
height = 40
resolution = 1
base = 0

[camera]
f_x = 1000
f_y = 1000
calib_w = 640
calib_h = 480
input_w = 640
input_h = 480

[trajectory]
speed = 0
tilt_deg = 90
yaw_deg = 0
waypoint = 20 20 15

[objects]
object = 20 20 person 0.5 1.7

[classes]
class = person 0.3 1.0 1.2 2.2 0.5 bottom_center

[detectors]
detector = det_a 1 1.0 1 1 1 0 0 0 0.9 0 0.3 0

[fusion]
grid_resolution = 1.0
p_positive_max = 0.4
p_negative_max = 0.05

[sim]
frame_rate = 2
seed = 7
duration = 2
)";

const char* kSweepScenario = R"(
[terrain]
x0 = 0
y0 = 0
width = 50
height = 40
resolution = 1
base = 0

[camera]
f_x = 800
f_y = 800
calib_w = 640
calib_h = 480
input_w = 640
input_h = 480

[trajectory]
speed = 3
tilt_deg = 45
waypoint = 2 20 15
waypoint = 44 20 15

[objects]
object = 15 24 person 0.6 1.7
object = 22 17 person 0.6 1.7
object = 30 21 person 0.6 1.7

[classes]
class = person 0.3 1.0 1.2 2.2 0.5 bottom_center

[detectors]
detector = det_a 1 1.0 1 1 1 0 0 0 0.9 0 0.3 0

[fusion]
grid_resolution = 0.5
p_positive_max = 0.4
p_negative_max = 0.05
extraction_threshold = 0.75
cluster_link_dist = 2.0

[sim]
frame_rate = 3
seed = 11
)";

} // namespace

TEST_CASE("pose interpolation") {
    Scenario s = parse_scenario(kSweepScenario, "sweep");

    SUBCASE("waypoint times reproduce the waypoints exactly") {
        auto cam0 = render_pose(s, 0.0);
        CHECK(cam0.position.x == 2.0);
        CHECK(cam0.position.y == 20.0);
        CHECK(cam0.position.z == 15.0);
        double t_end = s.trajectory.path_length() / s.trajectory.speed;
        auto cam1 = render_pose(s, t_end);
        CHECK(cam1.position.x == doctest::Approx(44.0));
    }
    SUBCASE("positions advance at the configured speed") {
        auto cam = render_pose(s, 2.0);
        CHECK(cam.position.x == doctest::Approx(8.0)); // 2 + 3 m/s * 2 s
    }
    SUBCASE("out-of-range times are rejected") {
        CHECK_THROWS_AS(render_pose(s, 1e6), std::out_of_range);
    }
    SUBCASE("the rotation is proper") {
        auto cam = render_pose(s, 1.0);
        Vec3 x = cam.rotation.col(0), y = cam.rotation.col(1), z = cam.rotation.col(2);
        CHECK(dot(x, y) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(norm(cross(x, y) - z) == doctest::Approx(0.0).epsilon(1e-12));
        // tilt 45 down: view z-component is -sin(45)
        CHECK(z.z == doctest::Approx(-std::sin(M_PI / 4)));
    }
}

TEST_CASE("ideal projections") {
    Scenario s = parse_scenario(kHoverScenario, "hover");

    SUBCASE("nadir object at 15 m projects per the size equation") {
        auto projections = render_frame(s, 0.0);
        REQUIRE(projections.size() == 1);
        // 1000 px focal, 0.5 m wide at 15 m: 33.3 px
        CHECK(projections[0].bbox.width() == doctest::Approx(1000.0 * 0.5 / 15.0).epsilon(1e-6));
        CHECK(projections[0].bbox.height() == doctest::Approx(1000.0 * 1.7 / 15.0).epsilon(1e-6));
        // bottom-center of the box sits on the projected base
        CHECK((projections[0].bbox.x_min + projections[0].bbox.x_max) / 2 ==
              doctest::Approx(320.0));
        CHECK(projections[0].bbox.y_max == doctest::Approx(240.0));
    }
    SUBCASE("objects outside the frustum are absent") {
        Scenario far = s;
        far.objects[0].x = 39.0; // footprint at 15 m altitude is much narrower
        CHECK(render_frame(far, 0.0).empty());
    }
    SUBCASE("projection and ray-cast round-trip to the object cell") {
        auto projections = render_frame(s, 0.0);
        REQUIRE(!projections.empty());
        fusion::CameraModel cam = render_pose(s, 0.0);
        Vec2 sig{(projections[0].bbox.x_min + projections[0].bbox.x_max) / 2,
                 projections[0].bbox.y_max};
        auto hit = raycast_terrain(s.terrain, cam.position, fusion::pixel_ray(cam, sig), 0.25);
        REQUIRE(hit);
        CHECK(hit->x == doctest::Approx(20.0).epsilon(1e-2));
        CHECK(hit->y == doctest::Approx(20.0).epsilon(1e-2));
    }
}

TEST_CASE("detection sampling") {
    Scenario s = parse_scenario(kHoverScenario, "hover");
    auto projections = render_frame(s, 0.0);
    REQUIRE(!projections.empty());

    SUBCASE("perfect rate with zero noise reproduces the ideal projections") {
        auto rng = frame_rng(s.seed, 0, 0);
        auto dets = sample_detections(s.detectors[0], s, projections, 0.0, rng);
        REQUIRE(dets.size() == 1);
        CHECK(dets[0].bbox.x_min == projections[0].bbox.x_min);
        CHECK(dets[0].bbox.y_max == projections[0].bbox.y_max);
        CHECK(dets[0].score == 0.9);
    }
    SUBCASE("zero rates produce nothing") {
        SyntheticDetectorSpec blind = s.detectors[0];
        blind.tp_small = blind.tp_medium = blind.tp_large = 0.0;
        blind.fp_per_frame = 0.0;
        auto rng = frame_rng(s.seed, 0, 0);
        CHECK(sample_detections(blind, s, projections, 0.0, rng).empty());
    }
    SUBCASE("a fixed seed reproduces the stream exactly") {
        SyntheticDetectorSpec noisy = s.detectors[0];
        noisy.center_noise_px = 2.0;
        noisy.scale_noise = 0.05;
        noisy.fp_per_frame = 1.5;
        noisy.tp_score_std = 0.05;
        auto r1 = frame_rng(42, 3, 1);
        auto r2 = frame_rng(42, 3, 1);
        auto a = sample_detections(noisy, s, projections, 0.0, r1);
        auto b = sample_detections(noisy, s, projections, 0.0, r2);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].bbox.x_min == b[i].bbox.x_min);
            CHECK(a[i].bbox.y_max == b[i].bbox.y_max);
            CHECK(a[i].score == b[i].score);
        }
        // a different frame index shifts the stream
        auto r3 = frame_rng(42, 4, 1);
        auto c = sample_detections(noisy, s, projections, 0.0, r3);
        bool same = a.size() == c.size();
        if (same)
            for (size_t i = 0; i < a.size(); ++i)
                same = same && a[i].bbox.x_min == c[i].bbox.x_min && a[i].score == c[i].score;
        CHECK_FALSE(same);
    }
    SUBCASE("size-dependent rate interpolates between the bucket anchors") {
        SyntheticDetectorSpec d;
        d.tp_small = 0.2;
        d.tp_medium = 0.6;
        d.tp_large = 1.0;
        CHECK(d.tp_rate_for_size(10.0) == 0.2);
        CHECK(d.tp_rate_for_size(32.0) == 0.2);
        CHECK(d.tp_rate_for_size(48.0) == doctest::Approx(0.4));
        CHECK(d.tp_rate_for_size(64.0) == doctest::Approx(0.6));
        CHECK(d.tp_rate_for_size(80.0) == doctest::Approx(0.8));
        CHECK(d.tp_rate_for_size(120.0) == 1.0);
    }
}

TEST_CASE("end-to-end replay") {
    Scenario s = parse_scenario(kSweepScenario, "sweep");

    SUBCASE("noise-free replay geolocates within the grid quantisation bound") {
        RunReport report = run_experiment(s);
        CHECK(report.n_missed == 0);
        CHECK(report.salient.size() >= s.objects.size());
        for (const auto& o : report.objects) {
            REQUIRE(o.salient_index >= 0);
            CHECK(o.error <= s.fusion.grid_resolution * std::sqrt(2.0) / 2.0 + 0.05);
        }
    }
    SUBCASE("identical scenario and seed give byte-identical reports") {
        RunReport a = run_experiment(s);
        RunReport b = run_experiment(s);
        CHECK(a.grid_csv == b.grid_csv);
        CHECK(a.salient_csv == b.salient_csv);
        CHECK(a.trajectory_txt == b.trajectory_txt);
        CHECK(report_summary(a) == report_summary(b));
    }
    SUBCASE("serial and parallel fusion agree") {
        RunConfig serial;
        serial.parallel = false;
        RunReport a = run_experiment(s, serial);
        RunReport b = run_experiment(s);
        CHECK(a.grid_csv == b.grid_csv);
    }
    SUBCASE("overrides reach the fusion parameters") {
        Scenario copy = s;
        std::optional<double> p_det_rel;
        apply_override(copy, "grid_resolution", "1.0", p_det_rel);
        apply_override(copy, "p_det_rel", "0.5", p_det_rel);
        CHECK(copy.fusion.grid_resolution == 1.0);
        REQUIRE(p_det_rel);
        CHECK(*p_det_rel == 0.5);
        CHECK_THROWS_AS(apply_override(copy, "bogus", "1", p_det_rel), std::invalid_argument);
    }
}

TEST_CASE("scenario parsing rejects malformed input") {
    try {
        parse_scenario("[objects]\nobject = 1 2 person\n", "bad");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS(parse_scenario("[terrain]\nwidth = 10\n", "incomplete"));
}
