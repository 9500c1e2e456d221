#include <doctest.h>

#include "wigait/manifest.hpp"
#include "wigait/mesh.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace wigait;

namespace {

MeshSequence tiny_walker(double duration = 4.0, double fps = 30.0,
                         std::uint64_t seed = 7, double asym = 0.0) {
    SyntheticGaitParams p;
    p.mean_speed = 1.0;
    p.gait_cycle = 1.2;
    p.asymmetry = asym;
    p.points_per_part = 12;
    return synthesize_walker(p, duration, fps, seed);
}

std::string tmp_path(const std::string& name) {
    std::filesystem::create_directories("/tmp/wigait_test_mesh");
    return "/tmp/wigait_test_mesh/" + name;
}

}  // namespace

TEST_CASE("mesh container: write/ingest round trip is bit exact") {
    MeshSequence seq = tiny_walker(3.0);
    seq.subject_id = "rt-check";
    seq.label = Label::healthy;
    std::string path = tmp_path("roundtrip.json");
    write_mesh_sequence(seq, path);
    MeshSequence back = ingest_mesh_sequence(path);
    REQUIRE(back.frames.size() == seq.frames.size());
    CHECK(back.fps == seq.fps);
    CHECK(back.subject_id == seq.subject_id);
    CHECK(back.label == seq.label);
    CHECK(back.walk_direction == seq.walk_direction);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        CHECK(back.frames[i].timestamp == seq.frames[i].timestamp);
        for (int p = 0; p < kNumParts; ++p) {
            REQUIRE(back.frames[i].points[p].size() == seq.frames[i].points[p].size());
            for (std::size_t k = 0; k < seq.frames[i].points[p].size(); ++k)
                CHECK(back.frames[i].points[p][k] == seq.frames[i].points[p][k]);
        }
    }
}

TEST_CASE("mesh container: missing part names the frame and part") {
    MeshSequence seq = tiny_walker(3.0);
    std::string path = tmp_path("missing_part.json");
    write_mesh_sequence(seq, path);
    auto j = nlohmann::json::parse(read_file(path));
    j["frames"][3]["parts"].erase("torso");
    atomic_write(path, j.dump());
    try {
        ingest_mesh_sequence(path);
        FAIL("expected an error");
    } catch (const error& e) {
        std::string msg = e.what();
        CHECK(msg.find("frame 3") != std::string::npos);
        CHECK(msg.find("torso") != std::string::npos);
    }
}

TEST_CASE("mesh container: 90 frames at 30 fps run 3 seconds") {
    MeshSequence seq = tiny_walker(89.0 / 30.0);
    CHECK(seq.frames.size() == 90);
    CHECK(seq.duration() == doctest::Approx(89.0 / 30.0));
    CHECK(std::abs(seq.duration() - 3.0) <= 1.0 / 30.0 + 1e-12);
}

TEST_CASE("mesh container: non-monotone timestamps rejected with frame index") {
    MeshSequence seq = tiny_walker(3.0);
    std::string path = tmp_path("bad_ts.json");
    write_mesh_sequence(seq, path);
    auto j = nlohmann::json::parse(read_file(path));
    j["frames"][5]["timestamp"] = 0.01;
    atomic_write(path, j.dump());
    CHECK_THROWS_WITH_AS(ingest_mesh_sequence(path),
                         doctest::Contains("frame 5"), error);
}

TEST_CASE("align_to_world: scale from centroid displacement") {
    // two frames whose centroid moves 1000 px -> scale 0.0039 m/px
    MeshSequence seq;
    seq.fps = 30.0;
    seq.units = "pixel";
    for (int i = 0; i < 2; ++i) {
        BodyFrame f;
        f.timestamp = i / 30.0;
        for (int p = 0; p < kNumParts; ++p) {
            for (int k = 0; k < 4; ++k)
                f.points[p].emplace_back(0.0, i * 1000.0 + k * 0.25, double(k % 2));
        }
        f.refresh_degenerate_flags();
        seq.frames.push_back(f);
    }
    MeshSequence out = align_to_world(seq, 2.0, 3.9);
    CHECK(out.units == "meter");
    double span =
        (out.frames[1].centroid() - out.frames[0].centroid()).norm();
    CHECK(span == doctest::Approx(3.9).epsilon(1e-9));

    // centroid on the camera axis (x = 0): rotation is the identity, so the
    // output is a pure rescale
    Vec3 p0 = seq.frames[0].points[0][1];
    Vec3 q0 = out.frames[0].points[0][1];
    CHECK(q0.x() == doctest::Approx(p0.x() * 0.0039).epsilon(1e-9));
    CHECK(q0.z() == doctest::Approx(p0.z() * 0.0039).epsilon(1e-9));
}

TEST_CASE("align_to_world: inverts a synthetic oblique pixel projection") {
    // ground truth in meters
    MeshSequence truth = tiny_walker(3.0);
    const double cam_d = 2.5;
    const double px_per_m = 240.0;

    MeshSequence pix = truth;
    pix.units = "pixel";
    for (auto& f : pix.frames) {
        Vec3 c = f.centroid();
        double bearing = std::atan2(c.x(), cam_d);
        double cb = std::cos(bearing), sb = std::sin(bearing);
        for (auto& pts : f.points)
            for (auto& p : pts) {
                Vec3 d = p - c;
                Vec3 r(cb * d.x() - sb * d.y(), sb * d.x() + cb * d.y(), d.z());
                p = (c + r) * px_per_m;
            }
    }
    double walk_dist =
        (truth.frames.back().centroid() - truth.frames.front().centroid()).norm();
    MeshSequence rec = align_to_world(pix, cam_d, walk_dist);
    double max_err = 0.0;
    for (std::size_t i = 0; i < truth.frames.size(); ++i)
        for (int p = 0; p < kNumParts; ++p)
            for (std::size_t k = 0; k < truth.frames[i].points[p].size(); ++k)
                max_err = std::max(max_err, (rec.frames[i].points[p][k] -
                                             truth.frames[i].points[p][k])
                                                .norm());
    CHECK(max_err < 0.01 * walk_dist);  // within 1 %
}

TEST_CASE("align_to_world: uniform pixel rescale changes nothing") {
    MeshSequence pix = tiny_walker(3.0);
    pix.units = "pixel";
    MeshSequence pix2 = pix;
    for (auto& f : pix2.frames)
        for (auto& pts : f.points)
            for (auto& p : pts) p *= 3.7;
    MeshSequence a = align_to_world(pix, 2.0, 3.0);
    MeshSequence b = align_to_world(pix2, 2.0, 3.0);
    double max_err = 0.0;
    for (std::size_t i = 0; i < a.frames.size(); ++i)
        for (int p = 0; p < kNumParts; ++p)
            for (std::size_t k = 0; k < a.frames[i].points[p].size(); ++k)
                max_err = std::max(
                    max_err,
                    (a.frames[i].points[p][k] - b.frames[i].points[p][k]).norm());
    CHECK(max_err < 1e-9);
}

TEST_CASE("align_to_world: zero displacement is an error") {
    MeshSequence seq;
    seq.fps = 30.0;
    seq.units = "pixel";
    for (int i = 0; i < 2; ++i) {
        BodyFrame f;
        f.timestamp = i / 30.0;
        for (int p = 0; p < kNumParts; ++p)
            for (int k = 0; k < 4; ++k) f.points[p].emplace_back(k, k * k, k % 2);
        seq.frames.push_back(f);
    }
    CHECK_THROWS_AS(align_to_world(seq, 2.0, 3.9), error);
}

TEST_CASE("resample: frame count scales with fps") {
    MeshSequence seq = tiny_walker(3.0, 30.0);
    MeshSequence up = resample(seq, 250.0);
    double ratio = double(up.frames.size()) / double(seq.frames.size());
    CHECK(ratio == doctest::Approx(250.0 / 30.0).epsilon(0.02));
    CHECK(up.fps == 250.0);
    // endpoints preserved exactly
    CHECK(up.frames.front().points[0][0] == seq.frames.front().points[0][0]);
    CHECK(up.frames.back().points[0][0] == seq.frames.back().points[0][0]);
    CHECK_THROWS_AS(resample(seq, 10.0), error);
}

TEST_CASE("resample: linear trajectories are interpolated exactly") {
    MeshSequence seq;
    seq.fps = 10.0;
    for (int i = 0; i < 5; ++i) {
        BodyFrame f;
        f.timestamp = i / 10.0;
        for (int p = 0; p < kNumParts; ++p)
            for (int k = 0; k < 4; ++k)
                f.points[p].emplace_back(k * 0.1, f.timestamp * 1.5 + k, k % 2 + p);
        seq.frames.push_back(f);
    }
    MeshSequence up = resample(seq, 70.0);
    for (const auto& f : up.frames) {
        // y follows the line y = 1.5 t + k
        CHECK(f.points[3][2].y() ==
              doctest::Approx(f.timestamp * 1.5 + 2.0).epsilon(1e-12));
    }
}

TEST_CASE("resample: sinusoid interpolation error bound") {
    // 1 Hz sinusoid sampled at 25 fps, upsampled to 250; linear interpolation
    // error of a sinusoid over step dt is at most (2*pi*dt)^2/8 of amplitude
    MeshSequence seq;
    seq.fps = 25.0;
    const double amp = 0.3;
    for (int i = 0; i <= 50; ++i) {
        BodyFrame f;
        f.timestamp = i / 25.0;
        for (int p = 0; p < kNumParts; ++p)
            for (int k = 0; k < 4; ++k)
                f.points[p].emplace_back(k, double(i) * 0.01,
                                         amp * std::sin(2.0 * M_PI * f.timestamp));
        seq.frames.push_back(f);
    }
    MeshSequence up = resample(seq, 250.0);
    double bound = amp * std::pow(2.0 * M_PI / 25.0, 2) / 8.0;
    double max_err = 0.0;
    for (const auto& f : up.frames)
        max_err = std::max(max_err, std::abs(f.points[0][0].z() -
                                             amp * std::sin(2.0 * M_PI * f.timestamp)));
    CHECK(max_err < bound + 1e-12);
}

TEST_CASE("resample: idempotent at equal fps") {
    MeshSequence seq = tiny_walker(3.0);
    MeshSequence same = resample(seq, seq.fps);
    REQUIRE(same.frames.size() == seq.frames.size());
    for (std::size_t i = 0; i < seq.frames.size(); ++i)
        CHECK(same.frames[i].points[5][3] == seq.frames[i].points[5][3]);
}

TEST_CASE("walker: displacement, speed and determinism") {
    MeshSequence a = tiny_walker(4.0);
    MeshSequence b = tiny_walker(4.0);
    // bit reproducible
    for (std::size_t i = 0; i < a.frames.size(); ++i)
        for (int p = 0; p < kNumParts; ++p)
            for (std::size_t k = 0; k < a.frames[i].points[p].size(); ++k)
                REQUIRE(a.frames[i].points[p][k] == b.frames[i].points[p][k]);

    // net displacement = speed * time within 2%
    double net = (a.frames.back().centroid() - a.frames.front().centroid()).norm();
    CHECK(net == doctest::Approx(4.0).epsilon(0.02));

    // torso centroid speed: mean within 2%, and its autocorrelation has a
    // local maximum within 1 frame of the gait-cycle lag
    std::vector<double> speed;
    for (std::size_t i = 1; i < a.frames.size(); ++i)
        speed.push_back((a.frames[i].part_centroid(Part::torso) -
                         a.frames[i - 1].part_centroid(Part::torso))
                            .norm() *
                        a.fps);
    double mean_v = 0;
    for (double s : speed) mean_v += s;
    mean_v /= double(speed.size());
    CHECK(mean_v == doctest::Approx(1.0).epsilon(0.02));

    auto acorr = [&](int lag) {
        double s = 0;
        int n = 0;
        for (std::size_t i = 0; i + lag < speed.size(); ++i, ++n)
            s += (speed[i] - mean_v) * (speed[i + lag] - mean_v);
        return s / n;
    };
    int lag_T = int(std::lround(1.2 * 30.0));  // gait cycle in frames
    bool local_max = false;
    for (int l = lag_T - 1; l <= lag_T + 1; ++l)
        if (acorr(l) >= acorr(l - 1) && acorr(l) >= acorr(l + 1)) local_max = true;
    CHECK(local_max);

    // validates and has no degenerate parts
    a.validate();
    for (const auto& f : a.frames) CHECK(f.degenerate.empty());
}

TEST_CASE("walker: symmetric gait has mirror-image feet") {
    MeshSequence seq = tiny_walker(3.6, 30.0, 9, 0.0);
    int half = int(std::lround(0.5 * 1.2 * 30.0));  // half cycle in frames
    double max_err = 0.0;
    for (std::size_t i = 0; i + half < seq.frames.size(); ++i) {
        // compare in body coordinates: subtract the torso centroid's forward
        // position, which removes the net translation between the two times
        double y_i = seq.frames[i].part_centroid(Part::torso).y();
        double y_j = seq.frames[i + half].part_centroid(Part::torso).y();
        Vec3 r = seq.frames[i].part_centroid(Part::foot_r) - Vec3(0, y_i, 0);
        Vec3 l = seq.frames[i + half].part_centroid(Part::foot_l) - Vec3(0, y_j, 0);
        l.x() = -l.x();
        max_err = std::max(max_err, (r - l).norm());
    }
    CHECK(max_err < 1e-9);
}

TEST_CASE("walker: feet alternate vertical extrema with the gait-cycle period") {
    MeshSequence seq = tiny_walker(4.8, 30.0, 3);
    std::vector<double> zl, zr;
    for (const auto& f : seq.frames) {
        zl.push_back(f.part_centroid(Part::foot_l).z());
        zr.push_back(f.part_centroid(Part::foot_r).z());
    }
    // lift maxima of the left foot should be ~1.2 s apart
    std::vector<int> peaks;
    for (std::size_t i = 1; i + 1 < zl.size(); ++i)
        if (zl[i] > zl[i - 1] && zl[i] >= zl[i + 1] &&
            zl[i] > 0.5 * (*std::max_element(zl.begin(), zl.end())))
            peaks.push_back(int(i));
    REQUIRE(peaks.size() >= 3);
    for (std::size_t i = 1; i < peaks.size(); ++i)
        CHECK(std::abs((peaks[i] - peaks[i - 1]) / 30.0 - 1.2) < 2.0 / 30.0);
    // right foot peaks midway between left peaks
    int mid = (peaks[0] + peaks[1]) / 2;
    CHECK(zr[mid] > zr[peaks[0]]);
}

TEST_CASE("walker: infeasible step length rejected") {
    SyntheticGaitParams p;
    p.step_length = 2.0;  // > speed * cycle = 1.2
    CHECK_THROWS_AS(synthesize_walker(p, 4.0, 30.0, 1), error);
    SyntheticGaitParams q;
    q.gait_cycle = 1.2;
    CHECK_THROWS_AS(synthesize_walker(q, 2.0, 30.0, 1), error);  // < 2 cycles
}
