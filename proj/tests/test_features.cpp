#include "wigait/features.hpp"

#include "wigait/manifest.hpp"
#include "wigait/rfsim.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

using namespace wigait;

namespace {

Spectrogram blank_sg(int frames, int bins, double bin_hz, double dt = 0.016) {
    Spectrogram sg;
    sg.time_step = dt;
    for (int b = 0; b < bins; ++b) sg.frequency_bins.push_back(b * bin_hz);
    sg.magnitudes.assign(frames, std::vector<double>(bins, 0.0));
    return sg;
}

// gaussian ridge along a frequency trajectory, on the dense zero-padded grid
Spectrogram ridge_sg(int frames, double center_hz, double mod_depth,
                     double mod_hz) {
    Spectrogram sg = blank_sg(frames, 601, 500.0 / 1200.0);
    const double sigma = 14.0 * 500.0 / 1200.0;  // Hz
    for (int f = 0; f < frames; ++f) {
        double t = f * sg.time_step;
        double fc = center_hz *
                    (1.0 + mod_depth * std::sin(2.0 * M_PI * mod_hz * t));
        for (int b = 0; b < 601; ++b) {
            double d = sg.frequency_bins[b] - fc;
            sg.magnitudes[f][b] = std::exp(-d * d / (2.0 * sigma * sigma));
        }
    }
    return sg;
}

SceneConfig ridge_scene() {
    SceneConfig scene;
    scene.psi_mode = "constant";
    scene.psi_value = 2.0;
    return scene;
}

// brute force: scan every contiguous window, shortest with sum > half
std::pair<int, int> band_oracle(const std::vector<double>& col) {
    double total = std::accumulate(col.begin(), col.end(), 0.0);
    int n = int(col.size());
    for (int len = 1; len <= n; ++len)
        for (int lo = 0; lo + len <= n; ++lo) {
            double s = 0;
            for (int k = lo; k < lo + len; ++k) s += col[k];
            if (s > total / 2.0) return {lo, lo + len - 1};
        }
    return {0, n - 1};
}

}  // namespace

TEST_CASE("torso band basics") {
    Spectrogram sg = blank_sg(3, 20, 2.0);
    sg.magnitudes[0][7] = 5.0;                       // single-bin mass
    for (int b = 0; b < 20; ++b) sg.magnitudes[1][b] = 1.0;  // uniform
    // frame 2 stays all-zero

    BandCurves band = torso_band(sg);
    CHECK(band.lower[0] == 14.0);
    CHECK(band.upper[0] == 14.0);
    CHECK_FALSE(band.flagged[0]);

    CHECK(band.lower[1] == 0.0);   // tie rule: lowest start
    CHECK(band.upper[1] == 20.0);  // floor(20/2)+1 = 11 bins: 0..10
    CHECK_FALSE(band.flagged[1]);

    CHECK(band.flagged[2]);
    CHECK(band.lower[2] == 0.0);
    CHECK(band.upper[2] == 0.0);
}

TEST_CASE("torso band matches the exhaustive oracle") {
    Rng rng(41);
    Spectrogram sg = blank_sg(50, 40, 3.0);
    for (auto& col : sg.magnitudes)
        for (double& m : col)
            m = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 2.0);

    BandCurves band = torso_band(sg);
    for (int f = 0; f < 50; ++f) {
        const auto& col = sg.magnitudes[f];
        double total = std::accumulate(col.begin(), col.end(), 0.0);
        if (total <= 0) {
            CHECK(band.flagged[f]);
            continue;
        }
        auto [lo, hi] = band_oracle(col);
        CHECK(band.lower[f] == sg.frequency_bins[lo]);
        CHECK(band.upper[f] == sg.frequency_bins[hi]);
        // containment property
        CHECK(band.lower[f] <= band.upper[f]);
        double inside = 0;
        for (int b = lo; b <= hi; ++b) inside += col[b];
        CHECK(inside > total / 2.0);
    }
}

TEST_CASE("gesd removes a gross spike and interpolates it") {
    std::vector<double> x(21, 1.0);
    x[10] = 100.0;
    auto y = gesd_filter(x, 0.05, 2);
    CHECK(y[10] == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 21; ++i)
        if (i != 10) CHECK(y[i] == 1.0);
}

TEST_CASE("gesd agrees with the t-distribution critical value") {
    // 10 values at +1, 10 at -1 and one spike c at index 10. With n=21 and
    // alpha=0.05 the first-step critical value is lambda ~ 2.6; c=2 gives
    // R ~ 1.75 (kept), c=4 gives R ~ 2.87 (removed).
    auto build = [](double c) {
        std::vector<double> x;
        for (int i = 0; i < 10; ++i) x.push_back(i % 2 ? 1.0 : -1.0);
        x.push_back(c);  // left neighbor +1, right neighbor -1
        for (int i = 0; i < 10; ++i) x.push_back(i % 2 ? 1.0 : -1.0);
        return x;
    };
    auto kept = gesd_filter(build(2.0), 0.05, 1);
    CHECK(kept[10] == 2.0);
    auto removed = gesd_filter(build(4.0), 0.05, 1);
    CHECK(removed[10] == doctest::Approx(0.0).epsilon(1e-12));  // midway of +-1
}

TEST_CASE("gesd leaves degenerate and clean data alone") {
    std::vector<double> flat(30, 2.5);
    CHECK(gesd_filter(flat, 0.05, 3) == flat);

    CHECK_THROWS_AS(gesd_filter(std::vector<double>(10, 1.0), 0.05, 5), error);

    // false-removal rate over clean gaussian curves stays near the
    // significance level
    int touched = 0;
    for (int seed = 0; seed < 1000; ++seed) {
        Rng rng(1000 + seed);
        std::vector<double> x(50);
        for (double& v : x) v = rng.normal();
        if (gesd_filter(x, 0.05, 5) != x) ++touched;
    }
    CHECK(touched >= 1);
    CHECK(touched <= 150);
}

TEST_CASE("trailing moving average") {
    std::vector<double> flat(12, 3.0);
    CHECK(smooth(flat, 4) == flat);

    std::vector<double> imp(12, 0.0);
    imp[5] = 1.0;
    auto s = smooth(imp, 4);
    for (int i = 0; i < 12; ++i)
        CHECK(s[i] == (i >= 5 && i <= 8 ? 0.25 : 0.0));

    std::vector<double> ramp(20);
    for (int i = 0; i < 20; ++i) ramp[i] = 0.5 * i + 2.0;
    auto r = smooth(ramp, 4);
    for (int i = 3; i < 20; ++i)
        CHECK(r[i] == doctest::Approx(ramp[i] - 1.5 * 0.5).epsilon(1e-12));
    CHECK(r[0] == ramp[0]);  // prefix average

    CHECK_THROWS_AS(smooth(std::vector<double>(3, 1.0), 4), error);
}

TEST_CASE("torso speed from a constant ridge") {
    Spectrogram sg = ridge_sg(200, 35.5, 0.0, 0.0);
    TorsoSpeedCurve curve = torso_speed(sg, ridge_scene());
    CHECK_FALSE(curve.degenerate);
    REQUIRE(curve.speeds.size() == 200);
    double lambda = ridge_scene().wavelength();
    double expect = 35.5 * lambda / 2.0;  // ~1.0 m/s
    for (std::size_t t = 10; t < 190; ++t)
        CHECK(curve.speeds[t] == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("torso speed flags an empty spectrogram") {
    Spectrogram sg = blank_sg(40, 76, 500.0 / 150.0);
    TorsoSpeedCurve curve = torso_speed(sg, ridge_scene());
    CHECK(curve.degenerate);
    for (double v : curve.speeds) CHECK(v == 0.0);
}

TEST_CASE("torso speed follows ridge modulation") {
    Spectrogram sg = ridge_sg(250, 35.5, 0.10, 1.67);
    TorsoSpeedCurve curve = torso_speed(sg, ridge_scene());
    double lo = 1e9, hi = 0;
    for (std::size_t t = 15; t < 235; ++t) {
        lo = std::min(lo, curve.speeds[t]);
        hi = std::max(hi, curve.speeds[t]);
    }
    double depth = (hi - lo) / (hi + lo);
    CHECK(depth == doctest::Approx(0.10).epsilon(0.2));  // +-2 points
}

TEST_CASE("gait cycle from a sinusoidal speed curve") {
    TorsoSpeedCurve curve;
    curve.time_step = 0.016;
    for (int i = 0; i < 250; ++i)
        curve.speeds.push_back(
            1.0 + 0.1 * std::sin(2.0 * M_PI * i * 0.016 / 0.6));
    CycleEstimate c = gait_cycle(curve);
    REQUIRE_FALSE(c.missing);
    CHECK(std::abs(c.seconds - 1.2) <= 2.0 * 0.016 + 1e-9);
}

TEST_CASE("gait cycle declines flat and noisy curves") {
    TorsoSpeedCurve flat;
    flat.time_step = 0.016;
    flat.speeds.assign(200, 1.0);
    CHECK(gait_cycle(flat).missing);

    TorsoSpeedCurve tiny;
    tiny.time_step = 0.016;
    tiny.speeds.assign(60, 1.0);
    CHECK_THROWS_AS(gait_cycle(tiny), error);  // under 1.5 s

    int missing = 0;
    for (int seed = 0; seed < 1000; ++seed) {
        Rng rng(7000 + seed);
        TorsoSpeedCurve noise;
        noise.time_step = 0.016;
        noise.speeds.resize(2000);
        for (double& v : noise.speeds) v = 1.0 + 0.2 * rng.normal();
        missing += gait_cycle(noise).missing;
    }
    CHECK(missing >= 950);
}

TEST_CASE("feature assembly") {
    SUBCASE("constant curve") {
        TorsoSpeedCurve curve;
        curve.time_step = 0.016;
        curve.speeds.assign(150, 1.0);
        GaitFeatureVector v = assemble_features(curve, {1.2, false});
        CHECK(v.avg_speed == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.min_speed == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.max_speed == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.gait_cycle == 1.2);
        CHECK(v.step_length == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(v.speed_variation == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("percentiles match the sorted fixture") {
        std::vector<double> sorted = {0.7,  0.75, 0.8, 1.0, 1.0, 1.0, 1.0,
                                      1.0,  1.0,  1.0, 1.0, 1.0, 1.0, 1.0,
                                      1.0,  1.0,  1.2, 1.2, 1.2, 1.25, 1.3};
        TorsoSpeedCurve curve;
        curve.time_step = 0.1;
        curve.speeds = sorted;
        std::reverse(curve.speeds.begin(), curve.speeds.end());  // order-free
        GaitFeatureVector v = assemble_features(curve, {});
        CHECK(v.min_speed == doctest::Approx(0.8).epsilon(1e-12));  // rank 2
        CHECK(v.max_speed == doctest::Approx(1.2).epsilon(1e-12));  // rank 18
        CHECK(v.cycle_missing);
        CHECK(v.gait_cycle == 0.0);
        CHECK(v.step_length == 0.0);
        CHECK(v.speed_variation ==
              doctest::Approx(v.max_speed - v.min_speed).epsilon(1e-12));
    }
    SUBCASE("homogeneity under speed scaling") {
        Rng rng(9);
        TorsoSpeedCurve a;
        a.time_step = 0.016;
        for (int i = 0; i < 300; ++i)
            a.speeds.push_back(1.0 + 0.2 * rng.uniform());
        TorsoSpeedCurve b = a;
        for (double& v : b.speeds) v *= 3.0;
        GaitFeatureVector va = assemble_features(a, {1.1, false});
        GaitFeatureVector vb = assemble_features(b, {1.1, false});
        CHECK(vb.avg_speed == doctest::Approx(3 * va.avg_speed).epsilon(1e-12));
        CHECK(vb.min_speed == doctest::Approx(3 * va.min_speed).epsilon(1e-12));
        CHECK(vb.max_speed == doctest::Approx(3 * va.max_speed).epsilon(1e-12));
        CHECK(vb.gait_cycle == va.gait_cycle);
        CHECK(vb.step_length ==
              doctest::Approx(3 * va.step_length).epsilon(1e-12));
        CHECK(vb.speed_variation ==
              doctest::Approx(3 * va.speed_variation).epsilon(1e-12));
    }
}

TEST_CASE("rf feature extraction end to end on an analytic ridge") {
    // 9.6 s ridge, central crop leaves 4.8 s; modulation at the 0.6 s step
    Spectrogram sg = ridge_sg(600, 35.5, 0.10, 1.0 / 0.6);
    sg.source_id = "ridge-fixture";
    SceneConfig scene = ridge_scene();
    GaitFeatureVector v = extract_rf_features(sg, scene);
    v.validate();
    CHECK(v.modality == "rf");
    CHECK(v.sample_id == "ridge-fixture");
    double expect = 35.5 * scene.wavelength() / 2.0;
    CHECK(v.avg_speed == doctest::Approx(expect).epsilon(0.03));
    REQUIRE_FALSE(v.cycle_missing);
    CHECK(v.gait_cycle == doctest::Approx(1.2).epsilon(0.05));
    CHECK(v.step_length ==
          doctest::Approx(v.gait_cycle / 2 * v.avg_speed).epsilon(1e-12));
    CHECK(v.min_speed < v.avg_speed);
    CHECK(v.max_speed > v.avg_speed);
}

TEST_CASE("video features recover the walker's ground truth") {
    SyntheticGaitParams params;  // 1.0 m/s, 1.2 s cycle
    MeshSequence seq = synthesize_walker(params, 8.0, 30.0, 21);
    seq.subject_id = "walker-21";
    seq.label = Label::healthy;

    GaitFeatureVector v = extract_video_features(seq);
    v.validate();
    CHECK(v.modality == "video");
    CHECK(v.subject_id == "walker-21");
    CHECK(v.label == Label::healthy);
    CHECK(v.avg_speed == doctest::Approx(1.0).epsilon(0.02));
    REQUIRE_FALSE(v.cycle_missing);
    CHECK(v.gait_cycle == doctest::Approx(1.2).epsilon(0.042));  // +-0.05 s

    SUBCASE("one occluded foot falls back to the other") {
        MeshSequence ablated = seq;
        for (auto& f : ablated.frames) {
            f.points[int(Part::foot_l)].clear();
            f.refresh_degenerate_flags();
        }
        GaitFeatureVector w = extract_video_features(ablated);
        REQUIRE_FALSE(w.cycle_missing);
        CHECK(std::abs(w.gait_cycle - v.gait_cycle) <= 0.1);
    }
}

TEST_CASE("video features on a static sequence") {
    SyntheticGaitParams params;
    MeshSequence walk = synthesize_walker(params, 3.0, 30.0, 4);
    MeshSequence still;
    still.fps = walk.fps;
    still.units = "meter";
    still.subject_id = "statue";
    for (int i = 0; i < 90; ++i) {
        BodyFrame f = walk.frames[10];
        f.timestamp = i / still.fps;
        still.frames.push_back(f);
    }
    GaitFeatureVector v = extract_video_features(still);
    CHECK(v.avg_speed == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(v.cycle_missing);
}

TEST_CASE("rf and video features agree on the same walker") {
    SyntheticGaitParams params;
    MeshSequence seq = synthesize_walker(params, 6.0, 30.0, 33);
    SceneConfig scene;
    scene.walk_length = 6.0;
    MeshSequence shifted = seq;
    for (auto& f : shifted.frames)
        for (auto& part : f.points)
            for (auto& q : part) q.y() += scene.start_distance;

    ChannelRecording rec = simulate_walk(shifted, scene, {}, 33);
    Spectrogram sg = spectrogram_pipeline(rec);
    GaitFeatureVector rf = extract_rf_features(sg, scene);
    GaitFeatureVector video = extract_video_features(shifted);

    REQUIRE_FALSE(rf.cycle_missing);
    REQUIRE_FALSE(video.cycle_missing);
    CHECK(rf.avg_speed ==
          doctest::Approx(video.avg_speed).epsilon(0.10));
    CHECK(rf.gait_cycle ==
          doctest::Approx(video.gait_cycle).epsilon(0.10));
}

TEST_CASE("feature table round trip") {
    std::filesystem::create_directories("tmp_feat");
    GaitFeatureVector a;
    a.avg_speed = 1.0571428571428572;
    a.min_speed = 0.91;
    a.max_speed = 1.21;
    a.gait_cycle = 1.184;
    a.step_length = 0.62582857142857146;
    a.speed_variation = 0.041;
    a.subject_id = "s01";
    a.sample_id = "s01-walk-00";
    a.label = Label::healthy;
    a.modality = "rf";
    GaitFeatureVector b;
    b.min_speed = b.avg_speed = b.max_speed = 0.0;
    b.cycle_missing = true;
    b.speed_variation = 0.0;
    b.subject_id = "s02";
    b.sample_id = "s02-walk-01";
    b.label = Label::unhealthy;
    b.modality = "video";

    write_feature_table({a, b}, "tmp_feat/table.csv");
    auto rows = read_feature_table("tmp_feat/table.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].avg_speed == a.avg_speed);
    CHECK(rows[0].step_length == a.step_length);
    CHECK(rows[0].label == Label::healthy);
    CHECK(rows[0].modality == "rf");
    CHECK(rows[0].sample_id == "s01-walk-00");
    CHECK_FALSE(rows[0].cycle_missing);
    CHECK(rows[1].cycle_missing);
    CHECK(rows[1].gait_cycle == 0.0);
    CHECK(rows[1].label == Label::unhealthy);

    // second write is byte-identical
    std::string first = read_file("tmp_feat/table.csv");
    write_feature_table({a, b}, "tmp_feat/table2.csv");
    CHECK(read_file("tmp_feat/table2.csv") == first);

    atomic_write("tmp_feat/bad.csv", "not,a,feature,table\n");
    CHECK_THROWS_AS(read_feature_table("tmp_feat/bad.csv"), error);

    GaitFeatureVector evil = a;
    evil.subject_id = "has,comma";
    CHECK_THROWS_AS(write_feature_table({evil}, "tmp_feat/evil.csv"), error);
    std::filesystem::remove_all("tmp_feat");
}
