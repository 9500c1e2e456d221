#include "wigait/dsp.hpp"

#include "wigait/manifest.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace wigait;

namespace {

std::vector<double> sinusoid(double freq, double rate, std::size_t n,
                             double amp = 1.0, double phase = 0.0) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = amp * std::sin(2.0 * M_PI * freq * double(i) / rate + phase);
    return out;
}

// direct path plus one rotating scatterer: |s| beats at `freq`
ChannelRecording tone_recording(double freq, double rate, double duration) {
    ChannelRecording rec;
    rec.sample_rate = rate;
    rec.wavelength = 0.0564;
    rec.origin = "synthetic";
    std::vector<cplx> s;
    std::size_t n = std::size_t(duration * rate);
    for (std::size_t i = 0; i < n; ++i) {
        double t = double(i) / rate;
        s.push_back(cplx(0.3, -0.1) +
                    0.01 * std::polar(1.0, 2.0 * M_PI * freq * t + 0.7));
    }
    rec.streams.push_back(std::move(s));
    return rec;
}

ChannelRecording replicate_measured(const ChannelRecording& syn) {
    ChannelRecording rec;
    rec.sample_rate = syn.sample_rate;
    rec.wavelength = syn.wavelength;
    rec.origin = "measured";
    rec.antennas = 3;
    rec.subcarriers = 30;
    rec.streams.assign(90, syn.streams[0]);
    return rec;
}

Spectrogram make_sg(int frames, int bins) {
    Spectrogram sg;
    sg.time_step = 0.016;
    for (int b = 0; b < bins; ++b) sg.frequency_bins.push_back(b * 3.0);
    for (int f = 0; f < frames; ++f) {
        std::vector<double> row(bins);
        for (int b = 0; b < bins; ++b) row[b] = f * 1000.0 + b;
        sg.magnitudes.push_back(row);
    }
    sg.source_id = "fixture";
    return sg;
}

double frame_peak_hz(const Spectrogram& sg, std::size_t f) {
    const auto& row = sg.magnitudes[f];
    std::size_t best = std::max_element(row.begin(), row.end()) - row.begin();
    return sg.frequency_bins[best];
}

}  // namespace

TEST_CASE("dc removal") {
    std::vector<double> c(64, 3.7);
    auto z = dc_remove(c);
    for (double v : z) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

    auto s = sinusoid(5.0, 100.0, 200);
    auto shifted = s;
    for (double& v : shifted) v += 42.0;
    auto a = dc_remove(s), b = dc_remove(shifted);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));
    // integer cycle count: already zero-mean
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - s[i]) < 1e-12);

    double m = 0;
    for (double v : b) m += v;
    CHECK(std::abs(m / double(b.size())) < 1e-12);

    CHECK_THROWS_AS(dc_remove({}), error);
}

TEST_CASE("hermite tapers are orthonormal with alternating parity") {
    auto taps = hermite_tapers(150, 5, 6.0);
    REQUIRE(taps.size() == 5);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j <= i; ++j) {
            double d = 0;
            for (int k = 0; k < 150; ++k) d += taps[i][k] * taps[j][k];
            CHECK(d == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
        }
        // parity: h_k(-t) = (-1)^k h_k(t)
        double sign = i % 2 == 0 ? 1.0 : -1.0;
        for (int k = 0; k < 150; ++k)
            CHECK(taps[i][149 - k] ==
                  doctest::Approx(sign * taps[i][k]).epsilon(1e-9));
    }
    // the ground taper is a positive bell
    for (double v : taps[0]) CHECK(v > 0);
    CHECK_THROWS_AS(hermite_tapers(4, 1, 6.0), error);
    CHECK_THROWS_AS(hermite_tapers(16, 17, 6.0), error);
    CHECK_THROWS_AS(hermite_tapers(16, 0, 6.0), error);
}

TEST_CASE("stft frame arithmetic and the zero stream") {
    std::vector<double> z(5000, 0.0);
    Spectrogram sg = hermite_stft(z, 500.0, 0.3, 0.016, 5);
    CHECK(sg.frames() == 607);  // floor((5000 - 150) / 8) + 1
    CHECK(sg.bins() == 76);     // one-sided, 150-point FFT
    CHECK(sg.time_step == 0.016);
    CHECK(sg.frequency_bins.front() == 0.0);
    CHECK(sg.frequency_bins.back() == doctest::Approx(250.0).epsilon(1e-12));
    for (const auto& row : sg.magnitudes)
        for (double m : row) CHECK(m == 0.0);

    CHECK_THROWS_AS(hermite_stft(std::vector<double>(149, 0.0), 500.0, 0.3,
                                 0.016, 5),
                    error);
    CHECK_THROWS_AS(hermite_stft(z, 500.0, 0.01, 0.016, 5), error);  // 5-sample window
}

TEST_CASE("stft locates a pure tone in every frame") {
    auto x = sinusoid(35.5, 500.0, 1000);
    SUBCASE("default grid") {
        Spectrogram sg = hermite_stft(x, 500.0, 0.3, 0.016, 5);
        double binw = 500.0 / 150.0;
        for (std::size_t f = 0; f < sg.frames(); ++f)
            CHECK(std::abs(frame_peak_hz(sg, f) - 35.5) <= binw + 1e-9);
    }
    SUBCASE("single taper, zero padding x8") {
        Spectrogram sg = hermite_stft(x, 500.0, 0.3, 0.016, 1, 8);
        CHECK(sg.bins() == 601);
        double binw = 500.0 / 1200.0;
        for (std::size_t f = 0; f < sg.frames(); ++f)
            CHECK(std::abs(frame_peak_hz(sg, f) - 35.5) <= binw + 1e-9);
    }
}

TEST_CASE("stft scaling is exactly quadratic") {
    auto x = sinusoid(20.0, 500.0, 400, 0.37, 0.3);
    for (std::size_t i = 0; i < x.size(); i += 3) x[i] += 0.05;  // break symmetry
    auto x2 = x;
    for (double& v : x2) v *= 2.0;
    Spectrogram a = hermite_stft(x, 500.0, 0.3, 0.016, 5);
    Spectrogram b = hermite_stft(x2, 500.0, 0.3, 0.016, 5);
    REQUIRE(a.frames() == b.frames());
    for (std::size_t f = 0; f < a.frames(); ++f)
        for (std::size_t k = 0; k < a.bins(); ++k)
            CHECK(b.magnitudes[f][k] == 4.0 * a.magnitudes[f][k]);
}

TEST_CASE("stft energy stays under the windowed Parseval bound") {
    Rng rng(77);
    std::vector<double> x(150);
    for (double& v : x) v = rng.normal();
    auto taps = hermite_tapers(150, 5, 6.0);

    for (int zp : {1, 2}) {
        Spectrogram sg = hermite_stft(x, 500.0, 0.3, 0.016, 5, zp);
        REQUIRE(sg.frames() == 1);
        double total = 0;
        for (double m : sg.magnitudes[0]) total += m;
        double bound = 0;
        for (const auto& h : taps) {
            double e = 0;
            for (int i = 0; i < 150; ++i) e += x[i] * h[i] * x[i] * h[i];
            bound += double(150 * zp) * e / 5.0;
        }
        CHECK(total <= bound * (1.0 + 1e-6));
        CHECK(total >= 0.4 * bound);  // one-sided keeps at least the half
    }
}

TEST_CASE("time reversal flips the spectrogram time axis") {
    Rng rng(13);
    std::vector<double> x(150 + 20 * 8);
    for (double& v : x) v = rng.normal();
    auto r = x;
    std::reverse(r.begin(), r.end());

    Spectrogram fwd = hermite_stft(x, 500.0, 0.3, 0.016, 5);
    Spectrogram rev = hermite_stft(r, 500.0, 0.3, 0.016, 5);
    REQUIRE(fwd.frames() == 21);
    REQUIRE(rev.frames() == 21);
    double peak = 0;
    for (const auto& row : fwd.magnitudes)
        for (double m : row) peak = std::max(peak, m);
    for (std::size_t f = 0; f < 21; ++f)
        for (std::size_t b = 0; b < fwd.bins(); ++b)
            CHECK(std::abs(rev.magnitudes[20 - f][b] - fwd.magnitudes[f][b]) <=
                  1e-9 * peak);
}

TEST_CASE("pca on a rank-1 ensemble") {
    auto base = sinusoid(7.0, 500.0, 600, 1.0);
    for (std::size_t i = 0; i < base.size(); ++i)
        base[i] += 0.3 * std::sin(2.0 * M_PI * 21.0 * double(i) / 500.0) + 5.0;

    SUBCASE("identical copies reproduce the centered stream") {
        std::vector<std::vector<double>> streams(90, base);
        auto comps = pca_components(streams);
        REQUIRE(comps.size() == 90);
        auto centered = dc_remove(base);
        for (std::size_t i = 0; i < centered.size(); ++i)
            CHECK(comps[0][i] == doctest::Approx(centered[i]).epsilon(1e-9));
    }
    SUBCASE("tiny noise leaves the leading component dominant") {
        Rng rng(5);
        std::vector<std::vector<double>> streams(90, base);
        for (auto& s : streams)
            for (double& v : s) v += 1e-6 * rng.normal();
        auto comps = pca_components(streams);
        double total = 0, lead = 0;
        for (std::size_t k = 0; k < comps.size(); ++k) {
            double m = 0, var = 0;
            for (double v : comps[k]) m += v / double(comps[k].size());
            for (double v : comps[k])
                var += (v - m) * (v - m) / double(comps[k].size());
            total += var;
            if (k == 0) lead = var;
        }
        CHECK(lead / total > 0.999);
    }
}

TEST_CASE("pca splits two equal-power orthogonal tones evenly") {
    // 45 + 45 streams of two sinusoids with an integer cycle count: the
    // covariance eigenvalues are analytically 22.5 each, so every component in
    // the degenerate eigenspace carries variance 22.5 / 90 = 0.25
    std::size_t n = 1000;
    auto s1 = sinusoid(10.0, double(n), n);
    auto s2 = sinusoid(20.0, double(n), n);
    std::vector<std::vector<double>> streams;
    for (int i = 0; i < 45; ++i) streams.push_back(s1);
    for (int i = 0; i < 45; ++i) streams.push_back(s2);

    auto comps = pca_components(streams);
    auto var_of = [](const std::vector<double>& v) {
        double m = 0, var = 0;
        for (double x : v) m += x / double(v.size());
        for (double x : v) var += (x - m) * (x - m) / double(v.size());
        return var;
    };
    CHECK(var_of(comps[0]) == doctest::Approx(0.25).epsilon(0.01));
    CHECK(var_of(comps[1]) == doctest::Approx(0.25).epsilon(0.01));
    CHECK(var_of(comps[2]) < 1e-12);
}

TEST_CASE("pca components are mutually orthogonal") {
    Rng rng(29);
    std::vector<std::vector<double>> streams(20, std::vector<double>(400));
    for (auto& s : streams)
        for (double& v : s) v = rng.normal();
    auto comps = pca_components(streams);
    for (std::size_t i = 0; i < comps.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double d = 0;
            for (std::size_t k = 0; k < comps[i].size(); ++k)
                d += comps[i][k] * comps[j][k];
            CHECK(std::abs(d) < 1e-8);
        }
}

TEST_CASE("pca refuses fewer than 15 streams") {
    std::vector<std::vector<double>> streams(14, std::vector<double>(32, 1.0));
    CHECK_THROWS_AS(pca_components(streams), error);
}

TEST_CASE("pipeline: static synthetic recording is silent") {
    ChannelRecording rec;
    rec.sample_rate = 500;
    rec.wavelength = 0.0564;
    rec.streams.assign(1, std::vector<cplx>(300, cplx(0.3, -0.2)));
    Spectrogram sg = spectrogram_pipeline(rec);
    double direct_power = std::norm(cplx(0.3, -0.2));
    for (const auto& row : sg.magnitudes)
        for (double m : row) CHECK(m < 1e-9 * direct_power);
}

TEST_CASE("pipeline: 90 identical measured streams match the synthetic path") {
    ChannelRecording syn = tone_recording(35.5, 500.0, 1.5);
    ChannelRecording meas = replicate_measured(syn);
    Spectrogram a = spectrogram_pipeline(syn);
    Spectrogram b = spectrogram_pipeline(meas);
    REQUIRE(a.frames() == b.frames());
    REQUIRE(a.bins() == b.bins());
    double peak = 0;
    for (const auto& row : a.magnitudes)
        for (double m : row) peak = std::max(peak, m);
    for (std::size_t f = 0; f < a.frames(); ++f)
        for (std::size_t k = 0; k < a.bins(); ++k)
            CHECK(std::abs(a.magnitudes[f][k] - b.magnitudes[f][k]) <=
                  1e-6 * peak);
}

TEST_CASE("pipeline: rotating scatterer leaves a ridge at its beat tone") {
    ChannelRecording rec = tone_recording(35.5, 500.0, 4.0);
    Spectrogram sg = spectrogram_pipeline(rec);
    double binw = 500.0 / 150.0;
    int hits = 0;
    for (std::size_t f = 0; f < sg.frames(); ++f)
        hits += std::abs(frame_peak_hz(sg, f) - 35.5) <= binw + 1e-9;
    CHECK(hits == int(sg.frames()));

    Spectrogram again = spectrogram_pipeline(rec);
    for (std::size_t f = 0; f < sg.frames(); ++f)
        for (std::size_t k = 0; k < sg.bins(); ++k)
            CHECK(again.magnitudes[f][k] == sg.magnitudes[f][k]);
}

TEST_CASE("central crop") {
    Spectrogram sg = make_sg(100, 4);
    Spectrogram c = crop_central(sg, 0.5);
    CHECK(c.frames() == 50);
    CHECK(c.magnitudes.front()[0] == 25000.0);  // frame 25
    CHECK(c.magnitudes.back()[0] == 74000.0);   // frame 74
    CHECK(c.bins() == 4);
    CHECK(c.time_step == sg.time_step);
    CHECK(c.source_id == "fixture");

    Spectrogram odd = crop_central(make_sg(7, 2), 0.5);
    CHECK(odd.frames() == 4);                    // ceil(3.5)
    CHECK(odd.magnitudes.front()[0] == 1000.0);  // tie toward the start

    Spectrogram full = crop_central(sg, 1.0);
    CHECK(full.frames() == 100);
    for (int f = 0; f < 100; ++f)
        CHECK(full.magnitudes[f] == sg.magnitudes[f]);

    CHECK_THROWS_AS(crop_central(sg, 0.0), error);
    CHECK_THROWS_AS(crop_central(sg, 1.5), error);
}

TEST_CASE("spectrogram io") {
    std::filesystem::create_directories("tmp_dsp");
    auto x = sinusoid(35.5, 500.0, 800, 0.8, 0.1);
    Spectrogram sg = hermite_stft(x, 500.0, 0.3, 0.016, 3);
    sg.source_id = "walk-017";
    write_spectrogram(sg, "tmp_dsp/sg.bin");

    Spectrogram back = read_spectrogram("tmp_dsp/sg.bin");
    CHECK(back.time_step == sg.time_step);
    CHECK(back.source_id == "walk-017");
    REQUIRE(back.frames() == sg.frames());
    REQUIRE(back.bins() == sg.bins());
    for (std::size_t b = 0; b < sg.bins(); ++b)
        CHECK(back.frequency_bins[b] == sg.frequency_bins[b]);
    for (std::size_t f = 0; f < sg.frames(); ++f)
        for (std::size_t b = 0; b < sg.bins(); ++b)
            CHECK(back.magnitudes[f][b] == sg.magnitudes[f][b]);

    atomic_write("tmp_dsp/junk.bin", "this is not a spectrogram");
    CHECK_THROWS_AS(read_spectrogram("tmp_dsp/junk.bin"), error);

    std::string whole = read_file("tmp_dsp/sg.bin");
    atomic_write("tmp_dsp/cut.bin", whole.substr(0, whole.size() - 9));
    CHECK_THROWS_AS(read_spectrogram("tmp_dsp/cut.bin"), error);

    std::filesystem::remove_all("tmp_dsp");
}

TEST_CASE("pgm render") {
    std::filesystem::create_directories("tmp_dsp");
    Spectrogram sg = make_sg(40, 25);
    render_pgm(sg, "tmp_dsp/sg.pgm");
    std::string img = read_file("tmp_dsp/sg.pgm");
    std::string header = "P5\n40 25\n255\n";
    REQUIRE(img.substr(0, header.size()) == header);
    CHECK(img.size() == header.size() + 40 * 25);
    std::filesystem::remove_all("tmp_dsp");
}
