#include "wigait/features.hpp"

#include "wigait/manifest.hpp"

#include <fftw3.h>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <sstream>

namespace wigait {

std::array<double, 6> GaitFeatureVector::values() const {
    return {avg_speed,  min_speed,   max_speed,
            gait_cycle, step_length, speed_variation};
}

void GaitFeatureVector::validate() const {
    for (double v : values())
        check(std::isfinite(v), "features: non-finite value");
    check(min_speed <= avg_speed + 1e-9 && avg_speed <= max_speed + 1e-9,
          "features: percentile ordering violated");
    check(cycle_missing ? gait_cycle == 0 : gait_cycle >= 0.3,
          "features: implausible gait cycle");
    check(modality == "rf" || modality == "video",
          "features: modality must be rf or video");
}

namespace {

// shortest contiguous window with sum strictly above half the total; ties
// resolve to the lowest start. Values are non-negative.
std::pair<int, int> half_mass_window(const std::vector<double>& col, int begin,
                                     int end) {
    double total = 0;
    for (int i = begin; i < end; ++i) total += col[i];
    const double target = total / 2.0;
    int best_lo = begin, best_hi = end - 1;
    int best_len = end - begin + 1;
    double acc = 0;
    int lo = begin;
    for (int hi = begin; hi < end; ++hi) {
        acc += col[hi];
        while (acc > target) {
            if (hi - lo + 1 < best_len) {
                best_len = hi - lo + 1;
                best_lo = lo;
                best_hi = hi;
            }
            acc -= col[lo++];
        }
    }
    return {best_lo, best_hi};
}

}  // namespace

BandCurves torso_band(const Spectrogram& sg) {
    sg.validate();
    BandCurves out;
    for (const auto& col : sg.magnitudes) {
        double total = std::accumulate(col.begin(), col.end(), 0.0);
        if (total <= 0) {
            out.lower.push_back(0);
            out.upper.push_back(0);
            out.flagged.push_back(true);
            continue;
        }
        auto [lo, hi] = half_mass_window(col, 0, int(col.size()));
        out.lower.push_back(sg.frequency_bins[lo]);
        out.upper.push_back(sg.frequency_bins[hi]);
        out.flagged.push_back(false);
    }
    return out;
}

std::vector<double> gesd_filter(const std::vector<double>& curve,
                                double significance, int max_outliers) {
    const int n = int(curve.size());
    check(significance > 0 && significance < 1,
          "gesd: significance must be in (0, 1)");
    check(max_outliers >= 0, "gesd: negative outlier budget");
    check(n > 2 * max_outliers, "gesd: curve too short for the outlier budget");
    if (max_outliers == 0) return curve;

    std::vector<bool> dead(n, false);
    std::vector<int> order;
    std::vector<double> stats, crits;
    for (int i = 1; i <= max_outliers; ++i) {
        double mu = 0;
        int alive = 0;
        for (int k = 0; k < n; ++k)
            if (!dead[k]) {
                mu += curve[k];
                ++alive;
            }
        mu /= alive;
        double s2 = 0;
        for (int k = 0; k < n; ++k)
            if (!dead[k]) s2 += (curve[k] - mu) * (curve[k] - mu);
        double s = std::sqrt(s2 / (alive - 1));
        if (s <= 1e-300) break;  // zero variance: nothing left to test

        int arg = -1;
        double dev = -1;
        for (int k = 0; k < n; ++k)
            if (!dead[k] && std::abs(curve[k] - mu) > dev) {
                dev = std::abs(curve[k] - mu);
                arg = k;
            }

        // Rosner critical value at step i
        double p = 1.0 - significance / (2.0 * (n - i + 1));
        boost::math::students_t dist(double(n - i - 1));
        double t = boost::math::quantile(dist, p);
        double lam = (n - i) * t /
                     std::sqrt((n - i - 1 + t * t) * double(n - i + 1));
        order.push_back(arg);
        stats.push_back(dev / s);
        crits.push_back(lam);
        dead[arg] = true;
    }

    int outliers = 0;
    for (std::size_t i = 0; i < stats.size(); ++i)
        if (stats[i] > crits[i]) outliers = int(i) + 1;

    std::fill(dead.begin(), dead.end(), false);
    for (int i = 0; i < outliers; ++i) dead[order[i]] = true;

    std::vector<double> out = curve;
    for (int k = 0; k < n; ++k) {
        if (!dead[k]) continue;
        int prev = k - 1;
        while (prev >= 0 && dead[prev]) --prev;
        int next = k + 1;
        while (next < n && dead[next]) ++next;
        if (prev >= 0 && next < n)
            out[k] = curve[prev] + (curve[next] - curve[prev]) *
                                       double(k - prev) / double(next - prev);
        else if (prev >= 0)
            out[k] = curve[prev];
        else if (next < n)
            out[k] = curve[next];
    }
    return out;
}

std::vector<double> smooth(const std::vector<double>& curve, int span) {
    check(span >= 1, "smooth: span must be positive");
    check(int(curve.size()) >= span, "smooth: curve shorter than the span");
    std::vector<double> out(curve.size());
    double acc = 0;
    for (int i = 0; i < int(curve.size()); ++i) {
        acc += curve[i];
        if (i >= span) acc -= curve[i - span];
        out[i] = acc / std::min(i + 1, span);
    }
    return out;
}

TorsoSpeedCurve torso_speed(const Spectrogram& sg, const SceneConfig& scene,
                            const FeaturesConfig& cfg) {
    BandCurves band = torso_band(sg);
    const int nt = int(sg.frames());

    TorsoSpeedCurve out;
    out.time_step = sg.time_step;
    if (std::all_of(band.flagged.begin(), band.flagged.end(),
                    [](bool f) { return f; })) {
        out.degenerate = true;
        out.speeds.assign(nt, 0.0);
        return out;
    }

    std::vector<double> lo = band.lower, up = band.upper;
    int budget = int(cfg.gesd_max_fraction * nt);
    if (budget > 0 && nt > 2 * budget) {
        lo = gesd_filter(lo, cfg.gesd_alpha, budget);
        up = gesd_filter(up, cfg.gesd_alpha, budget);
    }
    if (nt >= cfg.smooth_span) {
        lo = smooth(lo, cfg.smooth_span);
        up = smooth(up, cfg.smooth_span);
    }

    const double lambda = scene.wavelength();
    const double psi = scene.psi_midpoint();
    for (int t = 0; t < nt; ++t) {
        // second pass of the 50% rule, restricted to the cleaned band
        const auto& col = sg.magnitudes[t];
        int b0 = 0, b1 = int(col.size());
        while (b0 < b1 && sg.frequency_bins[b0] < lo[t] - 1e-9) ++b0;
        while (b1 > b0 && sg.frequency_bins[b1 - 1] > up[t] + 1e-9) --b1;
        double mass = 0;
        for (int b = b0; b < b1; ++b) mass += col[b];
        double f_mid;
        if (b0 >= b1 || mass <= 0) {
            f_mid = (lo[t] + up[t]) / 2.0;
        } else {
            auto [l2, u2] = half_mass_window(col, b0, b1);
            f_mid = (sg.frequency_bins[l2] + sg.frequency_bins[u2]) / 2.0;
        }
        out.speeds.push_back(std::max(0.0, f_mid * lambda / psi));
    }
    return out;
}

CycleEstimate gait_cycle(const TorsoSpeedCurve& curve, double min_separation_s) {
    const auto& x = curve.speeds;
    const double dt = curve.time_step;
    check(dt > 0, "gait_cycle: bad time step");
    const int n = int(x.size());
    check(n * dt >= 1.5, "gait_cycle: curve must cover at least 1.5 s");

    double mu = mean(x);
    std::vector<double> c(n);
    for (int i = 0; i < n; ++i) c[i] = x[i] - mu;

    // Step lags above 1.5 s (3 s gait cycles) are outside walking; capping the
    // search also keeps the noisy high-lag autocorrelation tail out.
    const int min_lag = int(std::ceil(min_separation_s / dt));
    const int max_lag = std::min(n / 2, int(1.5 / dt));
    if (max_lag <= min_lag) return {};

    std::vector<double> r(max_lag + 1, 0.0);
    for (int l = 0; l <= max_lag; ++l) {
        for (int t = 0; t + l < n; ++t) r[l] += c[t] * c[t + l];
        r[l] /= double(n - l);  // unbiased normalization
    }
    if (r[0] <= 1e-24) return {};

    std::vector<int> cand;
    for (int l = min_lag; l < max_lag; ++l)
        if (r[l] > r[l - 1] && r[l] >= r[l + 1]) cand.push_back(l);
    std::sort(cand.begin(), cand.end(), [&](int a, int b) {
        return r[a] != r[b] ? r[a] > r[b] : a < b;
    });
    std::vector<int> kept;
    for (int l : cand) {
        bool ok = true;
        for (int k : kept)
            if (std::abs(l - k) < min_lag) ok = false;
        if (ok) kept.push_back(l);
    }
    if (kept.empty()) return {};

    double best = r[kept.front()];
    if (best < 0.1 * r[0]) return {};
    // near-ties resolve to the smallest lag: a cycle's own harmonic at twice
    // the step lag scores the same on a clean curve
    int pick = kept.front();
    for (int l : kept)
        if (r[l] >= 0.95 * best && l < pick) pick = l;
    return {2.0 * pick * dt, false};
}

GaitFeatureVector assemble_features(const TorsoSpeedCurve& curve,
                                    const CycleEstimate& cycle) {
    check(!curve.speeds.empty(), "features: empty speed curve");
    const auto& v = curve.speeds;

    GaitFeatureVector out;
    out.avg_speed = mean(v);
    out.min_speed = percentile(v, 10.0);
    out.max_speed = percentile(v, 90.0);
    out.cycle_missing = cycle.missing;
    double whole = out.max_speed - out.min_speed;
    if (cycle.missing) {
        out.speed_variation = whole;
        return out;
    }

    out.gait_cycle = cycle.seconds;
    out.step_length = cycle.seconds / 2.0 * out.avg_speed;
    const int per = int(std::lround(cycle.seconds / 2.0 / curve.time_step));
    double spread = 0;
    int steps = 0;
    if (per >= 2) {
        for (int s = 0; (s + 1) * per <= int(v.size()); ++s) {
            std::vector<double> seg(v.begin() + s * per,
                                    v.begin() + (s + 1) * per);
            spread += percentile(seg, 90.0) - percentile(seg, 10.0);
            ++steps;
        }
    }
    out.speed_variation = steps > 0 ? spread / steps : whole;
    return out;
}

GaitFeatureVector extract_rf_features(const Spectrogram& sg,
                                      const SceneConfig& scene,
                                      const FeaturesConfig& cfg) {
    Spectrogram cropped = crop_central(sg, cfg.crop_fraction);
    TorsoSpeedCurve curve = torso_speed(cropped, scene, cfg);
    CycleEstimate cycle;
    if (!curve.degenerate && curve.duration() >= 1.5)
        cycle = gait_cycle(curve, cfg.min_peak_separation_s);
    GaitFeatureVector out = assemble_features(curve, cycle);
    out.modality = "rf";
    out.sample_id = sg.source_id;
    return out;
}

namespace {

std::vector<double> lowpass_below(const std::vector<double>& x, double rate,
                                  double cutoff_hz) {
    const int n = int(x.size());
    if (n < 2) return x;
    double* in = fftw_alloc_real(n);
    fftw_complex* spec = fftw_alloc_complex(n / 2 + 1);
    std::copy(x.begin(), x.end(), in);
    fftw_plan fwd = fftw_plan_dft_r2c_1d(n, in, spec, FFTW_ESTIMATE);
    fftw_execute(fwd);
    for (int b = 0; b <= n / 2; ++b)
        if (b * rate / n > cutoff_hz) spec[b][0] = spec[b][1] = 0.0;
    fftw_plan bwd = fftw_plan_dft_c2r_1d(n, spec, in, FFTW_ESTIMATE);
    fftw_execute(bwd);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = in[i] / n;
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(in);
    fftw_free(spec);
    return out;
}

// topographic prominence of a local maximum: height above the higher of the
// two valleys separating it from taller terrain
double prominence_at(const std::vector<double>& x, int i) {
    double left = x[i], right = x[i];
    for (int k = i - 1; k >= 0; --k) {
        if (x[k] > x[i]) break;
        left = std::min(left, x[k]);
    }
    for (int k = i + 1; k < int(x.size()); ++k) {
        if (x[k] > x[i]) break;
        right = std::min(right, x[k]);
    }
    return x[i] - std::max(left, right);
}

// indices of prominent local maxima at least min_sep samples apart. The
// prominence gate (20% of the curve range) drops the lowpass filter's
// ringing ripples on flat stance phases.
std::vector<int> separated_maxima(const std::vector<double>& x, int min_sep) {
    double lo = *std::min_element(x.begin(), x.end());
    double hi = *std::max_element(x.begin(), x.end());
    if (hi <= lo) return {};
    const double min_prom = 0.2 * (hi - lo);
    std::vector<int> cand;
    for (int i = 1; i + 1 < int(x.size()); ++i)
        if (x[i] > x[i - 1] && x[i] >= x[i + 1] &&
            prominence_at(x, i) >= min_prom)
            cand.push_back(i);
    std::sort(cand.begin(), cand.end(), [&](int a, int b) {
        return x[a] != x[b] ? x[a] > x[b] : a < b;
    });
    std::vector<int> kept;
    for (int i : cand) {
        bool ok = true;
        for (int k : kept)
            if (std::abs(i - k) < min_sep) ok = false;
        if (ok) kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

// mean spacing of same-type extrema of one foot's vertical curve. Lift peaks
// are sharp and reliable; stance-phase minima sit on a flat floor where the
// deepest ripple lands anywhere, so minima only serve as a fallback when
// fewer than two peaks are in view. {0, false} when neither type yields two.
std::pair<double, bool> foot_cycle(const std::vector<double>& z, double fps,
                                   const FeaturesConfig& cfg) {
    auto smooth_z = lowpass_below(z, fps, cfg.video_lowpass_hz);
    int sep = int(std::ceil(cfg.video_min_extremum_sep_s * fps));
    auto maxima = separated_maxima(smooth_z, sep);
    std::vector<int> ext = maxima;
    if (ext.size() < 2) {
        std::vector<double> neg(smooth_z.size());
        for (std::size_t i = 0; i < smooth_z.size(); ++i) neg[i] = -smooth_z[i];
        ext = separated_maxima(neg, sep);
    }
    if (ext.size() < 2) return {0.0, false};
    return {double(ext.back() - ext.front()) / double(ext.size() - 1) / fps,
            true};
}

}  // namespace

GaitFeatureVector extract_video_features(const MeshSequence& seq,
                                         const FeaturesConfig& cfg) {
    seq.validate();
    check(seq.units == "meter", "video features: sequence must be in meters");
    const int n = int(seq.frames.size());
    check(n >= 8, "video features: too few frames");
    const double fps = seq.fps;

    // middle half of the walk
    const int lo = n / 4, hi = (3 * n) / 4;
    check(hi - lo >= 4, "video features: middle half too short");

    TorsoSpeedCurve curve;
    curve.time_step = 1.0 / fps;
    for (int f = lo + 1; f < hi; ++f) {
        check(!seq.frames[f].points[int(Part::torso)].empty() &&
                  !seq.frames[f - 1].points[int(Part::torso)].empty(),
              "video features: torso keypoint missing");
        Vec3 d = seq.frames[f].part_centroid(Part::torso) -
                 seq.frames[f - 1].part_centroid(Part::torso);
        curve.speeds.push_back(std::hypot(d.x(), d.y()) * fps);
    }

    CycleEstimate cycle;
    double acc = 0;
    int feet = 0;
    for (Part foot : {Part::foot_l, Part::foot_r}) {
        std::vector<double> z;
        bool complete = true;
        for (int f = lo; f < hi; ++f) {
            if (seq.frames[f].points[int(foot)].empty()) {
                complete = false;
                break;
            }
            z.push_back(seq.frames[f].part_centroid(foot).z());
        }
        if (!complete || int(z.size()) < 4) continue;
        auto [c, ok] = foot_cycle(z, fps, cfg);
        if (ok && c > 0) {
            acc += c;
            ++feet;
        }
    }
    if (feet > 0) cycle = {acc / feet, false};

    GaitFeatureVector out = assemble_features(curve, cycle);
    out.modality = "video";
    out.subject_id = seq.subject_id;
    out.label = seq.label;
    return out;
}

namespace {

const char* kTableHeader =
    "subject_id,sample_id,label,modality,avg_speed,min_speed,max_speed,"
    "gait_cycle,step_length,speed_variation,cycle_missing";

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_feature_table(const std::vector<GaitFeatureVector>& rows,
                         const std::string& path) {
    std::string out = std::string(kTableHeader) + "\n";
    for (const auto& r : rows) {
        r.validate();
        check(r.subject_id.find_first_of(",\n") == std::string::npos &&
                  r.sample_id.find_first_of(",\n") == std::string::npos,
              "feature table: ids must not contain commas or newlines");
        out += r.subject_id + "," + r.sample_id + "," + label_name(r.label) +
               "," + r.modality;
        for (double v : r.values()) out += "," + fmt_double(v);
        out += std::string(",") + (r.cycle_missing ? "1" : "0") + "\n";
    }
    atomic_write(path, out);
}

std::vector<GaitFeatureVector> read_feature_table(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    check(bool(std::getline(in, line)) && line == kTableHeader,
          "feature table: bad header in " + path);
    std::vector<GaitFeatureVector> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t pos = 0;
        while (true) {
            std::size_t c = line.find(',', pos);
            f.push_back(line.substr(pos, c - pos));
            if (c == std::string::npos) break;
            pos = c + 1;
        }
        check(f.size() == 11, "feature table: bad row in " + path);
        GaitFeatureVector r;
        r.subject_id = f[0];
        r.sample_id = f[1];
        r.label = label_from_name(f[2]);
        r.modality = f[3];
        r.avg_speed = std::stod(f[4]);
        r.min_speed = std::stod(f[5]);
        r.max_speed = std::stod(f[6]);
        r.gait_cycle = std::stod(f[7]);
        r.step_length = std::stod(f[8]);
        r.speed_variation = std::stod(f[9]);
        r.cycle_missing = f[10] == "1";
        r.validate();
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace wigait
