#pragma once

#include "wigait/config.hpp"
#include "wigait/dsp.hpp"
#include "wigait/mesh.hpp"

#include <string>
#include <vector>

namespace wigait {

struct TorsoSpeedCurve {
    std::vector<double> speeds;  // m/s, non-negative
    double time_step = 0.016;    // s
    bool degenerate = false;     // no spectral mass anywhere

    double duration() const { return speeds.size() * time_step; }
};

// The six gait features plus sample metadata. `values()` fixes the feature
// order used by the classifier.
struct GaitFeatureVector {
    double avg_speed = 0;        // m/s
    double min_speed = 0;        // 10th percentile
    double max_speed = 0;        // 90th percentile
    double gait_cycle = 0;       // s; 0 when missing
    double step_length = 0;      // m
    double speed_variation = 0;  // m/s
    bool cycle_missing = false;
    std::string subject_id, sample_id;
    Label label = Label::unknown;
    std::string modality;  // rf | video

    std::array<double, 6> values() const;
    void validate() const;
};

// Per-column torso frequency band: the shortest contiguous bin window holding
// more than half the column mass (ties toward the lowest start). All-zero
// columns get [0, 0] and a flag.
struct BandCurves {
    std::vector<double> lower, upper;  // Hz, one entry per time frame
    std::vector<bool> flagged;
};
BandCurves torso_band(const Spectrogram& sg);

// Rosner's generalized extreme studentized deviate test; removed samples are
// filled by linear interpolation of the surviving neighbors, preserving the
// time axis. Zero-variance input is returned unchanged.
std::vector<double> gesd_filter(const std::vector<double>& curve,
                                double significance, int max_outliers);

// Trailing moving average; the first span-1 samples average their prefix.
std::vector<double> smooth(const std::vector<double>& curve, int span = 4);

// Band -> outlier removal -> smoothing on both bounds -> second 50% pass
// restricted to the band -> bound average -> Hz to m/s via v = f lambda / psi.
TorsoSpeedCurve torso_speed(const Spectrogram& sg, const SceneConfig& scene,
                            const FeaturesConfig& cfg = FeaturesConfig{});

struct CycleEstimate {
    double seconds = 0;
    bool missing = true;
};

// Dominant step period from the unbiased autocorrelation of the mean-removed
// curve, doubled (a gait cycle is two steps). Candidate peaks sit at lags at
// least min_separation_s apart; near-ties (within 5% of the best) resolve to
// the smallest lag so cycle harmonics do not win. Peaks below 0.1 of the
// zero-lag value are noise: the estimate comes back flagged missing.
CycleEstimate gait_cycle(const TorsoSpeedCurve& curve,
                         double min_separation_s = 0.3);

// avg / p10 / p90 / step length (cycle/2 times avg) / per-step spread. With a
// missing cycle the spread falls back to the whole-walk percentile spread and
// step length stays 0.
GaitFeatureVector assemble_features(const TorsoSpeedCurve& curve,
                                    const CycleEstimate& cycle);

// Full RF path: central crop -> torso speed -> gait cycle -> features.
GaitFeatureVector extract_rf_features(const Spectrogram& sg,
                                      const SceneConfig& scene,
                                      const FeaturesConfig& cfg = FeaturesConfig{});

// Video path on a meters-aligned sequence: part centroids as keypoints, torso
// speed from horizontal keypoint displacement over the middle half, gait cycle
// from the feet's low-passed vertical curves (single-foot fallback).
GaitFeatureVector extract_video_features(const MeshSequence& seq,
                                         const FeaturesConfig& cfg = FeaturesConfig{});

// Delimited-text feature table, one row per sample; bit-stable round trip.
void write_feature_table(const std::vector<GaitFeatureVector>& rows,
                         const std::string& path);
std::vector<GaitFeatureVector> read_feature_table(const std::string& path);

}  // namespace wigait
