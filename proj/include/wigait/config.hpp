#pragma once

#include "wigait/common.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wigait {

// Plain-text sectioned key-value configuration. Lines are `key = value` under
// `[section]` headers; `#` starts a comment. Keys are addressed flat as
// "section.key". Every CLI flag mirrors one of these keys and flags win over
// file values.
class KeyValueFile {
  public:
    KeyValueFile() = default;

    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text);

    void set(const std::string& flat_key, const std::string& value);
    bool has(const std::string& flat_key) const;

    std::string get_string(const std::string& key, const std::string& dflt) const;
    double get_double(const std::string& key, double dflt) const;
    int get_int(const std::string& key, int dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;
    Vec3 get_vec3(const std::string& key, const Vec3& dflt) const;
    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& dflt) const;

    // Canonical serialization: sections and keys sorted, one value per line.
    // Used for config snapshots inside manifests.
    std::string canonical_text() const;

  private:
    std::map<std::string, std::string> values_;
};

struct SceneConfig {
    Vec3 tx{-0.32, 0.0, 1.1};
    Vec3 rx{0.32, 0.0, 1.1};
    double start_distance = 0.95;  // m from the link midpoint along +y
    double walk_length = 3.9;      // m, walked away from the link
    double packet_rate = 500.0;    // Hz
    double carrier_ghz = 5.32;
    std::string psi_mode = "geometric";  // geometric | constant
    double psi_value = 2.0;

    double wavelength() const;
    // cos(phi_RX) + cos(phi_TX) for a walker at `pos` moving along +y
    double psi_at(const Vec3& pos) const;
    // psi evaluated per psi_mode at the midpoint of the walk
    double psi_midpoint() const;
};

struct WalkerConfig {
    double frame_rate = 30.0;
    int points_per_part = 30;
    double speed = 1.0;             // m/s mean forward speed
    double gait_cycle = 1.2;        // s per full cycle (two steps)
    double step_length = 0.0;       // m; 0 = natural (speed * gait_cycle / 2)
    double modulation_depth = 0.08; // relative speed modulation per step
    double asymmetry = 0.0;         // 0 = symmetric gait
    double arm_swing = 0.25;        // rad
    double step_height = 0.06;      // m foot lift
    double jitter_mm = 2.0;         // surface roughness amplitude
    double height = 1.7;            // m
};

struct ScatteringConfig {
    double alpha = 0.1;  // quasi-specular weight
    double beta = 1.0;   // Lambertian weight
    double m = 8.0;      // Lambertian cosine exponent
};

struct GeometryConfig {
    // Per-part alpha radii default to the size rule (larger parts, larger
    // radius); named overrides and a global scale are configurable.
    double alpha_scale = 1.0;
    std::vector<std::pair<std::string, double>> alpha_overrides;
};

struct DspConfig {
    double window_s = 0.3;
    double shift_s = 0.016;
    int tapers = 5;
    int zero_pad = 1;
    double taper_tmax = 6.0;  // half-extent of the Hermite sampling grid
    int pca_streams = 15;     // spectrograms averaged on the measured path
};

struct FeaturesConfig {
    double crop_fraction = 0.5;
    double gesd_alpha = 0.05;
    double gesd_max_fraction = 0.2;
    int smooth_span = 4;
    double min_peak_separation_s = 0.3;
    double video_lowpass_hz = 4.0;
    double video_min_extremum_sep_s = 0.25;
};

// Default adaptation grid: 25 log-spaced class weights spanning [0.2, 5.0].
std::vector<double> default_weight_grid();

struct TrainConfig {
    int hidden1 = 512;
    int hidden2 = 256;
    double dropout = 0.5;
    double learning_rate = 1e-5;
    int epochs = 100;
    int batch = 10;
    std::vector<double> class_weights = default_weight_grid();
    int repeats = 10;          // adaptation repeats per grid weight
    int rounds = 8;            // evaluation protocol rounds
    int adapt_per_class = 6;   // adaptation-set size per class
};

struct PipelineConfig {
    int count_per_class = 20;  // evaluation corpus size per class
    int train_per_class = 20;  // training-pool size per class
    double healthy_speed = 1.1, healthy_speed_spread = 0.1;
    double healthy_cycle = 1.1, healthy_cycle_spread = 0.1;
    double healthy_modulation = 0.08;
    double impaired_speed = 0.65, impaired_speed_spread = 0.1;
    double impaired_cycle = 1.5, impaired_cycle_spread = 0.15;
    double impaired_modulation = 0.16;
};

struct Config {
    SceneConfig scene;
    WalkerConfig walker;
    ScatteringConfig scattering;
    GeometryConfig geometry;
    DspConfig dsp;
    FeaturesConfig features;
    TrainConfig train;
    PipelineConfig pipeline;

    static Config from_kv(const KeyValueFile& kv);
    // The merged view used for snapshots; contains every known key.
    KeyValueFile to_kv() const;
};

}  // namespace wigait
