#pragma once

#include "wigait/common.hpp"
#include "wigait/config.hpp"
#include "wigait/rfsim.hpp"

#include <string>
#include <vector>

namespace wigait {

// Doppler spectrogram: one row per time frame, one column per frequency bin.
// Magnitudes are multitaper power estimates, so always non-negative.
struct Spectrogram {
    std::vector<std::vector<double>> magnitudes;  // [frame][bin]
    double time_step = 0.016;                     // s between frames
    std::vector<double> frequency_bins;           // Hz, one per column
    std::string source_id;

    std::size_t frames() const { return magnitudes.size(); }
    std::size_t bins() const { return frequency_bins.size(); }
    void validate() const;
};

// Subtract the mean; length preserved, output mean 0 within 1e-12.
std::vector<double> dc_remove(const std::vector<double>& stream);

// Principal components of equal-length streams, ordered by descending
// explained variance. Sign convention: the largest-magnitude loading of each
// eigenvector is positive (first such index on ties). Components are scaled by
// 1/sqrt(stream count) so that identical inputs reproduce the shared stream.
// Throws below 15 streams (the averaging path needs the first 15).
std::vector<std::vector<double>> pca_components(
    const std::vector<std::vector<double>>& streams);

// First `count` orthonormal Hermite tapers sampled on `window` points over
// [-tmax, tmax]. Discretely re-orthonormalized, so Parseval bounds hold
// exactly; parity of the continuous functions is preserved.
std::vector<std::vector<double>> hermite_tapers(int window, int count,
                                                double tmax = 6.0);

// Multitaper STFT: average of |FFT|^2 over the Hermite tapers, one-sided
// spectrum. Frame count = floor((N - W) / S) + 1. zero_pad multiplies the FFT
// length for finer bin spacing.
Spectrogram hermite_stft(const std::vector<double>& stream, double sample_rate,
                         double window_s, double shift_s, int tapers,
                         int zero_pad = 1, double taper_tmax = 6.0);

// Recording -> averaged Doppler spectrogram. Measured recordings run
// magnitude -> dc_remove -> PCA -> STFT of the first cfg.pca_streams
// components -> elementwise average (zero-variance components are skipped so
// degenerate inputs do not dilute the average). Synthetic recordings are a
// single stream and skip PCA.
Spectrogram spectrogram_pipeline(const ChannelRecording& rec,
                                 const DspConfig& cfg = DspConfig{});

// Keep the central ceil(fraction * frames) rows; ties toward the start.
Spectrogram crop_central(const Spectrogram& sg, double fraction);

// Binary container: magic, dimensions, time step, bin frequencies, source id,
// row-major magnitudes. Round-trips bit-exactly.
void write_spectrogram(const Spectrogram& sg, const std::string& path);
Spectrogram read_spectrogram(const std::string& path);

// Grayscale PGM render for eyeballing: time left to right, frequency bottom
// to top, 60 dB log range.
void render_pgm(const Spectrogram& sg, const std::string& path);

}  // namespace wigait
