#include "wigait/dsp.hpp"

#include "wigait/manifest.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace wigait {

void Spectrogram::validate() const {
    check(!magnitudes.empty(), "spectrogram: no frames");
    check(!frequency_bins.empty(), "spectrogram: no frequency bins");
    check(time_step > 0, "spectrogram: time step must be positive");
    for (const auto& row : magnitudes) {
        check(row.size() == frequency_bins.size(),
              "spectrogram: row width does not match the bin count");
        for (double m : row)
            check(m >= 0, "spectrogram: negative magnitude");
    }
}

std::vector<double> dc_remove(const std::vector<double>& stream) {
    check(!stream.empty(), "dc_remove: empty stream");
    double m = mean(stream);
    std::vector<double> out(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) out[i] = stream[i] - m;
    return out;
}

std::vector<std::vector<double>> pca_components(
    const std::vector<std::vector<double>>& streams) {
    const int s_count = int(streams.size());
    check(s_count >= 15, "pca: need at least 15 streams");
    const std::size_t n = streams[0].size();
    check(n >= 2, "pca: streams too short");
    for (const auto& s : streams)
        check(s.size() == n, "pca: streams differ in length");

    // center defensively; inputs are expected to be DC-removed already
    Eigen::MatrixXd x(s_count, n);
    for (int i = 0; i < s_count; ++i) {
        double m = mean(streams[i]);
        for (std::size_t t = 0; t < n; ++t) x(i, t) = streams[i][t] - m;
    }

    Eigen::MatrixXd cov = x * x.transpose() / double(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    check(eig.info() == Eigen::Success, "pca: eigendecomposition failed");

    std::vector<std::vector<double>> out;
    const double scale = 1.0 / std::sqrt(double(s_count));
    for (int k = s_count - 1; k >= 0; --k) {  // solver sorts ascending
        Eigen::VectorXd v = eig.eigenvectors().col(k);
        int lead = 0;
        for (int i = 1; i < s_count; ++i)
            if (std::abs(v[i]) > std::abs(v[lead])) lead = i;
        if (v[lead] < 0) v = -v;
        Eigen::VectorXd c = scale * (x.transpose() * v);
        out.emplace_back(c.data(), c.data() + n);
    }
    return out;
}

std::vector<std::vector<double>> hermite_tapers(int window, int count,
                                                double tmax) {
    check(window >= 8, "tapers: window must be at least 8 samples");
    check(count >= 1 && count <= window, "tapers: bad taper count");
    check(tmax > 0, "tapers: tmax must be positive");

    std::vector<double> t(window);
    for (int i = 0; i < window; ++i)
        t[i] = -tmax + 2.0 * tmax * i / (window - 1);

    // physicists' Hermite recurrence, weighted by the Gaussian
    std::vector<std::vector<double>> h(count, std::vector<double>(window));
    std::vector<double> hk(window, 1.0), hk1(window, 0.0);
    for (int k = 0; k < count; ++k) {
        for (int i = 0; i < window; ++i)
            h[k][i] = hk[i] * std::exp(-0.5 * t[i] * t[i]);
        std::vector<double> next(window);
        for (int i = 0; i < window; ++i)
            next[i] = 2.0 * t[i] * hk[i] - 2.0 * k * hk1[i];
        hk1 = hk;
        hk = next;
    }

    // modified Gram-Schmidt: exact discrete orthonormality
    for (int k = 0; k < count; ++k) {
        for (int j = 0; j < k; ++j) {
            double d = 0;
            for (int i = 0; i < window; ++i) d += h[k][i] * h[j][i];
            for (int i = 0; i < window; ++i) h[k][i] -= d * h[j][i];
        }
        double nrm = 0;
        for (double v : h[k]) nrm += v * v;
        nrm = std::sqrt(nrm);
        check(nrm > 1e-12, "tapers: rank deficiency, reduce the taper count");
        for (double& v : h[k]) v /= nrm;
    }
    return h;
}

Spectrogram hermite_stft(const std::vector<double>& stream, double sample_rate,
                         double window_s, double shift_s, int tapers,
                         int zero_pad, double taper_tmax) {
    check(sample_rate > 0, "stft: sample rate must be positive");
    check(window_s > 0 && shift_s > 0, "stft: window and shift must be positive");
    check(zero_pad >= 1, "stft: zero_pad must be at least 1");
    const int w = int(std::lround(window_s * sample_rate));
    const int s = int(std::lround(shift_s * sample_rate));
    check(w >= 8, "stft: window must cover at least 8 samples");
    check(s >= 1, "stft: shift must cover at least 1 sample");
    const std::size_t n = stream.size();
    check(n >= std::size_t(w), "stft: stream shorter than the window");

    const auto taps = hermite_tapers(w, tapers, taper_tmax);
    const int nfft = w * zero_pad;
    const int n_bins = nfft / 2 + 1;
    const std::size_t n_frames = (n - w) / s + 1;

    double* in = fftw_alloc_real(nfft);
    fftw_complex* out = fftw_alloc_complex(n_bins);
    fftw_plan plan = fftw_plan_dft_r2c_1d(nfft, in, out, FFTW_ESTIMATE);
    check(plan != nullptr, "stft: fftw plan failed");

    Spectrogram sg;
    sg.time_step = shift_s;
    sg.frequency_bins.resize(n_bins);
    for (int b = 0; b < n_bins; ++b)
        sg.frequency_bins[b] = b * sample_rate / nfft;
    sg.magnitudes.assign(n_frames, std::vector<double>(n_bins, 0.0));

    for (std::size_t f = 0; f < n_frames; ++f) {
        auto& row = sg.magnitudes[f];
        for (const auto& h : taps) {
            for (int i = 0; i < w; ++i) in[i] = stream[f * s + i] * h[i];
            std::memset(in + w, 0, sizeof(double) * (nfft - w));
            fftw_execute(plan);
            for (int b = 0; b < n_bins; ++b)
                row[b] += out[b][0] * out[b][0] + out[b][1] * out[b][1];
        }
        for (double& m : row) m /= double(tapers);
    }

    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    return sg;
}

namespace {

std::vector<double> magnitude_stream(const std::vector<cplx>& s) {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = std::abs(s[i]);
    return out;
}

double variance(const std::vector<double>& v) {
    double m = mean(v), acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / double(v.size());
}

}  // namespace

Spectrogram spectrogram_pipeline(const ChannelRecording& rec,
                                 const DspConfig& cfg) {
    rec.validate();
    check(cfg.pca_streams >= 1, "pipeline: pca_streams must be positive");

    auto stft = [&](const std::vector<double>& stream) {
        return hermite_stft(stream, rec.sample_rate, cfg.window_s, cfg.shift_s,
                            cfg.tapers, cfg.zero_pad, cfg.taper_tmax);
    };

    if (rec.origin == "synthetic")
        return stft(dc_remove(magnitude_stream(rec.streams[0])));

    std::vector<std::vector<double>> mags;
    mags.reserve(rec.streams.size());
    for (const auto& s : rec.streams)
        mags.push_back(dc_remove(magnitude_stream(s)));
    auto comps = pca_components(mags);
    check(int(comps.size()) >= cfg.pca_streams,
          "pipeline: fewer components than pca_streams");

    // Skip zero-variance components (rank-deficient input): averaging their
    // all-zero spectrograms would only dilute the signal.
    double var0 = variance(comps[0]);
    Spectrogram avg;
    int used = 0;
    for (int k = 0; k < cfg.pca_streams; ++k) {
        if (variance(comps[k]) <= 1e-12 * var0) continue;
        Spectrogram sg = stft(comps[k]);
        if (used == 0) {
            avg = std::move(sg);
        } else {
            for (std::size_t f = 0; f < avg.frames(); ++f)
                for (std::size_t b = 0; b < avg.bins(); ++b)
                    avg.magnitudes[f][b] += sg.magnitudes[f][b];
        }
        ++used;
    }
    if (used == 0)  // fully static scene: keep the shape, all zeros
        return stft(std::vector<double>(rec.samples(), 0.0));
    for (auto& row : avg.magnitudes)
        for (double& m : row) m /= double(used);
    return avg;
}

Spectrogram crop_central(const Spectrogram& sg, double fraction) {
    check(fraction > 0 && fraction <= 1, "crop: fraction must be in (0, 1]");
    sg.validate();
    const std::size_t t = sg.frames();
    const std::size_t keep = std::size_t(std::ceil(fraction * double(t)));
    const std::size_t start = (t - keep) / 2;
    Spectrogram out;
    out.time_step = sg.time_step;
    out.frequency_bins = sg.frequency_bins;
    out.source_id = sg.source_id;
    out.magnitudes.assign(sg.magnitudes.begin() + start,
                          sg.magnitudes.begin() + start + keep);
    return out;
}

namespace {

constexpr char kSgMagic[8] = {'W', 'G', 'S', 'P', 'G', 'R', 'M', '1'};

template <typename T>
void put(std::string& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off) {
    check(off + sizeof(T) <= buf.size(), "spectrogram: truncated file");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

void write_spectrogram(const Spectrogram& sg, const std::string& path) {
    sg.validate();
    std::string buf;
    buf.reserve(64 + sg.source_id.size() +
                (sg.frames() * sg.bins() + sg.bins()) * 8);
    buf.append(kSgMagic, sizeof(kSgMagic));
    put<std::uint64_t>(buf, sg.frames());
    put<std::uint64_t>(buf, sg.bins());
    put<double>(buf, sg.time_step);
    for (double f : sg.frequency_bins) put<double>(buf, f);
    put<std::uint32_t>(buf, std::uint32_t(sg.source_id.size()));
    buf.append(sg.source_id);
    for (const auto& row : sg.magnitudes)
        for (double m : row) put<double>(buf, m);
    atomic_write(path, buf);
}

Spectrogram read_spectrogram(const std::string& path) {
    std::string buf = read_file(path);
    check(buf.size() >= sizeof(kSgMagic) &&
              std::memcmp(buf.data(), kSgMagic, sizeof(kSgMagic)) == 0,
          "spectrogram: " + path + " is not a spectrogram container");
    std::size_t off = sizeof(kSgMagic);
    Spectrogram sg;
    auto rows = take<std::uint64_t>(buf, off);
    auto cols = take<std::uint64_t>(buf, off);
    sg.time_step = take<double>(buf, off);
    sg.frequency_bins.resize(cols);
    for (auto& f : sg.frequency_bins) f = take<double>(buf, off);
    auto id_len = take<std::uint32_t>(buf, off);
    check(off + id_len <= buf.size(), "spectrogram: truncated file");
    sg.source_id.assign(buf, off, id_len);
    off += id_len;
    check(buf.size() - off == rows * cols * 8,
          "spectrogram: payload size mismatch in " + path);
    sg.magnitudes.assign(rows, std::vector<double>(cols));
    for (auto& row : sg.magnitudes)
        for (double& m : row) m = take<double>(buf, off);
    sg.validate();
    return sg;
}

void render_pgm(const Spectrogram& sg, const std::string& path) {
    sg.validate();
    const std::size_t w = sg.frames(), h = sg.bins();
    double peak = 0;
    for (const auto& row : sg.magnitudes)
        for (double m : row) peak = std::max(peak, m);

    std::string buf = "P5\n" + std::to_string(w) + " " + std::to_string(h) +
                      "\n255\n";
    const double range_db = 60.0;
    for (std::size_t y = 0; y < h; ++y) {        // top row = highest frequency
        std::size_t b = h - 1 - y;
        for (std::size_t x = 0; x < w; ++x) {
            double m = sg.magnitudes[x][b];
            double v = 0.0;
            if (peak > 0 && m > 0)
                v = std::max(0.0, 1.0 + 10.0 * std::log10(m / peak) / range_db);
            buf.push_back(char(std::lround(255.0 * v)));
        }
    }
    atomic_write(path, buf);
}

}  // namespace wigait
