#include "wigait/rfsim.hpp"

#include "wigait/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

namespace wigait {

void ChannelRecording::validate() const {
    check(sample_rate > 0, "recording: sample rate must be positive");
    check(wavelength > 0, "recording: wavelength must be positive");
    check(!streams.empty(), "recording: no streams");
    for (const auto& s : streams)
        check(s.size() == streams[0].size(),
              "recording: streams differ in length");
    check(antennas >= 1 && subcarriers >= 1, "recording: bad stream layout");
    check(std::size_t(antennas) * std::size_t(subcarriers) == streams.size(),
          "recording: layout does not match stream count");
    if (origin == "synthetic") {
        check(streams.size() == 1, "recording: synthetic origin implies 1 stream");
    } else if (origin == "measured") {
        check(antennas == 3 && subcarriers == 30,
              "recording: measured origin implies a 3 x 30 layout");
    } else {
        throw error("recording: origin must be synthetic or measured, got " +
                    origin);
    }
}

Vec3 specular_vector(const Vec3& x_inc, const Vec3& n) {
    check(std::abs(x_inc.norm() - 1.0) <= 1e-9,
          "specular_vector: incident direction must be unit length");
    check(std::abs(n.norm() - 1.0) <= 1e-9,
          "specular_vector: normal must be unit length");
    return x_inc - 2.0 * x_inc.dot(n) * n;
}

cplx greens(const Vec3& p1, const Vec3& p2, double wavelength) {
    check(wavelength > 0, "greens: wavelength must be positive");
    double d = (p1 - p2).norm();
    check(d > 1e-12, "greens: coincident points");
    return std::polar(1.0 / (4.0 * M_PI * d), 2.0 * M_PI * d / wavelength);
}

std::vector<int> hpr_visible(const std::vector<Vec3>& pts, const Vec3& viewpoint,
                             double scene_diameter) {
    const int n = int(pts.size());
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    if (n < 4) return all;

    check(scene_diameter > 0, "hpr: scene diameter must be positive");
    const double radius = 100.0 * scene_diameter;
    std::vector<Vec3> flipped;
    flipped.reserve(n + 1);
    for (const auto& p : pts) {
        Vec3 q = p - viewpoint;
        double d = q.norm();
        if (d < 1e-12) {
            flipped.push_back(Vec3::Zero());  // coincides with the viewpoint
            continue;
        }
        flipped.push_back(q * (2.0 * radius / d - 1.0));
    }
    flipped.push_back(Vec3::Zero());  // the viewpoint itself

    std::vector<IndexTri> hull;
    try {
        hull = convex_hull(flipped);
    } catch (const error&) {
        return all;  // too flat for a hull; nothing to occlude with
    }
    std::set<int> vis;
    for (const auto& t : hull)
        for (int v : t)
            if (v < n) vis.insert(v);
    return std::vector<int>(vis.begin(), vis.end());
}

std::vector<int> visible_set(const TriangulatedBody& body, const Vec3& tx,
                             const Vec3& rx) {
    check(!body.surfaces.empty(), "visible_set: empty body");
    std::vector<Vec3> centers;
    centers.reserve(body.surfaces.size());
    for (const auto& s : body.surfaces) centers.push_back(s.center);

    Vec3 lo = tx.cwiseMin(rx), hi = tx.cwiseMax(rx);
    for (const auto& c : centers) {
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    }
    double diameter = (hi - lo).norm();
    if (diameter <= 0) diameter = 1.0;

    std::vector<int> from_tx = hpr_visible(centers, tx, diameter);
    std::vector<int> from_rx = hpr_visible(centers, rx, diameter);
    std::vector<int> both;
    std::set_intersection(from_tx.begin(), from_tx.end(), from_rx.begin(),
                          from_rx.end(), std::back_inserter(both));

    std::vector<int> out;
    for (int i : both) {
        const SubSurface& s = body.surfaces[i];
        Vec3 x_inc = (s.center - tx).normalized();
        Vec3 x_rx = (rx - s.center).normalized();
        if (x_inc.dot(s.normal) > 0) continue;   // back-facing to the transmitter
        if (-x_rx.dot(s.normal) > 0) continue;   // receiver behind the facet
        out.push_back(i);
    }
    return out;
}

cplx scattering_coefficient(const SubSurface& s, const Vec3& tx, const Vec3& rx,
                            const ScatteringConfig& p, double phase) {
    Vec3 x_inc = (s.center - tx).normalized();
    double cos_inc = -x_inc.dot(s.normal);
    check(cos_inc > 0, "scattering: facet is back-facing to the transmitter");
    Vec3 x_spec = specular_vector(x_inc, s.normal);
    Vec3 x_rx = (rx - s.center).normalized();
    double cos_th = x_rx.dot(x_spec);
    double lobe = cos_th > 0 ? std::pow(cos_th, p.m) : 0.0;
    return std::sqrt(s.area * cos_inc) *
           (p.alpha * std::polar(1.0, phase) + p.beta * lobe);
}

namespace {

// One Born product term; zero for (transiently) back-facing facets so walk
// interpolation never trips the scattering precondition.
cplx born_term(const SubSurface& s, const Vec3& tx, const Vec3& rx,
               double wavelength, const ScatteringConfig& p, double phase) {
    Vec3 x_inc = (s.center - tx).normalized();
    if (-x_inc.dot(s.normal) <= 1e-12) return {0.0, 0.0};
    return greens(tx, s.center, wavelength) *
           scattering_coefficient(s, tx, rx, p, phase) *
           greens(s.center, rx, wavelength);
}

}  // namespace

cplx simulate_frame(const TriangulatedBody& body, const SceneConfig& scene,
                    const ScatteringConfig& p, const std::vector<double>& phases) {
    check(phases.size() >= body.surfaces.size(),
          "simulate_frame: phases must cover all surfaces");
    const double lambda = scene.wavelength();
    cplx s_r = greens(scene.tx, scene.rx, lambda);
    if (body.surfaces.empty()) return s_r;  // nothing scatters
    for (int i : visible_set(body, scene.tx, scene.rx))
        s_r += born_term(body.surfaces[i], scene.tx, scene.rx, lambda, p,
                         phases[i]);
    return s_r;
}

ChannelRecording simulate_walk(const MeshSequence& seq, const SceneConfig& scene,
                               const ScatteringConfig& p, std::uint64_t seed,
                               const AlphaConfig& alpha) {
    check(seq.units == "meter", "simulate: sequence must be in meters");
    seq.validate();
    check(seq.frames.size() >= 2, "simulate: need at least 2 frames");
    check(scene.packet_rate >= 250,
          "simulate: packet rate must be at least 250 Hz");

    const double lambda = scene.wavelength();
    const cplx direct = greens(scene.tx, scene.rx, lambda);

    // Roughness phases, one per (part, triangle), drawn lazily in first-seen
    // order so frames with growing triangle counts extend the same stream.
    Rng phase_rng(derive_seed(seed, "surface-phases"));
    std::array<std::vector<double>, kNumParts> phase_tab;
    auto ensure_phases = [&](int part, std::size_t count) {
        auto& v = phase_tab[part];
        while (v.size() < count) v.push_back(phase_rng.uniform(0.0, 2.0 * M_PI));
    };

    const double t0 = seq.frames.front().timestamp;
    const double t_end = seq.frames.back().timestamp;
    const double rate = scene.packet_rate;
    const std::size_t n_samples = std::size_t((t_end - t0) * rate + 1e-9) + 1;

    std::vector<cplx> out(n_samples, direct);
    std::size_t j = 0;
    for (std::size_t k = 0; k + 1 < seq.frames.size(); ++k) {
        const BodyFrame& fa = seq.frames[k];
        const BodyFrame& fb = seq.frames[k + 1];
        const double ta = fa.timestamp, tb = fb.timestamp;

        BodyTriangulation topo = triangulate_frame(fa, alpha);
        for (int part = 0; part < kNumParts; ++part)
            ensure_phases(part, topo.tris[part].size());
        TriangulatedBody body = surfaces_for(topo, fa);
        std::vector<int> vis = visible_set(body, scene.tx, scene.rx);

        const bool last = k + 2 == seq.frames.size();
        while (j < n_samples) {
            double t = t0 + double(j) / rate;
            if (t >= tb - 1e-12 && !(last && t <= tb + 1e-12)) break;
            double u = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);

            cplx s_r = direct;
            for (int i : vis) {
                const SubSurface& ref = body.surfaces[i];
                const auto& tri = topo.tris[ref.part][ref.tri];
                const auto& pa = fa.points[ref.part];
                const auto& pb = fb.points[ref.part];
                Vec3 a = (1 - u) * pa[tri[0]] + u * pb[tri[0]];
                Vec3 b = (1 - u) * pa[tri[1]] + u * pb[tri[1]];
                Vec3 c = (1 - u) * pa[tri[2]] + u * pb[tri[2]];
                Vec3 raw = (b - a).cross(c - a);
                double area = raw.norm() / 2.0;
                if (area < 1e-18) continue;
                SubSurface s;
                s.center = (a + b + c) / 3.0;
                s.normal = raw / (2.0 * area);
                // keep the frame-a orientation through the interpolation
                if (s.normal.dot(ref.normal) < 0) s.normal = -s.normal;
                s.area = area;
                s_r += born_term(s, scene.tx, scene.rx, lambda, p,
                                 phase_tab[ref.part][ref.tri]);
            }
            out[j++] = s_r;
        }
    }
    check(j == n_samples, "simulate: packet grid did not cover the walk");

    ChannelRecording rec;
    rec.streams.push_back(std::move(out));
    rec.sample_rate = rate;
    rec.wavelength = lambda;
    rec.origin = "synthetic";
    rec.antennas = 1;
    rec.subcarriers = 1;
    rec.validate();
    return rec;
}

namespace {

constexpr char kMagic[8] = {'W', 'G', 'C', 'H', 'R', 'E', 'C', '1'};

template <typename T>
void put(std::string& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off) {
    check(off + sizeof(T) <= buf.size(), "recording: truncated file");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

void write_recording(const ChannelRecording& rec, const std::string& path,
                     const std::string& sidecar_json) {
    rec.validate();
    std::string buf;
    buf.reserve(64 + rec.streams.size() * rec.samples() * 16);
    buf.append(kMagic, sizeof(kMagic));
    put<double>(buf, rec.sample_rate);
    put<double>(buf, rec.wavelength);
    put<std::uint32_t>(buf, std::uint32_t(rec.streams.size()));
    put<std::uint32_t>(buf, std::uint32_t(rec.antennas));
    put<std::uint32_t>(buf, std::uint32_t(rec.subcarriers));
    put<std::uint32_t>(buf, rec.origin == "measured" ? 1 : 0);
    put<std::uint64_t>(buf, std::uint64_t(rec.samples()));
    for (const auto& stream : rec.streams)
        for (const cplx& z : stream) {
            put<double>(buf, z.real());
            put<double>(buf, z.imag());
        }
    atomic_write(path, buf);
    if (!sidecar_json.empty()) atomic_write(path + ".meta.json", sidecar_json);
}

ChannelRecording read_recording(const std::string& path) {
    std::string buf = read_file(path);
    check(buf.size() >= sizeof(kMagic) &&
              std::memcmp(buf.data(), kMagic, sizeof(kMagic)) == 0,
          "recording: " + path + " is not a channel recording");
    std::size_t off = sizeof(kMagic);
    ChannelRecording rec;
    rec.sample_rate = take<double>(buf, off);
    rec.wavelength = take<double>(buf, off);
    auto n_streams = take<std::uint32_t>(buf, off);
    rec.antennas = int(take<std::uint32_t>(buf, off));
    rec.subcarriers = int(take<std::uint32_t>(buf, off));
    rec.origin = take<std::uint32_t>(buf, off) == 1 ? "measured" : "synthetic";
    auto n_samples = take<std::uint64_t>(buf, off);
    check(buf.size() - off == n_streams * n_samples * 16,
          "recording: payload size mismatch in " + path);
    rec.streams.resize(n_streams);
    for (auto& stream : rec.streams) {
        stream.reserve(n_samples);
        for (std::uint64_t i = 0; i < n_samples; ++i) {
            double re = take<double>(buf, off);
            double im = take<double>(buf, off);
            stream.emplace_back(re, im);
        }
    }
    rec.validate();
    return rec;
}

}  // namespace wigait
