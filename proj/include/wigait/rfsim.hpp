#pragma once

#include "wigait/common.hpp"
#include "wigait/config.hpp"
#include "wigait/geometry.hpp"
#include "wigait/mesh.hpp"

#include <complex>
#include <string>
#include <vector>

namespace wigait {

// Complex baseband channel samples. Synthetic recordings carry one stream;
// measured captures carry antennas x subcarriers streams (3 x 30 = 90).
struct ChannelRecording {
    std::vector<std::vector<cplx>> streams;
    double sample_rate = 0.0;  // Hz
    double wavelength = 0.0;   // m
    std::string origin = "synthetic";  // synthetic | measured
    int antennas = 1;
    int subcarriers = 1;

    std::size_t samples() const { return streams.empty() ? 0 : streams[0].size(); }
    void validate() const;
};

// Mirror reflection of the incident direction about the surface normal.
Vec3 specular_vector(const Vec3& x_inc, const Vec3& n);

// Free-space Green's function e^{j 2 pi d / lambda} / (4 pi d).
cplx greens(const Vec3& p1, const Vec3& p2, double wavelength);

// Hidden-point removal by spherical inversion (flip about a sphere of radius
// 100 x scene diameter around the viewpoint, then convex hull with the
// viewpoint). Returns indices of visible points; clouds too small or flat for
// a hull are treated as fully visible.
std::vector<int> hpr_visible(const std::vector<Vec3>& pts, const Vec3& viewpoint,
                             double scene_diameter);

// Facets visible from both transceivers: hidden-point removal from each
// viewpoint, then back-face sign tests against the facet normal.
std::vector<int> visible_set(const TriangulatedBody& body, const Vec3& tx,
                             const Vec3& rx);

// Quasi-specular Lambertian reflectivity
//   R = sqrt(A cos th_inc) (alpha e^{j phi} + beta cos^m th)
// where th_inc is the incidence angle and th the angle between the receiver
// direction and the specular direction (cos^m clamped to zero behind the
// specular plane). Throws when the facet is back-facing (cos th_inc <= 0).
cplx scattering_coefficient(const SubSurface& s, const Vec3& tx, const Vec3& rx,
                            const ScatteringConfig& p, double phase);

// Born-approximation channel sample: static direct path plus one product term
// per facet in visible_set. `phases` is parallel to body.surfaces.
cplx simulate_frame(const TriangulatedBody& body, const SceneConfig& scene,
                    const ScatteringConfig& p, const std::vector<double>& phases);

// Full walk -> one packet-rate complex stream. Topology, visibility, and
// roughness phases are fixed per mesh frame; packet-time geometry comes from
// linear interpolation of the part points between mesh frames (facet centers
// then interpolate linearly). Phases are drawn once per (part, triangle) per
// walk from the seed.
ChannelRecording simulate_walk(const MeshSequence& seq, const SceneConfig& scene,
                               const ScatteringConfig& p, std::uint64_t seed,
                               const AlphaConfig& alpha = AlphaConfig::defaults());

// Binary container (header + interleaved little-endian doubles); a structured
// sidecar with provenance is written next to it as <path>.meta.json.
void write_recording(const ChannelRecording& rec, const std::string& path,
                     const std::string& sidecar_json);
ChannelRecording read_recording(const std::string& path);

}  // namespace wigait
