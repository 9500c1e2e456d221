#pragma once

#include "wigait/common.hpp"
#include "wigait/config.hpp"
#include "wigait/mesh.hpp"

#include <array>
#include <string>
#include <vector>

namespace wigait {

// Triangle as indices into the point list it was built from. Output triangles
// of alpha_shape / convex_hull reference input points only.
using IndexTri = std::array<int, 3>;

// Delaunay tetrahedron with its cached circumsphere.
struct Tetra {
    std::array<int, 4> v;
    Vec3 center;
    double radius = 0.0;
};

// Incremental (Bowyer-Watson) Delaunay tetrahedralization. Degenerate and
// cospherical configurations are resolved by a fixed symbolic perturbation of
// the inputs, so the result is deterministic for a given point list.
// Throws for < 4 points or an (almost) coplanar set.
std::vector<Tetra> delaunay_tetrahedra(const std::vector<Vec3>& pts);

// Boundary of the alpha complex: faces of the Delaunay tetrahedralization that
// bound exactly one tetrahedron with circumradius < alpha, plus singular
// Gabriel faces (no kept incident tetrahedron, own smallest circumsphere
// smaller than alpha and empty). Triangles are oriented away from the input
// centroid. alpha -> 0 gives an empty set; throws on degenerate input.
std::vector<IndexTri> alpha_shape(const std::vector<Vec3>& pts, double alpha);

// Quickhull convex hull; outward-oriented triangles. Throws for < 4 points or
// an (almost) coplanar set.
std::vector<IndexTri> convex_hull(const std::vector<Vec3>& pts);

// Per-part alpha radii (m). Defaults follow part size: 0.25 torso, 0.15 for
// head/shoulders/upper arms/thighs/lower legs, 0.08 for hands/feet.
// from_config applies the global scale to the defaults, then named overrides
// as absolute values.
struct AlphaConfig {
    std::array<double, kNumParts> radius{};

    static AlphaConfig defaults();
    static AlphaConfig from_config(const GeometryConfig& g);
};

// One oriented scattering facet: triangle centroid, unit normal pointing away
// from the owning part's centroid, and triangle area. (part, tri) identifies
// the facet stably across frames that share a topology.
struct SubSurface {
    Vec3 center;
    Vec3 normal;
    double area = 0.0;
    int part = 0;
    int tri = 0;
};

// Triangle topology per part, reusable across frames with moving points as
// long as per-part point counts and ordering are stable.
struct BodyTriangulation {
    std::array<std::vector<IndexTri>, kNumParts> tris;
    std::vector<int> skipped;  // parts without a usable surface

    int triangle_count() const;
};

struct TriangulatedBody {
    double timestamp = 0.0;
    std::vector<SubSurface> surfaces;
    std::vector<int> skipped;
};

// Per-part alpha shapes for one frame. Degenerate parts (and parts whose
// alpha shape came out empty) are recorded in `skipped`, not errors; a frame
// with no usable part at all throws.
BodyTriangulation triangulate_frame(const BodyFrame& frame, const AlphaConfig& cfg);

// Evaluate facet centers / outward normals / areas of a fixed topology
// against the point positions in `frame`.
TriangulatedBody surfaces_for(const BodyTriangulation& topo, const BodyFrame& frame);

TriangulatedBody triangulate_body(const BodyFrame& frame, const AlphaConfig& cfg);

double total_area(const TriangulatedBody& body);

// ASCII OFF dump for eyeballing triangulations in standard mesh viewers.
void write_off(const std::string& path, const std::vector<Vec3>& pts,
               const std::vector<IndexTri>& tris);

}  // namespace wigait
