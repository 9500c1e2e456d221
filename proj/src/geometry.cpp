#include "wigait/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>

namespace wigait {

namespace {

// Coplanarity / collinearity test shared by the triangulators. Matches the
// degeneracy rule used when ingesting mesh sequences.
bool nearly_flat(const std::vector<Vec3>& pts) {
    if (pts.size() < 4) return true;
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts) c += p;
    c /= double(pts.size());
    Eigen::MatrixXd m(pts.size(), 3);
    for (size_t i = 0; i < pts.size(); ++i) m.row(i) = (pts[i] - c).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    return s(2) < 1e-9 * s(0);
}

double bbox_diag(const std::vector<Vec3>& pts) {
    Vec3 lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

// Fixed symbolic perturbation: breaks cospherical ties (all points of one part
// sit on one ellipsoid) without observably moving anything. Depends only on
// the point list, so repeated calls agree.
std::vector<Vec3> jittered(const std::vector<Vec3>& pts) {
    double eps = 1e-8 * std::max(bbox_diag(pts), 1e-9);
    Rng rng(derive_seed(0x9e3779b97f4a7c15ull, "delaunay-jitter"));
    std::vector<Vec3> out = pts;
    for (auto& p : out)
        p += eps * Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                        rng.uniform(-1.0, 1.0));
    return out;
}

bool circumsphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                  Vec3& center, double& r2) {
    Eigen::Matrix3d m;
    m.row(0) = 2.0 * (b - a).transpose();
    m.row(1) = 2.0 * (c - a).transpose();
    m.row(2) = 2.0 * (d - a).transpose();
    Eigen::Vector3d rhs(b.squaredNorm() - a.squaredNorm(),
                        c.squaredNorm() - a.squaredNorm(),
                        d.squaredNorm() - a.squaredNorm());
    double scale =
        m.row(0).norm() * m.row(1).norm() * m.row(2).norm();
    if (std::abs(m.determinant()) <= 1e-12 * scale) return false;
    center = m.partialPivLu().solve(rhs);
    r2 = (center - a).squaredNorm();
    return true;
}

// Smallest circumsphere of a triangle (its circumcircle): center in the face
// plane. False for collinear corners.
bool face_circumcircle(const Vec3& a, const Vec3& b, const Vec3& c, Vec3& center,
                       double& r2) {
    Vec3 u = b - a, v = c - a;
    double uu = u.squaredNorm(), vv = v.squaredNorm(), uv = u.dot(v);
    double det = uu * vv - uv * uv;  // = |u x v|^2
    if (det <= 1e-20 * uu * vv) return false;
    double s = vv * (uu - uv) / (2.0 * det);
    double t = uu * (vv - uv) / (2.0 * det);
    center = a + s * u + t * v;
    r2 = (center - a).squaredNorm();
    return true;
}

struct BwCell {
    std::array<int, 4> v;  // vertex indices; the infinite vertex may appear once
    Vec3 cc;
    double r2 = 0.0;
    bool infinite = false;
    bool alive = true;
};

}  // namespace

// Incremental insertion with one vertex at infinity: every hull facet owns an
// infinite cell, and a point conflicts with it when it lies strictly outside
// the facet plane. (A finite enclosing tetrahedron mishandles hull pockets
// whose circumspheres reach its corners, which breaks the face incidence
// lists the alpha shape relies on.)
std::vector<Tetra> delaunay_tetrahedra(const std::vector<Vec3>& pts) {
    check(pts.size() >= 4, "delaunay: need at least 4 points, got " +
                               std::to_string(pts.size()));
    check(!nearly_flat(pts), "delaunay: point set is (almost) coplanar");

    const std::vector<Vec3> p = jittered(pts);
    const int n = int(p.size());
    const int kInf = n;

    // Initial tetrahedron: greedy max-extent quadruple.
    int i0 = 0, i1 = i0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        double d = (p[i] - p[i0]).squaredNorm();
        if (d > best) best = d, i1 = i;
    }
    int i2 = -1;
    best = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = (p[i] - p[i0]).cross(p[i1] - p[i0]).squaredNorm();
        if (d > best) best = d, i2 = i;
    }
    check(i2 >= 0 && best > 0, "delaunay: point set is (almost) collinear");
    int i3 = -1;
    best = 0.0;
    Vec3 nrm0 = (p[i1] - p[i0]).cross(p[i2] - p[i0]);
    for (int i = 0; i < n; ++i) {
        double d = std::abs(nrm0.dot(p[i] - p[i0]));
        if (d > best) best = d, i3 = i;
    }
    check(i3 >= 0 && best > 0, "delaunay: point set is (almost) coplanar");
    const Vec3 interior = (p[i0] + p[i1] + p[i2] + p[i3]) / 4.0;

    std::vector<BwCell> cells;
    auto add_cell = [&](int a, int b, int c, int d) {
        BwCell t;
        t.v = {a, b, c, d};
        t.infinite = a == kInf || b == kInf || c == kInf || d == kInf;
        if (!t.infinite) {
            if (!circumsphere(p[a], p[b], p[c], p[d], t.cc, t.r2)) {
                // flat sliver despite the jitter; make it swallow everything
                // so the next insertion clears it
                t.cc = Vec3::Zero();
                t.r2 = std::numeric_limits<double>::infinity();
            }
        }
        cells.push_back(t);
    };
    auto conflicts = [&](const BwCell& t, const Vec3& q) {
        if (!t.infinite) return (q - t.cc).squaredNorm() < t.r2;
        Vec3 f[3];
        int k = 0;
        for (int v : t.v)
            if (v != kInf) f[k++] = p[v];
        Vec3 nrm = (f[1] - f[0]).cross(f[2] - f[0]);
        double side_in = nrm.dot(interior - f[0]);
        double side_q = nrm.dot(q - f[0]);
        return side_in * side_q < 0;
    };

    add_cell(i0, i1, i2, i3);
    add_cell(i0, i1, i2, kInf);
    add_cell(i0, i1, i3, kInf);
    add_cell(i0, i2, i3, kInf);
    add_cell(i1, i2, i3, kInf);

    std::vector<int> bad;
    std::map<std::array<int, 3>, int> face_count;
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3) continue;
        bad.clear();
        for (int ti = 0; ti < int(cells.size()); ++ti)
            if (cells[ti].alive && conflicts(cells[ti], p[i])) bad.push_back(ti);
        check(!bad.empty(), "delaunay: insertion fell outside the complex");

        face_count.clear();
        for (int ti : bad) {
            const auto& v = cells[ti].v;
            const int f[4][3] = {{v[0], v[1], v[2]},
                                 {v[0], v[1], v[3]},
                                 {v[0], v[2], v[3]},
                                 {v[1], v[2], v[3]}};
            for (const auto& fc : f) {
                std::array<int, 3> key = {fc[0], fc[1], fc[2]};
                std::sort(key.begin(), key.end());
                face_count[key]++;
            }
            cells[ti].alive = false;
        }
        for (const auto& [key, cnt] : face_count)
            if (cnt == 1) add_cell(key[0], key[1], key[2], i);
    }

    std::vector<Tetra> out;
    for (const auto& t : cells) {
        if (!t.alive || t.infinite) continue;
        Tetra r;
        r.v = t.v;
        std::sort(r.v.begin(), r.v.end());
        r.center = t.cc;
        r.radius = std::sqrt(t.r2);
        out.push_back(r);
    }
    std::sort(out.begin(), out.end(),
              [](const Tetra& a, const Tetra& b) { return a.v < b.v; });
    return out;
}

std::vector<IndexTri> alpha_shape(const std::vector<Vec3>& pts, double alpha) {
    check(alpha > 0, "alpha_shape: alpha must be positive");
    std::vector<Tetra> tets = delaunay_tetrahedra(pts);

    struct FaceInfo {
        int kept = 0;                // incident tetrahedra with radius < alpha
        std::vector<int> opposite;   // fourth vertex of every incident tetra
    };
    std::map<std::array<int, 3>, FaceInfo> faces;
    for (const auto& t : tets) {
        bool kept = t.radius < alpha;
        const int f[4][4] = {{t.v[0], t.v[1], t.v[2], t.v[3]},
                             {t.v[0], t.v[1], t.v[3], t.v[2]},
                             {t.v[0], t.v[2], t.v[3], t.v[1]},
                             {t.v[1], t.v[2], t.v[3], t.v[0]}};
        for (const auto& fc : f) {
            std::array<int, 3> key = {fc[0], fc[1], fc[2]};
            auto& info = faces[key];
            if (kept) info.kept++;
            info.opposite.push_back(fc[3]);
        }
    }

    Vec3 centroid = Vec3::Zero();
    for (const auto& q : pts) centroid += q;
    centroid /= double(pts.size());

    std::vector<IndexTri> out;
    for (const auto& [key, info] : faces) {
        bool boundary = false;
        if (info.kept == 1) {
            boundary = true;
        } else if (info.kept == 0) {
            // Singular face: small enough on its own and Gabriel (its
            // smallest circumsphere is empty; for Delaunay faces it suffices
            // to test the opposite vertices of the incident tetrahedra).
            Vec3 o;
            double r2 = 0.0;
            if (face_circumcircle(pts[key[0]], pts[key[1]], pts[key[2]], o, r2) &&
                r2 < alpha * alpha) {
                boundary = true;
                for (int w : info.opposite)
                    if ((pts[w] - o).squaredNorm() < r2 * (1.0 - 1e-10))
                        boundary = false;
            }
        }
        if (!boundary) continue;
        IndexTri tri = key;
        Vec3 a = pts[tri[0]], b = pts[tri[1]], c = pts[tri[2]];
        Vec3 nrm = (b - a).cross(c - a);
        if (nrm.dot((a + b + c) / 3.0 - centroid) < 0) std::swap(tri[1], tri[2]);
        out.push_back(tri);
    }
    return out;
}

namespace {

struct HullFace {
    std::array<int, 3> v;
    Vec3 n;            // unit outward normal
    double off = 0.0;  // plane offset: n . x = off
    std::array<int, 3> nb{-1, -1, -1};  // neighbor across edge (v[i], v[i+1])
    std::vector<int> conflict;
    int far = -1;
    double far_d = 0.0;
    bool alive = true;
};

}  // namespace

std::vector<IndexTri> convex_hull(const std::vector<Vec3>& pts) {
    const int n = int(pts.size());
    check(n >= 4, "convex_hull: need at least 4 points, got " + std::to_string(n));
    double diag = bbox_diag(pts);
    check(diag > 0, "convex_hull: all points coincide");
    const double eps = 1e-9 * diag;

    // Initial simplex from axis extremes.
    int ext[6] = {0, 0, 0, 0, 0, 0};
    for (int i = 1; i < n; ++i)
        for (int a = 0; a < 3; ++a) {
            if (pts[i][a] < pts[ext[2 * a]][a]) ext[2 * a] = i;
            if (pts[i][a] > pts[ext[2 * a + 1]][a]) ext[2 * a + 1] = i;
        }
    int i0 = 0, i1 = 0;
    double best = -1.0;
    for (int a = 0; a < 6; ++a)
        for (int b = a + 1; b < 6; ++b) {
            double d = (pts[ext[a]] - pts[ext[b]]).squaredNorm();
            if (d > best) best = d, i0 = ext[a], i1 = ext[b];
        }
    check(best > eps * eps, "convex_hull: all points coincide");
    Vec3 dir = (pts[i1] - pts[i0]).normalized();
    int i2 = -1;
    best = eps;
    for (int i = 0; i < n; ++i) {
        Vec3 d = pts[i] - pts[i0];
        double dist = (d - d.dot(dir) * dir).norm();
        if (dist > best) best = dist, i2 = i;
    }
    check(i2 >= 0, "convex_hull: points are (almost) collinear");
    Vec3 pn = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
    int i3 = -1;
    best = eps;
    for (int i = 0; i < n; ++i) {
        double dist = std::abs(pn.dot(pts[i] - pts[i0]));
        if (dist > best) best = dist, i3 = i;
    }
    check(i3 >= 0, "convex_hull: points are (almost) coplanar");

    const Vec3 interior = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
    std::vector<HullFace> faces;
    auto make_face = [&](int a, int b, int c) {
        HullFace f;
        f.v = {a, b, c};
        Vec3 nrm = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
        if (nrm.dot(interior - pts[a]) > 0) {
            std::swap(f.v[1], f.v[2]);
            nrm = -nrm;
        }
        f.n = nrm.normalized();
        f.off = f.n.dot(pts[f.v[0]]);
        faces.push_back(f);
        return int(faces.size()) - 1;
    };
    auto face_dist = [&](const HullFace& f, int i) {
        return f.n.dot(pts[i]) - f.off;
    };
    // Neighbor linking across an undirected edge.
    auto link = [&](std::map<std::array<int, 2>, std::array<int, 2>>& edges,
                    int fi) {
        auto& f = faces[fi];
        for (int e = 0; e < 3; ++e) {
            std::array<int, 2> key = {f.v[e], f.v[(e + 1) % 3]};
            if (key[0] > key[1]) std::swap(key[0], key[1]);
            auto it = edges.find(key);
            if (it == edges.end()) {
                edges[key] = {fi, e};
            } else {
                auto [gi, ge] = it->second;
                faces[fi].nb[e] = gi;
                faces[gi].nb[ge] = fi;
            }
        }
    };

    {
        std::map<std::array<int, 2>, std::array<int, 2>> edges;
        link(edges, make_face(i0, i1, i2));
        link(edges, make_face(i0, i1, i3));
        link(edges, make_face(i0, i2, i3));
        link(edges, make_face(i1, i2, i3));
    }

    auto push_conflict = [&](int fi, int i) {
        double d = face_dist(faces[fi], i);
        if (d <= eps) return false;
        faces[fi].conflict.push_back(i);
        if (d > faces[fi].far_d) faces[fi].far_d = d, faces[fi].far = i;
        return true;
    };
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3) continue;
        for (int fi = 0; fi < 4 && !push_conflict(fi, i); ++fi) {
        }
    }

    std::deque<int> queue = {0, 1, 2, 3};
    std::vector<int> visible, orphan;
    while (!queue.empty()) {
        int fi = queue.front();
        queue.pop_front();
        if (!faces[fi].alive || faces[fi].far < 0) continue;
        const int p = faces[fi].far;

        // Visible region (connected) by flood fill over neighbors.
        visible.clear();
        visible.push_back(fi);
        faces[fi].alive = false;
        for (size_t qi = 0; qi < visible.size(); ++qi)
            for (int nb : faces[visible[qi]].nb)
                if (nb >= 0 && faces[nb].alive && face_dist(faces[nb], p) > eps) {
                    faces[nb].alive = false;
                    visible.push_back(nb);
                }

        orphan.clear();
        std::vector<std::array<int, 3>> horizon;  // edge a,b + hidden face
        for (int vi : visible) {
            for (int e = 0; e < 3; ++e) {
                int nb = faces[vi].nb[e];
                if (nb < 0 || !faces[nb].alive) continue;
                horizon.push_back({faces[vi].v[e], faces[vi].v[(e + 1) % 3], nb});
            }
            for (int q : faces[vi].conflict)
                if (q != p) orphan.push_back(q);
            faces[vi].conflict.clear();
        }

        std::map<std::array<int, 2>, std::array<int, 2>> edges;
        std::vector<int> fresh;
        for (const auto& [a, b, hidden] : horizon) {
            int nf = make_face(a, b, p);
            fresh.push_back(nf);
            // Re-point the surviving neighbor at the new face.
            for (int e = 0; e < 3; ++e) {
                int x = faces[hidden].v[e], y = faces[hidden].v[(e + 1) % 3];
                if ((x == a && y == b) || (x == b && y == a)) {
                    faces[hidden].nb[e] = nf;
                    int slot = -1;
                    for (int k = 0; k < 3; ++k) {
                        int fx = faces[nf].v[k], fy = faces[nf].v[(k + 1) % 3];
                        if ((fx == a && fy == b) || (fx == b && fy == a)) slot = k;
                    }
                    faces[nf].nb[slot] = hidden;
                }
            }
            link(edges, nf);
        }
        std::sort(orphan.begin(), orphan.end());
        orphan.erase(std::unique(orphan.begin(), orphan.end()), orphan.end());
        for (int q : orphan)
            for (int nf : fresh)
                if (push_conflict(nf, q)) break;
        for (int nf : fresh)
            if (faces[nf].far >= 0) queue.push_back(nf);
    }

    std::vector<IndexTri> out;
    for (const auto& f : faces)
        if (f.alive) out.push_back(f.v);
    std::sort(out.begin(), out.end(), [](IndexTri a, IndexTri b) {
        IndexTri sa = a, sb = b;
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        return sa != sb ? sa < sb : a < b;
    });
    return out;
}

AlphaConfig AlphaConfig::defaults() {
    AlphaConfig a;
    a.radius.fill(0.15);
    a.radius[int(Part::torso)] = 0.25;
    a.radius[int(Part::hand_l)] = 0.08;
    a.radius[int(Part::hand_r)] = 0.08;
    a.radius[int(Part::foot_l)] = 0.08;
    a.radius[int(Part::foot_r)] = 0.08;
    return a;
}

AlphaConfig AlphaConfig::from_config(const GeometryConfig& g) {
    AlphaConfig a = defaults();
    for (auto& r : a.radius) r *= g.alpha_scale;
    for (const auto& [name, r] : g.alpha_overrides)
        a.radius[int(part_from_name(name))] = r;
    return a;
}

int BodyTriangulation::triangle_count() const {
    int c = 0;
    for (const auto& t : tris) c += int(t.size());
    return c;
}

BodyTriangulation triangulate_frame(const BodyFrame& frame, const AlphaConfig& cfg) {
    BodyTriangulation topo;
    for (int pi = 0; pi < kNumParts; ++pi) {
        const auto& pts = frame.points[pi];
        if (frame.degenerate.count(pi) || pts.size() < 4 || nearly_flat(pts)) {
            topo.skipped.push_back(pi);
            continue;
        }
        topo.tris[pi] = alpha_shape(pts, cfg.radius[pi]);
        if (topo.tris[pi].empty()) topo.skipped.push_back(pi);
    }
    check(topo.triangle_count() > 0,
          "triangulate: no part produced a surface (empty body)");
    return topo;
}

TriangulatedBody surfaces_for(const BodyTriangulation& topo, const BodyFrame& frame) {
    TriangulatedBody body;
    body.timestamp = frame.timestamp;
    body.skipped = topo.skipped;
    for (int pi = 0; pi < kNumParts; ++pi) {
        if (topo.tris[pi].empty()) continue;
        const auto& pts = frame.points[pi];
        Vec3 pc = frame.part_centroid(Part(pi));
        for (int ti = 0; ti < int(topo.tris[pi].size()); ++ti) {
            const auto& tri = topo.tris[pi][ti];
            check(tri[0] < int(pts.size()) && tri[1] < int(pts.size()) &&
                      tri[2] < int(pts.size()),
                  "surfaces: triangulation does not match frame point counts");
            Vec3 a = pts[tri[0]], b = pts[tri[1]], c = pts[tri[2]];
            Vec3 raw = (b - a).cross(c - a);
            double area = raw.norm() / 2.0;
            if (area < 1e-18) continue;
            SubSurface s;
            s.center = (a + b + c) / 3.0;
            s.normal = raw / (2.0 * area);
            if (s.normal.dot(s.center - pc) < 0) s.normal = -s.normal;
            s.area = area;
            s.part = pi;
            s.tri = ti;
            body.surfaces.push_back(s);
        }
    }
    return body;
}

TriangulatedBody triangulate_body(const BodyFrame& frame, const AlphaConfig& cfg) {
    return surfaces_for(triangulate_frame(frame, cfg), frame);
}

double total_area(const TriangulatedBody& body) {
    double a = 0.0;
    for (const auto& s : body.surfaces) a += s.area;
    return a;
}

void write_off(const std::string& path, const std::vector<Vec3>& pts,
               const std::vector<IndexTri>& tris) {
    std::ofstream f(path);
    check(f.good(), "cannot open " + path + " for writing");
    f << "OFF\n" << pts.size() << " " << tris.size() << " 0\n";
    f.precision(9);
    for (const auto& p : pts) f << p.x() << " " << p.y() << " " << p.z() << "\n";
    for (const auto& t : tris) f << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    check(f.good(), "write failed for " + path);
}

}  // namespace wigait
