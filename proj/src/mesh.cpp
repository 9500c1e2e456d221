#include "wigait/mesh.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace wigait {

const std::array<std::string, kNumParts>& part_names() {
    static const std::array<std::string, kNumParts> names{
        "head",       "torso",       "shoulder_l", "shoulder_r", "upper_arm_l",
        "upper_arm_r", "hand_l",     "hand_r",     "thigh_l",    "thigh_r",
        "leg_l",      "leg_r",       "foot_l",     "foot_r"};
    return names;
}

Part part_from_name(const std::string& name) {
    const auto& names = part_names();
    for (int i = 0; i < kNumParts; ++i)
        if (names[i] == name) return Part(i);
    throw error("unknown body part: " + name);
}

const std::string& part_name(Part p) { return part_names()[int(p)]; }

Vec3 BodyFrame::centroid() const {
    Vec3 sum = Vec3::Zero();
    std::size_t n = 0;
    for (const auto& pts : points) {
        for (const auto& p : pts) sum += p;
        n += pts.size();
    }
    check(n > 0, "centroid of an empty frame");
    return sum / double(n);
}

Vec3 BodyFrame::part_centroid(Part p) const {
    const auto& pts = points[int(p)];
    check(!pts.empty(), "centroid of empty part " + part_name(p));
    Vec3 sum = Vec3::Zero();
    for (const auto& q : pts) sum += q;
    return sum / double(pts.size());
}

void BodyFrame::refresh_degenerate_flags() {
    degenerate.clear();
    for (int i = 0; i < kNumParts; ++i) {
        const auto& pts = points[i];
        if (pts.size() < 4) {
            degenerate.insert(i);
            continue;
        }
        Vec3 c = Vec3::Zero();
        for (const auto& p : pts) c += p;
        c /= double(pts.size());
        Eigen::MatrixXd M(pts.size(), 3);
        for (std::size_t r = 0; r < pts.size(); ++r) M.row(r) = (pts[r] - c).transpose();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
        const auto& s = svd.singularValues();
        // coplanar when the extent along the thinnest axis is negligible
        if (s(2) < 1e-9 * std::max(s(0), 1e-300)) degenerate.insert(i);
    }
}

std::string label_name(Label l) {
    switch (l) {
        case Label::healthy: return "healthy";
        case Label::unhealthy: return "unhealthy";
        default: return "unknown";
    }
}

Label label_from_name(const std::string& name) {
    if (name == "healthy") return Label::healthy;
    if (name == "unhealthy") return Label::unhealthy;
    if (name == "unknown") return Label::unknown;
    throw error("unknown label: " + name);
}

double MeshSequence::duration() const {
    if (frames.size() < 2) return 0.0;
    return frames.back().timestamp - frames.front().timestamp;
}

void MeshSequence::validate() const {
    check(fps > 0, "mesh sequence: fps must be positive");
    check(!frames.empty(), "mesh sequence: no frames");
    double dt = 1.0 / fps;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i > 0) {
            double spacing = frames[i].timestamp - frames[i - 1].timestamp;
            check(spacing > 0, "mesh sequence: non-increasing timestamp at frame " +
                                   std::to_string(i));
            check(std::abs(spacing - dt) <= 0.01 * dt,
                  "mesh sequence: frame spacing off by more than 1% at frame " +
                      std::to_string(i));
        }
        for (int p = 0; p < kNumParts; ++p) {
            bool flagged = frames[i].degenerate.count(p) != 0;
            if (frames[i].points[p].size() < 4 && !flagged)
                throw error("mesh sequence: part " + part_names()[p] + " in frame " +
                            std::to_string(i) +
                            " has fewer than 4 points and is not flagged degenerate");
        }
    }
    // net forward motion: centroid displacement monotone (non-strict) along
    // the walk direction
    double prev = -1e300;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        double along = frames[i].centroid().dot(walk_direction);
        check(along >= prev - 1e-9,
              "mesh sequence: centroid moves backwards at frame " + std::to_string(i));
        prev = along;
    }
}

void write_mesh_sequence(const MeshSequence& seq, const std::string& path) {
    nlohmann::json j;
    j["fps"] = seq.fps;
    j["subject_id"] = seq.subject_id;
    j["label"] = label_name(seq.label);
    j["units"] = seq.units;
    j["walk_direction"] = {seq.walk_direction.x(), seq.walk_direction.y(),
                           seq.walk_direction.z()};
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : seq.frames) {
        nlohmann::json jf;
        jf["timestamp"] = f.timestamp;
        nlohmann::json parts;
        for (int p = 0; p < kNumParts; ++p) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& q : f.points[p]) arr.push_back({q.x(), q.y(), q.z()});
            parts[part_names()[p]] = std::move(arr);
        }
        jf["parts"] = std::move(parts);
        frames.push_back(std::move(jf));
    }
    j["frames"] = std::move(frames);
    std::ofstream out(path, std::ios::trunc);
    check(out.good(), "cannot write " + path);
    out << j.dump(1) << "\n";
    check(out.good(), "write failed for " + path);
}

MeshSequence ingest_mesh_sequence(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw error("malformed mesh container " + path + ": " + e.what());
    }
    MeshSequence seq;
    try {
        seq.fps = j.at("fps").get<double>();
        seq.subject_id = j.at("subject_id").get<std::string>();
        seq.label = label_from_name(j.at("label").get<std::string>());
        seq.units = j.at("units").get<std::string>();
        check(seq.units == "pixel" || seq.units == "meter",
              "units must be pixel or meter");
        auto wd = j.at("walk_direction");
        seq.walk_direction = Vec3(wd.at(0), wd.at(1), wd.at(2));
        std::size_t idx = 0;
        for (const auto& jf : j.at("frames")) {
            BodyFrame f;
            f.timestamp = jf.at("timestamp").get<double>();
            const auto& parts = jf.at("parts");
            for (int p = 0; p < kNumParts; ++p) {
                const std::string& name = part_names()[p];
                if (!parts.contains(name))
                    throw error("frame " + std::to_string(idx) + " missing part " +
                                name);
                for (const auto& q : parts.at(name))
                    f.points[p].emplace_back(q.at(0), q.at(1), q.at(2));
            }
            f.refresh_degenerate_flags();
            seq.frames.push_back(std::move(f));
            ++idx;
        }
    } catch (const nlohmann::json::exception& e) {
        throw error("malformed mesh container " + path + ": " + e.what());
    }
    seq.validate();
    return seq;
}

MeshSequence align_to_world(const MeshSequence& seq, double camera_distance,
                            double walk_distance) {
    check(seq.units == "pixel", "align_to_world: input must be in pixel units");
    check(camera_distance > 0 && walk_distance > 0,
          "align_to_world: distances must be positive");
    check(seq.frames.size() >= 2, "align_to_world: need at least 2 frames");

    Vec3 first = seq.frames.front().centroid();
    Vec3 last = seq.frames.back().centroid();
    double span_px = (last - first).norm();
    check(span_px > 0, "align_to_world: zero centroid displacement");
    double scale = walk_distance / span_px;

    MeshSequence out = seq;
    out.units = "meter";
    for (auto& f : out.frames) {
        // scale to meters first so the bearing is computed in one unit system
        for (auto& pts : f.points)
            for (auto& p : pts) p *= scale;
        Vec3 c = f.centroid();
        // bearing between the camera axis (+y) and the centroid as seen from
        // the camera at the origin; rotate about the vertical axis through the
        // centroid to undo the oblique view
        double bearing = std::atan2(c.x(), camera_distance);
        double cb = std::cos(-bearing), sb = std::sin(-bearing);
        for (auto& pts : f.points) {
            for (auto& p : pts) {
                Vec3 d = p - c;
                p = c + Vec3(cb * d.x() - sb * d.y(), sb * d.x() + cb * d.y(), d.z());
            }
        }
    }
    return out;
}

MeshSequence resample(const MeshSequence& seq, double target_fps) {
    check(target_fps >= seq.fps, "resample: target fps below source fps");
    check(!seq.frames.empty(), "resample: empty sequence");
    if (seq.frames.size() == 1 || target_fps == seq.fps) {
        MeshSequence out = seq;
        out.fps = target_fps;
        return out;
    }
    for (std::size_t i = 1; i < seq.frames.size(); ++i)
        for (int p = 0; p < kNumParts; ++p)
            check(seq.frames[i].points[p].size() == seq.frames[0].points[p].size(),
                  "resample: point count changes across frames for part " +
                      part_names()[p] + " (frame " + std::to_string(i) + ")");

    double t0 = seq.frames.front().timestamp;
    double t1 = seq.frames.back().timestamp;
    std::size_t n_out = std::size_t(std::lround((t1 - t0) * target_fps)) + 1;

    MeshSequence out;
    out.fps = target_fps;
    out.subject_id = seq.subject_id;
    out.label = seq.label;
    out.units = seq.units;
    out.walk_direction = seq.walk_direction;
    out.frames.reserve(n_out);

    std::size_t seg = 0;
    for (std::size_t i = 0; i < n_out; ++i) {
        // exact endpoints; interior points on an even grid
        double t = (i + 1 == n_out) ? t1 : t0 + double(i) * (t1 - t0) / double(n_out - 1);
        while (seg + 2 < seq.frames.size() && seq.frames[seg + 1].timestamp < t) ++seg;
        const BodyFrame& a = seq.frames[seg];
        const BodyFrame& b = seq.frames[seg + 1];
        double u = (t - a.timestamp) / (b.timestamp - a.timestamp);
        u = std::clamp(u, 0.0, 1.0);
        BodyFrame f;
        f.timestamp = t;
        for (int p = 0; p < kNumParts; ++p) {
            f.points[p].resize(a.points[p].size());
            for (std::size_t k = 0; k < a.points[p].size(); ++k)
                f.points[p][k] = (1.0 - u) * a.points[p][k] + u * b.points[p][k];
        }
        f.degenerate = a.degenerate;
        out.frames.push_back(std::move(f));
    }
    // preserve endpoint frames exactly
    out.frames.front() = seq.frames.front();
    out.frames.back() = seq.frames.back();
    return out;
}

SyntheticGaitParams SyntheticGaitParams::from_config(const WalkerConfig& w) {
    SyntheticGaitParams p;
    p.mean_speed = w.speed;
    p.gait_cycle = w.gait_cycle;
    p.step_length = w.step_length;
    p.modulation_depth = w.modulation_depth;
    p.arm_swing = w.arm_swing;
    p.asymmetry = w.asymmetry;
    p.stature = w.height;
    p.step_height = w.step_height;
    p.points_per_part = w.points_per_part;
    p.jitter_mm = w.jitter_mm;
    return p;
}

namespace {

// Deterministic, evenly spread unit-sphere samples.
std::vector<Vec3> fibonacci_sphere(int n) {
    std::vector<Vec3> out;
    out.reserve(n);
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / double(n);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = ga * double(i);
        out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
    return out;
}

// Rotation taking +z to the (normalized) direction d.
Eigen::Matrix3d rot_z_to(const Vec3& d) {
    Vec3 z(0, 0, 1);
    Vec3 u = d.normalized();
    double c = z.dot(u);
    if (c > 1.0 - 1e-12) return Eigen::Matrix3d::Identity();
    if (c < -1.0 + 1e-12) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
        m(0, 0) = 1;
        m(1, 1) = -1;
        m(2, 2) = -1;
        return m;
    }
    Vec3 axis = z.cross(u).normalized();
    return Eigen::AngleAxisd(std::acos(std::clamp(c, -1.0, 1.0)), axis)
        .toRotationMatrix();
}

struct BodyDims {
    double hip_z, shoulder_z, head_z, torso_z;
    double l_thigh, l_leg, ankle_z, l_uarm, l_farm;
    double hip_off, sh_off;
    Vec3 torso_semi, head_semi, sh_semi, foot_semi;
    double uarm_rad, farm_rad, thigh_rad, leg_rad;

    explicit BodyDims(double h) {
        hip_z = 0.530 * h;
        shoulder_z = 0.818 * h;
        head_z = 0.936 * h;
        torso_z = (hip_z + shoulder_z) / 2.0;
        l_thigh = 0.245 * h;
        l_leg = 0.235 * h;
        ankle_z = hip_z - l_thigh - l_leg;
        l_uarm = 0.172 * h;
        l_farm = 0.205 * h;
        hip_off = 0.056 * h;
        sh_off = 0.112 * h;
        torso_semi = Vec3(0.095 * h, 0.059 * h, (shoulder_z - hip_z) / 2.0);
        head_semi = Vec3(0.053 * h, 0.059 * h, 0.065 * h);
        sh_semi = Vec3(0.035 * h, 0.035 * h, 0.029 * h);
        foot_semi = Vec3(0.029 * h, 0.071 * h, 0.021 * h);
        uarm_rad = 0.0265 * h;
        farm_rad = 0.0235 * h;
        thigh_rad = 0.041 * h;
        leg_rad = 0.032 * h;
    }
};

struct PartPlacement {
    Vec3 center;
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    Vec3 semi;
};

// Left-side leg chain in body coordinates (y relative to the body origin).
// Right-side parts are built by mirroring x of the finished placements.
void leg_chain(const BodyDims& d, double phase, double step_len, double step_h,
               double sway_x, PartPlacement& thigh, PartPlacement& leg,
               PartPlacement& foot) {
    Vec3 hip(d.hip_off + 0.5 * sway_x, 0.0, d.hip_z);
    double y_ankle = 0.5 * step_len * std::cos(phase);
    double lift = std::max(0.0, std::sin(phase));
    Vec3 ankle(d.hip_off, y_ankle, d.ankle_z + step_h * lift * lift);
    Vec3 seg = ankle - hip;
    thigh.center = hip + 0.25 * seg;
    thigh.rot = rot_z_to(-seg);
    thigh.semi = Vec3(d.thigh_rad, d.thigh_rad, 0.27 * seg.norm());
    leg.center = hip + 0.75 * seg;
    leg.rot = thigh.rot;
    leg.semi = Vec3(d.leg_rad, d.leg_rad, 0.27 * seg.norm());
    foot.center = ankle + Vec3(0.0, 0.02, -0.015);
    foot.rot = Eigen::Matrix3d::Identity();
    foot.semi = d.foot_semi;
}

void arm_chain(const BodyDims& d, double phase, double swing, double sway_x,
               double bob, PartPlacement& sh, PartPlacement& uarm,
               PartPlacement& farm) {
    Vec3 base(d.sh_off + sway_x, 0.0, d.shoulder_z + bob);
    sh.center = base;
    sh.rot = Eigen::Matrix3d::Identity();
    sh.semi = d.sh_semi;
    double a = swing * std::sin(phase);
    Vec3 dir1(0.0, std::sin(a), -std::cos(a));
    Vec3 elbow = base + d.l_uarm * dir1;
    uarm.center = base + 0.5 * d.l_uarm * dir1;
    uarm.rot = rot_z_to(-dir1);
    uarm.semi = Vec3(d.uarm_rad, d.uarm_rad, 0.55 * d.l_uarm);
    double a2 = a + 0.35;
    Vec3 dir2(0.0, std::sin(a2), -std::cos(a2));
    farm.center = elbow + 0.5 * d.l_farm * dir2;
    farm.rot = rot_z_to(-dir2);
    farm.semi = Vec3(d.farm_rad, d.farm_rad, 0.55 * d.l_farm);
}

// Build the placement's surface points; for right-side parts the finished
// left-geometry points are mirrored in x, which keeps left/right exact mirror
// images sample-by-sample.
std::vector<Vec3> make_points(const PartPlacement& pl, const std::vector<Vec3>& sphere,
                              const std::vector<Vec3>& jitter, bool mirror_x) {
    std::vector<Vec3> out;
    out.reserve(sphere.size());
    for (std::size_t i = 0; i < sphere.size(); ++i) {
        Vec3 p = pl.center + pl.rot * (pl.semi.asDiagonal() * sphere[i]) + jitter[i];
        if (mirror_x) p.x() = -p.x();
        out.push_back(p);
    }
    return out;
}

}  // namespace

MeshSequence synthesize_walker(const SyntheticGaitParams& params, double duration,
                               double fps, std::uint64_t seed) {
    check(params.mean_speed > 0 && params.gait_cycle > 0 && params.stature > 0,
          "walker: speeds and sizes must be positive");
    check(params.asymmetry >= 0.0 && params.asymmetry <= 1.0,
          "walker: asymmetry must be in [0,1]");
    check(duration >= 2.0 * params.gait_cycle,
          "walker: duration must cover at least 2 gait cycles");
    double step_len = params.step_length > 0
                          ? params.step_length
                          : params.mean_speed * params.gait_cycle / 2.0;
    check(step_len <= params.mean_speed * params.gait_cycle + 1e-12,
          "walker: step length exceeds mean-speed * gait-cycle");

    const BodyDims dims(params.stature);
    const double T = params.gait_cycle;
    const double v = params.mean_speed;
    const double depth = params.modulation_depth;
    const double h_bob = 0.012 * params.stature;
    const double h_sway = 0.009 * params.stature;

    // surface samples and per-point jitter are drawn once per part pair so
    // that left/right mirror exactly; right-side parts reuse the left stream
    const auto sphere = fibonacci_sphere(params.points_per_part);
    std::array<std::vector<Vec3>, kNumParts> jitter;
    double jit = params.jitter_mm / 1000.0;
    for (int p = 0; p < kNumParts; ++p) {
        const std::string& name = part_names()[p];
        std::string base = name;
        if (base.size() > 2 && base.substr(base.size() - 2) == "_r")
            base = base.substr(0, base.size() - 2) + "_l";
        Rng rng(derive_seed(seed, "jitter-" + base));
        auto& v_j = jitter[p];
        v_j.resize(sphere.size());
        for (auto& q : v_j)
            q = Vec3(rng.uniform(-jit, jit), rng.uniform(-jit, jit),
                     rng.uniform(-jit, jit));
    }

    std::size_t n_frames = std::size_t(std::lround(duration * fps)) + 1;
    MeshSequence seq;
    seq.fps = fps;
    seq.subject_id = "walker";
    seq.label = Label::unknown;
    seq.units = "meter";
    seq.walk_direction = Vec3(0, 1, 0);
    seq.frames.reserve(n_frames);

    const double asym = params.asymmetry;
    for (std::size_t i = 0; i < n_frames; ++i) {
        double t = double(i) / fps;
        // forward position: integral of v*(1 + depth*sin(4*pi*t/T))
        double w = 4.0 * M_PI / T;
        double Y = v * (t + depth / w * (1.0 - std::cos(w * t)));
        double theta = 2.0 * M_PI * t / T;
        double theta_r = theta + M_PI * (1.0 - 0.5 * asym);
        double sway = h_sway * std::sin(theta);
        double bob = h_bob * std::cos(2.0 * theta);

        BodyFrame f;
        f.timestamp = t;
        auto put = [&](Part p, const PartPlacement& pl, bool mirror) {
            auto pts = make_points(pl, sphere, jitter[int(p)], mirror);
            for (auto& q : pts) q.y() += Y;
            f.points[int(p)] = std::move(pts);
        };

        PartPlacement torso{Vec3(sway, 0.0, dims.torso_z + bob),
                            Eigen::Matrix3d::Identity(), dims.torso_semi};
        put(Part::torso, torso, false);
        PartPlacement head{Vec3(0.7 * sway, 0.0, dims.head_z + bob),
                           Eigen::Matrix3d::Identity(), dims.head_semi};
        put(Part::head, head, false);

        PartPlacement th, lg, ft;
        leg_chain(dims, theta, step_len, params.step_height, sway, th, lg, ft);
        put(Part::thigh_l, th, false);
        put(Part::leg_l, lg, false);
        put(Part::foot_l, ft, false);
        leg_chain(dims, theta_r, step_len * (1.0 - 0.5 * asym), params.step_height,
                  -sway, th, lg, ft);
        put(Part::thigh_r, th, true);
        put(Part::leg_r, lg, true);
        put(Part::foot_r, ft, true);

        PartPlacement sh, ua, fa;
        arm_chain(dims, theta + M_PI, params.arm_swing, sway, bob, sh, ua, fa);
        put(Part::shoulder_l, sh, false);
        put(Part::upper_arm_l, ua, false);
        put(Part::hand_l, fa, false);
        arm_chain(dims, theta_r + M_PI, params.arm_swing, -sway, bob, sh, ua, fa);
        put(Part::shoulder_r, sh, true);
        put(Part::upper_arm_r, ua, true);
        put(Part::hand_r, fa, true);

        seq.frames.push_back(std::move(f));
    }
    return seq;
}

}  // namespace wigait
