#pragma once

#include "wigait/common.hpp"
#include "wigait/config.hpp"

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace wigait {

// The 14 canonical body parts. Order is fixed and used everywhere parts are
// iterated, so results do not depend on map ordering.
enum class Part : int {
    head = 0,
    torso,
    shoulder_l,
    shoulder_r,
    upper_arm_l,
    upper_arm_r,
    hand_l,
    hand_r,
    thigh_l,
    thigh_r,
    leg_l,
    leg_r,
    foot_l,
    foot_r,
};
inline constexpr int kNumParts = 14;

const std::array<std::string, kNumParts>& part_names();
Part part_from_name(const std::string& name);
const std::string& part_name(Part p);

struct BodyFrame {
    double timestamp = 0.0;
    // points[part][i] = 3D point; every part present (possibly empty when the
    // source was degenerate there)
    std::array<std::vector<Vec3>, kNumParts> points;
    // parts with < 4 points or an (almost) coplanar point set; downstream
    // triangulation skips these instead of failing the walk
    std::set<int> degenerate;

    Vec3 centroid() const;
    Vec3 part_centroid(Part p) const;
    void refresh_degenerate_flags();
};

enum class Label { healthy, unhealthy, unknown };
std::string label_name(Label l);
Label label_from_name(const std::string& name);

struct MeshSequence {
    std::vector<BodyFrame> frames;
    double fps = 30.0;
    std::string subject_id;
    Label label = Label::unknown;
    std::string units = "meter";  // pixel | meter
    Vec3 walk_direction{0.0, 1.0, 0.0};

    double duration() const;
    // Throws with a frame index on invariant violations.
    void validate() const;
};

// Structured-text (JSON) mesh container IO. write/ingest round-trip is
// bit-exact for all valid sequences.
void write_mesh_sequence(const MeshSequence& seq, const std::string& path);
MeshSequence ingest_mesh_sequence(const std::string& path);

// Pixel-unit sequence -> meters. Scale from total centroid displacement vs
// walk_distance; per-frame yaw rotation about the vertical axis through the
// centroid compensates the camera-to-centroid bearing (camera at the origin
// looking along +y, vertical +z, at camera_distance from the walk line).
MeshSequence align_to_world(const MeshSequence& seq, double camera_distance,
                            double walk_distance);

// Per-point linear interpolation onto an even grid over [t0, t_last];
// first/last frames preserved. target_fps must be >= the source fps.
MeshSequence resample(const MeshSequence& seq, double target_fps);

struct SyntheticGaitParams {
    double mean_speed = 1.0;        // m/s
    double gait_cycle = 1.2;        // s (two steps)
    double step_length = 0.0;       // m; 0 = natural (mean_speed*gait_cycle/2)
    double modulation_depth = 0.08; // relative speed modulation per step
    double arm_swing = 0.25;        // rad
    double asymmetry = 0.0;         // [0,1]
    double stature = 1.7;           // m
    double step_height = 0.06;      // m
    int points_per_part = 30;
    double jitter_mm = 2.0;

    static SyntheticGaitParams from_config(const WalkerConfig& w);
};

// Deterministic parametric walker walking along +y from y=0. Left/right part
// pairs share mirrored surface samples, so at asymmetry 0 the two sides are
// exact time-shifted mirror images.
MeshSequence synthesize_walker(const SyntheticGaitParams& params, double duration,
                               double fps, std::uint64_t seed);

}  // namespace wigait
