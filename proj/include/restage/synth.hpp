#pragma once

#include <string>
#include <vector>

#include "restage/bundle.hpp"
#include "restage/scene.hpp"

namespace restage {

enum class SceneKind { RigidBox, TwoLinkArm, ClusterSwarm };
enum class ArtifactKind { None, AttachBackground, SwapClusters, OffsetLimb };

SceneKind scene_kind_from_string(const std::string& s);
std::string to_string(SceneKind k);
ArtifactKind artifact_from_string(const std::string& s);
std::string to_string(ArtifactKind k);

struct OccluderSpec {
    bool enabled = false;
    Vec3 center{0.0, 0.0, 2.5};
    Vec3 half_extents{0.45, 0.6, 0.02};
    double sweep_amplitude = 0.0;  // sinusoidal x sweep, zero displacement at t=0
    int num_points = 60;
};

struct SceneSpec {
    SceneKind kind = SceneKind::TwoLinkArm;
    int num_points = 240;  // foreground surface samples
    int frames = 30;
    OccluderSpec occluder;
    double noise_sigma = 0.0;
    // Per-frame correlated scale wobble about the scene center, the desk
    // analogue of monocular depth jitter; 0 disables it.
    double scale_jitter = 0.0;
    // Fraction of tracks the tracker loses on generated (driving) footage:
    // in bundles with motion_variant > 0, affected tracks keep only
    // scattered observations after the shared first frame. Base bundles
    // (variant 0) are unaffected.
    double track_dropout = 0.0;
    uint64_t seed = 0;
    int background_points = 80;
    int camera_width = 96, camera_height = 96;
    double camera_fx = 110.0;
    double camera_distance = 4.0;
    double motion_amplitude = 1.0;
    int motion_variant = 0;  // 0 = base script, 1+ = alternative driving scripts

    void validate() const;
};

// Oriented box occupying space at one frame.
struct Obb {
    Pose pose;
    Vec3 half = Vec3::Zero();
};

struct ArtifactRecord {
    ArtifactKind kind = ArtifactKind::None;
    std::vector<int> tracks;
};

struct GroundTruth {
    int num_tracks = 0;
    int frames = 0;
    std::vector<Vec3> true_positions;     // t-major, noise-free
    std::vector<uint8_t> true_visibility; // t-major
    std::vector<int> cluster_labels;      // per track, -1 = background
    std::vector<Vec3> canonical;          // rest-pose positions (frame 0)
    std::vector<std::vector<Obb>> solids; // per frame, occlusion geometry
    std::vector<std::vector<Pose>> cluster_poses;  // per fg cluster, per frame
    std::vector<ArtifactRecord> artifacts;

    std::size_t at(int t, int i) const {
        return static_cast<std::size_t>(t) * num_tracks + i;
    }
};

struct ScenePair {
    SequenceBundle base, driving;
    GroundTruth gt_base, gt_driving;
};

// Deterministic scene generation: same spec and seed give bit-identical
// output.
std::pair<SequenceBundle, GroundTruth> gen_scene(const SceneSpec& spec);

// Base/driving pair sharing frame 0 bit-exactly; optional artifact
// corruption of the driving observations (ground truth stays clean).
ScenePair gen_pair(const SceneSpec& spec, int driving_variant, int driving_frames,
                   ArtifactKind artifact = ArtifactKind::None);

// Exact witness model assembled from the generator's own motion scripts:
// one basis per cluster, saturated one-hot coefficients.
SceneModel ground_truth_model(const SequenceBundle& bundle, const GroundTruth& gt,
                              int t_cano = -1);

// Mirrors the rewind-and-concatenate layout on ground-truth arrays.
GroundTruth combine_ground_truth(const GroundTruth& base, const GroundTruth& driving);

}  // namespace restage
