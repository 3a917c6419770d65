#pragma once

#include <cstdint>
#include <vector>

#include "restage/geom.hpp"

namespace restage {

// Pinhole camera; pose maps world to camera coordinates, +z in front.
struct Camera {
    double fx = 100.0, fy = 100.0;
    double cx = 0.0, cy = 0.0;
    Pose pose;
    int width = 0, height = 0;

    Vec3 to_camera(const Vec3& p_world) const { return apply(pose, p_world); }
};

// Per-frame cameras plus N x T point tracks with visibility and labels.
// Arrays are t-major: index(t, i) = t * num_tracks + i.
// Frames [0, t1) are a rewound base segment, [t1, T) the driving segment;
// t1 = 0 means a single-segment bundle (everything counts as driving).
struct SequenceBundle {
    int num_tracks = 0;
    int num_frames = 0;
    int t1 = 0;
    std::vector<Vec3> positions;       // t-major, N*T
    std::vector<uint8_t> visibility;   // t-major, N*T, 0/1
    std::vector<uint8_t> labels;       // per track, 1 = foreground
    std::vector<Vec3> colors;          // per track, empty or N
    std::vector<Camera> cameras;       // per frame

    std::size_t at(int t, int i) const {
        return static_cast<std::size_t>(t) * num_tracks + i;
    }
    const Vec3& position(int t, int i) const { return positions[at(t, i)]; }
    bool visible(int t, int i) const { return visibility[at(t, i)] != 0; }
    bool is_foreground(int i) const { return labels[i] != 0; }
    int driving_frames() const { return num_frames - t1; }

    void validate() const;
};

enum class FrameOrigin : uint8_t { RewoundBase = 0, Driving = 1 };

// A rewound base segment concatenated with a driving segment.
struct CombinedBundle {
    SequenceBundle seq;
    std::vector<FrameOrigin> provenance;  // per frame

    int t1() const { return seq.t1; }
};

}  // namespace restage
