#pragma once

#include <vector>

#include "restage/bundle.hpp"
#include "restage/scene.hpp"

namespace restage {

// Composited depth per pixel; pixels with accumulated alpha below the
// cutoff hold +infinity.
struct DepthBuffer {
    int width = 0, height = 0;
    std::vector<double> depth;  // row-major
    std::vector<double> alpha;  // accumulated opacity
    int skipped_behind_camera = 0;

    double& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
    double depth_at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    double alpha_at(int x, int y) const { return alpha[static_cast<std::size_t>(y) * width + x]; }
};

// One invisibility score per foreground splat (indexed by coeff_row).
struct InvisibilityScores {
    std::vector<double> zeta;
};

// Track indices newly visible per driving-segment frame.
struct DisocclusionSet {
    int t1 = 0;
    std::vector<std::vector<int>> per_frame;  // indexed by frame, empty before t1

    bool empty() const {
        for (const auto& f : per_frame)
            if (!f.empty()) return false;
        return true;
    }
};

inline constexpr double kDepthSentinel = std::numeric_limits<double>::infinity();
inline constexpr double kAlphaCutoff = 1e-3;
inline constexpr double kNearPlane = 1e-4;

// Splats drawn as screen-space disks with uniform opacity, composited
// front to back (depth ties broken by splat index).
DepthBuffer render_depth(const SceneModel& model, const Camera& camera, int t);

// Smoothstep of the depth excess of each foreground splat over the
// rendered buffer at its projected pixel.
InvisibilityScores invisibility(const SceneModel& model, const Camera& camera, int t,
                                double tau0, double tau1);
// Same, reusing an already rendered buffer for the frame.
InvisibilityScores invisibility_from_buffer(const SceneModel& model, const Camera& camera,
                                            int t, const DepthBuffer& buffer, double tau0,
                                            double tau1);

// Tracks visible at a driving frame but not at the canonical frame.
DisocclusionSet detect_disocclusion(const SequenceBundle& bundle, int t_cano);

}  // namespace restage
