#include "restage/visibility.hpp"

#include <algorithm>
#include <cmath>

namespace restage {

namespace {

struct Projected {
    int splat = 0;
    double z = 0.0;
    double u = 0.0, v = 0.0;
    double radius = 0.0;
    double alpha = 0.0;
};

Projected project_splat(const SceneModel& model, const Camera& cam, int i, int t) {
    Projected p;
    p.splat = i;
    Vec3 pc = cam.to_camera(deform(model, i, t));
    p.z = pc.z();
    if (p.z <= kNearPlane) return p;
    p.u = cam.fx * pc.x() / pc.z() + cam.cx;
    p.v = cam.fy * pc.y() / pc.z() + cam.cy;
    double mean_scale = model.splats[i].scale.mean();
    p.radius = std::clamp(mean_scale * cam.fx / pc.z(), 0.5, 32.0);
    p.alpha = model.splats[i].opacity;
    return p;
}

}  // namespace

DepthBuffer render_depth(const SceneModel& model, const Camera& camera, int t) {
    if (camera.width < 1 || camera.height < 1 || camera.fx <= 0 || camera.fy <= 0)
        throw std::invalid_argument("render_depth: invalid camera");
    DepthBuffer buf;
    buf.width = camera.width;
    buf.height = camera.height;
    const std::size_t n_px = static_cast<std::size_t>(camera.width) * camera.height;
    buf.depth.assign(n_px, 0.0);
    buf.alpha.assign(n_px, 0.0);
    std::vector<double> transmittance(n_px, 1.0);

    std::vector<Projected> splats;
    splats.reserve(model.splats.size());
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i) {
        Projected p = project_splat(model, camera, i, t);
        if (p.z <= kNearPlane) {
            ++buf.skipped_behind_camera;
            continue;
        }
        if (p.alpha <= 0.0) continue;
        splats.push_back(p);
    }
    std::sort(splats.begin(), splats.end(), [](const Projected& a, const Projected& b) {
        if (a.z != b.z) return a.z < b.z;
        return a.splat < b.splat;
    });

    for (const Projected& p : splats) {
        int x0 = std::max(0, static_cast<int>(std::floor(p.u - p.radius + 0.5)));
        int x1 = std::min(camera.width - 1, static_cast<int>(std::floor(p.u + p.radius + 0.5)));
        int y0 = std::max(0, static_cast<int>(std::floor(p.v - p.radius + 0.5)));
        int y1 = std::min(camera.height - 1, static_cast<int>(std::floor(p.v + p.radius + 0.5)));
        const double r2 = p.radius * p.radius;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double dx = x - p.u, dy = y - p.v;
                if (dx * dx + dy * dy > r2) continue;
                std::size_t idx = static_cast<std::size_t>(y) * camera.width + x;
                double tr = transmittance[idx];
                if (tr <= 1e-6) continue;
                buf.depth[idx] += p.z * p.alpha * tr;
                transmittance[idx] = tr * (1.0 - p.alpha);
            }
        }
    }
    for (std::size_t i = 0; i < n_px; ++i) {
        buf.alpha[i] = 1.0 - transmittance[i];
        if (buf.alpha[i] < kAlphaCutoff) buf.depth[i] = kDepthSentinel;
    }
    return buf;
}

InvisibilityScores invisibility_from_buffer(const SceneModel& model, const Camera& camera,
                                            int t, const DepthBuffer& buffer, double tau0,
                                            double tau1) {
    if (!(tau0 < tau1)) throw std::invalid_argument("invisibility: tau0 must be < tau1");
    InvisibilityScores scores;
    scores.zeta.assign(model.foreground_count(), 0.0);
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i) {
        const Splat& s = model.splats[i];
        if (!s.is_foreground) continue;
        Vec3 pc = camera.to_camera(deform(model, i, t));
        if (pc.z() <= kNearPlane) continue;
        int px = static_cast<int>(std::floor(camera.fx * pc.x() / pc.z() + camera.cx + 0.5));
        int py = static_cast<int>(std::floor(camera.fy * pc.y() / pc.z() + camera.cy + 0.5));
        if (px < 0 || px >= buffer.width || py < 0 || py >= buffer.height) continue;
        double buffer_depth = buffer.depth_at(px, py);
        if (!std::isfinite(buffer_depth)) continue;
        double delta = pc.z() - buffer_depth;
        scores.zeta[s.coeff_row] = smoothstep(delta, tau0, tau1);
    }
    return scores;
}

InvisibilityScores invisibility(const SceneModel& model, const Camera& camera, int t,
                                double tau0, double tau1) {
    DepthBuffer buf = render_depth(model, camera, t);
    return invisibility_from_buffer(model, camera, t, buf, tau0, tau1);
}

DisocclusionSet detect_disocclusion(const SequenceBundle& bundle, int t_cano) {
    if (t_cano < 0 || t_cano >= bundle.num_frames)
        throw std::invalid_argument("detect_disocclusion: t_cano out of range");
    DisocclusionSet dis;
    dis.t1 = bundle.t1;
    dis.per_frame.assign(bundle.num_frames, {});
    for (int t = bundle.t1; t < bundle.num_frames; ++t)
        for (int i = 0; i < bundle.num_tracks; ++i)
            if (bundle.visible(t, i) && !bundle.visible(t_cano, i)) dis.per_frame[t].push_back(i);
    return dis;
}

}  // namespace restage
