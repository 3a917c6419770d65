#include <doctest.h>

#include <cmath>
#include <set>

#include "restage/losses.hpp"
#include "restage/synth.hpp"
#include "restage/visibility.hpp"

using namespace restage;

namespace {

SceneSpec arm_spec(uint64_t seed, bool occluder = false) {
    SceneSpec s;
    s.kind = SceneKind::TwoLinkArm;
    s.num_points = 120;
    s.frames = 12;
    s.background_points = 45;
    s.seed = seed;
    if (occluder) {
        s.occluder.enabled = true;
        s.occluder.center = Vec3{0.45, 0.1, 2.6};
        s.occluder.half_extents = Vec3{0.4, 0.5, 0.02};
        s.occluder.num_points = 40;
    }
    return s;
}

}  // namespace

TEST_CASE("gen_scene is bit-identical for equal spec and seed") {
    SceneSpec s = arm_spec(42, true);
    s.noise_sigma = 0.01;
    auto [b1, g1] = gen_scene(s);
    auto [b2, g2] = gen_scene(s);
    REQUIRE(b1.num_tracks == b2.num_tracks);
    for (std::size_t i = 0; i < b1.positions.size(); ++i)
        CHECK(b1.positions[i] == b2.positions[i]);
    CHECK(b1.visibility == b2.visibility);
    CHECK(g1.true_visibility == g2.true_visibility);
}

TEST_CASE("rigid box scene: ground-truth model has zero rigidity") {
    SceneSpec s;
    s.kind = SceneKind::RigidBox;
    s.num_points = 80;
    s.frames = 10;
    s.background_points = 0;
    s.seed = 7;
    auto [bundle, gt] = gen_scene(s);
    SceneModel model = ground_truth_model(bundle, gt);
    KnnGraph graph = build_knn_graph(model, 4);
    refresh_similarity(graph, model);
    CHECK(rigidity_init(model, graph) < 1e-9);

    std::vector<InvisibilityScores> ones(model.frame_count);
    for (auto& z : ones) z.zeta.assign(model.foreground_count(), 1.0);
    CHECK(rigidity_refine(model, graph, ones) < 1e-9);
}

TEST_CASE("noise-free scenes admit a near-zero track loss witness model") {
    for (auto kind : {SceneKind::RigidBox, SceneKind::TwoLinkArm, SceneKind::ClusterSwarm}) {
        SceneSpec s;
        s.kind = kind;
        s.num_points = 90;
        s.frames = 8;
        s.background_points = 30;
        s.seed = 13;
        auto [bundle, gt] = gen_scene(s);
        SceneModel model = ground_truth_model(bundle, gt);
        CHECK(track_loss(model, bundle) < 1e-5);
    }
}

TEST_CASE("two-link arm labels partition foreground into exactly 2 clusters") {
    auto [bundle, gt] = gen_scene(arm_spec(21));
    std::set<int> fg_labels;
    for (int i = 0; i < bundle.num_tracks; ++i)
        if (bundle.is_foreground(i)) fg_labels.insert(gt.cluster_labels[i]);
    CHECK(fg_labels == std::set<int>{0, 1});
    for (int i = 0; i < bundle.num_tracks; ++i)
        if (!bundle.is_foreground(i)) CHECK(gt.cluster_labels[i] == -1);
}

TEST_CASE("sweeping occluder hides points; counts match a ray oracle exactly") {
    SceneSpec s = arm_spec(33, true);
    s.occluder.sweep_amplitude = -0.9;  // sweeps left across the arm
    auto [bundle, gt] = gen_scene(s);

    // Independent oracle: ray vs occluder rectangle via plane intersection,
    // plus a repeat of the camera frustum test.
    const Camera& cam = bundle.cameras[0];
    long hidden_total = 0;
    for (int t = 0; t < s.frames; ++t) {
        long oracle_hidden = 0, generator_hidden = 0;
        Vec3 occ_center = s.occluder.center + Vec3{s.occluder.sweep_amplitude *
                                                       (double(t) / (s.frames - 1)),
                                                   0, 0};
        for (int i = 0; i < bundle.num_tracks; ++i) {
            if (!gt.true_visibility[gt.at(t, i)]) ++generator_hidden;
            const Vec3 p = gt.true_positions[gt.at(t, i)];
            bool hidden = false;
            Vec3 pc = cam.to_camera(p);
            if (pc.z() <= 1e-4) hidden = true;
            if (!hidden) {
                double px = cam.fx * pc.x() / pc.z() + cam.cx;
                double py = cam.fy * pc.y() / pc.z() + cam.cy;
                if (px < -0.5 || px > cam.width - 0.5 || py < -0.5 || py > cam.height - 0.5)
                    hidden = true;
            }
            if (!hidden) {
                // Intersect the view ray with the occluder's front/back
                // z-slabs; inside the rectangle and nearer than p == hidden.
                for (double zo : {occ_center.z() - s.occluder.half_extents.z(),
                                  occ_center.z() + s.occluder.half_extents.z()}) {
                    double scale = zo / p.z();
                    if (scale <= 0.0 || scale >= 1.0 - 1e-4) continue;
                    Vec3 hit = p * scale;
                    if (std::abs(hit.x() - occ_center.x()) <= s.occluder.half_extents.x() &&
                        std::abs(hit.y() - occ_center.y()) <= s.occluder.half_extents.y()) {
                        hidden = true;
                        break;
                    }
                }
            }
            if (!hidden) {
                // Own-geometry self occlusion: reuse the generator's solids
                // except the occluder; the oracle covers the occluder path.
                // A point hidden by its own object must match too, so we
                // only compare counts on points the oracle can classify:
                // those not self-occluded per the generator at frame 0 of
                // a no-occluder rerun are handled below.
            }
            (void)hidden;
        }
        (void)oracle_hidden;
        hidden_total += generator_hidden;
    }
    CHECK(hidden_total > 0);

    // Exact comparison on occluder-only classification: regenerate the same
    // scene without the occluder; any visibility difference must be exactly
    // the set of points the rectangle oracle blocks.
    // Only the arm tracks are sampled before the occluder consumes the
    // sampling stream, so only they are position-identical across the two
    // generations.
    SceneSpec bare = s;
    bare.occluder.enabled = false;
    auto [bundle2, gt2] = gen_scene(bare);
    REQUIRE(gt2.num_tracks + s.occluder.num_points == gt.num_tracks);
    for (int t = 0; t < s.frames; ++t) {
        Vec3 occ_center = s.occluder.center + Vec3{s.occluder.sweep_amplitude *
                                                       (double(t) / (s.frames - 1)),
                                                   0, 0};
        for (int i = 0; i < s.num_points; ++i) {
            const Vec3 p = gt2.true_positions[gt2.at(t, i)];
            bool blocked_by_occluder = false;
            for (double zo : {occ_center.z() - s.occluder.half_extents.z(),
                              occ_center.z() + s.occluder.half_extents.z()}) {
                double scale = zo / p.z();
                if (scale <= 0.0 || scale >= 1.0 - 1e-4) continue;
                Vec3 hit = p * scale;
                if (std::abs(hit.x() - occ_center.x()) <= s.occluder.half_extents.x() &&
                    std::abs(hit.y() - occ_center.y()) <= s.occluder.half_extents.y()) {
                    blocked_by_occluder = true;
                    break;
                }
            }
            bool expected = gt2.true_visibility[gt2.at(t, i)] && !blocked_by_occluder;
            CHECK(static_cast<bool>(gt.true_visibility[gt.at(t, i)]) == expected);
        }
    }
}

TEST_CASE("gen_pair shares frame 0 bit-exactly and passes artifact checks") {
    SceneSpec s = arm_spec(55, true);
    s.noise_sigma = 0.004;

    SUBCASE("no artifact: frame 0 identical") {
        ScenePair pair = gen_pair(s, 1, 14);
        REQUIRE(pair.base.num_tracks == pair.driving.num_tracks);
        for (int i = 0; i < pair.base.num_tracks; ++i) {
            CHECK(pair.base.position(0, i) == pair.driving.position(0, i));
            CHECK(pair.base.visible(0, i) == pair.driving.visible(0, i));
        }
    }
    SUBCASE("attach_background artifact follows the foreground cluster") {
        SceneSpec clean = s;
        clean.noise_sigma = 0.0;
        ScenePair pair = gen_pair(clean, 1, 14, ArtifactKind::AttachBackground);
        REQUIRE(pair.gt_driving.artifacts.size() == 1);
        const auto& record = pair.gt_driving.artifacts[0];
        CHECK(record.kind == ArtifactKind::AttachBackground);
        REQUIRE(!record.tracks.empty());
        // Motion-script oracle: corrupted observations equal the cluster-0
        // relative transform applied to the frame-0 position.
        const auto& poses = pair.gt_driving.cluster_poses[0];
        for (int t = 1; t < pair.driving.num_frames; ++t) {
            Pose rel = compose(poses[t], inverse(poses[0]));
            for (int i : record.tracks) {
                Vec3 expect = apply(rel, pair.gt_driving.true_positions[pair.gt_driving.at(0, i)]);
                Vec3 got = pair.driving.position(t, i);
                CHECK((got - expect).norm() < 1e-6);
                // Ground truth stays clean (static background).
                CHECK(pair.gt_driving.true_positions[pair.gt_driving.at(t, i)] ==
                      pair.gt_driving.true_positions[pair.gt_driving.at(0, i)]);
            }
        }
        // Labels still say background.
        for (int i : record.tracks) CHECK(!pair.driving.is_foreground(i));
    }
    SUBCASE("offset_limb tears off part of one cluster") {
        ScenePair pair = gen_pair(s, 1, 14, ArtifactKind::OffsetLimb);
        REQUIRE(pair.gt_driving.artifacts.size() == 1);
        const auto& tracks = pair.gt_driving.artifacts[0].tracks;
        REQUIRE(!tracks.empty());
        std::size_t limb_size = 0;
        for (int i = 0; i < pair.driving.num_tracks; ++i)
            if (pair.gt_driving.cluster_labels[i] == 1) ++limb_size;
        CHECK(tracks.size() < limb_size);  // a sub-region, not the whole cluster
        for (int i : tracks) CHECK(pair.gt_driving.cluster_labels[i] == 1);
    }
}

namespace {

// Independent slab-test oracle with the box silhouette eroded or dilated
// by a world-space margin (x/y only; the camera looks down z).
bool ray_blocked(const std::vector<Obb>& solids, const Vec3& target, double margin) {
    for (const Obb& box : solids) {
        Vec3 half = box.half + Vec3{margin, margin, 0.0};
        if (half.x() <= 0 || half.y() <= 0) continue;
        Pose inv = inverse(box.pose);
        Vec3 o = apply(inv, Vec3::Zero());
        Vec3 d = apply(inv, target) - o;
        double t0 = 0.0, t1 = 1.0;
        bool miss = false;
        for (int a = 0; a < 3 && !miss; ++a) {
            if (std::abs(d[a]) < 1e-12) {
                if (std::abs(o[a]) > half[a]) miss = true;
                continue;
            }
            double ta = (-half[a] - o[a]) / d[a];
            double tb = (half[a] - o[a]) / d[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) miss = true;
        }
        if (!miss && t0 < 1.0 - 1e-4) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("analytic visibility agrees with rasterized invisibility scores") {
    // A finite-footprint rasterizer dithers within one splat radius of any
    // silhouette, so classification is compared where it is stable under a
    // world-space margin: points still blocked when every box is eroded,
    // or still clear when every box is dilated.
    SceneSpec s = arm_spec(77, true);
    s.num_points = 160;
    s.occluder.num_points = 300;
    s.occluder.sweep_amplitude = -0.9;
    auto [bundle, gt] = gen_scene(s);
    SceneModel model = ground_truth_model(bundle, gt);
    const double margin = 0.12;

    long agree = 0, total = 0;
    for (int t = 0; t < bundle.num_frames; ++t) {
        const Camera& cam = bundle.cameras[t];
        double zmin = 1e9, zmax = 0;
        for (int i = 0; i < (int)model.splats.size(); ++i) {
            double z = cam.to_camera(deform(model, i, t)).z();
            zmin = std::min(zmin, z);
            zmax = std::max(zmax, z);
        }
        double range = zmax - zmin;
        InvisibilityScores zeta = invisibility(model, cam, t, 0.01 * range, 0.05 * range);

        for (int i = 0; i < (int)model.splats.size(); ++i) {
            const Splat& sp = model.splats[i];
            if (!sp.is_foreground) continue;
            if (sp.source_track >= s.num_points) continue;  // arm tracks only
            const Vec3 p = gt.true_positions[gt.at(t, sp.source_track)];
            bool deep_hidden = ray_blocked(gt.solids[t], p, -margin);
            bool deep_visible = !ray_blocked(gt.solids[t], p, margin);
            if (deep_hidden == deep_visible) continue;  // silhouette band
            bool raster_visible = zeta.zeta[sp.coeff_row] < 0.5;
            if (raster_visible == deep_visible) ++agree;
            ++total;
        }
    }
    REQUIRE(total > 400);
    CHECK(double(agree) / double(total) >= 0.98);
}
