#include "restage/synth.hpp"

#include <cmath>
#include <numbers>

#include "restage/rng.hpp"

namespace restage {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr uint64_t kSampleStream = 0x51;
constexpr uint64_t kLayoutStream = 0x52;
constexpr uint64_t kNoiseStream = 0xA000;
constexpr uint64_t kArtifactNoiseStream = 0xAF00;
constexpr uint64_t kDropoutStream = 0x7D;

inline double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }
inline Vec3 snap_f32(const Vec3& v) {
    return Vec3{snap_f32(v.x()), snap_f32(v.y()), snap_f32(v.z())};
}

struct ObjectDef {
    Vec3 half = Vec3::Zero();
    std::vector<Pose> poses;  // per frame, world pose of the box frame
    int points = 0;
    bool foreground = true;
    int cluster = -1;
    Vec3 color = Vec3::Constant(0.5);
    bool solid = true;
    bool front_face_only = false;  // sample only the camera-facing face
    bool is_blob = false;          // compact background cluster, artifact target
};

std::vector<Vec3> sample_box_surface(const Vec3& half, int n, bool front_only, Rng& rng) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    if (front_only) {
        for (int i = 0; i < n; ++i)
            pts.emplace_back(rng.uniform(-half.x(), half.x()), rng.uniform(-half.y(), half.y()),
                             -half.z());
        return pts;
    }
    // Area-weighted choice over the six faces.
    const double ax = half.y() * half.z(), ay = half.x() * half.z(), az = half.x() * half.y();
    const double total = 2.0 * (ax + ay + az);
    for (int i = 0; i < n; ++i) {
        double pick = rng.uniform() * total;
        double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
        double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        Vec3 p;
        if (pick < 2 * ax)
            p = Vec3{side * half.x(), u * half.y(), v * half.z()};
        else if (pick < 2 * (ax + ay))
            p = Vec3{u * half.x(), side * half.y(), v * half.z()};
        else
            p = Vec3{u * half.x(), v * half.y(), side * half.z()};
        pts.push_back(p);
    }
    return pts;
}

// Entry parameter of the segment origin->target into the box, or +inf.
double obb_entry(const Obb& box, const Vec3& origin, const Vec3& target) {
    Pose inv = inverse(box.pose);
    Vec3 o = apply(inv, origin);
    Vec3 d = apply(inv, target) - o;
    double t0 = 0.0, t1 = 1.0;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12) {
            if (std::abs(o[a]) > box.half[a]) return std::numeric_limits<double>::infinity();
            continue;
        }
        double ta = (-box.half[a] - o[a]) / d[a];
        double tb = (box.half[a] - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return std::numeric_limits<double>::infinity();
    }
    return t0;
}

bool point_visible(const Camera& cam, const Vec3& p, const std::vector<Obb>& solids) {
    Vec3 pc = cam.to_camera(p);
    if (pc.z() <= 1e-4) return false;
    double px = cam.fx * pc.x() / pc.z() + cam.cx;
    double py = cam.fy * pc.y() / pc.z() + cam.cy;
    if (px < -0.5 || px > cam.width - 0.5 || py < -0.5 || py > cam.height - 0.5) return false;
    Vec3 origin = apply(inverse(cam.pose), Vec3::Zero());
    for (const Obb& s : solids)
        if (obb_entry(s, origin, p) < 1.0 - 1e-4) return false;
    return true;
}

// Box pose whose local frame sits at `pivot`, rotated about it and shifted.
Pose box_pose_about(const Vec3& pivot, const Vec3& axis, double angle, const Vec3& shift) {
    Pose rot = Pose::rotation(axis, angle);
    return Pose{rot.q, pivot + shift};
}

std::vector<ObjectDef> build_objects(const SceneSpec& spec, int variant, int frames) {
    const double A = spec.motion_amplitude;
    const double zc = spec.camera_distance;
    const Vec3 center{0.0, 0.0, zc};
    std::vector<ObjectDef> objs;
    auto s_of = [&](int t) { return frames > 1 ? double(t) / (frames - 1) : 0.0; };

    Rng layout = Rng::stream(spec.seed, kLayoutStream);
    Rng script = Rng::stream(spec.seed, 0xD0 + static_cast<uint64_t>(variant));

    switch (spec.kind) {
        case SceneKind::RigidBox: {
            ObjectDef box;
            box.half = Vec3{0.35, 0.25, 0.2};
            box.points = spec.num_points;
            box.cluster = 0;
            box.color = Vec3{0.8, 0.3, 0.2};
            Vec3 axis{0.3, 1.0, 0.25};
            double amp = 0.7, f = 1.0;
            Vec3 tdir{0.35, 0.15, 0.1};
            if (variant == 1) {
                axis = Vec3{1.0, -0.2, 0.4};
                amp = -0.55;
                tdir = Vec3{-0.2, 0.3, 0.15};
                f = 1.5;
            } else if (variant >= 2) {
                axis = Vec3{script.uniform(-1, 1), script.uniform(-1, 1), script.uniform(-1, 1)};
                if (axis.norm() < 0.2) axis = Vec3{0, 1, 0};
                amp = script.uniform(0.3, 0.8) * (script.uniform() < 0.5 ? -1 : 1);
                tdir = Vec3{script.uniform(-0.3, 0.3), script.uniform(-0.3, 0.3),
                            script.uniform(-0.15, 0.15)};
                f = script.uniform(0.8, 1.6);
            }
            for (int t = 0; t < frames; ++t) {
                double s = s_of(t);
                box.poses.push_back(box_pose_about(center, axis,
                                                   amp * A * std::sin(kPi * f * s),
                                                   tdir * (A * std::sin(kPi * s))));
            }
            objs.push_back(std::move(box));
            break;
        }
        case SceneKind::TwoLinkArm: {
            const double l1 = 0.7, l2 = 0.6, r = 0.07;
            const Vec3 shoulder = center + Vec3{-0.65, 0.1, 0.0};
            double a1 = 0.55, a2 = 0.9, f1 = 1.0, f2 = 1.0;
            if (variant == 1) {
                a1 = -0.45;
                a2 = 1.15;
                f2 = 1.5;
            } else if (variant >= 2) {
                a1 = script.uniform(0.3, 0.7) * (script.uniform() < 0.5 ? -1 : 1);
                a2 = script.uniform(0.6, 1.2) * (script.uniform() < 0.5 ? -1 : 1);
                f1 = script.uniform(0.7, 1.3);
                f2 = script.uniform(0.7, 1.6);
            }
            ObjectDef link1, link2;
            link1.half = Vec3{l1 / 2, r, r};
            link2.half = Vec3{l2 / 2, r, r};
            link1.points = spec.num_points / 2;
            link2.points = spec.num_points - link1.points;
            link1.cluster = 0;
            link2.cluster = 1;
            link1.color = Vec3{0.2, 0.5, 0.9};
            link2.color = Vec3{0.9, 0.6, 0.1};
            for (int t = 0; t < frames; ++t) {
                double s = s_of(t);
                double th1 = a1 * A * std::sin(kPi * f1 * s);
                double th2 = a2 * A * std::sin(kPi * f2 * s);
                Pose joint1 = compose(Pose::translation(shoulder),
                                      Pose::rotation(Vec3{0, 0, 1}, th1));
                link1.poses.push_back(compose(joint1, Pose::translation(Vec3{l1 / 2, 0, 0})));
                Pose joint2 = compose(compose(joint1, Pose::translation(Vec3{l1, 0, 0})),
                                      Pose::rotation(Vec3{0, 0, 1}, th2));
                link2.poses.push_back(compose(joint2, Pose::translation(Vec3{l2 / 2, 0, 0})));
            }
            objs.push_back(std::move(link1));
            objs.push_back(std::move(link2));
            break;
        }
        case SceneKind::ClusterSwarm: {
            const int n_clusters = 4;
            int per = spec.num_points / n_clusters;
            for (int j = 0; j < n_clusters; ++j) {
                ObjectDef c;
                c.half = Vec3::Constant(0.14);
                c.points = j + 1 < n_clusters ? per : spec.num_points - per * (n_clusters - 1);
                c.cluster = j;
                c.color = Vec3{0.3 + 0.15 * j, 0.8 - 0.15 * j, 0.4};
                Vec3 base = center + Vec3{layout.uniform(-0.9, 0.9), layout.uniform(-0.55, 0.55),
                                          layout.uniform(-0.3, 0.3)};
                Vec3 axis{script.uniform(-1, 1), script.uniform(-1, 1), script.uniform(-1, 1)};
                if (axis.norm() < 0.2) axis = Vec3{0, 0, 1};
                double amp = script.uniform(0.3, 0.7);
                double f = script.uniform(0.6, 1.4);
                Vec3 tdir{script.uniform(-0.3, 0.3), script.uniform(-0.3, 0.3),
                          script.uniform(-0.12, 0.12)};
                double g = script.uniform(0.6, 1.4);
                for (int t = 0; t < frames; ++t) {
                    double s = s_of(t);
                    c.poses.push_back(box_pose_about(base, axis,
                                                     amp * A * std::sin(kPi * f * s),
                                                     tdir * (A * std::sin(kPi * g * s))));
                }
                objs.push_back(std::move(c));
            }
            break;
        }
    }

    int next_cluster = 0;
    for (const auto& o : objs) next_cluster = std::max(next_cluster, o.cluster + 1);

    if (spec.occluder.enabled) {
        ObjectDef occ;
        occ.half = spec.occluder.half_extents;
        occ.points = spec.occluder.num_points;
        occ.color = Vec3{0.25, 0.25, 0.3};
        occ.front_face_only = true;
        const bool moving = spec.occluder.sweep_amplitude != 0.0;
        occ.foreground = moving;
        occ.cluster = moving ? next_cluster++ : -1;
        for (int t = 0; t < frames; ++t) {
            double s = s_of(t);
            Vec3 shift{spec.occluder.sweep_amplitude * s, 0.0, 0.0};
            occ.poses.push_back(Pose::translation(spec.occluder.center + shift));
        }
        objs.push_back(std::move(occ));
    }

    if (spec.background_points > 0) {
        // A compact blob on the backdrop (the "background cluster" used by
        // artifact injection) plus a uniform wall.
        int blob_points = spec.background_points / 3;
        ObjectDef blob;
        blob.half = Vec3{0.18, 0.18, 0.02};
        blob.points = blob_points;
        blob.foreground = false;
        blob.cluster = -1;
        blob.color = Vec3{0.55, 0.35, 0.6};
        blob.front_face_only = true;
        blob.is_blob = true;
        Vec3 blob_center = center + Vec3{layout.uniform(0.7, 1.1), layout.uniform(-0.9, -0.5),
                                         1.4};
        blob.poses.assign(frames, Pose::translation(blob_center));
        objs.push_back(std::move(blob));

        ObjectDef wall;
        wall.half = Vec3{1.7, 1.3, 0.02};
        wall.points = spec.background_points - blob_points;
        wall.foreground = false;
        wall.cluster = -1;
        wall.color = Vec3{0.7, 0.7, 0.65};
        wall.front_face_only = true;
        wall.poses.assign(frames, Pose::translation(center + Vec3{0, 0, 1.6}));
        objs.push_back(std::move(wall));
    }
    return objs;
}

struct GenOut {
    SequenceBundle bundle;
    GroundTruth gt;
    std::vector<std::pair<int, int>> object_tracks;  // [begin, end) per object
    int blob_object = -1;
};

GenOut generate(const SceneSpec& spec, int variant, int frames) {
    spec.validate();
    GenOut out;
    std::vector<ObjectDef> objs = build_objects(spec, variant, frames);

    Camera cam;
    cam.fx = cam.fy = spec.camera_fx;
    cam.cx = (spec.camera_width - 1) / 2.0;
    cam.cy = (spec.camera_height - 1) / 2.0;
    cam.width = spec.camera_width;
    cam.height = spec.camera_height;

    // Local surface samples, one deterministic stream for all objects.
    Rng sampler = Rng::stream(spec.seed, kSampleStream);
    std::vector<std::vector<Vec3>> local(objs.size());
    int num_tracks = 0;
    for (std::size_t o = 0; o < objs.size(); ++o) {
        local[o] = sample_box_surface(objs[o].half, objs[o].points, objs[o].front_face_only,
                                      sampler);
        out.object_tracks.emplace_back(num_tracks, num_tracks + objs[o].points);
        num_tracks += objs[o].points;
        if (objs[o].is_blob && out.blob_object < 0) out.blob_object = static_cast<int>(o);
    }

    SequenceBundle& b = out.bundle;
    GroundTruth& gt = out.gt;
    b.num_tracks = num_tracks;
    b.num_frames = frames;
    b.labels.resize(num_tracks);
    b.colors.resize(num_tracks);
    b.cameras.assign(frames, cam);
    b.positions.resize(static_cast<std::size_t>(num_tracks) * frames);
    b.visibility.resize(static_cast<std::size_t>(num_tracks) * frames);
    gt.num_tracks = num_tracks;
    gt.frames = frames;
    gt.true_positions.resize(b.positions.size());
    gt.true_visibility.resize(b.positions.size());
    gt.cluster_labels.resize(num_tracks);
    gt.canonical.resize(num_tracks);
    gt.solids.resize(frames);

    int n_clusters = 0;
    for (const auto& o : objs) n_clusters = std::max(n_clusters, o.cluster + 1);
    gt.cluster_poses.assign(n_clusters, {});
    for (const auto& o : objs)
        if (o.cluster >= 0) gt.cluster_poses[o.cluster] = o.poses;

    for (int t = 0; t < frames; ++t)
        for (const auto& o : objs)
            if (o.solid) gt.solids[t].push_back(Obb{o.poses[t], o.half});

    int track = 0;
    for (std::size_t o = 0; o < objs.size(); ++o) {
        for (int p = 0; p < objs[o].points; ++p, ++track) {
            b.labels[track] = objs[o].foreground ? 1 : 0;
            b.colors[track] = objs[o].color;
            gt.cluster_labels[track] = objs[o].cluster;
            gt.canonical[track] = snap_f32(apply(objs[o].poses[0], local[o][p]));
        }
    }

    const Vec3 scene_center{0.0, 0.0, spec.camera_distance};
    for (int t = 0; t < frames; ++t) {
        Rng noise = Rng::stream(spec.seed, kNoiseStream + static_cast<uint64_t>(t));
        const double wobble = spec.scale_jitter > 0.0 ? noise.normal(0.0, spec.scale_jitter) : 0.0;
        track = 0;
        for (std::size_t o = 0; o < objs.size(); ++o) {
            for (int p = 0; p < objs[o].points; ++p, ++track) {
                Vec3 world = apply(objs[o].poses[t], local[o][p]);
                const std::size_t idx = b.at(t, track);
                gt.true_positions[idx] = snap_f32(world);
                bool vis = point_visible(cam, world, gt.solids[t]);
                gt.true_visibility[idx] = vis ? 1 : 0;
                Vec3 observed = scene_center + (1.0 + wobble) * (world - scene_center);
                if (spec.noise_sigma > 0.0)
                    observed += Vec3{noise.normal(0, spec.noise_sigma),
                                     noise.normal(0, spec.noise_sigma),
                                     noise.normal(0, spec.noise_sigma)};
                b.positions[idx] = snap_f32(observed);
                b.visibility[idx] = gt.true_visibility[idx];
            }
        }
    }

    // Tracker dropout: unreliable tracks keep only scattered observations.
    // Geometry-level visibility (gt) is untouched, and every draw is
    // variant-independent so a base/driving pair shares its first frame
    // (positions and flags) bit-exactly.
    if (spec.track_dropout > 0.0) {
        Rng pick = Rng::stream(spec.seed, kDropoutStream);
        std::vector<uint8_t> unreliable(num_tracks, 0);
        for (int i = 0; i < num_tracks; ++i)
            if (pick.uniform() < spec.track_dropout) unreliable[i] = 1;
        const double keep_rate = 0.25;
        for (int t = 0; t < frames; ++t) {
            Rng coin = Rng::stream(spec.seed, kDropoutStream + 0x100 + static_cast<uint64_t>(t));
            for (int i = 0; i < num_tracks; ++i) {
                double u = coin.uniform();
                if (unreliable[i] && u >= keep_rate) b.visibility[b.at(t, i)] = 0;
            }
        }
    }
    return out;
}

void recompute_corrupted(SequenceBundle& bundle, const GroundTruth& gt,
                         const std::vector<int>& tracks,
                         const std::vector<Vec3>& corrupted,  // t-major over `tracks`
                         double noise_sigma, uint64_t seed) {
    const int frames = bundle.num_frames;
    for (int t = 1; t < frames; ++t) {
        Rng noise = Rng::stream(seed, kArtifactNoiseStream + static_cast<uint64_t>(t));
        for (std::size_t n = 0; n < tracks.size(); ++n) {
            const Vec3& world = corrupted[static_cast<std::size_t>(t) * tracks.size() + n];
            const std::size_t idx = bundle.at(t, tracks[n]);
            Vec3 observed = world;
            if (noise_sigma > 0.0)
                observed += Vec3{noise.normal(0, noise_sigma), noise.normal(0, noise_sigma),
                                 noise.normal(0, noise_sigma)};
            bundle.positions[idx] = snap_f32(observed);
            bundle.visibility[idx] =
                point_visible(bundle.cameras[t], world, gt.solids[t]) ? 1 : 0;
        }
    }
}

}  // namespace

SceneKind scene_kind_from_string(const std::string& s) {
    if (s == "rigid_box") return SceneKind::RigidBox;
    if (s == "two_link_arm") return SceneKind::TwoLinkArm;
    if (s == "cluster_swarm") return SceneKind::ClusterSwarm;
    throw std::invalid_argument("unknown scene kind: " + s);
}

std::string to_string(SceneKind k) {
    switch (k) {
        case SceneKind::RigidBox: return "rigid_box";
        case SceneKind::TwoLinkArm: return "two_link_arm";
        case SceneKind::ClusterSwarm: return "cluster_swarm";
    }
    return "?";
}

ArtifactKind artifact_from_string(const std::string& s) {
    if (s == "none") return ArtifactKind::None;
    if (s == "attach_background") return ArtifactKind::AttachBackground;
    if (s == "swap_clusters") return ArtifactKind::SwapClusters;
    if (s == "offset_limb") return ArtifactKind::OffsetLimb;
    throw std::invalid_argument("unknown artifact kind: " + s);
}

std::string to_string(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::None: return "none";
        case ArtifactKind::AttachBackground: return "attach_background";
        case ArtifactKind::SwapClusters: return "swap_clusters";
        case ArtifactKind::OffsetLimb: return "offset_limb";
    }
    return "?";
}

void SceneSpec::validate() const {
    if (num_points < 1 || frames < 1) throw std::invalid_argument("synth: counts must be >= 1");
    if (noise_sigma < 0.0) throw std::invalid_argument("synth: noise_sigma must be >= 0");
    if (scale_jitter < 0.0) throw std::invalid_argument("synth: scale_jitter must be >= 0");
    if (track_dropout < 0.0 || track_dropout > 1.0)
        throw std::invalid_argument("synth: track_dropout must lie in [0, 1]");
    if (camera_width < 8 || camera_height < 8)
        throw std::invalid_argument("synth: camera too small");
    if (camera_fx <= 0 || camera_distance <= 0)
        throw std::invalid_argument("synth: camera parameters must be positive");
}

std::pair<SequenceBundle, GroundTruth> gen_scene(const SceneSpec& spec) {
    GenOut out = generate(spec, spec.motion_variant, spec.frames);
    return {std::move(out.bundle), std::move(out.gt)};
}

ScenePair gen_pair(const SceneSpec& spec, int driving_variant, int driving_frames,
                   ArtifactKind artifact) {
    GenOut base = generate(spec, spec.motion_variant, spec.frames);
    GenOut driving = generate(spec, driving_variant, driving_frames);

    for (int i = 0; i < base.bundle.num_tracks; ++i)
        if (base.bundle.position(0, i) != driving.bundle.position(0, i))
            throw std::invalid_argument("gen_pair: motion scripts disagree at frame 0");

    if (artifact != ArtifactKind::None) {
        GroundTruth& gt = driving.gt;
        SequenceBundle& db = driving.bundle;
        ArtifactRecord record;
        record.kind = artifact;
        std::vector<int> tracks;

        if (artifact == ArtifactKind::AttachBackground) {
            if (base.blob_object < 0)
                throw std::invalid_argument("attach_background needs background points");
            auto [lo, hi] = base.object_tracks[base.blob_object];
            for (int i = lo; i < hi; ++i) tracks.push_back(i);
            const auto& fg_poses = gt.cluster_poses.at(0);
            std::vector<Vec3> corrupted(static_cast<std::size_t>(driving_frames) * tracks.size());
            for (int t = 0; t < driving_frames; ++t) {
                Pose rel = compose(fg_poses[t], inverse(fg_poses[0]));
                for (std::size_t n = 0; n < tracks.size(); ++n)
                    corrupted[static_cast<std::size_t>(t) * tracks.size() + n] =
                        apply(rel, gt.true_positions[gt.at(0, tracks[n])]);
            }
            recompute_corrupted(db, gt, tracks, corrupted, spec.noise_sigma, spec.seed);
        } else if (artifact == ArtifactKind::SwapClusters) {
            if (gt.cluster_poses.size() < 2)
                throw std::invalid_argument("swap_clusters needs two foreground clusters");
            const int mid = driving_frames / 2;
            for (int c : {0, 1}) {
                std::vector<int> members;
                for (int i = 0; i < db.num_tracks; ++i)
                    if (gt.cluster_labels[i] == c) members.push_back(i);
                const auto& other = gt.cluster_poses[1 - c];
                std::vector<Vec3> corrupted(static_cast<std::size_t>(driving_frames) *
                                            members.size());
                for (int t = 0; t < driving_frames; ++t)
                    for (std::size_t n = 0; n < members.size(); ++n) {
                        const std::size_t dst = static_cast<std::size_t>(t) * members.size() + n;
                        if (t <= mid) {
                            corrupted[dst] = gt.true_positions[gt.at(t, members[n])];
                        } else {
                            Pose rel = compose(other[t], inverse(other[mid]));
                            corrupted[dst] =
                                apply(rel, gt.true_positions[gt.at(mid, members[n])]);
                        }
                    }
                recompute_corrupted(db, gt, members, corrupted, spec.noise_sigma, spec.seed);
                tracks.insert(tracks.end(), members.begin(), members.end());
            }
        } else if (artifact == ArtifactKind::OffsetLimb) {
            // Tear the limb: only its distal half detaches, so edges across
            // the tear register the corruption (offsetting a whole rigid
            // cluster would leave every pairwise distance intact).
            const int limb = gt.cluster_poses.size() > 1 ? 1 : 0;
            std::vector<int> members;
            for (int i = 0; i < db.num_tracks; ++i)
                if (gt.cluster_labels[i] == limb) members.push_back(i);
            Vec3 centroid = Vec3::Zero();
            for (int i : members) centroid += gt.true_positions[gt.at(0, i)];
            centroid /= static_cast<double>(members.size());
            std::vector<double> dist(members.size());
            for (std::size_t n = 0; n < members.size(); ++n)
                dist[n] = (gt.true_positions[gt.at(0, members[n])] - centroid).norm();
            std::vector<double> sorted = dist;
            std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
            const double median = sorted[sorted.size() / 2];
            for (std::size_t n = 0; n < members.size(); ++n)
                if (dist[n] > median) tracks.push_back(members[n]);
            Vec3 offset = Vec3{0.22, 0.09, 0.0} * spec.motion_amplitude;
            std::vector<Vec3> corrupted(static_cast<std::size_t>(driving_frames) * tracks.size());
            for (int t = 0; t < driving_frames; ++t) {
                double ramp = std::min(1.0, t / 3.0);
                for (std::size_t n = 0; n < tracks.size(); ++n)
                    corrupted[static_cast<std::size_t>(t) * tracks.size() + n] =
                        gt.true_positions[gt.at(t, tracks[n])] + ramp * offset;
            }
            recompute_corrupted(db, gt, tracks, corrupted, spec.noise_sigma, spec.seed);
        }
        record.tracks = std::move(tracks);
        gt.artifacts.push_back(std::move(record));
    }

    ScenePair pair;
    pair.base = std::move(base.bundle);
    pair.driving = std::move(driving.bundle);
    pair.gt_base = std::move(base.gt);
    pair.gt_driving = std::move(driving.gt);
    return pair;
}

SceneModel ground_truth_model(const SequenceBundle& bundle, const GroundTruth& gt, int t_cano) {
    if (t_cano < 0) t_cano = select_canonical_frame(bundle);
    const int n_clusters = std::max<int>(1, static_cast<int>(gt.cluster_poses.size()));
    SceneModel model;
    model.frame_count = gt.frames;
    model.t_cano = t_cano;
    model.bases = MotionBases::identity(n_clusters, gt.frames);
    model.coeffs.beta.resize(0, n_clusters);
    for (int c = 0; c < static_cast<int>(gt.cluster_poses.size()); ++c)
        for (int t = 0; t < gt.frames; ++t)
            model.bases.at(c, t) =
                compose(gt.cluster_poses[c][t], inverse(gt.cluster_poses[c][t_cano]));

    for (int i = 0; i < gt.num_tracks; ++i) {
        Splat s;
        s.mu = gt.true_positions[gt.at(t_cano, i)];
        s.source_track = i;
        if (!bundle.colors.empty()) s.color = bundle.colors[i];
        int label = gt.cluster_labels[i];
        if (label >= 0) {
            Eigen::VectorXd beta = Eigen::VectorXd::Constant(n_clusters, n_clusters > 1 ? -15.0 : 0.0);
            if (n_clusters > 1) beta[label] = 15.0;
            model.add_foreground_splat(s, beta);
        } else {
            model.add_background_splat(s);
        }
    }
    init_splat_scales(model);
    return model;
}

GroundTruth combine_ground_truth(const GroundTruth& base, const GroundTruth& driving) {
    if (base.num_tracks != driving.num_tracks)
        throw std::invalid_argument("combine_ground_truth: track count mismatch");
    GroundTruth out;
    const int tb = base.frames, td = driving.frames;
    out.num_tracks = base.num_tracks;
    out.frames = tb + td - 1;
    out.cluster_labels = base.cluster_labels;
    out.canonical = base.canonical;
    out.artifacts = driving.artifacts;
    out.true_positions.resize(static_cast<std::size_t>(out.num_tracks) * out.frames);
    out.true_visibility.resize(out.true_positions.size());
    out.solids.resize(out.frames);
    auto src_frame = [&](int t) {
        return t < tb ? std::pair<const GroundTruth*, int>{&base, tb - 1 - t}
                      : std::pair<const GroundTruth*, int>{&driving, t - tb + 1};
    };
    for (int t = 0; t < out.frames; ++t) {
        auto [gt, st] = src_frame(t);
        out.solids[t] = gt->solids[st];
        for (int i = 0; i < out.num_tracks; ++i) {
            out.true_positions[out.at(t, i)] = gt->true_positions[gt->at(st, i)];
            out.true_visibility[out.at(t, i)] = gt->true_visibility[gt->at(st, i)];
        }
    }
    out.cluster_poses.resize(base.cluster_poses.size());
    for (std::size_t c = 0; c < base.cluster_poses.size(); ++c) {
        auto& seq = out.cluster_poses[c];
        seq.resize(out.frames);
        for (int t = 0; t < out.frames; ++t) {
            auto [gt, st] = src_frame(t);
            seq[t] = gt->cluster_poses[c][st];
        }
    }
    return out;
}

}  // namespace restage
