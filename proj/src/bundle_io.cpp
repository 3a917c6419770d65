#include "restage/bundle_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

namespace restage {

namespace {

using nlohmann::json;

void write_bytes_atomic(const std::filesystem::path& file, const void* data, std::size_t n) {
    std::filesystem::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

std::vector<char> read_bytes(const std::filesystem::path& file, std::size_t expected) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::vector<char> data((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    if (data.size() != expected)
        throw std::runtime_error(file.string() + ": expected " + std::to_string(expected) +
                                 " bytes, got " + std::to_string(data.size()));
    return data;
}

std::vector<float> to_f32(const std::vector<Vec3>& v) {
    std::vector<float> out;
    out.reserve(v.size() * 3);
    for (const Vec3& p : v) {
        out.push_back(static_cast<float>(p.x()));
        out.push_back(static_cast<float>(p.y()));
        out.push_back(static_cast<float>(p.z()));
    }
    return out;
}

std::vector<Vec3> from_f32(const std::vector<char>& bytes, const std::string& name) {
    std::vector<Vec3> out(bytes.size() / 12);
    const float* f = reinterpret_cast<const float*>(bytes.data());
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (int c = 0; c < 3; ++c)
            if (!std::isfinite(f[i * 3 + c]))
                throw std::runtime_error(name + ": non-finite float at element " +
                                         std::to_string(i * 3 + c));
        out[i] = Vec3{f[i * 3], f[i * 3 + 1], f[i * 3 + 2]};
    }
    return out;
}

json camera_json(const Camera& c) {
    return json{{"fx", c.fx},
                {"fy", c.fy},
                {"cx", c.cx},
                {"cy", c.cy},
                {"width", c.width},
                {"height", c.height},
                {"q", {c.pose.q[0], c.pose.q[1], c.pose.q[2], c.pose.q[3]}},
                {"t", {c.pose.t[0], c.pose.t[1], c.pose.t[2]}}};
}

Camera camera_from_json(const json& j) {
    Camera c;
    c.fx = j.at("fx");
    c.fy = j.at("fy");
    c.cx = j.at("cx");
    c.cy = j.at("cy");
    c.width = j.at("width");
    c.height = j.at("height");
    for (int i = 0; i < 4; ++i) c.pose.q[i] = j.at("q").at(i);
    for (int i = 0; i < 3; ++i) c.pose.t[i] = j.at("t").at(i);
    return c;
}

json pose_json(const Pose& p) {
    return json{{"q", {p.q[0], p.q[1], p.q[2], p.q[3]}}, {"t", {p.t[0], p.t[1], p.t[2]}}};
}

Pose pose_from_json(const json& j) {
    Pose p;
    for (int i = 0; i < 4; ++i) p.q[i] = j.at("q").at(i);
    for (int i = 0; i < 3; ++i) p.t[i] = j.at("t").at(i);
    return p;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& file, const std::string& contents) {
    write_bytes_atomic(file, contents.data(), contents.size());
}

void write_bundle(const SequenceBundle& bundle, const std::filesystem::path& dir) {
    bundle.validate();
    std::filesystem::create_directories(dir);
    const std::size_t nt = bundle.positions.size();

    write_bytes_atomic(dir / "tracks.f32", to_f32(bundle.positions).data(), nt * 12);
    write_bytes_atomic(dir / "visibility.u8", bundle.visibility.data(), nt);
    write_bytes_atomic(dir / "labels.u8", bundle.labels.data(), bundle.labels.size());

    json arrays = {
        {"tracks", {{"file", "tracks.f32"}, {"shape", {bundle.num_frames, bundle.num_tracks, 3}}, {"dtype", "f32"}}},
        {"visibility",
         {{"file", "visibility.u8"}, {"shape", {bundle.num_frames, bundle.num_tracks}}, {"dtype", "u8"}}},
        {"labels", {{"file", "labels.u8"}, {"shape", {bundle.num_tracks}}, {"dtype", "u8"}}}};
    if (!bundle.colors.empty()) {
        write_bytes_atomic(dir / "colors.f32", to_f32(bundle.colors).data(),
                           bundle.colors.size() * 12);
        arrays["colors"] = {{"file", "colors.f32"}, {"shape", {bundle.num_tracks, 3}}, {"dtype", "f32"}};
    }
    json cams = json::array();
    for (const Camera& c : bundle.cameras) cams.push_back(camera_json(c));
    json manifest = {{"format", kBundleFormat},
                     {"frames", bundle.num_frames},
                     {"tracks", bundle.num_tracks},
                     {"t1", bundle.t1},
                     {"cameras", cams},
                     {"arrays", arrays}};
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

SequenceBundle read_bundle(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
    json manifest = json::parse(in);
    if (manifest.at("format") != kBundleFormat)
        throw std::runtime_error(dir.string() + ": unsupported bundle format '" +
                                 manifest.at("format").get<std::string>() + "'");

    SequenceBundle b;
    b.num_frames = manifest.at("frames");
    b.num_tracks = manifest.at("tracks");
    b.t1 = manifest.at("t1");
    for (const json& c : manifest.at("cameras")) b.cameras.push_back(camera_from_json(c));

    const json& arrays = manifest.at("arrays");
    const std::size_t nt = static_cast<std::size_t>(b.num_frames) * b.num_tracks;
    auto check_shape = [&](const char* name, const std::vector<long>& expect) {
        std::vector<long> got = arrays.at(name).at("shape").get<std::vector<long>>();
        if (got != expect)
            throw std::runtime_error(std::string("manifest shape mismatch for ") + name);
    };
    check_shape("tracks", {b.num_frames, b.num_tracks, 3});
    check_shape("visibility", {b.num_frames, b.num_tracks});
    check_shape("labels", {b.num_tracks});

    b.positions = from_f32(
        read_bytes(dir / arrays.at("tracks").at("file").get<std::string>(), nt * 12),
        "tracks.f32");
    std::vector<char> vis =
        read_bytes(dir / arrays.at("visibility").at("file").get<std::string>(), nt);
    b.visibility.assign(vis.begin(), vis.end());
    std::vector<char> labels = read_bytes(
        dir / arrays.at("labels").at("file").get<std::string>(), b.num_tracks);
    b.labels.assign(labels.begin(), labels.end());
    if (arrays.contains("colors")) {
        check_shape("colors", {b.num_tracks, 3});
        b.colors = from_f32(
            read_bytes(dir / arrays.at("colors").at("file").get<std::string>(),
                       static_cast<std::size_t>(b.num_tracks) * 12),
            "colors.f32");
    }
    b.validate();
    return b;
}

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::size_t nt = gt.true_positions.size();
    write_bytes_atomic(dir / "true_tracks.f32", to_f32(gt.true_positions).data(), nt * 12);
    write_bytes_atomic(dir / "true_visibility.u8", gt.true_visibility.data(), nt);
    write_bytes_atomic(dir / "canonical.f32", to_f32(gt.canonical).data(),
                       gt.canonical.size() * 12);

    json j = {{"format", kGroundTruthFormat},
              {"frames", gt.frames},
              {"tracks", gt.num_tracks},
              {"cluster_labels", gt.cluster_labels}};
    json artifacts = json::array();
    for (const auto& a : gt.artifacts)
        artifacts.push_back({{"kind", to_string(a.kind)}, {"tracks", a.tracks}});
    j["artifacts"] = artifacts;
    json poses = json::array();
    for (const auto& cluster : gt.cluster_poses) {
        json seq = json::array();
        for (const Pose& p : cluster) seq.push_back(pose_json(p));
        poses.push_back(seq);
    }
    j["cluster_poses"] = poses;
    json solids = json::array();
    for (const auto& frame : gt.solids) {
        json fs = json::array();
        for (const Obb& o : frame) {
            json ob = pose_json(o.pose);
            ob["half"] = {o.half[0], o.half[1], o.half[2]};
            fs.push_back(ob);
        }
        solids.push_back(fs);
    }
    j["solids"] = solids;
    write_file_atomic(dir / "gt.json", j.dump(2) + "\n");
}

GroundTruth read_ground_truth(const std::filesystem::path& dir) {
    std::ifstream in(dir / "gt.json");
    if (!in) throw std::runtime_error("cannot open " + (dir / "gt.json").string());
    json j = json::parse(in);
    if (j.at("format") != kGroundTruthFormat)
        throw std::runtime_error(dir.string() + ": unsupported ground-truth format");
    GroundTruth gt;
    gt.frames = j.at("frames");
    gt.num_tracks = j.at("tracks");
    gt.cluster_labels = j.at("cluster_labels").get<std::vector<int>>();
    for (const json& a : j.at("artifacts")) {
        ArtifactRecord r;
        r.kind = artifact_from_string(a.at("kind"));
        r.tracks = a.at("tracks").get<std::vector<int>>();
        gt.artifacts.push_back(std::move(r));
    }
    for (const json& cluster : j.at("cluster_poses")) {
        std::vector<Pose> seq;
        for (const json& p : cluster) seq.push_back(pose_from_json(p));
        gt.cluster_poses.push_back(std::move(seq));
    }
    for (const json& frame : j.at("solids")) {
        std::vector<Obb> fs;
        for (const json& o : frame) {
            Obb obb;
            obb.pose = pose_from_json(o);
            for (int c = 0; c < 3; ++c) obb.half[c] = o.at("half").at(c);
            fs.push_back(obb);
        }
        gt.solids.push_back(std::move(fs));
    }
    const std::size_t nt = static_cast<std::size_t>(gt.frames) * gt.num_tracks;
    gt.true_positions = from_f32(read_bytes(dir / "true_tracks.f32", nt * 12), "true_tracks");
    std::vector<char> vis = read_bytes(dir / "true_visibility.u8", nt);
    gt.true_visibility.assign(vis.begin(), vis.end());
    gt.canonical = from_f32(
        read_bytes(dir / "canonical.f32", static_cast<std::size_t>(gt.num_tracks) * 12),
        "canonical");
    return gt;
}

void write_model(const SceneModel& model, const std::filesystem::path& file) {
    json splats = json::array();
    for (const Splat& s : model.splats)
        splats.push_back({{"mu", {s.mu[0], s.mu[1], s.mu[2]}},
                          {"scale", {s.scale[0], s.scale[1], s.scale[2]}},
                          {"orientation",
                           {s.orientation[0], s.orientation[1], s.orientation[2],
                            s.orientation[3]}},
                          {"opacity", s.opacity},
                          {"color", {s.color[0], s.color[1], s.color[2]}},
                          {"foreground", s.is_foreground},
                          {"coeff_row", s.coeff_row},
                          {"source_track", s.source_track}});
    json coeffs = json::array();
    for (int r = 0; r < model.coeffs.rows(); ++r) {
        json row = json::array();
        for (int k = 0; k < model.coeffs.num_bases(); ++k) row.push_back(model.coeffs.beta(r, k));
        coeffs.push_back(row);
    }
    json bases = json::array();
    for (int k = 0; k < model.bases.num_bases; ++k) {
        json seq = json::array();
        for (int t = 0; t < model.bases.num_frames; ++t)
            seq.push_back(pose_json(model.bases.at(k, t)));
        bases.push_back(seq);
    }
    json j = {{"format", kModelFormat},
              {"frame_count", model.frame_count},
              {"t_cano", model.t_cano},
              {"num_bases", model.bases.num_bases},
              {"splats", splats},
              {"coeffs", coeffs},
              {"bases", bases}};
    write_file_atomic(file, j.dump() + "\n");
}

SceneModel read_model(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    json j = json::parse(in);
    if (j.at("format") != kModelFormat)
        throw std::runtime_error(file.string() + ": unsupported model format");
    SceneModel m;
    m.frame_count = j.at("frame_count");
    m.t_cano = j.at("t_cano");
    const int K = j.at("num_bases");
    m.bases.num_bases = K;
    m.bases.num_frames = m.frame_count;
    for (const json& seq : j.at("bases"))
        for (const json& p : seq) m.bases.grid.push_back(pose_from_json(p));
    if (m.bases.grid.size() != static_cast<std::size_t>(K) * m.frame_count)
        throw std::runtime_error(file.string() + ": basis grid shape mismatch");

    const json& coeffs = j.at("coeffs");
    m.coeffs.beta.resize(coeffs.size(), K);
    for (std::size_t r = 0; r < coeffs.size(); ++r)
        for (int k = 0; k < K; ++k) m.coeffs.beta(static_cast<int>(r), k) = coeffs[r][k];

    for (const json& s : j.at("splats")) {
        Splat sp;
        for (int c = 0; c < 3; ++c) {
            sp.mu[c] = s.at("mu").at(c);
            sp.scale[c] = s.at("scale").at(c);
            sp.color[c] = s.at("color").at(c);
        }
        for (int c = 0; c < 4; ++c) sp.orientation[c] = s.at("orientation").at(c);
        sp.opacity = s.at("opacity");
        sp.is_foreground = s.at("foreground");
        sp.coeff_row = s.at("coeff_row");
        sp.source_track = s.at("source_track");
        m.splats.push_back(sp);
    }
    m.validate();
    return m;
}

void write_depth_pgm(const DepthBuffer& buffer, const std::filesystem::path& file,
                     double near, double far) {
    if (!(near < far)) throw std::invalid_argument("write_depth_pgm: need near < far");
    std::string out = "P2\n" + std::to_string(buffer.width) + " " +
                      std::to_string(buffer.height) + "\n65535\n";
    for (int y = 0; y < buffer.height; ++y) {
        for (int x = 0; x < buffer.width; ++x) {
            double d = buffer.depth_at(x, y);
            double q = std::isfinite(d) ? (d - near) / (far - near) : 1.0;
            int v = static_cast<int>(std::lround(std::clamp(q, 0.0, 1.0) * 65535.0));
            out += std::to_string(v);
            out += (x + 1 == buffer.width) ? '\n' : ' ';
        }
    }
    write_file_atomic(file, out);
}

}  // namespace restage
