#include "restage/config.hpp"

#include <json.hpp>

#include <fstream>

namespace restage {

namespace {

using nlohmann::json;

json default_tree() {
    return json{
        {"optim",
         {{"epochs_init", 500},
          {"epochs_refine", 500},
          {"step_size", 1e-2},
          {"beta1", 0.9},
          {"beta2", 0.999},
          {"epsilon", 1e-8},
          {"workers", 0},
          {"seed", 0},
          {"multipliers",
           {{"basis_rot", 1.0}, {"basis_trans", 1.0}, {"coeffs", 1.0}, {"mu", 0.1}, {"opacity", 0.1}}}}},
        {"losses",
         {{"lambda_track", 1.0},
          {"lambda_rigid", 1e-3},
          {"lambda_smooth", 1e-2},
          {"knn_k", 8},
          {"num_bases", 20},
          {"tau0_rel", 0.01},
          {"tau1_rel", 0.05},
          {"tau0_abs", 0.0},
          {"tau1_abs", 0.0},
          {"taus_absolute", false}}},
        {"metrics",
         {{"voxel_rel", 0.01},
          {"edge_sample", 1000},
          {"gamma", 1.5},
          {"variance_floor", 1e-12}}},
        {"lemma", {{"pairs", 48}, {"rigidity_on_driving", true}}},
        {"fit", {{"track_loss_threshold", 0.05}}},
        {"synth",
         {{"kind", "two_link_arm"},
          {"num_points", 240},
          {"frames", 30},
          {"noise_sigma", 0.005},
          {"background_points", 80},
          {"motion_amplitude", 1.0},
          {"camera",
           {{"width", 96}, {"height", 96}, {"fx", 110.0}, {"distance", 4.0}}},
          {"occluder",
           {{"enabled", true},
            {"center", {0.45, 0.1, 2.6}},
            {"half_extents", {0.4, 0.5, 0.02}},
            {"sweep_amplitude", 0.0},
            {"num_points", 120}}},
          {"pair",
           {{"enabled", false},
            {"driving_frames", 30},
            {"driving_variant", 1},
            {"artifact", "none"}}}}}};
}

// Applies `input` over `base`, rejecting keys absent from the schema and
// scalar/type mismatches.
void merge_checked(json& base, const json& input, const std::string& path) {
    if (!input.is_object())
        throw ConfigError("config: expected an object at " + (path.empty() ? "<root>" : path));
    for (auto it = input.begin(); it != input.end(); ++it) {
        const std::string where = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("config: unknown key '" + where + "'");
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_checked(slot, it.value(), where);
        } else if (slot.is_array() && it.value().is_array()) {
            slot = it.value();
        } else if ((slot.is_number() && it.value().is_number()) ||
                   (slot.is_boolean() && it.value().is_boolean()) ||
                   (slot.is_string() && it.value().is_string())) {
            slot = it.value();
        } else {
            throw ConfigError("config: wrong type for '" + where + "'");
        }
    }
}

RunConfig from_tree(const json& j) {
    RunConfig c;
    const json& o = j.at("optim");
    c.optim.epochs_init = o.at("epochs_init");
    c.optim.epochs_refine = o.at("epochs_refine");
    c.optim.step_size = o.at("step_size");
    c.optim.beta1 = o.at("beta1");
    c.optim.beta2 = o.at("beta2");
    c.optim.epsilon = o.at("epsilon");
    c.optim.workers = o.at("workers");
    c.optim.seed = o.at("seed").get<uint64_t>();
    const json& m = o.at("multipliers");
    c.optim.group_multipliers = {m.at("basis_rot"), m.at("basis_trans"), m.at("coeffs"),
                                 m.at("mu"), m.at("opacity")};

    const json& l = j.at("losses");
    c.losses.lambda_track = l.at("lambda_track");
    c.losses.lambda_rigid = l.at("lambda_rigid");
    c.losses.lambda_smooth = l.at("lambda_smooth");
    c.losses.knn_k = l.at("knn_k");
    c.losses.num_bases = l.at("num_bases");
    c.tau0_rel = l.at("tau0_rel");
    c.tau1_rel = l.at("tau1_rel");
    c.taus_absolute = l.at("taus_absolute");
    if (c.taus_absolute) {
        c.losses.tau0 = l.at("tau0_abs");
        c.losses.tau1 = l.at("tau1_abs");
    }

    const json& me = j.at("metrics");
    c.voxel_rel = me.at("voxel_rel");
    c.edge_sample = me.at("edge_sample");
    c.metric_gamma = me.at("gamma");
    c.variance_floor = me.at("variance_floor");

    c.lemma_pairs = j.at("lemma").at("pairs");
    c.lemma_rigidity_on_driving = j.at("lemma").at("rigidity_on_driving");
    c.track_loss_threshold = j.at("fit").at("track_loss_threshold");

    const json& s = j.at("synth");
    c.synth.kind = scene_kind_from_string(s.at("kind"));
    c.synth.num_points = s.at("num_points");
    c.synth.frames = s.at("frames");
    c.synth.noise_sigma = s.at("noise_sigma");
    c.synth.background_points = s.at("background_points");
    c.synth.motion_amplitude = s.at("motion_amplitude");
    const json& cam = s.at("camera");
    c.synth.camera_width = cam.at("width");
    c.synth.camera_height = cam.at("height");
    c.synth.camera_fx = cam.at("fx");
    c.synth.camera_distance = cam.at("distance");
    const json& occ = s.at("occluder");
    c.synth.occluder.enabled = occ.at("enabled");
    for (int i = 0; i < 3; ++i) {
        c.synth.occluder.center[i] = occ.at("center").at(i);
        c.synth.occluder.half_extents[i] = occ.at("half_extents").at(i);
    }
    c.synth.occluder.sweep_amplitude = occ.at("sweep_amplitude");
    c.synth.occluder.num_points = occ.at("num_points");
    const json& pair = s.at("pair");
    c.pair_enabled = pair.at("enabled");
    c.driving_frames = pair.at("driving_frames");
    c.driving_variant = pair.at("driving_variant");
    c.artifact = artifact_from_string(pair.at("artifact"));
    return c;
}

json to_tree(const RunConfig& c) {
    json j = default_tree();
    json& o = j["optim"];
    o["epochs_init"] = c.optim.epochs_init;
    o["epochs_refine"] = c.optim.epochs_refine;
    o["step_size"] = c.optim.step_size;
    o["beta1"] = c.optim.beta1;
    o["beta2"] = c.optim.beta2;
    o["epsilon"] = c.optim.epsilon;
    o["workers"] = c.optim.workers;
    o["seed"] = c.optim.seed;
    o["multipliers"]["basis_rot"] = c.optim.group_multipliers[0];
    o["multipliers"]["basis_trans"] = c.optim.group_multipliers[1];
    o["multipliers"]["coeffs"] = c.optim.group_multipliers[2];
    o["multipliers"]["mu"] = c.optim.group_multipliers[3];
    o["multipliers"]["opacity"] = c.optim.group_multipliers[4];

    json& l = j["losses"];
    l["lambda_track"] = c.losses.lambda_track;
    l["lambda_rigid"] = c.losses.lambda_rigid;
    l["lambda_smooth"] = c.losses.lambda_smooth;
    l["knn_k"] = c.losses.knn_k;
    l["num_bases"] = c.losses.num_bases;
    l["tau0_rel"] = c.tau0_rel;
    l["tau1_rel"] = c.tau1_rel;
    l["taus_absolute"] = c.taus_absolute;
    l["tau0_abs"] = c.taus_absolute ? c.losses.tau0 : 0.0;
    l["tau1_abs"] = c.taus_absolute ? c.losses.tau1 : 0.0;

    json& me = j["metrics"];
    me["voxel_rel"] = c.voxel_rel;
    me["edge_sample"] = c.edge_sample;
    me["gamma"] = c.metric_gamma;
    me["variance_floor"] = c.variance_floor;

    j["lemma"]["pairs"] = c.lemma_pairs;
    j["lemma"]["rigidity_on_driving"] = c.lemma_rigidity_on_driving;
    j["fit"]["track_loss_threshold"] = c.track_loss_threshold;

    json& s = j["synth"];
    s["kind"] = to_string(c.synth.kind);
    s["num_points"] = c.synth.num_points;
    s["frames"] = c.synth.frames;
    s["noise_sigma"] = c.synth.noise_sigma;
    s["background_points"] = c.synth.background_points;
    s["motion_amplitude"] = c.synth.motion_amplitude;
    s["camera"]["width"] = c.synth.camera_width;
    s["camera"]["height"] = c.synth.camera_height;
    s["camera"]["fx"] = c.synth.camera_fx;
    s["camera"]["distance"] = c.synth.camera_distance;
    s["occluder"]["enabled"] = c.synth.occluder.enabled;
    s["occluder"]["center"] = {c.synth.occluder.center[0], c.synth.occluder.center[1],
                               c.synth.occluder.center[2]};
    s["occluder"]["half_extents"] = {c.synth.occluder.half_extents[0],
                                     c.synth.occluder.half_extents[1],
                                     c.synth.occluder.half_extents[2]};
    s["occluder"]["sweep_amplitude"] = c.synth.occluder.sweep_amplitude;
    s["occluder"]["num_points"] = c.synth.occluder.num_points;
    s["pair"]["enabled"] = c.pair_enabled;
    s["pair"]["driving_frames"] = c.driving_frames;
    s["pair"]["driving_variant"] = c.driving_variant;
    s["pair"]["artifact"] = to_string(c.artifact);
    return j;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    json input;
    try {
        input = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    json tree = default_tree();
    merge_checked(tree, input, "");
    try {
        RunConfig c = from_tree(tree);
        c.optim.validate();
        if (!c.taus_absolute && !(c.tau0_rel < c.tau1_rel))
            throw std::invalid_argument("tau0_rel must be < tau1_rel");
        if (c.taus_absolute && !(c.losses.tau0 < c.losses.tau1))
            throw std::invalid_argument("tau0_abs must be < tau1_abs");
        if (c.losses.lambda_track < 0 || c.losses.lambda_rigid < 0 ||
            c.losses.lambda_smooth < 0)
            throw std::invalid_argument("loss weights must be nonnegative");
        if (c.losses.num_bases < 1) throw std::invalid_argument("num_bases must be >= 1");
        c.synth.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig load_config(const std::string& arg) {
    if (arg == "default" || arg == "desk") return parse_config("{}");
    if (arg == "paper") {
        return parse_config(R"({"losses": {"num_bases": 100},
                                "synth": {"frames": 100, "num_points": 2000}})");
    }
    std::ifstream in(arg);
    if (!in) throw ConfigError("config: cannot open '" + arg + "' (not a file or preset name)");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

std::string dump_config(const RunConfig& config) { return to_tree(config).dump(2) + "\n"; }

LossWeights resolve_taus(const RunConfig& config, const SceneModel& model,
                         const SequenceBundle& bundle) {
    LossWeights w = config.losses;
    if (!config.taus_absolute) {
        double range = depth_range_at_canonical(model, bundle);
        w.tau0 = config.tau0_rel * range;
        w.tau1 = config.tau1_rel * range;
    }
    return w;
}

}  // namespace restage
