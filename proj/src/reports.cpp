#include "restage/reports.hpp"

#include <json.hpp>

#include <fstream>

#include "restage/bundle_io.hpp"

namespace restage {

namespace {

using nlohmann::json;

json breakdown_json(const LossBreakdown& b) {
    return json{{"track", b.track},
                {"rigidity", b.rigidity},
                {"smoothness", b.smoothness},
                {"total", b.total}};
}

json stage_json(const FitReport& r) {
    json history = json::array();
    for (const LossBreakdown& b : r.history) history.push_back(breakdown_json(b));
    json j = {{"epochs", r.history.size()},
              {"history", history},
              {"final", breakdown_json(r.final_losses)}};
    if (r.restored_best_epoch >= 0) j["restored_best_epoch"] = r.restored_best_epoch;
    return j;
}

}  // namespace

void write_fit_report(const FitReport& init, const FitReport* refine,
                      const std::filesystem::path& file) {
    json j = {{"init", stage_json(init)}};
    if (refine) j["refine"] = stage_json(*refine);
    write_file_atomic(file, j.dump(2) + "\n");
}

void write_metrics_report(const MetricsReport& report, const std::filesystem::path& file) {
    json j = {{"volume_consistency", report.volume_consistency},
              {"edge_consistency", report.edge_consistency},
              {"per_frame_volumes", report.per_frame_volumes},
              {"voxel_size", report.voxel_size},
              {"sample_seed", report.sample_seed}};
    if (report.tracking_l1) j["tracking_l1"] = *report.tracking_l1;
    if (report.tracking_l1_full) j["tracking_l1_full"] = *report.tracking_l1_full;
    write_file_atomic(file, j.dump(2) + "\n");
}

void write_variance_report(const VarianceReport& report, const std::filesystem::path& file) {
    json j = {{"pairs", report.pair_count},
              {"seed", report.seed},
              {"var_joint_mean", report.var_joint_mean},
              {"var_solo_mean", report.var_solo_mean},
              {"ratio", report.ratio},
              {"per_pair_joint", report.per_pair_joint},
              {"per_pair_solo", report.per_pair_solo}};
    write_file_atomic(file, j.dump(2) + "\n");
}

void write_gradcheck_report(const GradCheckReport& report, const std::filesystem::path& file) {
    json entries = json::array();
    for (const auto& e : report.entries)
        entries.push_back(
            {{"term", e.term}, {"group", e.group}, {"max_rel_error", e.max_rel_error}});
    json j = {{"worst", report.worst}, {"entries", entries}};
    write_file_atomic(file, j.dump(2) + "\n");
}

void append_timing(const std::filesystem::path& file, const std::string& label,
                   double seconds) {
    std::ofstream out(file, std::ios::app);
    out << label << ": " << seconds << " s\n";
}

}  // namespace restage
