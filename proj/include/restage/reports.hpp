#pragma once

#include <filesystem>

#include "restage/metrics.hpp"
#include "restage/optim.hpp"
#include "restage/restage.hpp"

namespace restage {

// Deterministic report files; wall-clock timings go to a separate
// timing.log so reports stay byte-reproducible.
void write_fit_report(const FitReport& init, const FitReport* refine,
                      const std::filesystem::path& file);
void write_metrics_report(const MetricsReport& report, const std::filesystem::path& file);
void write_variance_report(const VarianceReport& report, const std::filesystem::path& file);
void write_gradcheck_report(const GradCheckReport& report, const std::filesystem::path& file);
void append_timing(const std::filesystem::path& file, const std::string& label,
                   double seconds);

}  // namespace restage
