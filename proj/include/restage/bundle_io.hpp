#pragma once

#include <filesystem>
#include <string>

#include "restage/bundle.hpp"
#include "restage/scene.hpp"
#include "restage/synth.hpp"
#include "restage/visibility.hpp"

namespace restage {

inline constexpr const char* kBundleFormat = "restage-bundle/1";
inline constexpr const char* kGroundTruthFormat = "restage-gt/1";
inline constexpr const char* kModelFormat = "restage-model/1";

// Bundle directory: manifest.json plus raw little-endian arrays, t-major.
void write_bundle(const SequenceBundle& bundle, const std::filesystem::path& dir);
SequenceBundle read_bundle(const std::filesystem::path& dir);

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& dir);
GroundTruth read_ground_truth(const std::filesystem::path& dir);

void write_model(const SceneModel& model, const std::filesystem::path& file);
SceneModel read_model(const std::filesystem::path& file);

// ASCII PGM debug dump: P2 header, 16-bit range, depths quantized linearly
// over [near, far]; sentinel pixels map to the far value.
void write_depth_pgm(const DepthBuffer& buffer, const std::filesystem::path& file,
                     double near, double far);

// Write-temp-then-rename.
void write_file_atomic(const std::filesystem::path& file, const std::string& contents);

}  // namespace restage
