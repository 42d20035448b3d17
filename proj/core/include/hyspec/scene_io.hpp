#pragma once

#include <filesystem>
#include <string>

#include "hyspec/scene.hpp"

namespace hyspec {

// Scene file layout: `<stem>.bin` holds H*W*B little-endian float32 values in
// band-interleaved-by-pixel order; `<stem>.json` is the sidecar header
// {"height", "width", "bands", "gsd_m", "wavelengths_um": [...]}.
// `path` may name either file or the common stem.
void write_scene(const std::filesystem::path& path, const HyperspectralScene& scene);
HyperspectralScene read_scene(const std::filesystem::path& path);

// Ground truth JSON:
// {"polygons": [{"vertices": [[x, y], ...], "land_cover": k, "land_use": u,
//                "group": g | null}, ...]}
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::filesystem::path& path);

// Writes `contents` to a sibling temporary file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace hyspec
