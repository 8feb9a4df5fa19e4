#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "deltas/depth_tools.hpp"
#include "deltas/geometry.hpp"
#include "deltas/interest_points.hpp"
#include "deltas/matching.hpp"

namespace deltas {

/// Shortest round-trip decimal rendering; locale-free and deterministic.
std::string format_double(double value);

// Score map: 12-byte header (magic "SMAP", u32 height, u32 width), then
// row-major little-endian f32 values.
ScoreMap read_score_map(const std::filesystem::path& path);
void write_score_map(const std::filesystem::path& path, const ScoreMap& map);

// Descriptor field: 16-byte header (magic "DESC", u32 h, u32 w, u32 N), then
// row-major little-endian f32 values. The stride is declared by the run
// configuration, not the file.
DescriptorField read_descriptor_field(const std::filesystem::path& path,
                                      int stride);
void write_descriptor_field(const std::filesystem::path& path,
                            const DescriptorField& field);

// PFM grayscale: "Pf", width height, scale -1.0 (little-endian), rows
// bottom-to-top. Zero-valued pixels are invalid; negative or non-finite
// values are rejected.
DepthImage read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const DepthImage& image);

// Camera trajectory: JSON array of per-view objects with fields "K" (9
// row-major numbers), "R" (9 row-major numbers), "t" (3 numbers), "width",
// "height". Missing fields are errors.
std::vector<CameraView> read_cameras_json(const std::filesystem::path& path);
void write_cameras_json(const std::filesystem::path& path,
                        const std::vector<CameraView>& views);

std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& label, const MetricsReport& r);

}  // namespace deltas
