#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "shapediff/geom.hpp"

namespace shapediff {

// OFF: "OFF" header (counts may share its line), counts line, vertex lines,
// face lines "k i0 .. ik-1". Polygons with k > 3 are fan-triangulated.
// '#' starts a comment. Errors are ParseError with the offending line.
TriangleMesh parse_off(std::string_view text);

// ASCII PLY vertex element with x, y, z properties. Binary variants raise
// UnsupportedFormatError.
PointCloud parse_ply_ascii(std::string_view text);

// One "x y z" point per non-blank line.
PointCloud parse_xyz(std::string_view text);

std::string to_off(const TriangleMesh& mesh);
std::string to_ply_ascii(const PointCloud& pc);
// 9 significant digits per coordinate.
std::string to_xyz(const PointCloud& pc);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Dispatches on extension (.xyz, .ply, .off). Meshes are surface-sampled with
// `mesh_points` points using `seed`.
PointCloud load_point_cloud(const std::filesystem::path& path, std::size_t mesh_points,
                            std::uint64_t seed);

}  // namespace shapediff
