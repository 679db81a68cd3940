#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "skelmorph/geometry.hpp"

namespace skelmorph::io {

enum class CloudFormat { xyz, ply_ascii, off };

// "xyz", "ply" / "ply_ascii", "off"; throws Error(parameter) otherwise.
CloudFormat parse_cloud_format(std::string_view name);

// Format implied by the file extension.
CloudFormat format_from_extension(const std::filesystem::path& path);

PointCloud read_point_cloud(std::istream& in, CloudFormat format);
PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_point_cloud(const std::filesystem::path& path);

// "x y z [nx ny nz]" per line.
std::string format_xyz(const PointCloud& cloud);

// Shortest round-trip decimal text for a double.
std::string format_real(double v);

// Writes through a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

std::string read_text(const std::filesystem::path& path);

// Whitespace tokens of one line.
std::vector<std::string> split_ws(const std::string& line);
// Finite decimal number; parse error naming the line otherwise.
double parse_real(const std::string& token, std::size_t line_no);

}  // namespace skelmorph::io
