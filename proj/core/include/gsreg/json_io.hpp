#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gsreg/geometry.hpp"

namespace gsreg {

// Camera file: JSON array of
//   {rotation: 9 floats row-major (world-from-camera), translation: 3 floats,
//    fx, fy, cx, cy, width, height}
std::vector<CameraPose> parse_cameras(std::string_view json_text);
std::string cameras_to_json(const std::vector<CameraPose>& cameras);
std::vector<CameraPose> load_cameras(const std::filesystem::path& path);
void save_cameras(const std::vector<CameraPose>& cameras, const std::filesystem::path& path);

// Transform file: {scale, rotation: 9 floats row-major, translation: 3 floats, ...}.
// Extra keys (stage, diagnostics) are ignored when reading.
Sim3 parse_sim3(std::string_view json_text);
Sim3 load_sim3(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace gsreg
