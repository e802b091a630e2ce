#include "gsreg/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "gsreg/error.hpp"

namespace gsreg {
namespace {

std::ofstream open_binary(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  return out;
}

unsigned char to_byte(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

GrayImage to_gray(const ColorImage& image) {
  GrayImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const Eigen::Vector3f& c = image.data[i];
    out.data[i] = 0.299f * c.x() + 0.587f * c.y() + 0.114f * c.z();
  }
  return out;
}

void write_depth_pgm(const DepthMap& depth, const std::filesystem::path& path) {
  std::ofstream out = open_binary(path);
  out << "P5\n" << depth.width << ' ' << depth.height << "\n65535\n";
  for (double d : depth.data) {
    const double mm = std::clamp(std::round(d * 1000.0), 0.0, 65535.0);
    const auto v = static_cast<unsigned>(mm);
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

void write_color_ppm(const ColorImage& image, const std::filesystem::path& path) {
  std::ofstream out = open_binary(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (const Eigen::Vector3f& c : image.data) {
    const char bytes[3] = {static_cast<char>(to_byte(c.x())), static_cast<char>(to_byte(c.y())),
                           static_cast<char>(to_byte(c.z()))};
    out.write(bytes, 3);
  }
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

void write_gray_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out = open_binary(path);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (float v : image.data) out.put(static_cast<char>(to_byte(v)));
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace gsreg
