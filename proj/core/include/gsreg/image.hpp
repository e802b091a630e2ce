#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace gsreg {

// Row-major single-channel raster.
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, T fill = T{}) : width(w), height(h), data(std::size_t(w) * h, fill) {}

  T& at(int x, int y) { return data[std::size_t(y) * width + x]; }
  const T& at(int x, int y) const { return data[std::size_t(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

// Camera-frame z per pixel, 0 where nothing was drawn.
using DepthMap = Raster<double>;
using GrayImage = Raster<float>;
using ColorImage = Raster<Eigen::Vector3f>;

GrayImage to_gray(const ColorImage& image);

// 16-bit binary PGM with depth quantised to millimetres (scene units taken as
// metres), saturating at 65535.
void write_depth_pgm(const DepthMap& depth, const std::filesystem::path& path);
// 8-bit binary PPM.
void write_color_ppm(const ColorImage& image, const std::filesystem::path& path);
// 8-bit PGM of a [0, 1] field, e.g. a confidence map.
void write_gray_pgm(const GrayImage& image, const std::filesystem::path& path);

}  // namespace gsreg
