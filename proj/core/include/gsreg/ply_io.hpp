#pragma once

#include <filesystem>

#include "gsreg/gs_model.hpp"

namespace gsreg {

// Binary little-endian splat PLY. Per-vertex properties are looked up by name;
// nx/ny/nz are read and ignored. sh_degree is inferred from the number of
// f_rest_* properties (0 -> degree 0, 45 -> degree 3). Quaternions whose norm
// deviates from 1 by more than 1e-6 are normalised. Cameras are not part of
// the PLY; see load_cameras().
GaussianModel load_ply(const std::filesystem::path& path);

// Writes x, y, z, nx, ny, nz, f_dc_0..2, f_rest_0..44 (degree > 0 only),
// opacity, scale_0..2, rot_0..3 as float32. Normals are written as zeros.
void save_ply(const GaussianModel& model, const std::filesystem::path& path);

}  // namespace gsreg
