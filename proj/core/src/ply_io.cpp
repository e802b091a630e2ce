#include "gsreg/ply_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsreg/error.hpp"

namespace gsreg {
namespace {

static_assert(std::endian::native == std::endian::little,
              "splat PLY I/O assumes a little-endian host");

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUInt8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUInt16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUInt32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

ScalarType parse_type(const std::string& s) {
  static const std::map<std::string, ScalarType> kTypes = {
      {"char", ScalarType::kInt8},     {"int8", ScalarType::kInt8},
      {"uchar", ScalarType::kUInt8},   {"uint8", ScalarType::kUInt8},
      {"short", ScalarType::kInt16},   {"int16", ScalarType::kInt16},
      {"ushort", ScalarType::kUInt16}, {"uint16", ScalarType::kUInt16},
      {"int", ScalarType::kInt32},     {"int32", ScalarType::kInt32},
      {"uint", ScalarType::kUInt32},   {"uint32", ScalarType::kUInt32},
      {"float", ScalarType::kFloat32}, {"float32", ScalarType::kFloat32},
      {"double", ScalarType::kFloat64}, {"float64", ScalarType::kFloat64},
  };
  auto it = kTypes.find(s);
  if (it == kTypes.end()) fail(ErrorCode::kFormat, "unsupported PLY property type '" + s + "'");
  return it->second;
}

template <typename T>
T read_raw(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

float read_as_float(const char* p, ScalarType t) {
  switch (t) {
    case ScalarType::kInt8: return static_cast<float>(read_raw<std::int8_t>(p));
    case ScalarType::kUInt8: return static_cast<float>(read_raw<std::uint8_t>(p));
    case ScalarType::kInt16: return static_cast<float>(read_raw<std::int16_t>(p));
    case ScalarType::kUInt16: return static_cast<float>(read_raw<std::uint16_t>(p));
    case ScalarType::kInt32: return static_cast<float>(read_raw<std::int32_t>(p));
    case ScalarType::kUInt32: return static_cast<float>(read_raw<std::uint32_t>(p));
    case ScalarType::kFloat32: return read_raw<float>(p);
    case ScalarType::kFloat64: return static_cast<float>(read_raw<double>(p));
  }
  return 0.0f;
}

struct Header {
  std::size_t vertex_count = 0;
  std::size_t stride = 0;
  std::vector<Property> properties;
};

Header parse_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") {
    fail(ErrorCode::kFormat, "missing 'ply' magic");
  }
  Header header;
  bool format_seen = false;
  bool in_vertex = false;
  bool vertex_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string keyword;
    ss >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "binary_little_endian") {
        fail(ErrorCode::kFormat, "unsupported PLY format '" + fmt + "' (format)");
      }
      format_seen = true;
    } else if (keyword == "element") {
      std::string name;
      std::size_t count = 0;
      ss >> name >> count;
      if (name == "vertex") {
        if (vertex_seen) fail(ErrorCode::kFormat, "duplicate vertex element");
        header.vertex_count = count;
        in_vertex = true;
        vertex_seen = true;
      } else {
        if (!vertex_seen) {
          fail(ErrorCode::kFormat, "element '" + name + "' precedes vertex element");
        }
        in_vertex = false;
      }
    } else if (keyword == "property") {
      std::string type;
      ss >> type;
      if (type == "list") {
        if (in_vertex) fail(ErrorCode::kFormat, "list property in vertex element");
        continue;
      }
      std::string name;
      ss >> name;
      if (name.empty()) fail(ErrorCode::kFormat, "malformed property line");
      if (in_vertex) {
        const ScalarType t = parse_type(type);
        header.properties.push_back({name, t, header.stride});
        header.stride += type_size(t);
      }
    } else if (keyword == "end_header") {
      if (!format_seen) fail(ErrorCode::kFormat, "missing format line (format)");
      if (!vertex_seen) fail(ErrorCode::kFormat, "missing vertex element (vertex)");
      return header;
    } else if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) {
      continue;
    } else {
      fail(ErrorCode::kFormat, "unexpected header keyword '" + keyword + "'");
    }
  }
  fail(ErrorCode::kFormat, "missing end_header");
}

}  // namespace

GaussianModel load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");

  const Header header = parse_header(in);
  std::map<std::string, const Property*> by_name;
  for (const Property& p : header.properties) by_name[p.name] = &p;

  auto require = [&](const std::string& name) -> const Property& {
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorCode::kFormat, "missing required property " + name);
    return *it->second;
  };

  const Property* pos[3] = {&require("x"), &require("y"), &require("z")};
  const Property* dc[3] = {&require("f_dc_0"), &require("f_dc_1"), &require("f_dc_2")};
  const Property& opacity = require("opacity");
  const Property* scale[3] = {&require("scale_0"), &require("scale_1"), &require("scale_2")};
  const Property* rot[4] = {&require("rot_0"), &require("rot_1"), &require("rot_2"),
                            &require("rot_3")};

  std::size_t rest_count = 0;
  while (by_name.count("f_rest_" + std::to_string(rest_count))) ++rest_count;
  for (const Property& p : header.properties) {
    if (p.name.rfind("f_rest_", 0) == 0 &&
        (p.name.size() == 7 ||
         p.name.find_first_not_of("0123456789", 7) != std::string::npos ||
         std::stoul(p.name.substr(7)) >= rest_count)) {
      fail(ErrorCode::kFormat, "non-contiguous spherical harmonic property " + p.name);
    }
  }
  if (rest_count != 0 && rest_count != static_cast<std::size_t>(kShRestCount)) {
    fail(ErrorCode::kFormat, "unsupported f_rest count " + std::to_string(rest_count) +
                                 " (property f_rest_*)");
  }
  std::vector<const Property*> rest(rest_count);
  for (std::size_t k = 0; k < rest_count; ++k) rest[k] = by_name["f_rest_" + std::to_string(k)];

  GaussianModel model;
  model.sh_degree = rest_count == 0 ? 0 : 3;
  model.gaussians.resize(header.vertex_count);

  std::vector<char> buffer(header.stride * header.vertex_count);
  in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
    fail(ErrorCode::kFormat, "truncated vertex data (vertex)");
  }

  for (std::size_t i = 0; i < header.vertex_count; ++i) {
    const char* row = buffer.data() + i * header.stride;
    auto get = [row](const Property* p) { return read_as_float(row + p->offset, p->type); };
    Gaussian& g = model.gaussians[i];
    for (int a = 0; a < 3; ++a) {
      g.position[a] = get(pos[a]);
      g.sh_dc[a] = get(dc[a]);
      g.log_scale[a] = get(scale[a]);
    }
    g.opacity_logit = get(&opacity);
    for (int a = 0; a < 4; ++a) g.rotation[a] = get(rot[a]);
    for (std::size_t k = 0; k < rest_count; ++k) g.sh_rest[k] = get(rest[k]);

    if (!g.log_scale.allFinite()) fail(ErrorCode::kFormat, "non-finite property scale");
    const double norm = g.rotation.cast<double>().norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      fail(ErrorCode::kFormat, "degenerate quaternion in property rot");
    }
    if (std::abs(norm - 1.0) > 1e-6) {
      g.rotation = (g.rotation.cast<double>() / norm).cast<float>();
    }
  }
  return model;
}

void save_ply(const GaussianModel& model, const std::filesystem::path& path) {
  if (model.empty()) fail(ErrorCode::kEmptyModel, "empty model");

  const bool with_rest = model.sh_degree > 0;
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n";
  header << "element vertex " << model.gaussians.size() << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    header << "property float " << name << "\n";
  }
  if (with_rest) {
    for (int k = 0; k < kShRestCount; ++k) header << "property float f_rest_" << k << "\n";
  }
  for (const char* name :
       {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
    header << "property float " << name << "\n";
  }
  header << "end_header\n";

  const std::size_t floats_per_vertex = 9 + (with_rest ? kShRestCount : 0) + 8;
  std::vector<float> data;
  data.reserve(floats_per_vertex * model.gaussians.size());
  for (const Gaussian& g : model.gaussians) {
    data.insert(data.end(), {g.position.x(), g.position.y(), g.position.z(), 0.0f, 0.0f, 0.0f,
                             g.sh_dc.x(), g.sh_dc.y(), g.sh_dc.z()});
    if (with_rest) data.insert(data.end(), g.sh_rest.begin(), g.sh_rest.end());
    data.insert(data.end(), {g.opacity_logit, g.log_scale.x(), g.log_scale.y(), g.log_scale.z(),
                             g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]});
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace gsreg
