#include "gsreg/json_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gsreg/error.hpp"

namespace gsreg {
namespace {

using nlohmann::json;

json parse_or_fail(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kFormat, std::string("malformed JSON: ") + e.what());
  }
}

double number_field(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_number()) {
    fail(ErrorCode::kFormat, std::string("missing numeric field ") + key);
  }
  return obj.at(key).get<double>();
}

template <int N>
Eigen::Matrix<double, N, 1> array_field(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_array() || obj.at(key).size() != N) {
    fail(ErrorCode::kFormat,
         std::string("field ") + key + " must be an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    const json& e = obj.at(key)[i];
    if (!e.is_number()) fail(ErrorCode::kFormat, std::string("non-numeric entry in ") + key);
    v[i] = e.get<double>();
  }
  return v;
}

Eigen::Matrix3d row_major(const Eigen::Matrix<double, 9, 1>& v) {
  Eigen::Matrix3d R;
  R << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return R;
}

}  // namespace

std::vector<CameraPose> parse_cameras(std::string_view json_text) {
  const json doc = parse_or_fail(json_text);
  if (!doc.is_array()) fail(ErrorCode::kFormat, "camera file must be a JSON array");
  std::vector<CameraPose> cameras;
  cameras.reserve(doc.size());
  for (const json& c : doc) {
    if (!c.is_object()) fail(ErrorCode::kFormat, "camera entry must be an object");
    CameraPose cam;
    cam.rotation = row_major(array_field<9>(c, "rotation"));
    cam.translation = array_field<3>(c, "translation");
    cam.fx = number_field(c, "fx");
    cam.fy = number_field(c, "fy");
    cam.cx = number_field(c, "cx");
    cam.cy = number_field(c, "cy");
    cam.width = static_cast<int>(number_field(c, "width"));
    cam.height = static_cast<int>(number_field(c, "height"));
    cam.validate();
    cameras.push_back(cam);
  }
  return cameras;
}

std::string cameras_to_json(const std::vector<CameraPose>& cameras) {
  json doc = json::array();
  for (const CameraPose& cam : cameras) {
    json c;
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) rot.push_back(cam.rotation(r, k));
    c["rotation"] = rot;
    c["translation"] = {cam.translation.x(), cam.translation.y(), cam.translation.z()};
    c["fx"] = cam.fx;
    c["fy"] = cam.fy;
    c["cx"] = cam.cx;
    c["cy"] = cam.cy;
    c["width"] = cam.width;
    c["height"] = cam.height;
    doc.push_back(c);
  }
  return doc.dump(2);
}

std::vector<CameraPose> load_cameras(const std::filesystem::path& path) {
  return parse_cameras(read_text_file(path));
}

void save_cameras(const std::vector<CameraPose>& cameras, const std::filesystem::path& path) {
  write_text_file(path, cameras_to_json(cameras));
}

Sim3 parse_sim3(std::string_view json_text) {
  const json doc = parse_or_fail(json_text);
  if (!doc.is_object()) fail(ErrorCode::kFormat, "transform file must be a JSON object");
  const double s = number_field(doc, "scale");
  const Eigen::Matrix3d R = row_major(array_field<9>(doc, "rotation"));
  const Eigen::Vector3d T = array_field<3>(doc, "translation");
  // Files carry finite-precision decimal text; re-project onto SO(3).
  if (!is_rotation(R, 1e-6)) fail(ErrorCode::kFormat, "rotation is not orthonormal");
  return Sim3::create(s, orthonormalize(R), T);
}

Sim3 load_sim3(const std::filesystem::path& path) { return parse_sim3(read_text_file(path)); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace gsreg
