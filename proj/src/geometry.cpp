#include "primexec/geometry.hpp"

#include "primexec/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>

namespace primexec {

using nlohmann::json;

namespace {

bool is_unit(const Quat& q) { return std::abs(q.norm() - 1.0) <= kUnitTolerance; }

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

Quat canonical(const Quat& q) {
  const double c[4] = {q.w(), q.x(), q.y(), q.z()};
  for (double v : c) {
    if (v > 0.0) return q;
    if (v < 0.0) return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

bool same_rotation(const Quat& a, const Quat& b, double tol) {
  return std::abs(std::abs(a.dot(b)) - 1.0) <= tol;
}

// ---------------------------------------------------------------- Pose

Pose::Pose() : position_(Vec3::Zero()), orientation_(Quat::Identity()) {}

Pose::Pose(Vec3 position, Quat orientation) : position_(std::move(position)) {
  if (!finite(position_) || !orientation.coeffs().allFinite()) throw RangeError("pose has non-finite values");
  if (!is_unit(orientation)) throw RangeError("pose orientation is not a unit quaternion");
  orientation_ = canonical(orientation);
}

Pose Pose::identity_at(const Vec3& position) { return Pose(position, Quat::Identity()); }

Pose Pose::compose(const Pose& other) const {
  Quat q = (orientation_ * other.orientation_).normalized();
  return Pose(position_ + orientation_ * other.position_, q);
}

Pose Pose::inverse() const {
  Quat inv = orientation_.conjugate();
  return Pose(-(inv * position_), inv);
}

bool operator==(const Pose& a, const Pose& b) {
  return a.position_ == b.position_ && a.orientation_.coeffs() == b.orientation_.coeffs();
}

// ---------------------------------------------------------------- spatial forms

Destination::Destination(double x, double y, double d) : x_(x), y_(y), d_(d) {
  if (!(x >= 0.0 && x <= 1.0)) throw RangeError("destination x outside [0, 1]: " + std::to_string(x));
  if (!(y >= 0.0 && y <= 1.0)) throw RangeError("destination y outside [0, 1]: " + std::to_string(y));
  if (!(d > 0.0) || !std::isfinite(d)) throw RangeError("destination depth must be positive: " + std::to_string(d));
}

Direction::Direction(const Vec3& v) : v_(v) {
  if (!finite(v) || std::abs(v.norm() - 1.0) > kUnitTolerance) throw RangeError("direction is not a unit vector");
}

Trajectory::Trajectory(std::vector<Pose> waypoints) : waypoints_(std::move(waypoints)) {
  if (waypoints_.empty()) throw RangeError("trajectory must have at least one waypoint");
}

// ---------------------------------------------------------------- camera

CameraModel::CameraModel() : rotation_(Quat::Identity()), translation_(Vec3::Zero()) {}

CameraModel::CameraModel(Intrinsics intrinsics, Quat world_to_camera_rotation, Vec3 world_to_camera_translation)
    : intrinsics_(intrinsics), translation_(std::move(world_to_camera_translation)) {
  if (!(intrinsics_.fx > 0.0) || !(intrinsics_.fy > 0.0)) throw RangeError("focal lengths must be positive");
  if (!(intrinsics_.cx >= 0.0 && intrinsics_.cx <= 1.0) || !(intrinsics_.cy >= 0.0 && intrinsics_.cy <= 1.0)) {
    throw RangeError("principal point outside [0, 1]");
  }
  if (!is_unit(world_to_camera_rotation)) throw RangeError("extrinsic rotation is not a unit quaternion");
  if (!finite(translation_)) throw RangeError("extrinsic translation is not finite");
  rotation_ = canonical(world_to_camera_rotation);
}

CameraModel CameraModel::look_at(const Intrinsics& intrinsics, const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) throw DegenerateError("look_at: viewing direction parallel to up");
  x.normalize();
  const Vec3 y = z.cross(x);
  Eigen::Matrix3d r;  // rows are camera axes in world coordinates
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  Quat q(r);
  q.normalize();
  return CameraModel(intrinsics, q, -(q * eye));
}

Vec3 CameraModel::to_camera(const Vec3& world) const { return rotation_ * world + translation_; }

Vec3 CameraModel::to_world(const Vec3& camera) const { return rotation_.conjugate() * (camera - translation_); }

bool operator==(const CameraModel& a, const CameraModel& b) {
  return a.intrinsics_ == b.intrinsics_ && a.rotation_.coeffs() == b.rotation_.coeffs() &&
         a.translation_ == b.translation_;
}

Destination project(const CameraModel& camera, const Vec3& world_point) {
  const Vec3 pc = camera.to_camera(world_point);
  if (!(pc.z() > 0.0)) throw BehindCameraError("point is behind the camera (Zc = " + std::to_string(pc.z()) + ")");
  const auto& k = camera.intrinsics();
  const double x = k.cx + k.fx * (pc.x() / pc.z());
  const double y = k.cy + k.fy * (pc.y() / pc.z());
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
    throw OutOfFrameError("point projects outside the image (" + std::to_string(x) + ", " + std::to_string(y) + ")");
  }
  return Destination(x, y, pc.z());
}

Vec3 unproject(const CameraModel& camera, const Destination& dest) {
  const auto& k = camera.intrinsics();
  const Vec3 pc((dest.x() - k.cx) / k.fx * dest.d(), (dest.y() - k.cy) / k.fy * dest.d(), dest.d());
  return camera.to_world(pc);
}

// ---------------------------------------------------------------- motion

Trajectory interpolate_linear(const Pose& start, const Pose& end, double max_step) {
  if (!(max_step > 0.0)) throw RangeError("max_step must be positive");
  const Vec3 delta = end.position() - start.position();
  const double length = delta.norm();
  auto segments = static_cast<std::size_t>(std::ceil(length / max_step));
  if (segments == 0) {
    // Coincident positions: a pure rotation still needs one step.
    if (start == end) return Trajectory({start});
    segments = 1;
  }
  std::vector<Pose> out;
  out.reserve(segments + 1);
  out.push_back(start);
  for (std::size_t i = 1; i < segments; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(segments);
    Quat q = start.orientation().slerp(t, end.orientation()).normalized();
    out.emplace_back(start.position() + t * delta, q);
  }
  out.push_back(end);
  return Trajectory(std::move(out));
}

Direction derive_direction(const Pose& start, const Pose& end) {
  const Vec3 delta = end.position() - start.position();
  const double n = delta.norm();
  if (n <= 1e-9) throw DegenerateError("start and end positions coincide");
  return Direction(delta / n);
}

// ---------------------------------------------------------------- json

namespace {

const json& field(const json& j, std::string_view path, const char* key) {
  if (!j.is_object()) throw SchemaError(std::string(path), "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string(path) + "/" + key, "missing field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

std::vector<double> numbers(const json& j, std::string_view path, std::size_t n) {
  if (!j.is_array() || j.size() != n) {
    throw SchemaError(std::string(path), "expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(number(j[i], std::string(path) + "/" + std::to_string(i)));
  return out;
}

template <typename F>
auto rethrow_as_schema(std::string_view path, F&& f) {
  try {
    return f();
  } catch (const RangeError& e) {
    throw SchemaError(std::string(path), e.what());
  }
}

}  // namespace

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j, std::string_view path) {
  auto v = numbers(j, path, 3);
  return Vec3(v[0], v[1], v[2]);
}

json to_json(const Pose& p) {
  const auto& q = p.orientation();
  return json{{"position", to_json(p.position())}, {"orientation", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

Pose pose_from_json(const json& j, std::string_view path) {
  const std::string base(path);
  Vec3 pos = vec3_from_json(field(j, path, "position"), base + "/position");
  auto q = numbers(field(j, path, "orientation"), base + "/orientation", 4);
  return rethrow_as_schema(base, [&] { return Pose(pos, Quat(q[0], q[1], q[2], q[3])); });
}

json to_json(const Destination& d) { return json::array({d.x(), d.y(), d.d()}); }

Destination destination_from_json(const json& j, std::string_view path) {
  auto v = numbers(j, path, 3);
  return rethrow_as_schema(path, [&] { return Destination(v[0], v[1], v[2]); });
}

json to_json(const CameraModel& c) {
  const auto& k = c.intrinsics();
  const auto& q = c.rotation();
  return json{{"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}},
              {"extrinsics",
               {{"rotation", json::array({q.w(), q.x(), q.y(), q.z()})}, {"translation", to_json(c.translation())}}}};
}

CameraModel camera_from_json(const json& j, std::string_view path) {
  const std::string base(path);
  const json& ij = field(j, path, "intrinsics");
  Intrinsics k;
  k.fx = number(field(ij, base + "/intrinsics", "fx"), base + "/intrinsics/fx");
  k.fy = number(field(ij, base + "/intrinsics", "fy"), base + "/intrinsics/fy");
  k.cx = number(field(ij, base + "/intrinsics", "cx"), base + "/intrinsics/cx");
  k.cy = number(field(ij, base + "/intrinsics", "cy"), base + "/intrinsics/cy");
  const json& ej = field(j, path, "extrinsics");
  auto q = numbers(field(ej, base + "/extrinsics", "rotation"), base + "/extrinsics/rotation", 4);
  Vec3 t = vec3_from_json(field(ej, base + "/extrinsics", "translation"), base + "/extrinsics/translation");
  return rethrow_as_schema(base, [&] { return CameraModel(k, Quat(q[0], q[1], q[2], q[3]), t); });
}

json calibration_document(const CameraModel& c) {
  json doc = to_json(c);
  doc["schema"] = 1;
  doc["kind"] = "camera_calibration";
  return doc;
}

CameraModel load_calibration(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", e.what());
  }
  const json& schema = field(doc, "", "schema");
  if (!schema.is_number_integer() || schema.get<int>() != 1) throw SchemaError("/schema", "unsupported schema version");
  const json& kind = field(doc, "", "kind");
  if (kind != "camera_calibration") throw SchemaError("/kind", "expected \"camera_calibration\"");
  return camera_from_json(doc, "");
}

}  // namespace primexec
