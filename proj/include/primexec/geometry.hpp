#pragma once

#include <Eigen/Geometry>
#include <nlohmann/json_fwd.hpp>

#include <string_view>
#include <vector>

namespace primexec {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Tolerance on quaternion and direction norms.
inline constexpr double kUnitTolerance = 1e-9;

/// Returns q or -q so that w >= 0 (ties broken on the first nonzero of x, y, z).
Quat canonical(const Quat& q);

/// Same rotation, ignoring sign. Both must be unit.
bool same_rotation(const Quat& a, const Quat& b, double tol = 1e-12);

/// End-effector pose in the world frame. Orientation is kept canonical (w >= 0).
class Pose {
 public:
  Pose();
  /// Throws RangeError when the orientation is not unit within kUnitTolerance.
  Pose(Vec3 position, Quat orientation);

  static Pose identity_at(const Vec3& position);

  const Vec3& position() const noexcept { return position_; }
  const Quat& orientation() const noexcept { return orientation_; }

  Pose with_position(const Vec3& p) const { return Pose(p, orientation_); }

  /// this * other, composing rigid transforms.
  Pose compose(const Pose& other) const;
  Pose inverse() const;

  friend bool operator==(const Pose& a, const Pose& b);

 private:
  Vec3 position_;
  Quat orientation_;
};

/// Normalized image triplet: x right, y down, origin top-left, d = camera-frame depth in meters.
class Destination {
 public:
  /// Throws RangeError unless 0 <= x,y <= 1 and d > 0.
  Destination(double x, double y, double d);

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double d() const noexcept { return d_; }

  friend bool operator==(const Destination&, const Destination&) = default;

 private:
  double x_;
  double y_;
  double d_;
};

/// Unit 3-vector in the world frame.
class Direction {
 public:
  /// Throws RangeError when |v| differs from 1 by more than kUnitTolerance.
  explicit Direction(const Vec3& v);
  const Vec3& vector() const noexcept { return v_; }
  friend bool operator==(const Direction& a, const Direction& b) { return a.v_ == b.v_; }

 private:
  Vec3 v_;
};

/// Nonempty sequence of finite poses.
class Trajectory {
 public:
  /// Throws RangeError for an empty list or non-finite coordinates.
  explicit Trajectory(std::vector<Pose> waypoints);

  const std::vector<Pose>& waypoints() const noexcept { return waypoints_; }
  std::size_t size() const noexcept { return waypoints_.size(); }
  const Pose& front() const { return waypoints_.front(); }
  const Pose& back() const { return waypoints_.back(); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<Pose> waypoints_;
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Pinhole camera with normalized image coordinates and a world->camera rigid transform.
class CameraModel {
 public:
  CameraModel();
  /// Throws RangeError for non-positive focal lengths, principal point outside [0,1], or non-unit rotation.
  CameraModel(Intrinsics intrinsics, Quat world_to_camera_rotation, Vec3 world_to_camera_translation);

  /// Camera at `eye` looking at `target`; image x axis is perpendicular to `up`, image y points away from it.
  static CameraModel look_at(const Intrinsics& intrinsics, const Vec3& eye, const Vec3& target,
                             const Vec3& up = Vec3::UnitZ());

  const Intrinsics& intrinsics() const noexcept { return intrinsics_; }
  const Quat& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 to_camera(const Vec3& world) const;
  Vec3 to_world(const Vec3& camera) const;

  friend bool operator==(const CameraModel& a, const CameraModel& b);

 private:
  Intrinsics intrinsics_;
  Quat rotation_;
  Vec3 translation_;
};

/// World point to normalized image triplet. Throws BehindCameraError (Zc <= 0) or OutOfFrameError.
Destination project(const CameraModel& camera, const Vec3& world_point);

/// Inverse of project for a valid triplet.
Vec3 unproject(const CameraModel& camera, const Destination& dest);

inline constexpr double kDefaultMaxStep = 0.01;

/// Straight-line positions with spherical orientation interpolation; consecutive gaps <= max_step.
Trajectory interpolate_linear(const Pose& start, const Pose& end, double max_step = kDefaultMaxStep);

/// Unit displacement start -> end. Throws DegenerateError when the positions are within 1e-9 m.
Direction derive_direction(const Pose& start, const Pose& end);

// JSON encodings shared by every document format.
nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j, std::string_view path);
nlohmann::json to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j, std::string_view path);
nlohmann::json to_json(const Destination& d);
Destination destination_from_json(const nlohmann::json& j, std::string_view path);
nlohmann::json to_json(const CameraModel& c);
CameraModel camera_from_json(const nlohmann::json& j, std::string_view path);

/// Standalone calibration document: {"schema": 1, "kind": "camera_calibration", ...}.
nlohmann::json calibration_document(const CameraModel& c);
CameraModel load_calibration(std::string_view text);

}  // namespace primexec
