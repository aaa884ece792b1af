#pragma once

// Kinematic tabletop world: no dynamics, no collision response. Grasping, pressing and pushing
// are tolerance rules evaluated against axis-aligned object boxes.

#include "primexec/geometry.hpp"
#include "primexec/observation.hpp"
#include "primexec/skill.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace primexec {

struct SceneObject {
  std::string id;
  std::string category;
  std::vector<std::string> attributes;
  Pose pose;
  Vec3 extent = Vec3::Constant(0.025);  // axis-aligned half sizes, meters
  bool graspable = false;
  bool pressable = false;
  bool movable = false;    // push/pull may displace it
  bool container = false;  // released objects settle onto its floor instead of its lid
  bool wipeable = false;   // latched when something is swept across it at contact height
  bool latched = false;

  double bottom() const { return pose.position().z() - extent.z(); }
  double top() const { return pose.position().z() + extent.z(); }
  bool footprint_contains(const Vec3& p, double margin = 0.0) const;
  bool box_contains(const Vec3& p, double margin = 0.0) const;

  friend bool operator==(const SceneObject& a, const SceneObject& b);
};

struct ArmState {
  Pose pose;
  double gripper_width = 0.0;
  std::optional<std::string> held_object;
  Pose grasp_offset;  // held object pose in the gripper frame

  friend bool operator==(const ArmState&, const ArmState&) = default;
};

struct WorldState {
  ArmState arm;
  std::vector<SceneObject> objects;
  CameraModel camera;
  std::uint64_t rng_seed = 0;
  Pose home;
  double gripper_max = 0.085;

  const SceneObject* find(std::string_view id) const;
  SceneObject* find(std::string_view id);

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class ActionEffect { None, Grasp, Release, Press, Contact };

/// Absolute end-effector target for one control tick plus an optional side effect.
struct Action {
  Pose target;
  std::optional<double> gripper_command;
  ActionEffect effect = ActionEffect::None;
  std::optional<std::string> object;  // subject of Grasp / Press / Contact

  friend bool operator==(const Action&, const Action&) = default;
};

struct FailureInjection {
  double destination_noise_sigma = 0.0;  // meters, isotropic Gaussian on the unprojected destination
  double grasp_failure_prob = 0.0;
  std::uint64_t seed = 0;
};

struct ControllerConfig {
  std::size_t chunk_size = 5;
  double max_step = kDefaultMaxStep;
  double grasp_tolerance = 0.02;
  double contact_tolerance = 0.03;
  double press_tolerance = 0.01;
  FailureInjection failure;
};

struct ControllerPlan {
  std::vector<std::vector<Action>> chunks;
  bool ok = true;    // false when the controller knows the skill will not achieve its effect
  std::string note;  // reason when !ok

  std::size_t action_count() const;
};

// ---------------------------------------------------------------- success predicates

namespace predicate {

struct Held {
  std::string object;
  bool value = true;
};
struct Latched {
  std::string object;
  bool value = true;
};
struct WithinDistance {
  std::string object;
  Vec3 point = Vec3::Zero();
  double tolerance = 0.01;
};
/// Bounds on the object's bottom face height.
struct HeightRange {
  std::string object;
  std::optional<double> min;
  std::optional<double> max;
};
struct RestingOn {
  std::string object;
  std::string support;
  double xy_tolerance = 0.02;
  double z_tolerance = 0.005;
};
struct Inside {
  std::string object;
  std::string region;
};

}  // namespace predicate

using Predicate = std::variant<predicate::Held, predicate::Latched, predicate::WithinDistance,
                               predicate::HeightRange, predicate::RestingOn, predicate::Inside>;

bool evaluate(const Predicate& p, const WorldState& world);

inline constexpr int kTaskSchemaVersion = 1;

struct TaskSpec {
  std::string name;   // e.g. "stack_blocks"
  std::string title;  // e.g. "Stack Blocks"
  std::string description;
  std::optional<std::string> scene_caption;
  WorldState scene;                // layout at seed 0
  std::vector<Predicate> success;  // conjunction

  /// The layout is fixed per task; the seed is carried for failure injection.
  WorldState initial_world(std::uint64_t seed) const;
};

/// Applies one action. Gripper widths are clamped; held objects follow the gripper rigidly.
WorldState step(const WorldState& world, const Action& action);

/// Symbolic observation; throws BehindCameraError / OutOfFrameError for points the camera cannot see.
Observation observe(const WorldState& world, std::uint64_t frame_id);

/// Maps a decision to chunked actions. Motion-based skills must carry a resolved destination
/// (UnresolvedPosError otherwise). `rng` drives failure injection only.
ControllerPlan controller_dispatch(const PrimitiveSkill& skill, const WorldState& world,
                                   const ControllerConfig& config, std::mt19937_64& rng);

/// Straight-line return to the home pose.
ControllerPlan home_plan(const WorldState& world, const ControllerConfig& config);

bool check_success(const TaskSpec& task, const WorldState& world);

nlohmann::json world_to_json(const WorldState& world);
nlohmann::json task_to_json(const TaskSpec& task);
std::string serialize_task(const TaskSpec& task);
/// Throws SchemaError / InvariantError.
TaskSpec load_task(std::string_view document);

/// Throws InvariantError on duplicate ids, non-positive extents, or dangling predicate references.
void validate_task(const TaskSpec& task);

}  // namespace primexec
