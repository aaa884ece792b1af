#pragma once

#include "primexec/geometry.hpp"
#include "primexec/skill.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace primexec {

inline constexpr int kEpisodeSchemaVersion = 1;

/// One teleoperation frame: end-effector pose plus the gripper channel.
struct TeleopRecord {
  double timestamp = 0.0;  // seconds
  Pose pose;
  double gripper_width = 0.0;  // meters

  friend bool operator==(const TeleopRecord&, const TeleopRecord&) = default;
};

/// The three spatial-information forms attached to a motion-based clip.
struct SpatialInfo {
  Destination destination;
  std::optional<Direction> direction;
  Trajectory trajectory;

  friend bool operator==(const SpatialInfo&, const SpatialInfo&) = default;
};

struct Clip {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  PrimitiveSkill skill;  // pos slot always unresolved in storage
  std::optional<SpatialInfo> spatial;

  friend bool operator==(const Clip&, const Clip&) = default;
};

struct Episode {
  std::string id;
  std::string task;  // bundled task name, e.g. "stack_blocks"
  std::string task_description;
  std::optional<std::string> scene_caption;
  CameraModel camera;
  double gripper_max = 0.085;
  std::vector<TeleopRecord> records;
  std::vector<Clip> clips;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct TrainingRow {
  std::size_t observation_ref = 0;  // frame index
  Destination arm_image_position;
  std::vector<std::string> history;
  std::string target_decision;
  std::string template_id;
  std::string rendered_prompt;
};

/// Parses and validates an episode document. Throws SchemaError or InvariantError.
Episode load_episode(std::string_view document);
Episode load_episode_file(const std::string& path);

/// Structural invariants (ordering, ranges, bounds, clip/spatial pairing). Throws InvariantError.
void validate_episode(const Episode& episode);

nlohmann::json episode_to_json(const Episode& episode);
/// Canonical document text (2-space indented JSON, trailing newline).
std::string serialize_episode(const Episode& episode);

/// trajectory = records[start..=end] poses; destination = projection of the final pose;
/// direction = start->end displacement, absent when degenerate. Projection errors propagate.
SpatialInfo derive_spatial(const Clip& clip, std::span<const TeleopRecord> records, const CameraModel& camera);

struct SpatialDiff {
  std::size_t clip_index = 0;
  std::string field;  // "destination", "direction", "trajectory"
  double deviation = 0.0;
};

/// Compares stored spatial info with a fresh derivation; reports every field deviating more than `tol`.
std::vector<SpatialDiff> regeneration_diffs(const Episode& episode, double tol = 1e-9);

/// Replaces every clip's spatial info with a fresh derivation.
Episode rederive(const Episode& episode);

/// One row per clip plus a terminal "done" row.
std::vector<TrainingRow> to_training_rows(const Episode& episode);

}  // namespace primexec
