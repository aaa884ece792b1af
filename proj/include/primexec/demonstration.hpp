#pragma once

#include "primexec/episode.hpp"
#include "primexec/sim.hpp"

#include <optional>
#include <span>
#include <string>

namespace primexec {

/// One scripted teleoperation step: a decision with `<pos>` where needed and, for
/// motion-based decisions, the world point the gripper should reach.
struct DemoStep {
  std::string decision;
  std::optional<Vec3> target;
};

/// Executes a scripted demonstration in the simulator and records it as an annotated episode:
/// one teleop record per action, one clip per step, spatial info derived from the records.
/// Throws InvariantError when the script does not satisfy the task's success predicate.
Episode record_demonstration(const TaskSpec& task, std::span<const DemoStep> script, const ControllerConfig& config,
                             std::string episode_id, double frame_period = 0.1);

}  // namespace primexec
