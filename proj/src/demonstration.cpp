#include "primexec/demonstration.hpp"

#include "primexec/errors.hpp"

#include <fmt/format.h>

namespace primexec {

Episode record_demonstration(const TaskSpec& task, std::span<const DemoStep> script, const ControllerConfig& config,
                             std::string episode_id, double frame_period) {
  ControllerConfig clean = config;
  clean.failure = FailureInjection{};
  std::mt19937_64 rng(0);

  Episode ep;
  ep.id = std::move(episode_id);
  ep.task = task.name;
  ep.task_description = task.description;
  ep.scene_caption = task.scene_caption;
  ep.camera = task.scene.camera;
  ep.gripper_max = task.scene.gripper_max;

  WorldState world = task.initial_world(0);
  auto record = [&] {
    ep.records.push_back({frame_period * static_cast<double>(ep.records.size()), world.arm.pose,
                          world.arm.gripper_width});
  };
  record();

  for (std::size_t k = 0; k < script.size(); ++k) {
    const DemoStep& s = script[k];
    const PrimitiveSkill skill = parse_skill(s.decision);
    PrimitiveSkill resolved = skill;
    if (skill.needs_destination()) {
      if (!s.target) throw InvariantError(fmt::format("demo step {} ('{}') needs a target", k, s.decision));
      resolved = bind_destination(skill, project(world.camera, *s.target));
    }
    if (k > 0) record();  // clips never share a frame
    const std::size_t start = ep.records.size() - 1;
    const ControllerPlan plan = controller_dispatch(resolved, world, clean, rng);
    if (!plan.ok) throw InvariantError(fmt::format("demo step {} ('{}') failed: {}", k, s.decision, plan.note));
    for (const auto& chunk : plan.chunks) {
      for (const auto& action : chunk) {
        world = step(world, action);
        record();
      }
    }
    Clip clip{start, ep.records.size() - 1, unbind_destination(skill), std::nullopt};
    if (classify(skill) == SkillCategory::MotionBased) clip.spatial = derive_spatial(clip, ep.records, ep.camera);
    ep.clips.push_back(std::move(clip));
  }

  if (!check_success(task, world)) {
    throw InvariantError(fmt::format("demonstration '{}' does not accomplish task '{}'", ep.id, task.name));
  }
  validate_episode(ep);
  return ep;
}

}  // namespace primexec
