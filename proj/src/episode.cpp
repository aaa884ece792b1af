#include "primexec/episode.hpp"

#include "primexec/errors.hpp"
#include "primexec/json_util.hpp"
#include "primexec/prompts.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace primexec {

using nlohmann::json;

// ---------------------------------------------------------------- validation

void validate_episode(const Episode& ep) {
  auto fail = [&](const std::string& what) { throw InvariantError(fmt::format("episode '{}': {}", ep.id, what)); };
  if (ep.id.empty()) fail("empty id");
  if (!(ep.gripper_max > 0.0)) fail("gripper_max must be positive");
  if (ep.records.empty()) fail("records list is empty");
  for (std::size_t i = 0; i < ep.records.size(); ++i) {
    const auto& r = ep.records[i];
    if (!std::isfinite(r.timestamp)) fail(fmt::format("record {} has a non-finite timestamp", i));
    if (i > 0 && !(r.timestamp > ep.records[i - 1].timestamp)) {
      fail(fmt::format("timestamps not strictly increasing at record {}", i));
    }
    if (!(r.gripper_width >= 0.0 && r.gripper_width <= ep.gripper_max)) {
      fail(fmt::format("record {} gripper width {} outside [0, {}]", i, r.gripper_width, ep.gripper_max));
    }
  }
  for (std::size_t k = 0; k < ep.clips.size(); ++k) {
    const Clip& c = ep.clips[k];
    if (!(c.start_frame < c.end_frame)) fail(fmt::format("clip {} start_frame must precede end_frame", k));
    if (c.end_frame >= ep.records.size()) fail(fmt::format("clip {} frame range exceeds records", k));
    if (k > 0 && !(c.start_frame > ep.clips[k - 1].end_frame)) {
      fail(fmt::format("clip {} overlaps or precedes clip {}", k, k - 1));
    }
    try {
      check_invariants(c.skill);
    } catch (const InvariantError& e) {
      fail(fmt::format("clip {}: {}", k, e.what()));
    }
    if (c.skill.pos && c.skill.pos->resolved()) fail(fmt::format("clip {} stores a resolved pos slot", k));
    const bool motion = classify(c.skill) == SkillCategory::MotionBased;
    if (motion != c.spatial.has_value()) {
      fail(fmt::format("clip {} spatial info must be present exactly for motion-based skills", k));
    }
    if (c.spatial && c.spatial->trajectory.size() != c.end_frame - c.start_frame + 1) {
      fail(fmt::format("clip {} trajectory length does not match its frame range", k));
    }
  }
}

// ---------------------------------------------------------------- json

json episode_to_json(const Episode& ep) {
  json records = json::array();
  for (const auto& r : ep.records) {
    records.push_back(json{{"t", r.timestamp}, {"pose", to_json(r.pose)}, {"gripper", r.gripper_width}});
  }
  json clips = json::array();
  for (const auto& c : ep.clips) {
    json cj{{"start_frame", c.start_frame}, {"end_frame", c.end_frame}, {"skill", format_skill(c.skill)}};
    if (c.spatial) {
      json traj = json::array();
      for (const auto& p : c.spatial->trajectory.waypoints()) traj.push_back(to_json(p));
      json sj{{"destination", to_json(c.spatial->destination)}, {"trajectory", std::move(traj)}};
      if (c.spatial->direction) sj["direction"] = to_json(c.spatial->direction->vector());
      cj["spatial"] = std::move(sj);
    }
    clips.push_back(std::move(cj));
  }
  json doc{{"schema", kEpisodeSchemaVersion},
           {"kind", "episode"},
           {"id", ep.id},
           {"task", ep.task},
           {"task_description", ep.task_description},
           {"camera", to_json(ep.camera)},
           {"gripper_max", ep.gripper_max},
           {"records", std::move(records)},
           {"clips", std::move(clips)}};
  if (ep.scene_caption) doc["scene_caption"] = *ep.scene_caption;
  return doc;
}

std::string serialize_episode(const Episode& ep) { return episode_to_json(ep).dump(2) + "\n"; }

Episode load_episode(std::string_view document) {
  const json doc = jsonutil::parse_document(document);
  jsonutil::expect_header(doc, "episode", kEpisodeSchemaVersion);

  Episode ep;
  ep.id = jsonutil::get_string(doc, "", "id");
  ep.task = jsonutil::get_string(doc, "", "task");
  ep.task_description = jsonutil::get_string(doc, "", "task_description");
  ep.scene_caption = jsonutil::get_optional_string(doc, "", "scene_caption");
  ep.camera = camera_from_json(jsonutil::get(doc, "", "camera"), "/camera");
  ep.gripper_max = jsonutil::get_number(doc, "", "gripper_max");

  const json& records = jsonutil::get_array(doc, "", "records");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string path = fmt::format("/records/{}", i);
    TeleopRecord r;
    r.timestamp = jsonutil::get_number(records[i], path, "t");
    r.pose = pose_from_json(jsonutil::get(records[i], path, "pose"), path + "/pose");
    r.gripper_width = jsonutil::get_number(records[i], path, "gripper");
    ep.records.push_back(r);
  }

  const json& clips = jsonutil::get_array(doc, "", "clips");
  for (std::size_t k = 0; k < clips.size(); ++k) {
    const std::string path = fmt::format("/clips/{}", k);
    const json& cj = clips[k];
    Clip c;
    c.start_frame = jsonutil::get_index(cj, path, "start_frame");
    c.end_frame = jsonutil::get_index(cj, path, "end_frame");
    const std::string text = jsonutil::get_string(cj, path, "skill");
    try {
      c.skill = parse_skill(text);
    } catch (const Error& e) {
      throw SchemaError(path + "/skill", e.what());
    }
    if (auto it = cj.find("spatial"); it != cj.end() && !it->is_null()) {
      const std::string sp = path + "/spatial";
      Destination dest = destination_from_json(jsonutil::get(*it, sp, "destination"), sp + "/destination");
      std::optional<Direction> dir;
      if (auto d = it->find("direction"); d != it->end() && !d->is_null()) {
        Vec3 v = vec3_from_json(*d, sp + "/direction");
        try {
          dir = Direction(v);
        } catch (const RangeError& e) {
          throw SchemaError(sp + "/direction", e.what());
        }
      }
      const json& tj = jsonutil::get_array(*it, sp, "trajectory");
      std::vector<Pose> poses;
      for (std::size_t i = 0; i < tj.size(); ++i) poses.push_back(pose_from_json(tj[i], fmt::format("{}/trajectory/{}", sp, i)));
      if (poses.empty()) throw SchemaError(sp + "/trajectory", "trajectory must be nonempty");
      c.spatial = SpatialInfo{dest, dir, Trajectory(std::move(poses))};
    }
    ep.clips.push_back(std::move(c));
  }

  validate_episode(ep);
  return ep;
}

Episode load_episode_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_episode(ss.str());
}

// ---------------------------------------------------------------- derivation

SpatialInfo derive_spatial(const Clip& clip, std::span<const TeleopRecord> records, const CameraModel& camera) {
  if (classify(clip.skill) != SkillCategory::MotionBased) {
    throw InvariantError("derive_spatial needs a motion-based clip");
  }
  if (!(clip.start_frame < clip.end_frame) || clip.end_frame >= records.size()) {
    throw InvariantError("clip frame range outside the records");
  }
  std::vector<Pose> poses;
  poses.reserve(clip.end_frame - clip.start_frame + 1);
  for (std::size_t i = clip.start_frame; i <= clip.end_frame; ++i) poses.push_back(records[i].pose);
  const Pose& start = records[clip.start_frame].pose;
  const Pose& end = records[clip.end_frame].pose;
  std::optional<Direction> dir;
  try {
    dir = derive_direction(start, end);
  } catch (const DegenerateError&) {
  }
  return SpatialInfo{project(camera, end.position()), dir, Trajectory(std::move(poses))};
}

namespace {

double pose_deviation(const Pose& a, const Pose& b) {
  const double dp = (a.position() - b.position()).cwiseAbs().maxCoeff();
  const double dq = (a.orientation().coeffs() - b.orientation().coeffs()).cwiseAbs().maxCoeff();
  return std::max(dp, dq);
}

}  // namespace

std::vector<SpatialDiff> regeneration_diffs(const Episode& ep, double tol) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<SpatialDiff> out;
  for (std::size_t k = 0; k < ep.clips.size(); ++k) {
    const Clip& c = ep.clips[k];
    if (!c.spatial) continue;
    const SpatialInfo fresh = derive_spatial(c, ep.records, ep.camera);
    const SpatialInfo& stored = *c.spatial;

    const double dd = std::max({std::abs(fresh.destination.x() - stored.destination.x()),
                                std::abs(fresh.destination.y() - stored.destination.y()),
                                std::abs(fresh.destination.d() - stored.destination.d())});
    if (dd > tol) out.push_back({k, "destination", dd});

    double ddir = 0.0;
    if (fresh.direction.has_value() != stored.direction.has_value()) {
      ddir = kInf;
    } else if (fresh.direction) {
      ddir = (fresh.direction->vector() - stored.direction->vector()).cwiseAbs().maxCoeff();
    }
    if (ddir > tol) out.push_back({k, "direction", ddir});

    double dt = 0.0;
    if (fresh.trajectory.size() != stored.trajectory.size()) {
      dt = kInf;
    } else {
      for (std::size_t i = 0; i < fresh.trajectory.size(); ++i) {
        dt = std::max(dt, pose_deviation(fresh.trajectory.waypoints()[i], stored.trajectory.waypoints()[i]));
      }
    }
    if (dt > tol) out.push_back({k, "trajectory", dt});
  }
  return out;
}

Episode rederive(const Episode& ep) {
  Episode out = ep;
  for (auto& c : out.clips) {
    if (classify(c.skill) == SkillCategory::MotionBased) c.spatial = derive_spatial(c, out.records, out.camera);
  }
  return out;
}

// ---------------------------------------------------------------- training rows

std::vector<TrainingRow> to_training_rows(const Episode& ep) {
  std::vector<std::string> candidates;
  for (int i = 1; i <= 10; ++i) {
    std::string id = fmt::format("instruction-{}", i);
    if (ep.scene_caption || !template_uses(id, "scene_desc")) candidates.push_back(std::move(id));
  }

  std::vector<TrainingRow> rows;
  std::vector<std::string> history;
  auto make_row = [&](std::size_t frame, std::string target) {
    TrainingRow row{frame, project(ep.camera, ep.records[frame].pose.position()), history, std::move(target), {}, {}};
    row.template_id = candidates[rows.size() % candidates.size()];
    row.rendered_prompt = render_template(
        row.template_id, PromptFields{ep.task_description, row.history, row.arm_image_position, ep.scene_caption});
    rows.push_back(std::move(row));
  };
  for (const Clip& c : ep.clips) {
    std::string decision = format_skill(c.skill);
    make_row(c.start_frame, decision);
    history.push_back(std::move(decision));
  }
  make_row(ep.records.size() - 1, format_skill(PrimitiveSkill::done()));
  return rows;
}

}  // namespace primexec
