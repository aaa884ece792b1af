#include "primexec/sim.hpp"

#include "primexec/errors.hpp"
#include "primexec/json_util.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace primexec {

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kWipeContact = 0.015;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

bool SceneObject::footprint_contains(const Vec3& p, double margin) const {
  const Vec3& c = pose.position();
  return std::abs(p.x() - c.x()) <= extent.x() + margin && std::abs(p.y() - c.y()) <= extent.y() + margin;
}

bool SceneObject::box_contains(const Vec3& p, double margin) const {
  return footprint_contains(p, margin) && std::abs(p.z() - pose.position().z()) <= extent.z() + margin;
}

bool operator==(const SceneObject& a, const SceneObject& b) {
  return a.id == b.id && a.category == b.category && a.attributes == b.attributes && a.pose == b.pose &&
         a.extent == b.extent && a.graspable == b.graspable && a.pressable == b.pressable &&
         a.movable == b.movable && a.container == b.container && a.wipeable == b.wipeable &&
         a.latched == b.latched;
}

const SceneObject* WorldState::find(std::string_view id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

SceneObject* WorldState::find(std::string_view id) {
  return const_cast<SceneObject*>(std::as_const(*this).find(id));
}

std::size_t ControllerPlan::action_count() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.size();
  return n;
}

WorldState TaskSpec::initial_world(std::uint64_t seed) const {
  WorldState w = scene;
  w.rng_seed = seed;
  return w;
}

// ---------------------------------------------------------------- step

namespace {

void settle(WorldState& w, SceneObject& obj) {
  double support = 0.0;
  const Vec3 c = obj.pose.position();
  for (const auto& o : w.objects) {
    if (o.id == obj.id || !o.footprint_contains(c)) continue;
    const double s = o.container ? o.bottom() : o.top();
    if (s <= obj.bottom() + 1e-9) support = std::max(support, s);
  }
  obj.pose = obj.pose.with_position(Vec3(c.x(), c.y(), support + obj.extent.z()));
}

void wipe(WorldState& w, const std::string& mover_id) {
  const SceneObject* mover = w.find(mover_id);
  if (!mover) return;
  const Vec3 c = mover->pose.position();
  const double b = mover->bottom();
  for (auto& o : w.objects) {
    if (!o.wipeable || o.latched || o.id == mover_id) continue;
    if (std::abs(b - o.top()) <= kWipeContact && o.footprint_contains(c)) o.latched = true;
  }
}

}  // namespace

WorldState step(const WorldState& world, const Action& action) {
  WorldState w = world;
  const Vec3 previous = w.arm.pose.position();
  w.arm.pose = action.target;
  if (action.gripper_command) w.arm.gripper_width = std::clamp(*action.gripper_command, 0.0, w.gripper_max);

  switch (action.effect) {
    case ActionEffect::Grasp:
      if (!w.arm.held_object && action.object) {
        if (SceneObject* o = w.find(*action.object); o && o->graspable) {
          w.arm.held_object = o->id;
          w.arm.grasp_offset = w.arm.pose.inverse().compose(o->pose);
        }
      }
      break;
    case ActionEffect::Contact:
      if (action.object && action.object != w.arm.held_object) {
        if (SceneObject* o = w.find(*action.object); o && o->movable) {
          Vec3 delta = w.arm.pose.position() - previous;
          delta.z() = 0.0;
          o->pose = o->pose.with_position(o->pose.position() + delta);
        }
      }
      break;
    case ActionEffect::Press:
      if (action.object) {
        if (SceneObject* o = w.find(*action.object); o && o->pressable) o->latched = !o->latched;
      }
      break;
    case ActionEffect::Release:
    case ActionEffect::None: break;
  }

  if (w.arm.held_object) {
    SceneObject* held = w.find(*w.arm.held_object);
    held->pose = w.arm.pose.compose(w.arm.grasp_offset);
    if (action.effect == ActionEffect::Release) {
      w.arm.held_object.reset();
      w.arm.grasp_offset = Pose();
      settle(w, *held);
    }
    wipe(w, held->id);
  } else if (action.effect == ActionEffect::Contact && action.object) {
    wipe(w, *action.object);
  }
  return w;
}

// ---------------------------------------------------------------- observe

Observation observe(const WorldState& world, std::uint64_t frame_id) {
  Observation obs{project(world.camera, world.arm.pose.position()), {}, frame_id};
  obs.object_views.reserve(world.objects.size());
  for (const auto& o : world.objects) {
    obs.object_views.push_back({o.id, o.category, o.attributes, project(world.camera, o.pose.position())});
  }
  return obs;
}

// ---------------------------------------------------------------- controllers

namespace {

std::vector<std::vector<Action>> chunk(std::vector<Action> actions, std::size_t size) {
  if (size == 0) size = 1;
  std::vector<std::vector<Action>> out;
  for (std::size_t i = 0; i < actions.size(); i += size) {
    const std::size_t end = std::min(actions.size(), i + size);
    out.emplace_back(std::make_move_iterator(actions.begin() + static_cast<std::ptrdiff_t>(i)),
                     std::make_move_iterator(actions.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return out;
}

std::vector<Action> follow(const Trajectory& traj) {
  std::vector<Action> out;
  const auto& wp = traj.waypoints();
  if (wp.size() == 1) {
    out.push_back({wp.front(), std::nullopt, ActionEffect::None, std::nullopt});
    return out;
  }
  for (std::size_t i = 1; i < wp.size(); ++i) out.push_back({wp[i], std::nullopt, ActionEffect::None, std::nullopt});
  return out;
}

Vec3 resolve_target(const PrimitiveSkill& skill, const WorldState& world, const ControllerConfig& cfg,
                    std::mt19937_64& rng) {
  if (!skill.pos || !skill.pos->resolved()) {
    throw UnresolvedPosError(fmt::format("{} decision reached the controller without a destination",
                                         to_string(skill.kind)));
  }
  Vec3 target = unproject(world.camera, skill.pos->destination());
  const double sigma = cfg.failure.destination_noise_sigma;
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (int k = 0; k < 3; ++k) target[k] += noise(rng);
  }
  return target;
}

/// Nearest object passing `accept` whose distance (from `distance_of`) is within `limit`.
template <class Accept, class Distance>
const SceneObject* nearest(const WorldState& w, Accept accept, Distance distance_of, double limit) {
  const SceneObject* best = nullptr;
  double best_d = limit;
  for (const auto& o : w.objects) {
    if (!accept(o)) continue;
    const double d = distance_of(o);
    if (d <= best_d) {
      best = &o;
      best_d = d;
    }
  }
  return best;
}

double closing_width(const SceneObject& o) { return 2.0 * std::min(o.extent.x(), o.extent.y()); }

}  // namespace

ControllerPlan controller_dispatch(const PrimitiveSkill& skill, const WorldState& world,
                                   const ControllerConfig& cfg, std::mt19937_64& rng) {
  ControllerPlan plan;
  std::vector<Action> actions;
  const Pose& start = world.arm.pose;
  const bool holding = world.arm.held_object.has_value();

  switch (skill.kind) {
    case SkillKind::Move:
    case SkillKind::Push:
    case SkillKind::Pull:
    case SkillKind::Press:
    case SkillKind::Rotate: {
      const Vec3 target = resolve_target(skill, world, cfg, rng);
      Quat orientation = start.orientation();
      if (skill.kind == SkillKind::Rotate) {
        // Counterclockwise is a positive turn about the gripper's approach (local z) axis.
        const double sign = skill.rotation->direction == RotationDirection::Counterclockwise ? 1.0 : -1.0;
        const double angle = sign * skill.rotation->degrees * kPi / 180.0;
        orientation = (orientation * Quat(Eigen::AngleAxisd(angle, Vec3::UnitZ()))).normalized();
      }
      actions = follow(interpolate_linear(start, Pose(target, orientation), cfg.max_step));

      if (skill.kind == SkillKind::Push || skill.kind == SkillKind::Pull) {
        const Vec3 p = start.position();
        const SceneObject* contact = nearest(
            world,
            [&](const SceneObject& o) {
              return o.movable && o.id != world.arm.held_object && o.box_contains(p, cfg.contact_tolerance);
            },
            [&](const SceneObject& o) { return (o.pose.position() - p).norm(); },
            std::numeric_limits<double>::infinity());
        if (contact) {
          for (auto& a : actions) {
            a.effect = ActionEffect::Contact;
            a.object = contact->id;
          }
        } else {
          plan.ok = false;
          plan.note = "no movable object in contact with the gripper";
        }
      } else if (skill.kind == SkillKind::Press) {
        const SceneObject* button = nearest(
            world, [&](const SceneObject& o) { return o.pressable && o.box_contains(target, cfg.press_tolerance); },
            [&](const SceneObject& o) { return (o.pose.position() - target).norm(); },
            std::numeric_limits<double>::infinity());
        if (button) {
          actions.back().effect = ActionEffect::Press;
          actions.back().object = button->id;
        } else {
          plan.ok = false;
          plan.note = "no pressable object at the destination";
        }
      }
      break;
    }
    case SkillKind::Pick: {
      const Vec3 p = start.position();
      const SceneObject* candidate =
          holding ? nullptr
                  : nearest(
                        world,
                        [&](const SceneObject& o) {
                          return o.graspable && closing_width(o) <= world.gripper_max;
                        },
                        [&](const SceneObject& o) { return (o.pose.position() - p).norm(); }, cfg.grasp_tolerance);
      if (candidate && cfg.failure.grasp_failure_prob > 0.0) {
        std::bernoulli_distribution slip(std::min(1.0, cfg.failure.grasp_failure_prob));
        if (slip(rng)) {
          candidate = nullptr;
          plan.note = "grasp slipped";
        }
      }
      const double closed = candidate ? closing_width(*candidate) : (holding ? world.arm.gripper_width : 0.0);
      const double open = holding ? world.arm.gripper_width : world.gripper_max;
      actions.push_back({start, open, ActionEffect::None, std::nullopt});
      constexpr int kCloseTicks = 4;
      for (int i = 1; i <= kCloseTicks; ++i) {
        const double t = static_cast<double>(i) / kCloseTicks;
        actions.push_back({start, open + t * (closed - open), ActionEffect::None, std::nullopt});
      }
      if (candidate) {
        actions.back().effect = ActionEffect::Grasp;
        actions.back().object = candidate->id;
      } else {
        plan.ok = false;
        if (plan.note.empty()) plan.note = holding ? "already holding an object" : "no graspable object within tolerance";
      }
      break;
    }
    case SkillKind::Place: {
      const double from = world.arm.gripper_width;
      actions.push_back({start, from + 0.5 * (world.gripper_max - from), ActionEffect::None, std::nullopt});
      actions.push_back({start, world.gripper_max, ActionEffect::Release, std::nullopt});
      if (!holding) {
        plan.ok = false;
        plan.note = "nothing to place";
      }
      break;
    }
    case SkillKind::Open:
      actions.push_back({start, world.gripper_max, holding ? ActionEffect::Release : ActionEffect::None, std::nullopt});
      break;
    case SkillKind::Close: {
      double width = 0.0;
      if (holding) width = world.arm.gripper_width;
      actions.push_back({start, width, ActionEffect::None, std::nullopt});
      break;
    }
    case SkillKind::Done:
    case SkillKind::Reset:
      throw InvariantError("control decisions are handled by the engine, not a controller");
  }

  plan.chunks = chunk(std::move(actions), cfg.chunk_size);
  return plan;
}

ControllerPlan home_plan(const WorldState& world, const ControllerConfig& cfg) {
  ControllerPlan plan;
  plan.chunks = chunk(follow(interpolate_linear(world.arm.pose, world.home, cfg.max_step)), cfg.chunk_size);
  return plan;
}

// ---------------------------------------------------------------- predicates

bool evaluate(const Predicate& p, const WorldState& w) {
  auto obj = [&](const std::string& id) -> const SceneObject& {
    const SceneObject* o = w.find(id);
    if (!o) throw InvariantError("predicate references unknown object '" + id + "'");
    return *o;
  };
  return std::visit(
      Overloaded{
          [&](const predicate::Held& h) { return (w.arm.held_object == h.object) == h.value; },
          [&](const predicate::Latched& l) { return obj(l.object).latched == l.value; },
          [&](const predicate::WithinDistance& d) {
            return (obj(d.object).pose.position() - d.point).norm() <= d.tolerance;
          },
          [&](const predicate::HeightRange& h) {
            const double b = obj(h.object).bottom();
            return (!h.min || b >= *h.min) && (!h.max || b <= *h.max);
          },
          [&](const predicate::RestingOn& r) {
            const SceneObject& o = obj(r.object);
            const SceneObject& s = obj(r.support);
            const Vec3 d = o.pose.position() - s.pose.position();
            return std::hypot(d.x(), d.y()) <= r.xy_tolerance && std::abs(o.bottom() - s.top()) <= r.z_tolerance;
          },
          [&](const predicate::Inside& in) { return obj(in.region).box_contains(obj(in.object).pose.position()); },
      },
      p);
}

bool check_success(const TaskSpec& task, const WorldState& world) {
  return std::all_of(task.success.begin(), task.success.end(),
                     [&](const Predicate& p) { return evaluate(p, world); });
}

// ---------------------------------------------------------------- serialization

namespace {

json object_to_json(const SceneObject& o) {
  return json{{"id", o.id},
              {"category", o.category},
              {"attributes", o.attributes},
              {"pose", to_json(o.pose)},
              {"extent", to_json(o.extent)},
              {"graspable", o.graspable},
              {"pressable", o.pressable},
              {"movable", o.movable},
              {"container", o.container},
              {"wipeable", o.wipeable},
              {"latched", o.latched}};
}

SceneObject object_from_json(const json& j, const std::string& path) {
  SceneObject o;
  o.id = jsonutil::get_string(j, path, "id");
  o.category = jsonutil::get_string(j, path, "category");
  if (auto it = j.find("attributes"); it != j.end()) {
    if (!it->is_array()) throw SchemaError(path + "/attributes", "expected an array of strings");
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_string()) throw SchemaError(fmt::format("{}/attributes/{}", path, i), "expected a string");
      o.attributes.push_back((*it)[i].get<std::string>());
    }
  }
  o.pose = pose_from_json(jsonutil::get(j, path, "pose"), path + "/pose");
  o.extent = vec3_from_json(jsonutil::get(j, path, "extent"), path + "/extent");
  o.graspable = jsonutil::get_bool(j, path, "graspable", false);
  o.pressable = jsonutil::get_bool(j, path, "pressable", false);
  o.movable = jsonutil::get_bool(j, path, "movable", false);
  o.container = jsonutil::get_bool(j, path, "container", false);
  o.wipeable = jsonutil::get_bool(j, path, "wipeable", false);
  o.latched = jsonutil::get_bool(j, path, "latched", false);
  return o;
}

json predicate_to_json(const Predicate& p) {
  return std::visit(
      Overloaded{
          [](const predicate::Held& h) { return json{{"type", "held"}, {"object", h.object}, {"value", h.value}}; },
          [](const predicate::Latched& l) {
            return json{{"type", "latched"}, {"object", l.object}, {"value", l.value}};
          },
          [](const predicate::WithinDistance& d) {
            return json{{"type", "within_distance"},
                        {"object", d.object},
                        {"point", to_json(d.point)},
                        {"tolerance", d.tolerance}};
          },
          [](const predicate::HeightRange& h) {
            json j{{"type", "height_range"}, {"object", h.object}};
            if (h.min) j["min"] = *h.min;
            if (h.max) j["max"] = *h.max;
            return j;
          },
          [](const predicate::RestingOn& r) {
            return json{{"type", "resting_on"},
                        {"object", r.object},
                        {"support", r.support},
                        {"xy_tolerance", r.xy_tolerance},
                        {"z_tolerance", r.z_tolerance}};
          },
          [](const predicate::Inside& in) {
            return json{{"type", "inside"}, {"object", in.object}, {"region", in.region}};
          },
      },
      p);
}

Predicate predicate_from_json(const json& j, const std::string& path) {
  const std::string type = jsonutil::get_string(j, path, "type");
  const std::string object = jsonutil::get_string(j, path, "object");
  if (type == "held") return predicate::Held{object, jsonutil::get_bool(j, path, "value", true)};
  if (type == "latched") return predicate::Latched{object, jsonutil::get_bool(j, path, "value", true)};
  if (type == "within_distance") {
    return predicate::WithinDistance{object, vec3_from_json(jsonutil::get(j, path, "point"), path + "/point"),
                                     jsonutil::get_number(j, path, "tolerance")};
  }
  if (type == "height_range") {
    predicate::HeightRange h{object, {}, {}};
    if (j.contains("min")) h.min = jsonutil::get_number(j, path, "min");
    if (j.contains("max")) h.max = jsonutil::get_number(j, path, "max");
    return h;
  }
  if (type == "resting_on") {
    return predicate::RestingOn{object, jsonutil::get_string(j, path, "support"),
                                jsonutil::get_number(j, path, "xy_tolerance"),
                                jsonutil::get_number(j, path, "z_tolerance")};
  }
  if (type == "inside") return predicate::Inside{object, jsonutil::get_string(j, path, "region")};
  throw SchemaError(path + "/type", "unknown predicate type '" + type + "'");
}

std::vector<std::string> referenced_objects(const Predicate& p) {
  return std::visit(Overloaded{
                        [](const predicate::RestingOn& r) { return std::vector<std::string>{r.object, r.support}; },
                        [](const predicate::Inside& in) { return std::vector<std::string>{in.object, in.region}; },
                        [](const auto& other) { return std::vector<std::string>{other.object}; },
                    },
                    p);
}

}  // namespace

json world_to_json(const WorldState& w) {
  json objects = json::array();
  for (const auto& o : w.objects) objects.push_back(object_to_json(o));
  json arm{{"pose", to_json(w.arm.pose)},
           {"gripper_width", w.arm.gripper_width},
           {"held_object", w.arm.held_object ? json(*w.arm.held_object) : json(nullptr)},
           {"grasp_offset", to_json(w.arm.grasp_offset)}};
  return json{{"arm", std::move(arm)},        {"objects", std::move(objects)}, {"camera", to_json(w.camera)},
              {"rng_seed", w.rng_seed},        {"home", to_json(w.home)},      {"gripper_max", w.gripper_max}};
}

void validate_task(const TaskSpec& t) {
  auto fail = [&](const std::string& what) { throw InvariantError(fmt::format("task '{}': {}", t.name, what)); };
  if (t.name.empty()) fail("empty name");
  if (t.success.empty()) fail("success predicate list is empty");
  if (!(t.scene.gripper_max > 0.0)) fail("gripper_max must be positive");
  if (t.scene.arm.gripper_width < 0.0 || t.scene.arm.gripper_width > t.scene.gripper_max) fail("gripper width out of bounds");
  std::set<std::string> ids;
  for (const auto& o : t.scene.objects) {
    if (!ids.insert(o.id).second) fail("duplicate object id '" + o.id + "'");
    if (!(o.extent.minCoeff() > 0.0)) fail("object '" + o.id + "' has a non-positive extent");
  }
  for (const auto& p : t.success) {
    for (const auto& id : referenced_objects(p)) {
      if (!ids.count(id)) fail("predicate references unknown object '" + id + "'");
    }
  }
}

json task_to_json(const TaskSpec& t) {
  json objects = json::array();
  for (const auto& o : t.scene.objects) objects.push_back(object_to_json(o));
  json success = json::array();
  for (const auto& p : t.success) success.push_back(predicate_to_json(p));
  json doc{{"schema", kTaskSchemaVersion},
           {"kind", "task"},
           {"name", t.name},
           {"title", t.title},
           {"description", t.description},
           {"camera", to_json(t.scene.camera)},
           {"arm", {{"home", to_json(t.scene.home)},
                    {"gripper_width", t.scene.arm.gripper_width},
                    {"gripper_max", t.scene.gripper_max}}},
           {"objects", std::move(objects)},
           {"success", std::move(success)}};
  if (t.scene_caption) doc["scene_caption"] = *t.scene_caption;
  return doc;
}

std::string serialize_task(const TaskSpec& t) { return task_to_json(t).dump(2) + "\n"; }

TaskSpec load_task(std::string_view document) {
  const json doc = jsonutil::parse_document(document);
  jsonutil::expect_header(doc, "task", kTaskSchemaVersion);
  TaskSpec t;
  t.name = jsonutil::get_string(doc, "", "name");
  t.title = jsonutil::get_string(doc, "", "title");
  t.description = jsonutil::get_string(doc, "", "description");
  t.scene_caption = jsonutil::get_optional_string(doc, "", "scene_caption");
  t.scene.camera = camera_from_json(jsonutil::get(doc, "", "camera"), "/camera");
  const json& arm = jsonutil::get(doc, "", "arm");
  t.scene.home = pose_from_json(jsonutil::get(arm, "/arm", "home"), "/arm/home");
  t.scene.arm.pose = t.scene.home;
  t.scene.arm.gripper_width = jsonutil::get_number(arm, "/arm", "gripper_width");
  t.scene.gripper_max = jsonutil::get_number(arm, "/arm", "gripper_max");
  const json& objects = jsonutil::get_array(doc, "", "objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    t.scene.objects.push_back(object_from_json(objects[i], fmt::format("/objects/{}", i)));
  }
  const json& success = jsonutil::get_array(doc, "", "success");
  for (std::size_t i = 0; i < success.size(); ++i) {
    t.success.push_back(predicate_from_json(success[i], fmt::format("/success/{}", i)));
  }
  validate_task(t);
  return t;
}

}  // namespace primexec
