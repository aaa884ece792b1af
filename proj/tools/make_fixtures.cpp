// Regenerates the bundled corpus: task specs, one scripted demonstration per task, and the
// golden wire/transcript files for stack_blocks_01.
//
//   make_fixtures [output-dir]

#include "primexec/corpus.hpp"
#include "primexec/demonstration.hpp"
#include "primexec/engine.hpp"
#include "primexec/protocol.hpp"
#include "primexec/sim.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace primexec;

namespace {

const Quat kDown(0.0, 1.0, 0.0, 0.0);  // approach axis pointing at the table

struct Flags {
  bool graspable = false;
  bool pressable = false;
  bool movable = false;
  bool container = false;
  bool wipeable = false;
};

SceneObject object(std::string id, std::string category, std::vector<std::string> attributes, Vec3 position,
                   Vec3 extent, Flags f) {
  SceneObject o;
  o.id = std::move(id);
  o.category = std::move(category);
  o.attributes = std::move(attributes);
  o.pose = Pose::identity_at(position);
  o.extent = extent;
  o.graspable = f.graspable;
  o.pressable = f.pressable;
  o.movable = f.movable;
  o.container = f.container;
  o.wipeable = f.wipeable;
  return o;
}

WorldState base_world(std::vector<SceneObject> objects) {
  WorldState w;
  w.camera = CameraModel::look_at(Intrinsics{0.6, 0.6, 0.5, 0.5}, Vec3(1.4, 0.0, 0.9), Vec3(0.45, 0.0, 0.1));
  w.home = Pose(Vec3(0.3, 0.0, 0.3), kDown);
  w.arm.pose = w.home;
  w.gripper_max = 0.085;
  w.arm.gripper_width = w.gripper_max;
  w.objects = std::move(objects);
  return w;
}

struct Fixture {
  TaskSpec task;
  std::vector<DemoStep> script;
};

Fixture pick_object() {
  const Vec3 red(0.45, 0.10, 0.025);
  return {TaskSpec{"pick_object", "Pick Object", "pick up the red block", "a red block and a green block on a table",
                   base_world({object("red_block", "block", {"red"}, red, Vec3::Constant(0.025), {.graspable = true}),
                               object("green_block", "block", {"green"}, Vec3(0.5, -0.15, 0.025),
                                      Vec3::Constant(0.025), {.graspable = true})}),
                   {predicate::Held{"red_block", true}, predicate::HeightRange{"red_block", 0.1, std::nullopt}}},
          {{"move on top of the red block <pos>", red},
           {"pick the red block", std::nullopt},
           {"move to the <pos>", Vec3(0.45, 0.10, 0.2)}}};
}

Fixture press_button() {
  return {TaskSpec{"press_button", "Press Button", "press the button", "a button mounted on a table",
                   base_world({object("button", "button", {"red"}, Vec3(0.5, -0.1, 0.015), Vec3(0.02, 0.02, 0.015),
                                      {.pressable = true})}),
                   {predicate::Latched{"button", true}}},
          {{"move on top of the button <pos>", Vec3(0.5, -0.1, 0.1)},
           {"press the button <pos>", Vec3(0.5, -0.1, 0.03)}}};
}

Fixture take_down_object() {
  const Vec3 box(0.5, 0.25, 0.325);
  return {TaskSpec{"take_down_object", "Take Down Object", "take the box down from the shelf",
                   "a box on a shelf next to a table",
                   base_world({object("shelf", "shelf", {}, Vec3(0.5, 0.25, 0.15), Vec3(0.1, 0.1, 0.15), {}),
                               object("box", "box", {"brown"}, box, Vec3::Constant(0.025), {.graspable = true})}),
                   {predicate::HeightRange{"box", std::nullopt, 0.005}, predicate::Held{"box", false}}},
          {{"move on top of the box <pos>", box},
           {"pick the box", std::nullopt},
           {"move to the <pos>", Vec3(0.4, -0.05, 0.03)},
           {"place the box", std::nullopt}}};
}

Fixture close_drawer() {
  return {TaskSpec{"close_drawer", "Close Drawer", "close the drawer", "an open drawer on a table",
                   base_world({object("drawer", "drawer", {}, Vec3(0.55, 0.3, 0.05), Vec3(0.08, 0.1, 0.05),
                                      {.movable = true})}),
                   {predicate::WithinDistance{"drawer", Vec3(0.70, 0.3, 0.05), 0.01}}},
          {{"move in front of the drawer <pos>", Vec3(0.46, 0.3, 0.05)},
           {"push the drawer to the <pos>", Vec3(0.61, 0.3, 0.05)}}};
}

Fixture wipe_table() {
  const Vec3 sponge(0.4, -0.15, 0.02);
  return {TaskSpec{"wipe_table", "Wipe Table", "wipe the stain off the table with the sponge",
                   "a sponge and a stain on a table",
                   base_world({object("sponge", "sponge", {"yellow"}, sponge, Vec3(0.03, 0.03, 0.02),
                                      {.graspable = true}),
                               object("stain", "stain", {}, Vec3(0.55, 0.1, 0.001), Vec3(0.05, 0.05, 0.001),
                                      {.wipeable = true})}),
                   {predicate::Latched{"stain", true}, predicate::Held{"sponge", false}}},
          {{"move on top of the sponge <pos>", sponge},
           {"pick the sponge", std::nullopt},
           {"move next to the stain <pos>", Vec3(0.48, 0.1, 0.03)},
           {"move to the <pos>", Vec3(0.62, 0.1, 0.03)},
           {"place the sponge", std::nullopt}}};
}

Fixture throw_garbage() {
  const Vec3 garbage(0.45, -0.1, 0.02);
  return {TaskSpec{"throw_garbage", "Throw Garbage", "throw the garbage into the bin",
                   "crumpled paper, a cup and an apple on a table next to a bin",
                   base_world({object("garbage", "garbage", {"crumpled"}, garbage, Vec3::Constant(0.02),
                                      {.graspable = true}),
                               object("cup", "cup", {"white"}, Vec3(0.4, 0.05, 0.04), Vec3(0.03, 0.03, 0.04),
                                      {.graspable = true}),
                               object("apple", "apple", {"red"}, Vec3(0.5, -0.22, 0.03), Vec3::Constant(0.03),
                                      {.graspable = true}),
                               object("bin", "bin", {}, Vec3(0.6, 0.15, 0.06), Vec3(0.07, 0.07, 0.06),
                                      {.container = true})}),
                   {predicate::Inside{"garbage", "bin"}, predicate::Held{"garbage", false}}},
          {{"move on top of the garbage <pos>", garbage},
           {"pick the garbage", std::nullopt},
           {"move on top of the bin <pos>", Vec3(0.6, 0.15, 0.2)},
           {"place the garbage", std::nullopt}}};
}

Fixture stack_blocks() {
  const Vec3 red(0.4, 0.1, 0.025);
  const Vec3 blue(0.55, -0.1, 0.025);
  return {TaskSpec{"stack_blocks", "Stack Blocks", "stack the red block on the blue block",
                   "a red block and a blue block on a table",
                   base_world({object("red_block", "block", {"red"}, red, Vec3::Constant(0.025), {.graspable = true}),
                               object("blue_block", "block", {"blue"}, blue, Vec3::Constant(0.025),
                                      {.graspable = true})}),
                   {predicate::RestingOn{"red_block", "blue_block", 0.02, 0.005},
                    predicate::Held{"red_block", false}}},
          {{"move on top of the red block <pos>", red},
           {"pick the red block", std::nullopt},
           {"move on top of the blue block <pos>", Vec3(0.55, -0.1, 0.075)},
           {"place the red block", std::nullopt}}};
}

Fixture receive_object() {
  const Vec3 cup(0.45, -0.2, 0.34);
  const Vec3 retract(0.3, 0.0, 0.3);
  return {TaskSpec{"receive_object", "Receive Object", "take the cup from the hand", "a hand holding out a cup",
                   base_world({object("hand", "hand", {}, Vec3(0.45, -0.2, 0.15), Vec3(0.03, 0.03, 0.15), {}),
                               object("cup", "cup", {"white"}, cup, Vec3(0.03, 0.03, 0.04), {.graspable = true})}),
                   {predicate::Held{"cup", true}, predicate::WithinDistance{"cup", retract, 0.03}}},
          {{"move in front of the cup <pos>", Vec3(0.35, -0.2, 0.34)},
           {"move next to the cup <pos>", cup},
           {"pick the cup", std::nullopt},
           {"move to the <pos>", retract}}};
}

/// Oracle that keeps every exchanged line.
class RecordingPlanner final : public Planner {
 public:
  explicit RecordingPlanner(Episode ep) : inner_(std::move(ep)) {}
  PlanResponse plan(const PlanRequest& request) override {
    PlanResponse r = inner_.plan(request);
    lines += encode_message(request);
    lines += encode_message(r);
    return r;
  }
  std::string lines;

 private:
  OraclePlanner inner_;
};

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path(PRIMEXEC_FIXTURES_DIR);
  const ControllerConfig config;
  try {
    for (const Fixture& f : {pick_object(), press_button(), take_down_object(), close_drawer(), wipe_table(),
                             throw_garbage(), stack_blocks(), receive_object()}) {
      validate_task(f.task);
      write_file(out / "tasks" / (f.task.name + ".json"), serialize_task(f.task));
      const Episode ep = record_demonstration(f.task, f.script, config, f.task.name + "_01");
      write_file(out / "episodes" / (ep.id + ".json"), serialize_episode(ep));
      std::cout << fmt::format("{:<18} {} clips, {} records\n", f.task.name, ep.clips.size(), ep.records.size());

      if (f.task.name == "stack_blocks") {
        RecordingPlanner planner(ep);
        const EpisodeResult result = run_episode(f.task, planner, EngineConfig{}, 0);
        if (!result.success) throw Error("oracle replay of stack_blocks_01 failed");
        write_file(out / "golden" / "stack_blocks_01.messages.jsonl", planner.lines);
        write_file(out / "golden" / "stack_blocks_01.transcript.json", serialize_transcript(result.transcript));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
