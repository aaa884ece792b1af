#include "generators.hpp"
#include "matrix_oracle.hpp"
#include "primexec/corpus.hpp"
#include "primexec/errors.hpp"
#include "primexec/sim.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

using namespace primexec;

namespace {

const std::filesystem::path kFixtures = PRIMEXEC_FIXTURES_DIR;

TaskSpec fixture_task(const std::string& name) { return load_task(read_file(kFixtures / "tasks" / (name + ".json"))); }

WorldState apply(WorldState w, const ControllerPlan& plan) {
  for (const auto& chunk : plan.chunks)
    for (const auto& a : chunk) w = step(w, a);
  return w;
}

WorldState run(WorldState w, const std::string& decision, const ControllerConfig& cfg = {}) {
  std::mt19937_64 rng(1);
  PrimitiveSkill s = parse_skill(decision);
  return apply(w, controller_dispatch(s, w, cfg, rng));
}

/// Moves the gripper straight to a world point.
WorldState move_to(const WorldState& w, const Vec3& p) {
  return run(w, "move to the " + format_destination(project(w.camera, p)));
}

}  // namespace

TEST_CASE("step to the current pose changes nothing") {
  const WorldState w = fixture_task("stack_blocks").initial_world(0);
  const Action a{w.arm.pose, std::nullopt, ActionEffect::None, std::nullopt};
  CHECK(step(w, a) == w);
}

TEST_CASE("held objects follow the gripper rigidly") {
  WorldState w = fixture_task("stack_blocks").initial_world(0);
  w = move_to(w, Vec3(0.4, 0.1, 0.025));
  w = run(w, "pick the red block");
  REQUIRE(w.arm.held_object == "red_block");
  const Vec3 before = w.find("red_block")->pose.position();
  const Pose up = w.arm.pose.with_position(w.arm.pose.position() + Vec3(0, 0, 0.1));
  w = step(w, {up, std::nullopt, ActionEffect::None, std::nullopt});
  CHECK((w.find("red_block")->pose.position() - (before + Vec3(0, 0, 0.1))).norm() < 1e-12);
}

TEST_CASE("random steps conserve objects and respect the gripper bound") {
  const TaskSpec task = fixture_task("stack_blocks");
  WorldState w = task.initial_world(0);
  gen::Rng rng(5);
  const ActionEffect effects[] = {ActionEffect::None, ActionEffect::Grasp, ActionEffect::Release, ActionEffect::Press,
                                  ActionEffect::Contact};
  for (int i = 0; i < 1000; ++i) {
    Action a;
    a.target = Pose(Vec3(gen::uniform(rng, 0.2, 0.7), gen::uniform(rng, -0.3, 0.3), gen::uniform(rng, 0.0, 0.4)),
                    gen::unit_quaternion(rng));
    if (gen::coin(rng)) a.gripper_command = gen::uniform(rng, -0.05, 0.2);
    a.effect = effects[gen::integer(rng, 0, 4)];
    if (gen::coin(rng)) a.object = gen::coin(rng) ? "red_block" : "blue_block";
    w = step(w, a);
    REQUIRE(w.objects.size() == task.scene.objects.size());
    for (std::size_t k = 0; k < w.objects.size(); ++k) REQUIRE(w.objects[k].id == task.scene.objects[k].id);
    REQUIRE(w.arm.gripper_width >= 0.0);
    REQUIRE(w.arm.gripper_width <= w.gripper_max);
    if (w.arm.held_object) REQUIRE(w.find(*w.arm.held_object));
  }
}

TEST_CASE("grasp tolerance") {
  const WorldState w0 = fixture_task("stack_blocks").initial_world(0);
  ControllerConfig cfg;
  cfg.grasp_tolerance = 0.01;
  std::mt19937_64 rng(1);

  const WorldState near = move_to(w0, Vec3(0.403, 0.1, 0.025));
  const ControllerPlan ok = controller_dispatch(parse_skill("pick the red block"), near, cfg, rng);
  CHECK(ok.ok);
  CHECK(apply(near, ok).arm.held_object == "red_block");

  const WorldState far = move_to(w0, Vec3(0.42, 0.1, 0.025));
  const ControllerPlan miss = controller_dispatch(parse_skill("pick the red block"), far, cfg, rng);
  CHECK_FALSE(miss.ok);
  CHECK_FALSE(miss.note.empty());
  CHECK_FALSE(apply(far, miss).arm.held_object);
}

TEST_CASE("grasp failure injection") {
  WorldState w = move_to(fixture_task("stack_blocks").initial_world(0), Vec3(0.4, 0.1, 0.025));
  ControllerConfig cfg;
  cfg.failure.grasp_failure_prob = 1.0;
  std::mt19937_64 rng(1);
  const ControllerPlan p = controller_dispatch(parse_skill("pick the red block"), w, cfg, rng);
  CHECK_FALSE(p.ok);
  CHECK(p.note == "grasp slipped");
}

TEST_CASE("long moves are chunked and end within one step of the target") {
  const WorldState w = fixture_task("stack_blocks").initial_world(0);
  const Vec3 goal = w.arm.pose.position() + Vec3(0.3, 0.0, -0.2) * (0.5 / std::sqrt(0.13));
  ControllerConfig cfg;
  std::mt19937_64 rng(1);
  const PrimitiveSkill s = parse_skill("move to the <pos>");
  const ControllerPlan plan = controller_dispatch(bind_destination(s, project(w.camera, goal)), w, cfg, rng);
  CHECK(plan.ok);
  CHECK(plan.action_count() >= 50);
  CHECK(plan.chunks.size() >= 10);
  for (const auto& c : plan.chunks) CHECK(c.size() <= cfg.chunk_size);
  const WorldState end = apply(w, plan);
  CHECK((end.arm.pose.position() - goal).norm() < 1e-9);
  Vec3 last = w.arm.pose.position();
  for (const auto& c : plan.chunks) {
    for (const auto& a : c) {
      CHECK((a.target.position() - last).norm() <= cfg.max_step + 1e-12);
      last = a.target.position();
    }
  }
}

TEST_CASE("unresolved slots never reach the actuators") {
  const WorldState w = fixture_task("stack_blocks").initial_world(0);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(controller_dispatch(parse_skill("move to the <pos>"), w, {}, rng), UnresolvedPosError);
  CHECK_THROWS_AS(controller_dispatch(parse_skill("press the button <pos>"), w, {}, rng), UnresolvedPosError);
  CHECK_THROWS_AS(controller_dispatch(parse_skill("done"), w, {}, rng), InvariantError);
}

TEST_CASE("observation on the principal ray") {
  WorldState w;
  w.camera = CameraModel(Intrinsics{1.0, 1.0, 0.5, 0.5}, Quat::Identity(), Vec3::Zero());
  w.arm.pose = Pose::identity_at(Vec3(0, 0, 1));
  w.home = w.arm.pose;
  const Observation obs = observe(w, 3);
  CHECK(obs.arm_image_position == Destination(0.5, 0.5, 1.0));
  CHECK(obs.frame_id == 3);
  CHECK(obs.object_views.empty());
}

TEST_CASE("object views agree with the matrix oracle") {
  const WorldState w = fixture_task("take_down_object").initial_world(0);
  const oracle::Camera ref = oracle::from(w.camera);
  const Observation obs = observe(w, 0);
  REQUIRE(obs.object_views.size() == w.objects.size());
  for (std::size_t i = 0; i < w.objects.size(); ++i) {
    const oracle::V3 e = oracle::project(ref, oracle::v3(w.objects[i].pose.position()));
    const Destination& d = obs.object_views[i].image_position;
    CHECK(obs.object_views[i].id == w.objects[i].id);
    CHECK(std::abs(d.x() - e[0]) < 1e-9);
    CHECK(std::abs(d.y() - e[1]) < 1e-9);
    CHECK(std::abs(d.d() - e[2]) < 1e-9);
  }
}

TEST_CASE("pressing toggles the latch") {
  const TaskSpec task = fixture_task("press_button");
  WorldState w = task.initial_world(0);
  const Vec3 button = w.find("button")->pose.position();
  CHECK_FALSE(check_success(task, w));
  w = run(w, "press the button " + format_destination(project(w.camera, button)));
  CHECK(w.find("button")->latched);
  CHECK(check_success(task, w));

  std::mt19937_64 rng(1);
  const std::string off_target = "press the button " + format_destination(project(w.camera, button + Vec3(0.1, 0, 0)));
  CHECK_FALSE(controller_dispatch(parse_skill(off_target), w, {}, rng).ok);
}

TEST_CASE("push needs contact and moves the object horizontally") {
  const TaskSpec task = fixture_task("close_drawer");
  WorldState w = task.initial_world(0);
  std::mt19937_64 rng(1);
  const std::string away = "push the drawer to the " + format_destination(project(w.camera, Vec3(0.3, 0.1, 0.3)));
  CHECK_FALSE(controller_dispatch(parse_skill(away), w, {}, rng).ok);

  const SceneObject* drawer = nullptr;
  for (const auto& o : w.objects)
    if (o.movable) drawer = &o;
  REQUIRE(drawer);
  const std::string id = drawer->id;
  const Vec3 start = drawer->pose.position();
  w = move_to(w, start);
  const Vec3 arm_before = w.arm.pose.position();
  w = run(w, "push the drawer to the " + format_destination(project(w.camera, start + Vec3(-0.05, 0, 0.02))));
  Vec3 arm_delta = w.arm.pose.position() - arm_before;
  arm_delta.z() = 0.0;
  const Vec3 moved = w.find(id)->pose.position();
  CHECK(arm_delta.x() == Catch::Approx(-0.05).margin(2e-3));
  CHECK((moved - (start + arm_delta)).norm() < 1e-9);
}

TEST_CASE("stacking settles on the support top") {
  const TaskSpec task = fixture_task("stack_blocks");
  WorldState w = task.initial_world(0);
  w = move_to(w, Vec3(0.4, 0.1, 0.025));
  w = run(w, "pick the red block");
  w = move_to(w, Vec3(0.55, -0.1, 0.09));
  CHECK_FALSE(check_success(task, w));
  w = run(w, "place the red block");
  CHECK_FALSE(w.arm.held_object);
  CHECK(w.find("red_block")->bottom() == Catch::Approx(w.find("blue_block")->top()).margin(1e-12));
  CHECK(check_success(task, w));

  // released over the table it drops to the floor
  WorldState v = move_to(task.initial_world(0), Vec3(0.4, 0.1, 0.025));
  v = run(v, "pick the red block");
  v = move_to(v, Vec3(0.3, 0.2, 0.2));
  v = run(v, "open the gripper");
  CHECK(v.find("red_block")->bottom() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("controller dispatch is deterministic for a fixed rng state") {
  const WorldState w = fixture_task("stack_blocks").initial_world(0);
  ControllerConfig cfg;
  cfg.failure.destination_noise_sigma = 0.02;
  const PrimitiveSkill s = parse_skill("move to the [0.400, 0.600, 1.200]");
  std::mt19937_64 a(9), b(9), c(10);
  const auto pa = controller_dispatch(s, w, cfg, a);
  const auto pb = controller_dispatch(s, w, cfg, b);
  const auto pc = controller_dispatch(s, w, cfg, c);
  CHECK(pa.chunks == pb.chunks);
  CHECK_FALSE(pa.chunks == pc.chunks);
}

TEST_CASE("home plan returns to the home pose") {
  WorldState w = move_to(fixture_task("stack_blocks").initial_world(0), Vec3(0.5, 0.1, 0.1));
  w = apply(w, home_plan(w, {}));
  CHECK(w.arm.pose == w.home);
}

TEST_CASE("task documents round trip and validate") {
  for (const char* name : {"pick_object", "wipe_table", "throw_garbage", "receive_object"}) {
    const TaskSpec t = fixture_task(name);
    const std::string text = serialize_task(t);
    CHECK(serialize_task(load_task(text)) == text);
    CHECK(text == read_file(kFixtures / "tasks" / (std::string(name) + ".json")));
  }
  TaskSpec bad = fixture_task("stack_blocks");
  bad.scene.objects.push_back(bad.scene.objects.front());
  CHECK_THROWS_AS(validate_task(bad), InvariantError);
  bad = fixture_task("stack_blocks");
  bad.success.push_back(predicate::Held{"ghost", true});
  CHECK_THROWS_AS(validate_task(bad), InvariantError);
  bad = fixture_task("stack_blocks");
  bad.scene.objects[0].extent.z() = 0.0;
  CHECK_THROWS_AS(validate_task(bad), InvariantError);
  CHECK_THROWS_AS(load_task(R"({"schema": 1, "kind": "task"})"), SchemaError);
}

TEST_CASE("predicates") {
  WorldState w = fixture_task("stack_blocks").initial_world(0);
  CHECK(evaluate(predicate::Held{"red_block", false}, w));
  CHECK(evaluate(predicate::WithinDistance{"red_block", Vec3(0.4, 0.1, 0.03), 0.01}, w));
  CHECK_FALSE(evaluate(predicate::WithinDistance{"red_block", Vec3(0.4, 0.1, 0.05), 0.01}, w));
  CHECK(evaluate(predicate::HeightRange{"red_block", std::nullopt, 0.001}, w));
  CHECK_FALSE(evaluate(predicate::HeightRange{"red_block", 0.05, std::nullopt}, w));
  CHECK_FALSE(evaluate(predicate::RestingOn{"red_block", "blue_block"}, w));
  CHECK_FALSE(evaluate(predicate::Inside{"red_block", "blue_block"}, w));
  CHECK_THROWS_AS(evaluate(predicate::Latched{"ghost", true}, w), InvariantError);
}
