#include "primexec/corpus.hpp"
#include "primexec/engine.hpp"
#include "primexec/errors.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>

namespace fs = std::filesystem;
using namespace primexec;

namespace {

const fs::path kFixtures = PRIMEXEC_FIXTURES_DIR;

const Corpus& corpus() {
  static const Corpus c = load_corpus(kFixtures);
  return c;
}

/// Replies from a fixed list; repeats the last reply once the list runs out.
class ScriptedPlanner final : public Planner {
 public:
  explicit ScriptedPlanner(std::vector<PlanResponse> replies) : replies_(std::move(replies)) {}
  PlanResponse plan(const PlanRequest& request) override {
    requests.push_back(request);
    const std::size_t i = std::min(calls++, replies_.size() - 1);
    return replies_[i];
  }
  std::vector<PlanRequest> requests;
  std::size_t calls = 0;

 private:
  std::vector<PlanResponse> replies_;
};

PlanResponse reply(std::string decision, std::optional<Destination> d = std::nullopt) {
  PlanResponse r;
  r.decision = std::move(decision);
  r.destination = d;
  return r;
}

class ThrowingPlanner final : public Planner {
 public:
  PlanResponse plan(const PlanRequest&) override { throw TransportError("connection reset"); }
};

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("primexec-engine-" + std::to_string(std::random_device{}()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("oracle replay of stack_blocks succeeds") {
  const TaskSpec& task = *corpus().task("stack_blocks");
  const Episode& ep = *corpus().episode_for_task("stack_blocks");
  OraclePlanner planner(ep);
  const EpisodeResult r = run_episode(task, planner, {}, 0);
  CHECK(r.success);
  CHECK(r.transcript.success);
  CHECK(r.transcript.terminal == Terminal::Done);
  REQUIRE(r.transcript.entries.size() == ep.clips.size() + 1);
  for (std::size_t k = 0; k < r.transcript.entries.size(); ++k) {
    const auto& e = r.transcript.entries[k];
    CHECK(e.step == k);
    CHECK(e.success);
    CHECK(e.request.history.size() == k);
    if (k > 0) CHECK(e.request.history.back() == format_skill(ep.clips[k - 1].skill));
    if (k < ep.clips.size() && ep.clips[k].skill.needs_destination()) {
      CHECK(e.action_count > 0);
      CHECK(e.resolved_skill->find("<pos>") == std::string::npos);
    }
  }
  CHECK(r.transcript.entries.back().response.decision == "done");
  CHECK(check_success(task, r.final_world));
}

TEST_CASE("every bundled task replays successfully") {
  for (const auto& task : corpus().tasks) {
    OraclePlanner planner(*corpus().episode_for_task(task.name));
    INFO(task.name);
    CHECK(run_episode(task, planner, {}, 3).success);
  }
}

TEST_CASE("done on the first step") {
  const TaskSpec& task = *corpus().task("pick_object");
  ScriptedPlanner planner({reply("done")});
  const EpisodeResult r = run_episode(task, planner, {}, 0);
  REQUIRE(r.transcript.entries.size() == 1);
  CHECK(r.transcript.terminal == Terminal::Done);
  CHECK_FALSE(r.success);
  CHECK_FALSE(r.transcript.entries[0].success);
  CHECK(r.transcript.entries[0].request.history.empty());
}

TEST_CASE("a slot without a destination aborts before any actuation") {
  const TaskSpec& task = *corpus().task("stack_blocks");
  ScriptedPlanner planner({reply("pick the red block"), reply("move to the <pos>")});
  int controller_calls = 0;
  EngineConfig cfg;
  cfg.controller_fn = [&](const PrimitiveSkill& s, const WorldState& w, const ControllerConfig& c,
                          std::mt19937_64& rng) {
    ++controller_calls;
    return controller_dispatch(s, w, c, rng);
  };
  try {
    run_episode(task, planner, cfg, 0);
    FAIL("expected an abort");
  } catch (const UnresolvedPosError& e) {
    const auto* aborted = dynamic_cast<const AbortedEpisode*>(&e);
    REQUIRE(aborted);
    const Transcript& t = aborted->transcript();
    CHECK(t.terminal == Terminal::ErrorAborted);
    CHECK_FALSE(t.success);
    REQUIRE(t.entries.size() == 2);
    CHECK(t.entries[1].response.decision == "move to the <pos>");
    CHECK_FALSE(t.entries[1].resolved_skill);
    CHECK(t.error);
  }
  CHECK(controller_calls == 1);
}

TEST_CASE("protocol violations abort the episode") {
  const TaskSpec& task = *corpus().task("stack_blocks");
  ScriptedPlanner garbage({reply("dance wildly")});
  CHECK_THROWS_AS(run_episode(task, garbage, {}, 0), ProtocolError);
  ScriptedPlanner stray({reply("pick the red block", Destination(0.5, 0.5, 1.0))});
  CHECK_THROWS_AS(run_episode(task, stray, {}, 0), ProtocolError);
}

TEST_CASE("transport failures abort without a pending entry") {
  ThrowingPlanner planner;
  try {
    run_episode(*corpus().task("stack_blocks"), planner, {}, 0);
    FAIL("expected an abort");
  } catch (const EpisodeAbort<TransportError>& e) {
    CHECK(e.transcript().entries.empty());
    CHECK(e.transcript().terminal == Terminal::ErrorAborted);
  }
}

TEST_CASE("step limit") {
  const TaskSpec& task = *corpus().task("stack_blocks");
  ScriptedPlanner planner({reply("close the gripper")});
  EngineConfig cfg;
  cfg.max_steps = 4;
  const EpisodeResult r = run_episode(task, planner, cfg, 0);
  CHECK(r.transcript.terminal == Terminal::StepLimit);
  CHECK(r.transcript.entries.size() == 4);
  CHECK_FALSE(r.success);
  CHECK(planner.requests.back().history.size() == 3);
  cfg.max_steps = 0;
  CHECK_THROWS_AS(run_episode(task, planner, cfg, 0), Error);
}

TEST_CASE("reset returns home and ends the episode unsuccessfully") {
  const TaskSpec& task = *corpus().task("stack_blocks");
  ScriptedPlanner planner({reply("move to the <pos>", Destination(0.45, 0.55, 1.1)), reply("reset")});
  const EpisodeResult r = run_episode(task, planner, {}, 0);
  CHECK(r.transcript.terminal == Terminal::Reset);
  REQUIRE(r.transcript.entries.size() == 2);
  CHECK(r.transcript.entries[1].action_count > 0);
  CHECK_FALSE(r.success);
  CHECK(r.final_world.arm.pose == r.final_world.home);
}

TEST_CASE("history records decisions with the slot unbound") {
  const TaskSpec& task = *corpus().task("stack_blocks");
  ScriptedPlanner planner({reply("move to the <pos>", Destination(0.45, 0.55, 1.1)), reply("done")});
  run_episode(task, planner, {}, 0);
  REQUIRE(planner.requests.size() == 2);
  CHECK(planner.requests[1].history == std::vector<std::string>{"move to the <pos>"});
  CHECK(planner.requests[1].arm_image_position != planner.requests[0].arm_image_position);
  CHECK(planner.requests[1].frame_id > planner.requests[0].frame_id);
}

TEST_CASE("transcripts round trip") {
  OraclePlanner planner(*corpus().episode_for_task("wipe_table"));
  const Transcript t = run_episode(*corpus().task("wipe_table"), planner, {}, 11).transcript;
  const std::string text = serialize_transcript(t);
  CHECK(load_transcript(text) == t);
  CHECK(serialize_transcript(load_transcript(text)) == text);
  CHECK_THROWS_AS(load_transcript(R"({"schema": 1, "kind": "transcript"})"), SchemaError);
  CHECK_THROWS_AS(terminal_from_string("finished"), SchemaError);
  for (Terminal x : {Terminal::Done, Terminal::Reset, Terminal::ErrorAborted, Terminal::StepLimit})
    CHECK(terminal_from_string(to_string(x)) == x);
}

TEST_CASE("golden transcript is reproduced") {
  OraclePlanner planner(*corpus().episode_for_task("stack_blocks"));
  const Transcript golden = load_transcript(read_file(kFixtures / "golden" / "stack_blocks_01.transcript.json"));
  const Transcript t = run_episode(*corpus().task("stack_blocks"), planner, {}, golden.seed).transcript;
  CHECK(serialize_transcript(t) == read_file(kFixtures / "golden" / "stack_blocks_01.transcript.json"));
}

TEST_CASE("run_trials uses consecutive seeds and records errors per trial") {
  const TaskSpec& task = *corpus().task("stack_blocks");
  const Episode& ep = *corpus().episode_for_task("stack_blocks");
  int made = 0;
  const auto results = run_trials(
      task,
      [&]() -> std::unique_ptr<Planner> {
        if (made++ == 2) return std::make_unique<ThrowingPlanner>();
        return std::make_unique<OraclePlanner>(ep);
      },
      5, 100, {});
  REQUIRE(results.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(results[i].seed == 100 + i);
  CHECK(results[2].error);
  CHECK_FALSE(results[2].success);
  CHECK(results[2].transcript->terminal == Terminal::ErrorAborted);
  CHECK(results[0].success);
  CHECK(results[4].success);
  CHECK_THROWS_AS(run_trials(task, [&] { return std::make_unique<OraclePlanner>(ep); }, 0, 0, {}), Error);
}

TEST_CASE("worker count does not change results") {
  const TaskSpec& task = *corpus().task("throw_garbage");
  const Episode& ep = *corpus().episode_for_task("throw_garbage");
  EngineConfig cfg;
  cfg.controller.failure.destination_noise_sigma = 0.01;
  cfg.controller.failure.grasp_failure_prob = 0.2;
  auto factory = [&] { return std::make_unique<OraclePlanner>(ep); };
  const auto one = run_trials(task, factory, 12, 40, cfg, 1);
  const auto four = run_trials(task, factory, 12, 40, cfg, 4);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(one[i].success == four[i].success);
    CHECK(one[i].transcript == four[i].transcript);
  }
}

TEST_CASE("transcript directory naming") {
  TempDir dir;
  TranscriptDirectory sink(dir.path / "out");
  const Episode& ep = *corpus().episode_for_task("pick_object");
  run_trials(*corpus().task("pick_object"), [&] { return std::make_unique<OraclePlanner>(ep); }, 3, 7, {}, 2, &sink);
  CHECK(fs::exists(dir.path / "out" / "pick_object_trial000_seed7.json"));
  CHECK(fs::exists(dir.path / "out" / "pick_object_trial002_seed9.json"));
  CHECK(load_transcript(read_file(dir.path / "out" / "pick_object_trial001_seed8.json")).seed == 8);
}
