#include "generators.hpp"
#include "primexec/errors.hpp"
#include "primexec/metrics.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>

using namespace primexec;

namespace {

const std::filesystem::path kFixtures = PRIMEXEC_FIXTURES_DIR;

const Corpus& corpus() {
  static const Corpus c = load_corpus(kFixtures);
  return c;
}

std::vector<PrimitiveSkill> skills(std::initializer_list<const char*> texts) {
  std::vector<PrimitiveSkill> out;
  for (const char* t : texts) out.push_back(parse_skill(t));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

/// Test-only restatement of the matching rule, written against the formatted text fields.
bool brute_match(const PrimitiveSkill& p, const PrimitiveSkill& r) {
  if (to_string(p.kind) != to_string(r.kind)) return false;
  if (r.object && (!p.object || lower(*p.object) != lower(*r.object))) return false;
  if (r.attribute && (!p.attribute || lower(*p.attribute) != lower(*r.attribute))) return false;
  return true;
}

CameraModel identity_camera() { return CameraModel(Intrinsics{1.0, 1.0, 0.5, 0.5}, Quat::Identity(), Vec3::Zero()); }

TrialOutcome outcome(std::vector<bool> steps, Terminal t, bool success) { return {std::move(steps), t, success}; }

}  // namespace

TEST_CASE("planning accuracy example") {
  std::vector<PlanJudgment> judgments(20);
  for (int i = 0; i < 17; ++i) judgments[static_cast<std::size_t>(i)].correct = true;
  CHECK(planning_accuracy(judgments) == Catch::Approx(0.85));
  CHECK(planning_accuracy(std::span<const PlanJudgment>{}) == 1.0);
}

TEST_CASE("plan matching rule") {
  CHECK(plan_matches(PrimitiveSkill::pick("Block", "Red"), parse_skill("pick the red block")));
  CHECK(plan_matches(parse_skill("move on top of the cup [0.1, 0.2, 0.3]"), parse_skill("move on top of the cup <pos>")));
  CHECK(plan_matches(parse_skill("pick the red block"), parse_skill("pick the block")));
  CHECK_FALSE(plan_matches(parse_skill("pick the block"), parse_skill("pick the red block")));
  CHECK_FALSE(plan_matches(parse_skill("place the block"), parse_skill("pick the block")));
  CHECK_FALSE(plan_matches(parse_skill("pick the cup"), parse_skill("pick the block")));
}

TEST_CASE("identical sequences score 1 and misalignment counts against") {
  const auto ref = skills({"move on top of the cup <pos>", "pick the cup", "done"});
  CHECK(planning_accuracy(judge_plan(ref, ref)) == 1.0);
  const auto shorter = skills({"move on top of the cup <pos>"});
  const auto j = judge_plan(shorter, ref);
  REQUIRE(j.size() == 3);
  CHECK_FALSE(j[2].predicted);
  CHECK(planning_accuracy(j) == Catch::Approx(1.0 / 3.0));
  const auto longer = skills({"move on top of the cup <pos>", "pick the cup", "done", "reset"});
  const auto k = judge_plan(longer, ref);
  REQUIRE(k.size() == 4);
  CHECK_FALSE(k[3].reference);
  CHECK(planning_accuracy(k) == Catch::Approx(0.75));
  CHECK_THROWS_AS(planning_accuracy({ref}, {ref, ref}), Error);
}

TEST_CASE("planning accuracy against a brute-force count") {
  gen::Rng rng(77);
  for (int n = 0; n < 100; ++n) {
    std::vector<std::vector<PrimitiveSkill>> pred, ref;
    std::size_t correct = 0, total = 0;
    const int pairs = gen::integer(rng, 1, 6);
    for (int p = 0; p < pairs; ++p) {
      std::vector<PrimitiveSkill> a, b;
      const int la = gen::integer(rng, 0, 8);
      const int lb = gen::integer(rng, 0, 8);
      for (int i = 0; i < lb; ++i) b.push_back(gen::skill(rng));
      for (int i = 0; i < la; ++i) {
        // bias towards near misses of the reference
        if (i < lb && gen::coin(rng)) {
          PrimitiveSkill s = b[static_cast<std::size_t>(i)];
          if (s.object && gen::coin(rng)) s.object = gen::coin(rng) ? lower(*s.object) : "other";
          if (gen::coin(rng)) s.attribute.reset();
          a.push_back(s);
        } else {
          a.push_back(gen::skill(rng));
        }
      }
      for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
        ++total;
        if (i < a.size() && i < b.size() && brute_match(a[i], b[i])) ++correct;
      }
      pred.push_back(std::move(a));
      ref.push_back(std::move(b));
    }
    const double expected = total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
    REQUIRE(planning_accuracy(pred, ref) == Catch::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("destination recall thresholds") {
  const CameraModel cam = identity_camera();
  const std::vector<Destination> ref(2, Destination(0.5, 0.5, 1.0));
  const std::vector<Destination> pred = {Destination(0.5, 0.5, 1.03), Destination(0.5, 0.5, 1.07)};
  const RecallReport r = destination_recall(pred, ref, cam);
  CHECK(r.n_samples == 2);
  CHECK(r.recall == std::vector<double>{0.5, 1.0});
  CHECK(r.render() == "0.50/1.00");
  CHECK_THROWS_AS(destination_recall(pred, std::span(ref).first(1), cam), Error);
  const RecallReport empty = destination_recall({}, {}, cam);
  CHECK(empty.recall == std::vector<double>{0.0, 0.0});
}

TEST_CASE("recall rendering example") {
  const CameraModel cam = identity_camera();
  std::vector<Destination> pred, ref;
  for (int i = 0; i < 100; ++i) {
    ref.emplace_back(0.5, 0.5, 1.0);
    const double err = i < 48 ? 0.02 : (i < 78 ? 0.08 : 0.2);
    pred.emplace_back(0.5, 0.5, 1.0 + err);
  }
  CHECK(destination_recall(pred, ref, cam).render() == "0.48/0.78");
}

TEST_CASE("recall is monotone in the threshold and matches a distance count") {
  gen::Rng rng(3);
  for (int n = 0; n < 50; ++n) {
    const CameraModel cam = gen::camera(rng);
    std::vector<Destination> pred, ref;
    std::vector<double> dist;
    for (int i = 0; i < 40; ++i) {
      const Vec3 a = gen::in_frustum_point(rng, cam);
      const Vec3 b = a + Vec3(gen::uniform(rng, -0.1, 0.1), gen::uniform(rng, -0.1, 0.1), gen::uniform(rng, -0.1, 0.1));
      ref.push_back(project(cam, a));
      try {
        pred.push_back(project(cam, b));
      } catch (const Error&) {
        ref.pop_back();
        continue;
      }
      dist.push_back((b - a).norm());
    }
    const std::vector<double> thresholds = {0.01, 0.03, 0.05, 0.08, 0.2};
    const RecallReport r = destination_recall(pred, ref, cam, thresholds);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const auto hits = std::count_if(dist.begin(), dist.end(), [&](double d) { return d <= thresholds[t]; });
      REQUIRE(r.recall[t] == Catch::Approx(static_cast<double>(hits) / static_cast<double>(dist.size())).margin(1e-12));
      if (t > 0) REQUIRE(r.recall[t] >= r.recall[t - 1]);
    }
  }
}

TEST_CASE("execution success rate") {
  std::vector<TrialOutcome> trials;
  for (int i = 0; i < 10; ++i) trials.push_back(outcome({true}, Terminal::Done, i < 8));
  CHECK(execution_success_rate(trials) == Catch::Approx(0.8));
  CHECK_THROWS_AS(execution_success_rate(std::span<const TrialOutcome>{}), Error);
}

TEST_CASE("cumulative success examples") {
  const std::vector<TrialOutcome> trials = {
      outcome({true, true, true}, Terminal::Done, true),
      outcome({true, false, true}, Terminal::Done, false),
      outcome({true}, Terminal::Done, true),
      outcome({true, true}, Terminal::StepLimit, false),
  };
  const auto curve = cumulative_success(trials);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0] == 1.0);
  CHECK(curve[1] == 0.75);
  CHECK(curve[2] == 0.5);
}

TEST_CASE("cumulative success against a brute-force definition") {
  gen::Rng rng(19);
  for (int n = 0; n < 100; ++n) {
    std::vector<TrialOutcome> trials;
    const int count = gen::integer(rng, 1, 8);
    std::size_t length = 0;
    for (int i = 0; i < count; ++i) {
      std::vector<bool> steps;
      const int len = gen::integer(rng, 0, 6);
      for (int s = 0; s < len; ++s) steps.push_back(gen::integer(rng, 0, 4) != 0);
      const Terminal t = gen::coin(rng) ? Terminal::Done : Terminal::StepLimit;
      length = std::max(length, steps.size());
      trials.push_back(outcome(steps, t, false));
    }
    const auto curve = cumulative_success(trials);
    REQUIRE(curve.size() == length);
    for (std::size_t k = 0; k < length; ++k) {
      int ok = 0;
      for (const auto& t : trials) {
        bool all = true;
        for (std::size_t s = 0; s <= k; ++s) {
          if (s < t.step_success.size()) {
            all = all && t.step_success[s];
          } else {
            const bool finished = std::all_of(t.step_success.begin(), t.step_success.end(), [](bool b) { return b; }) &&
                                  t.terminal == Terminal::Done;
            all = all && finished;
          }
        }
        ok += all ? 1 : 0;
      }
      REQUIRE(curve[k] == Catch::Approx(static_cast<double>(ok) / count));
      if (k > 0) REQUIRE(curve[k] <= curve[k - 1]);
    }
  }
}

TEST_CASE("transcript judgments against the reference episode") {
  const Episode& ep = *corpus().episode_for_task("stack_blocks");
  OraclePlanner planner(ep);
  Transcript t = run_episode(*corpus().task("stack_blocks"), planner, {}, 0).transcript;
  CHECK(reference_plan(ep).size() == ep.clips.size() + 1);
  CHECK(planning_accuracy(judge_transcript(t, ep)) == 1.0);
  const DestinationPairs pairs = destination_pairs(t, ep);
  CHECK(destination_recall(pairs.predictions, pairs.references, ep.camera).render() == "1.00/1.00");

  t.entries[1].response.decision = "not a skill";
  const auto j = judge_transcript(t, ep);
  CHECK_FALSE(j[1].predicted);
  CHECK_FALSE(j[1].correct);
  CHECK(planning_accuracy(j) == Catch::Approx(4.0 / 5.0));
}

TEST_CASE("evaluation does not depend on file names or reparsing") {
  std::vector<Transcript> ts;
  for (const char* name : {"stack_blocks", "pick_object"}) {
    OraclePlanner planner(*corpus().episode_for_task(name));
    for (std::uint64_t s = 0; s < 3; ++s) ts.push_back(run_episode(*corpus().task(name), planner, {}, s).transcript);
  }
  std::vector<Transcript> reparsed;
  for (auto it = ts.rbegin(); it != ts.rend(); ++it) reparsed.push_back(load_transcript(serialize_transcript(*it)));
  const auto a = report_to_json(evaluate_transcripts(ts, &corpus()));
  const auto b = report_to_json(evaluate_transcripts(reparsed, &corpus()));
  CHECK(a == b);
  const EvaluationReport r = evaluate_transcripts(ts, &corpus());
  REQUIRE(r.tasks.size() == 2);
  CHECK(r.tasks[0].task == "pick_object");
  CHECK(r.tasks[1].success_rate == 1.0);
  CHECK(r.tasks[1].planning_accuracy == 1.0);
  CHECK(render_table(r).find("stack_blocks") != std::string::npos);
  CHECK_FALSE(evaluate_transcripts(ts).tasks[0].planning_accuracy);
}
