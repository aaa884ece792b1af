#include "primexec/engine.hpp"

#include "primexec/corpus.hpp"
#include "primexec/json_util.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <thread>

namespace primexec {

using nlohmann::json;

namespace {

constexpr std::pair<Terminal, std::string_view> kTerminalNames[] = {
    {Terminal::Done, "done"},
    {Terminal::Reset, "reset"},
    {Terminal::ErrorAborted, "error_aborted"},
    {Terminal::StepLimit, "step_limit"},
};

}  // namespace

std::string_view to_string(Terminal t) {
  for (const auto& [value, name] : kTerminalNames) {
    if (value == t) return name;
  }
  return "?";
}

Terminal terminal_from_string(std::string_view name) {
  for (const auto& [value, n] : kTerminalNames) {
    if (n == name) return value;
  }
  throw SchemaError("/terminal", "unknown terminal '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- transcript documents

json transcript_to_json(const Transcript& t) {
  json entries = json::array();
  for (const auto& e : t.entries) {
    json j{{"step", e.step},
           {"request", message_to_json(e.request)},
           {"response", message_to_json(e.response)},
           {"action_count", e.action_count},
           {"success", e.success}};
    if (e.resolved_skill) j["resolved_skill"] = *e.resolved_skill;
    if (e.note) j["note"] = *e.note;
    entries.push_back(std::move(j));
  }
  json doc{{"schema", kTranscriptSchemaVersion},
           {"kind", "transcript"},
           {"task", t.task},
           {"task_description", t.task_description},
           {"seed", t.seed},
           {"entries", std::move(entries)},
           {"terminal", to_string(t.terminal)},
           {"success", t.success}};
  if (t.error) doc["error"] = *t.error;
  return doc;
}

namespace {

template <class M>
M embedded_message(const json& j, const std::string& path) {
  Message m;
  try {
    m = message_from_json(j);
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
  if (auto* v = std::get_if<M>(&m)) return *v;
  throw SchemaError(path, "unexpected message type");
}

}  // namespace

Transcript transcript_from_json(const json& doc) {
  jsonutil::expect_header(doc, "transcript", kTranscriptSchemaVersion);
  Transcript t;
  t.task = jsonutil::get_string(doc, "", "task");
  t.task_description = jsonutil::get_string(doc, "", "task_description");
  t.seed = jsonutil::get_index(doc, "", "seed");
  const json& entries = jsonutil::get_array(doc, "", "entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string path = fmt::format("/entries/{}", i);
    const json& j = entries[i];
    TranscriptEntry e;
    e.step = jsonutil::get_index(j, path, "step");
    e.request = embedded_message<PlanRequest>(jsonutil::get(j, path, "request"), path + "/request");
    e.response = embedded_message<PlanResponse>(jsonutil::get(j, path, "response"), path + "/response");
    e.resolved_skill = jsonutil::get_optional_string(j, path, "resolved_skill");
    e.action_count = jsonutil::get_index(j, path, "action_count");
    e.success = jsonutil::get_bool(j, path, "success", false);
    e.note = jsonutil::get_optional_string(j, path, "note");
    if (e.step != i) throw SchemaError(path + "/step", "entries must be ordered by step");
    t.entries.push_back(std::move(e));
  }
  t.terminal = terminal_from_string(jsonutil::get_string(doc, "", "terminal"));
  t.success = jsonutil::get_bool(doc, "", "success", false);
  t.error = jsonutil::get_optional_string(doc, "", "error");
  return t;
}

std::string serialize_transcript(const Transcript& t) { return transcript_to_json(t).dump(2) + "\n"; }

Transcript load_transcript(std::string_view document) {
  return transcript_from_json(jsonutil::parse_document(document));
}

// ---------------------------------------------------------------- loop

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t failure_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(failure_seed), static_cast<std::uint32_t>(failure_seed >> 32)};
  return std::mt19937_64(seq);
}

PlanRequest make_request(const TaskSpec& task, const std::vector<std::string>& history, const Observation& obs) {
  PlanRequest r;
  r.task_description = task.description;
  r.scene_description = task.scene_caption;
  r.history = history;
  r.arm_image_position = obs.arm_image_position;
  r.object_views = obs.object_views;
  r.frame_id = obs.frame_id;
  return r;
}

class Runner {
 public:
  Runner(const TaskSpec& task, Planner& planner, const EngineConfig& config, std::uint64_t seed)
      : task_(task), planner_(planner), config_(config), rng_(make_rng(seed, config.controller.failure.seed)) {
    state_.world = task.initial_world(seed);
    transcript_.task = task.name;
    transcript_.task_description = task.description;
    transcript_.seed = seed;
  }

  EpisodeResult run() {
    try {
      loop();
    } catch (const UnresolvedPosError& e) {
      abort(e);
    } catch (const ProtocolError& e) {
      abort(e);
    } catch (const TransportError& e) {
      abort(e);
    } catch (const Error& e) {
      abort(e);
    }
    const bool success = transcript_.success;
    return EpisodeResult{std::move(transcript_), std::move(state_.world), success};
  }

 private:
  void loop() {
    Observation obs = observe(state_.world, frame_++);
    std::vector<std::string> history;
    while (state_.step_index < config_.max_steps) {
      pending_ = TranscriptEntry{};
      pending_->step = state_.step_index;
      pending_->request = make_request(task_, history, obs);
      pending_->response = planner_.plan(pending_->request);
      responded_ = true;
      TranscriptEntry& entry = *pending_;

      const PrimitiveSkill skill = resolve_response(entry.response);
      entry.resolved_skill = format_skill(skill);

      if (skill.kind == SkillKind::Done) {
        entry.success = check_success(task_, state_.world);
        finish(Terminal::Done, entry.success);
        return;
      }
      if (skill.kind == SkillKind::Reset) {
        const ControllerPlan plan = home_plan(state_.world, config_.controller);
        obs = execute(plan);
        entry.action_count = plan.action_count();
        entry.success = false;
        finish(Terminal::Reset, false);
        return;
      }

      const ControllerPlan plan = config_.controller_fn
                                      ? config_.controller_fn(skill, state_.world, config_.controller, rng_)
                                      : controller_dispatch(skill, state_.world, config_.controller, rng_);
      obs = execute(plan);
      entry.action_count = plan.action_count();
      entry.success = plan.ok;
      if (!plan.ok) entry.note = plan.note;

      history.push_back(format_skill(unbind_destination(skill)));
      state_.history.push_back(skill);
      ++state_.step_index;
      transcript_.entries.push_back(std::move(*pending_));
      pending_.reset();
      responded_ = false;
    }
    transcript_.terminal = Terminal::StepLimit;
    transcript_.success = false;
  }

  Observation execute(const ControllerPlan& plan) {
    std::optional<Observation> obs;
    for (const auto& chunk : plan.chunks) {
      for (const Action& a : chunk) state_.world = step(state_.world, a);
      obs = observe(state_.world, frame_++);
    }
    if (!obs) obs = observe(state_.world, frame_++);
    return *obs;
  }

  void finish(Terminal terminal, bool success) {
    state_.history.push_back(parse_skill(pending_->response.decision));
    ++state_.step_index;
    transcript_.entries.push_back(std::move(*pending_));
    pending_.reset();
    transcript_.terminal = terminal;
    transcript_.success = success;
  }

  template <class E>
  [[noreturn]] void abort(const E& e) {
    if (pending_ && responded_) {
      pending_->note = e.what();
      transcript_.entries.push_back(std::move(*pending_));
    }
    pending_.reset();
    transcript_.terminal = Terminal::ErrorAborted;
    transcript_.success = false;
    transcript_.error = e.what();
    throw EpisodeAbort<E>(e, std::move(transcript_));
  }

  const TaskSpec& task_;
  Planner& planner_;
  const EngineConfig& config_;
  std::mt19937_64 rng_;
  EngineState state_;
  Transcript transcript_;
  std::optional<TranscriptEntry> pending_;
  bool responded_ = false;
  std::uint64_t frame_ = 0;
};

}  // namespace

EpisodeResult run_episode(const TaskSpec& task, Planner& planner, const EngineConfig& config, std::uint64_t seed) {
  if (config.max_steps < 1) throw Error("max_steps must be at least 1");
  return Runner(task, planner, config, seed).run();
}

// ---------------------------------------------------------------- trials

TranscriptDirectory::TranscriptDirectory(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::string TranscriptDirectory::file_name(const Transcript& t, std::size_t trial_index) {
  return fmt::format("{}_trial{:03}_seed{}.json", t.task, trial_index, t.seed);
}

std::filesystem::path TranscriptDirectory::write(const Transcript& t, std::size_t trial_index) {
  const std::filesystem::path path = root_ / file_name(t, trial_index);
  const std::string text = serialize_transcript(t);
  std::lock_guard lock(mutex_);
  write_file(path, text);
  return path;
}

namespace {

TrialResult run_trial(const TaskSpec& task, const PlannerFactory& planners, std::uint64_t seed,
                      const EngineConfig& config) {
  TrialResult r;
  r.seed = seed;
  try {
    std::unique_ptr<Planner> planner = planners();
    EpisodeResult result = run_episode(task, *planner, config, seed);
    r.success = result.success;
    r.transcript = std::move(result.transcript);
  } catch (const AbortedEpisode& aborted) {
    r.transcript = aborted.transcript();
    r.error = aborted.transcript().error;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

}  // namespace

std::vector<TrialResult> run_trials(const TaskSpec& task, const PlannerFactory& planners, std::size_t n,
                                    std::uint64_t base_seed, const EngineConfig& config, std::size_t workers,
                                    TranscriptDirectory* sink) {
  if (n < 1) throw Error("run_trials needs at least one trial");
  std::vector<TrialResult> results(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      results[i] = run_trial(task, planners, base_seed + i, config);
      if (sink && results[i].transcript) sink->write(*results[i].transcript, i);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, n);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return results;
}

}  // namespace primexec
