#pragma once

// The plan/execute loop: observe, ask the planner, resolve the destination, run the controller
// chunk by chunk, append the decision to the history, repeat until done/reset.

#include "primexec/errors.hpp"
#include "primexec/protocol.hpp"
#include "primexec/sim.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace primexec {

enum class Terminal { Done, Reset, ErrorAborted, StepLimit };

std::string_view to_string(Terminal t);
/// Throws SchemaError for an unknown name.
Terminal terminal_from_string(std::string_view name);

using ControllerFn =
    std::function<ControllerPlan(const PrimitiveSkill&, const WorldState&, const ControllerConfig&, std::mt19937_64&)>;

struct EngineConfig {
  std::size_t max_steps = 32;
  ControllerConfig controller;
  ControllerFn controller_fn;  // empty: controller_dispatch
};

struct TranscriptEntry {
  std::size_t step = 0;
  PlanRequest request;
  PlanResponse response;
  std::optional<std::string> resolved_skill;  // decision with its destination bound
  std::size_t action_count = 0;
  bool success = false;  // controller reported the step as achieved; for done, the task predicate
  std::optional<std::string> note;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

inline constexpr int kTranscriptSchemaVersion = 1;

struct Transcript {
  std::string task;
  std::string task_description;
  std::uint64_t seed = 0;
  std::vector<TranscriptEntry> entries;
  Terminal terminal = Terminal::ErrorAborted;
  bool success = false;
  std::optional<std::string> error;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

nlohmann::json transcript_to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);
/// Canonical document text (2-space indented JSON, trailing newline).
std::string serialize_transcript(const Transcript& t);
Transcript load_transcript(std::string_view document);

/// Engine bookkeeping between loop iterations.
struct EngineState {
  std::size_t step_index = 0;
  std::vector<PrimitiveSkill> history;
  WorldState world;
};

struct EpisodeResult {
  Transcript transcript;
  WorldState final_world;
  bool success = false;
};

/// Carries the partial transcript of an aborted episode.
class AbortedEpisode {
 public:
  explicit AbortedEpisode(Transcript t) : transcript_(std::move(t)) {}
  virtual ~AbortedEpisode() = default;
  const Transcript& transcript() const noexcept { return transcript_; }

 private:
  Transcript transcript_;
};

/// Thrown by run_episode: catchable both as the original error type E and as AbortedEpisode.
template <class E>
class EpisodeAbort : public E, public AbortedEpisode {
 public:
  EpisodeAbort(const E& error, Transcript t) : E(error), AbortedEpisode(std::move(t)) {}
};

/// Runs one episode on task.initial_world(seed). Throws EpisodeAbort<UnresolvedPosError>,
/// EpisodeAbort<ProtocolError>, EpisodeAbort<TransportError> or EpisodeAbort<Error>.
EpisodeResult run_episode(const TaskSpec& task, Planner& planner, const EngineConfig& config, std::uint64_t seed);

struct TrialResult {
  std::uint64_t seed = 0;
  std::optional<Transcript> transcript;
  bool success = false;
  std::optional<std::string> error;
};

using PlannerFactory = std::function<std::unique_ptr<Planner>()>;

/// Writes one transcript file per trial; safe for concurrent use from distinct trials.
class TranscriptDirectory {
 public:
  explicit TranscriptDirectory(std::filesystem::path root);
  std::filesystem::path write(const Transcript& t, std::size_t trial_index);
  const std::filesystem::path& root() const noexcept { return root_; }
  static std::string file_name(const Transcript& t, std::size_t trial_index);

 private:
  std::filesystem::path root_;
  std::mutex mutex_;
};

/// Trials use seeds base_seed .. base_seed + n - 1, each with its own planner. Errors are recorded
/// per trial. Results are in trial order regardless of `workers`.
std::vector<TrialResult> run_trials(const TaskSpec& task, const PlannerFactory& planners, std::size_t n,
                                    std::uint64_t base_seed, const EngineConfig& config, std::size_t workers = 1,
                                    TranscriptDirectory* sink = nullptr);

}  // namespace primexec
