#pragma once

// Scoring of transcripts and offline predictions.

#include "primexec/corpus.hpp"
#include "primexec/engine.hpp"
#include "primexec/geometry.hpp"
#include "primexec/skill.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace primexec {

/// Kind must match; the object must match case-insensitively when the reference names one; the
/// attribute likewise when the reference has one. Destinations are not compared.
bool plan_matches(const PrimitiveSkill& predicted, const PrimitiveSkill& reference);

struct PlanJudgment {
  std::optional<PrimitiveSkill> predicted;  // absent: missing step or unparseable decision
  std::optional<PrimitiveSkill> reference;  // absent: extra step
  bool correct = false;
};

/// Aligns by step index; steps beyond the shorter sequence are judged incorrect.
std::vector<PlanJudgment> judge_plan(std::span<const PrimitiveSkill> predicted,
                                     std::span<const PrimitiveSkill> reference);

/// Fraction of correct judgments; 1.0 when there are none.
double planning_accuracy(std::span<const PlanJudgment> judgments);
/// Micro average over aligned sequence pairs. Throws Error when the counts differ.
double planning_accuracy(const std::vector<std::vector<PrimitiveSkill>>& predicted,
                         const std::vector<std::vector<PrimitiveSkill>>& reference);

/// Reference decisions of an episode: its clip skills followed by "done".
std::vector<PrimitiveSkill> reference_plan(const Episode& episode);
/// Judgments of a transcript's decisions against an episode's reference plan.
std::vector<PlanJudgment> judge_transcript(const Transcript& transcript, const Episode& episode);

inline constexpr double kDefaultRecallThresholds[] = {0.05, 0.10};

struct RecallReport {
  std::vector<double> thresholds;  // meters
  std::vector<double> recall;      // per threshold, in [0, 1]; 0 when there are no samples
  std::size_t n_samples = 0;

  /// Two-decimal recalls joined by '/', e.g. "0.48/0.78".
  std::string render() const;
};

/// Distances are measured between unprojected 3D points. Throws Error on a length mismatch.
RecallReport destination_recall(std::span<const Destination> predictions, std::span<const Destination> references,
                                const CameraModel& camera,
                                std::span<const double> thresholds = kDefaultRecallThresholds);

/// Predicted/reference destination pairs of a transcript, step-aligned with an episode's clips.
/// Steps where either side has no destination are skipped.
struct DestinationPairs {
  std::vector<Destination> predictions;
  std::vector<Destination> references;
};
DestinationPairs destination_pairs(const Transcript& transcript, const Episode& episode);

struct TrialOutcome {
  std::vector<bool> step_success;
  Terminal terminal = Terminal::Done;
  bool success = false;
};

TrialOutcome outcome_of(const Transcript& transcript);

/// Successes over trials. Throws Error for an empty input.
double execution_success_rate(std::span<const TrialOutcome> trials);

/// curve[k] = fraction of trials whose steps 0..k all succeeded. A trial with fewer than k + 1
/// steps counts when all its steps succeeded and it ended with done.
std::vector<double> cumulative_success(std::span<const TrialOutcome> trials);

struct TaskEvaluation {
  std::string task;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t errors = 0;
  double success_rate = 0.0;
  std::optional<double> planning_accuracy;  // when the corpus has a reference episode
  std::optional<RecallReport> recall;
  std::vector<double> cumulative;
};

struct EvaluationReport {
  std::vector<TaskEvaluation> tasks;  // sorted by task name
  std::size_t transcripts = 0;
};

EvaluationReport evaluate_transcripts(std::span<const Transcript> transcripts, const Corpus* corpus = nullptr);
nlohmann::json report_to_json(const EvaluationReport& report);
/// Fixed-width text table, one row per task.
std::string render_table(const EvaluationReport& report);

}  // namespace primexec
