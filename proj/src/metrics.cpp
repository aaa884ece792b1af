#include "primexec/metrics.hpp"

#include "primexec/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <map>

namespace primexec {

using nlohmann::json;

namespace {

std::string lowered(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool field_matches(const std::optional<std::string>& predicted, const std::optional<std::string>& reference) {
  if (!reference) return true;
  return predicted && lowered(*predicted) == lowered(*reference);
}

}  // namespace

bool plan_matches(const PrimitiveSkill& predicted, const PrimitiveSkill& reference) {
  return predicted.kind == reference.kind && field_matches(predicted.object, reference.object) &&
         field_matches(predicted.attribute, reference.attribute);
}

std::vector<PlanJudgment> judge_plan(std::span<const PrimitiveSkill> predicted,
                                     std::span<const PrimitiveSkill> reference) {
  std::vector<PlanJudgment> out;
  const std::size_t n = std::max(predicted.size(), reference.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    PlanJudgment j;
    if (i < predicted.size()) j.predicted = predicted[i];
    if (i < reference.size()) j.reference = reference[i];
    j.correct = j.predicted && j.reference && plan_matches(*j.predicted, *j.reference);
    out.push_back(std::move(j));
  }
  return out;
}

double planning_accuracy(std::span<const PlanJudgment> judgments) {
  if (judgments.empty()) return 1.0;
  const auto correct = std::count_if(judgments.begin(), judgments.end(), [](const auto& j) { return j.correct; });
  return static_cast<double>(correct) / static_cast<double>(judgments.size());
}

double planning_accuracy(const std::vector<std::vector<PrimitiveSkill>>& predicted,
                         const std::vector<std::vector<PrimitiveSkill>>& reference) {
  if (predicted.size() != reference.size()) {
    throw Error(fmt::format("planning_accuracy: {} predicted sequences but {} references", predicted.size(),
                            reference.size()));
  }
  std::vector<PlanJudgment> all;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    auto judged = judge_plan(predicted[i], reference[i]);
    all.insert(all.end(), std::make_move_iterator(judged.begin()), std::make_move_iterator(judged.end()));
  }
  return planning_accuracy(all);
}

std::vector<PrimitiveSkill> reference_plan(const Episode& episode) {
  std::vector<PrimitiveSkill> plan;
  for (const auto& clip : episode.clips) plan.push_back(clip.skill);
  plan.push_back(PrimitiveSkill::done());
  return plan;
}

std::vector<PlanJudgment> judge_transcript(const Transcript& transcript, const Episode& episode) {
  const std::vector<PrimitiveSkill> reference = reference_plan(episode);
  std::vector<PlanJudgment> out;
  const std::size_t n = std::max(transcript.entries.size(), reference.size());
  for (std::size_t i = 0; i < n; ++i) {
    PlanJudgment j;
    if (i < transcript.entries.size()) {
      try {
        j.predicted = parse_skill(transcript.entries[i].response.decision);
      } catch (const Error&) {
      }
    }
    if (i < reference.size()) j.reference = reference[i];
    j.correct = j.predicted && j.reference && plan_matches(*j.predicted, *j.reference);
    out.push_back(std::move(j));
  }
  return out;
}

// ---------------------------------------------------------------- destinations

std::string RecallReport::render() const {
  std::string out;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    if (i) out += '/';
    out += fmt::format("{:.2f}", recall[i]);
  }
  return out;
}

RecallReport destination_recall(std::span<const Destination> predictions, std::span<const Destination> references,
                                const CameraModel& camera, std::span<const double> thresholds) {
  if (predictions.size() != references.size()) {
    throw Error(fmt::format("destination_recall: {} predictions but {} references", predictions.size(),
                            references.size()));
  }
  RecallReport report;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  report.n_samples = predictions.size();
  std::vector<double> distances;
  distances.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    distances.push_back((unproject(camera, predictions[i]) - unproject(camera, references[i])).norm());
  }
  for (double t : report.thresholds) {
    const auto hits = std::count_if(distances.begin(), distances.end(), [t](double d) { return d <= t; });
    report.recall.push_back(distances.empty() ? 0.0
                                              : static_cast<double>(hits) / static_cast<double>(distances.size()));
  }
  return report;
}

DestinationPairs destination_pairs(const Transcript& transcript, const Episode& episode) {
  DestinationPairs pairs;
  const std::size_t n = std::min(transcript.entries.size(), episode.clips.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& predicted = transcript.entries[i].response.destination;
    const auto& spatial = episode.clips[i].spatial;
    if (!predicted || !spatial) continue;
    pairs.predictions.push_back(*predicted);
    pairs.references.push_back(spatial->destination);
  }
  return pairs;
}

// ---------------------------------------------------------------- execution

TrialOutcome outcome_of(const Transcript& transcript) {
  TrialOutcome o;
  for (const auto& e : transcript.entries) o.step_success.push_back(e.success);
  o.terminal = transcript.terminal;
  o.success = transcript.success;
  return o;
}

double execution_success_rate(std::span<const TrialOutcome> trials) {
  if (trials.empty()) throw Error("execution_success_rate needs at least one trial");
  const auto ok = std::count_if(trials.begin(), trials.end(), [](const auto& t) { return t.success; });
  return static_cast<double>(ok) / static_cast<double>(trials.size());
}

std::vector<double> cumulative_success(std::span<const TrialOutcome> trials) {
  std::size_t length = 0;
  for (const auto& t : trials) length = std::max(length, t.step_success.size());
  std::vector<double> curve(length, 0.0);
  for (const auto& t : trials) {
    // first failing step; everything from there on is a failure for this trial
    std::size_t alive = 0;
    while (alive < t.step_success.size() && t.step_success[alive]) ++alive;
    const bool completes = alive == t.step_success.size() && t.terminal == Terminal::Done;
    const std::size_t covered = completes ? length : alive;
    for (std::size_t k = 0; k < covered; ++k) curve[k] += 1.0;
  }
  for (double& c : curve) c /= static_cast<double>(trials.size());
  return curve;
}

// ---------------------------------------------------------------- reports

EvaluationReport evaluate_transcripts(std::span<const Transcript> transcripts, const Corpus* corpus) {
  std::map<std::string, std::vector<const Transcript*>> by_task;
  for (const auto& t : transcripts) by_task[t.task].push_back(&t);

  EvaluationReport report;
  report.transcripts = transcripts.size();
  for (const auto& [task, group] : by_task) {
    TaskEvaluation ev;
    ev.task = task;
    ev.trials = group.size();
    std::vector<TrialOutcome> outcomes;
    for (const Transcript* t : group) {
      outcomes.push_back(outcome_of(*t));
      if (t->success) ++ev.successes;
      if (t->terminal == Terminal::ErrorAborted) ++ev.errors;
    }
    ev.success_rate = execution_success_rate(outcomes);
    ev.cumulative = cumulative_success(outcomes);

    const Episode* reference = corpus ? corpus->episode_for_task(task) : nullptr;
    if (reference) {
      std::vector<PlanJudgment> judgments;
      DestinationPairs pairs;
      for (const Transcript* t : group) {
        auto judged = judge_transcript(*t, *reference);
        judgments.insert(judgments.end(), judged.begin(), judged.end());
        auto p = destination_pairs(*t, *reference);
        pairs.predictions.insert(pairs.predictions.end(), p.predictions.begin(), p.predictions.end());
        pairs.references.insert(pairs.references.end(), p.references.begin(), p.references.end());
      }
      ev.planning_accuracy = planning_accuracy(judgments);
      if (!pairs.predictions.empty()) {
        ev.recall = destination_recall(pairs.predictions, pairs.references, reference->camera);
      }
    }
    report.tasks.push_back(std::move(ev));
  }
  return report;
}

json report_to_json(const EvaluationReport& report) {
  json tasks = json::array();
  std::size_t trials = 0;
  std::size_t successes = 0;
  for (const auto& ev : report.tasks) {
    json j{{"task", ev.task},
           {"trials", ev.trials},
           {"successes", ev.successes},
           {"errors", ev.errors},
           {"success_rate", ev.success_rate},
           {"cumulative_success", ev.cumulative}};
    if (ev.planning_accuracy) j["planning_accuracy"] = *ev.planning_accuracy;
    if (ev.recall) {
      j["destination_recall"] = json{{"thresholds", ev.recall->thresholds},
                                     {"recall", ev.recall->recall},
                                     {"n_samples", ev.recall->n_samples},
                                     {"rendered", ev.recall->render()}};
    }
    tasks.push_back(std::move(j));
    trials += ev.trials;
    successes += ev.successes;
  }
  return json{{"schema", 1},
              {"kind", "evaluation_report"},
              {"transcripts", report.transcripts},
              {"success_rate", trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0},
              {"tasks", std::move(tasks)}};
}

std::string render_table(const EvaluationReport& report) {
  std::string out = fmt::format("{:<18} {:>6} {:>8} {:>9} {:>9}  {}\n", "task", "trials", "success", "plan acc",
                                "r5/r10", "cumulative");
  for (const auto& ev : report.tasks) {
    std::string curve;
    for (std::size_t k = 0; k < ev.cumulative.size(); ++k) {
      if (k) curve += ' ';
      curve += fmt::format("{:.2f}", ev.cumulative[k]);
    }
    out += fmt::format("{:<18} {:>6} {:>8.2f} {:>9} {:>9}  {}\n", ev.task, ev.trials, ev.success_rate,
                       ev.planning_accuracy ? fmt::format("{:.2f}", *ev.planning_accuracy) : "-",
                       ev.recall ? ev.recall->render() : "-", curve);
  }
  return out;
}

}  // namespace primexec
