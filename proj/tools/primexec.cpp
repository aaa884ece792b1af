// primexec: corpus validation, spatial re-derivation, episode runs, evaluation and the oracle service.

#include "primexec/corpus.hpp"
#include "primexec/engine.hpp"
#include "primexec/errors.hpp"
#include "primexec/metrics.hpp"
#include "primexec/protocol.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace primexec;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path corpus_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kCorpusEnvVar); env && *env) return env;
  throw UsageError(fmt::format("no corpus: pass --corpus or set {}", kCorpusEnvVar));
}

// ---------------------------------------------------------------- validate / derive / inspect

int cmd_validate(const fs::path& root) {
  if (!fs::is_directory(root)) throw UsageError(root.string() + " is not a directory");
  const CorpusReport report = validate_corpus(root);
  for (const auto& f : report.files) {
    std::cout << fmt::format("{} {} ({})\n", f.ok ? "ok  " : "FAIL", f.path, f.kind.empty() ? "?" : f.kind);
    for (const auto& d : f.diagnostics) std::cout << "     " << d << "\n";
  }
  const auto failed = std::count_if(report.files.begin(), report.files.end(), [](const auto& f) { return !f.ok; });
  std::cout << fmt::format("{} documents, {} failed\n", report.files.size(), failed);
  return report.ok() ? kOk : kFailure;
}

int cmd_derive(const fs::path& root, bool write) {
  if (!fs::is_directory(root)) throw UsageError(root.string() + " is not a directory");
  bool clean = true;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const std::string text = read_file(path);
    if (json::parse(text, nullptr, false).value("kind", "") != "episode") continue;
    const std::string rel = fs::relative(path, root).generic_string();
    try {
      const Episode ep = load_episode(text);
      const auto diffs = regeneration_diffs(ep);
      for (const auto& d : diffs) {
        std::cout << fmt::format("{}: clip {} {} differs by {:g}\n", rel, d.clip_index, d.field, d.deviation);
      }
      const std::string regenerated = serialize_episode(rederive(ep));
      if (regenerated != text) {
        if (write) {
          write_file(path, regenerated);
          std::cout << fmt::format("{}: rewritten\n", rel);
        } else if (diffs.empty()) {
          std::cout << fmt::format("{}: not in canonical form\n", rel);
          clean = false;
        }
      }
      if (!diffs.empty() && !write) clean = false;
      if (diffs.empty() && regenerated == text) std::cout << fmt::format("{}: up to date\n", rel);
    } catch (const Error& e) {
      std::cout << fmt::format("{}: {}\n", rel, e.what());
      clean = false;
    }
  }
  return clean ? kOk : kFailure;
}

std::string vec_text(const Vec3& v) { return fmt::format("({:.4f}, {:.4f}, {:.4f})", v.x(), v.y(), v.z()); }

int cmd_inspect(const fs::path& path) {
  const Episode ep = load_episode_file(path.string());
  std::cout << fmt::format("episode {}  task {}\n", ep.id, ep.task);
  std::cout << fmt::format("description: {}\n", ep.task_description);
  if (ep.scene_caption) std::cout << fmt::format("scene: {}\n", *ep.scene_caption);
  std::cout << fmt::format("{} records, {} clips\n\n", ep.records.size(), ep.clips.size());
  const Episode derived = rederive(ep);
  for (std::size_t i = 0; i < ep.clips.size(); ++i) {
    const Clip& c = derived.clips[i];
    std::cout << fmt::format("[{}] frames {}..{}  {}\n", i, c.start_frame, c.end_frame, format_skill(c.skill));
    if (!c.spatial) continue;
    const SpatialInfo& s = *c.spatial;
    std::cout << fmt::format("    destination {}  -> world {}\n", format_destination(s.destination),
                             vec_text(unproject(ep.camera, s.destination)));
    std::cout << fmt::format("    direction   {}\n", s.direction ? vec_text(s.direction->vector()) : "-");
    std::cout << fmt::format("    trajectory  {} poses, {} -> {}\n", s.trajectory.size(),
                             vec_text(s.trajectory.front().position()), vec_text(s.trajectory.back().position()));
  }
  const auto diffs = regeneration_diffs(ep);
  std::cout << fmt::format("\nstored spatial info {}\n", diffs.empty() ? "matches re-derivation" : "is stale");
  return kOk;
}

// ---------------------------------------------------------------- run

struct RunOptions {
  std::string task;
  std::string planner = "oracle";
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  std::size_t max_steps = 32;
  std::size_t chunk_size = 5;
  double noise_sigma = 0.0;
  double grasp_failure = 0.0;
  std::string corpus;
  std::string out = "transcripts";
  std::size_t workers = 1;
};

int cmd_run(const RunOptions& o) {
  std::optional<Endpoint> endpoint;
  if (o.planner.starts_with("endpoint=")) {
    try {
      endpoint = parse_endpoint(std::string_view(o.planner).substr(9));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  } else if (o.planner != "oracle") {
    throw UsageError("--planner must be 'oracle' or 'endpoint=HOST:PORT'");
  }
  if (o.max_steps < 1) throw UsageError("--max-steps must be at least 1");
  if (o.chunk_size < 1) throw UsageError("--chunk-size must be at least 1");

  const Corpus corpus = load_corpus(corpus_root(o.corpus));
  const TaskSpec* task = corpus.task(o.task);
  if (!task) throw UsageError(fmt::format("unknown task '{}'", o.task));

  PlannerFactory factory;
  if (endpoint) {
    factory = [ep = *endpoint] { return std::make_unique<EndpointPlanner>(ep); };
  } else {
    const Episode* reference = corpus.episode_for_task(o.task);
    if (!reference) throw Error(fmt::format("corpus has no episode for task '{}'", o.task));
    factory = [reference] { return std::make_unique<OraclePlanner>(*reference); };
  }

  EngineConfig config;
  config.max_steps = o.max_steps;
  config.controller.chunk_size = o.chunk_size;
  config.controller.failure.destination_noise_sigma = o.noise_sigma;
  config.controller.failure.grasp_failure_prob = o.grasp_failure;

  TranscriptDirectory sink(o.out);
  const auto results = run_trials(*task, factory, o.trials, o.seed, config, o.workers, &sink);

  json rows = json::array();
  std::size_t successes = 0;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const TrialResult& r = results[i];
    json row{{"trial", i}, {"seed", r.seed}, {"success", r.success}};
    if (r.transcript) {
      row["terminal"] = to_string(r.transcript->terminal);
      row["steps"] = r.transcript->entries.size();
      row["file"] = TranscriptDirectory::file_name(*r.transcript, i);
    }
    if (r.error) row["error"] = *r.error;
    successes += r.success;
    errors += r.error.has_value();
    std::cout << fmt::format("trial {:>3}  seed {:>6}  {:<13} {}\n", i, r.seed,
                             r.transcript ? to_string(r.transcript->terminal) : "error",
                             r.success ? "success" : (r.error ? *r.error : "failure"));
    rows.push_back(std::move(row));
  }
  const double rate = static_cast<double>(successes) / static_cast<double>(results.size());
  const json summary{{"schema", 1},
                     {"kind", "run_summary"},
                     {"task", task->name},
                     {"planner", endpoint ? "endpoint" : "oracle"},
                     {"trials", results.size()},
                     {"seed", o.seed},
                     {"max_steps", o.max_steps},
                     {"chunk_size", o.chunk_size},
                     {"noise_sigma", o.noise_sigma},
                     {"successes", successes},
                     {"errors", errors},
                     {"success_rate", rate},
                     {"results", std::move(rows)}};
  write_file(fs::path(o.out) / "summary.json", summary.dump(2) + "\n");
  std::cout << fmt::format("{}: {}/{} succeeded ({:.2f}), transcripts in {}\n", task->name, successes,
                           results.size(), rate, o.out);
  return errors == 0 ? kOk : kFailure;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const fs::path& dir, const std::string& corpus_flag, const std::string& report_path, bool as_json) {
  if (!fs::is_directory(dir)) throw UsageError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  bool ok = true;
  std::vector<Transcript> transcripts;
  for (const auto& path : files) {
    const std::string text = read_file(path);
    if (json::parse(text, nullptr, false).value("kind", "") != "transcript") continue;
    try {
      transcripts.push_back(load_transcript(text));
    } catch (const Error& e) {
      std::cerr << fmt::format("{}: {}\n", path.string(), e.what());
      ok = false;
    }
  }
  if (transcripts.empty()) {
    std::cerr << "no transcripts in " << dir.string() << "\n";
    return kFailure;
  }

  std::optional<Corpus> corpus;
  if (!corpus_flag.empty() || std::getenv(kCorpusEnvVar)) corpus = load_corpus(corpus_root(corpus_flag));
  const EvaluationReport report = evaluate_transcripts(transcripts, corpus ? &*corpus : nullptr);
  const json doc = report_to_json(report);
  if (!report_path.empty()) write_file(report_path, doc.dump(2) + "\n");
  if (as_json) {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << render_table(report);
  }
  return ok ? kOk : kFailure;
}

// ---------------------------------------------------------------- serve-oracle

int cmd_serve(const std::string& corpus_flag, const std::string& bind) {
  Endpoint endpoint;
  try {
    endpoint = parse_endpoint(bind);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  Corpus corpus = load_corpus(corpus_root(corpus_flag));

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // inherited by the server threads

  OracleServer server(std::move(corpus.episodes), endpoint);
  std::cout << "listening on " << server.endpoint().to_string() << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  server.stop();
  std::cout << fmt::format("stopped after {} connections\n", server.connections_served());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"primexec: primitive-skill plan/execute toolkit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::string corpus_path;
  auto* validate = app.add_subcommand("validate", "check every document under a corpus directory");
  validate->add_option("corpus", corpus_path, "corpus directory")->required();

  bool write = false;
  auto* derive = app.add_subcommand("derive", "re-derive spatial info and report differences");
  derive->add_option("corpus", corpus_path, "corpus directory")->required();
  derive->add_flag("--write", write, "rewrite episodes with the re-derived values");

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "run seeded trials of a task against a planner");
  run_cmd->add_option("--task", run.task, "task name")->required();
  run_cmd->add_option("--planner", run.planner, "oracle | endpoint=HOST:PORT")->capture_default_str();
  run_cmd->add_option("--trials", run.trials, "number of trials")->capture_default_str()->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", run.seed, "seed of the first trial")->capture_default_str();
  run_cmd->add_option("--max-steps", run.max_steps, "decision limit per episode")->capture_default_str();
  run_cmd->add_option("--chunk-size", run.chunk_size, "actions between re-observations")->capture_default_str();
  run_cmd->add_option("--noise-sigma", run.noise_sigma, "destination noise (meters)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--grasp-failure", run.grasp_failure, "grasp slip probability")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  run_cmd->add_option("--corpus", run.corpus, fmt::format("corpus directory (default ${})", kCorpusEnvVar));
  run_cmd->add_option("--out", run.out, "transcript output directory")->capture_default_str();
  run_cmd->add_option("--workers", run.workers, "parallel trials")->capture_default_str()->check(CLI::PositiveNumber);

  std::string eval_dir;
  std::string report_path;
  bool as_json = false;
  auto* eval = app.add_subcommand("eval", "score a directory of transcripts");
  eval->add_option("transcripts", eval_dir, "transcript directory")->required();
  eval->add_option("--corpus", corpus_path, "reference corpus for plan accuracy and recall");
  eval->add_option("--report", report_path, "write the report document here");
  eval->add_flag("--json", as_json, "print the report document instead of the table");

  std::string bind = "127.0.0.1:7070";
  auto* serve = app.add_subcommand("serve-oracle", "serve oracle plans over the wire protocol");
  serve->add_option("--corpus", corpus_path, "corpus directory");
  serve->add_option("--bind", bind, "HOST:PORT")->capture_default_str();

  std::string episode_path;
  auto* inspect = app.add_subcommand("inspect", "print an episode's clips and derived spatial info");
  inspect->add_option("episode", episode_path, "episode document")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*validate) return cmd_validate(corpus_path);
    if (*derive) return cmd_derive(corpus_path, write);
    if (*run_cmd) return cmd_run(run);
    if (*eval) return cmd_eval(eval_dir, corpus_path, report_path, as_json);
    if (*serve) return cmd_serve(corpus_path, bind);
    if (*inspect) return cmd_inspect(episode_path);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
