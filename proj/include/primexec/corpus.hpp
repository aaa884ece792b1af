#pragma once

#include "primexec/episode.hpp"
#include "primexec/sim.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace primexec {

/// Episodes and task specs found under a directory tree (`*.json`, dispatched on the "kind" field).
/// Calibration and transcript documents are checked but not collected.
struct Corpus {
  std::vector<Episode> episodes;  // sorted by id
  std::vector<TaskSpec> tasks;    // sorted by name

  const TaskSpec* task(std::string_view name) const;
  /// First episode (by id) recorded for the task.
  const Episode* episode_for_task(std::string_view name) const;
  const Episode* episode_for_description(std::string_view description) const;
};

/// Throws on the first invalid file.
Corpus load_corpus(const std::filesystem::path& root);

struct FileReport {
  std::string path;  // relative to the corpus root
  std::string kind;  // "episode", "task", or "" when unreadable
  bool ok = true;
  std::vector<std::string> diagnostics;
};

struct CorpusReport {
  std::vector<FileReport> files;  // sorted by path
  bool ok() const;
};

/// Loads every document, checks its invariants and, for episodes, that stored spatial info matches
/// a fresh derivation within 1e-9. Only I/O failures on the root itself throw.
CorpusReport validate_corpus(const std::filesystem::path& root);

/// Environment variable naming the default corpus directory.
inline constexpr const char* kCorpusEnvVar = "PRIMEXEC_CORPUS";

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace primexec
