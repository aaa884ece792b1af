#include "primexec/corpus.hpp"

#include "primexec/engine.hpp"
#include "primexec/errors.hpp"
#include "primexec/json_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace primexec {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("short write to " + path.string());
}

namespace {

std::vector<fs::path> documents(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error("not a directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string document_kind(std::string_view text) {
  const auto doc = jsonutil::parse_document(text);
  return jsonutil::get_string(doc, "", "kind");
}

}  // namespace

const TaskSpec* Corpus::task(std::string_view name) const {
  for (const auto& t : tasks) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const Episode* Corpus::episode_for_task(std::string_view name) const {
  for (const auto& e : episodes) {
    if (e.task == name) return &e;
  }
  return nullptr;
}

const Episode* Corpus::episode_for_description(std::string_view description) const {
  for (const auto& e : episodes) {
    if (e.task_description == description) return &e;
  }
  return nullptr;
}

Corpus load_corpus(const fs::path& root) {
  Corpus corpus;
  for (const auto& path : documents(root)) {
    const std::string text = read_file(path);
    try {
      const std::string kind = document_kind(text);
      if (kind == "episode") {
        corpus.episodes.push_back(load_episode(text));
      } else if (kind == "task") {
        corpus.tasks.push_back(load_task(text));
      } else if (kind == "transcript") {
        load_transcript(text);
      } else if (kind != "camera_calibration") {
        throw SchemaError("/kind", "unknown document kind '" + kind + "'");
      }
    } catch (const Error& e) {
      throw Error(fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  std::sort(corpus.episodes.begin(), corpus.episodes.end(),
            [](const Episode& a, const Episode& b) { return a.id < b.id; });
  std::sort(corpus.tasks.begin(), corpus.tasks.end(),
            [](const TaskSpec& a, const TaskSpec& b) { return a.name < b.name; });
  return corpus;
}

bool CorpusReport::ok() const {
  return std::all_of(files.begin(), files.end(), [](const FileReport& f) { return f.ok; });
}

CorpusReport validate_corpus(const fs::path& root) {
  CorpusReport report;
  for (const auto& path : documents(root)) {
    FileReport file;
    file.path = fs::relative(path, root).generic_string();
    try {
      const std::string text = read_file(path);
      file.kind = document_kind(text);
      if (file.kind == "episode") {
        const Episode ep = load_episode(text);
        for (const auto& d : regeneration_diffs(ep)) {
          file.diagnostics.push_back(fmt::format("clip {} {} differs from re-derived value by {:g}", d.clip_index,
                                                 d.field, d.deviation));
        }
      } else if (file.kind == "task") {
        load_task(text);
      } else if (file.kind == "camera_calibration") {
        load_calibration(text);
      } else if (file.kind == "transcript") {
        load_transcript(text);
      } else {
        file.diagnostics.push_back("unknown document kind '" + file.kind + "'");
      }
    } catch (const Error& e) {
      file.diagnostics.push_back(e.what());
    }
    file.ok = file.diagnostics.empty();
    report.files.push_back(std::move(file));
  }
  return report;
}

}  // namespace primexec
