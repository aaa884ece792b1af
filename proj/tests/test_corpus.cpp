#include "primexec/corpus.hpp"
#include "primexec/errors.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>

namespace fs = std::filesystem;
using namespace primexec;

namespace {

const fs::path kFixtures = PRIMEXEC_FIXTURES_DIR;

/// Scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("primexec-corpus-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* const kTaskNames[] = {"close_drawer", "pick_object",   "press_button", "receive_object",
                                  "stack_blocks", "take_down_object", "throw_garbage", "wipe_table"};

}  // namespace

TEST_CASE("bundled corpus validates") {
  const CorpusReport report = validate_corpus(kFixtures);
  for (const auto& f : report.files) {
    INFO(f.path);
    for (const auto& d : f.diagnostics) INFO(d);
    CHECK(f.ok);
  }
  CHECK(report.ok());
  CHECK(report.files.size() >= 17);
}

TEST_CASE("bundled corpus has the eight tasks with one episode each") {
  const Corpus corpus = load_corpus(kFixtures);
  REQUIRE(corpus.tasks.size() == 8);
  REQUIRE(corpus.episodes.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(corpus.tasks[i].name == kTaskNames[i]);
    const Episode* ep = corpus.episode_for_task(kTaskNames[i]);
    REQUIRE(ep);
    CHECK(ep->task_description == corpus.tasks[i].description);
    CHECK(corpus.episode_for_description(ep->task_description) == ep);
    // a task is never accomplished before anything happens
    CHECK_FALSE(check_success(corpus.tasks[i], corpus.tasks[i].initial_world(0)));
  }
  CHECK(corpus.task("fold_laundry") == nullptr);
}

TEST_CASE("one corrupted file is flagged alone") {
  TempDir dir;
  fs::copy(kFixtures, dir.path, fs::copy_options::recursive);
  std::string text = read_file(dir.path / "episodes" / "close_drawer_01.json");
  text.replace(text.find("\"end_frame\""), 11, "\"end_frome\"");
  write_file(dir.path / "episodes" / "close_drawer_01.json", text);

  const CorpusReport report = validate_corpus(dir.path);
  CHECK_FALSE(report.ok());
  std::vector<std::string> failed;
  for (const auto& f : report.files) {
    if (!f.ok) failed.push_back(f.path);
  }
  CHECK(failed == std::vector<std::string>{"episodes/close_drawer_01.json"});
  CHECK_THROWS_AS(load_corpus(dir.path), Error);
}

TEST_CASE("stale spatial info is reported") {
  TempDir dir;
  Episode ep = load_episode(read_file(kFixtures / "episodes" / "press_button_01.json"));
  ep.clips[1].spatial->destination = Destination(0.5, 0.5, 1.0);
  write_file(dir.path / "press_button_01.json", serialize_episode(ep));
  const CorpusReport report = validate_corpus(dir.path);
  REQUIRE(report.files.size() == 1);
  CHECK_FALSE(report.files[0].ok);
  CHECK(report.files[0].kind == "episode");
}

TEST_CASE("empty directory is an empty, successful report") {
  TempDir dir;
  const CorpusReport report = validate_corpus(dir.path);
  CHECK(report.files.empty());
  CHECK(report.ok());
}

TEST_CASE("unknown document kinds are reported") {
  TempDir dir;
  write_file(dir.path / "x.json", R"({"schema": 1, "kind": "recipe"})");
  const CorpusReport report = validate_corpus(dir.path);
  REQUIRE(report.files.size() == 1);
  CHECK_FALSE(report.ok());
}
