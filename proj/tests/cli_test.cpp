#include <gtest/gtest.h>

#include <sstream>

#include "support/study_fixtures.hpp"
#include "tutor/cli.hpp"

using namespace tutor;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "tutor");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, ValidateShippedPack) {
  const auto r = run({"validate", tutor::testing::kPackPath.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "pack valid: 4 lessons, 7 questions\n");
  EXPECT_EQ(run({"validate", tutor::testing::kPackPath.string(), "--rules", tutor::testing::kRulesPath.string()}).code, 0);
}

TEST(Cli, ValidateBrokenPack) {
  const auto dir = tutor::testing::fresh_dir("cli");
  auto j = nlohmann::json::parse(read_file(tutor::testing::kPackPath));
  j["posttest"].erase(0);
  const auto path = dir / "broken.pack.json";
  write_file_atomic(path, j.dump());
  const auto r = run({"validate", path.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("posttest-mismatch"), std::string::npos);
  EXPECT_EQ(run({"validate", (dir / "missing.json").string()}).code, 1);
  fs::remove_all(dir);
}

TEST(Cli, LintBadFile) {
  const auto r = run({"lint", (tutor::testing::kFixtureDir / "bad.R").string(), "--frames", "df", "--rules",
                      tutor::testing::kRulesPath.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(count_lines(r.out), 1u);
  EXPECT_NE(r.out.find("[gotcha zero-index]"), std::string::npos);
}

TEST(Cli, LintNotesDoNotFail) {
  const auto dir = tutor::testing::fresh_dir("cli");
  write_file_atomic(dir / "ok.R", "x = 1\n");
  const auto r = run({"lint", (dir / "ok.R").string(), "--rules", tutor::testing::kRulesPath.string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("[note assignment-arrow]"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"stats", "x", "--format", "xml"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, HeadlessRun) {
  const auto dir = tutor::testing::fresh_dir("cli");
  const std::vector<std::string> args{"run", tutor::testing::kPackPath.string(), "--script",
                                      (tutor::testing::kFixtureDir / "run" / "answers.json").string(), "--seed", "42",
                                      "--store", dir.string()};
  const auto r = run(args);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("pretest: 7 answered, score 2/7"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("lessons: 4 completed, 25 steps"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("posttest: 7 answered, score 6/7"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("phases: pretest lessons posttest survey done"), std::string::npos);
  EXPECT_NE(r.out.find("replay: identical"), std::string::npos);

  const auto stored = read_file(dir / "python-to-r-P1-42.json");
  fs::remove_all(dir);
  EXPECT_EQ(run(args).out, r.out);
  EXPECT_EQ(read_file(dir / "python-to-r-P1-42.json"), stored);
  fs::remove_all(dir);
}

TEST(Cli, RunWithIncompleteScript) {
  const auto dir = tutor::testing::fresh_dir("cli");
  write_file_atomic(dir / "script.json", R"({"pretest": {"q1": [0]}})");
  const auto r = run({"run", tutor::testing::kPackPath.string(), "--script", (dir / "script.json").string(), "--seed", "1",
                      "--store", (dir / "store").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing-answer"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, StatsOnReferenceFixture) {
  const auto dir = tutor::testing::fresh_dir("cli");
  tutor::testing::write_study_sessions(load_pack(tutor::testing::kPackPath), dir);
  const auto r = run({"stats", dir.string(), "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["participants"], 20);
  EXPECT_EQ(j["wilcoxon"]["S"], 105.0);
  EXPECT_LT(j["wilcoxon"]["p_value"].get<double>(), 0.0001);
  EXPECT_EQ(j["wilcoxon"]["method"], "exact");
  for (std::size_t q = 0; q < 7; ++q) {
    EXPECT_EQ(j["delta_table"][q]["question"], "q" + std::to_string(q + 1));
    EXPECT_EQ(j["delta_table"][q]["pretest_correct"], tutor::testing::kPreCorrect[q]);
    EXPECT_EQ(j["delta_table"][q]["delta"], tutor::testing::kDelta[q]);
  }
  ASSERT_EQ(j["likert"].size(), 7u);
  EXPECT_EQ(j["likert"][0]["percent_agree"], 95);
  EXPECT_EQ(j["likert"][0]["counts"]["SA"], 14);

  const auto text = run({"stats", dir.string()});
  EXPECT_EQ(text.code, 0);
  EXPECT_NE(text.out.find("S = 105"), std::string::npos) << text.out;
  EXPECT_EQ(run({"stats", dir.string(), "--format", "json"}).out, r.out);
  fs::remove_all(dir);
}
