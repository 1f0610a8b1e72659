#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>

#include "support/study_fixtures.hpp"
#include "tutor/lesson_model.hpp"

using namespace tutor;
using nlohmann::json;

namespace {

json pack_json() { return json::parse(read_file(tutor::testing::kPackPath)); }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

ErrorCode parse_error(const json& j) {
  try {
    parse_pack(j.dump());
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "document was accepted";
  return ErrorCode::Io;
}

}  // namespace

TEST(LessonModel, ShippedPackHasTheFourLessons) {
  const auto pack = load_pack(tutor::testing::kPackPath);
  ASSERT_EQ(pack.lessons.size(), 4u);
  const std::vector<std::string> titles{"assignment and reading data", "selecting columns", "filtering",
                                        "selecting rows and sorting"};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(lower(pack.lessons[i].title), titles[i]);
  EXPECT_EQ(pack.known_language, Language::Python);
  EXPECT_EQ(pack.target_language, Language::R);
  EXPECT_EQ(pack.pretest.size(), 7u);
  EXPECT_EQ(pack.survey.size(), 7u);
}

TEST(LessonModel, ShippedPackValidates) {
  const auto report = validate_pack(load_pack(tutor::testing::kPackPath));
  for (const auto& v : report.violations) ADD_FAILURE() << format_violation(v);
  EXPECT_TRUE(report.valid());
}

TEST(LessonModel, LessonsHaveFiveToEightSteps) {
  for (const auto& l : load_pack(tutor::testing::kPackPath).lessons) {
    EXPECT_GE(l.steps.size(), 5u) << l.id;
    EXPECT_LE(l.steps.size(), 8u) << l.id;
  }
}

TEST(LessonModel, FigureOneSourcesAreShipped) {
  const auto pack = load_pack(tutor::testing::kPackPath);
  EXPECT_EQ(pack.lessons[0].target_snippet.source, "df <- read.csv('Questions.csv')");
  EXPECT_NE(pack.lessons[2].known_snippet.source.find("df[df.Score > 0]"), std::string::npos);
}

TEST(LessonModel, EmptyLessonsIsMalformed) {
  auto j = pack_json();
  j["lessons"] = json::array();
  EXPECT_EQ(parse_error(j), ErrorCode::MalformedDocument);
}

TEST(LessonModel, UnknownFieldRejected) {
  auto j = pack_json();
  j["lessons"][0]["colour"] = "red";
  EXPECT_EQ(parse_error(j), ErrorCode::UnknownField);
}

TEST(LessonModel, WrongFormatVersionRejected) {
  auto j = pack_json();
  j["format_version"] = 2;
  EXPECT_EQ(parse_error(j), ErrorCode::MalformedDocument);
}

TEST(LessonModel, NotJsonIsMalformed) {
  try {
    parse_pack("{\"id\": ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedDocument);
  }
}

TEST(LessonModel, MissingFile) {
  try {
    load_pack("/nonexistent/pack.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFile);
  }
}

TEST(LessonModel, PosttestOmittingAQuestionLoadsButFailsValidation) {
  auto j = pack_json();
  j["posttest"].erase(j["posttest"].size() - 1);
  const auto pack = parse_pack(j.dump());
  const auto report = validate_pack(pack);
  EXPECT_TRUE(report.has("posttest-mismatch"));
}

TEST(LessonModel, SpanBeyondSource) {
  auto j = pack_json();
  j["lessons"][0]["steps"][0]["target_spans"] = json::array({json::array({0, 500})});
  const auto report = validate_pack(parse_pack(j.dump()));
  EXPECT_TRUE(report.has("span-out-of-bounds"));
}

TEST(LessonModel, OverlappingTargetSpans) {
  auto j = pack_json();
  j["lessons"][0]["steps"][1]["target_spans"] = json::array({json::array({0, 5}), json::array({3, 14})});
  const auto report = validate_pack(parse_pack(j.dump()));
  EXPECT_TRUE(report.has("span-overlap"));
}

TEST(LessonModel, SpanInsideTokenFlagged) {
  auto j = pack_json();
  // Starts inside `read.csv`.
  j["lessons"][0]["steps"][0]["target_spans"] = json::array({json::array({8, 14})});
  EXPECT_TRUE(validate_pack(parse_pack(j.dump())).has("span-not-token-aligned"));
}

TEST(LessonModel, StepIndicesMustBeSequential) {
  auto j = pack_json();
  j["lessons"][1]["steps"][2]["index"] = 7;
  EXPECT_TRUE(validate_pack(parse_pack(j.dump())).has("step-index"));
}

TEST(LessonModel, BadAnswerKey) {
  auto j = pack_json();
  j["pretest"][2]["correct"] = json::array({9});
  EXPECT_TRUE(validate_pack(parse_pack(j.dump())).has("bad-answer-key"));
}

TEST(LessonModel, UnterminatedSnippetIsALexError) {
  auto j = pack_json();
  j["lessons"][0]["target_snippet"]["source"] = "df <- read.csv('Questions.csv)";
  EXPECT_TRUE(validate_pack(parse_pack(j.dump())).has("lex-error"));
}

TEST(LessonModel, SerializeRoundTrips) {
  const auto pack = load_pack(tutor::testing::kPackPath);
  const auto text = serialize_pack(pack);
  EXPECT_EQ(parse_pack(text), pack);
  EXPECT_EQ(serialize_pack(parse_pack(text)), text);
}

TEST(LessonModel, LoadingIsDeterministic) {
  EXPECT_EQ(load_pack(tutor::testing::kPackPath), load_pack(tutor::testing::kPackPath));
}

TEST(LessonModel, EveryAnnotationKindIsUsed) {
  std::set<AnnotationKind> seen;
  for (const auto& l : load_pack(tutor::testing::kPackPath).lessons)
    for (const auto& s : l.steps)
      for (const auto& a : s.annotations) seen.insert(a.kind);
  EXPECT_EQ(seen.size(), 3u);
}

TEST(LessonModel, EveryLessonHasAnOutputBox) {
  for (const auto& l : load_pack(tutor::testing::kPackPath).lessons) {
    ASSERT_TRUE(l.output.has_value()) << l.id;
    EXPECT_FALSE(l.output->target_output.empty());
  }
}
