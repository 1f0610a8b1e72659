#pragma once

// Learner session state machine: PreTest → Lessons → PostTest → Survey → Done.
//
// Operations validate fully before mutating, so a thrown Error leaves the
// session untouched. Every successful mutation is appended to the session's
// operation log; replay() rebuilds an identical session from that log.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tutor/error.hpp"
#include "tutor/lesson_model.hpp"

namespace tutor {

enum class Phase { PreTest, Lessons, PostTest, Survey, Done };
enum class Direction { Next, Prev };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::PreTest: return "pretest";
    case Phase::Lessons: return "lessons";
    case Phase::PostTest: return "posttest";
    case Phase::Survey: return "survey";
    case Phase::Done: return "done";
  }
  return "?";
}

inline std::optional<Phase> parse_phase(std::string_view s) {
  for (Phase p : {Phase::PreTest, Phase::Lessons, Phase::PostTest, Phase::Survey, Phase::Done})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

inline std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "next") return Direction::Next;
  if (s == "prev") return Direction::Prev;
  return std::nullopt;
}

inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 5;

/// SD, D, N, A, SA for levels 1..5.
inline std::string_view likert_label(int level) {
  static constexpr std::string_view labels[] = {"SD", "D", "N", "A", "SA"};
  return level >= kLikertMin && level <= kLikertMax ? labels[level - 1] : "?";
}
inline std::string_view likert_name(int level) {
  static constexpr std::string_view names[] = {"Strongly Disagree", "Disagree", "Neutral", "Agree",
                                               "Strongly Agree"};
  return level >= kLikertMin && level <= kLikertMax ? names[level - 1] : "?";
}

using Selection = std::set<std::size_t>;
using AnswerMap = std::map<std::string, Selection>;
using Millis = std::int64_t;

inline Millis now_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// ---------------------------------------------------------------------------
// Deterministic question shuffle

/// SplitMix64: state += 0x9E3779B97F4A7C15, then the standard mix of the new state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Fisher–Yates from the back: for i = n-1 .. 1 swap a[i] with a[next() % (i+1)].
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next() % i);
    std::swap(items[i - 1], items[j]);
  }
}

// ---------------------------------------------------------------------------

struct ScoreReport {
  std::vector<std::pair<std::string, int>> per_question;  // key order
  int total = 0;

  int credit(std::string_view id) const {
    for (const auto& [qid, c] : per_question)
      if (qid == id) return c;
    return 0;
  }
  friend bool operator==(const ScoreReport&, const ScoreReport&) = default;
};

/// All-or-nothing: credit 1 iff the selection equals the correct set exactly.
inline ScoreReport score_test(const AnswerMap& answers, const std::vector<Question>& key) {
  ScoreReport report;
  for (const auto& q : key) {
    auto it = answers.find(q.id);
    if (it == answers.end()) throw Error(ErrorCode::MissingAnswer, "no answer for question '" + q.id + "'", q.id);
    const int credit = it->second == q.correct ? 1 : 0;
    report.per_question.emplace_back(q.id, credit);
    report.total += credit;
  }
  return report;
}

struct OperationRecord {
  nlohmann::json op;  // {"op": ..., args..., "at": millis}
  friend bool operator==(const OperationRecord&, const OperationRecord&) = default;
};

struct Session {
  std::string id;
  std::string pack_id;
  std::string participant;
  std::uint64_t seed = 0;
  Phase phase = Phase::PreTest;
  std::size_t lesson_cursor = 0;
  std::size_t step_cursor = 0;
  std::vector<std::string> pretest_order;
  std::vector<std::string> posttest_order;
  AnswerMap pretest_answers;
  AnswerMap posttest_answers;
  std::map<std::string, int> survey_responses;
  std::optional<ScoreReport> pretest_score;
  std::optional<ScoreReport> posttest_score;
  Millis created_at = 0;
  Millis updated_at = 0;
  std::vector<OperationRecord> log;

  const std::vector<std::string>& order(bool post) const { return post ? posttest_order : pretest_order; }
  const AnswerMap& answers(bool post) const { return post ? posttest_answers : pretest_answers; }
  AnswerMap& answers(bool post) { return post ? posttest_answers : pretest_answers; }
  friend bool operator==(const Session&, const Session&) = default;
};

// ---------------------------------------------------------------------------
// Render state

struct Highlight {
  Side side = Side::Known;
  Span span;
  AnnotationKind kind = AnnotationKind::PositiveTransfer;
  friend bool operator==(const Highlight&, const Highlight&) = default;
};

struct LessonView {
  std::string lesson_id;
  std::string lesson_title;
  std::size_t lesson_index = 0;
  std::size_t lesson_count = 0;
  std::size_t step_index = 0;
  std::size_t total_steps = 0;
  Language known_language = Language::Python;
  Language target_language = Language::R;
  std::string known_source;
  std::string target_source;
  std::vector<Highlight> highlights;
  std::vector<Annotation> annotations;
  std::optional<OutputBox> output;  // final step only
  bool has_prev = false;
  friend bool operator==(const LessonView&, const LessonView&) = default;
};

struct QuestionView {
  bool posttest = false;
  std::string id;
  std::string prompt;
  QuestionKind kind = QuestionKind::SingleChoice;
  std::vector<std::string> choices;
  std::size_t answered = 0;
  std::size_t total = 0;
  friend bool operator==(const QuestionView&, const QuestionView&) = default;
};

struct StatementView {
  std::string id;
  std::string text;
  std::size_t answered = 0;
  std::size_t total = 0;
  friend bool operator==(const StatementView&, const StatementView&) = default;
};

struct RenderState {
  Phase phase = Phase::PreTest;
  std::optional<LessonView> lesson;
  std::optional<QuestionView> question;
  std::optional<StatementView> statement;
  friend bool operator==(const RenderState&, const RenderState&) = default;
};

// ---------------------------------------------------------------------------

namespace detail {

inline const Question* find_question(const std::vector<Question>& qs, std::string_view id) {
  for (const auto& q : qs)
    if (q.id == id) return &q;
  return nullptr;
}

inline std::string phase_error(Phase actual, std::string_view needed) {
  return "operation requires phase " + std::string(needed) + " but session is in " + std::string(to_string(actual));
}

/// Completes phases that have nothing left to do.
inline void settle(const LessonPack& pack, Session& s) {
  while (true) {
    if (s.phase == Phase::PreTest && s.pretest_answers.size() == pack.pretest.size()) {
      s.pretest_score = score_test(s.pretest_answers, pack.pretest);
      s.phase = Phase::Lessons;
      s.lesson_cursor = 0;
      s.step_cursor = 0;
    } else if (s.phase == Phase::Lessons && pack.lessons.empty()) {
      s.phase = Phase::PostTest;
    } else if (s.phase == Phase::PostTest && s.posttest_answers.size() == pack.posttest.size()) {
      s.posttest_score = score_test(s.posttest_answers, pack.posttest);
      s.phase = Phase::Survey;
    } else if (s.phase == Phase::Survey && s.survey_responses.size() == pack.survey.size()) {
      s.phase = Phase::Done;
    } else {
      return;
    }
  }
}

inline void record(Session& s, nlohmann::json op, Millis at) {
  op["at"] = at;
  s.log.push_back({std::move(op)});
  s.updated_at = at;
}

}  // namespace detail

inline RenderState render(const LessonPack& pack, const Session& s) {
  RenderState out;
  out.phase = s.phase;
  switch (s.phase) {
    case Phase::Lessons: {
      const Lesson& lesson = pack.lessons.at(s.lesson_cursor);
      const Step& step = lesson.steps.at(s.step_cursor);
      LessonView v;
      v.lesson_id = lesson.id;
      v.lesson_title = lesson.title;
      v.lesson_index = s.lesson_cursor;
      v.lesson_count = pack.lessons.size();
      v.step_index = s.step_cursor;
      v.total_steps = lesson.steps.size();
      v.known_language = lesson.known_snippet.language;
      v.target_language = lesson.target_snippet.language;
      v.known_source = lesson.known_snippet.source;
      v.target_source = lesson.target_snippet.source;
      for (Side pane : {Side::Known, Side::Target}) {
        AnnotationKind kind = AnnotationKind::PositiveTransfer;
        for (const auto& a : step.annotations) {
          if (covers(a.side, pane)) {
            kind = a.kind;
            break;
          }
        }
        for (const auto& sp : step.spans(pane)) v.highlights.push_back({pane, sp, kind});
      }
      v.annotations = step.annotations;
      if (s.step_cursor + 1 == lesson.steps.size()) v.output = lesson.output;
      v.has_prev = s.step_cursor > 0;
      out.lesson = std::move(v);
      break;
    }
    case Phase::PreTest:
    case Phase::PostTest: {
      const bool post = s.phase == Phase::PostTest;
      const auto& answers = s.answers(post);
      for (const auto& id : s.order(post)) {
        if (answers.contains(id)) continue;
        const Question* q = detail::find_question(pack.test(post), id);
        if (!q) break;
        out.question = QuestionView{post, q->id, q->prompt, q->kind, q->choices, answers.size(), s.order(post).size()};
        break;
      }
      break;
    }
    case Phase::Survey:
      for (const auto& st : pack.survey) {
        if (s.survey_responses.contains(st.id)) continue;
        out.statement = StatementView{st.id, st.text, s.survey_responses.size(), pack.survey.size()};
        break;
      }
      break;
    case Phase::Done:
      break;
  }
  return out;
}

inline Session create_session(const LessonPack& pack, std::string participant, std::uint64_t seed,
                              std::string id = {}, Millis at = now_millis()) {
  if (auto report = validate_pack(pack); !report.valid())
    throw Error(ErrorCode::InvalidPack, "pack '" + pack.id + "' is invalid: " + format_violation(report.violations.front()));
  Session s;
  s.id = id.empty() ? pack.id + "-" + participant + "-" + std::to_string(seed) : std::move(id);
  s.pack_id = pack.id;
  s.participant = std::move(participant);
  s.seed = seed;
  SplitMix64 rng(seed);
  for (const auto& q : pack.pretest) s.pretest_order.push_back(q.id);
  shuffle(s.pretest_order, rng);
  for (const auto& q : pack.posttest) s.posttest_order.push_back(q.id);
  shuffle(s.posttest_order, rng);
  s.created_at = at;
  detail::record(s, {{"op", "create"}, {"id", s.id}, {"participant", s.participant}, {"seed", seed}}, at);
  detail::settle(pack, s);
  return s;
}

inline RenderState advance(const LessonPack& pack, Session& s, Direction dir, Millis at = now_millis()) {
  if (s.phase != Phase::Lessons) throw Error(ErrorCode::WrongPhase, detail::phase_error(s.phase, "lessons"));
  const Lesson& lesson = pack.lessons.at(s.lesson_cursor);
  if (dir == Direction::Prev) {
    if (s.step_cursor == 0) throw Error(ErrorCode::NoPrevious, "already at the first step of lesson '" + lesson.id + "'");
    --s.step_cursor;
  } else if (s.step_cursor + 1 < lesson.steps.size()) {
    ++s.step_cursor;
  } else if (s.lesson_cursor + 1 < pack.lessons.size()) {
    ++s.lesson_cursor;
    s.step_cursor = 0;
  } else {
    s.phase = Phase::PostTest;
    s.lesson_cursor = 0;
    s.step_cursor = 0;
  }
  detail::record(s, {{"op", "step"}, {"direction", dir == Direction::Next ? "next" : "prev"}}, at);
  detail::settle(pack, s);
  return render(pack, s);
}

inline void submit_answer(const LessonPack& pack, Session& s, const std::string& question_id,
                          const Selection& selection, Millis at = now_millis()) {
  if (s.phase != Phase::PreTest && s.phase != Phase::PostTest)
    throw Error(ErrorCode::WrongPhase, detail::phase_error(s.phase, "pretest or posttest"));
  const bool post = s.phase == Phase::PostTest;
  const Question* q = detail::find_question(pack.test(post), question_id);
  if (!q) throw Error(ErrorCode::UnknownQuestion, "no question '" + question_id + "' in this test", question_id);
  if (s.answers(post).contains(question_id))
    throw Error(ErrorCode::AlreadyAnswered, "question '" + question_id + "' was already answered", question_id);
  if (selection.empty()) throw Error(ErrorCode::BadSelection, "selection is empty", question_id);
  if (q->kind == QuestionKind::SingleChoice && selection.size() != 1)
    throw Error(ErrorCode::BadSelection, "single-choice question takes exactly one choice", question_id);
  if (*selection.rbegin() >= q->choices.size())
    throw Error(ErrorCode::BadSelection, "choice index out of range", question_id);
  s.answers(post)[question_id] = selection;
  detail::record(s, {{"op", "answer"}, {"question", question_id}, {"selection", selection}}, at);
  detail::settle(pack, s);
}

inline void submit_survey(const LessonPack& pack, Session& s, const std::string& statement_id, int level,
                          Millis at = now_millis()) {
  if (s.phase != Phase::Survey) throw Error(ErrorCode::WrongPhase, detail::phase_error(s.phase, "survey"));
  const bool known = std::any_of(pack.survey.begin(), pack.survey.end(),
                                 [&](const SurveyStatement& st) { return st.id == statement_id; });
  if (!known) throw Error(ErrorCode::UnknownStatement, "no survey statement '" + statement_id + "'", statement_id);
  if (s.survey_responses.contains(statement_id))
    throw Error(ErrorCode::AlreadyAnswered, "statement '" + statement_id + "' was already answered", statement_id);
  if (level < kLikertMin || level > kLikertMax)
    throw Error(ErrorCode::LevelOutOfRange, "Likert level must be in 1..5, got " + std::to_string(level), statement_id);
  s.survey_responses[statement_id] = level;
  detail::record(s, {{"op", "survey"}, {"statement", statement_id}, {"level", level}}, at);
  detail::settle(pack, s);
}

/// Rebuilds a session by re-running its operation log against the pack.
inline Session replay(const LessonPack& pack, const std::vector<OperationRecord>& log) {
  if (log.empty() || log.front().op.value("op", "") != "create")
    throw Error(ErrorCode::CorruptRecord, "operation log does not start with create");
  try {
    const auto& first = log.front().op;
    Session s = create_session(pack, first.at("participant").get<std::string>(), first.at("seed").get<std::uint64_t>(),
                               first.at("id").get<std::string>(), first.at("at").get<Millis>());
    for (std::size_t i = 1; i < log.size(); ++i) {
      const auto& op = log[i].op;
      const auto kind = op.at("op").get<std::string>();
      const auto at = op.at("at").get<Millis>();
      if (kind == "step") {
        auto dir = parse_direction(op.at("direction").get<std::string>());
        if (!dir) throw Error(ErrorCode::CorruptRecord, "bad direction in log entry " + std::to_string(i));
        advance(pack, s, *dir, at);
      } else if (kind == "answer") {
        submit_answer(pack, s, op.at("question").get<std::string>(), op.at("selection").get<Selection>(), at);
      } else if (kind == "survey") {
        submit_survey(pack, s, op.at("statement").get<std::string>(), op.at("level").get<int>(), at);
      } else {
        throw Error(ErrorCode::CorruptRecord, "unknown operation '" + kind + "' in log entry " + std::to_string(i));
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptRecord, std::string("bad operation log: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json score_to_json(const ScoreReport& r) {
  nlohmann::json pq = nlohmann::json::array();
  for (const auto& [id, credit] : r.per_question) pq.push_back({{"id", id}, {"credit", credit}});
  return {{"per_question", pq}, {"total", r.total}};
}

inline ScoreReport score_from_json(const nlohmann::json& j) {
  ScoreReport r;
  for (const auto& e : j.at("per_question")) {
    const int credit = e.at("credit").get<int>();
    if (credit != 0 && credit != 1) throw Error(ErrorCode::CorruptRecord, "credit must be 0 or 1");
    r.per_question.emplace_back(e.at("id").get<std::string>(), credit);
  }
  r.total = j.at("total").get<int>();
  return r;
}

inline nlohmann::json session_to_json(const Session& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["pack_id"] = s.pack_id;
  j["participant"] = s.participant;
  j["seed"] = s.seed;
  j["phase"] = to_string(s.phase);
  j["lesson_cursor"] = s.lesson_cursor;
  j["step_cursor"] = s.step_cursor;
  j["question_order"] = {{"pretest", s.pretest_order}, {"posttest", s.posttest_order}};
  j["answers"] = {{"pretest", s.pretest_answers}, {"posttest", s.posttest_answers}};
  j["survey_responses"] = s.survey_responses;
  j["scores"] = nlohmann::json::object();
  if (s.pretest_score) j["scores"]["pretest"] = score_to_json(*s.pretest_score);
  if (s.posttest_score) j["scores"]["posttest"] = score_to_json(*s.posttest_score);
  j["created_at"] = s.created_at;
  j["updated_at"] = s.updated_at;
  j["log"] = nlohmann::json::array();
  for (const auto& r : s.log) j["log"].push_back(r.op);
  return j;
}

inline Session session_from_json(const nlohmann::json& j) {
  try {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.pack_id = j.at("pack_id").get<std::string>();
    s.participant = j.at("participant").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    auto phase = parse_phase(j.at("phase").get<std::string>());
    if (!phase) throw Error(ErrorCode::CorruptRecord, "unknown phase");
    s.phase = *phase;
    s.lesson_cursor = j.at("lesson_cursor").get<std::size_t>();
    s.step_cursor = j.at("step_cursor").get<std::size_t>();
    s.pretest_order = j.at("question_order").at("pretest").get<std::vector<std::string>>();
    s.posttest_order = j.at("question_order").at("posttest").get<std::vector<std::string>>();
    s.pretest_answers = j.at("answers").at("pretest").get<AnswerMap>();
    s.posttest_answers = j.at("answers").at("posttest").get<AnswerMap>();
    s.survey_responses = j.at("survey_responses").get<std::map<std::string, int>>();
    const auto& scores = j.at("scores");
    if (scores.contains("pretest")) s.pretest_score = score_from_json(scores.at("pretest"));
    if (scores.contains("posttest")) s.posttest_score = score_from_json(scores.at("posttest"));
    s.created_at = j.at("created_at").get<Millis>();
    s.updated_at = j.at("updated_at").get<Millis>();
    for (const auto& op : j.at("log")) s.log.push_back({op});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptRecord, std::string("session record: ") + e.what());
  }
}

inline nlohmann::json render_to_json(const RenderState& r) {
  nlohmann::json j;
  j["phase"] = to_string(r.phase);
  if (r.lesson) {
    const auto& v = *r.lesson;
    nlohmann::json lj;
    lj["lesson_id"] = v.lesson_id;
    lj["lesson_title"] = v.lesson_title;
    lj["lesson_index"] = v.lesson_index;
    lj["lesson_count"] = v.lesson_count;
    lj["step_index"] = v.step_index;
    lj["total_steps"] = v.total_steps;
    lj["known"] = {{"language", to_string(v.known_language)}, {"source", v.known_source}};
    lj["target"] = {{"language", to_string(v.target_language)}, {"source", v.target_source}};
    lj["highlights"] = nlohmann::json::array();
    for (const auto& h : v.highlights)
      lj["highlights"].push_back(
          {{"side", to_string(h.side)}, {"span", {h.span.start, h.span.end}}, {"kind", to_string(h.kind)}});
    lj["annotations"] = nlohmann::json::array();
    for (const auto& a : v.annotations)
      lj["annotations"].push_back({{"kind", to_string(a.kind)}, {"side", to_string(a.side)}, {"rule", a.rule}, {"text", a.text}});
    if (v.output)
      lj["output"] = {{"known_output", v.output->known_output},
                      {"target_output", v.output->target_output},
                      {"caption", v.output->caption}};
    else
      lj["output"] = nullptr;
    lj["has_prev"] = v.has_prev;
    j["lesson"] = std::move(lj);
  }
  if (r.question) {
    const auto& q = *r.question;
    j["question"] = {{"test", q.posttest ? "posttest" : "pretest"},
                     {"id", q.id},
                     {"prompt", q.prompt},
                     {"kind", to_string(q.kind)},
                     {"choices", q.choices},
                     {"answered", q.answered},
                     {"total", q.total}};
  }
  if (r.statement) {
    const auto& st = *r.statement;
    nlohmann::json levels = nlohmann::json::array();
    for (int l = kLikertMin; l <= kLikertMax; ++l)
      levels.push_back({{"level", l}, {"label", likert_label(l)}, {"name", likert_name(l)}});
    j["statement"] = {{"id", st.id}, {"text", st.text}, {"answered", st.answered}, {"total", st.total}, {"levels", levels}};
  }
  return j;
}

}  // namespace tutor
