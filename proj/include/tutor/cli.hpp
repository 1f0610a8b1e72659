#pragma once

// `tutor` command-line entry points. Exit codes: 0 success, 1 validation or
// lint findings (or a runtime failure), 2 usage errors.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tutor/lesson_model.hpp"
#include "tutor/report.hpp"
#include "tutor/service.hpp"
#include "tutor/session.hpp"
#include "tutor/store.hpp"
#include "tutor/transfer_rules.hpp"

#ifndef TUTOR_DEFAULT_RULES
#define TUTOR_DEFAULT_RULES "data/rules.json"
#endif

namespace tutor::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitUsage = 2;

inline std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

inline std::filesystem::path resolve(const std::string& p) { return std::filesystem::absolute(p).lexically_normal(); }

inline std::filesystem::path default_rules_path() { return resolve(env_or("TUTOR_RULES", TUTOR_DEFAULT_RULES)); }

inline std::filesystem::path default_store_path() {
  return resolve(env_or("TUTOR_STORE", (std::filesystem::temp_directory_path() / "tutor-store").string()));
}

inline int cmd_validate(const std::string& pack_path, const std::string& rules_path, std::ostream& out,
                        std::ostream& err) {
  const LessonPack pack = load_pack(resolve(pack_path));
  ValidationReport report = validate_pack(pack);
  if (!rules_path.empty()) {
    auto extra = check_pack_rules(pack, load_rules(resolve(rules_path)));
    report.violations.insert(report.violations.end(), extra.violations.begin(), extra.violations.end());
  }
  if (!report.valid()) {
    for (const auto& v : report.violations) err << pack_path << ": " << format_violation(v) << "\n";
    out << "pack invalid: " << report.violations.size() << " violation" << (report.violations.size() == 1 ? "" : "s")
        << "\n";
    return kExitFindings;
  }
  out << "pack valid: " << pack.lessons.size() << " lessons, " << pack.pretest.size() << " questions\n";
  return kExitOk;
}

inline int cmd_lint(const std::string& file, const std::string& frames_arg, const std::string& rules_path,
                    std::ostream& out) {
  const RuleSet rules = load_rules(rules_path.empty() ? default_rules_path() : resolve(rules_path));
  const std::string source = read_file(resolve(file));
  std::set<std::string> frames;
  for (auto& f : text::split(frames_arg, ',')) frames.insert(f);
  const auto findings = lint_target(rules, source, frames);
  bool gotcha = false;
  for (const auto& f : findings) {
    out << format_diagnostic(file, f) << "\n";
    gotcha = gotcha || f.severity == Severity::Gotcha;
  }
  return gotcha ? kExitFindings : kExitOk;
}

struct RunScript {
  std::string participant = "scripted";
  AnswerMap pretest;
  AnswerMap posttest;
  std::map<std::string, int> survey;
};

inline RunScript parse_run_script(const std::string& document) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
    RunScript s;
    if (j.contains("participant")) s.participant = j.at("participant").get<std::string>();
    if (j.contains("pretest")) s.pretest = j.at("pretest").get<AnswerMap>();
    if (j.contains("posttest")) s.posttest = j.at("posttest").get<AnswerMap>();
    if (j.contains("survey")) s.survey = j.at("survey").get<std::map<std::string, int>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("script: ") + e.what());
  }
}

/// Drives one scripted session end to end, persisting after every operation.
inline int cmd_run(const std::string& pack_path, const std::string& script_path, std::uint64_t seed,
                   const std::string& store_arg, std::ostream& out) {
  const LessonPack pack = load_pack(resolve(pack_path));
  const RunScript script = parse_run_script(read_file(resolve(script_path)));
  SessionStore store(store_arg.empty() ? default_store_path() : resolve(store_arg));

  // Timestamps are derived from the seed so repeated runs are byte-identical.
  Millis clock = static_cast<Millis>(seed % 1'000'000) * 1000;
  auto tick = [&] { return clock += 1000; };

  Session s = create_session(pack, script.participant, seed, {}, tick());
  store.persist(s);
  out << "session " << s.id << " (pack " << pack.id << ", seed " << seed << ")\n";

  std::vector<Phase> phases{s.phase};
  auto note_phase = [&] {
    if (phases.back() != s.phase) phases.push_back(s.phase);
  };

  auto answer_test = [&](bool post) {
    const auto& answers = post ? script.posttest : script.pretest;
    for (const auto& qid : s.order(post)) {
      auto it = answers.find(qid);
      if (it == answers.end())
        throw Error(ErrorCode::MissingAnswer, std::string("script has no ") + (post ? "posttest" : "pretest") +
                                                  " answer for '" + qid + "'", qid);
      submit_answer(pack, s, qid, it->second, tick());
      store.persist(s);
    }
    note_phase();
    const auto& score = post ? s.posttest_score : s.pretest_score;
    out << (post ? "posttest" : "pretest") << ": " << s.order(post).size() << " answered, score "
        << (score ? score->total : 0) << "/" << s.order(post).size() << "\n";
  };

  answer_test(false);
  std::size_t steps_seen = s.phase == Phase::Lessons ? 1 : 0;
  std::set<std::size_t> lessons_seen;
  while (s.phase == Phase::Lessons) {
    lessons_seen.insert(s.lesson_cursor);
    advance(pack, s, Direction::Next, tick());
    store.persist(s);
    if (s.phase == Phase::Lessons) ++steps_seen;
  }
  note_phase();
  out << "lessons: " << lessons_seen.size() << " completed, " << steps_seen << " steps\n";
  answer_test(true);
  for (const auto& st : pack.survey) {
    auto it = script.survey.find(st.id);
    if (it == script.survey.end())
      throw Error(ErrorCode::MissingAnswer, "script has no survey level for '" + st.id + "'", st.id);
    submit_survey(pack, s, st.id, it->second, tick());
    store.persist(s);
  }
  note_phase();
  out << "survey: " << s.survey_responses.size() << " responses\n";

  out << "phases:";
  for (auto p : phases) out << " " << to_string(p);
  out << "\n";

  const Session stored = store.restore(s.id);
  const Session replayed = replay(pack, stored.log);
  const bool identical = stored == s && replayed == stored;
  out << "stored: " << (store.root() / (s.id + ".json")).string() << "\n";
  out << "replay: " << (identical ? "identical" : "MISMATCH") << "\n";
  return identical && s.phase == Phase::Done ? kExitOk : kExitFindings;
}

inline int cmd_stats(const std::string& dir, const std::string& format, const std::string& pack_path, double alpha,
                     bool pratt, std::ostream& out, std::ostream& err) {
  std::vector<std::string> skipped;
  auto sessions = load_sessions(resolve(dir), &skipped);
  for (const auto& s : skipped) err << "skipped " << s << "\n";
  std::vector<SurveyStatement> statements;
  if (!pack_path.empty()) statements = load_pack(resolve(pack_path)).survey;
  const auto report = build_study_report(std::move(sessions), statements, alpha,
                                         pratt ? ZeroHandling::Pratt : ZeroHandling::Discard);
  if (format == "json") out << study_report_to_json(report).dump(2) << "\n";
  else out << study_report_to_text(report);
  return kExitOk;
}

inline int cmd_serve(const std::string& packs_dir, const std::string& rules_path, const std::string& store_arg,
                     const std::string& host, int port, const std::string& ui_dir, std::ostream& out) {
  std::vector<LessonPack> packs;
  const auto dir = resolve(packs_dir);
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::MissingFile, "no such directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().string().ends_with(".pack.json")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) packs.push_back(load_pack(f));
  if (packs.empty()) throw Error(ErrorCode::MissingFile, "no *.pack.json files in " + dir.string());
  const RuleSet rules = load_rules(rules_path.empty() ? default_rules_path() : resolve(rules_path));
  for (const auto& p : packs) {
    auto report = check_pack_rules(p, rules);
    if (!report.valid())
      throw Error(ErrorCode::InvalidPack, "pack '" + p.id + "': " + format_violation(report.violations.front()));
  }
  const auto store = store_arg.empty() ? default_store_path() : resolve(store_arg);
  Service service(std::move(packs), rules, store,
                  ui_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(resolve(ui_dir)));
  out << "serving " << files.size() << " pack(s) on http://" << host << ":" << port << " (store " << store.string()
      << ")" << std::endl;
  if (!service.listen(host, port)) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
  return kExitOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Cross-language tutoring engine: lessons, lint, sessions and study statistics", "tutor"};
  app.require_subcommand(1, 1);

  std::string pack_path, rules_path, file, frames, script, store, dir, format = "text", packs_dir, host = "127.0.0.1",
                                                                        ui_dir;
  std::uint64_t seed = 0;
  int port = 8080;
  double alpha = kDefaultAlpha;
  bool pratt = false;

  auto* validate = app.add_subcommand("validate", "Check a lesson pack for structural problems");
  validate->add_option("pack", pack_path, "Pack file")->required();
  validate->add_option("--rules", rules_path, "Also check annotations against this rule corpus");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--packs", packs_dir, "Directory of *.pack.json files")->required();
  serve->add_option("--rules", rules_path, "Rule corpus (default: $TUTOR_RULES or the shipped corpus)");
  serve->add_option("--store", store, "Session store directory (default: $TUTOR_STORE)");
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--ui", ui_dir, "Static UI bundle served at /");

  auto* lint = app.add_subcommand("lint", "Flag negative-transfer idioms in a target-language file");
  lint->add_option("file", file, "Source file")->required();
  lint->add_option("--frames", frames, "Comma-separated data frame names");
  lint->add_option("--rules", rules_path, "Rule corpus (default: $TUTOR_RULES or the shipped corpus)");

  auto* run_cmd = app.add_subcommand("run", "Replay a scripted session headlessly");
  run_cmd->add_option("pack", pack_path, "Pack file")->required();
  run_cmd->add_option("--script", script, "Answers script (JSON)")->required();
  run_cmd->add_option("--seed", seed, "Question-order seed")->required();
  run_cmd->add_option("--store", store, "Session store directory (default: $TUTOR_STORE)");

  auto* stats_cmd = app.add_subcommand("stats", "Analyse a directory of stored sessions");
  stats_cmd->add_option("dir", dir, "Results directory")->required();
  stats_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));
  stats_cmd->add_option("--pack", pack_path, "Pack providing survey statement texts and order");
  stats_cmd->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  stats_cmd->add_flag("--pratt", pratt, "Rank zero differences (Pratt) instead of discarding them");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(pack_path, rules_path, out, err);
    if (*lint) return cmd_lint(file, frames, rules_path, out);
    if (*run_cmd) return cmd_run(pack_path, script, seed, store, out);
    if (*stats_cmd) return cmd_stats(dir, format, pack_path, alpha, pratt, out, err);
    if (*serve) return cmd_serve(packs_dir, rules_path, store, host, port, ui_dir, out);
  } catch (const Error& e) {
    err << "error [" << code_string(e.code()) << "]: " << e.what() << "\n";
    return kExitFindings;
  }
  return kExitUsage;
}

}  // namespace tutor::cli
