#pragma once

// JSON-over-HTTP facade over the session engine. Every mutating request runs
// under the session's store lock and is persisted before the response is sent.

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tutor/error.hpp"
#include "tutor/lesson_model.hpp"
#include "tutor/report.hpp"
#include "tutor/session.hpp"
#include "tutor/store.hpp"
#include "tutor/transfer_rules.hpp"

namespace tutor {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::UnknownQuestion:
    case ErrorCode::UnknownStatement:
    case ErrorCode::UnknownConstruct:
      return 404;
    case ErrorCode::WrongPhase:
    case ErrorCode::NoPrevious:
    case ErrorCode::AlreadyAnswered:
      return 409;
    case ErrorCode::BadSelection:
    case ErrorCode::LevelOutOfRange:
    case ErrorCode::MalformedDocument:
    case ErrorCode::UnknownField:
    case ErrorCode::InvalidPack:
    case ErrorCode::UnsupportedLanguage:
    case ErrorCode::UnterminatedString:
    case ErrorCode::InvalidUtf8:
      return 400;
    default:
      return 500;
  }
}

inline nlohmann::json error_body(std::string_view code, std::string_view message, std::string_view detail = {}) {
  return {{"code", code}, {"message", message}, {"detail", detail}};
}

class Service {
 public:
  Service(std::vector<LessonPack> packs, std::optional<RuleSet> rules, std::filesystem::path store_root,
          std::optional<std::filesystem::path> ui_root = std::nullopt)
      : rules_(std::move(rules)), store_(std::move(store_root)) {
    for (auto& p : packs) {
      if (auto report = validate_pack(p); !report.valid())
        throw Error(ErrorCode::InvalidPack, "pack '" + p.id + "': " + format_violation(report.violations.front()));
      const std::string id = p.id;
      if (!packs_.emplace(id, std::move(p)).second)
        throw Error(ErrorCode::InvalidPack, "duplicate pack id '" + id + "'");
    }
    if (ui_root && std::filesystem::is_directory(*ui_root)) server_.set_mount_point("/", ui_root->string());
    routes();
  }

  httplib::Server& server() { return server_; }
  SessionStore& store() { return store_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

 private:
  using Request = httplib::Request;
  using Response = httplib::Response;

  static void send(Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
  }

  static void send_error(Response& res, const Error& e) {
    send(res, http_status(e.code()), error_body(code_string(e.code()), e.what(), e.detail()));
  }

  template <typename Handler>
  static httplib::Server::Handler guarded(Handler h) {
    return [h](const Request& req, Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const nlohmann::json::exception& e) {
        send(res, 400, error_body("bad-request", std::string("malformed request body: ") + e.what()));
      } catch (const std::exception& e) {
        send(res, 500, error_body("internal", e.what()));
      }
    };
  }

  static nlohmann::json body(const Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::MalformedDocument, "request body must be a JSON object");
    return j;
  }

  const LessonPack& pack(const std::string& id) const {
    auto it = packs_.find(id);
    if (it == packs_.end()) throw Error(ErrorCode::NotFound, "no pack '" + id + "'", id);
    return it->second;
  }

  static nlohmann::json pack_summary(const LessonPack& p) {
    return {{"id", p.id},
            {"title", p.title},
            {"known_language", to_string(p.known_language)},
            {"target_language", to_string(p.target_language)},
            {"lesson_count", p.lessons.size()},
            {"question_count", p.pretest.size()},
            {"statement_count", p.survey.size()}};
  }

  nlohmann::json state_payload(const Session& s) const {
    return {{"session_id", s.id}, {"state", render_to_json(render(pack(s.pack_id), s))}};
  }

  void routes() {
    server_.Get("/api/packs", guarded([this](const Request&, Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& [_, p] : packs_) out.push_back(pack_summary(p));
      send(res, 200, out);
    }));

    server_.Get(R"(/api/packs/([^/]+))", guarded([this](const Request& req, Response& res) {
      const auto& p = pack(req.matches[1]);
      auto out = pack_summary(p);
      out["lessons"] = nlohmann::json::array();
      for (const auto& l : p.lessons)
        out["lessons"].push_back({{"id", l.id}, {"title", l.title}, {"step_count", l.steps.size()}});
      send(res, 200, out);
    }));

    server_.Post("/api/sessions", guarded([this](const Request& req, Response& res) {
      const auto b = body(req);
      const auto& p = pack(b.at("pack_id").get<std::string>());
      const auto participant = b.value("participant", std::string("anonymous"));
      std::uint64_t seed = 0;
      if (b.contains("seed")) seed = b.at("seed").get<std::uint64_t>();
      else seed = std::random_device{}() * 0x100000000ULL + std::random_device{}();
      Session s = create_session(p, participant, seed, random_session_id());
      store_.create(s);
      send(res, 201, state_payload(s));
    }));

    server_.Get(R"(/api/sessions/([^/]+)/state)", guarded([this](const Request& req, Response& res) {
      send(res, 200, state_payload(store_.read(req.matches[1])));
    }));

    server_.Post(R"(/api/sessions/([^/]+)/step)", guarded([this](const Request& req, Response& res) {
      const auto b = body(req);
      const auto dir = parse_direction(b.value("direction", std::string("next")));
      if (!dir) throw Error(ErrorCode::BadSelection, "direction must be \"next\" or \"prev\"");
      auto payload = store_.update(req.matches[1], [&](Session& s) {
        advance(pack(s.pack_id), s, *dir);
        return state_payload(s);
      });
      send(res, 200, payload);
    }));

    server_.Post(R"(/api/sessions/([^/]+)/answers)", guarded([this](const Request& req, Response& res) {
      const auto b = body(req);
      const auto qid = b.at("question_id").get<std::string>();
      const auto selection = b.at("selection").get<Selection>();
      auto payload = store_.update(req.matches[1], [&](Session& s) {
        submit_answer(pack(s.pack_id), s, qid, selection);
        return state_payload(s);
      });
      send(res, 200, payload);
    }));

    server_.Post(R"(/api/sessions/([^/]+)/survey)", guarded([this](const Request& req, Response& res) {
      const auto b = body(req);
      const auto sid = b.at("statement_id").get<std::string>();
      const auto level = b.at("level").get<int>();
      auto payload = store_.update(req.matches[1], [&](Session& s) {
        submit_survey(pack(s.pack_id), s, sid, level);
        return state_payload(s);
      });
      send(res, 200, payload);
    }));

    server_.Get(R"(/api/sessions/([^/]+)/report)", guarded([this](const Request& req, Response& res) {
      const Session s = store_.read(req.matches[1]);
      if (s.phase != Phase::Done) {
        send(res, 403, error_body("not-done", "the report is available once the session is done"));
        return;
      }
      const auto& p = pack(s.pack_id);
      nlohmann::json key = nlohmann::json::object();
      for (const auto& q : p.pretest) key[q.id] = q.correct;
      nlohmann::json out = {{"session_id", s.id},
                            {"participant", s.participant},
                            {"pretest", score_to_json(*s.pretest_score)},
                            {"posttest", score_to_json(*s.posttest_score)},
                            {"answers", {{"pretest", s.pretest_answers}, {"posttest", s.posttest_answers}}},
                            {"answer_key", key},
                            {"survey_responses", s.survey_responses}};
      send(res, 200, out);
    }));

    server_.Get("/api/stats", guarded([this](const Request& req, Response& res) {
      std::vector<Session> sessions;
      const std::string pack_filter = req.has_param("pack_id") ? req.get_param_value("pack_id") : "";
      for (const auto& id : store_.ids()) {
        try {
          Session s = store_.read(id);
          if (pack_filter.empty() || s.pack_id == pack_filter) sessions.push_back(std::move(s));
        } catch (const Error&) {
          // Corrupt records are left in place and excluded.
        }
      }
      std::vector<SurveyStatement> statements;
      const std::string pid = !pack_filter.empty() ? pack_filter : (packs_.size() == 1 ? packs_.begin()->first : "");
      if (auto it = packs_.find(pid); it != packs_.end()) statements = it->second.survey;
      send(res, 200, nlohmann::json::parse(study_report_to_json(build_study_report(sessions, statements)).dump()));
    }));

    server_.Post("/api/lint", guarded([this](const Request& req, Response& res) {
      if (!rules_) throw Error(ErrorCode::NotFound, "no rule corpus loaded");
      const auto b = body(req);
      std::set<std::string> frames;
      if (b.contains("frames")) frames = b.at("frames").get<std::set<std::string>>();
      nlohmann::json out = nlohmann::json::array();
      for (const auto& f : lint_target(*rules_, b.at("source").get<std::string>(), frames))
        out.push_back({{"rule_id", f.rule_id},
                       {"span", {f.span.start, f.span.end}},
                       {"severity", to_string(f.severity)},
                       {"message", f.message}});
      send(res, 200, out);
    }));
  }

  std::map<std::string, LessonPack> packs_;
  std::optional<RuleSet> rules_;
  SessionStore store_;
  httplib::Server server_;
};

}  // namespace tutor
