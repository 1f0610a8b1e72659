#pragma once

// Aggregates a set of stored sessions into the study tables: per-question
// deltas, signed-rank test on totals and the Likert summary.

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tutor/analytics.hpp"
#include "tutor/session.hpp"

namespace tutor {

struct StudyReport {
  PairedScores scores;
  DeltaTable deltas;
  StatResult wilcoxon;
  LikertSummary likert;
};

/// Sessions missing a post-test score are left out of the paired analysis;
/// every recorded survey response is counted.
inline StudyReport build_study_report(std::vector<Session> sessions,
                                      const std::vector<SurveyStatement>& statements = {},
                                      double alpha = kDefaultAlpha,
                                      ZeroHandling zeros = ZeroHandling::Discard) {
  std::sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
    if (a.participant != b.participant) return text::natural_less(a.participant, b.participant);
    return a.id < b.id;
  });

  StudyReport out;
  std::vector<ScoreReport> pre, post;
  for (const auto& s : sessions) {
    if (!s.pretest_score || !s.posttest_score) continue;
    out.scores.participants.push_back(s.participant);
    out.scores.pre.push_back(s.pretest_score->total);
    out.scores.post.push_back(s.posttest_score->total);
    pre.push_back(*s.pretest_score);
    post.push_back(*s.posttest_score);
  }
  std::vector<std::string> question_ids;
  if (!pre.empty())
    for (const auto& [id, _] : pre.front().per_question) question_ids.push_back(id);
  out.deltas = delta_table(pre, post, question_ids);
  out.wilcoxon = wilcoxon_signed_rank(out.scores, alpha, zeros);

  std::vector<LikertInput> inputs;
  if (!statements.empty()) {
    for (const auto& st : statements) inputs.push_back({st.id, st.text, {}});
  } else {
    std::vector<std::string> ids;
    for (const auto& s : sessions)
      for (const auto& [id, _] : s.survey_responses)
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    std::sort(ids.begin(), ids.end(), [](const auto& a, const auto& b) { return text::natural_less(a, b); });
    for (auto& id : ids) inputs.push_back({id, {}, {}});
  }
  for (auto& in : inputs)
    for (const auto& s : sessions)
      if (auto it = s.survey_responses.find(in.statement_id); it != s.survey_responses.end())
        if (it->second >= kLikertMin && it->second <= kLikertMax) ++in.counts[it->second - 1];
  out.likert = summarize_likert(inputs);
  return out;
}

inline nlohmann::ordered_json study_report_to_json(const StudyReport& r) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["participants"] = r.scores.participants.size();
  oj scores = oj::array();
  for (std::size_t i = 0; i < r.scores.pre.size(); ++i)
    scores.push_back({{"participant", r.scores.participants[i]}, {"pre", r.scores.pre[i]}, {"post", r.scores.post[i]}});
  j["scores"] = scores;
  oj rows = oj::array();
  for (const auto& row : r.deltas.rows)
    rows.push_back({{"question", row.question_id},
                    {"pretest_correct", row.pre_correct},
                    {"posttest_correct", row.post_correct},
                    {"delta", row.delta}});
  j["delta_table"] = rows;
  const auto& w = r.wilcoxon;
  j["wilcoxon"] = {{"S", w.statistic_S},
                   {"p_value", w.p_value},
                   {"n_nonzero", w.n_nonzero},
                   {"method", to_string(w.method)},
                   {"degenerate", w.degenerate},
                   {"alpha", w.alpha},
                   {"significant", w.significant()}};
  oj likert = oj::array();
  for (const auto& row : r.likert.rows) {
    likert.push_back({{"statement", row.statement_id},
                      {"text", row.text},
                      {"counts", {{"SD", row.counts[0]}, {"D", row.counts[1]}, {"N", row.counts[2]}, {"A", row.counts[3]}, {"SA", row.counts[4]}}},
                      {"total", row.total},
                      {"percent_agree", row.percent_agree},
                      {"net", {{"SD", row.net_sd}, {"D", row.net_d}, {"A", row.net_a}, {"SA", row.net_sa}}}});
  }
  j["likert"] = likert;
  return j;
}

inline std::string format_p(double p) {
  std::ostringstream ss;
  if (p < 0.0001) ss << "< .0001 (" << std::scientific << std::setprecision(3) << p << ")";
  else ss << std::fixed << std::setprecision(4) << p;
  return ss.str();
}

inline std::string study_report_to_text(const StudyReport& r) {
  std::ostringstream out;
  out << "participants: " << r.scores.participants.size() << "\n\n";
  out << "question  pre-correct  post-correct  delta\n";
  for (const auto& row : r.deltas.rows)
    out << std::left << std::setw(10) << row.question_id << std::right << std::setw(11) << row.pre_correct
        << std::setw(14) << row.post_correct << std::setw(7) << row.delta << "\n";
  const auto& w = r.wilcoxon;
  out << "\nWilcoxon signed-rank: S = " << w.statistic_S << ", p " << (w.p_value < 0.0001 ? "" : "= ")
      << format_p(w.p_value) << ", n = " << w.n_nonzero << ", " << to_string(w.method)
      << (w.degenerate ? ", all differences zero" : "") << (w.significant() ? ", significant" : ", not significant")
      << " at alpha = " << w.alpha << "\n";
  if (!r.likert.rows.empty()) {
    out << "\nstatement  %agree   SD   D   N   A  SA   net(SD,D,A,SA)\n";
    for (const auto& row : r.likert.rows) {
      out << std::left << std::setw(10) << row.statement_id << std::right << std::setw(6) << row.percent_agree << "%";
      for (int c : row.counts) out << std::setw(4) << c;
      out << "   " << row.net_sd << "," << row.net_d << "," << row.net_a << "," << row.net_sa;
      if (!row.text.empty()) out << "  " << row.text;
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace tutor
