#pragma once

// Pre/post analysis: per-question delta table, Wilcoxon signed-rank test on
// paired totals, and Likert summaries with net stacked distributions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tutor/error.hpp"
#include "tutor/session.hpp"

namespace tutor {

struct PairedScores {
  std::vector<std::string> participants;
  std::vector<int> pre;
  std::vector<int> post;
};

enum class StatMethod { Exact, NormalApprox };
enum class ZeroHandling { Discard, Pratt };

inline std::string_view to_string(StatMethod m) { return m == StatMethod::Exact ? "exact" : "normal"; }

inline constexpr std::size_t kMaxExactPairs = 25;
inline constexpr double kDefaultAlpha = 0.05;

struct StatResult {
  double statistic_S = 0.0;
  double p_value = 1.0;
  std::size_t n_nonzero = 0;
  StatMethod method = StatMethod::Exact;
  bool degenerate = false;  // every difference was zero
  double alpha = kDefaultAlpha;
  bool significant() const { return p_value < alpha; }
};

namespace stats {

/// Midranks (1-based, ties averaged) of the given values, returned doubled so they stay integral.
inline std::vector<std::int64_t> doubled_midranks(const std::vector<std::int64_t>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<std::int64_t> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t k = i;
    while (k + 1 < n && values[order[k + 1]] == values[order[i]]) ++k;
    // Positions i..k (0-based) share rank ((i+1)+(k+1))/2; doubled: i+k+2.
    for (std::size_t m = i; m <= k; ++m) ranks[order[m]] = static_cast<std::int64_t>(i + k + 2);
    i = k + 1;
  }
  return ranks;
}

/// Number of sign assignments (out of 2^n) whose doubled positive-rank sum W satisfies
/// |2W - total| >= |2W_obs - total|. Subset-sum DP over doubled ranks.
inline std::uint64_t count_at_least_as_extreme(const std::vector<std::int64_t>& ranks2, std::int64_t observed2) {
  const std::int64_t total2 = std::accumulate(ranks2.begin(), ranks2.end(), std::int64_t{0});
  std::vector<std::uint64_t> ways(static_cast<std::size_t>(total2) + 1, 0);
  ways[0] = 1;
  std::int64_t reach = 0;
  for (auto r : ranks2) {
    for (std::int64_t s = reach; s >= 0; --s)
      if (ways[static_cast<std::size_t>(s)]) ways[static_cast<std::size_t>(s + r)] += ways[static_cast<std::size_t>(s)];
    reach += r;
  }
  const std::int64_t dev = std::llabs(2 * observed2 - total2);
  std::uint64_t count = 0;
  for (std::int64_t s = 0; s <= total2; ++s)
    if (std::llabs(2 * s - total2) >= dev) count += ways[static_cast<std::size_t>(s)];
  return count;
}

inline double normal_two_sided(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

}  // namespace stats

/// Signed-rank test on post − pre. S is the centered statistic W+ − (sum of ranks)/2,
/// which for n nonzero differences without zeros in the ranking equals W+ − n(n+1)/4.
inline StatResult wilcoxon_signed_rank(const PairedScores& pairs, double alpha = kDefaultAlpha,
                                       ZeroHandling zeros = ZeroHandling::Discard) {
  if (pairs.pre.size() != pairs.post.size() ||
      (!pairs.participants.empty() && pairs.participants.size() != pairs.pre.size()))
    throw Error(ErrorCode::LengthMismatch, "pre and post score lists differ in length");

  std::vector<std::int64_t> diffs;
  for (std::size_t i = 0; i < pairs.pre.size(); ++i)
    diffs.push_back(static_cast<std::int64_t>(pairs.post[i]) - pairs.pre[i]);

  std::vector<std::int64_t> ranked;  // |d| values that take part in ranking
  for (auto d : diffs)
    if (d != 0 || zeros == ZeroHandling::Pratt) ranked.push_back(std::llabs(d));
  const auto all_ranks = stats::doubled_midranks(ranked);

  std::vector<std::int64_t> ranks2;  // doubled ranks of nonzero differences
  std::int64_t w_plus2 = 0;
  {
    std::size_t k = 0;
    for (auto d : diffs) {
      if (d == 0 && zeros == ZeroHandling::Discard) continue;
      const auto r = all_ranks[k++];
      if (d == 0) continue;
      ranks2.push_back(r);
      if (d > 0) w_plus2 += r;
    }
  }

  StatResult result;
  result.alpha = alpha;
  result.n_nonzero = ranks2.size();
  if (ranks2.empty()) {
    result.degenerate = true;
    return result;
  }
  const std::int64_t total2 = std::accumulate(ranks2.begin(), ranks2.end(), std::int64_t{0});
  result.statistic_S = (2.0 * static_cast<double>(w_plus2) - static_cast<double>(total2)) / 4.0;

  if (ranks2.size() <= kMaxExactPairs) {
    result.method = StatMethod::Exact;
    const std::uint64_t hits = stats::count_at_least_as_extreme(ranks2, w_plus2);
    result.p_value = std::min(1.0, static_cast<double>(hits) / std::ldexp(1.0, static_cast<int>(ranks2.size())));
  } else {
    // Var(W+) = sum r_i^2 / 4 over the ranks used; this reduces to
    // n(n+1)(2n+1)/24 − sum(t^3 − t)/48 for plain midranks.
    result.method = StatMethod::NormalApprox;
    double var = 0.0;
    for (auto r2 : ranks2) var += static_cast<double>(r2) * static_cast<double>(r2) / 16.0;
    result.p_value = var > 0 ? std::min(1.0, stats::normal_two_sided(result.statistic_S / std::sqrt(var))) : 1.0;
  }
  return result;
}

// ---------------------------------------------------------------------------

struct DeltaRow {
  std::string question_id;
  int pre_correct = 0;
  int post_correct = 0;
  int delta = 0;
  friend bool operator==(const DeltaRow&, const DeltaRow&) = default;
};

struct DeltaTable {
  std::size_t participants = 0;
  std::vector<DeltaRow> rows;
};

inline DeltaTable delta_table(const std::vector<ScoreReport>& pre, const std::vector<ScoreReport>& post,
                              const std::vector<std::string>& question_ids) {
  if (pre.size() != post.size())
    throw Error(ErrorCode::LengthMismatch, "pre and post report lists differ in length");
  DeltaTable table;
  table.participants = pre.size();
  for (const auto& id : question_ids) {
    DeltaRow row{id};
    for (const auto& r : pre) row.pre_correct += r.credit(id);
    for (const auto& r : post) row.post_correct += r.credit(id);
    row.delta = row.post_correct - row.pre_correct;
    table.rows.push_back(row);
  }
  return table;
}

inline DeltaTable delta_table(const std::vector<ScoreReport>& pre, const std::vector<ScoreReport>& post,
                              const std::vector<Question>& key) {
  std::vector<std::string> ids;
  for (const auto& q : key) ids.push_back(q.id);
  return delta_table(pre, post, ids);
}

// ---------------------------------------------------------------------------

/// Counts for SD, D, N, A, SA.
using LikertCounts = std::array<int, 5>;

/// round(100 * num / den) with halves rounded up; 0 when den is 0.
inline int percent_half_up(int num, int den) {
  if (den <= 0) return 0;
  return (200 * num + den) / (2 * den);
}

struct LikertRow {
  std::string statement_id;
  std::string text;
  LikertCounts counts{};
  int total = 0;
  int percent_agree = 0;
  // Net stacked bar with Neutral removed; disagreement is negative.
  int net_sd = 0;
  int net_d = 0;
  int net_a = 0;
  int net_sa = 0;
};

struct LikertSummary {
  std::vector<LikertRow> rows;
};

inline LikertRow summarize_likert_row(std::string id, std::string text, const LikertCounts& c) {
  LikertRow row{std::move(id), std::move(text), c};
  row.total = std::accumulate(c.begin(), c.end(), 0);
  row.percent_agree = percent_half_up(c[3] + c[4], row.total);
  row.net_sd = -percent_half_up(c[0], row.total);
  row.net_d = -percent_half_up(c[1], row.total);
  row.net_a = percent_half_up(c[3], row.total);
  row.net_sa = percent_half_up(c[4], row.total);
  return row;
}

struct LikertInput {
  std::string statement_id;
  std::string text;
  LikertCounts counts{};
};

inline LikertSummary summarize_likert(const std::vector<LikertInput>& responses) {
  LikertSummary out;
  for (const auto& r : responses) out.rows.push_back(summarize_likert_row(r.statement_id, r.text, r.counts));
  return out;
}

}  // namespace tutor
