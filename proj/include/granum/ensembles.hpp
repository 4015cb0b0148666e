#pragma once

// Ensembles over labeling-function votes: majority voting (MV), at-least-one
// (ALO), and a generative label model (LM) fitted by EM.
//
// A non-match is an explicit negative vote; there is no abstain.

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/corpus.hpp"
#include "granum/labelers.hpp"
#include "granum/votes.hpp"

namespace granum {

enum class Method { MV, ALO, LM };

inline constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::MV: return "MV";
    case Method::ALO: return "ALO";
    case Method::LM: return "LM";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  std::string upper(s);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "MV") return Method::MV;
  if (upper == "ALO") return Method::ALO;
  if (upper == "LM") return Method::LM;
  return std::nullopt;
}

/// Smallest panel each method accepts.
inline constexpr std::size_t min_columns(Method m) { return m == Method::LM ? 3 : 2; }

struct RowKey {
  std::string pmid;
  std::string label;

  friend bool operator==(const RowKey&, const RowKey&) = default;
  friend bool operator<(const RowKey& a, const RowKey& b) {
    if (a.pmid != b.pmid) return pmid_less(a.pmid, b.pmid);
    return a.label < b.label;
  }
};

/// Binary votes: one row per (document, label) pair, one column per
/// labeling function. Rows are kept in canonical (pmid, label) order.
class VoteMatrix {
 public:
  VoteMatrix(std::vector<Lf> columns, std::vector<RowKey> rows, std::vector<std::uint8_t> cells)
      : columns_(std::move(columns)), rows_(std::move(rows)), cells_(std::move(cells)) {
    if (cells_.size() != rows_.size() * columns_.size()) throw std::invalid_argument("vote matrix: cell count mismatch");
    std::vector<std::size_t> order(rows_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows_[a] < rows_[b]; });
    std::vector<RowKey> rows_sorted;
    std::vector<std::uint8_t> cells_sorted;
    rows_sorted.reserve(rows_.size());
    cells_sorted.reserve(cells_.size());
    for (std::size_t i : order) {
      if (!rows_sorted.empty() && rows_sorted.back() == rows_[i]) {
        throw std::invalid_argument("vote matrix: duplicate row (" + rows_[i].pmid + ", " + rows_[i].label + ")");
      }
      rows_sorted.push_back(rows_[i]);
      for (std::size_t c = 0; c < columns_.size(); ++c) cells_sorted.push_back(cells_[i * columns_.size() + c] ? 1 : 0);
    }
    rows_ = std::move(rows_sorted);
    cells_ = std::move(cells_sorted);
  }

  /// Rows for every valid (pmid, label) pair in `table`, optionally
  /// restricted to one label.
  static VoteMatrix from_table(const VoteTable& table, const std::vector<Lf>& columns,
                               const std::optional<std::string>& only_label = std::nullopt) {
    std::vector<RowKey> rows;
    std::vector<std::uint8_t> cells;
    for (const auto& dv : table.rows()) {
      for (const auto& lv : dv.labels) {
        if (only_label && lv.label != *only_label) continue;
        rows.push_back(RowKey{dv.pmid, lv.label});
        for (Lf lf : columns) cells.push_back(lv.vote(lf) ? 1 : 0);
      }
    }
    return VoteMatrix(columns, std::move(rows), std::move(cells));
  }

  const std::vector<Lf>& columns() const { return columns_; }
  const std::vector<RowKey>& rows() const { return rows_; }
  std::size_t row_count() const { return rows_.size(); }
  std::size_t column_count() const { return columns_.size(); }
  std::uint8_t cell(std::size_t r, std::size_t c) const { return cells_[r * columns_.size() + c]; }
  std::span<const std::uint8_t> row(std::size_t r) const {
    return std::span<const std::uint8_t>(cells_).subspan(r * columns_.size(), columns_.size());
  }

  /// Sub-matrix holding only the rows of `label`.
  VoteMatrix restrict_to(const std::string& label) const {
    std::vector<RowKey> rows;
    std::vector<std::uint8_t> cells;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (rows_[r].label != label) continue;
      rows.push_back(rows_[r]);
      auto v = row(r);
      cells.insert(cells.end(), v.begin(), v.end());
    }
    return VoteMatrix(columns_, std::move(rows), std::move(cells));
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& r : rows_) out.push_back(r.label);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  std::vector<Lf> columns_;
  std::vector<RowKey> rows_;
  std::vector<std::uint8_t> cells_;
};

struct EnhancedLabels {
  Method method = Method::ALO;
  std::vector<Lf> lfs;
  std::vector<RowKey> positives;  // canonical order
  std::vector<std::string> pmids;  // every document the matrix covered, ascending

  /// pmid -> assigned labels, for every covered document.
  std::map<std::string, std::vector<std::string>, PmidLess> by_document() const {
    std::map<std::string, std::vector<std::string>, PmidLess> out;
    for (const auto& p : pmids) out[p];
    for (const auto& k : positives) out[k.pmid].push_back(k.label);
    return out;
  }

  void write_jsonl(std::ostream& out) const {
    std::vector<std::string> lf_names;
    for (Lf lf : lfs) lf_names.emplace_back(to_string(lf));
    for (const auto& [pmid, labels] : by_document()) {
      out << nlohmann::ordered_json{{"pmid", pmid}, {"labels", labels}, {"method", to_string(method)}, {"lfs", lf_names}}
                 .dump()
          << '\n';
    }
  }
};

namespace detail {

inline void require_columns(const VoteMatrix& m, std::size_t min, std::string_view what) {
  if (m.column_count() < min) {
    throw std::invalid_argument(std::string(what) + " needs at least " + std::to_string(min) + " labeling functions, got " +
                                std::to_string(m.column_count()));
  }
}

inline std::vector<std::string> row_pmids(const VoteMatrix& m) {
  std::vector<std::string> out;
  for (const auto& r : m.rows()) {
    if (out.empty() || out.back() != r.pmid) out.push_back(r.pmid);
  }
  return out;
}

template <typename Decide>
EnhancedLabels combine_by(const VoteMatrix& m, Method method, Decide&& decide) {
  EnhancedLabels out{method, m.columns(), {}, row_pmids(m)};
  for (std::size_t r = 0; r < m.row_count(); ++r) {
    std::size_t positive = 0;
    for (auto v : m.row(r)) positive += v;
    if (decide(positive, m.column_count())) out.positives.push_back(m.rows()[r]);
  }
  return out;
}

}  // namespace detail

/// Assigned iff strictly more than half of the columns vote 1.
inline EnhancedLabels combine_mv(const VoteMatrix& m) {
  detail::require_columns(m, 2, "MV");
  return detail::combine_by(m, Method::MV, [](std::size_t pos, std::size_t n) { return 2 * pos > n; });
}

/// Assigned iff at least one column votes 1.
inline EnhancedLabels combine_alo(const VoteMatrix& m) {
  detail::require_columns(m, 2, "ALO");
  return detail::combine_by(m, Method::ALO, [](std::size_t pos, std::size_t) { return pos >= 1; });
}

// ---------------------------------------------------------------------------
// Label model

struct LabelModelConfig {
  int max_iterations = 500;
  double tolerance = 1e-6;  // max-abs parameter change
  double clamp = 1e-4;
  double init_prior_min = 0.01;
  bool record_trace = false;
};

/// Two-coin model per labeling function under conditional independence given
/// the true label: sensitivity P(vote=1 | y=1), specificity P(vote=0 | y=0).
struct LabelModelParams {
  std::vector<Lf> lfs;
  double prior = 0.5;
  std::vector<double> sensitivity;
  std::vector<double> specificity;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;  // filled when record_trace is set
};

/// P(y = 1 | votes) by Bayes' rule, computed in log space.
inline double posterior(const LabelModelParams& p, std::span<const std::uint8_t> votes) {
  double log_pos = std::log(p.prior);
  double log_neg = std::log1p(-p.prior);
  for (std::size_t j = 0; j < votes.size(); ++j) {
    if (votes[j]) {
      log_pos += std::log(p.sensitivity[j]);
      log_neg += std::log1p(-p.specificity[j]);
    } else {
      log_pos += std::log1p(-p.sensitivity[j]);
      log_neg += std::log(p.specificity[j]);
    }
  }
  return 1.0 / (1.0 + std::exp(log_neg - log_pos));
}

namespace detail {

struct VotePatterns {
  std::vector<std::vector<std::uint8_t>> patterns;
  std::vector<double> counts;
};

inline VotePatterns compress(const VoteMatrix& m) {
  std::map<std::vector<std::uint8_t>, double> tally;
  for (std::size_t r = 0; r < m.row_count(); ++r) {
    auto v = m.row(r);
    tally[std::vector<std::uint8_t>(v.begin(), v.end())] += 1.0;
  }
  VotePatterns out;
  for (auto& [pattern, count] : tally) {
    out.patterns.push_back(pattern);
    out.counts.push_back(count);
  }
  return out;
}

inline double log_likelihood(const LabelModelParams& p, const VotePatterns& vp) {
  double ll = 0;
  for (std::size_t k = 0; k < vp.patterns.size(); ++k) {
    double log_pos = std::log(p.prior);
    double log_neg = std::log1p(-p.prior);
    const auto& v = vp.patterns[k];
    for (std::size_t j = 0; j < v.size(); ++j) {
      log_pos += v[j] ? std::log(p.sensitivity[j]) : std::log1p(-p.sensitivity[j]);
      log_neg += v[j] ? std::log1p(-p.specificity[j]) : std::log(p.specificity[j]);
    }
    const double hi = std::max(log_pos, log_neg);
    ll += vp.counts[k] * (hi + std::log(std::exp(log_pos - hi) + std::exp(log_neg - hi)));
  }
  return ll;
}

}  // namespace detail

/// Observed-data log-likelihood of `m` under `p`.
inline double log_likelihood(const LabelModelParams& p, const VoteMatrix& m) {
  return detail::log_likelihood(p, detail::compress(m));
}

/// EM fit of the label model on one label's rows. Initialization comes from
/// majority-vote pseudo-labels; iteration stops when no parameter moves more
/// than config.tolerance or after config.max_iterations.
inline LabelModelParams fit_label_model(const VoteMatrix& m, const LabelModelConfig& config = {}) {
  detail::require_columns(m, 3, "label model");
  if (m.row_count() == 0) throw std::invalid_argument("label model: empty vote matrix");
  const std::size_t cols = m.column_count();
  const double lo = config.clamp;
  const double hi = 1.0 - config.clamp;
  auto clamp = [&](double x) { return std::clamp(x, lo, hi); };

  const auto vp = detail::compress(m);
  LabelModelParams p;
  p.lfs = m.columns();
  p.sensitivity.assign(cols, 0.5);
  p.specificity.assign(cols, 0.5);

  {
    double n_pos = 0, n_neg = 0;
    std::vector<double> agree_pos(cols, 0), agree_neg(cols, 0);
    for (std::size_t k = 0; k < vp.patterns.size(); ++k) {
      const auto& v = vp.patterns[k];
      std::size_t votes = 0;
      for (auto x : v) votes += x;
      const bool mv = 2 * votes > cols;
      (mv ? n_pos : n_neg) += vp.counts[k];
      for (std::size_t j = 0; j < cols; ++j) {
        if (mv && v[j]) agree_pos[j] += vp.counts[k];
        if (!mv && !v[j]) agree_neg[j] += vp.counts[k];
      }
    }
    p.prior = std::clamp(n_pos / (n_pos + n_neg), config.init_prior_min, 1.0 - config.init_prior_min);
    for (std::size_t j = 0; j < cols; ++j) {
      p.sensitivity[j] = clamp(n_pos > 0 ? agree_pos[j] / n_pos : 0.5);
      p.specificity[j] = clamp(n_neg > 0 ? agree_neg[j] / n_neg : 0.5);
    }
  }

  std::vector<double> q(vp.patterns.size());
  for (p.iterations = 0; p.iterations < config.max_iterations;) {
    if (config.record_trace) {
      const double ll = detail::log_likelihood(p, vp);
      assert(p.log_likelihood_trace.empty() ||
             ll >= p.log_likelihood_trace.back() - 1e-9 * std::max(1.0, std::abs(ll)));
      p.log_likelihood_trace.push_back(ll);
    }
    for (std::size_t k = 0; k < vp.patterns.size(); ++k) q[k] = posterior(p, vp.patterns[k]);

    double mass_pos = 0, mass_neg = 0;
    std::vector<double> s_num(cols, 0), t_num(cols, 0);
    for (std::size_t k = 0; k < vp.patterns.size(); ++k) {
      const double wp = vp.counts[k] * q[k];
      const double wn = vp.counts[k] * (1.0 - q[k]);
      mass_pos += wp;
      mass_neg += wn;
      for (std::size_t j = 0; j < cols; ++j) {
        if (vp.patterns[k][j]) {
          s_num[j] += wp;
        } else {
          t_num[j] += wn;
        }
      }
    }
    LabelModelParams next = p;
    next.prior = clamp(mass_pos / (mass_pos + mass_neg));
    for (std::size_t j = 0; j < cols; ++j) {
      if (mass_pos > 0) next.sensitivity[j] = clamp(s_num[j] / mass_pos);
      if (mass_neg > 0) next.specificity[j] = clamp(t_num[j] / mass_neg);
    }
    double change = std::abs(next.prior - p.prior);
    for (std::size_t j = 0; j < cols; ++j) {
      change = std::max(change, std::abs(next.sensitivity[j] - p.sensitivity[j]));
      change = std::max(change, std::abs(next.specificity[j] - p.specificity[j]));
    }
    p.prior = next.prior;
    p.sensitivity = std::move(next.sensitivity);
    p.specificity = std::move(next.specificity);
    ++p.iterations;
    if (change < config.tolerance) {
      p.converged = true;
      break;
    }
  }
  if (config.record_trace) p.log_likelihood_trace.push_back(detail::log_likelihood(p, vp));
  return p;
}

/// Assigned iff the posterior is strictly greater than 0.5.
inline EnhancedLabels apply_label_model(const VoteMatrix& m, const LabelModelParams& p) {
  if (m.columns() != p.lfs) throw std::invalid_argument("label model was fitted for a different labeling-function set");
  EnhancedLabels out{Method::LM, m.columns(), {}, detail::row_pmids(m)};
  for (std::size_t r = 0; r < m.row_count(); ++r) {
    if (posterior(p, m.row(r)) > 0.5) out.positives.push_back(m.rows()[r]);
  }
  return out;
}

/// One label model per label; rows of each label are fitted independently.
inline EnhancedLabels combine_lm(const VoteMatrix& m, const LabelModelConfig& config = {}) {
  detail::require_columns(m, 3, "LM");
  EnhancedLabels out{Method::LM, m.columns(), {}, detail::row_pmids(m)};
  for (const auto& label : m.labels()) {
    const VoteMatrix sub = m.restrict_to(label);
    const auto params = fit_label_model(sub, config);
    auto part = apply_label_model(sub, params);
    out.positives.insert(out.positives.end(), part.positives.begin(), part.positives.end());
  }
  std::sort(out.positives.begin(), out.positives.end());
  return out;
}

inline EnhancedLabels combine(const VoteMatrix& m, Method method, const LabelModelConfig& config = {}) {
  switch (method) {
    case Method::MV: return combine_mv(m);
    case Method::ALO: return combine_alo(m);
    case Method::LM: return combine_lm(m, config);
  }
  throw std::invalid_argument("unknown method");
}

/// Every subset of `lfs` with at least `min_size` members, ordered by size
/// and then lexicographically by canonical labeling-function order.
inline std::vector<std::vector<Lf>> enumerate_combinations(std::vector<Lf> lfs, std::size_t min_size) {
  if (min_size == 0) throw std::invalid_argument("min_size must be positive");
  std::sort(lfs.begin(), lfs.end());
  lfs.erase(std::unique(lfs.begin(), lfs.end()), lfs.end());
  const std::size_t n = lfs.size();
  std::vector<std::vector<Lf>> out;
  for (std::size_t k = min_size; k <= n; ++k) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      std::vector<Lf> subset;
      subset.reserve(k);
      for (std::size_t i : idx) subset.push_back(lfs[i]);
      out.push_back(std::move(subset));
      std::size_t i = k;
      while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

}  // namespace granum
