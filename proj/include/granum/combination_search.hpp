#pragma once

// Exhaustive search over labeling-function subsets and ensemble methods,
// scored against ground truth.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "granum/ensembles.hpp"
#include "granum/eval.hpp"
#include "granum/parallel.hpp"
#include "granum/report.hpp"
#include "granum/votes.hpp"

namespace granum {

inline Predictions to_predictions(const EnhancedLabels& labels) {
  Predictions out;
  for (auto& [pmid, ls] : labels.by_document()) out[pmid] = ls;
  return out;
}

struct MethodScore {
  double maF1 = 0;
  double miF1 = 0;
};

struct ComboRow {
  std::vector<Lf> lfs;
  std::array<std::optional<MethodScore>, 3> scores;  // indexed by Method
  double maF1_variance = 0;  // population variance over the methods that apply

  double best_maF1() const {
    double b = -1;
    for (const auto& s : scores) {
      if (s) b = std::max(b, s->maF1);
    }
    return b;
  }
  double best_miF1() const {
    double b = -1;
    for (const auto& s : scores) {
      if (s) b = std::max(b, s->miF1);
    }
    return b;
  }
};

/// Evaluates every (subset, method) pair. A method only applies to subsets of
/// at least min_columns(method) functions. Rows are sorted by best maF1 and
/// then best miF1 (both descending), then by subset in canonical order.
inline std::vector<ComboRow> search_combinations(const VoteTable& votes, const LabeledDataset& ground_truth,
                                                 const std::vector<Method>& methods, std::vector<Lf> lfs = {},
                                                 unsigned threads = 1, const LabelModelConfig& lm_config = {}) {
  if (lfs.empty()) lfs.assign(kAllLfs.begin(), kAllLfs.end());
  std::size_t min_size = 99;
  for (Method m : methods) min_size = std::min(min_size, min_columns(m));
  const auto subsets = enumerate_combinations(lfs, min_size);
  std::vector<ComboRow> rows(subsets.size());
  parallel_for(subsets.size(), threads, [&](std::size_t i) {
    ComboRow row;
    row.lfs = subsets[i];
    const VoteMatrix matrix = VoteMatrix::from_table(votes, row.lfs);
    std::vector<double> ma;
    for (Method m : methods) {
      if (row.lfs.size() < min_columns(m)) continue;
      const auto enhanced = combine(matrix, m, lm_config);
      const auto result = score(to_predictions(enhanced), ground_truth);
      row.scores[static_cast<std::size_t>(m)] = MethodScore{result.maF1, result.miF1};
      ma.push_back(result.maF1);
    }
    row.maF1_variance = detail::mean_var(ma).var;
    rows[i] = std::move(row);
  });
  std::stable_sort(rows.begin(), rows.end(), [](const ComboRow& a, const ComboRow& b) {
    if (a.best_maF1() != b.best_maF1()) return a.best_maF1() > b.best_maF1();
    if (a.best_miF1() != b.best_miF1()) return a.best_miF1() > b.best_miF1();
    return a.lfs < b.lfs;
  });
  return rows;
}

/// TSV: lfs, maF1 per method, maF1 variance, miF1 per method; "-" where a
/// method does not apply.
inline std::string combinations_tsv(const std::vector<ComboRow>& rows) {
  std::string out = "lfs\tmaF1_MV\tmaF1_ALO\tmaF1_LM\tmaF1_var\tmiF1_MV\tmiF1_ALO\tmiF1_LM\n";
  for (const auto& r : rows) {
    out += join_lfs(r.lfs);
    for (const auto& s : r.scores) out += '\t' + (s ? format3(s->maF1) : std::string("-"));
    out += '\t' + format3(r.maF1_variance);
    for (const auto& s : r.scores) out += '\t' + (s ? format3(s->miF1) : std::string("-"));
    out += '\n';
  }
  return out;
}

}  // namespace granum
