#pragma once

// Validity-filtered multi-label evaluation: per-label counts, label-based
// macro/micro precision, recall and F1, example-based F1, and paired
// comparison of per-label F1 with the Wilcoxon signed-rank test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/corpus.hpp"
#include "granum/datasets.hpp"
#include "granum/error.hpp"

namespace granum {

/// pmid -> predicted labels. Documents without an entry predict nothing.
using Predictions = std::map<std::string, std::vector<std::string>, PmidLess>;

inline void write_predictions(std::ostream& out, const Predictions& p) {
  for (const auto& [pmid, labels] : p) {
    std::vector<std::string> sorted = labels;
    detail::sort_unique(sorted);
    out << nlohmann::ordered_json{{"pmid", pmid}, {"labels", sorted}}.dump() << '\n';
  }
}

/// Reads `{ "pmid": str, "labels": [str] }` lines; extra fields are ignored,
/// so enhanced-label files are accepted as well.
inline Predictions read_predictions(std::istream& in, const std::string& source = "<predictions>") {
  Predictions out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto& labels = out[j.at("pmid").get<std::string>()];
      for (const auto& l : j.at("labels")) labels.push_back(l.get<std::string>());
      detail::sort_unique(labels);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline Predictions load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions file " + path.string());
  return read_predictions(in, path.string());
}

/// Z' = Z ∩ valid for every document. Throws DataError for pmids that are
/// not in the dataset.
inline Predictions validity_filter(const Predictions& predictions, const LabeledDataset& dataset) {
  std::map<std::string, const LabeledRow*, PmidLess> rows;
  for (const auto& r : dataset.rows) rows.emplace(r.pmid, &r);
  Predictions out;
  for (const auto& [pmid, labels] : predictions) {
    auto it = rows.find(pmid);
    if (it == rows.end()) throw DataError("prediction for unknown pmid '" + pmid + "'");
    auto& kept = out[pmid];
    for (const auto& l : labels) {
      if (it->second->is_valid_for(l)) kept.push_back(l);
    }
    detail::sort_unique(kept);
  }
  return out;
}

struct LabelScore {
  std::string label;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  // Set when the value came from the 0/0 = 0 convention.
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false;
};

namespace detail {

inline double safe_ratio(double num, double den, bool& undefined) {
  undefined = den == 0;
  return den == 0 ? 0.0 : num / den;
}

inline void fill_rates(LabelScore& s) {
  s.precision = safe_ratio(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fp), s.precision_undefined);
  s.recall = safe_ratio(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fn), s.recall_undefined);
  s.f1 = safe_ratio(2 * s.precision * s.recall, s.precision + s.recall, s.f1_undefined);
}

struct MeanVar {
  double mean = 0, var = 0;
};

/// Mean and population variance.
inline MeanVar mean_var(const std::vector<double>& xs) {
  MeanVar mv;
  if (xs.empty()) return mv;
  for (double x : xs) mv.mean += x;
  mv.mean /= static_cast<double>(xs.size());
  for (double x : xs) mv.var += (x - mv.mean) * (x - mv.mean);
  mv.var /= static_cast<double>(xs.size());
  return mv;
}

}  // namespace detail

struct EvalResult {
  std::string name;
  std::vector<LabelScore> labels;  // sorted by label
  double maP = 0, maP_var = 0, maR = 0, maR_var = 0, maF1 = 0, maF1_var = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double miP = 0, miR = 0, miF1 = 0;
  double example_f1 = 0;
  std::size_t example_docs = 0;  // documents with Y ∪ Z non-empty

  /// Recomputes every label-based aggregate from the per-label counts.
  void aggregate() {
    std::sort(labels.begin(), labels.end(), [](const LabelScore& a, const LabelScore& b) { return a.label < b.label; });
    std::vector<double> ps, rs, fs;
    tp = fp = fn = 0;
    for (auto& s : labels) {
      detail::fill_rates(s);
      ps.push_back(s.precision);
      rs.push_back(s.recall);
      fs.push_back(s.f1);
      tp += s.tp;
      fp += s.fp;
      fn += s.fn;
    }
    auto p = detail::mean_var(ps), r = detail::mean_var(rs), f = detail::mean_var(fs);
    maP = p.mean, maP_var = p.var, maR = r.mean, maR_var = r.var, maF1 = f.mean, maF1_var = f.var;
    bool undefined = false;
    miP = detail::safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fp), undefined);
    miR = detail::safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fn), undefined);
    miF1 = detail::safe_ratio(2 * miP * miR, miP + miR, undefined);
  }

  const LabelScore* find(const std::string& label) const {
    for (const auto& s : labels) {
      if (s.label == label) return &s;
    }
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json per_label = nlohmann::ordered_json::array();
    for (const auto& s : labels) {
      per_label.push_back({{"label", s.label},
                           {"tp", s.tp},
                           {"fp", s.fp},
                           {"fn", s.fn},
                           {"precision", s.precision},
                           {"recall", s.recall},
                           {"f1", s.f1},
                           {"precision_undefined", s.precision_undefined},
                           {"recall_undefined", s.recall_undefined},
                           {"f1_undefined", s.f1_undefined}});
    }
    return {{"name", name},       {"maP", maP},         {"maP_var", maP_var},   {"maR", maR},
            {"maR_var", maR_var}, {"maF1", maF1},       {"maF1_var", maF1_var}, {"miP", miP},
            {"miR", miR},         {"miF1", miF1},       {"tp", tp},             {"fp", fp},
            {"fn", fn},           {"example_f1", example_f1}, {"example_docs", example_docs},
            {"labels", std::move(per_label)}};
  }

  static EvalResult from_json(const nlohmann::json& j) {
    EvalResult r;
    try {
      r.name = j.at("name").get<std::string>();
      for (const auto& s : j.at("labels")) {
        LabelScore ls;
        ls.label = s.at("label").get<std::string>();
        ls.tp = s.at("tp").get<std::size_t>();
        ls.fp = s.at("fp").get<std::size_t>();
        ls.fn = s.at("fn").get<std::size_t>();
        r.labels.push_back(std::move(ls));
      }
      r.example_f1 = j.at("example_f1").get<double>();
      r.example_docs = j.at("example_docs").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed evaluation result: ") + e.what());
    }
    r.aggregate();
    return r;
  }
};

struct ScoreOptions {
  bool validity_filter = true;
};

/// Scores `predictions` against the ground truth of `dataset`. With validity
/// filtering each label is scored over the documents valid for it only;
/// without it, over every document of the dataset.
inline EvalResult score(const Predictions& predictions, const LabeledDataset& dataset, const ScoreOptions& options = {},
                        std::string name = {}) {
  if (dataset.labels.empty()) throw std::invalid_argument("cannot score an empty label set");
  const auto& labels = dataset.labels;
  std::map<std::string, const LabeledRow*, PmidLess> rows;
  for (const auto& r : dataset.rows) rows.emplace(r.pmid, &r);
  for (const auto& [pmid, _] : predictions) {
    if (!rows.count(pmid)) throw DataError("prediction for unknown pmid '" + pmid + "'");
  }

  EvalResult result;
  result.name = std::move(name);
  result.labels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) result.labels[i].label = labels[i];

  double example_sum = 0;
  static const std::vector<std::string> none;
  for (const auto& row : dataset.rows) {
    auto it = predictions.find(row.pmid);
    const auto& predicted = it == predictions.end() ? none : it->second;
    auto in = [](const std::vector<std::string>& v, const std::string& l) { return std::binary_search(v.begin(), v.end(), l); };

    std::size_t y_size = 0, z_size = 0, both = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto& l = labels[i];
      const bool valid = row.is_valid_for(l);
      if (options.validity_filter && !valid) continue;
      const bool y = row.is_positive_for(l);
      const bool z = in(predicted, l);
      auto& s = result.labels[i];
      if (y && z) ++s.tp;
      if (!y && z) ++s.fp;
      if (y && !z) ++s.fn;
      y_size += y;
      z_size += z;
      both += y && z;
    }
    if (y_size + z_size > 0) {
      example_sum += 2.0 * static_cast<double>(both) / static_cast<double>(y_size + z_size);
      ++result.example_docs;
    }
  }
  result.example_f1 = result.example_docs ? example_sum / static_cast<double>(result.example_docs) : 0.0;
  result.aggregate();
  return result;
}

/// Merges results over disjoint label sets (e.g. several years) into one
/// result: label-based aggregates are recomputed from the pooled per-label
/// counts; example F1 is the document-weighted mean.
inline EvalResult pool(const std::string& name, const std::vector<EvalResult>& parts) {
  EvalResult out;
  out.name = name;
  double weighted = 0;
  for (const auto& p : parts) {
    for (const auto& s : p.labels) {
      for (const auto& existing : out.labels) {
        if (existing.label == s.label) throw std::invalid_argument("label '" + s.label + "' appears in several results");
      }
      out.labels.push_back(s);
    }
    weighted += p.example_f1 * static_cast<double>(p.example_docs);
    out.example_docs += p.example_docs;
  }
  out.example_f1 = out.example_docs ? weighted / static_cast<double>(out.example_docs) : 0.0;
  out.aggregate();
  return out;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

enum class Alternative { two_sided, less, greater };

struct WilcoxonResult {
  std::size_t n = 0;  // non-zero differences
  double w_plus = 0;  // rank sum of positive differences (a - b > 0)
  double w_minus = 0;
  double p_value = 1;
  bool exact = true;
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Paired test on differences a - b. Zero differences are dropped and tied
/// magnitudes get average ranks. Exact null distribution for n <= 25 (by
/// enumeration of sign assignments), otherwise the normal approximation with
/// tie and continuity correction. `less` means a tends to be smaller than b.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                           Alternative alternative = Alternative::two_sided, double zero_tol = 1e-12) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    if (std::abs(diff) > zero_tol) d.push_back(diff);
  }
  WilcoxonResult r;
  r.n = d.size();
  if (d.empty()) return r;

  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
  // Doubled ranks stay integral under averaging.
  std::vector<long> rank2(d.size());
  std::vector<std::size_t> tie_sizes;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(std::abs(d[order[j + 1]]) - std::abs(d[order[i]])) <= zero_tol) ++j;
    const long doubled = static_cast<long>(i + 1 + j + 1);  // 2 * mean of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
    tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }
  long w_plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total2 += rank2[i];
    if (d[i] > 0) w_plus2 += rank2[i];
  }
  r.w_plus = static_cast<double>(w_plus2) / 2.0;
  r.w_minus = static_cast<double>(total2 - w_plus2) / 2.0;

  const std::size_t n = d.size();
  double p_le = 0, p_ge = 0;
  if (n <= 25) {
    std::vector<double> dist(static_cast<std::size_t>(total2) + 1, 0.0);
    dist[0] = 1.0;
    long reach = 0;
    for (long rk : rank2) {
      for (long s = reach; s >= 0; --s) {
        if (dist[static_cast<std::size_t>(s)] != 0) dist[static_cast<std::size_t>(s + rk)] += dist[static_cast<std::size_t>(s)];
      }
      reach += rk;
    }
    const double denom = std::ldexp(1.0, static_cast<int>(n));
    for (long s = 0; s <= total2; ++s) {
      const double prob = dist[static_cast<std::size_t>(s)] / denom;
      if (s <= w_plus2) p_le += prob;
      if (s >= w_plus2) p_ge += prob;
    }
    r.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1) / 4.0;
    double var = nn * (nn + 1) * (2 * nn + 1) / 24.0;
    for (std::size_t t : tie_sizes) {
      const double tt = static_cast<double>(t);
      var -= (tt * tt * tt - tt) / 48.0;
    }
    const double sd = std::sqrt(var);
    p_le = normal_cdf((r.w_plus - mean + 0.5) / sd);
    p_ge = 1.0 - normal_cdf((r.w_plus - mean - 0.5) / sd);
    r.exact = false;
  }
  switch (alternative) {
    case Alternative::less: r.p_value = std::min(1.0, p_le); break;
    case Alternative::greater: r.p_value = std::min(1.0, p_ge); break;
    case Alternative::two_sided: r.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge)); break;
  }
  return r;
}

struct Comparison {
  std::vector<std::string> labels;
  std::vector<double> f1_a, f1_b;
  WilcoxonResult test;
};

/// Paired comparison of per-label F1 between two results over the same
/// label set (at least six labels).
inline Comparison compare(const EvalResult& a, const EvalResult& b, Alternative alternative = Alternative::two_sided) {
  if (a.labels.size() != b.labels.size()) throw std::invalid_argument("compare: label sets differ");
  Comparison c;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i].label != b.labels[i].label) throw std::invalid_argument("compare: label sets differ");
    c.labels.push_back(a.labels[i].label);
    c.f1_a.push_back(a.labels[i].f1);
    c.f1_b.push_back(b.labels[i].f1);
  }
  if (c.labels.size() < 6) throw std::invalid_argument("compare: needs at least 6 labels");
  c.test = wilcoxon_signed_rank(c.f1_a, c.f1_b, alternative);
  return c;
}

}  // namespace granum
