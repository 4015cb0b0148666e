#pragma once

// Logistic-regression baseline: one binary classifier per fine label over
// binary lexical and semantic features, F-ANOVA feature selection, an L2
// grid, and majority voting across seeds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "granum/corpus.hpp"
#include "granum/datasets.hpp"
#include "granum/eval.hpp"
#include "granum/text.hpp"

namespace granum {

inline const std::vector<std::size_t> kDefaultFeatureGrid = {5, 10, 100, 1000};
inline const std::vector<double> kDefaultL2Grid = {0.01, 0.1, 1, 10, 100, 1e3, 1e4, 1e5, 1e6, 1e9};
inline const std::vector<std::uint64_t> kDefaultSeeds = {11, 21, 31, 41, 51, 61};

/// Binary features: "t:<token>" for lowercased alphanumeric tokens of the
/// text, "c:<cui>" for concept occurrences. Ids are positions in the sorted
/// feature-name list.
class FeatureSpace {
 public:
  FeatureSpace() = default;

  static std::vector<std::string> raw_features(std::string_view text, const std::vector<std::string>& occurrences) {
    std::vector<std::string> out;
    const std::string folded = text::fold_case(text);
    for (auto tok : text::alnum_tokens(folded)) out.push_back("t:" + std::string(tok));
    for (const auto& cui : occurrences) out.push_back("c:" + cui);
    detail::sort_unique(out);
    return out;
  }

  void add(std::string_view text, const std::vector<std::string>& occurrences) {
    for (auto& f : raw_features(text, occurrences)) pending_.push_back(std::move(f));
  }

  /// Freezes the vocabulary collected by add().
  void finalize() {
    names_.insert(names_.end(), pending_.begin(), pending_.end());
    pending_.clear();
    detail::sort_unique(names_);
  }

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::uint32_t id) const { return names_[id]; }

  /// Sorted ids of the known features of a document.
  std::vector<std::uint32_t> encode(std::string_view text, const std::vector<std::string>& occurrences) const {
    std::vector<std::uint32_t> ids;
    for (const auto& f : raw_features(text, occurrences)) {
      auto it = std::lower_bound(names_.begin(), names_.end(), f);
      if (it != names_.end() && *it == f) ids.push_back(static_cast<std::uint32_t>(it - names_.begin()));
    }
    return ids;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::string> pending_;
};

struct EncodedRow {
  std::string pmid;
  std::vector<std::uint32_t> features;
  std::vector<std::string> positive_labels;
  std::vector<std::string> valid_labels;
};

struct EncodedDataset {
  std::vector<std::string> labels;
  std::vector<EncodedRow> rows;
  std::size_t feature_count = 0;
};

/// Encodes `dataset` with `space`; occurrences are looked up in `corpus`
/// (nullptr: lexical features only).
inline EncodedDataset encode(const LabeledDataset& dataset, const FeatureSpace& space, const Corpus* corpus) {
  static const std::vector<std::string> none;
  EncodedDataset out;
  out.labels = dataset.labels;
  out.feature_count = space.size();
  for (const auto& r : dataset.rows) {
    const Document* doc = corpus ? corpus->find(r.pmid) : nullptr;
    out.rows.push_back(EncodedRow{r.pmid, space.encode(r.text, doc ? doc->occurrences : none), r.positive_labels,
                                  r.valid_labels});
  }
  return out;
}

inline FeatureSpace build_feature_space(const LabeledDataset& dataset, const Corpus* corpus) {
  static const std::vector<std::string> none;
  FeatureSpace space;
  for (const auto& r : dataset.rows) {
    const Document* doc = corpus ? corpus->find(r.pmid) : nullptr;
    space.add(r.text, doc ? doc->occurrences : none);
  }
  space.finalize();
  return space;
}

/// The rows of one label: documents valid for it, with binary targets.
struct BinaryProblem {
  std::vector<const EncodedRow*> rows;
  std::vector<std::uint8_t> y;
  std::size_t feature_count = 0;

  std::size_t positives() const {
    std::size_t p = 0;
    for (auto v : y) p += v;
    return p;
  }
};

inline BinaryProblem binary_problem(const EncodedDataset& data, const std::string& label) {
  BinaryProblem p;
  p.feature_count = data.feature_count;
  for (const auto& r : data.rows) {
    if (!std::binary_search(r.valid_labels.begin(), r.valid_labels.end(), label)) continue;
    p.rows.push_back(&r);
    p.y.push_back(std::binary_search(r.positive_labels.begin(), r.positive_labels.end(), label) ? 1 : 0);
  }
  return p;
}

/// One-way ANOVA F statistic of every feature between the two classes. A
/// feature with no within-class variance but different class means scores
/// +infinity; a constant feature scores 0.
inline std::vector<double> anova_f_scores(const BinaryProblem& p) {
  const std::size_t n1 = p.positives();
  const std::size_t n = p.rows.size();
  const std::size_t n0 = n - n1;
  if (n1 == 0 || n0 == 0) throw std::invalid_argument("F-ANOVA needs both classes among valid instances");
  std::vector<std::int64_t> c1(p.feature_count, 0), c0(p.feature_count, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = p.y[i] ? c1 : c0;
    for (auto f : p.rows[i]->features) c[f] += 1;
  }
  // Integer counts keep mirrored features bit-identical, so ties stay ties.
  // F = (c1 n0 - c0 n1)^2 (n - 2) / (n (c1 (n1 - c1) n0 + c0 (n0 - c0) n1))
  const auto N1 = static_cast<std::int64_t>(n1), N0 = static_cast<std::int64_t>(n0);
  std::vector<double> scores(p.feature_count, 0);
  for (std::size_t f = 0; f < p.feature_count; ++f) {
    const auto diff = static_cast<double>(c1[f] * N0 - c0[f] * N1);
    const auto within = static_cast<double>(c1[f] * (N1 - c1[f]) * N0 + c0[f] * (N0 - c0[f]) * N1);
    if (diff == 0) {
      scores[f] = 0;
    } else if (within == 0 || n <= 2) {
      scores[f] = std::numeric_limits<double>::infinity();
    } else {
      scores[f] = diff * diff * static_cast<double>(n - 2) / (static_cast<double>(n) * within);
    }
  }
  return scores;
}

/// Top-k features by F (ties: ascending id), returned in ascending id order.
inline std::vector<std::uint32_t> f_anova_select(const BinaryProblem& p, std::size_t k) {
  const auto scores = anova_f_scores(p);
  std::vector<std::uint32_t> ids(scores.size());
  for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline std::vector<std::uint32_t> f_anova_select(const EncodedDataset& data, const std::string& label, std::size_t k) {
  return f_anova_select(binary_problem(data, label), k);
}

struct LRModel {
  std::string label;
  std::vector<std::uint32_t> features;  // ascending ids
  std::vector<double> weights;          // aligned with features
  double bias = 0;
  double l2_c = 1;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0;

  double decision(const std::vector<std::uint32_t>& row_features) const {
    double z = bias;
    std::size_t j = 0;
    for (auto f : row_features) {
      while (j < features.size() && features[j] < f) ++j;
      if (j == features.size()) break;
      if (features[j] == f) z += weights[j];
    }
    return z;
  }
  bool predict(const std::vector<std::uint32_t>& row_features) const { return decision(row_features) > 0; }

  /// A featureless model that always (or never) predicts the label.
  static LRModel constant(std::string label, bool positive) {
    LRModel m;
    m.label = std::move(label);
    m.bias = positive ? 1.0 : -1.0;
    m.converged = true;
    return m;
  }
};

/// Mean logistic loss plus ||w||^2 / (2 C n); the bias is not penalized.
/// Rows are lists of active columns in [0, k); theta holds the k weights
/// followed by the bias.
class LogisticObjective {
 public:
  LogisticObjective(std::vector<std::vector<std::uint32_t>> rows, std::vector<std::uint8_t> y, std::size_t k, double l2_c)
      : rows_(std::move(rows)), y_(std::move(y)), k_(k), l2_c_(l2_c) {}

  std::size_t dimension() const { return k_ + 1; }
  std::size_t row_count() const { return rows_.size(); }

  std::vector<double> margins(const std::vector<double>& theta) const {
    std::vector<double> z(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double s = theta[k_];
      for (auto c : rows_[i]) s += theta[c];
      z[i] = s;
    }
    return z;
  }

  /// Change of every margin per unit step along `v`.
  std::vector<double> directional(const std::vector<double>& v) const { return margins(v); }

  double value_at(const std::vector<double>& z, const std::vector<double>& theta) const {
    const double n = static_cast<double>(rows_.size());
    double loss = 0;
    for (std::size_t i = 0; i < rows_.size(); ++i) loss += softplus(z[i]) - (y_[i] ? z[i] : 0.0);
    double reg = 0;
    for (std::size_t j = 0; j < k_; ++j) reg += theta[j] * theta[j];
    return loss / n + reg / (2 * l2_c_ * n);
  }

  std::vector<double> gradient_at(const std::vector<double>& z, const std::vector<double>& theta) const {
    const double n = static_cast<double>(rows_.size());
    std::vector<double> g(k_ + 1, 0);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const double r = sigmoid(z[i]) - (y_[i] ? 1.0 : 0.0);
      for (auto c : rows_[i]) g[c] += r;
      g[k_] += r;
    }
    for (std::size_t j = 0; j <= k_; ++j) g[j] /= n;
    for (std::size_t j = 0; j < k_; ++j) g[j] += theta[j] / (l2_c_ * n);
    return g;
  }

  double value(const std::vector<double>& theta) const { return value_at(margins(theta), theta); }
  std::vector<double> gradient(const std::vector<double>& theta) const { return gradient_at(margins(theta), theta); }

  static double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }
  static double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

 private:
  std::vector<std::vector<std::uint32_t>> rows_;
  std::vector<std::uint8_t> y_;
  std::size_t k_;
  double l2_c_;
};

struct TrainOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-6;
  std::vector<double>* loss_trace = nullptr;  // objective after every accepted step
};

/// Projects the rows of `p` onto `features` (ascending ids) as column lists.
inline std::vector<std::vector<std::uint32_t>> project(const BinaryProblem& p, const std::vector<std::uint32_t>& features) {
  std::vector<std::vector<std::uint32_t>> out(p.rows.size());
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto& row = p.rows[i]->features;
    std::size_t a = 0, b = 0;
    while (a < row.size() && b < features.size()) {
      if (row[a] < features[b]) {
        ++a;
      } else if (features[b] < row[a]) {
        ++b;
      } else {
        out[i].push_back(static_cast<std::uint32_t>(b));
        ++a, ++b;
      }
    }
  }
  return out;
}

/// Full-batch gradient descent with Armijo backtracking from a zero start.
/// Non-convergence is reported through LRModel::converged.
inline LRModel train_lr(const BinaryProblem& p, std::string label, const std::vector<std::uint32_t>& features, double l2_c,
                        const TrainOptions& options = {}) {
  if (p.rows.empty()) throw std::invalid_argument("train_lr: no valid instances");
  if (!(l2_c > 0)) throw std::invalid_argument("train_lr: l2_c must be positive");
  const LogisticObjective objective(project(p, features), p.y, features.size(), l2_c);
  std::vector<double> theta(objective.dimension(), 0.0);
  std::vector<double> z(objective.row_count(), 0.0);
  double f = objective.value_at(z, theta);
  double step = 1.0;
  LRModel m;
  m.label = std::move(label);
  m.features = features;
  m.l2_c = l2_c;
  if (options.loss_trace) options.loss_trace->push_back(f);

  std::vector<double> g = objective.gradient_at(z, theta);
  auto norm2 = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return s;
  };
  double g2 = norm2(g);
  std::vector<double> theta_c(theta.size()), z_c(z.size());
  for (m.iterations = 0; m.iterations < options.max_iterations; ++m.iterations) {
    if (std::sqrt(g2) < options.gradient_tolerance) break;
    const auto dz = objective.directional(g);
    bool accepted = false;
    double f_c = f;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t j = 0; j < theta.size(); ++j) theta_c[j] = theta[j] - step * g[j];
      for (std::size_t i = 0; i < z.size(); ++i) z_c[i] = z[i] - step * dz[i];
      f_c = objective.value_at(z_c, theta_c);
      if (f_c <= f - 0.5 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    theta.swap(theta_c);
    z.swap(z_c);
    f = f_c;
    if (options.loss_trace) options.loss_trace->push_back(f);
    g = objective.gradient_at(z, theta);
    g2 = norm2(g);
    step = std::min(step * 2.0, 1e6);
  }
  m.gradient_norm = std::sqrt(g2);
  m.converged = m.gradient_norm < options.gradient_tolerance;
  m.weights.assign(theta.begin(), theta.end() - 1);
  m.bias = theta.back();
  return m;
}

/// F1 of `model` on the valid rows of `p` (0/0 = 0).
inline double f1_on(const LRModel& model, const BinaryProblem& p) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const bool z = model.predict(p.rows[i]->features);
    const bool y = p.y[i] != 0;
    tp += y && z;
    fp += !y && z;
    fn += y && !z;
  }
  return tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

struct GridChoice {
  std::size_t k = 0;
  double l2_c = 0;
  double f1 = -1;
  LRModel model;  // trained on the training part with (k, l2_c)
};

/// Picks (k, C) maximizing F1 against the weak labels of `val`; ties go to
/// the smaller k, then the smaller C.
inline GridChoice grid_search(const BinaryProblem& train, const BinaryProblem& val, const std::vector<std::size_t>& k_grid,
                              const std::vector<double>& c_grid) {
  if (k_grid.empty() || c_grid.empty()) throw std::invalid_argument("grid_search: empty grid");
  std::vector<std::size_t> ks = k_grid;
  std::vector<double> cs = c_grid;
  std::sort(ks.begin(), ks.end());
  std::sort(cs.begin(), cs.end());
  GridChoice best;
  for (std::size_t k : ks) {
    const auto features = f_anova_select(train, k);
    for (double c : cs) {
      auto model = train_lr(train, "", features, c);
      const double f1 = f1_on(model, val);
      if (f1 > best.f1) best = GridChoice{k, c, f1, std::move(model)};
    }
  }
  return best;
}

/// Per document and label: assigned iff a strict majority of the per-seed
/// predictions assign it (4 of 6 for the default seed list).
inline Predictions predict_voted(const std::vector<Predictions>& per_seed, std::size_t expected_seeds = 6) {
  if (per_seed.size() != expected_seeds) {
    throw std::invalid_argument("predict_voted: expected " + std::to_string(expected_seeds) + " seed models, got " +
                                std::to_string(per_seed.size()));
  }
  std::map<std::string, std::map<std::string, std::size_t>, PmidLess> counts;
  for (const auto& preds : per_seed) {
    for (const auto& [pmid, labels] : preds) {
      auto& c = counts[pmid];
      for (const auto& l : labels) ++c[l];
    }
  }
  Predictions out;
  for (const auto& [pmid, per_label] : counts) {
    auto& labels = out[pmid];
    for (const auto& [label, n] : per_label) {
      if (2 * n > per_seed.size()) labels.push_back(label);
    }
  }
  return out;
}

}  // namespace granum
