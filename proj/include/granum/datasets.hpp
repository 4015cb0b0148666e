#pragma once

// Per-year multi-label datasets: weakly-labeled development sets (year < y),
// ground-truth test sets (year >= y), validity masks, the 90-10 split and
// validity-aware negative undersampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/corpus.hpp"
#include "granum/error.hpp"
#include "granum/rng.hpp"
#include "granum/thesaurus.hpp"

namespace granum {

struct LabeledRow {
  std::string pmid;
  std::string text;
  std::vector<std::string> positive_labels;  // sorted, subset of valid_labels
  std::vector<std::string> valid_labels;     // sorted, non-empty

  bool is_negative() const { return positive_labels.empty(); }
  bool is_valid_for(const std::string& label) const {
    return std::binary_search(valid_labels.begin(), valid_labels.end(), label);
  }
  bool is_positive_for(const std::string& label) const {
    return std::binary_search(positive_labels.begin(), positive_labels.end(), label);
  }

  friend bool operator==(const LabeledRow&, const LabeledRow&) = default;
};

struct LabeledDataset {
  int year = 0;
  std::vector<std::string> labels;  // sorted
  std::vector<LabeledRow> rows;     // ascending pmid
  std::string source;               // weak_CO, weak_ALO3, ..., ground_truth
  std::vector<UseCase> use_cases;
  std::optional<std::uint64_t> seed;
  std::optional<double> balance_n;
  std::optional<SelectionThresholds> thresholds;

  std::size_t size() const { return rows.size(); }

  /// Throws DataError unless every row is valid for some label and its
  /// positives are a subset of its valid labels.
  void check_invariants() const {
    if (labels.empty()) throw DataError("dataset has an empty label set");
    for (const auto& r : rows) {
      if (r.valid_labels.empty()) throw DataError("row '" + r.pmid + "' is valid for no label");
      if (!std::includes(r.valid_labels.begin(), r.valid_labels.end(), r.positive_labels.begin(), r.positive_labels.end())) {
        throw DataError("row '" + r.pmid + "' has a positive label it is not valid for");
      }
    }
  }

  nlohmann::ordered_json manifest() const {
    nlohmann::ordered_json m;
    m["year"] = year;
    m["labels"] = labels;
    m["source"] = source;
    m["rows"] = rows.size();
    nlohmann::ordered_json ucs = nlohmann::ordered_json::array();
    for (const auto& uc : use_cases) ucs.push_back(to_json(uc));
    m["use_cases"] = std::move(ucs);
    m["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
    m["balance_n"] = balance_n ? nlohmann::ordered_json(*balance_n) : nlohmann::ordered_json(nullptr);
    if (thresholds) {
      m["thresholds"] = {{"test_positive_min", thresholds->test_positive_min},
                         {"dev_min", thresholds->dev_min},
                         {"dev_max", thresholds->dev_max},
                         {"dev_positive_min", thresholds->dev_positive_min}};
    } else {
      m["thresholds"] = nullptr;
    }
    return m;
  }

  /// Writes dataset.jsonl and manifest.json into `dir`.
  void save(const std::filesystem::path& dir) const {
    check_invariants();
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "dataset.jsonl", std::ios::binary);
    for (const auto& r : rows) {
      out << nlohmann::ordered_json{{"pmid", r.pmid},
                                    {"text", r.text},
                                    {"positive_labels", r.positive_labels},
                                    {"valid_labels", r.valid_labels}}
                 .dump()
          << '\n';
    }
    std::ofstream man(dir / "manifest.json", std::ios::binary);
    man << manifest().dump(2) << '\n';
  }

  static LabeledDataset load(const std::filesystem::path& dir) {
    LabeledDataset ds;
    std::ifstream man(dir / "manifest.json");
    if (!man) throw DataError("missing dataset manifest in " + dir.string());
    try {
      auto m = nlohmann::json::parse(man);
      ds.year = m.at("year").get<int>();
      ds.labels = m.at("labels").get<std::vector<std::string>>();
      ds.source = m.at("source").get<std::string>();
      for (const auto& uc : m.at("use_cases")) ds.use_cases.push_back(use_case_from_json(uc));
      if (!m.at("seed").is_null()) ds.seed = m.at("seed").get<std::uint64_t>();
      if (m.contains("balance_n") && !m.at("balance_n").is_null()) ds.balance_n = m.at("balance_n").get<double>();
      if (m.contains("thresholds") && !m.at("thresholds").is_null()) {
        const auto& t = m.at("thresholds");
        ds.thresholds = SelectionThresholds{t.at("test_positive_min").get<std::size_t>(), t.at("dev_min").get<std::size_t>(),
                                            t.at("dev_max").get<std::size_t>(),
                                            t.at("dev_positive_min").get<std::size_t>()};
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed dataset manifest in " + dir.string() + ": " + e.what());
    }
    std::ifstream in(dir / "dataset.jsonl");
    if (!in) throw DataError("missing dataset.jsonl in " + dir.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto j = nlohmann::json::parse(line);
        LabeledRow r{j.at("pmid").get<std::string>(), j.at("text").get<std::string>(),
                     j.at("positive_labels").get<std::vector<std::string>>(),
                     j.at("valid_labels").get<std::vector<std::string>>()};
        detail::sort_unique(r.positive_labels);
        detail::sort_unique(r.valid_labels);
        ds.rows.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw DataError((dir / "dataset.jsonl").string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    std::sort(ds.rows.begin(), ds.rows.end(), [](const LabeledRow& a, const LabeledRow& b) { return pmid_less(a.pmid, b.pmid); });
    ds.check_invariants();
    return ds;
  }

  /// A copy with the same metadata and the given rows.
  LabeledDataset with_rows(std::vector<LabeledRow> new_rows) const {
    LabeledDataset out = *this;
    out.rows = std::move(new_rows);
    return out;
  }
};

/// pmid -> weak positive labels.
using WeakLabels = std::map<std::string, std::vector<std::string>, PmidLess>;

namespace detail {

inline int common_year(const std::vector<UseCase>& use_cases) {
  if (use_cases.empty()) throw std::invalid_argument("no use cases");
  const int y = use_cases.front().year;
  for (const auto& uc : use_cases) {
    if (uc.year != y) throw std::invalid_argument("use cases span several years");
  }
  return y;
}

/// Rows for documents satisfying `pred` that are valid for at least one use
/// case; `positives` fills positive_labels (intersected with validity).
template <typename YearPred, typename Positives>
LabeledDataset assemble(const std::vector<UseCase>& use_cases, const Corpus& corpus, const Thesaurus& thesaurus,
                        YearPred pred, Positives&& positives) {
  LabeledDataset ds;
  ds.year = common_year(use_cases);
  ds.use_cases = use_cases;
  std::map<const Document*, std::vector<std::string>> valid;
  for (const auto& uc : use_cases) {
    ds.labels.push_back(uc.fine_ui);
    for (const Document* doc : corpus.query(uc.host_ui, thesaurus, pred)) valid[doc].push_back(uc.fine_ui);
  }
  sort_unique(ds.labels);
  for (auto& [doc, labels] : valid) {
    sort_unique(labels);
    std::vector<std::string> pos = positives(*doc);
    sort_unique(pos);
    std::vector<std::string> kept;
    std::set_intersection(pos.begin(), pos.end(), labels.begin(), labels.end(), std::back_inserter(kept));
    ds.rows.push_back(LabeledRow{doc->pmid, doc->text(), std::move(kept), std::move(labels)});
  }
  std::sort(ds.rows.begin(), ds.rows.end(), [](const LabeledRow& a, const LabeledRow& b) { return pmid_less(a.pmid, b.pmid); });
  if (ds.rows.empty()) throw DataError("no qualifying documents for year " + std::to_string(ds.year));
  return ds;
}

}  // namespace detail

/// Development set: documents before the promotion year valid for any host,
/// labeled with the weak labels of `source`.
inline LabeledDataset build_dev(const std::vector<UseCase>& use_cases, const Corpus& corpus, const Thesaurus& thesaurus,
                                const WeakLabels& weak, const std::string& source) {
  const int y = detail::common_year(use_cases);
  auto ds = detail::assemble(use_cases, corpus, thesaurus, before_year(y), [&](const Document& doc) {
    auto it = weak.find(doc.pmid);
    return it == weak.end() ? std::vector<std::string>{} : it->second;
  });
  ds.source = source;
  return ds;
}

/// Test set: documents from the promotion year on, valid for any host,
/// labeled with their manual annotation of the new descriptors.
inline LabeledDataset build_test(const std::vector<UseCase>& use_cases, const Corpus& corpus, const Thesaurus& thesaurus) {
  const int y = detail::common_year(use_cases);
  auto ds = detail::assemble(use_cases, corpus, thesaurus, from_year(y), [&](const Document& doc) {
    const auto closure = thesaurus.annotation_closure(doc.descriptor_uis);
    std::vector<std::string> pos;
    for (const auto& uc : use_cases) {
      auto fine = thesaurus.find(uc.fine_ui);
      if (fine && std::binary_search(closure.begin(), closure.end(), *fine)) pos.push_back(uc.fine_ui);
    }
    return pos;
  });
  ds.source = "ground_truth";
  return ds;
}

struct SplitPair {
  LabeledDataset train;
  LabeledDataset val;
  std::uint64_t seed = 0;
};

/// Uniform random 90-10 partition by document; validation size is
/// round(n / 10).
inline SplitPair split_90_10(const LabeledDataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.rows.size();
  if (n < 10) throw std::invalid_argument("dataset too small to split (" + std::to_string(n) + " rows, need 10)");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 10.0));
  std::vector<char> in_val(n, 0);
  for (std::size_t i = 0; i < n_val; ++i) in_val[order[i]] = 1;
  std::vector<LabeledRow> train, val;
  for (std::size_t i = 0; i < n; ++i) (in_val[i] ? val : train).push_back(dataset.rows[i]);
  SplitPair out{dataset.with_rows(std::move(train)), dataset.with_rows(std::move(val)), seed};
  out.train.seed = seed;
  out.val.seed = seed;
  return out;
}

struct BalanceConfig {
  double balance_n = 10.0;
  std::uint64_t seed = 0;
};

struct UndersampleResult {
  LabeledDataset dataset;
  std::size_t negatives = 0;  // negative instances in the input
  std::size_t checked = 0;
  std::vector<std::string> removed;  // pmids, in removal order
  bool all_checked() const { return checked == negatives; }
};

/// Per-label counts used by undersampling: positives, and valid rows that are
/// not positive for the label.
struct LabelBalance {
  std::size_t positives = 0;
  std::size_t valid_negatives = 0;
};

inline std::map<std::string, LabelBalance> label_balance(const LabeledDataset& ds) {
  std::map<std::string, LabelBalance> out;
  for (const auto& l : ds.labels) out[l];
  for (const auto& r : ds.rows) {
    for (const auto& l : r.valid_labels) {
      auto& b = out[l];
      if (r.is_positive_for(l)) {
        ++b.positives;
      } else {
        ++b.valid_negatives;
      }
    }
  }
  return out;
}

/// Validity-aware negative undersampling towards `balance_n` negatives per
/// positive for every label. Negative instances (no positive label) are
/// visited in seeded random order while some label is over the ratio; an
/// instance is kept if it is valid for any label at or under the ratio and
/// removed otherwise. Rows with a positive label are never removed.
inline UndersampleResult undersample(const LabeledDataset& dataset, const BalanceConfig& config) {
  if (!(config.balance_n >= 1.0)) throw std::invalid_argument("balance_n must be >= 1");
  const auto& labels = dataset.labels;
  const std::size_t L = labels.size();
  auto label_index = [&](const std::string& l) {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), l) - labels.begin());
  };

  std::vector<std::size_t> positives(L, 0), valid_negatives(L, 0);
  std::vector<std::vector<std::size_t>> row_labels(dataset.rows.size());
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
    const auto& r = dataset.rows[i];
    for (const auto& l : r.valid_labels) {
      const std::size_t li = label_index(l);
      if (li >= L || labels[li] != l) throw DataError("row '" + r.pmid + "' is valid for unknown label '" + l + "'");
      row_labels[i].push_back(li);
      if (r.is_positive_for(l)) {
        ++positives[li];
      } else {
        ++valid_negatives[li];
      }
    }
    if (r.is_negative()) negatives.push_back(i);
  }

  const double n = config.balance_n;
  auto over = [&](std::size_t li) {
    return static_cast<double>(valid_negatives[li]) > n * static_cast<double>(positives[li]);
  };
  std::size_t over_count = 0;
  for (std::size_t li = 0; li < L; ++li) over_count += over(li) ? 1 : 0;

  Rng rng(config.seed);
  rng.shuffle(negatives);  // drawing in this order = uniform draws without replacement

  UndersampleResult result;
  result.negatives = negatives.size();
  std::vector<char> removed(dataset.rows.size(), 0);
  for (std::size_t i : negatives) {
    if (over_count == 0) break;
    ++result.checked;
    bool necessary = false;
    for (std::size_t li : row_labels[i]) {
      if (!over(li)) {
        necessary = true;
        break;
      }
    }
    if (necessary) continue;
    removed[i] = 1;
    result.removed.push_back(dataset.rows[i].pmid);
    for (std::size_t li : row_labels[i]) {
      const bool was_over = over(li);
      --valid_negatives[li];
      if (was_over && !over(li)) --over_count;
    }
  }

  std::vector<LabeledRow> kept;
  kept.reserve(dataset.rows.size() - result.removed.size());
  for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
    if (!removed[i]) kept.push_back(dataset.rows[i]);
  }
  result.dataset = dataset.with_rows(std::move(kept));
  result.dataset.balance_n = config.balance_n;
  result.dataset.seed = config.seed;
  return result;
}

}  // namespace granum
