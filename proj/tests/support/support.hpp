#pragma once

// Generators and reference implementations shared by the unit and
// acceptance suites. The references are written from the definitions and do
// not call the code they check.

#include <unicode/uchar.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <sstream>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/corpus.hpp"
#include "granum/datasets.hpp"
#include "granum/ensembles.hpp"
#include "granum/eval.hpp"
#include "granum/labelers.hpp"
#include "granum/rng.hpp"
#include "granum/text.hpp"
#include "granum/thesaurus.hpp"

namespace support {

using granum::Rng;

// ---------------------------------------------------------------- matching

/// Code points of a UTF-8 string with their byte offsets.
inline std::vector<std::pair<std::size_t, char32_t>> decode(const std::string& s) {
  std::vector<std::pair<std::size_t, char32_t>> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 6 ? 2 : (c >> 4) == 14 ? 3 : 4;
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1f) : len == 3 ? (c & 0x0f) : (c & 0x07);
    for (std::size_t k = 1; k < len && i + k < s.size(); ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3f);
    out.emplace_back(i, cp);
    i += len;
  }
  return out;
}

/// Whether `needle` occurs in `hay` with a non-alphanumeric code point (or
/// the string edge) on both sides.
inline bool naive_delimited(const std::string& hay, const std::string& needle) {
  if (needle.empty()) return false;
  const auto cps = decode(hay);
  std::map<std::size_t, std::size_t> at;  // byte offset -> index
  for (std::size_t i = 0; i < cps.size(); ++i) at[cps[i].first] = i;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const std::size_t b = cps[i].first;
    if (hay.compare(b, needle.size(), needle) != 0) continue;
    const std::size_t e = b + needle.size();
    if (e != hay.size() && !at.count(e)) continue;
    const bool left = i == 0 || !u_isalnum(static_cast<UChar32>(cps[i - 1].second));
    const bool right = e == hay.size() || !u_isalnum(static_cast<UChar32>(cps[at[e]].second));
    if (left && right) return true;
  }
  return false;
}

using VoteKey = std::tuple<std::string, std::string, granum::Lf>;

/// (pmid, label, lf) triples with a positive dictionary vote.
inline std::set<VoteKey> naive_dictionary_votes(const std::vector<const granum::Document*>& docs,
                                                const std::vector<granum::Dictionary>& dicts) {
  std::set<VoteKey> out;
  for (const auto* doc : docs) {
    const std::string title_f = granum::text::fold_case(doc->title);
    const std::string abstract_f = granum::text::fold_case(doc->abstract);
    for (const auto& d : dicts) {
      const bool raw = d.lf == granum::Lf::NE || d.lf == granum::Lf::SE;
      const std::string& t = raw ? doc->title : title_f;
      const std::string& a = raw ? doc->abstract : abstract_f;
      for (const auto& e : d.elements) {
        if (naive_delimited(t, e) || naive_delimited(a, e)) {
          out.emplace(doc->pmid, d.label, d.lf);
          break;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------- synthetic data

struct TermSet {
  std::string name;
  std::vector<std::string> synonyms;
};

inline const std::vector<TermSet>& term_sets() {
  static const std::vector<TermSet> sets = {
      {"Niemann-Pick Disease, Type A", {"Sphingomyelin Lipidosis", "NPD (Type-A)"}},
      {"Crohn's Disease", {"Regional Ileitis", "Granulomatous Enteritis"}},
      {"Müller-Lyer Illusion", {"ÉTUDE Syndrome", "Arrow/Fin Effect"}},
      {"Type 2 Diabetes", {"Adult-Onset Diabetes", "T2D"}},
      {"Tension-Type Headache", {"Stress Headache", "Straße Pain"}},
      {"Atrial Flutter", {"Auricular Flutter", "AFL"}},
  };
  return sets;
}

struct Generated {
  granum::Thesaurus thesaurus;
  granum::Corpus corpus;
  std::vector<granum::UseCase> use_cases;
};

/// A thesaurus with one promotion per term set (host H<i>, fine F<i>, year
/// 2010) and `n_docs` documents mixing surface variants of the terms.
inline Generated generated_corpus(std::uint64_t seed, std::size_t n_docs) {
  Rng rng(seed);
  const auto& sets = term_sets();
  nlohmann::json th = nlohmann::json::array();
  th.push_back({{"ui", "R"}, {"name", "Root"}, {"parents", nlohmann::json::array()}, {"year_introduced", 1990},
                {"provenance_type", "other"}, {"host_ui", nullptr},
                {"concepts", {{{"cui", "CR"}, {"preferred", true}, {"terms", {"Root"}}}}}});
  std::vector<granum::UseCase> ucs;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const std::string h = "H" + std::to_string(i), f = "F" + std::to_string(i), cui = "C" + std::to_string(i);
    th.push_back({{"ui", h}, {"name", "Host " + h}, {"parents", {"R"}}, {"year_introduced", 1990},
                  {"provenance_type", "other"}, {"host_ui", nullptr},
                  {"concepts", {{{"cui", "CH" + std::to_string(i)}, {"preferred", true}, {"terms", {"Host " + h}}}}}});
    std::vector<std::string> terms{sets[i].name};
    terms.insert(terms.end(), sets[i].synonyms.begin(), sets[i].synonyms.end());
    th.push_back({{"ui", f}, {"name", sets[i].name}, {"parents", {h}}, {"year_introduced", 2010},
                  {"provenance_type", "subdivision_1_2"}, {"host_ui", h},
                  {"concepts", {{{"cui", cui}, {"preferred", true}, {"terms", terms}}}}});
    ucs.push_back(granum::UseCase{cui, f, h, 2010});
  }
  auto thesaurus = granum::Thesaurus::from_json(th);

  static const std::vector<std::string> filler = {"the", "a", "type", "typical", "disease", "of", "pick", "picked",
                                                  "ATRIAL", "syndrome", "in", "was", "observed", "and", "2", "t2d",
                                                  "café", "STRASSE", "lyer", "Ileitis"};
  auto variant = [&](const std::string& term) -> std::string {
    switch (rng.below(8)) {
      case 0: return term;
      case 1: return granum::text::fold_case(term);
      case 2: {
        std::string up = term;
        for (auto& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        return up;
      }
      case 3: return granum::text::strip_punctuation(term);
      case 4: return "x" + term;  // glued on the left: no boundary
      case 5: return term + ".";
      case 6: {
        auto toks = granum::text::split_whitespace(granum::text::strip_punctuation(granum::text::fold_case(term)));
        return toks.empty() ? term : toks[rng.below(toks.size())];
      }
      default: return "(" + term + ")";
    }
  };
  auto sentence = [&]() {
    std::string s;
    const std::size_t words = 4 + rng.below(12);
    for (std::size_t w = 0; w < words; ++w) {
      if (!s.empty()) s += rng.bernoulli(0.1) ? ", " : " ";
      if (rng.bernoulli(0.15)) {
        const auto& set = sets[rng.below(sets.size())];
        const std::size_t k = rng.below(set.synonyms.size() + 1);
        s += variant(k == 0 ? set.name : set.synonyms[k - 1]);
      } else {
        s += filler[rng.below(filler.size())];
      }
    }
    return s;
  };

  std::string jsonl;
  for (std::size_t n = 0; n < n_docs; ++n) {
    nlohmann::json uis = nlohmann::json::array(), occ = nlohmann::json::array();
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (rng.bernoulli(0.4)) uis.push_back(rng.bernoulli(0.3) ? "F" + std::to_string(i) : "H" + std::to_string(i));
      if (rng.bernoulli(0.2)) occ.push_back("C" + std::to_string(i));
    }
    if (uis.empty()) uis.push_back("R");
    nlohmann::json d{{"pmid", std::to_string(1000 + n)}, {"title", sentence()}, {"abstract", sentence() + ". " + sentence()},
                     {"year", 2005 + static_cast<int>(rng.below(10))}, {"descriptor_uis", uis}, {"occurrences", occ}};
    jsonl += d.dump() + "\n";
  }
  std::istringstream in(jsonl);
  return Generated{std::move(thesaurus), granum::Corpus::read_jsonl(in, "generated"), std::move(ucs)};
}

inline std::string random_string(Rng& rng, const std::string& alphabet, std::size_t min_len, std::size_t max_len) {
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
  return s;
}

struct RandomMatrix {
  std::vector<granum::Lf> columns;
  std::vector<granum::RowKey> rows;
  std::vector<std::uint8_t> cells;  // row-major
};

/// Random votes: up to `max_cols` distinct LFs, `rows` rows over a few labels.
inline RandomMatrix random_matrix(Rng& rng, std::size_t min_cols, std::size_t max_cols, std::size_t rows) {
  RandomMatrix m;
  std::vector<granum::Lf> all(granum::kAllLfs.begin(), granum::kAllLfs.end());
  rng.shuffle(all);
  const std::size_t cols = min_cols + rng.below(max_cols - min_cols + 1);
  m.columns.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cols));
  std::sort(m.columns.begin(), m.columns.end());
  const double density = 0.1 + 0.8 * rng.uniform();
  for (std::size_t r = 0; r < rows; ++r) {
    m.rows.push_back(granum::RowKey{std::to_string(r / 3), "L" + std::to_string(r % 3)});
    for (std::size_t c = 0; c < cols; ++c) m.cells.push_back(rng.bernoulli(density) ? 1 : 0);
  }
  return m;
}

inline granum::VoteMatrix to_matrix(const RandomMatrix& m) { return granum::VoteMatrix(m.columns, m.rows, m.cells); }

inline std::set<std::pair<std::string, std::string>> positive_set(const granum::EnhancedLabels& e) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& k : e.positives) out.emplace(k.pmid, k.label);
  return out;
}

/// A random multi-label dataset: every row valid for at least one label.
inline granum::LabeledDataset random_dataset(Rng& rng, std::size_t n_labels, std::size_t n_rows, double p_valid,
                                             double p_positive) {
  granum::LabeledDataset ds;
  ds.year = 2010;
  ds.source = "weak_CO";
  for (std::size_t l = 0; l < n_labels; ++l) ds.labels.push_back("L" + std::to_string(l));
  for (std::size_t r = 0; r < n_rows; ++r) {
    granum::LabeledRow row;
    row.pmid = std::to_string(r + 1);
    row.text = "doc " + row.pmid;
    for (const auto& l : ds.labels) {
      if (rng.bernoulli(p_valid)) {
        row.valid_labels.push_back(l);
        if (rng.bernoulli(p_positive)) row.positive_labels.push_back(l);
      }
    }
    if (row.valid_labels.empty()) row.valid_labels.push_back(ds.labels[rng.below(ds.labels.size())]);
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

// --------------------------------------------------------------- metrics

struct NaiveScores {
  double maP = 0, maR = 0, maF1 = 0, maF1_var = 0, miP = 0, miR = 0, miF1 = 0, example_f1 = 0;
};

/// Metrics computed straight from the definitions, with validity filtering.
inline NaiveScores naive_score(const granum::Predictions& pred, const granum::LabeledDataset& ds) {
  auto has = [](const std::vector<std::string>& v, const std::string& x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  auto ratio = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  NaiveScores s;
  double TP = 0, FP = 0, FN = 0;
  std::vector<double> f1s;
  for (const auto& l : ds.labels) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& r : ds.rows) {
      if (!has(r.valid_labels, l)) continue;
      auto it = pred.find(r.pmid);
      const bool z = it != pred.end() && has(it->second, l);
      const bool y = has(r.positive_labels, l);
      tp += z && y;
      fp += z && !y;
      fn += !z && y;
    }
    const double p = ratio(tp, tp + fp), rc = ratio(tp, tp + fn);
    const double f = ratio(2 * p * rc, p + rc);
    s.maP += p;
    s.maR += rc;
    s.maF1 += f;
    f1s.push_back(f);
    TP += tp, FP += fp, FN += fn;
  }
  const double L = static_cast<double>(ds.labels.size());
  s.maP /= L, s.maR /= L, s.maF1 /= L;
  for (double f : f1s) s.maF1_var += (f - s.maF1) * (f - s.maF1) / L;
  s.miP = ratio(TP, TP + FP);
  s.miR = ratio(TP, TP + FN);
  s.miF1 = ratio(2 * s.miP * s.miR, s.miP + s.miR);
  double ex = 0, docs = 0;
  for (const auto& r : ds.rows) {
    auto it = pred.find(r.pmid);
    std::set<std::string> Y(r.positive_labels.begin(), r.positive_labels.end()), Z;
    if (it != pred.end()) {
      for (const auto& l : it->second) {
        if (has(r.valid_labels, l)) Z.insert(l);
      }
    }
    if (Y.empty() && Z.empty()) continue;
    double both = 0;
    for (const auto& l : Y) both += Z.count(l);
    ex += 2 * both / static_cast<double>(Y.size() + Z.size());
    docs += 1;
  }
  s.example_f1 = docs == 0 ? 0 : ex / docs;
  return s;
}

}  // namespace support
