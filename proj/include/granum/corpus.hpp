#pragma once

// Document corpus: JSONL ingestion, an on-disk store of sorted shards with
// sidecar indexes, descriptor queries with descendant expansion, and the
// per-descriptor counts used by use-case selection.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/error.hpp"
#include "granum/text.hpp"
#include "granum/thesaurus.hpp"

namespace granum {

/// Ascending pmid order: all-digit identifiers compare numerically and sort
/// before any other identifier; the rest compare bytewise.
struct PmidLess {
  static bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  }

  bool operator()(std::string_view a, std::string_view b) const {
    const bool da = all_digits(a);
    const bool db = all_digits(b);
    if (da != db) return da;
    if (da) {
      auto strip = [](std::string_view s) {
        std::size_t i = s.find_first_not_of('0');
        return i == std::string_view::npos ? std::string_view{} : s.substr(i);
      };
      auto sa = strip(a);
      auto sb = strip(b);
      if (sa.size() != sb.size()) return sa.size() < sb.size();
      if (sa != sb) return sa < sb;
    }
    return a < b;
  }
};

inline bool pmid_less(std::string_view a, std::string_view b) { return PmidLess{}(a, b); }

struct Document {
  std::string pmid;
  std::string title;
  std::string abstract;
  int year = 0;
  std::vector<std::string> descriptor_uis;  // sorted, unique
  std::vector<std::string> occurrences;     // sorted, unique

  std::string text() const { return title + "\n" + abstract; }
};

namespace detail {

inline void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace detail

inline Document document_from_json(const nlohmann::json& j) {
  Document d;
  if (!j.is_object()) throw DataError("document is not a JSON object");
  for (const char* field : {"pmid", "title", "abstract", "year", "descriptor_uis", "occurrences"}) {
    if (!j.contains(field)) throw DataError(std::string("missing field \"") + field + "\"");
  }
  try {
    d.pmid = j.at("pmid").get<std::string>();
    d.title = text::nfc(j.at("title").get<std::string>());
    d.abstract = text::nfc(j.at("abstract").get<std::string>());
    d.year = j.at("year").get<int>();
    d.descriptor_uis = j.at("descriptor_uis").get<std::vector<std::string>>();
    d.occurrences = j.at("occurrences").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad field type: ") + e.what());
  }
  if (d.pmid.empty()) throw DataError("empty pmid");
  if (d.year <= 0) throw DataError("year must be positive in document '" + d.pmid + "'");
  detail::sort_unique(d.descriptor_uis);
  detail::sort_unique(d.occurrences);
  return d;
}

inline nlohmann::ordered_json to_json(const Document& d) {
  return {{"pmid", d.pmid},         {"title", d.title},
          {"abstract", d.abstract}, {"year", d.year},
          {"descriptor_uis", d.descriptor_uis}, {"occurrences", d.occurrences}};
}

/// Year predicates for corpus queries.
inline auto before_year(int y) {
  return [y](int year) { return year < y; };
}
inline auto from_year(int y) {
  return [y](int year) { return year >= y; };
}
inline auto any_year() {
  return [](int) { return true; };
}

/// In-memory view of an ingested corpus. Immutable after construction and
/// safe for concurrent reads.
class Corpus {
 public:
  static constexpr std::size_t kShardSize = 50'000;

  Corpus() = default;

  explicit Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
    std::sort(docs_.begin(), docs_.end(), [](const Document& a, const Document& b) { return pmid_less(a.pmid, b.pmid); });
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      if (!by_pmid_.emplace(docs_[i].pmid, i).second) {
        throw DataError("duplicate pmid \"" + docs_[i].pmid + "\"");
      }
      for (const auto& ui : docs_[i].descriptor_uis) by_descriptor_[ui].push_back(i);
    }
  }

  /// Reads JSONL (one document per line, blank lines skipped). Errors report
  /// the 1-based line number.
  static Corpus read_jsonl(std::istream& in, const std::string& source = "<stream>") {
    std::vector<Document> docs;
    std::unordered_map<std::string, std::size_t> first_line;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      Document d;
      try {
        d = document_from_json(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        throw DataError(source + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
      } catch (const DataError& e) {
        throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
      }
      auto [it, fresh] = first_line.emplace(d.pmid, line_no);
      if (!fresh) {
        throw DataError(source + ":" + std::to_string(line_no) + ": duplicate pmid \"" + d.pmid +
                        "\" (first seen on line " + std::to_string(it->second) + ")");
      }
      docs.push_back(std::move(d));
    }
    return Corpus(std::move(docs));
  }

  static Corpus ingest(const std::filesystem::path& jsonl) {
    std::ifstream in(jsonl);
    if (!in) throw DataError("cannot open corpus file " + jsonl.string());
    return read_jsonl(in, jsonl.string());
  }

  /// Loads either a store directory (see save) or a JSONL file.
  static Corpus load(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) return open(path);
    return ingest(path);
  }

  /// Canonical JSONL export in ascending pmid order.
  void write_jsonl(std::ostream& out) const {
    for (const auto& d : docs_) out << to_json(d).dump() << '\n';
  }

  /// Persists the store: docs/shard-NNNNN.jsonl (sorted by pmid) plus
  /// index/descriptors.tsv (ui -> pmids) and index/years.tsv (year -> pmids).
  void save(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "docs");
    fs::create_directories(dir / "index");
    for (const auto& entry : fs::directory_iterator(dir / "docs")) fs::remove(entry.path());
    const std::size_t shards = docs_.empty() ? 0 : (docs_.size() + kShardSize - 1) / kShardSize;
    for (std::size_t s = 0; s < shards; ++s) {
      char name[32];
      std::snprintf(name, sizeof name, "shard-%05zu.jsonl", s);
      std::ofstream out(dir / "docs" / name, std::ios::binary);
      const std::size_t end = std::min(docs_.size(), (s + 1) * kShardSize);
      for (std::size_t i = s * kShardSize; i < end; ++i) out << to_json(docs_[i]).dump() << '\n';
    }
    {
      std::ofstream out(dir / "index" / "descriptors.tsv", std::ios::binary);
      std::map<std::string, const std::vector<std::size_t>*> sorted;
      for (const auto& [ui, idx] : by_descriptor_) sorted.emplace(ui, &idx);
      for (const auto& [ui, idx] : sorted) {
        out << ui;
        for (std::size_t i : *idx) out << '\t' << docs_[i].pmid;
        out << '\n';
      }
    }
    {
      std::ofstream out(dir / "index" / "years.tsv", std::ios::binary);
      std::map<int, std::vector<std::size_t>> years;
      for (std::size_t i = 0; i < docs_.size(); ++i) years[docs_[i].year].push_back(i);
      for (const auto& [year, idx] : years) {
        out << year;
        for (std::size_t i : idx) out << '\t' << docs_[i].pmid;
        out << '\n';
      }
    }
    std::ofstream meta(dir / "store.json", std::ios::binary);
    meta << nlohmann::ordered_json{{"format", "granum-corpus-store"}, {"documents", docs_.size()}, {"shards", shards}}.dump(2)
         << '\n';
  }

  static Corpus open(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir / "store.json")) throw DataError("not a corpus store: " + dir.string());
    std::vector<fs::path> shards;
    for (const auto& entry : fs::directory_iterator(dir / "docs")) shards.push_back(entry.path());
    std::sort(shards.begin(), shards.end());
    std::vector<Document> docs;
    for (const auto& shard : shards) {
      std::ifstream in(shard);
      Corpus part = read_jsonl(in, shard.string());
      for (auto& d : part.docs_) docs.push_back(std::move(d));
    }
    return Corpus(std::move(docs));
  }

  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const std::vector<Document>& documents() const { return docs_; }
  const Document& operator[](std::size_t i) const { return docs_[i]; }

  const Document* find(const std::string& pmid) const {
    auto it = by_pmid_.find(pmid);
    return it == by_pmid_.end() ? nullptr : &docs_[it->second];
  }

  /// Indices (ascending pmid) of documents annotated with `ui` exactly.
  const std::vector<std::size_t>& annotated_exactly(const std::string& ui) const {
    static const std::vector<std::size_t> none;
    auto it = by_descriptor_.find(ui);
    return it == by_descriptor_.end() ? none : it->second;
  }

  /// Documents annotated with `ui` or any of its descendants whose year
  /// satisfies `pred`, in ascending pmid order.
  template <typename YearPred>
  std::vector<const Document*> query(const std::string& ui, const Thesaurus& thesaurus, YearPred&& pred) const {
    std::vector<std::size_t> hits;
    auto collect = [&](const std::string& u) {
      for (std::size_t i : annotated_exactly(u)) {
        if (pred(docs_[i].year)) hits.push_back(i);
      }
    };
    collect(ui);
    for (std::size_t d : thesaurus.descendant_indices(thesaurus.index_of(ui))) collect(thesaurus.at(d).ui);
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    std::vector<const Document*> out;
    out.reserve(hits.size());
    for (std::size_t i : hits) out.push_back(&docs_[i]);
    return out;
  }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_pmid_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_descriptor_;
};

struct DescriptorCounts {
  std::size_t dev = 0;   // annotated documents with year < boundary
  std::size_t test = 0;  // annotated documents with year >= boundary
};

/// Per-descriptor article counts around a year boundary. "Annotated with d"
/// includes annotation with any descendant of d.
class CorpusStats {
 public:
  int year = 0;

  DescriptorCounts counts(const std::string& ui) const {
    auto it = counts_.find(ui);
    return it == counts_.end() ? DescriptorCounts{} : it->second;
  }

  /// Development documents annotated with `ui` whose occurrences contain `cui`.
  std::size_t dev_concept_positive(const std::string& ui, const std::string& cui) const {
    auto it = concept_positive_.find({ui, cui});
    return it == concept_positive_.end() ? 0 : it->second;
  }

  void set_counts(const std::string& ui, DescriptorCounts c) { counts_[ui] = c; }
  void set_concept_positive(const std::string& ui, const std::string& cui, std::size_t n) {
    concept_positive_[{ui, cui}] = n;
  }

  const std::map<std::string, DescriptorCounts>& all_counts() const { return counts_; }
  const std::map<std::pair<std::string, std::string>, std::size_t>& all_concept_positive() const {
    return concept_positive_;
  }

 private:
  std::map<std::string, DescriptorCounts> counts_;
  std::map<std::pair<std::string, std::string>, std::size_t> concept_positive_;
};

/// Counts for every descriptor, plus concept-positive development counts for
/// every (host, cui) pair where cui belongs to a descriptor promoted from host.
inline CorpusStats compute_stats(const Corpus& corpus, const Thesaurus& thesaurus, int year) {
  CorpusStats stats;
  stats.year = year;
  const std::size_t n = thesaurus.size();
  std::vector<DescriptorCounts> counts(n);

  // host index -> cuis of descriptors promoted out of it
  std::vector<std::vector<std::string>> tracked(n);
  for (const auto& d : thesaurus.descriptors()) {
    if (!d.host_ui) continue;
    auto& cuis = tracked[thesaurus.index_of(*d.host_ui)];
    for (const auto& c : d.concepts) cuis.push_back(c.cui);
  }
  for (auto& cuis : tracked) detail::sort_unique(cuis);
  std::map<std::pair<std::size_t, std::string>, std::size_t> positive;

  for (const auto& doc : corpus.documents()) {
    const bool dev = doc.year < year;
    for (std::size_t i : thesaurus.annotation_closure(doc.descriptor_uis)) {
      (dev ? counts[i].dev : counts[i].test) += 1;
      if (!dev) continue;
      for (const auto& cui : tracked[i]) {
        if (std::binary_search(doc.occurrences.begin(), doc.occurrences.end(), cui)) ++positive[{i, cui}];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i].dev || counts[i].test) stats.set_counts(thesaurus.at(i).ui, counts[i]);
    for (const auto& cui : tracked[i]) {
      auto it = positive.find({i, cui});
      stats.set_concept_positive(thesaurus.at(i).ui, cui, it == positive.end() ? 0 : it->second);
    }
  }
  return stats;
}

/// Candidates promoted in `year` that satisfy all selection criteria, sorted
/// by fine_ui:
///   1. provenance subdivision_1_2 introduced in `year`;
///   2. a single concept and a leaf of the hierarchy;
///   3. enough test positives for d_c and a bounded, concept-bearing
///      development set for the host.
inline std::vector<UseCase> select_use_cases(const Thesaurus& thesaurus, const CorpusStats& stats, int year,
                                             const SelectionThresholds& thresholds) {
  std::vector<UseCase> out;
  for (const auto& d : thesaurus.descriptors()) {
    if (d.provenance != Provenance::subdivision_1_2 || d.year_introduced != year) continue;
    if (d.concepts.size() != 1 || !thesaurus.is_leaf(d.ui)) continue;
    const auto& host = *d.host_ui;
    const auto& cui = d.concepts.front().cui;
    const auto fine_counts = stats.counts(d.ui);
    const auto host_counts = stats.counts(host);
    if (fine_counts.test < thresholds.test_positive_min) continue;
    if (host_counts.dev < thresholds.dev_min || host_counts.dev > thresholds.dev_max) continue;
    if (stats.dev_concept_positive(host, cui) < thresholds.dev_positive_min) continue;
    out.push_back(UseCase{cui, d.ui, host, year});
  }
  std::sort(out.begin(), out.end(), [](const UseCase& a, const UseCase& b) { return a.fine_ui < b.fine_ui; });
  return out;
}

}  // namespace granum
