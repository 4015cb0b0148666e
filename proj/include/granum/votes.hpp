#pragma once

// Vote tables: the binary vote of every labeling function for every
// (document, fine label) pair the document is valid for.

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/corpus.hpp"
#include "granum/error.hpp"
#include "granum/labelers.hpp"
#include "granum/matcher.hpp"
#include "granum/parallel.hpp"
#include "granum/thesaurus.hpp"

namespace granum {

struct LabelVotes {
  std::string label;
  LfMask positives = 0;

  bool vote(Lf lf) const { return (positives & bit(lf)) != 0; }
  friend bool operator==(const LabelVotes&, const LabelVotes&) = default;
};

struct DocumentVotes {
  std::string pmid;
  std::vector<LabelVotes> labels;  // only labels the document is valid for, sorted

  friend bool operator==(const DocumentVotes&, const DocumentVotes&) = default;
};

class VoteTable {
 public:
  VoteTable() = default;

  VoteTable(std::vector<std::string> labels, std::vector<DocumentVotes> rows)
      : labels_(std::move(labels)), rows_(std::move(rows)) {
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
    std::sort(rows_.begin(), rows_.end(),
              [](const DocumentVotes& a, const DocumentVotes& b) { return pmid_less(a.pmid, b.pmid); });
    for (auto& r : rows_) {
      std::sort(r.labels.begin(), r.labels.end(),
                [](const LabelVotes& a, const LabelVotes& b) { return a.label < b.label; });
    }
  }

  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<DocumentVotes>& rows() const { return rows_; }

  /// TSV with columns pmid, label_ui, lf, value; one line per valid
  /// (document, label) pair and labeling function, in canonical order.
  void write_tsv(std::ostream& out, bool header = true) const {
    if (header) out << "pmid\tlabel_ui\tlf\tvalue\n";
    for (const auto& row : rows_) {
      for (const auto& lv : row.labels) {
        for (Lf lf : kAllLfs) {
          out << row.pmid << '\t' << lv.label << '\t' << to_string(lf) << '\t' << (lv.vote(lf) ? 1 : 0) << '\n';
        }
      }
    }
  }

  /// Compact per-document form: {"pmid": ..., "votes": {label: {lf: 0|1}}}.
  void write_jsonl(std::ostream& out) const {
    for (const auto& row : rows_) {
      nlohmann::ordered_json votes = nlohmann::ordered_json::object();
      for (const auto& lv : row.labels) {
        nlohmann::ordered_json per_lf = nlohmann::ordered_json::object();
        for (Lf lf : kAllLfs) per_lf[std::string(to_string(lf))] = lv.vote(lf) ? 1 : 0;
        votes[lv.label] = std::move(per_lf);
      }
      out << nlohmann::ordered_json{{"pmid", row.pmid}, {"votes", std::move(votes)}}.dump() << '\n';
    }
  }

  /// Reads the TSV form, with or without the header line. A (pmid, label)
  /// pair present in the file is valid; missing LF rows count as 0.
  static VoteTable read_tsv(std::istream& in, const std::string& source = "<votes>") {
    std::map<std::string, std::map<std::string, LfMask>, PmidLess> acc;
    std::vector<std::string> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line_no == 1 && line.rfind("pmid\t", 0) == 0) continue;
      std::istringstream fields(line);
      std::string pmid, label, lf_name, value;
      if (!std::getline(fields, pmid, '\t') || !std::getline(fields, label, '\t') || !std::getline(fields, lf_name, '\t') ||
          !std::getline(fields, value, '\t')) {
        throw DataError(source + ":" + std::to_string(line_no) + ": expected 4 tab-separated columns");
      }
      auto lf = parse_lf(lf_name);
      if (!lf) throw DataError(source + ":" + std::to_string(line_no) + ": unknown labeling function '" + lf_name + "'");
      if (value != "0" && value != "1") throw DataError(source + ":" + std::to_string(line_no) + ": value must be 0 or 1");
      LfMask& mask = acc[pmid][label];
      if (value == "1") mask |= bit(*lf);
      labels.push_back(label);
    }
    std::vector<DocumentVotes> rows;
    for (auto& [pmid, per_label] : acc) {
      DocumentVotes dv{pmid, {}};
      for (auto& [label, mask] : per_label) dv.labels.push_back(LabelVotes{label, mask});
      rows.push_back(std::move(dv));
    }
    return VoteTable(std::move(labels), std::move(rows));
  }

  static VoteTable read_jsonl(std::istream& in, const std::string& source = "<votes>") {
    std::vector<DocumentVotes> rows;
    std::vector<std::string> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto j = nlohmann::json::parse(line);
        DocumentVotes dv{j.at("pmid").get<std::string>(), {}};
        for (const auto& [label, per_lf] : j.at("votes").items()) {
          LfMask mask = 0;
          for (const auto& [name, v] : per_lf.items()) {
            auto lf = parse_lf(name);
            if (!lf) throw DataError("unknown labeling function '" + name + "'");
            if (v.get<int>() == 1) mask |= bit(*lf);
          }
          dv.labels.push_back(LabelVotes{label, mask});
          labels.push_back(label);
        }
        rows.push_back(std::move(dv));
      } catch (const nlohmann::json::exception& e) {
        throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return VoteTable(std::move(labels), std::move(rows));
  }

 private:
  std::vector<std::string> labels_;
  std::vector<DocumentVotes> rows_;
};

/// Dictionaries of all eight dictionary-based functions for every use case.
inline std::vector<Dictionary> build_all_dictionaries(const std::vector<UseCase>& use_cases, const Thesaurus& thesaurus) {
  std::vector<Dictionary> out;
  for (const auto& uc : use_cases) {
    for (Lf lf : kAllLfs) {
      if (lf != Lf::CO) out.push_back(build_dictionary(uc, thesaurus, lf));
    }
  }
  return out;
}

/// Applies all nine labeling functions to `docs`, keeping only the labels
/// each document is valid for (annotated with the host or a descendant of
/// it). Documents valid for no label are dropped. Output is independent of
/// `threads`.
inline VoteTable label_documents(const std::vector<const Document*>& docs, const std::vector<UseCase>& use_cases,
                                 const Thesaurus& thesaurus, const Matcher& matcher, unsigned threads = 1) {
  std::vector<std::string> labels;
  for (const auto& uc : use_cases) labels.push_back(uc.fine_ui);
  std::vector<DocumentVotes> rows(docs.size());
  const auto& matcher_labels = matcher.labels();

  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const Document& doc = *docs[i];
    const auto closure = thesaurus.annotation_closure(doc.descriptor_uis);
    DocumentVotes dv{doc.pmid, {}};
    for (const auto& uc : use_cases) {
      if (std::binary_search(closure.begin(), closure.end(), thesaurus.index_of(uc.host_ui))) {
        LfMask mask = std::binary_search(doc.occurrences.begin(), doc.occurrences.end(), uc.concept_cui) ? bit(Lf::CO) : 0;
        dv.labels.push_back(LabelVotes{uc.fine_ui, mask});
      }
    }
    if (dv.labels.empty()) return;
    std::sort(dv.labels.begin(), dv.labels.end(), [](const LabelVotes& a, const LabelVotes& b) { return a.label < b.label; });
    for (const auto& hit : matcher.match(doc)) {
      const auto& label = matcher_labels[hit.label];
      auto it = std::lower_bound(dv.labels.begin(), dv.labels.end(), label,
                                 [](const LabelVotes& lv, const std::string& l) { return lv.label < l; });
      if (it != dv.labels.end() && it->label == label) it->positives |= hit.lfs;
    }
    rows[i] = std::move(dv);
  });

  std::erase_if(rows, [](const DocumentVotes& r) { return r.labels.empty(); });
  return VoteTable(std::move(labels), std::move(rows));
}

}  // namespace granum
