#pragma once

// The nine labeling functions: concept occurrence (CO) plus eight dictionary
// variants built from the name and synonyms of the promoted concept.
//
//   NE / SE    name / synonyms verbatim, matched against raw text
//   NL / SL    lowercased
//   NNP / SNP  lowercased, punctuation replaced by spaces
//   NT / ST    single tokens of the NNP / SNP elements
//
// Every variant except NE/SE is matched against lowercased text. A dictionary
// element matches when it occurs with non-alphanumeric characters (or the
// text ends) on both sides.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "granum/corpus.hpp"
#include "granum/text.hpp"
#include "granum/thesaurus.hpp"

namespace granum {

enum class Lf : std::uint8_t { CO, NE, SE, NL, SL, NNP, SNP, NT, ST };

inline constexpr std::array<Lf, 9> kAllLfs = {Lf::CO, Lf::NE, Lf::SE, Lf::NL, Lf::SL, Lf::NNP, Lf::SNP, Lf::NT, Lf::ST};

inline constexpr std::string_view to_string(Lf lf) {
  constexpr std::array<std::string_view, 9> names = {"CO", "NE", "SE", "NL", "SL", "NNP", "SNP", "NT", "ST"};
  return names[static_cast<std::size_t>(lf)];
}

inline std::optional<Lf> parse_lf(std::string_view s) {
  for (Lf lf : kAllLfs) {
    if (to_string(lf) == s) return lf;
  }
  return std::nullopt;
}

/// Parses a comma-separated list such as "CO,NL,SL" into canonical order.
inline std::vector<Lf> parse_lf_list(std::string_view s) {
  std::vector<Lf> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = s.substr(start, comma - start);
    auto lf = parse_lf(item);
    if (!lf) throw std::invalid_argument("unknown labeling function '" + std::string(item) + "'");
    out.push_back(*lf);
    start = comma + 1;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::string join_lfs(const std::vector<Lf>& lfs, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < lfs.size(); ++i) {
    if (i) out += sep;
    out += to_string(lfs[i]);
  }
  return out;
}

/// Raw-text variants; all others match lowercased text.
inline constexpr bool matches_raw_text(Lf lf) { return lf == Lf::NE || lf == Lf::SE; }

/// Bit set over the nine labeling functions.
using LfMask = std::uint16_t;
inline constexpr LfMask bit(Lf lf) { return static_cast<LfMask>(1u << static_cast<unsigned>(lf)); }

struct Dictionary {
  std::string label;  // fine_ui
  Lf lf = Lf::NE;
  std::vector<std::string> elements;
};

namespace detail {

inline void push_unique(std::vector<std::string>& out, std::unordered_set<std::string>& seen, std::string s) {
  if (s.empty()) return;
  if (seen.insert(s).second) out.push_back(std::move(s));
}

}  // namespace detail

/// Builds the dictionary of `lf` for the single concept of `use_case.fine_ui`.
/// Elements keep first-occurrence order with duplicates removed.
inline Dictionary build_dictionary(const UseCase& use_case, const Thesaurus& thesaurus, Lf lf) {
  if (lf == Lf::CO) throw std::invalid_argument("CO is not dictionary-based");
  const Descriptor& fine = thesaurus.at(use_case.fine_ui);
  if (fine.concepts.size() != 1) {
    throw std::invalid_argument("descriptor '" + fine.ui + "' does not have exactly one concept");
  }
  const Concept& c = fine.concepts.front();
  const bool name_only = lf == Lf::NE || lf == Lf::NL || lf == Lf::NNP || lf == Lf::NT;

  std::vector<std::string> sources;
  if (name_only) {
    sources.push_back(c.name());
  } else {
    for (std::size_t i = 1; i < c.terms.size(); ++i) {
      if (c.terms[i] != c.name()) sources.push_back(c.terms[i]);
    }
  }

  Dictionary dict{use_case.fine_ui, lf, {}};
  std::unordered_set<std::string> seen;
  for (const auto& term : sources) {
    switch (lf) {
      case Lf::NE:
      case Lf::SE:
        detail::push_unique(dict.elements, seen, term);
        break;
      case Lf::NL:
      case Lf::SL:
        detail::push_unique(dict.elements, seen, text::fold_case(term));
        break;
      case Lf::NNP:
      case Lf::SNP:
        detail::push_unique(dict.elements, seen, text::strip_punctuation(text::fold_case(term)));
        break;
      case Lf::NT:
      case Lf::ST:
        for (auto& token : text::split_whitespace(text::strip_punctuation(text::fold_case(term)))) {
          detail::push_unique(dict.elements, seen, std::move(token));
        }
        break;
      case Lf::CO:
        break;
    }
  }
  return dict;
}

struct Vote {
  std::string pmid;
  std::string label;
  Lf lf = Lf::CO;
  bool value = false;
};

/// True if `element` occurs token-delimited anywhere in `haystack`.
inline bool contains_delimited(std::string_view haystack, std::string_view element) {
  if (element.empty()) return false;
  for (std::size_t pos = haystack.find(element); pos != std::string_view::npos; pos = haystack.find(element, pos + 1)) {
    if (text::is_delimited(haystack, pos, pos + element.size())) return true;
  }
  return false;
}

/// Dictionary labeling function by direct per-element scanning. Title and
/// abstract are matched independently. Output is in ascending pmid order.
inline std::vector<Vote> apply_lf(const std::vector<const Document*>& docs, const Dictionary& dict) {
  std::vector<Vote> votes;
  votes.reserve(docs.size());
  for (const Document* doc : docs) {
    bool hit = false;
    for (const std::string* field : {&doc->title, &doc->abstract}) {
      const std::string folded = matches_raw_text(dict.lf) ? std::string() : text::fold_case(*field);
      std::string_view haystack = matches_raw_text(dict.lf) ? std::string_view(*field) : std::string_view(folded);
      for (const auto& element : dict.elements) {
        if (contains_delimited(haystack, element)) {
          hit = true;
          break;
        }
      }
      if (hit) break;
    }
    votes.push_back(Vote{doc->pmid, dict.label, dict.lf, hit});
  }
  std::sort(votes.begin(), votes.end(), [](const Vote& a, const Vote& b) { return pmid_less(a.pmid, b.pmid); });
  return votes;
}

/// Concept occurrence: positive iff `cui` is among the document's
/// pre-extracted occurrences. Independent of title and abstract.
inline std::vector<Vote> apply_co(const std::vector<const Document*>& docs, const std::string& label,
                                  const std::string& cui) {
  std::vector<Vote> votes;
  votes.reserve(docs.size());
  for (const Document* doc : docs) {
    bool hit = std::binary_search(doc->occurrences.begin(), doc->occurrences.end(), cui);
    votes.push_back(Vote{doc->pmid, label, Lf::CO, hit});
  }
  std::sort(votes.begin(), votes.end(), [](const Vote& a, const Vote& b) { return pmid_less(a.pmid, b.pmid); });
  return votes;
}

}  // namespace granum
