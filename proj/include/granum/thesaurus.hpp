#pragma once

// Versioned subject-heading thesaurus: descriptors, their concepts and terms,
// the parent/child hierarchy, and promotion provenance.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/error.hpp"
#include "granum/text.hpp"

namespace granum {

struct Concept {
  std::string cui;
  std::vector<std::string> terms;  // name first, then synonyms
  bool preferred = false;

  const std::string& name() const { return terms.front(); }
};

enum class Provenance { subdivision_1_2, other };

struct Descriptor {
  std::string ui;
  std::string name;
  std::vector<Concept> concepts;
  std::vector<std::string> parents;
  int year_introduced = 0;
  Provenance provenance = Provenance::other;
  std::optional<std::string> host_ui;
};

/// Thresholds of the data-availability criterion for use-case selection.
struct SelectionThresholds {
  std::size_t test_positive_min = 10;
  std::size_t dev_min = 10;
  std::size_t dev_max = 1'000'000;
  std::size_t dev_positive_min = 10;
};

/// A concept promoted to its own descriptor: concept c of host descriptor d
/// became descriptor d_c in year y.
struct UseCase {
  std::string concept_cui;
  std::string fine_ui;
  std::string host_ui;
  int year = 0;

  friend bool operator==(const UseCase&, const UseCase&) = default;
};

inline nlohmann::ordered_json to_json(const UseCase& uc) {
  return {{"concept_cui", uc.concept_cui}, {"fine_ui", uc.fine_ui}, {"host_ui", uc.host_ui}, {"year", uc.year}};
}

inline UseCase use_case_from_json(const nlohmann::json& j) {
  try {
    return UseCase{j.at("concept_cui").get<std::string>(), j.at("fine_ui").get<std::string>(),
                   j.at("host_ui").get<std::string>(), j.at("year").get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed use case: ") + e.what());
  }
}

/// Immutable after construction; all lookups are const and thread-safe.
class Thesaurus {
 public:
  Thesaurus() = default;

  /// Validates every descriptor/concept invariant and the acyclicity of the
  /// hierarchy. Throws DataError naming the offending ui.
  explicit Thesaurus(std::vector<Descriptor> descriptors) : descriptors_(std::move(descriptors)) {
    std::sort(descriptors_.begin(), descriptors_.end(),
              [](const Descriptor& a, const Descriptor& b) { return a.ui < b.ui; });
    validate_and_index();
  }

  static Thesaurus from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw DataError("thesaurus: top-level value must be an array of descriptors");
    std::vector<Descriptor> out;
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(parse_descriptor(doc[i], i));
    return Thesaurus(std::move(out));
  }

  static Thesaurus load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("thesaurus: cannot open " + path.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("thesaurus: parse error in " + path.string() + ": " + e.what());
    }
    return from_json(doc);
  }

  std::size_t size() const { return descriptors_.size(); }
  const std::vector<Descriptor>& descriptors() const { return descriptors_; }
  bool contains(const std::string& ui) const { return index_.count(ui) != 0; }

  std::size_t index_of(const std::string& ui) const {
    auto it = index_.find(ui);
    if (it == index_.end()) throw DataError("unknown descriptor ui '" + ui + "'");
    return it->second;
  }

  std::optional<std::size_t> find(const std::string& ui) const {
    auto it = index_.find(ui);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const Descriptor& at(const std::string& ui) const { return descriptors_[index_of(ui)]; }
  const Descriptor& at(std::size_t index) const { return descriptors_[index]; }

  bool is_leaf(const std::string& ui) const { return children_[index_of(ui)].empty(); }

  /// Transitive closure of child edges, excluding `ui`, sorted by ui.
  std::vector<std::string> descendants(const std::string& ui) const {
    std::vector<std::string> out;
    for (std::size_t i : descendant_indices(index_of(ui))) out.push_back(descriptors_[i].ui);
    return out;
  }

  /// Descriptor indices of all descendants, ascending (index order is ui order).
  std::vector<std::size_t> descendant_indices(std::size_t root) const {
    std::vector<char> seen(descriptors_.size(), 0);
    std::vector<std::size_t> stack(children_[root].begin(), children_[root].end());
    std::vector<std::size_t> out;
    while (!stack.empty()) {
      std::size_t i = stack.back();
      stack.pop_back();
      if (seen[i]) continue;
      seen[i] = 1;
      out.push_back(i);
      stack.insert(stack.end(), children_[i].begin(), children_[i].end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Ancestor indices of descriptor `index` (excluding itself), ascending.
  const std::vector<std::size_t>& ancestor_indices(std::size_t index) const { return ancestors_[index]; }

  const std::vector<std::size_t>& child_indices(std::size_t index) const { return children_[index]; }

  /// Indices of `uis` plus all their ancestors, ascending. Unknown uis are ignored.
  std::vector<std::size_t> annotation_closure(const std::vector<std::string>& uis) const {
    std::vector<std::size_t> out;
    for (const auto& ui : uis) {
      auto it = index_.find(ui);
      if (it == index_.end()) continue;
      out.push_back(it->second);
      const auto& anc = ancestors_[it->second];
      out.insert(out.end(), anc.begin(), anc.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  static Descriptor parse_descriptor(const nlohmann::json& j, std::size_t position) {
    Descriptor d;
    try {
      d.ui = j.at("ui").get<std::string>();
      d.name = text::nfc(j.at("name").get<std::string>());
      d.parents = j.at("parents").get<std::vector<std::string>>();
      d.year_introduced = j.at("year_introduced").get<int>();
      const auto prov = j.at("provenance_type").get<std::string>();
      if (prov == "subdivision_1_2") {
        d.provenance = Provenance::subdivision_1_2;
      } else if (prov == "other") {
        d.provenance = Provenance::other;
      } else {
        throw DataError("thesaurus: descriptor '" + d.ui + "' has unknown provenance_type '" + prov + "'");
      }
      const auto& host = j.at("host_ui");
      if (!host.is_null()) d.host_ui = host.get<std::string>();
      for (const auto& c : j.at("concepts")) {
        Concept concept_entry;
        concept_entry.cui = c.at("cui").get<std::string>();
        concept_entry.preferred = c.at("preferred").get<bool>();
        for (const auto& t : c.at("terms")) concept_entry.terms.push_back(text::nfc(t.get<std::string>()));
        d.concepts.push_back(std::move(concept_entry));
      }
    } catch (const nlohmann::json::exception& e) {
      std::string who = d.ui.empty() ? "#" + std::to_string(position) : "'" + d.ui + "'";
      throw DataError("thesaurus: malformed descriptor " + who + ": " + e.what());
    }
    return d;
  }

  void validate_and_index() {
    const std::size_t n = descriptors_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& d = descriptors_[i];
      if (d.ui.empty()) throw DataError("thesaurus: descriptor with empty ui");
      if (!index_.emplace(d.ui, i).second) throw DataError("thesaurus: duplicate descriptor ui '" + d.ui + "'");
    }
    children_.assign(n, {});
    parents_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      const auto& d = descriptors_[i];
      if (d.concepts.empty()) throw DataError("thesaurus: descriptor '" + d.ui + "' has zero concepts");
      std::unordered_set<std::string> cuis;
      std::size_t preferred = 0;
      for (const auto& c : d.concepts) {
        if (c.cui.empty()) throw DataError("thesaurus: descriptor '" + d.ui + "' has a concept with empty cui");
        if (!cuis.insert(c.cui).second) {
          throw DataError("thesaurus: descriptor '" + d.ui + "' repeats concept '" + c.cui + "'");
        }
        if (c.terms.empty() || c.terms.front().empty()) {
          throw DataError("thesaurus: concept '" + c.cui + "' of descriptor '" + d.ui + "' has no terms");
        }
        if (c.preferred) ++preferred;
      }
      if (preferred != 1) {
        throw DataError("thesaurus: descriptor '" + d.ui + "' must have exactly one preferred concept, has " +
                        std::to_string(preferred));
      }
      if (d.provenance == Provenance::subdivision_1_2 && !d.host_ui) {
        throw DataError("thesaurus: descriptor '" + d.ui + "' is subdivision_1_2 but has no host_ui");
      }
      if (d.host_ui && !index_.count(*d.host_ui)) {
        throw DataError("thesaurus: descriptor '" + d.ui + "' names unknown host '" + *d.host_ui + "'");
      }
      for (const auto& p : d.parents) {
        if (p == d.ui) throw DataError("thesaurus: cycle at descriptor '" + d.ui + "' (lists itself as parent)");
        auto it = index_.find(p);
        if (it == index_.end()) throw DataError("thesaurus: descriptor '" + d.ui + "' names unknown parent '" + p + "'");
        parents_[i].push_back(it->second);
        children_[it->second].push_back(i);
      }
    }
    for (auto& c : children_) {
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    for (auto& p : parents_) {
      std::sort(p.begin(), p.end());
      p.erase(std::unique(p.begin(), p.end()), p.end());
    }
    compute_ancestors();
  }

  // Kahn's algorithm from the roots; anything left over sits on a cycle.
  void compute_ancestors() {
    const std::size_t n = descriptors_.size();
    std::vector<std::size_t> pending(n);
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i) {
      pending[i] = parents_[i].size();
      if (pending[i] == 0) ready.push_back(i);
    }
    ancestors_.assign(n, {});
    std::size_t processed = 0;
    while (!ready.empty()) {
      std::size_t i = ready.back();
      ready.pop_back();
      ++processed;
      auto& anc = ancestors_[i];
      for (std::size_t p : parents_[i]) {
        anc.push_back(p);
        anc.insert(anc.end(), ancestors_[p].begin(), ancestors_[p].end());
      }
      std::sort(anc.begin(), anc.end());
      anc.erase(std::unique(anc.begin(), anc.end()), anc.end());
      for (std::size_t c : children_[i]) {
        if (--pending[c] == 0) ready.push_back(c);
      }
    }
    if (processed != n) {
      for (std::size_t i = 0; i < n; ++i) {
        if (pending[i] != 0) throw DataError("thesaurus: cycle in hierarchy through descriptor '" + descriptors_[i].ui + "'");
      }
    }
  }

  std::vector<Descriptor> descriptors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> ancestors_;
};

}  // namespace granum
