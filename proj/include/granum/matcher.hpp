#pragma once

// Multi-pattern dictionary matcher. All dictionary elements of all labels are
// compiled into two Aho-Corasick automata (one for raw-text variants, one for
// lowercased variants) so each document field is scanned once per automaton.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "granum/labelers.hpp"
#include "granum/text.hpp"

namespace granum {

/// Byte-level Aho-Corasick automaton compiled to a dense DFA over the byte
/// classes that occur in the patterns.
class AhoCorasick {
 public:
  AhoCorasick() = default;

  /// Patterns must be non-empty and distinct; pattern ids are their positions.
  explicit AhoCorasick(const std::vector<std::string>& patterns) {
    lengths_.reserve(patterns.size());
    for (const auto& p : patterns) lengths_.push_back(static_cast<std::uint32_t>(p.size()));
    build(patterns);
  }

  std::size_t pattern_count() const { return lengths_.size(); }
  std::size_t state_count() const { return terminal_.size(); }
  std::uint32_t pattern_length(std::uint32_t id) const { return lengths_[id]; }

  /// Calls on_match(pattern_id, end_offset) for every occurrence, in order of
  /// end offset.
  template <typename OnMatch>
  void scan(std::string_view haystack, OnMatch&& on_match) const {
    if (lengths_.empty()) return;
    std::uint32_t state = 0;
    const std::uint32_t* delta = delta_.data();
    for (std::size_t i = 0; i < haystack.size(); ++i) {
      state = delta[state * width_ + byte_class_[static_cast<unsigned char>(haystack[i])]];
      std::uint32_t s = terminal_[state] != kNone ? state : output_link_[state];
      while (s != 0) {
        on_match(terminal_[s], i + 1);
        s = output_link_[s];
      }
    }
  }

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  void build(const std::vector<std::string>& patterns) {
    std::array<bool, 256> used{};
    for (const auto& p : patterns) {
      if (p.empty()) throw std::invalid_argument("empty pattern");
      for (unsigned char c : p) used[c] = true;
    }
    width_ = 1;
    byte_class_.fill(0);
    for (std::size_t b = 0; b < 256; ++b) {
      if (used[b]) byte_class_[b] = static_cast<std::uint16_t>(width_++);
    }

    // Trie with dense rows; kNone marks a missing edge until failure links fill it.
    delta_.assign(width_, kNone);
    terminal_.assign(1, kNone);
    for (std::uint32_t id = 0; id < patterns.size(); ++id) {
      std::uint32_t s = 0;
      for (unsigned char c : patterns[id]) {
        std::uint32_t& next = delta_[s * width_ + byte_class_[c]];
        if (next == kNone) {
          next = static_cast<std::uint32_t>(terminal_.size());
          terminal_.push_back(kNone);
          delta_.resize(delta_.size() + width_, kNone);
        }
        s = delta_[s * width_ + byte_class_[c]];
      }
      if (terminal_[s] != kNone) throw std::invalid_argument("duplicate pattern '" + patterns[id] + "'");
      terminal_[s] = id;
    }

    const std::size_t n = terminal_.size();
    std::vector<std::uint32_t> fail(n, 0);
    output_link_.assign(n, 0);
    std::vector<std::uint32_t> queue;
    queue.reserve(n);
    for (std::uint32_t c = 0; c < width_; ++c) {
      std::uint32_t& next = delta_[c];
      if (next == kNone) {
        next = 0;
      } else {
        fail[next] = 0;
        queue.push_back(next);
      }
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::uint32_t s = queue[head];
      const std::uint32_t f = fail[s];
      output_link_[s] = terminal_[f] != kNone ? f : output_link_[f];
      for (std::uint32_t c = 0; c < width_; ++c) {
        std::uint32_t& next = delta_[s * width_ + c];
        if (next == kNone) {
          next = delta_[f * width_ + c];
        } else {
          fail[next] = delta_[f * width_ + c];
          queue.push_back(next);
        }
      }
    }
  }

  std::array<std::uint16_t, 256> byte_class_{};
  std::uint32_t width_ = 1;
  std::vector<std::uint32_t> delta_;
  std::vector<std::uint32_t> terminal_;     // pattern id ending at state, or kNone
  std::vector<std::uint32_t> output_link_;  // nearest proper-suffix state that is terminal (0 = none)
  std::vector<std::uint32_t> lengths_;
};

/// Positive labeling functions of one label for one document.
struct LabelHits {
  std::uint32_t label = 0;  // index into Matcher::labels()
  LfMask lfs = 0;

  friend bool operator==(const LabelHits&, const LabelHits&) = default;
};

/// Immutable after construction; match() may be called concurrently.
class Matcher {
 public:
  explicit Matcher(const std::vector<Dictionary>& dictionaries) {
    for (const auto& d : dictionaries) labels_.push_back(d.label);
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());

    std::map<std::string, std::vector<Key>> raw;
    std::map<std::string, std::vector<Key>> folded;
    for (const auto& d : dictionaries) {
      if (d.lf == Lf::CO) throw std::invalid_argument("CO has no dictionary");
      const auto label = static_cast<std::uint32_t>(
          std::lower_bound(labels_.begin(), labels_.end(), d.label) - labels_.begin());
      auto& table = matches_raw_text(d.lf) ? raw : folded;
      for (const auto& e : d.elements) {
        if (!e.empty()) table[e].push_back(Key{label, d.lf});
      }
    }
    if (raw.empty() && folded.empty()) throw std::invalid_argument("matcher: empty pattern set");
    raw_ = Side(raw);
    folded_ = Side(folded);
  }

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t pattern_count() const { return raw_.automaton.pattern_count() + folded_.automaton.pattern_count(); }

  /// Dictionary hits over title and abstract (each scanned separately),
  /// sorted by label index.
  std::vector<LabelHits> match(std::string_view title, std::string_view abstract) const {
    std::vector<LabelHits> hits;
    for (std::string_view field : {title, abstract}) {
      raw_.collect(field, hits);
      if (folded_.automaton.pattern_count() != 0) {
        const std::string lowered = text::fold_case(field);
        folded_.collect(lowered, hits);
      }
    }
    std::sort(hits.begin(), hits.end(), [](const LabelHits& a, const LabelHits& b) { return a.label < b.label; });
    std::vector<LabelHits> merged;
    for (const auto& h : hits) {
      if (!merged.empty() && merged.back().label == h.label) {
        merged.back().lfs |= h.lfs;
      } else {
        merged.push_back(h);
      }
    }
    return merged;
  }

  std::vector<LabelHits> match(const Document& doc) const { return match(doc.title, doc.abstract); }

 private:
  struct Key {
    std::uint32_t label;
    Lf lf;
  };

  struct Side {
    Side() = default;
    explicit Side(const std::map<std::string, std::vector<Key>>& table) {
      std::vector<std::string> patterns;
      offsets.push_back(0);
      for (const auto& [pattern, keys] : table) {
        patterns.push_back(pattern);
        keys_flat.insert(keys_flat.end(), keys.begin(), keys.end());
        offsets.push_back(static_cast<std::uint32_t>(keys_flat.size()));
      }
      automaton = AhoCorasick(patterns);
    }

    void collect(std::string_view haystack, std::vector<LabelHits>& out) const {
      automaton.scan(haystack, [&](std::uint32_t id, std::size_t end) {
        const std::size_t begin = end - automaton.pattern_length(id);
        if (!text::is_delimited(haystack, begin, end)) return;
        for (std::uint32_t k = offsets[id]; k < offsets[id + 1]; ++k) {
          out.push_back(LabelHits{keys_flat[k].label, bit(keys_flat[k].lf)});
        }
      });
    }

    AhoCorasick automaton;
    std::vector<Key> keys_flat;
    std::vector<std::uint32_t> offsets;
  };

  std::vector<std::string> labels_;
  Side raw_;
  Side folded_;
};

}  // namespace granum
