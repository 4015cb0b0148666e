#pragma once

// Run configuration: a single JSON file, overridable field by field.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/ensembles.hpp"
#include "granum/error.hpp"
#include "granum/labelers.hpp"
#include "granum/lrtrainer.hpp"
#include "granum/thesaurus.hpp"

namespace granum {

struct RunConfig {
  std::filesystem::path thesaurus;
  std::filesystem::path corpus;
  int year_from = 0;
  int year_to = 0;  // inclusive
  SelectionThresholds thresholds;
  std::vector<Lf> lfs = {Lf::CO, Lf::NL, Lf::SL};
  Method method = Method::ALO;
  double balance_n = 10.0;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  std::vector<std::size_t> feature_grid = kDefaultFeatureGrid;
  std::vector<double> l2_grid = kDefaultL2Grid;
  std::filesystem::path out = "out";
  unsigned threads = 1;

  std::vector<int> years() const {
    std::vector<int> ys;
    for (int y = year_from; y <= year_to; ++y) ys.push_back(y);
    return ys;
  }

  /// Everything that affects outputs (threads and paths excluded), in a
  /// canonical form.
  nlohmann::ordered_json effective() const {
    std::vector<std::string> lf_names;
    for (Lf lf : lfs) lf_names.emplace_back(to_string(lf));
    return {{"years", {year_from, year_to}},
            {"thresholds",
             {{"test_positive_min", thresholds.test_positive_min},
              {"dev_min", thresholds.dev_min},
              {"dev_max", thresholds.dev_max},
              {"dev_positive_min", thresholds.dev_positive_min}}},
            {"lfs", lf_names},
            {"method", std::string(to_string(method))},
            {"balance_n", balance_n},
            {"seeds", seeds},
            {"feature_grid", feature_grid},
            {"l2_grid", l2_grid}};
  }

  /// Throws ConfigError on the first violated rule.
  void validate(bool need_years = true) const {
    if (need_years) {
      if (year_from <= 0 || year_to <= 0) throw ConfigError("year is required");
      if (year_from > year_to) throw ConfigError("empty year range");
    }
    if (thresholds.dev_min > thresholds.dev_max) throw ConfigError("thresholds: dev_min > dev_max");
    if (lfs.empty()) throw ConfigError("lfs: empty");
    if (lfs.size() > 1 && lfs.size() < min_columns(method)) {
      throw ConfigError(std::string(to_string(method)) + " needs at least " + std::to_string(min_columns(method)) +
                        " labeling functions");
    }
    if (!(balance_n >= 1)) throw ConfigError("balance_n must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds: empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) throw ConfigError("seeds must be distinct");
    if (feature_grid.empty() || l2_grid.empty()) throw ConfigError("empty hyperparameter grid");
    for (double c : l2_grid) {
      if (!(c > 0)) throw ConfigError("l2_grid values must be positive");
    }
    if (threads == 0) throw ConfigError("threads must be >= 1");
  }
};

/// Resolves a data path: relative paths are taken from GRANUM_DATA_DIR when
/// it is set.
inline std::filesystem::path resolve_data_path(const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  if (const char* root = std::getenv("GRANUM_DATA_DIR"); root && *root) return std::filesystem::path(root) / p;
  return p;
}

inline std::vector<Lf> lfs_from_json(const nlohmann::json& j) {
  std::vector<Lf> out;
  if (j.is_string()) return parse_lf_list(j.get<std::string>());
  for (const auto& e : j) {
    auto lf = parse_lf(e.get<std::string>());
    if (!lf) throw ConfigError("unknown labeling function \"" + e.get<std::string>() + "\"");
    out.push_back(*lf);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Applies the keys of `j` onto `cfg`. Unknown keys are rejected.
inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "thesaurus") {
        cfg.thesaurus = v.get<std::string>();
      } else if (key == "corpus") {
        cfg.corpus = v.get<std::string>();
      } else if (key == "year") {
        cfg.year_from = cfg.year_to = v.get<int>();
      } else if (key == "years") {
        if (!v.is_array() || v.size() != 2) throw ConfigError("years must be [first, last]");
        cfg.year_from = v[0].get<int>();
        cfg.year_to = v[1].get<int>();
      } else if (key == "thresholds") {
        for (const auto& [tk, tv] : v.items()) {
          auto n = tv.get<std::int64_t>();
          if (n < 0) throw ConfigError("thresholds must be non-negative");
          const auto u = static_cast<std::size_t>(n);
          if (tk == "test_positive_min") {
            cfg.thresholds.test_positive_min = u;
          } else if (tk == "dev_min") {
            cfg.thresholds.dev_min = u;
          } else if (tk == "dev_max") {
            cfg.thresholds.dev_max = u;
          } else if (tk == "dev_positive_min") {
            cfg.thresholds.dev_positive_min = u;
          } else {
            throw ConfigError("unknown threshold \"" + tk + "\"");
          }
        }
      } else if (key == "lfs") {
        cfg.lfs = lfs_from_json(v);
      } else if (key == "method") {
        auto m = parse_method(v.get<std::string>());
        if (!m) throw ConfigError("unknown method \"" + v.get<std::string>() + "\"");
        cfg.method = *m;
      } else if (key == "balance_n") {
        cfg.balance_n = v.get<double>();
      } else if (key == "seeds") {
        cfg.seeds = v.get<std::vector<std::uint64_t>>();
      } else if (key == "feature_grid") {
        cfg.feature_grid = v.get<std::vector<std::size_t>>();
      } else if (key == "l2_grid") {
        cfg.l2_grid = v.get<std::vector<double>>();
      } else if (key == "out") {
        cfg.out = v.get<std::string>();
      } else if (key == "threads") {
        cfg.threads = v.get<unsigned>();
      } else {
        throw ConfigError("unknown config key \"" + key + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  RunConfig cfg;
  apply_config_json(cfg, j);
  return cfg;
}

}  // namespace granum
