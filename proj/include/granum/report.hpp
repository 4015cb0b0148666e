#pragma once

// Report tables: TSV rounded to three decimals for reading, JSON at full
// precision for further processing.

#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/eval.hpp"

namespace granum {

struct ReportTable {
  std::string title;
  std::vector<EvalResult> results;
};

inline std::string format3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

inline std::string format_with_var(double mean, double var) { return format3(mean) + "±" + format3(var); }

/// One block per table: a "# title" line, a header, one row per result.
inline std::string report_tsv(const std::vector<ReportTable>& tables) {
  std::string out;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    if (t) out += '\n';
    out += "# " + tables[t].title + '\n';
    out += "model\tmaP±var\tmaR±var\tmaF1±var\tmiP\tmiR\tmiF1\n";
    for (const auto& r : tables[t].results) {
      out += r.name + '\t' + format_with_var(r.maP, r.maP_var) + '\t' + format_with_var(r.maR, r.maR_var) + '\t' +
             format_with_var(r.maF1, r.maF1_var) + '\t' + format3(r.miP) + '\t' + format3(r.miR) + '\t' + format3(r.miF1) +
             '\n';
    }
  }
  return out;
}

inline nlohmann::ordered_json report_json(const std::vector<ReportTable>& tables) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& t : tables) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : t.results) rows.push_back(r.to_json());
    out.push_back({{"title", t.title}, {"results", std::move(rows)}});
  }
  return out;
}

/// Per-year tables plus, when there is more than one year, a pooled table in
/// which each model's per-label counts from all years are merged.
inline std::vector<ReportTable> with_pooled_table(std::vector<ReportTable> per_year) {
  if (per_year.size() < 2) return per_year;
  ReportTable pooled{"pooled", {}};
  for (const auto& first : per_year.front().results) {
    std::vector<EvalResult> parts;
    for (const auto& t : per_year) {
      for (const auto& r : t.results) {
        if (r.name == first.name) parts.push_back(r);
      }
    }
    if (parts.size() == per_year.size()) pooled.results.push_back(pool(first.name, parts));
  }
  per_year.push_back(std::move(pooled));
  return per_year;
}

}  // namespace granum
