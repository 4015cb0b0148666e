#pragma once

// End-to-end run for one or more promotion years: use-case selection,
// labeling, weak-label enhancement, dataset construction, the logistic
// regression baseline, and the report tables.

#include <map>
#include <string>
#include <vector>

#include "granum/combination_search.hpp"
#include "granum/config.hpp"
#include "granum/corpus.hpp"
#include "granum/datasets.hpp"
#include "granum/ensembles.hpp"
#include "granum/eval.hpp"
#include "granum/lrtrainer.hpp"
#include "granum/matcher.hpp"
#include "granum/parallel.hpp"
#include "granum/report.hpp"
#include "granum/thesaurus.hpp"
#include "granum/votes.hpp"

namespace granum {

/// "weak_CO" for a single function, otherwise e.g. "weak_ALO3".
inline std::string weak_source_name(Method method, const std::vector<Lf>& lfs) {
  if (lfs.size() == 1) return "weak_" + std::string(to_string(lfs.front()));
  return "weak_" + std::string(to_string(method)) + std::to_string(lfs.size());
}

/// Labels voted for by a single labeling function, for every table row.
inline Predictions lf_predictions(const VoteTable& votes, Lf lf) {
  Predictions out;
  for (const auto& row : votes.rows()) {
    auto& labels = out[row.pmid];
    for (const auto& lv : row.labels) {
      if (lv.vote(lf)) labels.push_back(lv.label);
    }
  }
  return out;
}

/// Weak labels from one function or from an ensemble over several.
inline EnhancedLabels enhance(const VoteTable& votes, Method method, const std::vector<Lf>& lfs,
                              const LabelModelConfig& lm = {}) {
  if (lfs.size() == 1) {
    EnhancedLabels out;
    out.method = method;
    out.lfs = lfs;
    for (const auto& row : votes.rows()) {
      out.pmids.push_back(row.pmid);
      for (const auto& lv : row.labels) {
        if (lv.vote(lfs.front())) out.positives.push_back(RowKey{row.pmid, lv.label});
      }
    }
    return out;
  }
  return combine(VoteMatrix::from_table(votes, lfs), method, lm);
}

inline std::string ensemble_name(Method method, const std::vector<Lf>& lfs) {
  return std::string(to_string(method)) + "(" + join_lfs(lfs, "+") + ")";
}

inline std::vector<const Document*> documents_where(const Corpus& corpus, bool (*keep)(int, int), int year) {
  std::vector<const Document*> out;
  for (const auto& d : corpus.documents()) {
    if (keep(d.year, year)) out.push_back(&d);
  }
  return out;
}

struct LrOutput {
  std::vector<Predictions> per_seed;
  Predictions voted;
  std::vector<LRModel> models;  // seed-major, then label order
};

/// Trains the baseline on `dev` for every seed and label and predicts `test`.
/// Labels whose training part holds a single class get a constant model.
inline LrOutput run_lr(const LabeledDataset& dev, const LabeledDataset& test, const Corpus* corpus, const RunConfig& cfg) {
  const FeatureSpace space = build_feature_space(dev, corpus);
  const EncodedDataset enc_dev = encode(dev, space, corpus);
  const EncodedDataset enc_test = encode(test, space, corpus);
  std::map<std::string, std::size_t, PmidLess> dev_index;
  for (std::size_t i = 0; i < enc_dev.rows.size(); ++i) dev_index[enc_dev.rows[i].pmid] = i;
  auto subset = [&](const LabeledDataset& part) {
    EncodedDataset e;
    e.labels = enc_dev.labels;
    e.feature_count = enc_dev.feature_count;
    for (const auto& r : part.rows) e.rows.push_back(enc_dev.rows.at(dev_index.at(r.pmid)));
    return e;
  };

  struct SeedData {
    EncodedDataset train, val;
  };
  std::vector<SeedData> seeds(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t s) {
    const auto split = split_90_10(dev, cfg.seeds[s]);
    const auto balanced = undersample(split.train, BalanceConfig{cfg.balance_n, cfg.seeds[s]});
    seeds[s] = SeedData{subset(balanced.dataset), subset(split.val)};
  });

  const auto& labels = dev.labels;
  LrOutput out;
  out.models.resize(cfg.seeds.size() * labels.size());
  parallel_for(out.models.size(), cfg.threads, [&](std::size_t t) {
    const auto& sd = seeds[t / labels.size()];
    const auto& label = labels[t % labels.size()];
    const auto train = binary_problem(sd.train, label);
    const std::size_t pos = train.positives();
    if (pos == 0 || pos == train.rows.size()) {
      out.models[t] = LRModel::constant(label, pos != 0);
      return;
    }
    const auto val = binary_problem(sd.val, label);
    auto choice = grid_search(train, val, cfg.feature_grid, cfg.l2_grid);
    choice.model.label = label;
    out.models[t] = std::move(choice.model);
  });

  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    Predictions p;
    for (const auto& row : enc_test.rows) {
      auto& assigned = p[row.pmid];
      for (std::size_t l = 0; l < labels.size(); ++l) {
        if (!std::binary_search(row.valid_labels.begin(), row.valid_labels.end(), labels[l])) continue;
        if (out.models[s * labels.size() + l].predict(row.features)) assigned.push_back(labels[l]);
      }
    }
    out.per_seed.push_back(std::move(p));
  }
  out.voted = predict_voted(out.per_seed, cfg.seeds.size());
  return out;
}

struct YearRun {
  int year = 0;
  std::vector<UseCase> use_cases;
  VoteTable dev_votes;
  VoteTable test_votes;
  EnhancedLabels weak;
  LabeledDataset dev;
  LabeledDataset test;
  LrOutput lr;
  ReportTable table;
};

/// Runs every stage for one year. Throws DataError when the year has no
/// use cases or no qualifying documents.
inline YearRun run_year(const Thesaurus& thesaurus, const Corpus& corpus, int year, const RunConfig& cfg) {
  YearRun run;
  run.year = year;
  run.use_cases = select_use_cases(thesaurus, compute_stats(corpus, thesaurus, year), year, cfg.thresholds);
  if (run.use_cases.empty()) throw DataError("no use cases for year " + std::to_string(year));

  const Matcher matcher(build_all_dictionaries(run.use_cases, thesaurus));
  const auto dev_docs = documents_where(corpus, [](int d, int y) { return d < y; }, year);
  const auto test_docs = documents_where(corpus, [](int d, int y) { return d >= y; }, year);
  run.dev_votes = label_documents(dev_docs, run.use_cases, thesaurus, matcher, cfg.threads);
  run.test_votes = label_documents(test_docs, run.use_cases, thesaurus, matcher, cfg.threads);

  run.weak = enhance(run.dev_votes, cfg.method, cfg.lfs);
  run.dev = build_dev(run.use_cases, corpus, thesaurus, run.weak.by_document(), weak_source_name(cfg.method, cfg.lfs));
  run.dev.thresholds = cfg.thresholds;
  run.test = build_test(run.use_cases, corpus, thesaurus);
  run.test.thresholds = cfg.thresholds;

  run.table.title = std::to_string(year);
  for (Lf lf : kAllLfs) {
    run.table.results.push_back(score(lf_predictions(run.test_votes, lf), run.test, {}, std::string(to_string(lf))));
  }
  if (cfg.lfs.size() > 1) {
    for (Method m : {Method::MV, Method::ALO, Method::LM}) {
      if (cfg.lfs.size() < min_columns(m)) continue;
      const auto enhanced = enhance(run.test_votes, m, cfg.lfs);
      run.table.results.push_back(score(enhanced.by_document(), run.test, {}, ensemble_name(m, cfg.lfs)));
    }
  }
  run.lr = run_lr(run.dev, run.test, &corpus, cfg);
  run.table.results.push_back(score(run.lr.voted, run.test, {}, "LR"));
  return run;
}

struct PipelineResult {
  std::vector<YearRun> years;
  std::vector<ReportTable> tables;  // per year, then pooled when there are several
};

inline PipelineResult run_pipeline(const Thesaurus& thesaurus, const Corpus& corpus, const RunConfig& cfg) {
  PipelineResult out;
  std::vector<ReportTable> per_year;
  for (int y : cfg.years()) {
    out.years.push_back(run_year(thesaurus, corpus, y, cfg));
    per_year.push_back(out.years.back().table);
  }
  out.tables = with_pooled_table(std::move(per_year));
  return out;
}

}  // namespace granum
