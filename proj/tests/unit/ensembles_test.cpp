#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <set>

#include "granum/combination_search.hpp"
#include "granum/ensembles.hpp"
#include "support.hpp"

using namespace granum;

namespace {

VoteMatrix one_row(std::vector<Lf> cols, std::vector<std::uint8_t> votes) {
  return VoteMatrix(std::move(cols), {RowKey{"1", "A"}}, std::move(votes));
}

bool assigned(const EnhancedLabels& e) { return !e.positives.empty(); }

const std::vector<Lf> k3{Lf::CO, Lf::NL, Lf::SL};

}  // namespace

TEST(MajorityVote, Examples) {
  EXPECT_TRUE(assigned(combine_mv(one_row(k3, {1, 1, 0}))));
  EXPECT_FALSE(assigned(combine_mv(one_row({Lf::CO, Lf::NL}, {1, 0}))));
  EXPECT_FALSE(assigned(combine_mv(one_row(k3, {0, 0, 0}))));
  EXPECT_THROW(combine_mv(one_row({Lf::CO}, {1})), std::invalid_argument);
}

TEST(AtLeastOne, Examples) {
  EXPECT_TRUE(assigned(combine_alo(one_row(k3, {0, 0, 1}))));
  EXPECT_FALSE(assigned(combine_alo(one_row(k3, {0, 0, 0}))));
  EXPECT_THROW(combine_alo(one_row({Lf::CO}, {1})), std::invalid_argument);
}

TEST(VoteMatrixTest, RejectsDuplicateRowsAndBadShape) {
  EXPECT_THROW(VoteMatrix(k3, {RowKey{"1", "A"}, RowKey{"1", "A"}}, std::vector<std::uint8_t>(6, 0)), std::invalid_argument);
  EXPECT_THROW(VoteMatrix(k3, {RowKey{"1", "A"}}, {1, 0}), std::invalid_argument);
}

TEST(EnhancedLabelsTest, CoversEveryDocument) {
  VoteMatrix m(k3, {RowKey{"2", "A"}, RowKey{"10", "A"}, RowKey{"10", "B"}}, {0, 0, 0, 1, 0, 0, 1, 1, 0});
  auto by = combine_alo(m).by_document();
  ASSERT_EQ(by.size(), 2u);
  EXPECT_TRUE(by.at("2").empty());
  EXPECT_EQ(by.at("10"), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(by.begin()->first, "2");
}

TEST(EnsembleProperty, MatchBruteForce) {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    auto rm = support::random_matrix(rng, 2, 8, 1 + rng.below(100));
    auto m = support::to_matrix(rm);
    std::set<std::pair<std::string, std::string>> mv, alo;
    const std::size_t c = rm.columns.size();
    for (std::size_t r = 0; r < rm.rows.size(); ++r) {
      std::size_t pos = 0;
      for (std::size_t j = 0; j < c; ++j) pos += rm.cells[r * c + j];
      if (pos * 2 > c) mv.emplace(rm.rows[r].pmid, rm.rows[r].label);
      if (pos > 0) alo.emplace(rm.rows[r].pmid, rm.rows[r].label);
    }
    EXPECT_EQ(support::positive_set(combine_mv(m)), mv);
    EXPECT_EQ(support::positive_set(combine_alo(m)), alo);
    EXPECT_TRUE(std::includes(alo.begin(), alo.end(), mv.begin(), mv.end()));
  }
}

TEST(EnsembleProperty, AloAbsorbsOvershadowedFunction) {
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    auto rm = support::random_matrix(rng, 2, 7, 1 + rng.below(60));
    // add a column whose positives are a subset of column `src`
    std::vector<Lf> unused;
    for (Lf lf : kAllLfs) {
      if (std::find(rm.columns.begin(), rm.columns.end(), lf) == rm.columns.end()) unused.push_back(lf);
    }
    const std::size_t c = rm.columns.size(), src = rng.below(c);
    std::vector<Lf> cols = rm.columns;
    cols.push_back(unused[rng.below(unused.size())]);
    std::vector<std::uint8_t> cells;
    for (std::size_t r = 0; r < rm.rows.size(); ++r) {
      for (std::size_t j = 0; j < c; ++j) cells.push_back(rm.cells[r * c + j]);
      cells.push_back(rm.cells[r * c + src] && rng.bernoulli(0.5));
    }
    EXPECT_EQ(support::positive_set(combine_alo(VoteMatrix(cols, rm.rows, cells))),
              support::positive_set(combine_alo(support::to_matrix(rm))));
  }
}

TEST(EnsembleProperty, RowOrderDoesNotMatter) {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    auto rm = support::random_matrix(rng, 3, 6, 30);
    std::vector<std::size_t> perm(rm.rows.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    support::RandomMatrix shuffled{rm.columns, {}, {}};
    const std::size_t c = rm.columns.size();
    for (std::size_t i : perm) {
      shuffled.rows.push_back(rm.rows[i]);
      for (std::size_t j = 0; j < c; ++j) shuffled.cells.push_back(rm.cells[i * c + j]);
    }
    for (Method method : {Method::MV, Method::ALO, Method::LM}) {
      EXPECT_EQ(combine(support::to_matrix(rm), method).positives, combine(support::to_matrix(shuffled), method).positives);
    }
  }
}

// ----------------------------------------------------------- label model

TEST(LabelModel, PosteriorMatchesHandBayes) {
  LabelModelParams p{k3, 0.5, {0.8, 0.8, 0.8}, {0.8, 0.8, 0.8}, 0, false, {}};
  const std::vector<std::uint8_t> v{1, 1, 0};
  const double expected = (0.8 * 0.8 * 0.2) / (0.8 * 0.8 * 0.2 + 0.2 * 0.2 * 0.8);
  EXPECT_NEAR(posterior(p, v), 0.8, 1e-12);
  EXPECT_NEAR(posterior(p, v), expected, 1e-12);
  EXPECT_EQ(apply_label_model(one_row(k3, v), p).positives.size(), 1u);
}

TEST(LabelModel, PosteriorMatchesClosedFormForRandomParams) {
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t c = 3 + rng.below(6);
    LabelModelParams p;
    p.prior = 0.01 + 0.98 * rng.uniform();
    std::vector<std::uint8_t> v;
    double num = p.prior, other = 1 - p.prior;
    for (std::size_t j = 0; j < c; ++j) {
      p.sensitivity.push_back(0.01 + 0.98 * rng.uniform());
      p.specificity.push_back(0.01 + 0.98 * rng.uniform());
      v.push_back(rng.bernoulli(0.5));
      num *= v[j] ? p.sensitivity[j] : 1 - p.sensitivity[j];
      other *= v[j] ? 1 - p.specificity[j] : p.specificity[j];
    }
    EXPECT_NEAR(posterior(p, v), num / (num + other), 1e-12);
  }
}

TEST(LabelModel, ExactlyHalfIsNotAssigned) {
  // s = 1 - t makes every vote uninformative
  LabelModelParams p{k3, 0.5, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, 0, false, {}};
  EXPECT_EQ(posterior(p, std::vector<std::uint8_t>{1, 0, 1}), 0.5);
  EXPECT_TRUE(apply_label_model(one_row(k3, {1, 0, 1}), p).positives.empty());
}

TEST(LabelModel, AllZeroRowWithLowPrior) {
  LabelModelParams p{k3, 0.3, {0.7, 0.9, 0.6}, {0.8, 0.7, 0.9}, 0, false, {}};
  EXPECT_LT(posterior(p, std::vector<std::uint8_t>{0, 0, 0}), 0.5);
  EXPECT_TRUE(apply_label_model(one_row(k3, {0, 0, 0}), p).positives.empty());
}

TEST(LabelModel, ColumnMismatchRejected) {
  LabelModelParams p{{Lf::CO, Lf::NE, Lf::SE}, 0.5, {0.8, 0.8, 0.8}, {0.8, 0.8, 0.8}, 0, false, {}};
  EXPECT_THROW(apply_label_model(one_row(k3, {1, 1, 1}), p), std::invalid_argument);
}

TEST(LabelModel, IdenticalColumnsFollowTheColumn) {
  Rng rng(42);
  std::vector<RowKey> rows;
  std::vector<std::uint8_t> cells;
  std::set<std::pair<std::string, std::string>> expected;
  for (int r = 0; r < 200; ++r) {
    const bool v = rng.bernoulli(0.3);
    rows.push_back(RowKey{std::to_string(r), "A"});
    for (int j = 0; j < 4; ++j) cells.push_back(v);
    if (v) expected.emplace(std::to_string(r), "A");
  }
  VoteMatrix m({Lf::CO, Lf::NE, Lf::NL, Lf::SL}, rows, cells);
  EXPECT_EQ(support::positive_set(combine_lm(m)), expected);
}

TEST(LabelModel, Preconditions) {
  EXPECT_THROW(fit_label_model(one_row({Lf::CO, Lf::NL}, {1, 1})), std::invalid_argument);
  EXPECT_THROW(fit_label_model(VoteMatrix(k3, {}, {})), std::invalid_argument);
}

namespace {

struct Planted {
  VoteMatrix matrix;
  std::vector<bool> truth;
};

Planted two_coin(Rng& rng, double prior, const std::vector<double>& s, const std::vector<double>& t, std::size_t n) {
  const std::vector<Lf> cols(kAllLfs.begin(), kAllLfs.begin() + static_cast<std::ptrdiff_t>(s.size()));
  std::vector<RowKey> rows;
  std::vector<std::uint8_t> cells;
  std::vector<bool> truth;
  for (std::size_t r = 0; r < n; ++r) {
    const bool y = rng.bernoulli(prior);
    truth.push_back(y);
    rows.push_back(RowKey{std::to_string(r), "A"});
    for (std::size_t j = 0; j < s.size(); ++j) cells.push_back(y ? rng.bernoulli(s[j]) : !rng.bernoulli(t[j]));
  }
  return Planted{VoteMatrix(cols, rows, cells), truth};
}

}  // namespace

TEST(LabelModel, RecoversPlantedParameters) {
  Rng rng(43);
  int good = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto data = two_coin(rng, 0.3, std::vector<double>(5, 0.9), std::vector<double>(5, 0.9), 2000);
    auto p = fit_label_model(data.matrix);
    bool ok = std::abs(p.prior - 0.3) <= 0.05;
    for (std::size_t j = 0; j < 5; ++j) {
      ok = ok && std::abs(p.sensitivity[j] - 0.9) <= 0.05 && std::abs(p.specificity[j] - 0.9) <= 0.05;
    }
    good += ok;
  }
  EXPECT_GE(good, 18);
}

TEST(LabelModel, LogLikelihoodNeverDecreases) {
  Rng rng(44);
  LabelModelConfig cfg;
  cfg.record_trace = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 3 + rng.below(5);
    std::vector<double> s, t;
    for (std::size_t j = 0; j < c; ++j) {
      s.push_back(0.3 + 0.65 * rng.uniform());
      t.push_back(0.3 + 0.65 * rng.uniform());
    }
    auto data = two_coin(rng, 0.05 + 0.9 * rng.uniform(), s, t, 50 + rng.below(500));
    auto p = fit_label_model(data.matrix, cfg);
    ASSERT_GE(p.log_likelihood_trace.size(), 2u);
    for (std::size_t i = 1; i < p.log_likelihood_trace.size(); ++i) {
      const double prev = p.log_likelihood_trace[i - 1], cur = p.log_likelihood_trace[i];
      EXPECT_GE(cur, prev - 1e-9 * std::max(1.0, std::abs(prev))) << "trial " << trial << " iteration " << i;
    }
    EXPECT_NEAR(p.log_likelihood_trace.back(), log_likelihood(p, data.matrix), 1e-6 * std::abs(p.log_likelihood_trace.back()));
  }
}

TEST(LabelModel, ParametersStayClamped) {
  VoteMatrix m(k3, {RowKey{"1", "A"}, RowKey{"2", "A"}, RowKey{"3", "A"}}, {1, 1, 1, 0, 0, 0, 1, 1, 1});
  auto p = fit_label_model(m);
  for (double x : p.sensitivity) {
    EXPECT_GE(x, 1e-4);
    EXPECT_LE(x, 1 - 1e-4);
  }
  EXPECT_GE(p.prior, 1e-4);
  EXPECT_LE(p.prior, 1 - 1e-4);
}

// ---------------------------------------------------------- combinations

TEST(Combinations, Counts) {
  const std::vector<Lf> all(kAllLfs.begin(), kAllLfs.end());
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(enumerate_combinations(all, 2).size(), 502u);
  EXPECT_EQ(enumerate_combinations(all, 3).size(), 466u);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
  auto three = enumerate_combinations(k3, 2);
  ASSERT_EQ(three.size(), 4u);
  EXPECT_EQ(three[0], (std::vector<Lf>{Lf::CO, Lf::NL}));
  EXPECT_EQ(three[1], (std::vector<Lf>{Lf::CO, Lf::SL}));
  EXPECT_EQ(three[2], (std::vector<Lf>{Lf::NL, Lf::SL}));
  EXPECT_EQ(three[3], k3);
  EXPECT_THROW(enumerate_combinations(k3, 0), std::invalid_argument);
}

TEST(Combinations, CanonicalOrderAndUniqueness) {
  const std::vector<Lf> all(kAllLfs.begin(), kAllLfs.end());
  auto subsets = enumerate_combinations(all, 2);
  std::set<std::vector<Lf>> seen(subsets.begin(), subsets.end());
  EXPECT_EQ(seen.size(), subsets.size());
  for (std::size_t i = 1; i < subsets.size(); ++i) {
    const auto& a = subsets[i - 1];
    const auto& b = subsets[i];
    EXPECT_TRUE(a.size() < b.size() || (a.size() == b.size() && a < b));
  }
}

namespace {

VoteTable table_of(const std::vector<std::tuple<std::string, std::string, LfMask>>& cells) {
  std::map<std::string, DocumentVotes> rows;
  std::set<std::string> labels;
  for (const auto& [pmid, label, mask] : cells) {
    rows[pmid].pmid = pmid;
    rows[pmid].labels.push_back(LabelVotes{label, mask});
    labels.insert(label);
  }
  std::vector<DocumentVotes> v;
  for (auto& [_, r] : rows) v.push_back(r);
  return VoteTable(std::vector<std::string>(labels.begin(), labels.end()), v);
}

LabeledDataset truth_of(const std::vector<std::tuple<std::string, std::string, bool>>& cells) {
  LabeledDataset ds;
  std::map<std::string, LabeledRow> rows;
  std::set<std::string> labels;
  for (const auto& [pmid, label, pos] : cells) {
    rows[pmid].pmid = pmid;
    rows[pmid].valid_labels.push_back(label);
    if (pos) rows[pmid].positive_labels.push_back(label);
    labels.insert(label);
  }
  ds.labels.assign(labels.begin(), labels.end());
  for (auto& [_, r] : rows) {
    std::sort(r.valid_labels.begin(), r.valid_labels.end());
    std::sort(r.positive_labels.begin(), r.positive_labels.end());
    ds.rows.push_back(r);
  }
  std::sort(ds.rows.begin(), ds.rows.end(), [](const LabeledRow& a, const LabeledRow& b) { return pmid_less(a.pmid, b.pmid); });
  return ds;
}

}  // namespace

TEST(CombinationSearch, IdenticalColumnsTieLexicographically) {
  const LfMask both = bit(Lf::NE) | bit(Lf::NL);
  auto votes = table_of({{"1", "A", both}, {"2", "A", 0}, {"3", "A", both}, {"4", "A", 0}});
  auto truth = truth_of({{"1", "A", true}, {"2", "A", false}, {"3", "A", false}, {"4", "A", true}});
  auto rows = search_combinations(votes, truth, {Method::MV, Method::ALO}, {Lf::NL, Lf::NE});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].scores[0]->maF1, rows[0].scores[1]->maF1);
  EXPECT_EQ(rows[0].lfs, (std::vector<Lf>{Lf::NE, Lf::NL}));
  rows = search_combinations(votes, truth, {Method::ALO}, {Lf::CO, Lf::NE, Lf::NL});
  ASSERT_EQ(rows.size(), 4u);
  // {CO,NE}, {CO,NL} and {CO,NE,NL} behave identically to {NE,NL}; CO never fires
  for (const auto& r : rows) EXPECT_EQ(r.best_maF1(), rows[0].best_maF1());
  EXPECT_EQ(rows[0].lfs, (std::vector<Lf>{Lf::CO, Lf::NE}));
  EXPECT_EQ(rows[1].lfs, (std::vector<Lf>{Lf::CO, Lf::NE, Lf::NL}));
  EXPECT_EQ(rows[3].lfs, (std::vector<Lf>{Lf::NE, Lf::NL}));
}

TEST(CombinationSearch, RankingMatchesBruteForceRescoring) {
  auto g = support::generated_corpus(8, 400);
  std::vector<const Document*> docs;
  for (const auto& d : g.corpus.documents()) docs.push_back(&d);
  Matcher matcher(build_all_dictionaries(g.use_cases, g.thesaurus));
  auto votes = label_documents(docs, g.use_cases, g.thesaurus, matcher);
  // planted truth: a document is positive when its fine descriptor is annotated
  std::vector<std::tuple<std::string, std::string, bool>> cells;
  for (const auto& r : votes.rows()) {
    const auto* d = g.corpus.find(r.pmid);
    for (const auto& lv : r.labels) {
      cells.emplace_back(r.pmid, lv.label,
                         std::binary_search(d->descriptor_uis.begin(), d->descriptor_uis.end(), lv.label));
    }
  }
  auto truth = truth_of(cells);
  const std::vector<Lf> lfs{Lf::CO, Lf::NE, Lf::NL, Lf::SL, Lf::NT};
  auto rows = search_combinations(votes, truth, {Method::MV, Method::ALO, Method::LM}, lfs, 2);

  std::vector<std::tuple<double, double, std::vector<Lf>>> brute;
  for (std::size_t mask = 1; mask < (1u << lfs.size()); ++mask) {
    std::vector<Lf> subset;
    for (std::size_t j = 0; j < lfs.size(); ++j) {
      if (mask & (1u << j)) subset.push_back(lfs[j]);
    }
    if (subset.size() < 2) continue;
    const auto m = VoteMatrix::from_table(votes, subset);
    double best_ma = -1, best_mi = -1;
    for (Method method : {Method::MV, Method::ALO, Method::LM}) {
      if (subset.size() < min_columns(method)) continue;
      auto s = support::naive_score(to_predictions(combine(m, method)), truth);
      best_ma = std::max(best_ma, s.maF1);
      best_mi = std::max(best_mi, s.miF1);
    }
    brute.emplace_back(best_ma, best_mi, subset);
  }
  ASSERT_EQ(rows.size(), brute.size());
  std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
    if (std::abs(std::get<0>(a) - std::get<0>(b)) > 1e-12) return std::get<0>(a) > std::get<0>(b);
    if (std::abs(std::get<1>(a) - std::get<1>(b)) > 1e-12) return std::get<1>(a) > std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].lfs, std::get<2>(brute[i])) << "rank " << i;
    EXPECT_NEAR(rows[i].best_maF1(), std::get<0>(brute[i]), 1e-12);
  }
}
