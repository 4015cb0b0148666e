#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "granum/labelers.hpp"
#include "granum/matcher.hpp"
#include "granum/votes.hpp"
#include "support.hpp"

using namespace granum;
using nlohmann::json;

namespace {

Thesaurus npd_thesaurus() {
  json concepts = json::array({{{"cui", "C0220756"},
                                {"preferred", true},
                                {"terms", {"Niemann-Pick Disease, Type A", "Sphingomyelin Lipidosis", "X", "NPD (Type-A)"}}}});
  json host_concepts = json::array({{{"cui", "C0028064"}, {"preferred", true}, {"terms", {"Niemann-Pick Diseases"}}}});
  return Thesaurus::from_json(json::array(
      {{{"ui", "D009542"}, {"name", "Niemann-Pick Diseases"}, {"parents", json::array()}, {"year_introduced", 1990},
        {"provenance_type", "other"}, {"host_ui", nullptr}, {"concepts", host_concepts}},
       {{"ui", "D052536"}, {"name", "Niemann-Pick Disease, Type A"}, {"parents", {"D009542"}}, {"year_introduced", 2008},
        {"provenance_type", "subdivision_1_2"}, {"host_ui", "D009542"}, {"concepts", concepts}}}));
}

const UseCase kNpd{"C0220756", "D052536", "D009542", 2008};

Document doc(const std::string& pmid, const std::string& title, const std::string& abstract = "",
             std::vector<std::string> occ = {}) {
  return Document{pmid, title, abstract, 2009, {"D009542"}, occ};
}

bool vote_of(const Document& d, const Dictionary& dict) {
  auto v = apply_lf({&d}, dict);
  return v.at(0).value;
}

}  // namespace

TEST(Dictionary, NamePunctuationAndTokens) {
  auto t = npd_thesaurus();
  EXPECT_EQ(build_dictionary(kNpd, t, Lf::NE).elements, (std::vector<std::string>{"Niemann-Pick Disease, Type A"}));
  EXPECT_EQ(build_dictionary(kNpd, t, Lf::NL).elements, (std::vector<std::string>{"niemann-pick disease, type a"}));
  EXPECT_EQ(build_dictionary(kNpd, t, Lf::NNP).elements, (std::vector<std::string>{"niemann pick disease type a"}));
  EXPECT_EQ(build_dictionary(kNpd, t, Lf::NT).elements,
            (std::vector<std::string>{"niemann", "pick", "disease", "type", "a"}));
}

TEST(Dictionary, SynonymsExcludeName) {
  auto t = npd_thesaurus();
  EXPECT_EQ(build_dictionary(kNpd, t, Lf::SE).elements,
            (std::vector<std::string>{"Sphingomyelin Lipidosis", "X", "NPD (Type-A)"}));
  EXPECT_EQ(build_dictionary(kNpd, t, Lf::SL).elements,
            (std::vector<std::string>{"sphingomyelin lipidosis", "x", "npd (type-a)"}));
  EXPECT_EQ(build_dictionary(kNpd, t, Lf::SNP).elements, (std::vector<std::string>{"sphingomyelin lipidosis", "x", "npd type a"}));
  // duplicates dropped, first occurrence order kept
  EXPECT_EQ(build_dictionary(kNpd, t, Lf::ST).elements,
            (std::vector<std::string>{"sphingomyelin", "lipidosis", "x", "npd", "type", "a"}));
}

TEST(Dictionary, CoIsNotDictionaryBased) {
  auto t = npd_thesaurus();
  EXPECT_THROW(build_dictionary(kNpd, t, Lf::CO), std::invalid_argument);
}

TEST(Dictionary, ElementsHaveNoWhitespaceForTokenFunctions) {
  auto g = support::generated_corpus(3, 1);
  for (const auto& uc : g.use_cases) {
    for (Lf lf : {Lf::NT, Lf::ST}) {
      for (const auto& e : build_dictionary(uc, g.thesaurus, lf).elements) {
        EXPECT_FALSE(e.empty());
        EXPECT_EQ(e.find(' '), std::string::npos) << e;
      }
    }
  }
}

TEST(ApplyLf, SynonymMatchIsCaseInsensitive) {
  auto t = npd_thesaurus();
  auto d = doc("1", "Classic sphingomyelin lipidosis was observed");
  EXPECT_TRUE(vote_of(d, build_dictionary(kNpd, t, Lf::SL)));
  EXPECT_FALSE(vote_of(d, build_dictionary(kNpd, t, Lf::SE)));
}

TEST(ApplyLf, TokenBoundaries) {
  Dictionary nt{"F", Lf::NT, {"type"}};
  EXPECT_FALSE(vote_of(doc("1", "typical case"), nt));
  EXPECT_TRUE(vote_of(doc("2", "a case of Type A"), nt));
  EXPECT_TRUE(vote_of(doc("3", "", "(type)"), nt));
  EXPECT_FALSE(vote_of(doc("4", "subtype"), nt));
}

TEST(ApplyLf, TitleAndAbstractAreSeparateFields) {
  Dictionary nl{"F", Lf::NL, {"pick disease"}};
  EXPECT_FALSE(vote_of(doc("1", "pick", "disease"), nl));
  EXPECT_TRUE(vote_of(doc("2", "none", "Pick disease"), nl));
}

TEST(ApplyLf, OutputInPmidOrder) {
  Dictionary nl{"F", Lf::NL, {"a"}};
  auto d10 = doc("10", "a"), d9 = doc("9", "b");
  auto v = apply_lf({&d10, &d9}, nl);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].pmid, "9");
  EXPECT_FALSE(v[0].value);
  EXPECT_TRUE(v[1].value);
}

TEST(ApplyCo, UsesOccurrencesOnly) {
  auto with = doc("1", "nothing here", "", {"C0220756"});
  auto without = doc("2", "Niemann-Pick Disease, Type A");
  auto v = apply_co({&with, &without}, "D052536", "C0220756");
  EXPECT_TRUE(v[0].value);
  EXPECT_FALSE(v[1].value);
  EXPECT_EQ(v[0].lf, Lf::CO);
}

TEST(Lfs, ParseAndJoin) {
  EXPECT_EQ(parse_lf_list("CO,NL,SL"), (std::vector<Lf>{Lf::CO, Lf::NL, Lf::SL}));
  EXPECT_EQ(join_lfs({Lf::NE, Lf::ST}), "NE,ST");
  EXPECT_FALSE(parse_lf("XX"));
}

// -------------------------------------------------------------- matcher

TEST(Matcher, TwoPatterns) {
  Matcher m({Dictionary{"A", Lf::NL, {"heart"}}, Dictionary{"B", Lf::NL, {"lung"}}});
  auto hits = m.match("Heart and lung", "");
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(m.labels()[hits[0].label], "A");
  EXPECT_EQ(hits[0].lfs, bit(Lf::NL));
  EXPECT_EQ(m.labels()[hits[1].label], "B");
}

TEST(Matcher, OverlappingPatternsBothReported) {
  Matcher m({Dictionary{"A", Lf::NT, {"pick"}}, Dictionary{"B", Lf::NNP, {"niemann pick"}}});
  auto hits = m.match("niemann pick", "");
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].lfs, bit(Lf::NT));
  EXPECT_EQ(hits[1].lfs, bit(Lf::NNP));
}

TEST(Matcher, RawAndFoldedSidesAreSeparate) {
  Matcher m({Dictionary{"A", Lf::NE, {"AFL"}}, Dictionary{"A", Lf::NL, {"afl"}}});
  auto hits = m.match("afl", "");
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].lfs, bit(Lf::NL));
  hits = m.match("AFL", "");
  EXPECT_EQ(hits[0].lfs, bit(Lf::NL) | bit(Lf::NE));
}

TEST(Matcher, RejectsEmptyAndCo) {
  EXPECT_THROW(Matcher({}), std::invalid_argument);
  EXPECT_THROW(Matcher({Dictionary{"A", Lf::CO, {"x"}}}), std::invalid_argument);
}

TEST(MatcherProperty, AgreesWithNaiveScanning) {
  Rng rng(99);
  const std::vector<std::string> pieces{"a", "b", "c", "B", " ", "-", "é", "É"};
  auto text_of = [&](std::size_t max_len) {
    std::string s;
    for (std::size_t i = rng.below(max_len + 1); i > 0; --i) s += pieces[rng.below(pieces.size())];
    return s;
  };
  std::size_t checks = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Dictionary> dicts;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      Dictionary d{"L" + std::to_string(rng.below(3)), kAllLfs[1 + rng.below(8)], {}};
      d.elements.push_back(support::random_string(rng, "abc", 1, 4));
      if (rng.bernoulli(0.3)) d.elements.push_back(support::random_string(rng, "ab c", 1, 5));
      dicts.push_back(d);
    }
    Matcher m(dicts);
    for (int k = 0; k < 10; ++k) {
      Document d{"1", text_of(30), text_of(30), 2000, {}, {}};
      std::set<support::VoteKey> got;
      for (const auto& h : m.match(d)) {
        for (Lf lf : kAllLfs) {
          if (h.lfs & bit(lf)) got.emplace("1", m.labels()[h.label], lf);
        }
      }
      EXPECT_EQ(got, support::naive_dictionary_votes({&d}, dicts)) << d.title << " | " << d.abstract;
      checks += dicts.size();
    }
  }
  EXPECT_GE(checks, 2000u);
}

TEST(MatcherProperty, AgreesWithApplyLf) {
  auto g = support::generated_corpus(21, 300);
  const auto dicts = build_all_dictionaries(g.use_cases, g.thesaurus);
  Matcher m(dicts);
  std::vector<const Document*> docs;
  for (const auto& d : g.corpus.documents()) docs.push_back(&d);
  std::set<support::VoteKey> direct;
  for (const auto& dict : dicts) {
    for (const auto& v : apply_lf(docs, dict)) {
      if (v.value) direct.emplace(v.pmid, v.label, v.lf);
    }
  }
  std::set<support::VoteKey> automaton;
  for (const auto* d : docs) {
    for (const auto& h : m.match(*d)) {
      for (Lf lf : kAllLfs) {
        if (h.lfs & bit(lf)) automaton.emplace(d->pmid, m.labels()[h.label], lf);
      }
    }
  }
  EXPECT_EQ(direct, automaton);
  EXPECT_FALSE(direct.empty());
}

// ---------------------------------------------------------------- votes

namespace {

std::set<std::pair<std::string, std::string>> positives(const VoteTable& t, Lf lf) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& r : t.rows()) {
    for (const auto& l : r.labels) {
      if (l.vote(lf)) out.emplace(r.pmid, l.label);
    }
  }
  return out;
}

bool subset(const std::set<std::pair<std::string, std::string>>& a, const std::set<std::pair<std::string, std::string>>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST(LabelDocuments, ContainmentChainsOnGeneratedCorpus) {
  auto g = support::generated_corpus(1, 1000);
  std::vector<const Document*> docs;
  for (const auto& d : g.corpus.documents()) docs.push_back(&d);
  Matcher m(build_all_dictionaries(g.use_cases, g.thesaurus));
  auto t = label_documents(docs, g.use_cases, g.thesaurus, m);
  EXPECT_TRUE(subset(positives(t, Lf::NE), positives(t, Lf::NL)));
  EXPECT_TRUE(subset(positives(t, Lf::NL), positives(t, Lf::NT)));
  EXPECT_TRUE(subset(positives(t, Lf::SE), positives(t, Lf::SL)));
  EXPECT_TRUE(subset(positives(t, Lf::SL), positives(t, Lf::ST)));
  EXPECT_GT(positives(t, Lf::NE).size(), 0u);
  EXPECT_GT(positives(t, Lf::SE).size(), 0u);
}

TEST(LabelDocuments, OnlyValidPairsAndThreadIndependent) {
  auto g = support::generated_corpus(2, 400);
  std::vector<const Document*> docs;
  for (const auto& d : g.corpus.documents()) docs.push_back(&d);
  Matcher m(build_all_dictionaries(g.use_cases, g.thesaurus));
  auto t1 = label_documents(docs, g.use_cases, g.thesaurus, m, 1);
  auto t4 = label_documents(docs, g.use_cases, g.thesaurus, m, 4);
  EXPECT_EQ(t1.rows(), t4.rows());
  for (const auto& r : t1.rows()) {
    const auto* d = g.corpus.find(r.pmid);
    ASSERT_NE(d, nullptr);
    for (const auto& lv : r.labels) {
      const auto& host = g.thesaurus.at(lv.label).host_ui.value();
      auto valid = g.thesaurus.descendants(host);
      valid.push_back(host);
      bool ok = false;
      for (const auto& u : d->descriptor_uis) ok |= std::find(valid.begin(), valid.end(), u) != valid.end();
      EXPECT_TRUE(ok) << r.pmid << " " << lv.label;
    }
  }
}

TEST(VoteTable, TsvAndJsonlRoundTrip) {
  auto g = support::generated_corpus(4, 120);
  std::vector<const Document*> docs;
  for (const auto& d : g.corpus.documents()) docs.push_back(&d);
  Matcher m(build_all_dictionaries(g.use_cases, g.thesaurus));
  auto t = label_documents(docs, g.use_cases, g.thesaurus, m);
  std::stringstream tsv, jl;
  t.write_tsv(tsv);
  t.write_jsonl(jl);
  EXPECT_EQ(VoteTable::read_tsv(tsv).rows(), t.rows());
  EXPECT_EQ(VoteTable::read_jsonl(jl).rows(), t.rows());
}
