// granum command-line interface.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 data error
// (missing or malformed inputs).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "granum/combination_search.hpp"
#include "granum/config.hpp"
#include "granum/corpus.hpp"
#include "granum/datasets.hpp"
#include "granum/ensembles.hpp"
#include "granum/error.hpp"
#include "granum/eval.hpp"
#include "granum/lrtrainer.hpp"
#include "granum/pipeline.hpp"
#include "granum/report.hpp"
#include "granum/thesaurus.hpp"
#include "granum/votes.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace granum;

namespace {

struct Options {
  std::string config;
  std::string thesaurus;
  std::string corpus;
  std::string out;
  int year = 0;
  int year_to = 0;
  std::string lfs;
  std::string method;
  std::optional<double> balance_n;
  std::string seeds;
  unsigned threads = 0;
  std::optional<std::size_t> test_positive_min, dev_min, dev_max, dev_positive_min;
};

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid seed \"" + item + "\"");
    }
  }
  return out;
}

/// Config file first, then flags.
RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (!o.thesaurus.empty()) cfg.thesaurus = o.thesaurus;
  if (!o.corpus.empty()) cfg.corpus = o.corpus;
  if (!o.out.empty()) cfg.out = o.out;
  if (o.year) cfg.year_from = cfg.year_to = o.year;
  if (o.year_to) cfg.year_to = o.year_to;
  if (!o.lfs.empty()) {
    try {
      cfg.lfs = parse_lf_list(o.lfs);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (!o.method.empty()) {
    auto m = parse_method(o.method);
    if (!m) throw ConfigError("unknown method \"" + o.method + "\"");
    cfg.method = *m;
  }
  if (o.balance_n) cfg.balance_n = *o.balance_n;
  if (!o.seeds.empty()) cfg.seeds = parse_seeds(o.seeds);
  if (o.threads) cfg.threads = o.threads;
  if (o.test_positive_min) cfg.thresholds.test_positive_min = *o.test_positive_min;
  if (o.dev_min) cfg.thresholds.dev_min = *o.dev_min;
  if (o.dev_max) cfg.thresholds.dev_max = *o.dev_max;
  if (o.dev_positive_min) cfg.thresholds.dev_positive_min = *o.dev_positive_min;
  cfg.thesaurus = resolve_data_path(cfg.thesaurus);
  cfg.corpus = resolve_data_path(cfg.corpus);
  return cfg;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON run configuration; flags override its values");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads (outputs do not depend on it)");
}

void add_data(CLI::App* cmd, Options& o) {
  cmd->add_option("--thesaurus", o.thesaurus, "Thesaurus JSON (relative paths resolve against GRANUM_DATA_DIR)");
  cmd->add_option("--corpus", o.corpus, "Corpus JSONL file or corpus store directory");
}

void add_thresholds(CLI::App* cmd, Options& o) {
  cmd->add_option("--test-positive-min", o.test_positive_min, "Minimum test articles annotated with the new descriptor");
  cmd->add_option("--dev-min", o.dev_min, "Minimum development articles annotated with the host");
  cmd->add_option("--dev-max", o.dev_max, "Maximum development articles annotated with the host");
  cmd->add_option("--dev-positive-min", o.dev_positive_min,
                  "Minimum development articles of the host in which the concept occurs");
}

fs::path require(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is required");
  if (!fs::exists(p)) throw DataError(what + " not found: " + p.string());
  return p;
}

fs::path output_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  return cfg.out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

void write_text(const fs::path& p, const std::string& s) { open_out(p) << s; }

nlohmann::ordered_json thresholds_json(const SelectionThresholds& t) {
  return {{"test_positive_min", t.test_positive_min},
          {"dev_min", t.dev_min},
          {"dev_max", t.dev_max},
          {"dev_positive_min", t.dev_positive_min}};
}

void write_use_cases(const fs::path& p, int year, const SelectionThresholds& t, const std::vector<UseCase>& ucs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& uc : ucs) arr.push_back(to_json(uc));
  nlohmann::ordered_json j{{"year", year}, {"thresholds", thresholds_json(t)}, {"use_cases", std::move(arr)}};
  open_out(p) << j.dump(2) << '\n';
}

std::vector<UseCase> read_use_cases(const fs::path& p) {
  std::ifstream in(require(p, "use-case file"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(p.string() + ": " + e.what());
  }
  const auto& arr = j.is_object() && j.contains("use_cases") ? j.at("use_cases") : j;
  if (!arr.is_array()) throw DataError(p.string() + ": expected an array of use cases");
  std::vector<UseCase> out;
  for (const auto& e : arr) out.push_back(use_case_from_json(e));
  if (out.empty()) throw DataError(p.string() + ": no use cases");
  return out;
}

VoteTable read_votes(const fs::path& p) {
  std::ifstream in(require(p, "votes file"), std::ios::binary);
  if (p.extension() == ".jsonl") return VoteTable::read_jsonl(in, p.string());
  return VoteTable::read_tsv(in, p.string());
}

struct WeakFile {
  WeakLabels labels;
  std::string source;
};

WeakFile read_enhanced(const fs::path& p) {
  std::ifstream in(require(p, "enhanced-labels file"), std::ios::binary);
  WeakFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.labels[j.at("pmid").get<std::string>()] = j.at("labels").get<std::vector<std::string>>();
      if (out.source.empty()) {
        auto method = parse_method(j.at("method").get<std::string>());
        if (!method) throw DataError(p.string() + ":" + std::to_string(line_no) + ": unknown method");
        std::vector<Lf> lfs;
        for (const auto& name : j.at("lfs")) {
          auto lf = parse_lf(name.get<std::string>());
          if (!lf) throw DataError(p.string() + ":" + std::to_string(line_no) + ": unknown labeling function");
          lfs.push_back(*lf);
        }
        out.source = weak_source_name(*method, lfs);
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(p.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::ordered_json eval_file_json(int year, const EvalResult& r) {
  return {{"year", year}, {"result", r.to_json()}};
}

std::pair<int, EvalResult> read_eval(const fs::path& p) {
  std::ifstream in(require(p, "evaluation file"));
  try {
    auto j = nlohmann::json::parse(in);
    return {j.at("year").get<int>(), EvalResult::from_json(j.at("result"))};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

void write_report(const fs::path& dir, const std::vector<ReportTable>& tables) {
  write_text(dir / "report.tsv", report_tsv(tables));
  open_out(dir / "report.json") << report_json(tables).dump(2) << '\n';
}

void write_predictions_file(const fs::path& p, const Predictions& preds) {
  auto out = open_out(p);
  write_predictions(out, preds);
}

void write_models(const fs::path& p, const LrOutput& lr, const RunConfig& cfg, const std::vector<std::string>& labels) {
  auto out = open_out(p);
  for (std::size_t t = 0; t < lr.models.size(); ++t) {
    const auto& m = lr.models[t];
    out << nlohmann::ordered_json{{"seed", cfg.seeds[t / labels.size()]},
                                  {"label", m.label},
                                  {"k", m.features.size()},
                                  {"l2_c", m.l2_c},
                                  {"features", m.features},
                                  {"weights", m.weights},
                                  {"bias", m.bias},
                                  {"iterations", m.iterations},
                                  {"converged", m.converged}}
               .dump()
        << '\n';
  }
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Options& o) {
  auto cfg = resolve(o);
  const auto src = require(cfg.corpus, "--corpus");
  const auto corpus = Corpus::ingest(src);
  const auto dir = output_dir(cfg);
  corpus.save(dir);
  tool::write_manifest(dir, "ingest", cfg.effective(), {src});
  std::cerr << "ingested " << corpus.size() << " documents into " << dir << '\n';
  return 0;
}

int cmd_select(const Options& o) {
  auto cfg = resolve(o);
  cfg.validate();
  const auto thesaurus = Thesaurus::load(require(cfg.thesaurus, "--thesaurus"));
  const auto corpus = Corpus::load(require(cfg.corpus, "--corpus"));
  const auto dir = output_dir(cfg);
  for (int y : cfg.years()) {
    const auto ucs = select_use_cases(thesaurus, compute_stats(corpus, thesaurus, y), y, cfg.thresholds);
    const auto name = cfg.year_from == cfg.year_to ? std::string("usecases.json") : "usecases_" + std::to_string(y) + ".json";
    write_use_cases(dir / name, y, cfg.thresholds, ucs);
    std::cerr << y << ": " << ucs.size() << " use cases\n";
  }
  tool::write_manifest(dir, "select-usecases", cfg.effective(), {cfg.thesaurus, cfg.corpus});
  return 0;
}

int cmd_label(const Options& o, const std::string& usecases, const std::string& split, bool no_header) {
  auto cfg = resolve(o);
  cfg.validate(false);
  const auto thesaurus = Thesaurus::load(require(cfg.thesaurus, "--thesaurus"));
  const auto corpus = Corpus::load(require(cfg.corpus, "--corpus"));
  const auto ucs = read_use_cases(usecases);
  const int year = detail::common_year(ucs);
  std::vector<const Document*> docs;
  for (const auto& d : corpus.documents()) {
    if (split == "all" || (split == "dev" && d.year < year) || (split == "test" && d.year >= year)) docs.push_back(&d);
  }
  const Matcher matcher(build_all_dictionaries(ucs, thesaurus));
  const auto votes = label_documents(docs, ucs, thesaurus, matcher, cfg.threads);
  const auto dir = output_dir(cfg);
  {
    auto out = open_out(dir / "votes.tsv");
    votes.write_tsv(out, !no_header);
  }
  {
    auto out = open_out(dir / "votes.jsonl");
    votes.write_jsonl(out);
  }
  tool::write_manifest(dir, "label", cfg.effective(), {cfg.thesaurus, cfg.corpus, usecases});
  std::cerr << "labeled " << votes.rows().size() << " documents\n";
  return 0;
}

int cmd_combine(const Options& o, const std::string& votes_path) {
  auto cfg = resolve(o);
  const auto votes = read_votes(votes_path);
  if (cfg.lfs.size() < min_columns(cfg.method)) {
    throw ConfigError(std::string(to_string(cfg.method)) + " needs at least " + std::to_string(min_columns(cfg.method)) +
                      " labeling functions");
  }
  const auto enhanced = combine(VoteMatrix::from_table(votes, cfg.lfs), cfg.method);
  const auto dir = output_dir(cfg);
  {
    auto out = open_out(dir / "enhanced.jsonl");
    enhanced.write_jsonl(out);
  }
  tool::write_manifest(dir, "combine", cfg.effective(), {votes_path});
  return 0;
}

int cmd_search(const Options& o, const std::string& votes_path, const std::string& dataset_dir,
               const std::string& methods_arg) {
  auto cfg = resolve(o);
  const auto votes = read_votes(votes_path);
  const auto truth = LabeledDataset::load(require(dataset_dir, "--dataset"));
  std::vector<Method> methods;
  std::stringstream ss(methods_arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto m = parse_method(item);
    if (!m) throw ConfigError("unknown method \"" + item + "\"");
    methods.push_back(*m);
  }
  if (methods.empty()) throw ConfigError("--methods is empty");
  std::vector<Lf> lfs = o.lfs.empty() ? std::vector<Lf>(kAllLfs.begin(), kAllLfs.end()) : cfg.lfs;
  const auto rows = search_combinations(votes, truth, methods, lfs, cfg.threads);
  const auto dir = output_dir(cfg);
  write_text(dir / "combinations.tsv", combinations_tsv(rows));
  tool::write_manifest(dir, "search-combos", cfg.effective(), {votes_path, dataset_dir});
  return 0;
}

int cmd_build_dataset(const Options& o, const std::string& kind, const std::string& usecases, const std::string& weak_path) {
  auto cfg = resolve(o);
  const auto thesaurus = Thesaurus::load(require(cfg.thesaurus, "--thesaurus"));
  const auto corpus = Corpus::load(require(cfg.corpus, "--corpus"));
  const auto ucs = read_use_cases(usecases);
  LabeledDataset ds;
  std::vector<fs::path> inputs{cfg.thesaurus, cfg.corpus, usecases};
  if (kind == "test") {
    ds = build_test(ucs, corpus, thesaurus);
  } else {
    if (weak_path.empty()) throw ConfigError("--weak is required for a development dataset");
    const auto weak = read_enhanced(weak_path);
    ds = build_dev(ucs, corpus, thesaurus, weak.labels, weak.source);
    inputs.push_back(weak_path);
  }
  ds.thresholds = cfg.thresholds;
  const auto dir = output_dir(cfg);
  ds.save(dir);
  tool::write_manifest(dir, "build-dataset", cfg.effective(), inputs);
  std::cerr << kind << " dataset: " << ds.size() << " rows, " << ds.labels.size() << " labels\n";
  return 0;
}

int cmd_undersample(const Options& o, const std::string& dataset_dir, std::uint64_t seed) {
  auto cfg = resolve(o);
  if (!(cfg.balance_n >= 1)) throw ConfigError("balance_n must be >= 1");
  const auto ds = LabeledDataset::load(require(dataset_dir, "--dataset"));
  auto result = undersample(ds, BalanceConfig{cfg.balance_n, seed});
  const auto dir = output_dir(cfg);
  result.dataset.save(dir);
  tool::write_manifest(dir, "undersample", cfg.effective(), {dataset_dir});
  std::cerr << "removed " << result.removed.size() << " of " << result.negatives << " negatives\n";
  return 0;
}

int cmd_train_lr(const Options& o, const std::string& dev_dir, const std::string& test_dir) {
  auto cfg = resolve(o);
  cfg.validate(false);
  const auto dev = LabeledDataset::load(require(dev_dir, "--dev"));
  const auto test = LabeledDataset::load(require(test_dir, "--test"));
  std::optional<Corpus> corpus;
  std::vector<fs::path> inputs{dev_dir, test_dir};
  if (!cfg.corpus.empty()) {
    corpus = Corpus::load(require(cfg.corpus, "--corpus"));
    inputs.push_back(cfg.corpus);
  }
  const auto lr = run_lr(dev, test, corpus ? &*corpus : nullptr, cfg);
  const auto dir = output_dir(cfg);
  write_predictions_file(dir / "predictions.jsonl", lr.voted);
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    write_predictions_file(dir / ("predictions_seed" + std::to_string(cfg.seeds[s]) + ".jsonl"), lr.per_seed[s]);
  }
  write_models(dir / "models.jsonl", lr, cfg, dev.labels);
  tool::write_manifest(dir, "train-lr", cfg.effective(), inputs);
  return 0;
}

int cmd_evaluate(const Options& o, const std::string& predictions, const std::string& dataset_dir, const std::string& name,
                 bool no_filter) {
  auto cfg = resolve(o);
  const auto ds = LabeledDataset::load(require(dataset_dir, "--dataset"));
  const auto preds = load_predictions(require(predictions, "--predictions"));
  const auto result = score(preds, ds, ScoreOptions{!no_filter}, name);
  const auto dir = output_dir(cfg);
  open_out(dir / "eval.json") << eval_file_json(ds.year, result).dump(2) << '\n';
  tool::write_manifest(dir, "evaluate", cfg.effective(), {predictions, dataset_dir});
  std::cerr << name << ": maF1 " << format3(result.maF1) << " miF1 " << format3(result.miF1) << '\n';
  return 0;
}

int cmd_report(const Options& o, const std::vector<std::string>& evals) {
  auto cfg = resolve(o);
  if (evals.empty()) throw ConfigError("at least one --eval is required");
  std::map<int, ReportTable> by_year;
  std::vector<fs::path> inputs;
  for (const auto& e : evals) {
    auto [year, result] = read_eval(e);
    auto& t = by_year[year];
    t.title = std::to_string(year);
    t.results.push_back(std::move(result));
    inputs.emplace_back(e);
  }
  std::vector<ReportTable> tables;
  for (auto& [_, t] : by_year) tables.push_back(std::move(t));
  const auto dir = output_dir(cfg);
  write_report(dir, with_pooled_table(std::move(tables)));
  tool::write_manifest(dir, "report", cfg.effective(), inputs);
  return 0;
}

int cmd_compare(const Options& o, const std::string& a_path, const std::string& b_path, const std::string& alternative) {
  auto cfg = resolve(o);
  Alternative alt = Alternative::two_sided;
  if (alternative == "less") {
    alt = Alternative::less;
  } else if (alternative == "greater") {
    alt = Alternative::greater;
  } else if (alternative != "two-sided") {
    throw ConfigError("unknown alternative \"" + alternative + "\"");
  }
  const auto a = read_eval(a_path).second;
  const auto b = read_eval(b_path).second;
  const auto c = compare(a, b, alt);
  const auto dir = output_dir(cfg);
  nlohmann::ordered_json j{{"a", a.name},
                           {"b", b.name},
                           {"alternative", alternative},
                           {"labels", c.labels.size()},
                           {"n", c.test.n},
                           {"w_plus", c.test.w_plus},
                           {"w_minus", c.test.w_minus},
                           {"p_value", c.test.p_value},
                           {"exact", c.test.exact}};
  open_out(dir / "compare.json") << j.dump(2) << '\n';
  tool::write_manifest(dir, "compare", cfg.effective(), {a_path, b_path});
  return 0;
}

int cmd_pipeline(const Options& o) {
  auto cfg = resolve(o);
  cfg.validate();
  const auto thesaurus = Thesaurus::load(require(cfg.thesaurus, "--thesaurus"));
  const auto corpus = Corpus::load(require(cfg.corpus, "--corpus"));
  const auto result = run_pipeline(thesaurus, corpus, cfg);
  const auto dir = output_dir(cfg);
  for (const auto& run : result.years) {
    const auto ydir = dir / std::to_string(run.year);
    fs::create_directories(ydir);
    write_use_cases(ydir / "usecases.json", run.year, cfg.thresholds, run.use_cases);
    {
      auto out = open_out(ydir / "votes_dev.tsv");
      run.dev_votes.write_tsv(out);
    }
    {
      auto out = open_out(ydir / "votes_test.tsv");
      run.test_votes.write_tsv(out);
    }
    {
      auto out = open_out(ydir / "weak_labels.jsonl");
      run.weak.write_jsonl(out);
    }
    run.dev.save(ydir / "dataset_dev");
    run.test.save(ydir / "dataset_test");
    for (const char* sub : {"dataset_dev", "dataset_test"}) {
      tool::write_manifest(ydir / sub, "pipeline", cfg.effective(), {cfg.thesaurus, cfg.corpus});
    }
    write_predictions_file(ydir / "predictions_lr.jsonl", run.lr.voted);
    write_models(ydir / "models_lr.jsonl", run.lr, cfg, run.dev.labels);
    nlohmann::ordered_json evals = nlohmann::ordered_json::array();
    for (const auto& r : run.table.results) evals.push_back(eval_file_json(run.year, r));
    open_out(ydir / "eval.json") << evals.dump(2) << '\n';
    tool::write_manifest(ydir, "pipeline", cfg.effective(), {cfg.thesaurus, cfg.corpus});
    std::cerr << run.year << ": " << run.use_cases.size() << " use cases, dev " << run.dev.size() << ", test "
              << run.test.size() << '\n';
  }
  write_report(dir, result.tables);
  tool::write_manifest(dir, "pipeline", cfg.effective(), {cfg.thesaurus, cfg.corpus});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"granum: weak-supervision benchmark builder for fine-grained semantic indexing"};
  app.require_subcommand(1);
  Options o;

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus JSONL file and write a corpus store");
  add_common(ingest, o);
  add_data(ingest, o);

  auto* select = app.add_subcommand("select-usecases", "Select the evaluation use cases of a year");
  add_common(select, o);
  add_data(select, o);
  add_thresholds(select, o);
  select->add_option("--year", o.year, "Promotion year");
  select->add_option("--year-to", o.year_to, "Last year of a range starting at --year");

  std::string usecases, split = "all";
  bool no_header = false;
  auto* label = app.add_subcommand("label", "Apply the nine labeling functions");
  add_common(label, o);
  add_data(label, o);
  label->add_option("--usecases", usecases, "usecases.json from select-usecases")->required();
  label->add_option("--split", split, "Documents to label: dev (before the year), test (from the year on), all")
      ->check(CLI::IsMember({"dev", "test", "all"}));
  label->add_flag("--no-header", no_header, "Omit the votes.tsv header line");

  std::string votes_path;
  auto* comb = app.add_subcommand("combine", "Combine votes into enhanced weak labels");
  add_common(comb, o);
  comb->add_option("--votes", votes_path, "votes.tsv or votes.jsonl")->required();
  comb->add_option("--method", o.method, "mv, alo or lm");
  comb->add_option("--lfs", o.lfs, "Comma-separated labeling functions, e.g. CO,NL,SL");

  std::string dataset_dir, methods = "MV,ALO,LM";
  auto* search = app.add_subcommand("search-combos", "Score every labeling-function subset with every method");
  add_common(search, o);
  search->add_option("--votes", votes_path, "Votes of the test documents")->required();
  search->add_option("--dataset", dataset_dir, "Ground-truth dataset directory")->required();
  search->add_option("--methods", methods, "Comma-separated methods");
  search->add_option("--lfs", o.lfs, "Labeling functions to combine (default: all nine)");

  std::string kind = "dev", weak_path;
  auto* build = app.add_subcommand("build-dataset", "Assemble a development or test dataset");
  add_common(build, o);
  add_data(build, o);
  build->add_option("--kind", kind, "dev or test")->check(CLI::IsMember({"dev", "test"}));
  build->add_option("--usecases", usecases, "usecases.json")->required();
  build->add_option("--weak", weak_path, "enhanced.jsonl with the weak labels (dev only)");

  std::uint64_t seed = 11;
  auto* under = app.add_subcommand("undersample", "Undersample negative instances toward balance_n");
  add_common(under, o);
  under->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  under->add_option("--balance-n", o.balance_n, "Target negative-to-positive ratio");
  under->add_option("--seed", seed, "Random seed");

  std::string dev_dir, test_dir;
  auto* train = app.add_subcommand("train-lr", "Train the logistic regression baseline and predict the test set");
  add_common(train, o);
  train->add_option("--dev", dev_dir, "Development dataset directory")->required();
  train->add_option("--test", test_dir, "Test dataset directory")->required();
  train->add_option("--corpus", o.corpus, "Corpus providing concept occurrences for semantic features");
  train->add_option("--balance-n", o.balance_n, "Target negative-to-positive ratio");
  train->add_option("--seeds", o.seeds, "Comma-separated seeds");

  std::string predictions, name = "model";
  bool no_filter = false;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a dataset");
  add_common(evaluate, o);
  evaluate->add_option("--predictions", predictions, "Predictions JSONL")->required();
  evaluate->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  evaluate->add_option("--name", name, "Row name in reports");
  evaluate->add_flag("--no-validity-filter", no_filter, "Count every dataset document for every label");

  std::vector<std::string> evals;
  auto* report = app.add_subcommand("report", "Tabulate evaluation results (one table per year, plus pooled)");
  add_common(report, o);
  report->add_option("--eval", evals, "eval.json files")->required();

  std::string a_path, b_path, alternative = "two-sided";
  auto* cmp = app.add_subcommand("compare", "Wilcoxon signed-rank test on per-label F1 of two results");
  add_common(cmp, o);
  cmp->add_option("--a", a_path, "eval.json of the first model")->required();
  cmp->add_option("--b", b_path, "eval.json of the second model")->required();
  cmp->add_option("--alternative", alternative, "two-sided, less or greater");

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage for a year or year range");
  add_common(pipeline, o);
  add_data(pipeline, o);
  add_thresholds(pipeline, o);
  pipeline->add_option("--year", o.year, "Promotion year");
  pipeline->add_option("--year-to", o.year_to, "Last year of a range starting at --year");
  pipeline->add_option("--lfs", o.lfs, "Labeling functions for the weak labels");
  pipeline->add_option("--method", o.method, "Ensemble method for the weak labels");
  pipeline->add_option("--balance-n", o.balance_n, "Target negative-to-positive ratio");
  pipeline->add_option("--seeds", o.seeds, "Comma-separated seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) return cmd_ingest(o);
    if (*select) return cmd_select(o);
    if (*label) return cmd_label(o, usecases, split, no_header);
    if (*comb) return cmd_combine(o, votes_path);
    if (*search) return cmd_search(o, votes_path, dataset_dir, methods);
    if (*build) return cmd_build_dataset(o, kind, usecases, weak_path);
    if (*under) return cmd_undersample(o, dataset_dir, seed);
    if (*train) return cmd_train_lr(o, dev_dir, test_dir);
    if (*evaluate) return cmd_evaluate(o, predictions, dataset_dir, name, no_filter);
    if (*report) return cmd_report(o, evals);
    if (*cmp) return cmd_compare(o, a_path, b_path, alternative);
    if (*pipeline) return cmd_pipeline(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
