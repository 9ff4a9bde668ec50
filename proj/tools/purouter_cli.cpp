// purouter: corpus generation, staged training and evaluation.
//
// Exit codes: 0 success, 1 usage or config error, 2 I/O, dependency or input
// data error, 3 numeric failure or internal error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "purouter/errors.hpp"
#include "purouter/experiment.hpp"

namespace fs = std::filesystem;
using namespace purouter;

namespace {

void info(const std::string& line) { std::cerr << line << "\n"; }

fs::path resolve_run(const ExperimentConfig& cfg, const std::string& name) {
  if (fs::is_directory(name)) return fs::path(name);
  return cfg.paths.runs / name;
}

int generate(const ExperimentConfig& cfg) {
  const auto s = run_generate(cfg);
  std::cout << "wrote " << cfg.paths.corpus.string() << ": " << s.train_pos << " positive, " << s.train_neg
            << " negative, " << s.dev << " dev, " << s.test << " test examples\n";
  return 0;
}

int train(const ExperimentConfig& cfg, const std::string& stage, const std::vector<AblationFlags>& variants) {
  for (const auto& flags : variants) {
    info("== " + flags.variant_name());
    if (stage == "shortlister" || stage == "all") {
      const auto s = run_shortlister_stage(cfg, flags, info);
      std::cout << flags.variant_name() << ": shortlister best epoch " << s.best_epoch << ", dev F1@"
                << cfg.train.k << " " << s.best_dev << "\n";
    }
    if (stage == "reranker" || stage == "all") {
      const auto r = run_reranker_stage(cfg, flags, info);
      std::cout << flags.variant_name() << ": reranker best epoch " << r.best_epoch << ", usable fraction "
                << r.usable_fraction_without() << " -> " << r.usable_fraction_with() << "\n";
    }
  }
  return 0;
}

int eval(const ExperimentConfig& cfg, const std::vector<std::string>& compare) {
  EvalReport report;
  const LoadedCorpus data = load_corpus(cfg.paths.corpus);
  for (const auto& flags : table_rows()) {
    const fs::path dir = variant_dir(cfg, flags);
    if (fs::exists(dir / kRerankTraces)) report.variants.push_back(evaluate_variant(cfg, data, dir));
  }
  if (!compare.empty()) {
    report.comparisons.push_back(compare_runs(resolve_run(cfg, compare[0]), resolve_run(cfg, compare[1])));
  } else if (report.variants.empty()) {
    throw DependencyError("no trained variants under " + cfg.paths.runs.string() + " (run 'train' first)");
  }
  const fs::path stem = cfg.paths.report;
  if (!stem.parent_path().empty() && !fs::is_directory(stem.parent_path())) {
    throw IoError("report directory does not exist: " + stem.parent_path().string());
  }
  const std::string text = report_text(report);
  write_text(fs::path(stem.string() + ".json"), report_json(cfg, report));
  write_text(fs::path(stem.string() + ".txt"), text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label domain classification from positive and unlabeled logs"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "override generate.seed or train.seed for this command");

  auto* gen = app.add_subcommand("generate", "write a synthetic corpus into paths.corpus");

  auto* tr = app.add_subcommand("train", "train one or more variants");
  std::string stage = "all";
  tr->add_option("--stage", stage, "shortlister, reranker or all")
      ->check(CLI::IsMember({"shortlister", "reranker", "all"}));
  std::string ablation;
  bool all_rows = false;
  auto* abl = tr->add_option("--ablation", ablation, "comma-separated no-pseudo,no-neg-feed,no-self-dist or none");
  tr->add_flag("--all-rows", all_rows, "train every row of the results table")->excludes(abl);

  auto* ev = app.add_subcommand("eval", "evaluate trained variants on the test split");
  std::vector<std::string> compare;
  ev->add_option("--compare", compare, "McNemar test between two runs (variant names or directories)")
      ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (gen->parsed()) {
      if (seed) cfg.generate.seed = *seed;
      return generate(cfg);
    }
    if (seed) cfg.train.seed = *seed;
    if (tr->parsed()) {
      std::vector<AblationFlags> variants;
      if (all_rows) {
        variants.assign(table_rows().begin(), table_rows().end());
      } else {
        variants.push_back(ablation.empty() ? cfg.train.ablation : AblationFlags::parse(ablation));
      }
      return train(cfg, stage, variants);
    }
    return eval(cfg, compare);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DependencyError& e) {
    std::cerr << "missing dependency: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
