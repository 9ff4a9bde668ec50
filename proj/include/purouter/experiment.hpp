#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "purouter/datagen.hpp"
#include "purouter/evaluation.hpp"
#include "purouter/trainer.hpp"

namespace purouter {

struct ExperimentPaths {
  std::filesystem::path corpus = "corpus";
  std::filesystem::path runs = "runs";
  /// Report stem; ".json" and ".txt" are appended.
  std::filesystem::path report = "report";
};

/// One config file: {"paths": {...}, "generate": {...}, "train": {...}}.
/// Every key is optional; unknown keys are a ConfigError naming the key.
struct ExperimentConfig {
  ExperimentPaths paths;
  GenConfig generate;
  TrainConfig train;
};

/// Relative paths are resolved against the config file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir);
/// Fully resolved config as pretty JSON, every key present.
std::string experiment_config_json(const ExperimentConfig& config);

/// The six ablation rows of the results table, in order.
const std::array<AblationFlags, 6>& table_rows();

// Artifact names inside runs/<variant>/.
inline constexpr const char* kShortlisterBest = "shortlister.best.ckpt";
inline constexpr const char* kShortlisterFinal = "shortlister.final.ckpt";
inline constexpr const char* kShortlisterSummary = "shortlister.json";
inline constexpr const char* kTrainLog = "train_log.jsonl";
inline constexpr const char* kPseudoExport = "pseudo_labels.jsonl";
inline constexpr const char* kRerankerCkpt = "reranker.ckpt";
inline constexpr const char* kRerankerLog = "reranker_log.jsonl";
inline constexpr const char* kRerankerSummary = "reranker.json";
inline constexpr const char* kRerankTraces = "rerank_traces.jsonl";

std::filesystem::path variant_dir(const ExperimentConfig& config, const AblationFlags& flags);

struct GenerateSummary {
  std::size_t train_pos = 0, train_neg = 0, dev = 0, test = 0;
};
/// Writes the corpus into paths.corpus, which must already exist.
GenerateSummary run_generate(const ExperimentConfig& config);

using Logger = std::function<void(const std::string&)>;

/// Shortlister training for one variant: checkpoints at every new best dev
/// epoch and at the end, per-epoch loss log and pseudo-label export.
TrainState run_shortlister_stage(const ExperimentConfig& config, const AblationFlags& flags,
                                 const Logger& log = {});

/// Reranker training on the variant's best shortlister and the pseudo labels
/// of the last shortlister epoch. Missing shortlister artifacts are a
/// DependencyError.
RerankerRun run_reranker_stage(const ExperimentConfig& config, const AblationFlags& flags, const Logger& log = {});

/// Pseudo sets of one epoch read back from an export file.
PseudoMap read_pseudo_export(const std::filesystem::path& path, int epoch);

/// Last shortlister epoch of a variant directory, whose pseudo labels feed the
/// reranker.
int final_pseudo_epoch(const std::filesystem::path& dir);

struct VariantMetrics {
  std::string variant;
  std::optional<std::size_t> row;  // 1-based table row
  PrfScores shortlister_at3;
  PrfScores shortlister_at1;
  double ndcg3 = 0.0;
  PrfScores reranker_at1;
  double pseudo_precision = 0.0;
  double pseudo_coverage = 0.0;
  std::size_t pseudo_labels = 0;
  double usable_without_pseudo = 0.0;
  double usable_with_pseudo = 0.0;
  int best_epoch = -1;
};

/// Test-set metrics for a trained variant directory.
VariantMetrics evaluate_variant(const ExperimentConfig& config, const LoadedCorpus& data,
                                const std::filesystem::path& dir);

struct Comparison {
  std::string run_a, run_b;
  McNemarResult mcnemar;
  std::size_t examples = 0;
};

/// McNemar on reranker top-1 correctness read from two trace files. The two
/// runs must cover the same example ids in the same order.
Comparison compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b);

struct EvalReport {
  std::vector<VariantMetrics> variants;
  std::vector<Comparison> comparisons;
};

std::string report_json(const ExperimentConfig& config, const EvalReport& report);
/// Fixed-width table, one line per variant in table-row order.
std::string report_text(const EvalReport& report);

}  // namespace purouter
