#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "purouter/datagen.hpp"
#include "purouter/trainer.hpp"

namespace fixture {

/// A corpus small enough to train in well under a second per epoch.
inline purouter::GenConfig tiny_gen(std::uint64_t seed = 3) {
  purouter::GenConfig g;
  g.n_domains = 6;
  g.n_groups = 4;
  g.overlap_rate = 0.5;
  g.n_positive = 120;
  g.n_negative = 16;
  g.n_dev = 40;
  g.n_test = 40;
  g.vocab_size = 200;
  g.n_slot_types = 3;
  g.slot_values_per_type = 4;
  g.n_function_words = 5;
  g.templates_per_group = 3;
  g.keywords_per_group = 4;
  g.shared_keywords = 1;
  g.shared_templates = 1;
  g.seed = seed;
  return g;
}

inline purouter::LoadedCorpus tiny_corpus(std::uint64_t seed = 3) {
  const auto g = tiny_gen(seed);
  auto gen = purouter::generate_catalog(g);
  auto corpus = purouter::generate_corpus(gen.catalog, gen.vocab, g);
  return {std::move(gen.catalog), std::move(gen.vocab), std::move(corpus)};
}

inline purouter::TrainConfig tiny_train() {
  purouter::TrainConfig c;
  c.embed = 4;
  c.hidden = 4;
  c.enable = 4;
  c.epochs = 3;
  c.batch_size = 16;
  c.optimizer = purouter::OptimizerKind::kAdam;
  c.learning_rate = 0.01;
  c.reranker_epochs = 2;
  c.reranker_learning_rate = 0.01;
  c.reranker_embed = 4;
  c.reranker_hidden = 4;
  return c;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("purouter_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
