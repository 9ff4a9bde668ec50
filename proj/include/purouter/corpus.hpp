#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace purouter {

using TokenId = std::uint32_t;
using DomainIndex = std::size_t;

struct DomainRecord {
  std::string id;
  DomainIndex index = 0;
  std::vector<std::size_t> groups;
  std::vector<std::size_t> intents;
  std::vector<std::size_t> slot_types;
};

/// Domains able to serve the same utterances. A template token >= 0 is a
/// vocabulary index; a negative token -(s + 1) is a placeholder for slot type s.
struct CapabilityGroup {
  std::size_t id = 0;
  std::vector<DomainIndex> members;
  std::vector<std::size_t> member_intents;  // parallel to members
  std::vector<std::size_t> slot_types;
  std::vector<std::vector<std::int64_t>> templates;
  std::vector<TokenId> keywords;
};

class DomainCatalog {
 public:
  std::vector<DomainRecord> domains;
  std::vector<CapabilityGroup> groups;
  std::size_t n_intents = 0;
  std::size_t n_slot_types = 0;
  /// Vocabulary tokens usable as values of each slot type.
  std::vector<std::vector<TokenId>> slot_values;

  std::size_t n() const { return domains.size(); }
  /// The intent an intent classifier would attach to domain `d` by default.
  std::size_t primary_intent(DomainIndex d) const;
  void validate() const;
};

struct Vocabulary {
  std::vector<std::string> tokens;
  std::size_t size() const { return tokens.size(); }
};

enum class Polarity { kPositive, kNegative };

struct LogExample {
  std::string id;
  std::vector<TokenId> tokens;
  std::vector<DomainIndex> enabled;  // sorted, unique
  DomainIndex ground_truth = 0;
  Polarity polarity = Polarity::kPositive;
  /// Full oracle label set. Only evaluation code may read it.
  std::optional<std::vector<DomainIndex>> hidden;
  std::string response;

  void validate(std::size_t n_domains, std::size_t vocab_size) const;
};

/// Intent/slot evidence per (example, domain), produced at generation time by
/// the stand-in intent classifier and slot tagger.
struct FeatureRow {
  std::string id;
  std::vector<double> intent_scores;     // length n
  std::vector<double> slot_scores;       // length n
  std::vector<std::size_t> slot_types;   // slot types tagged in the utterance
};

struct Corpus {
  std::vector<LogExample> train_pos;
  std::vector<LogExample> train_neg;
  std::vector<LogExample> dev;
  std::vector<LogExample> test;
  std::unordered_map<std::string, FeatureRow> features;

  const FeatureRow& features_for(const std::string& id) const;
};

// File names inside a corpus directory.
inline constexpr const char* kCatalogFile = "catalog.json";
inline constexpr const char* kVocabFile = "vocab.json";
inline constexpr const char* kTrainPosFile = "train_pos.jsonl";
inline constexpr const char* kTrainNegFile = "train_neg.jsonl";
inline constexpr const char* kDevFile = "dev.jsonl";
inline constexpr const char* kTestFile = "test.jsonl";
inline constexpr const char* kFeaturesFile = "features.jsonl";

std::string example_to_json(const LogExample& ex);
LogExample example_from_json(const std::string& line);

std::string catalog_to_json(const DomainCatalog& catalog);
DomainCatalog catalog_from_json(const std::string& text);

std::string vocab_to_json(const Vocabulary& vocab);
Vocabulary vocab_from_json(const std::string& text);

std::string features_to_json(const FeatureRow& row);
FeatureRow features_from_json(const std::string& line);

void write_examples(const std::filesystem::path& path, const std::vector<LogExample>& examples);
std::vector<LogExample> read_examples(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void save_corpus(const std::filesystem::path& dir, const DomainCatalog& catalog, const Vocabulary& vocab,
                 const Corpus& corpus);
struct LoadedCorpus {
  DomainCatalog catalog;
  Vocabulary vocab;
  Corpus corpus;
};
LoadedCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace purouter
