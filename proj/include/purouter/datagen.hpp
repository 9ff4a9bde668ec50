#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "purouter/corpus.hpp"

namespace purouter {

struct GenConfig {
  std::size_t n_domains = 50;
  std::size_t n_groups = 30;
  double overlap_rate = 0.5;
  std::size_t n_positive = 20000;
  std::size_t n_negative = 3000;
  std::size_t n_dev = 4000;
  std::size_t n_test = 4000;
  std::size_t vocab_size = 5000;
  double noise_rate = 0.2;
  double enablement_density = 0.05;
  /// Enablement probability for the other members of the utterance's group.
  double group_enablement = 0.5;
  std::uint64_t seed = 7;

  std::size_t templates_per_group = 6;
  std::size_t keywords_per_group = 8;
  /// Keywords each group shares with its paired sibling group.
  std::size_t shared_keywords = 3;
  /// Templates each sibling pair holds in common, built from the shared keywords.
  std::size_t shared_templates = 1;
  std::size_t n_slot_types = 12;
  std::size_t slot_values_per_type = 20;
  std::size_t n_function_words = 30;

  void validate() const;
};

struct GeneratedCatalog {
  DomainCatalog catalog;
  Vocabulary vocab;
};

/// Domains, overlapping capability groups, templates and vocabulary.
GeneratedCatalog generate_catalog(const GenConfig& config);

/// Generation-time provenance of an utterance; never written to the corpus.
struct UtteranceSource {
  std::string id;
  std::size_t group = 0;
  std::vector<std::size_t> slot_types;
};

/// Stand-in intent classifier / slot tagger scores for `domain`:
/// Beta(8,2) draws when the domain belongs to the source group, Beta(2,8)
/// otherwise. Slot score is 0.5 when the domain shares no slot type with the
/// utterance. Deterministic in (seed, source.id, domain).
std::pair<double, double> synthetic_intent_slot_scores(const UtteranceSource& source, DomainIndex domain,
                                                       const DomainCatalog& catalog, std::uint64_t seed);

Corpus generate_corpus(const DomainCatalog& catalog, const Vocabulary& vocab, const GenConfig& config);

/// System response text; success and failure templates are disjoint so the
/// polarity can be recovered with classify_response.
std::string render_response(const LogExample& example, bool success, const DomainCatalog& catalog,
                            const Vocabulary& vocab);
std::optional<Polarity> classify_response(const std::string& response);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(const std::string& s);

}  // namespace purouter
