#include "purouter/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include "purouter/errors.hpp"

namespace purouter {
namespace {

using Rng = std::mt19937_64;

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool bernoulli(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

double beta_draw(Rng& rng, double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

std::size_t overlap_group_count(const GenConfig& c) {
  return static_cast<std::size_t>(std::llround(c.overlap_rate * static_cast<double>(c.n_groups)));
}

std::size_t reserved_tokens(const GenConfig& c) {
  return 1 + c.n_function_words + c.n_groups * c.keywords_per_group + c.n_slot_types * c.slot_values_per_type;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void GenConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(std::string(key) + " must be positive");
  };
  positive(n_domains, "n_domains");
  positive(n_groups, "n_groups");
  positive(n_positive, "n_positive");
  positive(n_dev, "n_dev");
  positive(n_test, "n_test");
  positive(vocab_size, "vocab_size");
  positive(templates_per_group, "templates_per_group");
  positive(keywords_per_group, "keywords_per_group");
  positive(n_slot_types, "n_slot_types");
  positive(slot_values_per_type, "slot_values_per_type");
  positive(n_function_words, "n_function_words");
  for (auto [v, key] : {std::pair{overlap_rate, "overlap_rate"}, std::pair{noise_rate, "noise_rate"},
                        std::pair{enablement_density, "enablement_density"},
                        std::pair{group_enablement, "group_enablement"}}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(key) + " must lie in [0, 1]");
  }
  if (shared_keywords >= keywords_per_group) throw ConfigError("shared_keywords must be < keywords_per_group");
  if (n_groups > n_domains) {
    throw ConfigError("n_groups (" + std::to_string(n_groups) + ") exceeds n_domains (" +
                      std::to_string(n_domains) + ")");
  }
  const std::size_t n_overlap = overlap_group_count(*this);
  const std::size_t n_single = n_groups - n_overlap;
  if (n_overlap > 0 && n_domains < 2) throw ConfigError("overlap groups need at least 2 domains");
  if (n_domains > n_single + 4 * n_overlap) {
    throw ConfigError("n_domains (" + std::to_string(n_domains) + ") cannot be covered by " +
                      std::to_string(n_single) + " singleton and " + std::to_string(n_overlap) +
                      " overlap groups of at most 4 members");
  }
  if (n_negative > 0 && n_overlap == 0 && n_domains < 2) throw ConfigError("negatives need at least 2 domains");
  if (reserved_tokens(*this) > vocab_size) {
    throw ConfigError("vocab_size " + std::to_string(vocab_size) + " is smaller than the " +
                      std::to_string(reserved_tokens(*this)) + " tokens the templates need");
  }
}

GeneratedCatalog generate_catalog(const GenConfig& config) {
  config.validate();
  Rng rng(mix64(config.seed ^ 0xca7a1097ULL));
  GeneratedCatalog out;
  auto& cat = out.catalog;
  auto& vocab = out.vocab.tokens;

  // vocabulary: <unk>, function words, group keywords, slot values, filler
  vocab.push_back("<unk>");
  std::vector<TokenId> function_words;
  for (std::size_t i = 0; i < config.n_function_words; ++i) {
    function_words.push_back(static_cast<TokenId>(vocab.size()));
    vocab.push_back(padded("fn", i, 2));
  }

  const std::size_t n_overlap = overlap_group_count(config);
  const std::size_t n_single = config.n_groups - n_overlap;

  // group membership
  std::vector<std::size_t> order(config.n_domains);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  cat.groups.resize(config.n_groups);
  for (std::size_t g = 0; g < config.n_groups; ++g) cat.groups[g].id = g;
  // groups [0, n_single) are singletons, the rest overlap groups
  for (std::size_t g = 0; g < n_single; ++g) cat.groups[g].members.push_back(order[g]);

  const std::size_t remaining = config.n_domains - n_single;
  std::vector<std::size_t> sizes(n_overlap);
  for (auto& s : sizes) s = 2 + uniform_index(rng, 3);
  auto capacity = [&] { return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}); };
  while (n_overlap > 0 && capacity() < remaining) {
    const std::size_t g = uniform_index(rng, n_overlap);
    if (sizes[g] < 4) ++sizes[g];
  }
  std::size_t next = n_single;
  for (std::size_t k = 0; k < n_overlap && next < config.n_domains; ++k) {
    cat.groups[n_single + k].members.push_back(order[next++]);
  }
  for (std::size_t k = 0; next < config.n_domains; k = (k + 1) % n_overlap) {
    if (cat.groups[n_single + k].members.size() < sizes[k]) cat.groups[n_single + k].members.push_back(order[next++]);
  }
  // top up overlap groups with domains that already serve another group
  for (std::size_t k = 0; k < n_overlap; ++k) {
    auto& members = cat.groups[n_single + k].members;
    while (members.size() < sizes[k]) {
      const std::size_t d = uniform_index(rng, config.n_domains);
      if (std::find(members.begin(), members.end(), d) == members.end()) members.push_back(d);
    }
  }
  for (auto& g : cat.groups) std::sort(g.members.begin(), g.members.end());

  // sibling pairs share part of their keyword pool
  std::vector<std::size_t> pairing(config.n_groups);
  std::iota(pairing.begin(), pairing.end(), std::size_t{0});
  std::shuffle(pairing.begin(), pairing.end(), rng);
  std::vector<std::size_t> sibling(config.n_groups);
  std::iota(sibling.begin(), sibling.end(), std::size_t{0});
  for (std::size_t i = 0; i + 1 < pairing.size(); i += 2) {
    sibling[pairing[i]] = pairing[i + 1];
    sibling[pairing[i + 1]] = pairing[i];
  }
  const std::size_t own = config.keywords_per_group - config.shared_keywords;
  for (std::size_t g = 0; g < config.n_groups; ++g) {
    auto& grp = cat.groups[g];
    for (std::size_t i = 0; i < own; ++i) {
      grp.keywords.push_back(static_cast<TokenId>(vocab.size()));
      vocab.push_back(padded("kw", g, 2) + "_" + std::to_string(i));
    }
  }
  for (std::size_t g = 0; g < config.n_groups; ++g) {
    const std::size_t s = sibling[g];
    if (s < g) continue;
    // an unpaired group (s == g) keeps the block to itself
    for (std::size_t i = 0; i < config.shared_keywords; ++i) {
      const auto tok = static_cast<TokenId>(vocab.size());
      vocab.push_back(padded("sh", g, 2) + "_" + std::to_string(i));
      cat.groups[g].keywords.push_back(tok);
      if (s != g) cat.groups[s].keywords.push_back(tok);
    }
  }

  // slot types and values
  cat.n_slot_types = config.n_slot_types;
  cat.slot_values.resize(config.n_slot_types);
  for (std::size_t s = 0; s < config.n_slot_types; ++s) {
    for (std::size_t i = 0; i < config.slot_values_per_type; ++i) {
      cat.slot_values[s].push_back(static_cast<TokenId>(vocab.size()));
      vocab.push_back(padded("slot", s, 2) + "_" + padded("v", i, 2));
    }
  }
  while (vocab.size() < config.vocab_size) vocab.push_back(padded("w", vocab.size(), 4));

  // templates: function word + keywords + optional slot placeholders
  for (auto& grp : cat.groups) {
    const std::size_t n_slots = uniform_index(rng, 3);
    std::set<std::size_t> types;
    while (types.size() < n_slots) types.insert(uniform_index(rng, config.n_slot_types));
    grp.slot_types.assign(types.begin(), types.end());
    for (std::size_t t = 0; t < config.templates_per_group; ++t) {
      std::vector<std::int64_t> tmpl;
      tmpl.push_back(function_words[uniform_index(rng, function_words.size())]);
      const std::size_t n_kw = 2 + uniform_index(rng, 3);
      for (std::size_t i = 0; i < n_kw; ++i) tmpl.push_back(grp.keywords[uniform_index(rng, grp.keywords.size())]);
      if (!grp.slot_types.empty() && bernoulli(rng, 0.7)) {
        const std::size_t st = grp.slot_types[uniform_index(rng, grp.slot_types.size())];
        tmpl.insert(tmpl.begin() + static_cast<std::ptrdiff_t>(1 + uniform_index(rng, tmpl.size())),
                    -static_cast<std::int64_t>(st) - 1);
      }
      grp.templates.push_back(std::move(tmpl));
    }
  }
  // sibling pairs also share whole slot-free templates over their common keywords
  for (std::size_t g = 0; g < config.n_groups; ++g) {
    const std::size_t s = sibling[g];
    if (s <= g || config.shared_keywords == 0) continue;
    const auto& own_kw = cat.groups[g].keywords;
    const std::vector<TokenId> common(own_kw.end() - static_cast<std::ptrdiff_t>(config.shared_keywords), own_kw.end());
    for (std::size_t t = 0; t < config.shared_templates; ++t) {
      std::vector<std::int64_t> tmpl;
      tmpl.push_back(function_words[uniform_index(rng, function_words.size())]);
      const std::size_t n_kw = 2 + uniform_index(rng, 2);
      for (std::size_t i = 0; i < n_kw; ++i) tmpl.push_back(common[uniform_index(rng, common.size())]);
      cat.groups[g].templates.push_back(tmpl);
      cat.groups[s].templates.push_back(std::move(tmpl));
    }
  }

  // domains, intents
  cat.domains.resize(config.n_domains);
  for (std::size_t d = 0; d < config.n_domains; ++d) {
    cat.domains[d].id = padded("Domain", d, 3);
    cat.domains[d].index = d;
  }
  std::size_t intent = 0;
  for (auto& grp : cat.groups) {
    for (auto m : grp.members) {
      grp.member_intents.push_back(intent);
      auto& dom = cat.domains[m];
      dom.groups.push_back(grp.id);
      dom.intents.push_back(intent);
      for (auto s : grp.slot_types) dom.slot_types.push_back(s);
      ++intent;
    }
  }
  cat.n_intents = intent;
  for (auto& dom : cat.domains) {
    std::sort(dom.slot_types.begin(), dom.slot_types.end());
    dom.slot_types.erase(std::unique(dom.slot_types.begin(), dom.slot_types.end()), dom.slot_types.end());
  }
  cat.validate();
  return out;
}

std::pair<double, double> synthetic_intent_slot_scores(const UtteranceSource& source, DomainIndex domain,
                                                       const DomainCatalog& catalog, std::uint64_t seed) {
  if (domain >= catalog.n()) throw InputError("synthetic scores: unknown domain " + std::to_string(domain));
  if (source.group >= catalog.groups.size()) throw InputError("synthetic scores: unknown group");
  const auto& members = catalog.groups[source.group].members;
  const bool match = std::find(members.begin(), members.end(), domain) != members.end();
  Rng rng(mix64(mix64(seed ^ 0x5c0e5ULL) ^ hash_string(source.id)) ^ mix64(domain + 1));
  const double a = match ? 8.0 : 2.0;
  const double b = match ? 2.0 : 8.0;
  const double intent = beta_draw(rng, a, b);
  const auto& dom_slots = catalog.domains[domain].slot_types;
  bool any_slot = false;
  for (auto s : source.slot_types) {
    if (std::binary_search(dom_slots.begin(), dom_slots.end(), s)) any_slot = true;
  }
  const double slot = any_slot ? beta_draw(rng, a, b) : 0.5;
  return {intent, slot};
}

namespace {

constexpr const char* kSuccessTemplates[] = {"Here comes a {value} sound", "OK, {domain} is on it",
                                             "{domain} says: all done"};
constexpr const char* kFailureTemplates[] = {"I don't know that one", "I don't know what sound a {value} makes",
                                             "Sorry, {domain} can't help with that", "Hmm, I'm not sure about that"};

std::string fill(std::string text, const std::string& key, const std::string& value) {
  const auto pos = text.find(key);
  if (pos != std::string::npos) text.replace(pos, key.size(), value);
  return text;
}

struct Rendered {
  std::vector<TokenId> tokens;
  std::vector<std::size_t> slot_types;
};

Rendered render_utterance(const CapabilityGroup& grp, const DomainCatalog& cat, const GenConfig& config,
                          Rng& rng) {
  const auto& tmpl = grp.templates[uniform_index(rng, grp.templates.size())];
  Rendered r;
  for (auto tok : tmpl) {
    if (tok < 0) {
      const auto st = static_cast<std::size_t>(-tok - 1);
      const auto& pool = cat.slot_values[st];
      r.tokens.push_back(pool[uniform_index(rng, pool.size())]);
      r.slot_types.push_back(st);
    } else {
      r.tokens.push_back(static_cast<TokenId>(tok));
    }
  }
  for (auto& t : r.tokens) {
    if (bernoulli(rng, config.noise_rate)) t = static_cast<TokenId>(uniform_index(rng, config.vocab_size));
  }
  std::sort(r.slot_types.begin(), r.slot_types.end());
  r.slot_types.erase(std::unique(r.slot_types.begin(), r.slot_types.end()), r.slot_types.end());
  return r;
}

// Alternatives to a domain the user already relies on are enabled more often
// than unrelated domains.
std::vector<DomainIndex> sample_enabled(DomainIndex always, const std::vector<DomainIndex>& related,
                                        const GenConfig& config, Rng& rng) {
  std::vector<DomainIndex> enabled;
  for (std::size_t d = 0; d < config.n_domains; ++d) {
    const bool near = std::find(related.begin(), related.end(), d) != related.end();
    if (d == always || bernoulli(rng, near ? config.group_enablement : config.enablement_density)) enabled.push_back(d);
  }
  return enabled;
}

}  // namespace

std::string render_response(const LogExample& example, bool success, const DomainCatalog& catalog,
                            const Vocabulary& vocab) {
  const std::uint64_t h = mix64(hash_string(example.id));
  const std::string domain = example.ground_truth < catalog.n() ? catalog.domains[example.ground_truth].id : "it";
  std::string value = "thing";
  if (!example.tokens.empty() && example.tokens.back() < vocab.size()) value = vocab.tokens[example.tokens.back()];
  std::string text = success ? kSuccessTemplates[h % std::size(kSuccessTemplates)]
                             : kFailureTemplates[h % std::size(kFailureTemplates)];
  text = fill(text, "{domain}", domain);
  text = fill(text, "{value}", value);
  return text;
}

std::optional<Polarity> classify_response(const std::string& response) {
  static const std::vector<std::regex> failure = {
      std::regex(R"(I don't know that one)"), std::regex(R"(I don't know what sound a \S+ makes)"),
      std::regex(R"(Sorry, \S+ can't help with that)"), std::regex(R"(Hmm, I'm not sure about that)")};
  static const std::vector<std::regex> success = {std::regex(R"(Here comes a \S+ sound)"),
                                                  std::regex(R"(OK, \S+ is on it)"),
                                                  std::regex(R"(\S+ says: all done)")};
  for (const auto& re : failure) {
    if (std::regex_match(response, re)) return Polarity::kNegative;
  }
  for (const auto& re : success) {
    if (std::regex_match(response, re)) return Polarity::kPositive;
  }
  return std::nullopt;
}

Corpus generate_corpus(const DomainCatalog& catalog, const Vocabulary& vocab, const GenConfig& config) {
  config.validate();
  catalog.validate();
  if (catalog.n() != config.n_domains) throw ConfigError("catalog size does not match n_domains");
  Rng rng(mix64(config.seed ^ 0xc0a9a5ULL));
  Corpus corpus;

  auto make_positive = [&](const std::string& id) {
    const auto& grp = catalog.groups[uniform_index(rng, catalog.groups.size())];
    Rendered r = render_utterance(grp, catalog, config, rng);
    LogExample ex;
    ex.id = id;
    ex.tokens = std::move(r.tokens);
    ex.hidden = grp.members;
    ex.ground_truth = grp.members[uniform_index(rng, grp.members.size())];
    ex.polarity = Polarity::kPositive;
    ex.enabled = sample_enabled(ex.ground_truth, grp.members, config, rng);
    ex.response = render_response(ex, true, catalog, vocab);

    FeatureRow row;
    row.id = id;
    row.slot_types = r.slot_types;
    const UtteranceSource src{id, grp.id, r.slot_types};
    row.intent_scores.resize(catalog.n());
    row.slot_scores.resize(catalog.n());
    for (std::size_t d = 0; d < catalog.n(); ++d) {
      std::tie(row.intent_scores[d], row.slot_scores[d]) = synthetic_intent_slot_scores(src, d, catalog, config.seed);
    }
    corpus.features.emplace(id, std::move(row));
    return ex;
  };

  // Sibling lookup for plausible routing failures.
  std::vector<std::size_t> sibling(catalog.groups.size());
  for (std::size_t g = 0; g < catalog.groups.size(); ++g) {
    sibling[g] = g;
    const auto& kw = catalog.groups[g].keywords;
    for (std::size_t h = 0; h < catalog.groups.size() && sibling[g] == g; ++h) {
      if (h == g) continue;
      for (auto t : catalog.groups[h].keywords) {
        if (std::find(kw.begin(), kw.end(), t) != kw.end()) {
          sibling[g] = h;
          break;
        }
      }
    }
  }

  auto make_negative = [&](const std::string& id) {
    const auto& grp = catalog.groups[uniform_index(rng, catalog.groups.size())];
    Rendered r = render_utterance(grp, catalog, config, rng);
    std::vector<DomainIndex> outside;
    for (auto d : catalog.groups[sibling[grp.id]].members) {
      if (std::find(grp.members.begin(), grp.members.end(), d) == grp.members.end()) outside.push_back(d);
    }
    if (outside.empty()) {
      for (std::size_t d = 0; d < catalog.n(); ++d) {
        if (std::find(grp.members.begin(), grp.members.end(), d) == grp.members.end()) outside.push_back(d);
      }
    }
    if (outside.empty()) throw ConfigError("negative example needs a domain outside its group");
    LogExample ex;
    ex.id = id;
    ex.tokens = std::move(r.tokens);
    ex.hidden = grp.members;
    ex.ground_truth = outside[uniform_index(rng, outside.size())];
    ex.polarity = Polarity::kNegative;
    ex.enabled = sample_enabled(ex.ground_truth, grp.members, config, rng);
    ex.response = render_response(ex, false, catalog, vocab);
    return ex;
  };

  for (std::size_t i = 0; i < config.n_positive; ++i) corpus.train_pos.push_back(make_positive(padded("pos-", i, 6)));
  for (std::size_t i = 0; i < config.n_negative; ++i) corpus.train_neg.push_back(make_negative(padded("neg-", i, 6)));
  for (std::size_t i = 0; i < config.n_dev; ++i) corpus.dev.push_back(make_positive(padded("dev-", i, 6)));
  for (std::size_t i = 0; i < config.n_test; ++i) corpus.test.push_back(make_positive(padded("test-", i, 6)));
  return corpus;
}

}  // namespace purouter
