#include "purouter/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "purouter/errors.hpp"

namespace purouter {
namespace {

using ojson = nlohmann::ordered_json;

std::string polarity_name(Polarity p) { return p == Polarity::kPositive ? "pos" : "neg"; }

Polarity parse_polarity(const std::string& s) {
  if (s == "pos") return Polarity::kPositive;
  if (s == "neg") return Polarity::kNegative;
  throw InputError("polarity must be \"pos\" or \"neg\", got \"" + s + "\"");
}

template <typename F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

}  // namespace

std::size_t DomainCatalog::primary_intent(DomainIndex d) const {
  const auto& intents = domains.at(d).intents;
  if (intents.empty()) throw InvariantError("domain " + domains.at(d).id + " has no intents");
  return intents.front();
}

void DomainCatalog::validate() const {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const auto& d = domains[i];
    if (d.index != i) throw InvariantError("domain " + d.id + " has index " + std::to_string(d.index) +
                                           " at position " + std::to_string(i));
    if (!ids.insert(d.id).second) throw InvariantError("duplicate domain id " + d.id);
    for (auto g : d.groups) {
      if (g >= groups.size()) throw InvariantError("domain " + d.id + " references missing group " +
                                                   std::to_string(g));
    }
    for (auto it : d.intents) {
      if (it >= n_intents) throw InvariantError("domain " + d.id + " references missing intent");
    }
    for (auto s : d.slot_types) {
      if (s >= n_slot_types) throw InvariantError("domain " + d.id + " references missing slot type");
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& grp = groups[g];
    if (grp.id != g) throw InvariantError("group id mismatch at " + std::to_string(g));
    if (grp.members.empty()) throw InvariantError("group " + std::to_string(g) + " has no members");
    if (grp.member_intents.size() != grp.members.size()) {
      throw InvariantError("group " + std::to_string(g) + " intent list does not match members");
    }
    for (auto m : grp.members) {
      if (m >= domains.size()) throw InvariantError("group " + std::to_string(g) + " references missing domain");
    }
  }
  if (slot_values.size() != n_slot_types) throw InvariantError("slot value pools do not match slot types");
}

void LogExample::validate(std::size_t n_domains, std::size_t vocab_size) const {
  if (tokens.empty()) throw InputError("example " + id + " has no tokens");
  for (auto t : tokens) {
    if (t >= vocab_size) throw InputError("example " + id + " token " + std::to_string(t) + " out of vocabulary");
  }
  if (ground_truth >= n_domains) throw InputError("example " + id + " ground truth out of range");
  for (auto d : enabled) {
    if (d >= n_domains) throw InputError("example " + id + " enables unknown domain " + std::to_string(d));
  }
  if (hidden && polarity == Polarity::kPositive &&
      std::find(hidden->begin(), hidden->end(), ground_truth) == hidden->end()) {
    throw InvariantError("example " + id + " hidden labels miss the ground truth");
  }
}

const FeatureRow& Corpus::features_for(const std::string& id) const {
  const auto it = features.find(id);
  if (it == features.end()) throw DependencyError("no intent/slot features for example " + id);
  return it->second;
}

std::string example_to_json(const LogExample& ex) {
  ojson j;
  j["id"] = ex.id;
  j["tokens"] = ex.tokens;
  j["enabled"] = ex.enabled;
  j["ground_truth"] = ex.ground_truth;
  j["polarity"] = polarity_name(ex.polarity);
  if (ex.hidden) j["hidden"] = *ex.hidden;
  j["response"] = ex.response;
  return j.dump();
}

LogExample example_from_json(const std::string& line) {
  return guarded("example", [&] {
    const auto j = nlohmann::json::parse(line);
    LogExample ex;
    ex.id = j.at("id").get<std::string>();
    ex.tokens = j.at("tokens").get<std::vector<TokenId>>();
    ex.enabled = j.at("enabled").get<std::vector<DomainIndex>>();
    ex.ground_truth = j.at("ground_truth").get<DomainIndex>();
    ex.polarity = parse_polarity(j.at("polarity").get<std::string>());
    if (j.contains("hidden")) ex.hidden = j.at("hidden").get<std::vector<DomainIndex>>();
    ex.response = j.value("response", std::string());
    return ex;
  });
}

std::string catalog_to_json(const DomainCatalog& catalog) {
  ojson j;
  j["n"] = catalog.n();
  j["n_intents"] = catalog.n_intents;
  j["n_slot_types"] = catalog.n_slot_types;
  ojson domains = ojson::array();
  for (const auto& d : catalog.domains) {
    ojson dj;
    dj["id"] = d.id;
    dj["index"] = d.index;
    dj["groups"] = d.groups;
    dj["intents"] = d.intents;
    dj["slot_types"] = d.slot_types;
    domains.push_back(std::move(dj));
  }
  j["domains"] = std::move(domains);
  ojson groups = ojson::array();
  for (const auto& g : catalog.groups) {
    ojson gj;
    gj["id"] = g.id;
    gj["members"] = g.members;
    gj["member_intents"] = g.member_intents;
    gj["slot_types"] = g.slot_types;
    gj["keywords"] = g.keywords;
    gj["templates"] = g.templates;
    groups.push_back(std::move(gj));
  }
  j["groups"] = std::move(groups);
  j["slot_values"] = catalog.slot_values;
  return j.dump(1);
}

DomainCatalog catalog_from_json(const std::string& text) {
  return guarded("catalog", [&] {
    const auto j = nlohmann::json::parse(text);
    DomainCatalog c;
    c.n_intents = j.at("n_intents").get<std::size_t>();
    c.n_slot_types = j.at("n_slot_types").get<std::size_t>();
    for (const auto& dj : j.at("domains")) {
      DomainRecord d;
      d.id = dj.at("id").get<std::string>();
      d.index = dj.at("index").get<DomainIndex>();
      d.groups = dj.at("groups").get<std::vector<std::size_t>>();
      d.intents = dj.at("intents").get<std::vector<std::size_t>>();
      d.slot_types = dj.at("slot_types").get<std::vector<std::size_t>>();
      c.domains.push_back(std::move(d));
    }
    for (const auto& gj : j.at("groups")) {
      CapabilityGroup g;
      g.id = gj.at("id").get<std::size_t>();
      g.members = gj.at("members").get<std::vector<DomainIndex>>();
      g.member_intents = gj.at("member_intents").get<std::vector<std::size_t>>();
      g.slot_types = gj.at("slot_types").get<std::vector<std::size_t>>();
      g.keywords = gj.at("keywords").get<std::vector<TokenId>>();
      g.templates = gj.at("templates").get<std::vector<std::vector<std::int64_t>>>();
      c.groups.push_back(std::move(g));
    }
    c.slot_values = j.at("slot_values").get<std::vector<std::vector<TokenId>>>();
    if (j.at("n").get<std::size_t>() != c.n()) throw InvariantError("catalog n does not match domain list");
    c.validate();
    return c;
  });
}

std::string vocab_to_json(const Vocabulary& vocab) {
  ojson j;
  j["tokens"] = vocab.tokens;
  return j.dump(1);
}

Vocabulary vocab_from_json(const std::string& text) {
  return guarded("vocab", [&] {
    const auto j = nlohmann::json::parse(text);
    return Vocabulary{j.at("tokens").get<std::vector<std::string>>()};
  });
}

std::string features_to_json(const FeatureRow& row) {
  ojson j;
  j["id"] = row.id;
  j["intent"] = row.intent_scores;
  j["slot"] = row.slot_scores;
  j["slot_types"] = row.slot_types;
  return j.dump();
}

FeatureRow features_from_json(const std::string& line) {
  return guarded("features", [&] {
    const auto j = nlohmann::json::parse(line);
    FeatureRow r;
    r.id = j.at("id").get<std::string>();
    r.intent_scores = j.at("intent").get<std::vector<double>>();
    r.slot_scores = j.at("slot").get<std::vector<double>>();
    r.slot_types = j.at("slot_types").get<std::vector<std::size_t>>();
    return r;
  });
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_examples(const std::filesystem::path& path, const std::vector<LogExample>& examples) {
  std::string text;
  for (const auto& ex : examples) {
    text += example_to_json(ex);
    text += '\n';
  }
  write_text(path, text);
}

std::vector<LogExample> read_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<LogExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(example_from_json(line));
  }
  return out;
}

void save_corpus(const std::filesystem::path& dir, const DomainCatalog& catalog, const Vocabulary& vocab,
                 const Corpus& corpus) {
  write_text(dir / kCatalogFile, catalog_to_json(catalog));
  write_text(dir / kVocabFile, vocab_to_json(vocab));
  write_examples(dir / kTrainPosFile, corpus.train_pos);
  write_examples(dir / kTrainNegFile, corpus.train_neg);
  write_examples(dir / kDevFile, corpus.dev);
  write_examples(dir / kTestFile, corpus.test);

  // stable order: the order examples appear in the split files
  std::string text;
  for (const auto* split : {&corpus.train_pos, &corpus.dev, &corpus.test}) {
    for (const auto& ex : *split) {
      const auto it = corpus.features.find(ex.id);
      if (it == corpus.features.end()) continue;
      text += features_to_json(it->second);
      text += '\n';
    }
  }
  write_text(dir / kFeaturesFile, text);
}

LoadedCorpus load_corpus(const std::filesystem::path& dir) {
  std::vector<std::string> missing;
  for (const char* f : {kCatalogFile, kVocabFile, kTrainPosFile, kTrainNegFile, kDevFile, kTestFile, kFeaturesFile}) {
    if (!std::filesystem::exists(dir / f)) missing.push_back((dir / f).string());
  }
  if (!missing.empty()) {
    std::string msg = "missing corpus files:";
    for (const auto& m : missing) msg += " " + m;
    throw DependencyError(msg);
  }
  LoadedCorpus lc;
  lc.catalog = catalog_from_json(read_text(dir / kCatalogFile));
  lc.vocab = vocab_from_json(read_text(dir / kVocabFile));
  lc.corpus.train_pos = read_examples(dir / kTrainPosFile);
  lc.corpus.train_neg = read_examples(dir / kTrainNegFile);
  lc.corpus.dev = read_examples(dir / kDevFile);
  lc.corpus.test = read_examples(dir / kTestFile);
  std::ifstream in(dir / kFeaturesFile);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = features_from_json(line);
    std::string id = row.id;
    lc.corpus.features.emplace(std::move(id), std::move(row));
  }
  for (const auto* split : {&lc.corpus.train_pos, &lc.corpus.train_neg, &lc.corpus.dev, &lc.corpus.test}) {
    for (const auto& ex : *split) ex.validate(lc.catalog.n(), lc.vocab.size());
  }
  return lc;
}

}  // namespace purouter
