#include "purouter/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "purouter/checkpoint.hpp"
#include "purouter/errors.hpp"

namespace purouter {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads each known key of one config section and rejects the rest.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    node_ = &root.at(name);
    if (!node_->is_object()) throw ConfigError("config section '" + name + "' must be an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    known_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) return;
    const json& v = node_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type: " + v.dump());
    }
  }

  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, _] : node_->items()) {
      if (!known_.count(key)) throw ConfigError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> known_;
};

// Both directions of the config schema go through one visitor so the key
// lists cannot drift apart.
template <typename V>
void visit_generate(V&& v, GenConfig& g) {
  v("n_domains", g.n_domains);
  v("n_groups", g.n_groups);
  v("overlap_rate", g.overlap_rate);
  v("n_positive", g.n_positive);
  v("n_negative", g.n_negative);
  v("n_dev", g.n_dev);
  v("n_test", g.n_test);
  v("vocab_size", g.vocab_size);
  v("noise_rate", g.noise_rate);
  v("enablement_density", g.enablement_density);
  v("group_enablement", g.group_enablement);
  v("seed", g.seed);
  v("templates_per_group", g.templates_per_group);
  v("keywords_per_group", g.keywords_per_group);
  v("shared_keywords", g.shared_keywords);
  v("shared_templates", g.shared_templates);
  v("n_slot_types", g.n_slot_types);
  v("slot_values_per_type", g.slot_values_per_type);
  v("n_function_words", g.n_function_words);
}

template <typename V>
void visit_train(V&& v, TrainConfig& c) {
  v("max_pseudo_labels", c.pseudo.max_labels);
  v("required_streak", c.pseudo.required_streak);
  v("persistent_pseudo_labels", c.pseudo.persistent);
  v("beta", c.weights.beta);
  v("distill_temperature", c.weights.distill_temperature);
  v("alpha_base", c.weights.alpha_base);
  v("margin", c.margin);
  v("k", c.k);
  v("epochs", c.epochs);
  v("learning_rate", c.learning_rate);
  v("batch_size", c.batch_size);
  v("seed", c.seed);
  v("momentum", c.momentum);
  v("init_range", c.init_range);
  v("embed", c.embed);
  v("hidden", c.hidden);
  v("enable", c.enable);
  v("reranker_epochs", c.reranker_epochs);
  v("reranker_learning_rate", c.reranker_learning_rate);
  v("reranker_embed", c.reranker_embed);
  v("reranker_hidden", c.reranker_hidden);
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> rows;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

void require_artifacts(const fs::path& dir, std::initializer_list<const char*> names, const std::string& stage) {
  std::vector<std::string> missing;
  for (const char* n : names) {
    if (!fs::exists(dir / n)) missing.push_back((dir / n).string());
  }
  if (missing.empty()) return;
  std::string msg = stage + " needs artifacts that do not exist:";
  for (const auto& m : missing) msg += "\n  " + m;
  throw DependencyError(msg);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

json hypothesis_json(const Hypothesis& h, double score) {
  return {{"domain", h.domain},       {"ss", h.shortlister_score}, {"is", h.intent_score},
          {"vs", h.slot_score},       {"intent", h.intent},        {"slots", h.matched_slots},
          {"score", score}};
}

json prf_json(const PrfScores& s) { return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}}; }

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : root.items()) {
    if (key != "paths" && key != "generate" && key != "train") throw ConfigError("unknown config key '" + key + "'");
  }

  ExperimentConfig cfg;
  Section paths(root, "paths");
  std::string corpus = cfg.paths.corpus.string(), runs = cfg.paths.runs.string(), report = cfg.paths.report.string();
  paths.read("corpus", corpus);
  paths.read("runs", runs);
  paths.read("report", report);
  paths.finish();
  cfg.paths.corpus = resolve(base_dir, corpus).lexically_normal();
  cfg.paths.runs = resolve(base_dir, runs).lexically_normal();
  cfg.paths.report = resolve(base_dir, report).lexically_normal();

  Section gen(root, "generate");
  visit_generate([&](const char* k, auto& field) { gen.read(k, field); }, cfg.generate);
  gen.finish();

  Section train(root, "train");
  visit_train([&](const char* k, auto& field) { train.read(k, field); }, cfg.train);
  std::string optimizer = optimizer_name(cfg.train.optimizer);
  std::string ablation = "none";
  std::string hinge = hinge_name(cfg.train.reranker_hinge);
  train.read("optimizer", optimizer);
  train.read("reranker_hinge", hinge);
  train.read("ablation", ablation);
  train.finish();
  cfg.train.optimizer = parse_optimizer(optimizer);
  cfg.train.reranker_hinge = parse_hinge(hinge);
  try {
    cfg.train.ablation = AblationFlags::parse(ablation);
  } catch (const UsageError& e) {
    throw ConfigError(std::string("config key 'train.ablation': ") + e.what());
  }

  cfg.generate.validate();
  cfg.train.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(text, fs::absolute(path).parent_path());
}

std::string experiment_config_json(const ExperimentConfig& config) {
  json root;
  root["paths"] = {{"corpus", config.paths.corpus.string()},
                   {"runs", config.paths.runs.string()},
                   {"report", config.paths.report.string()}};
  GenConfig g = config.generate;
  TrainConfig t = config.train;
  json gen = json::object(), train = json::object();
  visit_generate([&](const char* k, auto& field) { gen[k] = field; }, g);
  visit_train([&](const char* k, auto& field) { train[k] = field; }, t);
  train["optimizer"] = optimizer_name(t.optimizer);
  train["reranker_hinge"] = hinge_name(t.reranker_hinge);
  std::string ablation;
  if (!t.ablation.use_pseudo) ablation += "no-pseudo,";
  if (!t.ablation.use_neg_feed) ablation += "no-neg-feed,";
  if (!t.ablation.use_self_dist) ablation += "no-self-dist,";
  train["ablation"] = ablation.empty() ? "none" : ablation.substr(0, ablation.size() - 1);
  root["generate"] = gen;
  root["train"] = train;
  return root.dump(2);
}

const std::array<AblationFlags, 6>& table_rows() {
  static const std::array<AblationFlags, 6> rows{
      AblationFlags{false, false, false}, AblationFlags{true, false, false}, AblationFlags{false, true, false},
      AblationFlags{false, true, true},   AblationFlags{true, true, false},  AblationFlags{true, true, true}};
  return rows;
}

fs::path variant_dir(const ExperimentConfig& config, const AblationFlags& flags) {
  return config.paths.runs / flags.variant_name();
}

GenerateSummary run_generate(const ExperimentConfig& config) {
  const fs::path& dir = config.paths.corpus;
  if (!fs::is_directory(dir)) throw IoError("output directory does not exist: " + dir.string());
  const auto gen = generate_catalog(config.generate);
  const Corpus corpus = generate_corpus(gen.catalog, gen.vocab, config.generate);
  save_corpus(dir, gen.catalog, gen.vocab, corpus);
  return {corpus.train_pos.size(), corpus.train_neg.size(), corpus.dev.size(), corpus.test.size()};
}

TrainState run_shortlister_stage(const ExperimentConfig& config, const AblationFlags& flags, const Logger& log) {
  const LoadedCorpus data = load_corpus(config.paths.corpus);
  TrainConfig train = config.train;
  train.ablation = flags;
  const fs::path dir = variant_dir(config, flags);
  ensure_dir(dir);

  std::vector<json> epochs;
  std::vector<json> pseudo_rows;
  ShortlisterHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r, const TrainState& s) {
    epochs.push_back({{"epoch", r.epoch},
                      {"L_b", r.mean.base},
                      {"L_d", r.mean.pseudo},
                      {"L_s", r.mean.distill},
                      {"L_n", r.mean.negative},
                      {"alpha", r.alpha},
                      {"combined", r.combined},
                      {"dev_f1", r.dev_f1},
                      {"pseudo_examples", r.pseudo_examples},
                      {"pseudo_labels", r.pseudo_labels},
                      {"teacher_epoch", r.teacher_used ? json(r.teacher_epoch) : json(nullptr)},
                      {"seconds", r.seconds}});
    if (flags.use_pseudo) {
      for (const auto& ex : data.corpus.train_pos) {
        const auto& p = s.labeler.pseudo_labels(ex.id);
        if (!p.empty()) pseudo_rows.push_back({{"example_id", ex.id}, {"epoch", r.epoch}, {"pseudo", p}});
      }
    }
    if (s.best_epoch == r.epoch) {
      char name[48];
      std::snprintf(name, sizeof name, "shortlister.epoch%03d.ckpt", r.epoch);
      nn::save_checkpoint(s.best_params, dir / name);
      nn::save_checkpoint(s.best_params, dir / kShortlisterBest);
    }
    // logs are rewritten every epoch so an interrupted run keeps its history
    write_text(dir / kTrainLog, jsonl(epochs));
    if (log) {
      char line[200];
      std::snprintf(line, sizeof line, "epoch %2d  combined %.5f  L_b %.5f  dev F1@3 %.4f  pseudo %zu/%zu%s", r.epoch,
                    r.combined, r.mean.base, r.dev_f1, r.pseudo_examples, r.pseudo_labels,
                    s.best_epoch == r.epoch ? "  *best" : "");
      log(line);
    }
  };

  TrainState state = train_shortlister(data, train, hooks);
  nn::save_checkpoint(state.model.params(), dir / kShortlisterFinal);
  write_text(dir / kPseudoExport, jsonl(pseudo_rows));
  const json summary{{"variant", flags.variant_name()},
                     {"best_epoch", state.best_epoch},
                     {"best_dev_f1", state.best_dev},
                     {"epochs", state.history.size()}};
  write_text(dir / kShortlisterSummary, summary.dump(2) + "\n");
  return state;
}

PseudoMap read_pseudo_export(const fs::path& path, int epoch) {
  PseudoMap out;
  for (const auto& row : read_jsonl(path)) {
    try {
      if (row.at("epoch").get<int>() != epoch) continue;
      out[row.at("example_id").get<std::string>()] = row.at("pseudo").get<std::vector<DomainIndex>>();
    } catch (const json::exception& e) {
      throw IoError("bad pseudo-label row in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

namespace {

int read_best_epoch(const fs::path& dir) {
  const json s = read_json_file(dir / kShortlisterSummary);
  if (!s.contains("best_epoch") || !s["best_epoch"].is_number_integer()) {
    throw IoError("no best_epoch in " + (dir / kShortlisterSummary).string());
  }
  return s["best_epoch"].get<int>();
}

}  // namespace

int final_pseudo_epoch(const fs::path& dir) {
  const json s = read_json_file(dir / kShortlisterSummary);
  if (!s.contains("epochs") || !s["epochs"].is_number_integer() || s["epochs"].get<int>() < 1) {
    throw IoError("no epoch count in " + (dir / kShortlisterSummary).string());
  }
  return s["epochs"].get<int>() - 1;
}

namespace {

Shortlister load_best_shortlister(const LoadedCorpus& data, const TrainConfig& train, const fs::path& dir) {
  return Shortlister(shortlister_dims(data, train), nn::load_checkpoint(dir / kShortlisterBest));
}

}  // namespace

RerankerRun run_reranker_stage(const ExperimentConfig& config, const AblationFlags& flags, const Logger& log) {
  const fs::path dir = variant_dir(config, flags);
  require_artifacts(dir, {kShortlisterBest, kShortlisterSummary, kPseudoExport}, "reranker training");
  const LoadedCorpus data = load_corpus(config.paths.corpus);
  TrainConfig train = config.train;
  train.ablation = flags;

  const Shortlister shortlister = load_best_shortlister(data, train, dir);
  const PseudoMap pseudo =
      flags.use_pseudo ? read_pseudo_export(dir / kPseudoExport, final_pseudo_epoch(dir)) : PseudoMap{};

  RerankerRun run = train_reranker(data, shortlister, pseudo, train);
  const Reranker best(run.model.dims(), run.best_params, train.margin);
  nn::save_checkpoint(run.best_params, dir / kRerankerCkpt);

  std::vector<json> rows;
  for (const auto& r : run.history) rows.push_back({{"epoch", r.epoch}, {"hinge", r.loss}, {"dev_f1", r.dev_f1}});
  write_text(dir / kRerankerLog, jsonl(rows));
  const json summary{{"best_epoch", run.best_epoch},
                     {"examples", run.total},
                     {"usable_without_pseudo", run.usable_without_pseudo},
                     {"usable_with_pseudo", run.usable_with_pseudo},
                     {"usable_fraction_without_pseudo", run.usable_fraction_without()},
                     {"usable_fraction_with_pseudo", run.usable_fraction_with()},
                     {"pseudo_examples", pseudo.size()}};
  write_text(dir / kRerankerSummary, summary.dump(2) + "\n");

  std::vector<json> traces;
  for (const auto& tr : rerank_examples(data, shortlister, best, data.corpus.test, train.k)) {
    json hs = json::array();
    for (std::size_t i = 0; i < tr.hypotheses.size(); ++i) hs.push_back(hypothesis_json(tr.hypotheses[i], tr.scores[i]));
    traces.push_back({{"id", tr.id},
                      {"hypotheses", hs},
                      {"gold", tr.gold},
                      {"predicted", tr.predicted},
                      {"predicted_domain", tr.hypotheses[tr.predicted].domain}});
  }
  write_text(dir / kRerankTraces, jsonl(traces));
  if (log) {
    for (const auto& r : run.history) {
      char line[120];
      std::snprintf(line, sizeof line, "reranker epoch %2d  hinge %.5f  dev F1@1 %.4f%s", r.epoch, r.loss, r.dev_f1,
                    r.epoch == run.best_epoch ? "  *best" : "");
      log(line);
    }
    char line[160];
    std::snprintf(line, sizeof line, "usable examples: %zu/%zu without pseudo labels, %zu/%zu with",
                  run.usable_without_pseudo, run.total, run.usable_with_pseudo, run.total);
    log(line);
  }
  return run;
}

VariantMetrics evaluate_variant(const ExperimentConfig& config, const LoadedCorpus& data, const fs::path& dir) {
  require_artifacts(dir, {kShortlisterBest, kShortlisterSummary, kPseudoExport, kRerankerSummary, kRerankTraces},
                    "evaluation");
  VariantMetrics m;
  m.variant = dir.filename().string();
  for (std::size_t i = 0; i < table_rows().size(); ++i) {
    if (table_rows()[i].variant_name() == m.variant) m.row = i + 1;
  }
  m.best_epoch = read_best_epoch(dir);

  const Shortlister shortlister = load_best_shortlister(data, config.train, dir);
  std::vector<EvalRecord> ranked;
  ranked.reserve(data.corpus.test.size());
  std::unordered_map<std::string, const LogExample*> by_id;
  for (const auto& ex : data.corpus.test) {
    if (!ex.hidden) throw InputError("test example " + ex.id + " has no hidden label set");
    by_id[ex.id] = &ex;
    std::vector<DomainIndex> top;
    for (const auto& [d, _] : top_k(shortlister.predict(ex).values, config.train.k)) top.push_back(d);
    ranked.push_back({ex.id, top, *ex.hidden});
  }
  m.shortlister_at3 = precision_recall_f1(ranked, config.train.k);
  m.shortlister_at1 = precision_recall_f1(ranked, 1);
  m.ndcg3 = ndcg_at_k(ranked, config.train.k);

  std::vector<EvalRecord> picks;
  for (const auto& row : read_jsonl(dir / kRerankTraces)) {
    const std::string id = row.at("id").get<std::string>();
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw InputError("trace id " + id + " is not in the test set");
    picks.push_back({id, {row.at("predicted_domain").get<DomainIndex>()}, *it->second->hidden});
  }
  if (picks.size() != data.corpus.test.size()) {
    throw InputError("trace file " + (dir / kRerankTraces).string() + " does not cover the test set");
  }
  m.reranker_at1 = precision_recall_f1(picks, 1);

  const auto pp = pseudo_precision(read_pseudo_export(dir / kPseudoExport, final_pseudo_epoch(dir)),
                                   data.corpus.train_pos);
  m.pseudo_precision = pp.precision();
  m.pseudo_coverage = pp.coverage();
  m.pseudo_labels = pp.labels;
  const json rr = read_json_file(dir / kRerankerSummary);
  m.usable_without_pseudo = rr.at("usable_fraction_without_pseudo").get<double>();
  m.usable_with_pseudo = rr.at("usable_fraction_with_pseudo").get<double>();
  return m;
}

Comparison compare_runs(const fs::path& dir_a, const fs::path& dir_b) {
  require_artifacts(dir_a, {kRerankTraces}, "comparison");
  require_artifacts(dir_b, {kRerankTraces}, "comparison");
  auto load = [](const fs::path& dir) {
    std::vector<std::pair<std::string, bool>> out;
    for (const auto& row : read_jsonl(dir / kRerankTraces)) {
      const auto gold = row.at("gold").get<std::vector<std::size_t>>();
      const auto pred = row.at("predicted").get<std::size_t>();
      out.emplace_back(row.at("id").get<std::string>(), std::find(gold.begin(), gold.end(), pred) != gold.end());
    }
    return out;
  };
  const auto a = load(dir_a), b = load(dir_b);
  if (a.size() != b.size()) {
    throw InputError("runs cover different numbers of examples: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  std::vector<bool> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first) {
      throw InputError("example ids differ at position " + std::to_string(i) + ": " + a[i].first + " vs " + b[i].first);
    }
    ca.push_back(a[i].second);
    cb.push_back(b[i].second);
  }
  return {dir_a.filename().string(), dir_b.filename().string(), mcnemar_test(ca, cb), a.size()};
}

std::string report_json(const ExperimentConfig& config, const EvalReport& report) {
  json root;
  root["config"] = json::parse(experiment_config_json(config));
  json vs = json::array();
  for (const auto& m : report.variants) {
    vs.push_back({{"variant", m.variant},
                  {"row", m.row ? json(*m.row) : json(nullptr)},
                  {"best_epoch", m.best_epoch},
                  {"shortlister", {{"at3", prf_json(m.shortlister_at3)}, {"at1", prf_json(m.shortlister_at1)},
                                   {"ndcg3", m.ndcg3}}},
                  {"reranker", {{"at1", prf_json(m.reranker_at1)}}},
                  {"pseudo", {{"precision", m.pseudo_precision}, {"coverage", m.pseudo_coverage},
                              {"labels", m.pseudo_labels}}},
                  {"usable_fraction", {{"without_pseudo", m.usable_without_pseudo},
                                       {"with_pseudo", m.usable_with_pseudo}}}});
  }
  root["variants"] = vs;
  json cs = json::array();
  for (const auto& c : report.comparisons) {
    cs.push_back({{"run_a", c.run_a},
                  {"run_b", c.run_b},
                  {"examples", c.examples},
                  {"a_only", c.mcnemar.a_only},
                  {"b_only", c.mcnemar.b_only},
                  {"statistic", c.mcnemar.statistic},
                  {"significant", c.mcnemar.significant}});
  }
  root["comparisons"] = cs;
  return root.dump(2) + "\n";
}

std::string report_text(const EvalReport& report) {
  std::vector<const VariantMetrics*> order;
  for (const auto& m : report.variants) order.push_back(&m);
  std::stable_sort(order.begin(), order.end(), [](const VariantMetrics* a, const VariantMetrics* b) {
    return a->row.value_or(99) < b->row.value_or(99);
  });
  std::string out;
  char line[256];
  if (!order.empty()) {
    std::snprintf(line, sizeof line, "%-4s %-34s | %-29s | %-23s\n", "", "", "Shortlister (top 3)",
                  "Reranker (top 1)");
    out += line;
    std::snprintf(line, sizeof line, "%-4s %-34s | %6s %6s %6s %7s | %6s %6s %6s | %6s %6s\n", "row", "variant", "P",
                  "R", "F1", "nDCG3", "P", "R", "F1", "psP", "psCov");
    out += line;
    out += std::string(std::strlen(line) - 1, '-') + "\n";
    for (const auto* m : order) {
      const std::string row = m->row ? "(" + std::to_string(*m->row) + ")" : "";
      std::snprintf(line, sizeof line, "%-4s %-34s | %6.2f %6.2f %6.2f %7.2f | %6.2f %6.2f %6.2f | %6.2f %6.2f\n",
                    row.c_str(), m->variant.c_str(), 100 * m->shortlister_at3.precision,
                    100 * m->shortlister_at3.recall, 100 * m->shortlister_at3.f1, 100 * m->ndcg3,
                    100 * m->reranker_at1.precision, 100 * m->reranker_at1.recall, 100 * m->reranker_at1.f1,
                    100 * m->pseudo_precision, 100 * m->pseudo_coverage);
      out += line;
    }
  }
  for (const auto& c : report.comparisons) {
    std::snprintf(line, sizeof line, "McNemar %s vs %s: b=%zu c=%zu statistic %.3f %s (n=%zu)\n", c.run_a.c_str(),
                  c.run_b.c_str(), c.mcnemar.a_only, c.mcnemar.b_only, c.mcnemar.statistic,
                  c.mcnemar.significant ? "significant at 0.05" : "not significant", c.examples);
    out += line;
  }
  return out;
}

}  // namespace purouter
