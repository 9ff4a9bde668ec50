#include "purouter/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "purouter/datagen.hpp"
#include "purouter/errors.hpp"

namespace purouter {
namespace {

using Clock = std::chrono::steady_clock;

const std::vector<DomainIndex> kNoLabels;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

nn::Var batch_mean(nn::Tape& tape, std::span<const nn::Var> terms) {
  if (terms.empty()) return tape.constant(std::vector<double>{0.0});
  const std::vector<double> coeffs(terms.size(), 1.0 / static_cast<double>(terms.size()));
  return nn::lincomb(tape, terms, coeffs);
}

std::vector<DomainIndex> top_domains(const PredictionVector& pred, std::size_t k) {
  std::vector<DomainIndex> out;
  for (const auto& [d, conf] : top_k(pred.values, k)) out.push_back(d);
  return out;
}

const std::vector<DomainIndex>& hidden_of(const LogExample& ex) {
  if (!ex.hidden || ex.hidden->empty()) throw DependencyError("example " + ex.id + " has no hidden label set");
  return *ex.hidden;
}

}  // namespace

std::string AblationFlags::variant_name() const {
  std::string name = "base";
  if (use_pseudo) name += "_pseudo";
  if (use_neg_feed) name += "_neg_feed";
  if (use_self_dist) name += "_self_dist";
  return name;
}

AblationFlags AblationFlags::parse(const std::string& spec) {
  AblationFlags flags;
  if (spec.empty() || spec == "none") return flags;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "no-pseudo") {
      flags.use_pseudo = false;
    } else if (item == "no-neg-feed") {
      flags.use_neg_feed = false;
    } else if (item == "no-self-dist") {
      flags.use_self_dist = false;
    } else {
      throw UsageError("unknown ablation '" + item + "' (expected no-pseudo, no-neg-feed, no-self-dist or none)");
    }
  }
  return flags;
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("optimizer: unknown value '" + name + "' (sgd, momentum, adam)");
}

std::string optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "sgd";
}

void TrainConfig::validate() const {
  auto positive = [](bool ok, const char* key) {
    if (!ok) throw ConfigError(std::string(key) + " is out of range");
  };
  positive(pseudo.max_labels >= 1, "p");
  positive(pseudo.required_streak >= 1, "r");
  weights.validate();
  positive(margin > 0.0, "margin");
  positive(k >= 1, "k");
  positive(epochs >= 1, "epochs");
  positive(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate");
  positive(batch_size >= 1, "batch_size");
  positive(momentum >= 0.0 && momentum < 1.0, "momentum");
  positive(init_range > 0.0, "init_range");
  positive(embed >= 1 && hidden >= 1 && enable >= 1, "embed/hidden/enable");
  positive(reranker_epochs >= 1, "reranker_epochs");
  positive(reranker_learning_rate > 0.0, "reranker_learning_rate");
  positive(reranker_embed >= 1 && reranker_hidden >= 1, "reranker_embed/reranker_hidden");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double momentum)
    : kind_(kind), lr_(learning_rate), momentum_(momentum) {}

void Optimizer::step(nn::ParameterSet& params) {
  ++steps_;
  if (kind_ != OptimizerKind::kSgd && m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      if (kind_ == OptimizerKind::kAdam) v_.emplace_back(p.value.size(), 0.0);
    }
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  std::size_t pi = 0;
  for (auto& p : params) {
    auto w = p.value.data();
    auto g = p.grad.data();
    switch (kind_) {
      case OptimizerKind::kSgd:
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
        break;
      case OptimizerKind::kMomentum: {
        auto& m = m_[pi];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = momentum_ * m[i] + g[i];
          w[i] -= lr_ * m[i];
        }
        break;
      }
      case OptimizerKind::kAdam: {
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = b1 * m[i] + (1.0 - b1) * g[i];
          v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
          w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
        break;
      }
    }
    p.zero_grad();
    ++pi;
  }
}

std::optional<int> select_teacher_epoch(std::span<const double> dev_history, int current_epoch) {
  const auto limit = std::min<std::size_t>(dev_history.size(), static_cast<std::size_t>(std::max(current_epoch, 0)));
  std::optional<int> best;
  for (std::size_t e = 0; e < limit; ++e) {
    if (!best || dev_history[e] > dev_history[static_cast<std::size_t>(*best)]) best = static_cast<int>(e);
  }
  return best;
}

const nn::ParameterSet* select_teacher(const TrainState& state) {
  if (state.best_epoch < 0 || state.best_epoch >= state.epoch) return nullptr;
  return &state.best_params;
}

std::vector<EvalRecord> ranking_records(const Ranker& rank, std::span<const LogExample> examples) {
  std::vector<EvalRecord> records;
  records.reserve(examples.size());
  for (const auto& ex : examples) records.push_back({ex.id, rank(ex), hidden_of(ex)});
  return records;
}

double evaluate_dev(const Ranker& rank, std::span<const LogExample> dev, std::size_t k) {
  if (dev.empty()) throw InputError("evaluate_dev: empty dev set");
  const auto records = ranking_records(rank, dev);
  return precision_recall_f1(records, k).f1;
}

double evaluate_dev(const Shortlister& model, std::span<const LogExample> dev, std::size_t k) {
  return evaluate_dev([&](const LogExample& ex) { return top_domains(model.predict(ex), k); }, dev, k);
}

ShortlisterDims shortlister_dims(const LoadedCorpus& data, const TrainConfig& config) {
  ShortlisterDims d;
  d.vocab = data.vocab.size();
  d.embed = config.embed;
  d.hidden = config.hidden;
  d.enable = config.enable;
  d.domains = data.catalog.n();
  return d;
}

RerankerDims reranker_dims(const LoadedCorpus& data, const TrainConfig& config) {
  RerankerDims d;
  d.domains = data.catalog.n();
  d.intents = std::max<std::size_t>(data.catalog.n_intents, 1);
  d.slot_types = std::max<std::size_t>(data.catalog.n_slot_types, 1);
  d.domain_embed = d.intent_embed = d.slot_embed = config.reranker_embed;
  d.hidden = config.reranker_hidden;
  return d;
}

TrainState train_shortlister(const LoadedCorpus& data, const TrainConfig& config, const ShortlisterHooks& hooks) {
  config.validate();
  const auto& pos = data.corpus.train_pos;
  const auto& neg = data.corpus.train_neg;
  if (pos.empty()) throw InputError("train_shortlister: no positive training examples");
  if (data.corpus.dev.empty()) throw InputError("train_shortlister: empty dev set");
  const auto& flags = config.ablation;
  const std::size_t n = data.catalog.n();

  TrainState state{0,
                   Shortlister(shortlister_dims(data, config), config.seed, config.init_range),
                   Optimizer(config.optimizer, config.learning_rate, config.momentum),
                   -1.0,
                   -1,
                   {},
                   PseudoLabeler(config.pseudo, n),
                   {},
                   {}};
  auto& model = state.model;
  std::mt19937_64 rng(mix64(config.seed ^ 0x5eedULL));

  std::vector<std::size_t> pos_order(pos.size());
  std::iota(pos_order.begin(), pos_order.end(), std::size_t{0});
  std::vector<std::size_t> neg_order(neg.size());
  std::iota(neg_order.begin(), neg_order.end(), std::size_t{0});

  const std::size_t bs = config.batch_size;
  const std::size_t pos_batches = (pos.size() + bs - 1) / bs;
  const std::size_t neg_batches = flags.use_neg_feed ? (neg.size() + bs - 1) / bs : 0;

  // Teacher logits are fixed while the teacher snapshot is unchanged.
  std::optional<Shortlister> teacher;
  int teacher_epoch = -1;
  std::vector<std::vector<double>> teacher_logits(pos.size());

  std::vector<std::vector<double>> epoch_preds(pos.size());

  for (int t = 0; t < config.epochs; ++t) {
    const auto t0 = Clock::now();
    state.epoch = t;
    const nn::ParameterSet* snapshot = flags.use_self_dist ? select_teacher(state) : nullptr;
    if (snapshot != nullptr) {
      if (state.best_epoch >= t) throw InvariantError("teacher epoch is not before the current epoch");
      if (teacher_epoch != state.best_epoch) {
        teacher.emplace(model.dims(), *snapshot);
        teacher_epoch = state.best_epoch;
        for (auto& l : teacher_logits) l.clear();
      }
    }

    std::shuffle(pos_order.begin(), pos_order.end(), rng);
    if (flags.use_neg_feed) std::shuffle(neg_order.begin(), neg_order.end(), rng);

    EpochRecord rec;
    rec.epoch = t;
    rec.alpha = losses::alpha_schedule(t, config.weights.alpha_base);
    rec.teacher_used = snapshot != nullptr;
    rec.teacher_epoch = snapshot != nullptr ? teacher_epoch : -1;
    std::size_t neg_done = 0;

    for (std::size_t b = 0; b < pos_batches; ++b) {
      nn::Tape tape;
      std::vector<nn::Var> lb, ld, ls, ln;
      const std::size_t begin = b * bs;
      const std::size_t end = std::min(pos.size(), begin + bs);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = pos_order[i];
        const auto& ex = pos[idx];
        const auto out = model.forward(tape, ex);
        const auto probs = tape.value(out.probs);
        epoch_preds[idx].assign(probs.begin(), probs.end());

        const auto y = losses::TargetVector::one_hot(ex.ground_truth, n);
        const nn::Var base = losses::bce(tape, out.probs, y.values);
        lb.push_back(base);
        const auto& pseudo = flags.use_pseudo ? state.labeler.pseudo_labels(ex.id) : kNoLabels;
        if (pseudo.empty()) {
          ld.push_back(base);
        } else {
          ld.push_back(losses::bce(tape, out.probs, target_vector(ex.ground_truth, pseudo, n).values));
        }
        if (snapshot != nullptr) {
          auto& tl = teacher_logits[idx];
          if (tl.empty()) tl = teacher->predict(ex).logits;
          const auto soft = losses::soften_teacher(tl, config.weights.distill_temperature);
          ls.push_back(losses::bce(tape, out.probs, soft));
        }
      }
      // Negative batches are spread evenly over the positive ones.
      const std::size_t neg_due = neg_batches * (b + 1) / pos_batches;
      for (; neg_done < neg_due; ++neg_done) {
        const std::size_t nb = neg_done * bs;
        for (std::size_t i = nb; i < std::min(neg.size(), nb + bs); ++i) {
          const auto& ex = neg[neg_order[i]];
          const auto out = model.forward(tape, ex);
          ln.push_back(losses::negative_feedback_loss(tape, out.probs, ex.ground_truth));
        }
      }

      const nn::Var mb = batch_mean(tape, lb);
      const nn::Var md = batch_mean(tape, ld);
      const nn::Var ms = batch_mean(tape, ls);
      const nn::Var mn = batch_mean(tape, ln);
      const bool finite = std::isfinite(tape.scalar(mb)) && std::isfinite(tape.scalar(md)) &&
                          std::isfinite(tape.scalar(ms)) && std::isfinite(tape.scalar(mn));
      if (!finite) {
        throw NumericError("non-finite loss at epoch " + std::to_string(t) + ", batch " + std::to_string(b) +
                           " (first example " + pos[pos_order[begin]].id + ")");
      }
      const nn::Var loss = losses::combined_loss(tape, mb, md, ms, mn, t, config.weights);
      const double value = tape.scalar(loss);
      tape.backward(loss);
      state.optimizer->step(model.params());

      rec.mean.base += tape.scalar(mb);
      rec.mean.pseudo += tape.scalar(md);
      rec.mean.distill += tape.scalar(ms);
      rec.mean.negative += tape.scalar(mn);
      rec.combined += value;
    }
    const double nb = static_cast<double>(pos_batches);
    rec.mean.base /= nb;
    rec.mean.pseudo /= nb;
    rec.mean.distill /= nb;
    rec.mean.negative /= nb;
    rec.combined /= nb;

    if (flags.use_pseudo) {
      for (std::size_t i = 0; i < pos.size(); ++i) {
        state.labeler.observe_epoch(pos[i].id, t, epoch_preds[i], pos[i].ground_truth);
        state.labeler.derive_pseudo_labels(pos[i].id, epoch_preds[i]);
      }
      rec.pseudo_examples = state.labeler.examples_with_labels();
      rec.pseudo_labels = state.labeler.total_labels();
    }

    rec.dev_f1 = evaluate_dev(model, data.corpus.dev, config.k);
    if (rec.dev_f1 > state.best_dev) {
      state.best_dev = rec.dev_f1;
      state.best_epoch = t;
      state.best_params = model.params();
      state.best_pseudo.clear();
      if (flags.use_pseudo) {
        for (const auto& ex : pos) {
          const auto& p = state.labeler.pseudo_labels(ex.id);
          if (!p.empty()) state.best_pseudo.emplace(ex.id, p);
        }
      }
    }
    rec.seconds = seconds_since(t0);
    state.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec, state);
  }
  return state;
}

double RerankerRun::usable_fraction_without() const {
  return total == 0 ? 0.0 : static_cast<double>(usable_without_pseudo) / static_cast<double>(total);
}

double RerankerRun::usable_fraction_with() const {
  return total == 0 ? 0.0 : static_cast<double>(usable_with_pseudo) / static_cast<double>(total);
}

namespace {

struct RerankItem {
  std::vector<Hypothesis> hypotheses;
  std::vector<std::size_t> gold;
};

std::vector<Hypothesis> hypotheses_for(const LoadedCorpus& data, const Shortlister& shortlister,
                                       const Reranker& reranker, const LogExample& ex, std::size_t k) {
  return build_hypotheses(ex, shortlister.predict(ex), data.catalog, data.corpus.features_for(ex.id), reranker, k);
}

double rerank_f1(const Reranker& reranker, std::span<const LogExample> examples,
                 const std::vector<std::vector<Hypothesis>>& hyps) {
  std::vector<EvalRecord> records;
  records.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto choice = rerank_choice(reranker.score(hyps[i]));
    records.push_back({examples[i].id, {hyps[i][choice].domain}, hidden_of(examples[i])});
  }
  return precision_recall_f1(records, 1).f1;
}

}  // namespace

RerankerRun train_reranker(const LoadedCorpus& data, const Shortlister& shortlister, const PseudoMap& pseudo,
                           const TrainConfig& config) {
  config.validate();
  const auto& pos = data.corpus.train_pos;
  const auto& dev = data.corpus.dev;
  if (config.k > data.catalog.n()) throw ConfigError("k exceeds the number of domains");
  RerankerRun run{Reranker(reranker_dims(data, config), mix64(config.seed ^ 0x4e4aULL), config.init_range,
                           config.margin),
                  {}, -1, pos.size(), 0, 0, {}};
  auto& model = run.model;

  std::vector<RerankItem> items;
  for (const auto& ex : pos) {
    auto hyps = hypotheses_for(data, shortlister, model, ex, config.k);
    const auto it = pseudo.find(ex.id);
    const auto& labels = it == pseudo.end() ? kNoLabels : it->second;
    auto without = rerank_targets(hyps, ex.ground_truth, {});
    auto with = rerank_targets(hyps, ex.ground_truth, labels);
    if (!without.empty()) ++run.usable_without_pseudo;
    if (!with.empty()) {
      ++run.usable_with_pseudo;
      items.push_back({std::move(hyps), std::move(with)});
    }
  }
  if (items.empty()) throw InputError("train_reranker: no training example has a gold hypothesis");

  std::vector<std::vector<Hypothesis>> dev_hyps;
  dev_hyps.reserve(dev.size());
  for (const auto& ex : dev) dev_hyps.push_back(hypotheses_for(data, shortlister, model, ex, config.k));

  Optimizer opt(config.optimizer, config.reranker_learning_rate, config.momentum);
  std::mt19937_64 rng(mix64(config.seed ^ 0x7e7aULL));
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = config.batch_size;
  double best = -1.0;

  for (int e = 0; e < config.reranker_epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      nn::Tape tape;
      std::vector<nn::Var> terms;
      for (std::size_t i = b; i < std::min(order.size(), b + bs); ++i) {
        const auto& item = items[order[i]];
        const nn::Var scores = model.forward(tape, item.hypotheses);
        terms.push_back(config.reranker_hinge == HingeKind::kPointwise
                            ? pointwise_hinge_loss(tape, scores, item.gold, model.margin())
                            : hinge_loss(tape, scores, item.gold, model.margin()));
      }
      const nn::Var loss = batch_mean(tape, terms);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw NumericError("non-finite reranker loss at epoch " + std::to_string(e) + ", batch " +
                           std::to_string(b / bs));
      }
      tape.backward(loss);
      opt.step(model.params());
      total += value;
      ++batches;
    }
    RerankEpochRecord rec{e, total / static_cast<double>(batches), rerank_f1(model, dev, dev_hyps)};
    if (rec.dev_f1 > best) {
      best = rec.dev_f1;
      run.best_epoch = e;
      run.best_params = model.params();
    }
    run.history.push_back(rec);
  }
  model.params().assign_values(run.best_params);
  return run;
}

std::vector<RerankTrace> rerank_examples(const LoadedCorpus& data, const Shortlister& shortlister,
                                         const Reranker& reranker, std::span<const LogExample> examples,
                                         std::size_t k) {
  std::vector<RerankTrace> traces;
  traces.reserve(examples.size());
  for (const auto& ex : examples) {
    RerankTrace tr;
    tr.id = ex.id;
    tr.hypotheses = hypotheses_for(data, shortlister, reranker, ex, k);
    tr.scores = reranker.score(tr.hypotheses);
    tr.predicted = rerank_choice(tr.scores);
    const auto relevant = ex.hidden ? std::span<const DomainIndex>(*ex.hidden) : std::span<const DomainIndex>();
    for (std::size_t i = 0; i < tr.hypotheses.size(); ++i) {
      const auto d = tr.hypotheses[i].domain;
      if (d == ex.ground_truth || std::find(relevant.begin(), relevant.end(), d) != relevant.end()) {
        tr.gold.push_back(i);
      }
    }
    traces.push_back(std::move(tr));
  }
  return traces;
}

double PseudoPrecision::precision() const {
  return labels == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels);
}

double PseudoPrecision::coverage() const {
  return examples == 0 ? 0.0 : static_cast<double>(examples_with_labels) / static_cast<double>(examples);
}

PseudoPrecision pseudo_precision(const PseudoMap& pseudo, std::span<const LogExample> positives) {
  PseudoPrecision out;
  out.examples = positives.size();
  for (const auto& ex : positives) {
    const auto it = pseudo.find(ex.id);
    if (it == pseudo.end() || it->second.empty()) continue;
    const auto& hidden = hidden_of(ex);
    ++out.examples_with_labels;
    for (auto d : it->second) {
      ++out.labels;
      if (std::find(hidden.begin(), hidden.end(), d) != hidden.end()) ++out.correct;
    }
  }
  return out;
}

}  // namespace purouter
