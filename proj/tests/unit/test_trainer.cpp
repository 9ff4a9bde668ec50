#include <algorithm>
#include <limits>

#include "composite.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "purouter/checkpoint.hpp"
#include "purouter/errors.hpp"
#include "purouter/gradient_check.hpp"
#include "purouter/trainer.hpp"

using namespace purouter;

TEST_CASE("ablation flags") {
  CHECK(AblationFlags::parse("none") == AblationFlags{});
  CHECK(AblationFlags::parse("no-pseudo,no-neg-feed,no-self-dist") == AblationFlags{false, false, false});
  CHECK(AblationFlags::parse("no-neg-feed") == AblationFlags{true, false, true});
  CHECK(AblationFlags{false, false, false}.variant_name() == "base");
  CHECK(AblationFlags{}.variant_name() == "base_pseudo_neg_feed_self_dist");
  CHECK(AblationFlags{true, true, false}.variant_name() == "base_pseudo_neg_feed");
  CHECK_THROWS_AS(AblationFlags::parse("no-pseudo,bogus"), UsageError);
}

TEST_CASE("optimizer names and config validation") {
  CHECK(parse_optimizer("adam") == OptimizerKind::kAdam);
  CHECK(optimizer_name(parse_optimizer("momentum")) == "momentum");
  CHECK_THROWS_AS(parse_optimizer("lbfgs"), ConfigError);

  TrainConfig c;
  c.validate();
  CHECK(c.pseudo.max_labels == 2);
  CHECK(c.pseudo.required_streak == 4);
  CHECK(c.weights.beta == 0.00025);
  CHECK(c.weights.distill_temperature == 16.0);
  CHECK(c.margin == 0.4);
  CHECK(c.k == 3);
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("optimizer steps") {
  nn::ParameterSet ps;
  auto id = ps.add("w", nn::Tensor({2}, {1.0, -1.0}));
  ps[id].grad = nn::Tensor({2}, {0.5, -2.0});
  Optimizer sgd(OptimizerKind::kSgd, 0.1);
  sgd.step(ps);
  CHECK(ps[id].value[0] == doctest::Approx(0.95));
  CHECK(ps[id].value[1] == doctest::Approx(-0.8));
  CHECK(ps[id].grad[0] == 0.0);

  ps[id].grad = nn::Tensor({2}, {0.5, -2.0});
  Optimizer adam(OptimizerKind::kAdam, 0.01);
  adam.step(ps);
  // the first bias-corrected Adam step moves each weight by lr * sign(g)
  CHECK(ps[id].value[0] == doctest::Approx(0.94).epsilon(1e-6));
  CHECK(ps[id].value[1] == doctest::Approx(-0.79).epsilon(1e-6));
}

TEST_CASE("teacher selection") {
  CHECK_FALSE(select_teacher_epoch(std::vector<double>{}, 0).has_value());
  CHECK_FALSE(select_teacher_epoch(std::vector<double>{0.5}, 0).has_value());
  CHECK(select_teacher_epoch(std::vector<double>{0.5, 0.7, 0.6}, 3) == 1);
  CHECK(select_teacher_epoch(std::vector<double>{0.5, 0.7, 0.6, 0.9}, 3) == 1);
  CHECK(select_teacher_epoch(std::vector<double>{0.4, 0.4}, 2) == 0);
  const std::vector<double> rising{0.1, 0.2, 0.3, 0.4, 0.5};
  for (int t = 1; t <= 5; ++t) CHECK(select_teacher_epoch(rising, t) == t - 1);

  const auto data = fixture::tiny_corpus();
  const auto cfg = fixture::tiny_train();
  TrainState s{0, Shortlister(shortlister_dims(data, cfg), 1), std::nullopt, -1.0, -1, {}, PseudoLabeler({}, 6), {}, {}};
  CHECK(select_teacher(s) == nullptr);
  s.best_epoch = 0;
  CHECK(select_teacher(s) == nullptr);
  s.epoch = 1;
  CHECK(select_teacher(s) == &s.best_params);
}

TEST_CASE("evaluate_dev with an oracle ranker and a random model") {
  const auto data = fixture::tiny_corpus();
  const Ranker perfect = [](const LogExample& ex) { return *ex.hidden; };
  CHECK(evaluate_dev(perfect, data.corpus.dev, 4) == 1.0);
  CHECK_THROWS_AS(evaluate_dev(perfect, std::span<const LogExample>{}, 3), InputError);

  GenConfig g;
  g.n_positive = 10;
  g.n_negative = 1;
  g.n_dev = 400;
  g.n_test = 1;
  auto gen = generate_catalog(g);
  const auto corpus = generate_corpus(gen.catalog, gen.vocab, g);
  TrainConfig c;
  c.hidden = 8;
  c.embed = 8;
  c.enable = 8;
  const LoadedCorpus big{gen.catalog, gen.vocab, corpus};
  const Shortlister untrained(shortlister_dims(big, c), 1);
  const double f1 = evaluate_dev(untrained, corpus.dev, 3);
  CHECK(f1 < 0.15);
  CHECK(evaluate_dev(untrained, corpus.dev, 3) == f1);
}

TEST_CASE("full composite loss passes gradient check") {
  for (double beta : {0.00025, 1.0}) {
    fixture::CompositeCase c(7, beta);
    nn::Tape probe(false);
    CHECK(probe.scalar(c.loss(probe)) > 0.0);
    CHECK(nn::gradient_check([&](nn::Tape& t) { return c.loss(t); }, c.model.params()).max_relative_error < 1e-4);
  }
}

TEST_CASE("training is deterministic and keeps the teacher in the past") {
  const auto data = fixture::tiny_corpus();
  auto cfg = fixture::tiny_train();
  cfg.epochs = 6;
  cfg.pseudo.required_streak = 2;
  std::vector<int> seen;
  ShortlisterHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r, const TrainState& s) {
    seen.push_back(r.epoch);
    CHECK(s.best_epoch <= r.epoch);
    if (r.teacher_used) CHECK(r.teacher_epoch < r.epoch);
  };
  const auto a = train_shortlister(data, cfg, hooks);
  const auto b = train_shortlister(data, cfg);
  CHECK(seen == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(nn::serialize_parameters(a.model.params()) == nn::serialize_parameters(b.model.params()));
  CHECK(nn::serialize_parameters(a.best_params) == nn::serialize_parameters(b.best_params));
  CHECK(a.best_pseudo == b.best_pseudo);
  CHECK(a.history[0].alpha == 0.0);
  CHECK_FALSE(a.history[0].teacher_used);
  CHECK(a.history[1].teacher_used);
  for (const auto& r : a.history) {
    CHECK(std::isfinite(r.mean.base));
    CHECK(r.mean.negative >= 0.0);
  }
  for (const auto& [id, labels] : a.best_pseudo) {
    CHECK(labels.size() <= 2);
    const auto ex = std::find_if(data.corpus.train_pos.begin(), data.corpus.train_pos.end(),
                                 [&](const LogExample& e) { return e.id == id; });
    REQUIRE(ex != data.corpus.train_pos.end());
    CHECK(std::find(labels.begin(), labels.end(), ex->ground_truth) == labels.end());
  }

  auto other = cfg;
  other.seed = 2;
  CHECK(nn::serialize_parameters(train_shortlister(data, other).model.params()) !=
        nn::serialize_parameters(a.model.params()));
}

TEST_CASE("base configuration touches neither pseudo state nor teacher") {
  const auto data = fixture::tiny_corpus();
  auto cfg = fixture::tiny_train();
  cfg.epochs = 5;
  cfg.pseudo.required_streak = 1;
  cfg.ablation = AblationFlags::parse("no-pseudo,no-neg-feed,no-self-dist");
  const auto s = train_shortlister(data, cfg);
  CHECK(s.best_pseudo.empty());
  CHECK(s.labeler.examples_with_labels() == 0);
  for (const auto& r : s.history) {
    CHECK_FALSE(r.teacher_used);
    CHECK(r.mean.pseudo == r.mean.base);
    CHECK(r.mean.distill == 0.0);
    CHECK(r.mean.negative == 0.0);
  }
}

TEST_CASE("first epochs reduce the combined loss") {
  const auto data = fixture::tiny_corpus();
  auto cfg = fixture::tiny_train();
  cfg.epochs = 5;
  int decreasing = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    const auto s = train_shortlister(data, cfg);
    decreasing += s.history.back().combined < s.history.front().combined ? 1 : 0;
  }
  CHECK(decreasing >= 4);
}

TEST_CASE("a diverging run stops with a numeric error") {
  const auto data = fixture::tiny_corpus();
  auto cfg = fixture::tiny_train();
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.learning_rate = 1e300;
  cfg.epochs = 4;
  CHECK_THROWS_WITH_AS(train_shortlister(data, cfg), doctest::Contains("batch"), NumericError);
}

TEST_CASE("reranker training and usable fractions") {
  const auto data = fixture::tiny_corpus();
  auto cfg = fixture::tiny_train();
  cfg.epochs = 3;
  const auto sl = train_shortlister(data, cfg);
  const Shortlister best(sl.model.dims(), sl.best_params);

  const auto empty = train_reranker(data, best, {}, cfg);
  CHECK(empty.usable_with_pseudo == empty.usable_without_pseudo);
  CHECK(empty.total == data.corpus.train_pos.size());
  CHECK(empty.history.size() == 2);

  // give every example both non-ground-truth domains of its top three
  PseudoMap pseudo;
  for (const auto& ex : data.corpus.train_pos) {
    for (const auto& [d, conf] : top_k(best.predict(ex).values, 3)) {
      if (d != ex.ground_truth && pseudo[ex.id].size() < 2) pseudo[ex.id].push_back(d);
    }
  }
  const auto with = train_reranker(data, best, pseudo, cfg);
  CHECK(with.usable_with_pseudo == with.total);
  CHECK(with.usable_with_pseudo >= with.usable_without_pseudo);
  CHECK(with.usable_without_pseudo == empty.usable_without_pseudo);

  const auto again = train_reranker(data, best, pseudo, cfg);
  CHECK(nn::serialize_parameters(again.model.params()) == nn::serialize_parameters(with.model.params()));

  auto pointwise_cfg = cfg;
  pointwise_cfg.reranker_hinge = HingeKind::kPointwise;
  const auto pointwise = train_reranker(data, best, pseudo, pointwise_cfg);
  CHECK(pointwise.usable_with_pseudo == with.usable_with_pseudo);
  CHECK(nn::serialize_parameters(pointwise.model.params()) != nn::serialize_parameters(with.model.params()));

  const auto traces = rerank_examples(data, best, with.model, data.corpus.test, 3);
  CHECK(traces.size() == data.corpus.test.size());
  for (const auto& tr : traces) {
    CHECK(tr.hypotheses.size() == 3);
    CHECK(tr.predicted == rerank_choice(tr.scores));
  }
}

TEST_CASE("pseudo precision counts labels inside the hidden sets") {
  std::vector<LogExample> pos(3);
  pos[0].id = "a";
  pos[0].hidden = std::vector<DomainIndex>{0, 1, 2};
  pos[1].id = "b";
  pos[1].hidden = std::vector<DomainIndex>{3};
  pos[2].id = "c";
  pos[2].hidden = std::vector<DomainIndex>{4, 5};
  const PseudoMap m{{"a", {1, 2}}, {"b", {4}}};
  const auto p = pseudo_precision(m, pos);
  CHECK(p.labels == 3);
  CHECK(p.correct == 2);
  CHECK(p.examples_with_labels == 2);
  CHECK(p.precision() == doctest::Approx(2.0 / 3.0));
  CHECK(p.coverage() == doctest::Approx(2.0 / 3.0));
  CHECK(pseudo_precision({}, pos).precision() == 0.0);
}
