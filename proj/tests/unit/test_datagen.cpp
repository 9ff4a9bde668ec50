#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "purouter/datagen.hpp"
#include "purouter/errors.hpp"

using namespace purouter;

namespace {

bool contains(const std::vector<DomainIndex>& v, DomainIndex d) { return std::find(v.begin(), v.end(), d) != v.end(); }

// Upper 1% point of chi-square(df), Wilson-Hilferty approximation.
double chi_square_99(double df) {
  const double z = 2.3263478740408408;
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

}  // namespace

TEST_CASE("default catalog shape") {
  const GenConfig g;
  const auto gen = generate_catalog(g);
  const auto& cat = gen.catalog;
  CHECK(cat.n() == 50);
  CHECK(cat.groups.size() == 30);
  std::size_t multi = 0;
  std::set<DomainIndex> covered;
  for (const auto& grp : cat.groups) {
    CHECK(!grp.members.empty());
    CHECK(grp.members.size() <= 4);
    multi += grp.members.size() >= 2 ? 1 : 0;
    covered.insert(grp.members.begin(), grp.members.end());
    CHECK(grp.member_intents.size() == grp.members.size());
  }
  CHECK(multi == 15);
  CHECK(covered.size() == 50);
  CHECK(gen.vocab.size() == g.vocab_size);
}

TEST_CASE("no overlap means singleton groups") {
  GenConfig g = fixture::tiny_gen();
  g.overlap_rate = 0.0;
  g.n_groups = g.n_domains;
  const auto gen = generate_catalog(g);
  for (const auto& grp : gen.catalog.groups) CHECK(grp.members.size() == 1);
  const auto corpus = generate_corpus(gen.catalog, gen.vocab, g);
  for (const auto& ex : corpus.train_pos) CHECK(ex.hidden->size() == 1);
}

TEST_CASE("infeasible configurations are rejected") {
  GenConfig g = fixture::tiny_gen();
  g.n_groups = g.n_domains + 1;
  CHECK_THROWS_AS(generate_catalog(g), ConfigError);
  g = fixture::tiny_gen();
  g.overlap_rate = 0.0;  // 4 singleton groups cannot cover 6 domains
  CHECK_THROWS_AS(generate_catalog(g), ConfigError);
  g = fixture::tiny_gen();
  g.noise_rate = 1.5;
  CHECK_THROWS_AS(generate_catalog(g), ConfigError);
  g = fixture::tiny_gen();
  g.vocab_size = 10;
  CHECK_THROWS_AS(generate_catalog(g), ConfigError);
  g = fixture::tiny_gen();
  g.n_positive = 0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("positive and negative construction rules") {
  const auto data = fixture::tiny_corpus();
  const auto& c = data.corpus;
  CHECK(c.train_pos.size() == 120);
  CHECK(c.train_neg.size() == 16);
  CHECK(c.dev.size() == 40);
  CHECK(c.test.size() == 40);
  for (const auto* split : {&c.train_pos, &c.dev, &c.test}) {
    for (const auto& ex : *split) {
      ex.validate(data.catalog.n(), data.vocab.size());
      CHECK(ex.polarity == Polarity::kPositive);
      REQUIRE(ex.hidden.has_value());
      CHECK(contains(*ex.hidden, ex.ground_truth));
      CHECK(contains(ex.enabled, ex.ground_truth));
      CHECK(classify_response(ex.response) == Polarity::kPositive);
      CHECK(c.features.count(ex.id) == 1);
    }
  }
  for (const auto& ex : c.train_neg) {
    CHECK(ex.polarity == Polarity::kNegative);
    CHECK_FALSE(contains(*ex.hidden, ex.ground_truth));
    CHECK(classify_response(ex.response) == Polarity::kNegative);
  }
  std::set<std::string> ids;
  std::size_t total = 0;
  for (const auto* split : {&c.train_pos, &c.train_neg, &c.dev, &c.test}) {
    for (const auto& ex : *split) ids.insert(ex.id);
    total += split->size();
  }
  CHECK(ids.size() == total);
}

TEST_CASE("revealed label is uniform over group members") {
  GenConfig g;
  g.n_positive = 10000;
  g.n_negative = 1;
  g.n_dev = 1;
  g.n_test = 1;
  const auto gen = generate_catalog(g);
  const auto corpus = generate_corpus(gen.catalog, gen.vocab, g);
  std::map<std::vector<DomainIndex>, std::map<DomainIndex, std::size_t>> counts;
  for (const auto& ex : corpus.train_pos) ++counts[*ex.hidden][ex.ground_truth];
  double stat = 0.0;
  double df = 0.0;
  for (const auto& [members, per] : counts) {
    if (members.size() < 2) continue;
    std::size_t n = 0;
    for (auto d : members) n += per.count(d) ? per.at(d) : 0;
    const double expect = static_cast<double>(n) / static_cast<double>(members.size());
    for (auto d : members) {
      const double o = per.count(d) ? static_cast<double>(per.at(d)) : 0.0;
      stat += (o - expect) * (o - expect) / expect;
    }
    df += static_cast<double>(members.size() - 1);
  }
  CAPTURE(stat);
  CAPTURE(df);
  CHECK(df > 10.0);
  CHECK(stat < chi_square_99(df));
}

TEST_CASE("synthetic scorer means and determinism") {
  GenConfig g = fixture::tiny_gen();
  g.n_positive = 3000;
  const auto gen = generate_catalog(g);
  const auto corpus = generate_corpus(gen.catalog, gen.vocab, g);
  double in_sum = 0, out_sum = 0;
  std::size_t in_n = 0, out_n = 0;
  for (const auto& ex : corpus.train_pos) {
    const auto& f = corpus.features_for(ex.id);
    for (DomainIndex d = 0; d < gen.catalog.n(); ++d) {
      if (contains(*ex.hidden, d)) {
        in_sum += f.intent_scores[d];
        ++in_n;
      } else {
        out_sum += f.intent_scores[d];
        ++out_n;
      }
      CHECK(f.intent_scores[d] > 0.0);
      CHECK(f.intent_scores[d] < 1.0);
    }
  }
  CHECK(in_sum / static_cast<double>(in_n) == doctest::Approx(0.8).epsilon(0.01));
  CHECK(out_sum / static_cast<double>(out_n) == doctest::Approx(0.2).epsilon(0.02));

  const UtteranceSource src{"pos-000001", gen.catalog.domains[0].groups.front(), {}};
  const auto a = synthetic_intent_slot_scores(src, 0, gen.catalog, 5);
  const auto b = synthetic_intent_slot_scores(src, 0, gen.catalog, 5);
  CHECK(a == b);
  CHECK(a.second == 0.5);
  CHECK_THROWS_AS(synthetic_intent_slot_scores(src, 99, gen.catalog, 5), InputError);
}

TEST_CASE("response polarity survives a round trip") {
  const auto data = fixture::tiny_corpus();
  std::size_t recovered = 0;
  for (int i = 0; i < 10000; ++i) {
    LogExample ex = data.corpus.train_pos[static_cast<std::size_t>(i) % data.corpus.train_pos.size()];
    ex.id = "r" + std::to_string(i);
    const bool success = i % 3 != 0;
    const auto back = classify_response(render_response(ex, success, data.catalog, data.vocab));
    recovered += back == (success ? Polarity::kPositive : Polarity::kNegative) ? 1 : 0;
  }
  CHECK(recovered == 10000);
  CHECK_FALSE(classify_response("something else entirely").has_value());
}

TEST_CASE("identical config gives byte-identical corpus files") {
  const fixture::TempDir a("gen_a");
  const fixture::TempDir b("gen_b");
  for (const auto* dir : {&a, &b}) {
    const auto g = fixture::tiny_gen(9);
    const auto gen = generate_catalog(g);
    save_corpus(dir->path(), gen.catalog, gen.vocab, generate_corpus(gen.catalog, gen.vocab, g));
  }
  for (const char* f : {kCatalogFile, kVocabFile, kTrainPosFile, kTrainNegFile, kDevFile, kTestFile, kFeaturesFile}) {
    CAPTURE(f);
    CHECK(read_text(a.path() / f) == read_text(b.path() / f));
  }
  const auto loaded = load_corpus(a.path());
  CHECK(loaded.corpus.train_pos.size() == 120);
  CHECK(catalog_to_json(loaded.catalog) == read_text(a.path() / kCatalogFile));

  const auto other = fixture::tiny_corpus(10);
  CHECK(example_to_json(other.corpus.train_pos[0]) != example_to_json(loaded.corpus.train_pos[0]));
}

TEST_CASE("example json round trip and schema") {
  const auto data = fixture::tiny_corpus();
  for (const auto& ex : data.corpus.train_neg) {
    const auto line = example_to_json(ex);
    CHECK(example_to_json(example_from_json(line)) == line);
    CHECK(line.find("\"polarity\":\"neg\"") != std::string::npos);
  }
  CHECK_THROWS(example_from_json("{\"id\": 3}"));
  CHECK_THROWS(example_from_json("not json"));
}
