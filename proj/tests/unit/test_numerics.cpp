#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "purouter/checkpoint.hpp"
#include "purouter/errors.hpp"
#include "purouter/gradient_check.hpp"
#include "purouter/ops.hpp"
#include "purouter/tape.hpp"

using namespace purouter;
using namespace purouter::nn;

namespace {

std::vector<double> values_of(Tape& t, Var v) {
  auto s = t.value(v);
  return {s.begin(), s.end()};
}

// A 1 x n table holding a vector input, so it can be reached through embedding().
ParamId add_vector(ParameterSet& ps, const std::string& name, std::vector<double> v) {
  const auto n = v.size();
  return ps.add(name, Tensor({1, n}, std::move(v)));
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Projects a vector output onto fixed random weights, giving a scalar loss.
Var project(Tape& t, Var out, const std::vector<double>& w) { return dot(t, out, t.constant(w)); }

}  // namespace

TEST_CASE("affine examples") {
  ParameterSet ps;
  auto w = ps.add("w", Tensor({2, 2}, {2, 3, 5, 7}));
  auto b = ps.add("b", Tensor({2}, {0, 0}));
  Tape t(false);
  CHECK(values_of(t, affine(t, t.constant(std::vector<double>{1, 0}), ps[w], ps[b])) == std::vector<double>{2, 3});
  ps[b].value.fill(1.0);
  CHECK(values_of(t, affine(t, t.constant(std::vector<double>{1, 1}), ps[w], ps[b])) == std::vector<double>{8, 11});
  CHECK_THROWS_AS(affine(t, t.constant(std::vector<double>{1, 1, 1}), ps[w], ps[b]), DimensionError);
}

TEST_CASE("sigmoid values") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  CHECK(sigmoid(-1.0) == doctest::Approx(1.0 - 0.7310585786300049).epsilon(1e-15));
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(std::isfinite(sigmoid(800.0)));
}

TEST_CASE("lstm with zero parameters stays at zero") {
  ParameterSet ps;
  auto w = ps.add("w", {3 + 2, 8});
  auto b = ps.add("b", {8});
  const LstmWeights lw{&ps[w], &ps[b], 3, 2};
  Tape t(false);
  auto [h, c] = lstm_cell(t, t.constant(std::vector<double>{0.3, -1.0, 2.0}), t.zeros(2), t.zeros(2), lw);
  CHECK(values_of(t, h) == std::vector<double>{0, 0});
  CHECK(values_of(t, c) == std::vector<double>{0, 0});
}

TEST_CASE("single-unit lstm matches the scalar recurrence") {
  // columns: input, forget, candidate, output; rows: x, h
  const double wx[4] = {0.5, -0.3, 0.8, 0.2};
  const double wh[4] = {0.1, 0.4, -0.6, 0.7};
  const double bias[4] = {0.05, 1.0, -0.2, 0.3};
  ParameterSet ps;
  auto w = ps.add("w", Tensor({2, 4}, {wx[0], wx[1], wx[2], wx[3], wh[0], wh[1], wh[2], wh[3]}));
  auto b = ps.add("b", Tensor({4}, {bias[0], bias[1], bias[2], bias[3]}));
  const LstmWeights lw{&ps[w], &ps[b], 1, 1};

  long double h = 0.3L, c = -0.2L;
  Tape t(false);
  Var hv = t.constant(std::vector<double>{0.3});
  Var cv = t.constant(std::vector<double>{-0.2});
  for (double x : {1.0, -0.5, 2.0}) {
    auto gate = [&](int k) { return wx[k] * x + wh[k] * h + bias[k]; };
    const long double i = 1.0L / (1.0L + std::exp(-gate(0)));
    const long double f = 1.0L / (1.0L + std::exp(-gate(1)));
    const long double g = std::tanh(gate(2));
    const long double o = 1.0L / (1.0L + std::exp(-gate(3)));
    c = f * c + i * g;
    h = o * std::tanh(c);
    std::tie(hv, cv) = lstm_cell(t, t.constant(std::vector<double>{x}), hv, cv, lw);
    CHECK(t.value(hv)[0] == doctest::Approx(static_cast<double>(h)).epsilon(1e-14));
    CHECK(t.value(cv)[0] == doctest::Approx(static_cast<double>(c)).epsilon(1e-14));
  }
}

TEST_CASE("gradient check of a polynomial") {
  ParameterSet ps;
  auto w = add_vector(ps, "w", {3.0});
  auto loss = [&](Tape& t) {
    const Var x = embedding(t, ps[w], 0);
    return mul(t, x, x);
  };
  const auto r = gradient_check(loss, ps);
  CHECK(r.analytic == doctest::Approx(6.0));
  CHECK(r.max_relative_error < 1e-6);
  CHECK_THROWS_AS(gradient_check(loss, ps, 1.0), InputError);
}

TEST_CASE("gradient check catches a corrupted backward rule") {
  ParameterSet ps;
  auto w = add_vector(ps, "w", {0.7, -1.3, 2.1});
  auto broken_square = [](Tape& t, Var x) {
    const auto xv = t.value(x);
    std::vector<double> y(xv.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * xv[i];
    return t.push(std::move(y), [x](Tape& tp, Var self) {
      const auto g = tp.grad(self);
      const auto v = tp.value(x);
      auto gx = tp.grad(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * v[i];  // missing factor 2
    });
  };
  auto loss = [&](Tape& t) {
    const Var sq = broken_square(t, embedding(t, ps[w], 0));
    const Var parts[] = {sq};
    return dot(t, sum(t, parts), t.constant(std::vector<double>{1, 1, 1}));
  };
  CHECK(gradient_check(loss, ps).max_relative_error > 1e-2);
}

TEST_CASE("gradient check rejects a non-finite loss") {
  ParameterSet ps;
  auto w = add_vector(ps, "w", {1.0});
  auto loss = [&](Tape& t) { return scale(t, embedding(t, ps[w], 0), std::numeric_limits<double>::infinity()); };
  CHECK_THROWS_AS(gradient_check(loss, ps), NumericError);
}

TEST_CASE("every differentiable op passes gradient check on random small shapes") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = dim(rng);
    const std::size_t h = dim(rng);
    ParameterSet ps;
    auto x = add_vector(ps, "x", random_vector(rng, m));
    auto y = add_vector(ps, "y", random_vector(rng, m));
    auto w = ps.add("w", Tensor({m, h}, random_vector(rng, m * h)));
    auto b = ps.add("b", Tensor({h}, random_vector(rng, h)));
    auto table = ps.add("table", Tensor({3, m}, random_vector(rng, 3 * m)));
    auto lw = ps.add("lstm.w", Tensor({m + h, 4 * h}, random_vector(rng, (m + h) * 4 * h, -0.5, 0.5)));
    auto lb = ps.add("lstm.b", Tensor({4 * h}, random_vector(rng, 4 * h, -0.5, 0.5)));
    const auto pm = random_vector(rng, m);
    const auto ph = random_vector(rng, h);
    const auto p2m = random_vector(rng, 2 * m);
    const auto p2h = random_vector(rng, 2 * h);
    const auto coeffs = random_vector(rng, 2);

    const std::vector<std::pair<const char*, LossBuilder>> cases = {
        {"affine", [&](Tape& t) { return project(t, affine(t, embedding(t, ps[x], 0), ps[w], ps[b]), ph); }},
        {"linear", [&](Tape& t) { return project(t, linear(t, embedding(t, ps[x], 0), ps[w]), ph); }},
        {"embedding", [&](Tape& t) { return project(t, embedding(t, ps[table], 2), pm); }},
        {"sigmoid", [&](Tape& t) { return project(t, sigmoid(t, embedding(t, ps[x], 0)), pm); }},
        {"tanh", [&](Tape& t) { return project(t, nn::tanh(t, embedding(t, ps[x], 0)), pm); }},
        {"add", [&](Tape& t) { return project(t, add(t, embedding(t, ps[x], 0), embedding(t, ps[y], 0)), pm); }},
        {"mul", [&](Tape& t) { return project(t, mul(t, embedding(t, ps[x], 0), embedding(t, ps[y], 0)), pm); }},
        {"scale", [&](Tape& t) { return project(t, scale(t, embedding(t, ps[x], 0), -1.7), pm); }},
        {"concat",
         [&](Tape& t) {
           const Var parts[] = {embedding(t, ps[x], 0), embedding(t, ps[y], 0)};
           return project(t, concat(t, parts), p2m);
         }},
        {"slice",
         [&](Tape& t) {
           const Var parts[] = {embedding(t, ps[x], 0), embedding(t, ps[y], 0)};
           return project(t, slice(t, concat(t, parts), m / 2, m), pm);
         }},
        {"dot", [&](Tape& t) { return dot(t, embedding(t, ps[x], 0), embedding(t, ps[y], 0)); }},
        {"softmax", [&](Tape& t) { return project(t, softmax(t, embedding(t, ps[x], 0)), pm); }},
        {"weighted_sum",
         [&](Tape& t) {
           const Var vs[] = {embedding(t, ps[table], 0), embedding(t, ps[table], 1), embedding(t, ps[table], 2)};
           const Var wts = slice(t, concat(t, std::vector<Var>{embedding(t, ps[x], 0), t.constant(pm)}), 0, 3);
           return project(t, weighted_sum(t, wts, vs), pm);
         }},
        {"sum",
         [&](Tape& t) {
           const Var vs[] = {embedding(t, ps[x], 0), embedding(t, ps[y], 0), embedding(t, ps[x], 0)};
           return project(t, sum(t, vs), pm);
         }},
        {"lincomb",
         [&](Tape& t) {
           const Var s[] = {dot(t, embedding(t, ps[x], 0), t.constant(pm)), dot(t, embedding(t, ps[y], 0), t.constant(pm))};
           return lincomb(t, s, coeffs);
         }},
        {"lstm_step",
         [&](Tape& t) {
           const LstmWeights lwt{&ps[lw], &ps[lb], m, h};
           Var state = t.constant(p2h);
           state = lstm_step(t, embedding(t, ps[x], 0), state, lwt);
           state = lstm_step(t, embedding(t, ps[y], 0), state, lwt);
           return project(t, state, p2h);
         }},
    };
    for (const auto& [name, loss] : cases) {
      if (std::string(name) == "weighted_sum" && m < 3) continue;
      CAPTURE(name);
      CAPTURE(m);
      CAPTURE(h);
      CHECK(gradient_check(loss, ps).max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("replaying a tape doubles every gradient exactly") {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  auto x = add_vector(ps, "x", random_vector(rng, 4));
  auto table = ps.add("table", Tensor({3, 4}, random_vector(rng, 12)));
  auto w = ps.add("w", Tensor({4, 3}, random_vector(rng, 12)));
  auto b = ps.add("b", Tensor({3}, random_vector(rng, 3)));
  Tape t;
  const Var a = affine(t, add(t, embedding(t, ps[x], 0), embedding(t, ps[table], 1)), ps[w], ps[b]);
  const Var loss = dot(t, sigmoid(t, a), t.constant(std::vector<double>{0.3, -0.2, 0.9}));
  t.backward(loss);
  std::vector<Tensor> once;
  for (auto& p : ps) once.push_back(p.grad);
  t.backward(loss);
  std::size_t i = 0;
  for (auto& p : ps) {
    for (std::size_t j = 0; j < p.grad.size(); ++j) CHECK(p.grad[j] == once[i][j] + once[i][j]);
    ++i;
  }
}

TEST_CASE("backward of a sum equals the sum of backwards") {
  std::mt19937_64 rng(8);
  ParameterSet ps;
  auto x = add_vector(ps, "x", random_vector(rng, 5));
  auto w = ps.add("w", Tensor({5, 2}, random_vector(rng, 10)));
  auto b = ps.add("b", Tensor({2}, random_vector(rng, 2)));
  auto l1 = [&](Tape& t) { return project(t, nn::tanh(t, affine(t, embedding(t, ps[x], 0), ps[w], ps[b])), {1, 2}); };
  auto l2 = [&](Tape& t) { return dot(t, embedding(t, ps[x], 0), embedding(t, ps[x], 0)); };

  auto grads_of = [&](const std::function<Var(Tape&)>& f) {
    ps.zero_grad();
    Tape t;
    t.backward(f(t));
    std::vector<Tensor> g;
    for (auto& p : ps) g.push_back(p.grad);
    return g;
  };
  const auto g1 = grads_of(l1);
  const auto g2 = grads_of(l2);
  const auto both = grads_of([&](Tape& t) { return add(t, l1(t), l2(t)); });
  for (std::size_t i = 0; i < both.size(); ++i) {
    for (std::size_t j = 0; j < both[i].size(); ++j) CHECK(both[i][j] == doctest::Approx(g1[i][j] + g2[i][j]).epsilon(1e-10));
  }
}

TEST_CASE("backward preconditions") {
  Tape off(false);
  const Var c = off.constant(std::vector<double>{1.0});
  CHECK_THROWS_AS(off.backward(c), UsageError);
  Tape t;
  CHECK_THROWS_AS(t.backward(t.constant(std::vector<double>{1.0, 2.0})), DimensionError);
}

TEST_CASE("checkpoint round trip is bitwise") {
  std::mt19937_64 rng(1);
  ParameterSet ps;
  ps.add("a", Tensor({3, 2}, random_vector(rng, 6, -1e3, 1e3)));
  ps.add("b.c", Tensor({4}, {0.0, -0.0, 1e-310, std::nextafter(1.0, 2.0)}));
  const fixture::TempDir dir("ckpt");
  const auto path = dir.path() / "m.bin";
  save_checkpoint(ps, path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.values_equal(ps));
  CHECK(serialize_parameters(loaded) == serialize_parameters(ps));
  CHECK(std::signbit(loaded.find("b.c")->value[1]));

  auto bytes = serialize_parameters(ps);
  CHECK(std::string(bytes.begin(), bytes.begin() + 9) == "PUROUTER1");
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize_parameters(bytes), IoError);
  auto truncated = serialize_parameters(ps);
  truncated.pop_back();
  CHECK_THROWS_AS(deserialize_parameters(truncated), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.bin"), IoError);

  ParameterSet other;
  other.add("a", {2, 3});
  CHECK_THROWS(load_checkpoint_into(other, path));
}
