#include "purouter/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "purouter/errors.hpp"

namespace purouter::nn {
namespace {

void require_matrix(const Parameter& p, const char* op) {
  if (p.value.rank() != 2) {
    throw DimensionError(std::string(op) + ": parameter '" + p.name + "' must be 2-D, got " +
                         shape_string(p.value.shape()));
  }
}

void require_same_size(const Tape& tape, Var a, Var b, const char* op) {
  if (tape.size_of(a) != tape.size_of(b)) {
    throw DimensionError(std::string(op) + ": shape [" + std::to_string(tape.size_of(a)) + "] vs [" +
                         std::to_string(tape.size_of(b)) + "]");
  }
}

// y += a * x
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline double dot_raw(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

Var linear_impl(Tape& tape, Var x, Parameter& w, Parameter* b, const char* op) {
  require_matrix(w, op);
  const std::size_t m = w.value.rows();
  const std::size_t h = w.value.cols();
  if (tape.size_of(x) != m) {
    throw DimensionError(std::string(op) + ": input shape [" + std::to_string(tape.size_of(x)) +
                         "] does not match weight '" + w.name + "' shape " + shape_string(w.value.shape()));
  }
  if (b != nullptr && b->value.size() != h) {
    throw DimensionError(std::string(op) + ": bias '" + b->name + "' shape " + shape_string(b->value.shape()) +
                         " does not match weight '" + w.name + "' shape " + shape_string(w.value.shape()));
  }
  std::vector<double> out(h, 0.0);
  if (b != nullptr) std::copy(b->value.storage().begin(), b->value.storage().end(), out.begin());
  const auto xv = tape.value(x);
  const double* wd = w.value.storage().data();
  for (std::size_t j = 0; j < m; ++j) axpy(xv[j], wd + j * h, out.data(), h);

  return tape.push(std::move(out), [x, &w, b, m, h](Tape& t, Var self) {
    const auto g = t.grad(self);
    const auto xv = t.value(x);
    auto gx = t.grad(x);
    auto gw = t.dense_grad(w);
    const double* wd = w.value.storage().data();
    for (std::size_t j = 0; j < m; ++j) {
      gx[j] += dot_raw(wd + j * h, g.data(), h);
      axpy(xv[j], g.data(), gw.data() + j * h, h);
    }
    if (b != nullptr) {
      auto gb = t.dense_grad(*b);
      for (std::size_t i = 0; i < h; ++i) gb[i] += g[i];
    }
  });
}

}  // namespace

Var affine(Tape& tape, Var x, Parameter& w, Parameter& b) { return linear_impl(tape, x, w, &b, "affine"); }

Var linear(Tape& tape, Var x, Parameter& w) { return linear_impl(tape, x, w, nullptr, "linear"); }

Var embedding(Tape& tape, Parameter& table, std::size_t row) {
  require_matrix(table, "embedding");
  if (row >= table.value.rows()) {
    throw InputError("embedding: row " + std::to_string(row) + " out of range for '" + table.name + "' " +
                     shape_string(table.value.shape()));
  }
  const auto r = table.value.row(row);
  return tape.push(std::vector<double>(r.begin(), r.end()), [&table, row](Tape& t, Var self) {
    const auto g = t.grad(self);
    auto gr = t.row_grad(table, row);
    for (std::size_t i = 0; i < g.size(); ++i) gr[i] += g[i];
  });
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var sigmoid(Tape& tape, Var x) {
  const auto xv = tape.value(x);
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(xv[i]);
  return tape.push(std::move(out), [x](Tape& t, Var self) {
    const auto y = t.value(self);
    const auto g = t.grad(self);
    auto gx = t.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Tape& tape, Var x) {
  const auto xv = tape.value(x);
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  return tape.push(std::move(out), [x](Tape& t, Var self) {
    const auto y = t.value(self);
    const auto g = t.grad(self);
    auto gx = t.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var add(Tape& tape, Var a, Var b) {
  require_same_size(tape, a, b, "add");
  const auto av = tape.value(a);
  const auto bv = tape.value(b);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return tape.push(std::move(out), [a, b](Tape& t, Var self) {
    const auto g = t.grad(self);
    auto ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto gb = t.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var mul(Tape& tape, Var a, Var b) {
  require_same_size(tape, a, b, "mul");
  const auto av = tape.value(a);
  const auto bv = tape.value(b);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tape.push(std::move(out), [a, b](Tape& t, Var self) {
    const auto g = t.grad(self);
    const auto av = t.value(a);
    const auto bv = t.value(b);
    auto ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    auto gb = t.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Var scale(Tape& tape, Var a, double factor) {
  const auto av = tape.value(a);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return tape.push(std::move(out), [a, factor](Tape& t, Var self) {
    const auto g = t.grad(self);
    auto ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var concat(Tape& tape, std::span<const Var> parts) {
  std::vector<Var> ps(parts.begin(), parts.end());
  std::vector<double> out;
  for (Var p : ps) {
    const auto v = tape.value(p);
    out.insert(out.end(), v.begin(), v.end());
  }
  return tape.push(std::move(out), [ps = std::move(ps)](Tape& t, Var self) {
    const auto g = t.grad(self);
    std::size_t off = 0;
    for (Var p : ps) {
      auto gp = t.grad(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
      off += gp.size();
    }
  });
}

Var slice(Tape& tape, Var x, std::size_t offset, std::size_t length) {
  const auto xv = tape.value(x);
  if (offset + length > xv.size()) {
    throw DimensionError("slice: [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                         ") outside shape [" + std::to_string(xv.size()) + "]");
  }
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(offset),
                          xv.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return tape.push(std::move(out), [x, offset](Tape& t, Var self) {
    const auto g = t.grad(self);
    auto gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
  });
}

Var dot(Tape& tape, Var a, Var b) {
  require_same_size(tape, a, b, "dot");
  const auto av = tape.value(a);
  const auto bv = tape.value(b);
  const double s = dot_raw(av.data(), bv.data(), av.size());
  return tape.push({s}, [a, b](Tape& t, Var self) {
    const double g = t.grad(self)[0];
    const auto av = t.value(a);
    const auto bv = t.value(b);
    auto ga = t.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
    auto gb = t.grad(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
  });
}

Var softmax(Tape& tape, Var x) {
  const auto xv = tape.value(x);
  if (xv.empty()) throw DimensionError("softmax: empty input");
  const double mx = *std::max_element(xv.begin(), xv.end());
  std::vector<double> out(xv.size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(xv[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return tape.push(std::move(out), [x](Tape& t, Var self) {
    const auto y = t.value(self);
    const auto g = t.grad(self);
    const double gy = dot_raw(g.data(), y.data(), y.size());
    auto gx = t.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - gy);
  });
}

Var weighted_sum(Tape& tape, Var weights, std::span<const Var> vectors) {
  if (tape.size_of(weights) != vectors.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(tape.size_of(weights)) + " weights for " +
                         std::to_string(vectors.size()) + " vectors");
  }
  if (vectors.empty()) throw DimensionError("weighted_sum: no vectors");
  std::vector<Var> vs(vectors.begin(), vectors.end());
  const std::size_t e = tape.size_of(vs.front());
  for (Var v : vs) require_same_size(tape, vs.front(), v, "weighted_sum");
  const auto w = tape.value(weights);
  std::vector<double> out(e, 0.0);
  for (std::size_t i = 0; i < vs.size(); ++i) axpy(w[i], tape.value(vs[i]).data(), out.data(), e);
  return tape.push(std::move(out), [weights, vs = std::move(vs)](Tape& t, Var self) {
    const auto g = t.grad(self);
    const auto w = t.value(weights);
    auto gw = t.grad(weights);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      gw[i] += dot_raw(g.data(), t.value(vs[i]).data(), g.size());
      axpy(w[i], g.data(), t.grad(vs[i]).data(), g.size());
    }
  });
}

Var sum(Tape& tape, std::span<const Var> vectors) {
  if (vectors.empty()) throw DimensionError("sum: no inputs");
  std::vector<Var> vs(vectors.begin(), vectors.end());
  std::vector<double> out(tape.size_of(vs.front()), 0.0);
  for (Var v : vs) {
    require_same_size(tape, vs.front(), v, "sum");
    const auto vv = tape.value(v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vv[i];
  }
  return tape.push(std::move(out), [vs = std::move(vs)](Tape& t, Var self) {
    const auto g = t.grad(self);
    for (Var v : vs) {
      auto gv = t.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var lincomb(Tape& tape, std::span<const Var> scalars, std::span<const double> coeffs) {
  if (scalars.size() != coeffs.size()) {
    throw DimensionError("lincomb: " + std::to_string(scalars.size()) + " terms, " +
                         std::to_string(coeffs.size()) + " coefficients");
  }
  std::vector<Var> ss(scalars.begin(), scalars.end());
  std::vector<double> cs(coeffs.begin(), coeffs.end());
  double s = 0.0;
  for (std::size_t i = 0; i < ss.size(); ++i) s += cs[i] * tape.scalar(ss[i]);
  return tape.push({s}, [ss = std::move(ss), cs = std::move(cs)](Tape& t, Var self) {
    const double g = t.grad(self)[0];
    for (std::size_t i = 0; i < ss.size(); ++i) t.grad(ss[i])[0] += g * cs[i];
  });
}

Var lstm_step(Tape& tape, Var x, Var state, const LstmWeights& lw) {
  const std::size_t d = lw.input;
  const std::size_t h = lw.hidden;
  Parameter& w = *lw.w;
  Parameter& b = *lw.b;
  if (w.value.rank() != 2 || w.value.rows() != d + h || w.value.cols() != 4 * h || b.value.size() != 4 * h) {
    throw DimensionError("lstm: weights '" + w.name + "' " + shape_string(w.value.shape()) + " / '" + b.name +
                         "' " + shape_string(b.value.shape()) + " do not fit input " + std::to_string(d) +
                         ", hidden " + std::to_string(h));
  }
  if (tape.size_of(x) != d) {
    throw DimensionError("lstm: input shape [" + std::to_string(tape.size_of(x)) + "] vs expected [" +
                         std::to_string(d) + "]");
  }
  if (tape.size_of(state) != 2 * h) {
    throw DimensionError("lstm: state shape [" + std::to_string(tape.size_of(state)) + "] vs expected [" +
                         std::to_string(2 * h) + "]");
  }

  const std::size_t g4 = 4 * h;
  const double* wd = w.value.storage().data();
  const auto xv = tape.value(x);
  const auto sv = tape.value(state);

  // gates: [i f g o] after nonlinearity, plus tanh(c_t)
  auto cache = std::make_shared<std::vector<double>>(g4 + h);
  auto& gates = *cache;
  std::copy(b.value.storage().begin(), b.value.storage().end(), gates.begin());
  for (std::size_t j = 0; j < d; ++j) axpy(xv[j], wd + j * g4, gates.data(), g4);
  for (std::size_t j = 0; j < h; ++j) axpy(sv[j], wd + (d + j) * g4, gates.data(), g4);

  std::vector<double> out(2 * h);
  for (std::size_t u = 0; u < h; ++u) {
    const double ig = sigmoid(gates[u]);
    const double fg = sigmoid(gates[h + u]);
    const double cg = std::tanh(gates[2 * h + u]);
    const double og = sigmoid(gates[3 * h + u]);
    gates[u] = ig;
    gates[h + u] = fg;
    gates[2 * h + u] = cg;
    gates[3 * h + u] = og;
    const double c = fg * sv[h + u] + ig * cg;
    const double tc = std::tanh(c);
    gates[g4 + u] = tc;
    out[u] = og * tc;
    out[h + u] = c;
  }

  return tape.push(std::move(out), [x, state, &w, &b, d, h, cache](Tape& t, Var self) {
    const std::size_t g4 = 4 * h;
    const auto& gates = *cache;
    const auto g = t.grad(self);
    const auto xv = t.value(x);
    const auto sv = t.value(state);
    std::vector<double> dz(g4);
    auto gs = t.grad(state);
    for (std::size_t u = 0; u < h; ++u) {
      const double ig = gates[u];
      const double fg = gates[h + u];
      const double cg = gates[2 * h + u];
      const double og = gates[3 * h + u];
      const double tc = gates[g4 + u];
      const double dh = g[u];
      const double dc = g[h + u] + dh * og * (1.0 - tc * tc);
      dz[u] = dc * cg * ig * (1.0 - ig);
      dz[h + u] = dc * sv[h + u] * fg * (1.0 - fg);
      dz[2 * h + u] = dc * ig * (1.0 - cg * cg);
      dz[3 * h + u] = dh * tc * og * (1.0 - og);
      gs[h + u] += dc * fg;
    }
    const double* wd = w.value.storage().data();
    auto gw = t.dense_grad(w);
    auto gb = t.dense_grad(b);
    for (std::size_t i = 0; i < g4; ++i) gb[i] += dz[i];
    auto gx = t.grad(x);
    for (std::size_t j = 0; j < d; ++j) {
      gx[j] += dot_raw(wd + j * g4, dz.data(), g4);
      axpy(xv[j], dz.data(), gw.data() + j * g4, g4);
    }
    for (std::size_t j = 0; j < h; ++j) {
      gs[j] += dot_raw(wd + (d + j) * g4, dz.data(), g4);
      axpy(sv[j], dz.data(), gw.data() + (d + j) * g4, g4);
    }
  });
}

std::pair<Var, Var> lstm_cell(Tape& tape, Var x, Var h_prev, Var c_prev, const LstmWeights& weights) {
  const Var parts[] = {h_prev, c_prev};
  const Var state = concat(tape, parts);
  const Var next = lstm_step(tape, x, state, weights);
  return {slice(tape, next, 0, weights.hidden), slice(tape, next, weights.hidden, weights.hidden)};
}

}  // namespace purouter::nn
