#pragma once

// Straightforward reference implementations used to cross-check the library.
// Nothing here calls into purouter, so a shared bug cannot hide.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace oracle {

using Real = long double;

// The clamp bounds are the float64 values the library works with; 1 - 1e-12
// is not representable, and near the bound log(1 - p) magnifies the gap.
inline Real clamp(Real p) {
  const Real lo = static_cast<Real>(1e-12);
  const Real hi = static_cast<Real>(1.0 - 1e-12);
  return p < lo ? lo : (p > hi ? hi : p);
}

inline Real bce(const std::vector<double>& o, const std::vector<double>& t) {
  Real s = 0.0L;
  for (std::size_t i = 0; i < o.size(); ++i) {
    const Real p = clamp(o[i]);
    s -= static_cast<Real>(t[i]) * std::log(p) + (1.0L - static_cast<Real>(t[i])) * std::log(1.0L - p);
  }
  return s;
}

inline Real negative_feedback(const std::vector<double>& o, std::size_t j) {
  const double top = *std::max_element(o.begin(), o.end());
  if (o[j] < top) return 0.0L;
  return -std::log(1.0L - clamp(o[j]));
}

inline Real logistic(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

inline Real self_distillation(const std::vector<double>& o, const std::vector<double>& logits, double temperature) {
  Real s = 0.0L;
  for (std::size_t i = 0; i < o.size(); ++i) {
    const Real soft = logistic(static_cast<Real>(logits[i]) / temperature);
    const Real p = clamp(o[i]);
    s -= soft * std::log(p) + (1.0L - soft) * std::log(1.0L - p);
  }
  return s;
}

inline Real alpha(int t, double base = 0.95) {
  Real a = 1.0L;
  for (int i = 0; i < t; ++i) a *= base;
  return 1.0L - a;
}

inline Real combined(Real lb, Real ld, Real ls, Real ln, int t, double beta, double base = 0.95) {
  const Real a = alpha(t, base);
  return (1.0L - a) * lb + a * (ld + ls) + beta * ln;
}

inline Real hinge(const std::vector<double>& s, const std::vector<std::size_t>& gold, double margin) {
  std::vector<bool> is_gold(s.size(), false);
  for (auto g : gold) is_gold[g] = true;
  Real total = 0.0L;
  int pairs = 0;
  for (std::size_t g = 0; g < s.size(); ++g) {
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (!is_gold[g] || is_gold[b]) continue;
      total += std::max(0.0L, static_cast<Real>(margin) - s[g] + s[b]);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0L : total / pairs;
}

/// Pseudo sets after every epoch, recomputed from scratch out of the whole
/// prediction history.
inline std::vector<std::vector<std::size_t>> streak_pseudo_sets(const std::vector<std::vector<double>>& trace,
                                                                std::size_t gt, std::size_t p, std::size_t r) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t e = 0; e < trace.size(); ++e) {
    std::vector<std::size_t> cands;
    for (std::size_t d = 0; d < trace[e].size(); ++d) {
      if (d == gt) continue;
      std::size_t run = 0;
      for (std::size_t back = e + 1; back-- > 0;) {
        if (trace[back][d] > trace[back][gt]) {
          ++run;
        } else {
          break;
        }
      }
      if (run >= r) cands.push_back(d);
    }
    const auto& now = trace[e];
    std::stable_sort(cands.begin(), cands.end(), [&](std::size_t a, std::size_t b) { return now[a] > now[b]; });
    if (cands.size() > p) cands.resize(p);
    std::sort(cands.begin(), cands.end());
    out.push_back(cands);
  }
  return out;
}

inline double dcg(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (std::find(relevant.begin(), relevant.end(), ranked[i]) != relevant.end()) {
      s += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  return s;
}

/// nDCG with the ideal DCG taken as the maximum over every ordered k-tuple of
/// distinct items drawn from [0, universe).
inline double ndcg_exhaustive(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant,
                              std::size_t k, std::size_t universe) {
  std::vector<std::size_t> items(universe);
  std::iota(items.begin(), items.end(), std::size_t{0});
  double best = 0.0;
  // every permutation of the universe, truncated to its first k entries
  do {
    best = std::max(best, dcg(items, relevant, k));
  } while (std::next_permutation(items.begin(), items.end()));
  return dcg(ranked, relevant, k) / best;
}

}  // namespace oracle
