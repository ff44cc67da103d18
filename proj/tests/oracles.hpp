#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's solvers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Euclidean projection of y onto {a >= 0, sum a = r}.
inline Vec project_simplex(const Vec& y, long double r) {
  std::vector<long double> s(y.data(), y.data() + y.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  long double cumulative = 0, theta = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    cumulative += s[k];
    const long double t = (cumulative - r) / static_cast<long double>(k + 1);
    if (k + 1 == s.size() || s[k + 1] <= t) {
      theta = t;
      break;
    }
  }
  return (y.array() - theta).max(0.0L).matrix();
}

/// sum_t p^t a^t + pD sum_t pi^t (a^t)^delta.
inline long double pp_objective(const Vec& a, const Vec& p, long double pd, long double delta,
                                const Vec& pi) {
  long double f = 0;
  for (Eigen::Index t = 0; t < a.size(); ++t)
    f += p(t) * a(t) + pd * pi(t) * std::pow(a(t), delta);
  return f;
}

/// Projected gradient with Armijo backtracking on the simplex of mass r.
inline Vec minimize_pp(const Vec& p, long double pd, long double delta, const Vec& pi,
                       long double r, int iterations = 20000) {
  const Eigen::Index n = p.size();
  Vec a = Vec::Constant(n, r / static_cast<long double>(n));
  long double f = pp_objective(a, p, pd, delta, pi);
  long double step = 1.0L;
  for (int k = 0; k < iterations; ++k) {
    Vec g(n);
    for (Eigen::Index t = 0; t < n; ++t)
      g(t) = p(t) + pd * pi(t) * delta * std::pow(a(t), delta - 1);
    step *= 2;
    for (int back = 0; back < 80; ++back) {
      const Vec next = project_simplex(a - step * g, r);
      const long double fn = pp_objective(next, p, pd, delta, pi);
      const Vec d = next - a;
      if (fn <= f + g.dot(d) + d.squaredNorm() / (2 * step) || back == 79) {
        if (fn < f) {
          a = next;
          f = fn;
        }
        break;
      }
      step /= 2;
    }
  }
  return a;
}

/// Every split of r over T periods on the lattice r / k.
inline std::vector<Vec> simplex_grid(long double r, Eigen::Index periods, int k) {
  std::vector<Vec> out;
  std::vector<int> parts(static_cast<std::size_t>(periods), 0);
  std::function<void(Eigen::Index, int)> rec = [&](Eigen::Index t, int left) {
    if (t == periods - 1) {
      parts[static_cast<std::size_t>(t)] = left;
      Vec v(periods);
      for (Eigen::Index s = 0; s < periods; ++s)
        v(s) = r * parts[static_cast<std::size_t>(s)] / static_cast<long double>(k);
      out.push_back(v);
      return;
    }
    for (int j = 0; j <= left; ++j) {
      parts[static_cast<std::size_t>(t)] = j;
      rec(t + 1, left - j);
    }
  };
  rec(0, k);
  return out;
}

/// Earliest argmax.
template <typename V>
Eigen::Index argmax(const V& v) {
  Eigen::Index best = 0;
  for (Eigen::Index t = 1; t < v.size(); ++t)
    if (v(t) > v(best)) best = t;
  return best;
}

}  // namespace oracle
