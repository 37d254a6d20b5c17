#pragma once

// Brute-force solver for the epsilon-SVR dual, for instances of a handful of
// points: accelerated projected gradient (FISTA with adaptive restart) over
// beta = [alpha; alpha*], with the exact projection onto
// {0 <= beta <= C, sum(alpha) = sum(alpha*)} found by bisection on the
// multiplier of the equality constraint. Kernels are evaluated here, not via
// the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace oracle {

enum class OracleKernel { Linear, Rbf, Sigmoid };

inline double oracle_kernel(OracleKernel kind, double gamma, double coef0, const std::vector<double>& a,
                            const std::vector<double>& b) {
  double dot = 0.0, dist2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    dist2 += (a[i] - b[i]) * (a[i] - b[i]);
  }
  switch (kind) {
    case OracleKernel::Linear: return dot;
    case OracleKernel::Rbf: return std::exp(-gamma * dist2);
    case OracleKernel::Sigmoid: return std::tanh(gamma * dot + coef0);
  }
  return 0.0;
}

struct QpSolution {
  std::vector<double> coefs;  // alpha - alpha*
  std::vector<double> alpha, alpha_star;
  double objective = 0.0;     // 1/2 c'Kc + eps * sum(alpha + alpha*) - y'c
  double bias = 0.0;
  std::size_t iterations = 0;
  std::vector<std::vector<double>> gram;
};

struct SvrQpOracle {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  OracleKernel kind = OracleKernel::Rbf;
  double gamma = 0.1;
  double coef0 = 0.0;
  double c = 1.0;
  double epsilon = 0.1;
  std::size_t max_iter = 400000;
  double residual_tol = 1e-11;

  double objective(const std::vector<std::vector<double>>& k, const std::vector<double>& b) const {
    const std::size_t n = y.size();
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ci = b[i] - b[i + n];
      double kc = 0.0;
      for (std::size_t j = 0; j < n; ++j) kc += k[i][j] * (b[j] - b[j + n]);
      obj += 0.5 * ci * kc + epsilon * (b[i] + b[i + n]) - y[i] * ci;
    }
    return obj;
  }

  // Euclidean projection onto the feasible set.
  std::vector<double> project(const std::vector<double>& z) const {
    const std::size_t n = y.size();
    auto clip = [&](double v) { return std::min(c, std::max(0.0, v)); };
    auto balance = [&](double lambda) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += clip(z[i] - lambda) - clip(z[i + n] + lambda);
      return s;
    };
    double bound = c;
    for (double v : z) bound = std::max(bound, std::fabs(v) + c);
    double lo = -bound, hi = bound;  // balance(lo) >= 0 >= balance(hi)
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (balance(mid) > 0.0 ? lo : hi) = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    std::vector<double> out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = clip(z[i] - lambda);
      out[i + n] = clip(z[i + n] + lambda);
    }
    return out;
  }

  QpSolution solve() const {
    const std::size_t n = y.size();
    QpSolution sol;
    sol.gram.assign(n, std::vector<double>(n));
    double row_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        sol.gram[i][j] = oracle_kernel(kind, gamma, coef0, x[i], x[j]);
        row += std::fabs(sol.gram[i][j]);
      }
      row_max = std::max(row_max, row);
    }
    const auto& k = sol.gram;
    // Hessian of the 2n-variable problem is [K -K; -K K]; its norm is at most
    // twice K's largest absolute row sum.
    const double step = 1.0 / std::max(2.0 * row_max, 1e-12);

    auto gradient = [&](const std::vector<double>& b) {
      std::vector<double> g(2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        double kc = 0.0;
        for (std::size_t j = 0; j < n; ++j) kc += k[i][j] * (b[j] - b[j + n]);
        g[i] = kc + epsilon - y[i];
        g[i + n] = -kc + epsilon + y[i];
      }
      return g;
    };

    std::vector<double> beta(2 * n, 0.0), momentum = beta, next(2 * n), z(2 * n);
    double t = 1.0;
    double f_prev = objective(k, beta);
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
      const auto g = gradient(momentum);
      for (std::size_t i = 0; i < 2 * n; ++i) z[i] = momentum[i] - step * g[i];
      next = project(z);
      const double f_next = objective(k, next);
      if (f_next > f_prev && t > 1.0) {
        // Restart: drop momentum and retry from the current iterate. A plain
        // projected step (t == 1) is always accepted, so this cannot cycle.
        momentum = beta;
        t = 1.0;
        continue;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      for (std::size_t i = 0; i < 2 * n; ++i) momentum[i] = next[i] + ((t - 1.0) / t_next) * (next[i] - beta[i]);
      beta = next;
      t = t_next;
      f_prev = f_next;
      if (it % 16 == 0) {
        // Projected-gradient residual at the current iterate.
        const auto gb = gradient(beta);
        for (std::size_t i = 0; i < 2 * n; ++i) z[i] = beta[i] - step * gb[i];
        const auto p = project(z);
        double res = 0.0;
        for (std::size_t i = 0; i < 2 * n; ++i) res = std::max(res, std::fabs(p[i] - beta[i]) / step);
        if (res <= residual_tol) break;
      }
    }
    sol.iterations = it;

    sol.alpha.assign(beta.begin(), beta.begin() + static_cast<long>(n));
    sol.alpha_star.assign(beta.begin() + static_cast<long>(n), beta.end());
    sol.coefs.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.coefs[i] = sol.alpha[i] - sol.alpha_star[i];
    sol.objective = objective(k, beta);

    // Bias from the KKT conditions: average over free multipliers, else the
    // midpoint of the feasible interval.
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    const double slack = 1e-9 * c;
    for (std::size_t i = 0; i < n; ++i) {
      double kc = 0.0;
      for (std::size_t j = 0; j < n; ++j) kc += k[i][j] * sol.coefs[j];
      const double b_alpha = y[i] - epsilon - kc;  // alpha_i free => b equals this
      const double b_star = y[i] + epsilon - kc;   // alpha*_i free => b equals this
      const double a = sol.alpha[i], s = sol.alpha_star[i];
      if (a > slack && a < c - slack) {
        sum_free += b_alpha;
        ++n_free;
      } else if (a <= slack) {
        lower = std::max(lower, b_alpha);
      } else {
        upper = std::min(upper, b_alpha);
      }
      if (s > slack && s < c - slack) {
        sum_free += b_star;
        ++n_free;
      } else if (s <= slack) {
        upper = std::min(upper, b_star);
      } else {
        lower = std::max(lower, b_star);
      }
    }
    sol.bias = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (lower + upper);
    return sol;
  }

  double predict(const QpSolution& sol, const std::vector<double>& at) const {
    double f = sol.bias;
    for (std::size_t i = 0; i < x.size(); ++i) f += sol.coefs[i] * oracle_kernel(kind, gamma, coef0, x[i], at);
    return f;
  }
};

/// True when the symmetric matrix admits a Cholesky factorization after a
/// tiny diagonal shift, i.e. it is (numerically) positive semidefinite.
inline bool is_psd(std::vector<std::vector<double>> a, double shift = 1e-10) {
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) a[i][i] += shift;
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j][k] * a[j][k];
    if (d <= 0.0) return false;
    d = std::sqrt(d);
    a[j][j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      a[i][j] = s / d;
    }
  }
  return true;
}

}  // namespace oracle
