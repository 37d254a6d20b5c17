#include "cryptofc/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cryptofc/eval.hpp"
#include "cryptofc/parallel.hpp"

namespace cryptofc::svr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Curvature floor for non-PSD pairs (sigmoid kernel).
constexpr double kTau = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Dual variables beta[0..n) are alpha (sign +1), beta[n..2n) are alpha* (sign -1).
// Minimize 1/2 beta'Q beta + p'beta subject to sign'beta = 0 and 0 <= beta <= C,
// with Q[s][t] = sign_s sign_t K[s mod n][t mod n].
class SmoSolver {
 public:
  SmoSolver(std::vector<double> gram, std::span<const double> y, const SvrConfig& cfg)
      : n_(y.size()), gram_(std::move(gram)), c_(cfg.c), tol_(cfg.tol) {
    const std::size_t l = 2 * n_;
    alpha_.assign(l, 0.0);
    sign_.resize(l);
    grad_.resize(l);
    p_.resize(l);
    for (std::size_t i = 0; i < n_; ++i) {
      sign_[i] = 1.0;
      sign_[i + n_] = -1.0;
      p_[i] = cfg.epsilon - y[i];
      p_[i + n_] = cfg.epsilon + y[i];
    }
    grad_ = p_;  // gradient at beta = 0
  }

  void run(std::size_t max_iter) {
    iterations_ = 0;
    while (true) {
      std::size_t i = 0, j = 0;
      violation_ = select_working_set(i, j);
      if (violation_ < tol_) {
        converged_ = true;
        return;
      }
      if (iterations_ >= max_iter) {
        converged_ = false;
        return;
      }
      ++iterations_;
      update_pair(i, j);
    }
  }

  double rho() const {
    double ub = kInf, lb = -kInf, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < 2 * n_; ++t) {
      const double yg = sign_[t] * grad_[t];
      if (at_upper(t)) {
        if (sign_[t] < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (at_lower(t)) {
        if (sign_[t] > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    return n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  }

  double objective() const {
    double obj = 0.0;
    for (std::size_t t = 0; t < 2 * n_; ++t) obj += alpha_[t] * (grad_[t] + p_[t]);
    return obj / 2.0;
  }

  double coef(std::size_t i) const { return alpha_[i] - alpha_[i + n_]; }
  bool converged() const { return converged_; }
  std::size_t iterations() const { return iterations_; }
  double violation() const { return violation_; }

 private:
  double k(std::size_t s, std::size_t t) const { return gram_[(s % n_) * n_ + (t % n_)]; }
  double q(std::size_t s, std::size_t t) const { return sign_[s] * sign_[t] * k(s, t); }
  bool at_upper(std::size_t t) const { return alpha_[t] >= c_; }
  bool at_lower(std::size_t t) const { return alpha_[t] <= 0.0; }

  // Maximal violating pair with second-order choice of j. Returns
  // m(alpha) - M(alpha), the KKT gap used as the stopping criterion.
  double select_working_set(std::size_t& out_i, std::size_t& out_j) const {
    const std::size_t l = 2 * n_;
    double gmax = -kInf, gmax2 = -kInf;
    std::size_t i_best = l;
    for (std::size_t t = 0; t < l; ++t) {
      if (sign_[t] > 0) {
        if (!at_upper(t) && -grad_[t] >= gmax) {
          gmax = -grad_[t];
          i_best = t;
        }
      } else if (!at_lower(t) && grad_[t] >= gmax) {
        gmax = grad_[t];
        i_best = t;
      }
    }

    std::size_t j_best = l;
    double obj_min = kInf;
    for (std::size_t t = 0; t < l; ++t) {
      double grad_diff;
      if (sign_[t] > 0) {
        if (at_lower(t)) continue;
        gmax2 = std::max(gmax2, grad_[t]);
        grad_diff = gmax + grad_[t];
      } else {
        if (at_upper(t)) continue;
        gmax2 = std::max(gmax2, -grad_[t]);
        grad_diff = gmax - grad_[t];
      }
      if (grad_diff > 0.0 && i_best < l) {
        const double qii = k(i_best, i_best), qtt = k(t, t);
        double quad = qii + qtt - 2.0 * sign_[i_best] * sign_[t] * q(i_best, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= obj_min) {
          obj_min = obj;
          j_best = t;
        }
      }
    }
    out_i = i_best;
    out_j = j_best;
    if (i_best == l || j_best == l) return 0.0;
    return gmax + gmax2;
  }

  void update_pair(std::size_t i, std::size_t j) {
    const double old_i = alpha_[i], old_j = alpha_[j];
    const double qii = k(i, i), qjj = k(j, j), qij = q(i, j);
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    if (sign_[i] != sign_[j]) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) {
          aj = 0.0;
          ai = diff;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > c_) {
          ai = c_;
          aj = c_ - diff;
        }
      } else if (aj > c_) {
        aj = c_;
        ai = c_ + diff;
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) {
          ai = c_;
          aj = sum - c_;
        }
      } else if (aj < 0.0) {
        aj = 0.0;
        ai = sum;
      }
      if (sum > c_) {
        if (aj > c_) {
          aj = c_;
          ai = sum - c_;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = sum;
      }
    }
    const double di = ai - old_i, dj = aj - old_j;
    for (std::size_t t = 0; t < 2 * n_; ++t) grad_[t] += q(i, t) * di + q(j, t) * dj;
  }

  std::size_t n_;
  std::vector<double> gram_;
  double c_;
  double tol_;
  std::vector<double> alpha_, sign_, grad_, p_;
  bool converged_ = false;
  std::size_t iterations_ = 0;
  double violation_ = 0.0;
};

void check_xy(std::span<const FeatureVector> x, std::span<const double> y) {
  if (x.size() != y.size()) throw SvrError("svr: X and y lengths differ");
  if (x.size() < 2) throw SvrError("svr: need at least two samples");
  for (const auto& row : x) {
    if (row.size() != x.front().size()) throw SvrError("svr: ragged feature matrix");
  }
}

std::vector<double> gram_matrix(std::span<const FeatureVector> x, const KernelSpec& kernel) {
  const std::size_t n = x.size();
  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernel_eval(kernel, x[i], x[j]);
      gram[i * n + j] = v;
      gram[j * n + i] = v;
    }
  }
  return gram;
}

}  // namespace

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Sigmoid: return "sigmoid";
  }
  return "rbf";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "linear") return KernelKind::Linear;
  if (name == "rbf") return KernelKind::Rbf;
  if (name == "sigmoid") return KernelKind::Sigmoid;
  throw SvrError("unknown kernel '" + std::string(name) + "'");
}

void KernelSpec::validate() const {
  if (kind != KernelKind::Linear && !(gamma > 0.0)) throw SvrError("svr: gamma must be > 0");
}

void SvrConfig::validate() const {
  kernel.validate();
  if (!(c > 0.0)) throw SvrError("svr: C must be > 0");
  if (!(epsilon >= 0.0)) throw SvrError("svr: epsilon must be >= 0");
  if (!(tol > 0.0)) throw SvrError("svr: tol must be > 0");
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z) {
  if (x.size() != z.size()) throw SvrError("kernel_eval: dimension mismatch");
  switch (spec.kind) {
    case KernelKind::Linear:
      return dot(x, z);
    case KernelKind::Rbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - z[i]) * (x[i] - z[i]);
      return std::exp(-spec.gamma * d2);
    }
    case KernelKind::Sigmoid:
      return std::tanh(spec.gamma * dot(x, z) + spec.coef0);
  }
  return 0.0;
}

SvrModel fit(std::span<const FeatureVector> x, std::span<const double> y, const SvrConfig& cfg) {
  cfg.validate();
  check_xy(x, y);
  const std::size_t n = y.size();

  SvrModel model;
  model.kernel = cfg.kernel;
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
    model.bias = y[0];
    model.dual_objective = 0.0;
    return model;
  }

  SmoSolver solver(gram_matrix(x, cfg.kernel), y, cfg);
  solver.run(cfg.max_iter > 0 ? cfg.max_iter : 100 * n);

  model.bias = -solver.rho();
  model.converged = solver.converged();
  model.iterations = solver.iterations();
  model.kkt_violation = solver.violation();
  model.dual_objective = solver.objective();
  for (std::size_t i = 0; i < n; ++i) {
    const double coef = solver.coef(i);
    if (coef != 0.0) {
      model.support_vectors.push_back(x[i]);
      model.dual_coefs.push_back(coef);
    }
  }
  return model;
}

double predict(const SvrModel& model, std::span<const double> x) {
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    f += model.dual_coefs[i] * kernel_eval(model.kernel, model.support_vectors[i], x);
  }
  return f;
}

std::vector<double> predict(const SvrModel& model, std::span<const FeatureVector> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict(model, x));
  return out;
}

double dual_objective(std::span<const FeatureVector> x, std::span<const double> y, const KernelSpec& kernel,
                      double epsilon, std::span<const double> coefs) {
  check_xy(x, y);
  if (coefs.size() != y.size()) throw SvrError("dual_objective: coefficient count mismatch");
  const auto gram = gram_matrix(x, kernel);
  const std::size_t n = y.size();
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) quad += coefs[i] * coefs[j] * gram[i * n + j];
    lin += epsilon * std::fabs(coefs[i]) - y[i] * coefs[i];
  }
  return 0.5 * quad + lin;
}

std::vector<std::size_t> fold_bounds(std::size_t n, std::size_t k) {
  std::vector<std::size_t> bounds(k + 1);
  for (std::size_t f = 0; f <= k; ++f) bounds[f] = f * n / k;
  return bounds;
}

SvrGrid grid_search(std::span<const FeatureVector> x, std::span<const double> y, const GridSpec& spec) {
  if (spec.folds < 2) throw SvrError("grid_search: need at least 2 folds");
  if (spec.kernels.empty() || spec.gammas.empty() || spec.cs.empty()) {
    throw SvrError("grid_search: empty parameter list");
  }
  if (x.size() != y.size()) throw SvrError("grid_search: X and y lengths differ");
  const std::size_t n = y.size();
  const auto bounds = fold_bounds(n, spec.folds);
  for (std::size_t f = 0; f < spec.folds; ++f) {
    const std::size_t held = bounds[f + 1] - bounds[f];
    if (held == 0 || n - held < 2) {
      throw SvrError("grid_search: TooFewSamples (" + std::to_string(n) + " samples for " +
                     std::to_string(spec.folds) + " folds)");
    }
  }

  SvrGrid grid;
  for (auto kind : spec.kernels) {
    for (double gamma : spec.gammas) {
      for (double c : spec.cs) grid.cells.push_back({kind, gamma, c, 0.0, true});
    }
  }

  parallel_for(grid.cells.size(), [&](std::size_t idx) {
    auto& cell = grid.cells[idx];
    SvrConfig cfg;
    cfg.kernel = {cell.kernel, cell.gamma, spec.coef0};
    cfg.c = cell.c;
    cfg.epsilon = spec.epsilon;
    cfg.tol = spec.tol;
    cfg.max_iter = spec.max_iter;

    std::vector<double> fold_mse(spec.folds);
    for (std::size_t f = 0; f < spec.folds; ++f) {
      std::vector<FeatureVector> x_train, x_val;
      std::vector<double> y_train, y_val;
      for (std::size_t i = 0; i < n; ++i) {
        const bool held = i >= bounds[f] && i < bounds[f + 1];
        (held ? x_val : x_train).push_back(x[i]);
        (held ? y_val : y_train).push_back(y[i]);
      }
      const auto model = fit(x_train, y_train, cfg);
      cell.converged = cell.converged && model.converged;
      fold_mse[f] = eval::mse(y_val, predict(model, x_val));
    }
    cell.cv_mse = eval::compensated_sum(fold_mse) / static_cast<double>(spec.folds);
  });

  for (std::size_t idx = 1; idx < grid.cells.size(); ++idx) {
    if (grid.cells[idx].cv_mse < grid.cells[grid.best].cv_mse) grid.best = idx;
  }
  return grid;
}

}  // namespace cryptofc::svr
