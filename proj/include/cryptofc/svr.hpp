#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cryptofc::svr {

using FeatureVector = std::vector<double>;

class SvrError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class KernelKind { Linear, Rbf, Sigmoid };

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 0.1;  // unused by the linear kernel
  double coef0 = 0.0;  // sigmoid only

  void validate() const;
};

/// linear: x.z   rbf: exp(-gamma |x - z|^2)   sigmoid: tanh(gamma x.z + coef0)
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z);

struct SvrConfig {
  KernelSpec kernel;
  double c = 1.0;
  double epsilon = 0.1;
  double tol = 1e-3;
  std::size_t max_iter = 0;  // 0 selects 100 * n

  void validate() const;
};

struct SvrModel {
  std::vector<FeatureVector> support_vectors;
  std::vector<double> dual_coefs;  // alpha_i - alpha_i*, each in [-C, C]
  double bias = 0.0;
  KernelSpec kernel;

  // Solver diagnostics.
  bool converged = true;
  std::size_t iterations = 0;
  double kkt_violation = 0.0;
  double dual_objective = 0.0;  // minimized form: 1/2 b'Qb + p'b over the 2n dual variables
};

/// Solves the epsilon-insensitive dual by SMO with second-order working-set
/// selection on a dense Gram matrix. When max_iter is hit the model is still
/// returned with converged == false and the attained violation.
SvrModel fit(std::span<const FeatureVector> x, std::span<const double> y, const SvrConfig& cfg);

double predict(const SvrModel& model, std::span<const double> x);
std::vector<double> predict(const SvrModel& model, std::span<const FeatureVector> xs);

/// Dual objective 1/2 c'Kc + eps |c|_1 - y'c evaluated at coefficient vector
/// `coefs` (one per training point). Matches SvrModel::dual_objective at an
/// optimum where alpha_i * alpha_i* = 0.
double dual_objective(std::span<const FeatureVector> x, std::span<const double> y, const KernelSpec& kernel,
                      double epsilon, std::span<const double> coefs);

struct GridCell {
  KernelKind kernel = KernelKind::Rbf;
  double gamma = 0.0;
  double c = 0.0;
  double cv_mse = 0.0;
  bool converged = true;  // every fold's fit converged
};

struct SvrGrid {
  std::vector<GridCell> cells;  // kernel-major, then gamma, then C, in input order
  std::size_t best = 0;
};

struct GridSpec {
  std::vector<KernelKind> kernels{KernelKind::Rbf, KernelKind::Sigmoid, KernelKind::Linear};
  std::vector<double> gammas{0.001, 0.01, 0.1, 1.0};
  std::vector<double> cs{1e0, 1e1, 1e2, 1e3};
  std::size_t folds = 5;
  double epsilon = 0.1;
  double tol = 1e-3;
  double coef0 = 0.0;
  std::size_t max_iter = 0;
};

/// Contiguous, unshuffled fold boundaries: fold f spans [bounds[f], bounds[f+1]).
std::vector<std::size_t> fold_bounds(std::size_t n, std::size_t k);

/// k-fold CV MSE for every (kernel, gamma, C) cell. Cells are evaluated in
/// parallel and assembled in grid order; best is the first minimum.
SvrGrid grid_search(std::span<const FeatureVector> x, std::span<const double> y, const GridSpec& spec);

}  // namespace cryptofc::svr
