#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace cryptofc::polyreg {

class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDegree : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Affine map from raw x onto [0, 1] over the training inputs.
struct FeatureScale {
  double offset = 0.0;
  double span = 1.0;

  double apply(double x) const noexcept { return (x - offset) / span; }
};

/// y = intercept + sum_k coefficients[k-1] * x~^k, x~ = scale.apply(x).
struct PolyModel {
  int degree = 1;
  double intercept = 0.0;
  std::vector<double> coefficients;  // a_1 .. a_degree
  FeatureScale scale;
};

/// [x, x^2, ..., x^degree], with a leading 1 when include_bias is set.
std::vector<double> poly_features(double x, int degree, bool include_bias = false);

/// Least squares on the bias-free power features of the scaled inputs, via
/// Householder QR of the centered design matrix; the intercept is recovered
/// from the column means. Throws RankDeficient when fewer than degree + 1
/// distinct xs exist or the factorization is numerically singular.
PolyModel fit(std::span<const double> xs, std::span<const double> ys, int degree);

/// Horner evaluation at the scaled input.
double predict(const PolyModel& model, double x);
std::vector<double> predict(const PolyModel& model, std::span<const double> xs);

struct SweepRow {
  int degree = 0;
  double test_mse = 0.0;
  double train_mse = 0.0;
};

struct DegreeSweep {
  std::vector<SweepRow> rows;  // input degree order
  std::size_t best = 0;        // lowest test MSE, ties to the lower degree
};

DegreeSweep degree_sweep(std::span<const double> train_x, std::span<const double> train_y,
                         std::span<const double> test_x, std::span<const double> test_y,
                         std::span<const int> degrees);

/// Dense least squares min |A b - y|_2 by Householder QR. `a` is row-major
/// rows x cols with rows >= cols. Throws RankDeficient if some |R_kk| falls
/// below rcond * max|R_jj|.
std::vector<double> least_squares_qr(std::vector<double> a, std::size_t rows, std::size_t cols,
                                     std::vector<double> y, double rcond = 1e-13);

}  // namespace cryptofc::polyreg
