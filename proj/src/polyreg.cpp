#include "cryptofc/polyreg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cryptofc/eval.hpp"

namespace cryptofc::polyreg {

std::vector<double> poly_features(double x, int degree, bool include_bias) {
  if (degree < 1) throw InvalidDegree("poly_features: degree must be >= 1, got " + std::to_string(degree));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(degree) + 1);
  if (include_bias) out.push_back(1.0);
  double power = x;
  for (int k = 1; k <= degree; ++k) {
    out.push_back(power);
    power *= x;
  }
  return out;
}

std::vector<double> least_squares_qr(std::vector<double> a, std::size_t rows, std::size_t cols,
                                     std::vector<double> y, double rcond) {
  if (rows < cols) throw RankDeficient("least squares: fewer rows than columns");
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * cols + c]; };

  // Householder reflections applied to A and y in place; R ends up in the
  // upper triangle of A.
  std::vector<double> diag(cols);
  for (std::size_t k = 0; k < cols; ++k) {
    double norm = 0.0;
    for (std::size_t r = k; r < rows; ++r) norm = std::hypot(norm, at(r, k));
    if (norm == 0.0) {
      diag[k] = 0.0;
      continue;
    }
    const double alpha = at(k, k) > 0.0 ? -norm : norm;
    // v = x - alpha e1, stored over column k
    at(k, k) -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t r = k; r < rows; ++r) vnorm2 += at(r, k) * at(r, k);
    for (std::size_t c = k + 1; c < cols; ++c) {
      double s = 0.0;
      for (std::size_t r = k; r < rows; ++r) s += at(r, k) * at(r, c);
      s = 2.0 * s / vnorm2;
      for (std::size_t r = k; r < rows; ++r) at(r, c) -= s * at(r, k);
    }
    double s = 0.0;
    for (std::size_t r = k; r < rows; ++r) s += at(r, k) * y[r];
    s = 2.0 * s / vnorm2;
    for (std::size_t r = k; r < rows; ++r) y[r] -= s * at(r, k);
    diag[k] = alpha;
  }

  double max_diag = 0.0;
  for (double d : diag) max_diag = std::max(max_diag, std::fabs(d));
  for (std::size_t k = 0; k < cols; ++k) {
    if (!(std::fabs(diag[k]) > rcond * max_diag)) {
      throw RankDeficient("least squares: design matrix is numerically rank deficient (column " +
                          std::to_string(k) + ")");
    }
  }

  std::vector<double> beta(cols);
  for (std::size_t k = cols; k-- > 0;) {
    double s = y[k];
    for (std::size_t c = k + 1; c < cols; ++c) s -= at(k, c) * beta[c];
    beta[k] = s / diag[k];
  }
  return beta;
}

PolyModel fit(std::span<const double> xs, std::span<const double> ys, int degree) {
  if (degree < 1) throw InvalidDegree("polyreg::fit: degree must be >= 1");
  if (xs.size() != ys.size()) throw std::invalid_argument("polyreg::fit: xs and ys lengths differ");

  std::vector<double> distinct(xs.begin(), xs.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < static_cast<std::size_t>(degree) + 1) {
    throw RankDeficient("polyreg::fit: " + std::to_string(distinct.size()) + " distinct inputs cannot determine degree " +
                        std::to_string(degree));
  }

  PolyModel model;
  model.degree = degree;
  model.scale = {distinct.front(), distinct.back() - distinct.front()};

  const std::size_t n = xs.size();
  const auto d = static_cast<std::size_t>(degree);
  std::vector<double> design(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = poly_features(model.scale.apply(xs[i]), degree, false);
    std::copy(row.begin(), row.end(), design.begin() + static_cast<long>(i * d));
  }

  // Center columns and targets so the intercept separates out.
  std::vector<double> col_mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) col_mean[c] += design[i * d + c];
  }
  for (double& m : col_mean) m /= static_cast<double>(n);
  const double y_mean = eval::compensated_sum(ys) / static_cast<double>(n);

  std::vector<double> centered = design;
  std::vector<double> yc(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) centered[i * d + c] -= col_mean[c];
    yc[i] = ys[i] - y_mean;
  }

  model.coefficients = least_squares_qr(std::move(centered), n, d, std::move(yc));
  model.intercept = y_mean;
  for (std::size_t c = 0; c < d; ++c) model.intercept -= model.coefficients[c] * col_mean[c];
  return model;
}

double predict(const PolyModel& model, double x) {
  const double t = model.scale.apply(x);
  double acc = 0.0;
  for (auto it = model.coefficients.rbegin(); it != model.coefficients.rend(); ++it) acc = acc * t + *it;
  return model.intercept + acc * t;
}

std::vector<double> predict(const PolyModel& model, std::span<const double> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(predict(model, x));
  return out;
}

DegreeSweep degree_sweep(std::span<const double> train_x, std::span<const double> train_y,
                         std::span<const double> test_x, std::span<const double> test_y,
                         std::span<const int> degrees) {
  if (degrees.empty()) throw InvalidDegree("degree_sweep: no degrees given");
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (degrees[i] == degrees[j]) throw InvalidDegree("degree_sweep: degree listed twice");
    }
  }
  DegreeSweep sweep;
  for (int degree : degrees) {
    const auto model = fit(train_x, train_y, degree);
    SweepRow row;
    row.degree = degree;
    row.train_mse = eval::mse(train_y, predict(model, train_x));
    row.test_mse = eval::mse(test_y, predict(model, test_x));
    sweep.rows.push_back(row);
  }
  for (std::size_t i = 1; i < sweep.rows.size(); ++i) {
    const auto& cur = sweep.rows[i];
    const auto& best = sweep.rows[sweep.best];
    if (cur.test_mse < best.test_mse || (cur.test_mse == best.test_mse && cur.degree < best.degree)) {
      sweep.best = i;
    }
  }
  return sweep;
}

}  // namespace cryptofc::polyreg
