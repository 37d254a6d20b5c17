// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "cryptofc/dataset.hpp"
#include "cryptofc/eval.hpp"
#include "cryptofc/lstm.hpp"
#include "cryptofc/pipeline.hpp"
#include "cryptofc/polyreg.hpp"
#include "cryptofc/svr.hpp"
#include "oracles/lstm_scalar_oracle.hpp"
#include "oracles/svr_qp_oracle.hpp"

namespace fs = std::filesystem;
namespace ds = cryptofc::dataset;
namespace lstm = cryptofc::lstm;
namespace svr = cryptofc::svr;
namespace poly = cryptofc::polyreg;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t csv_rows(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::size_t rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) ++rows;
    header = true;
  }
  return rows;
}

// Train split of the bundled fixture, normalized, plus time features.
struct FixtureSplit {
  std::vector<double> train, test;
  ds::ScalerParams scaler{0.0, 1.0};
};

FixtureSplit load_fixture() {
  std::ifstream in(CRYPTOFC_SAMPLE_CSV);
  const auto series = ds::clean(ds::parse_csv(in));
  const auto split = ds::chronological_split(series, 0.8);
  FixtureSplit f;
  const auto train_raw = split.train.column(ds::PriceColumn::Close);
  f.scaler = ds::fit_scaler(train_raw);
  f.train = ds::scale(train_raw, f.scaler);
  f.test = ds::scale(split.test.column(ds::PriceColumn::Close), f.scaler);
  return f;
}

// ---------------------------------------------------------------------------

Outcome lstm_gradient_check() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::size_t hs[] = {2, 3, 5}, ws[] = {2, 4, 8};
  double worst = 0.0, worst_double = 0.0;
  auto rel_err = [](double a, double b) { return std::fabs(a - b) / std::max(1e-8, std::fabs(a) + std::fabs(b)); };
  for (std::uint64_t k = 0; k < 20; ++k) {
    const std::size_t h = hs[k % 3], w = ws[(k / 3) % 3];
    std::mt19937_64 gen(1000 + k);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    lstm::LstmParams p(1, h);
    p.for_each_tensor([&](std::span<double> t) {
      for (double& v : t) v = u(gen);
    });
    std::vector<double> window(w);
    for (double& v : window) v = u(gen);
    const double target = u(gen);

    const auto analytic = lstm::bptt_gradients(window, target, p).grad.flatten();
    // Step 1e-6 on the 64-bit parameters; the loss itself is evaluated in
    // extended precision so the difference quotient is not dominated by
    // rounding. The all-double quotient is reported for reference.
    const auto numeric = oracle::lstm_fd_gradient<long double>(window, target, p, 1e-6);
    const auto numeric_double = oracle::lstm_fd_gradient<double>(window, target, p, 1e-6);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double rel = rel_err(analytic[i], numeric[i]);
      worst = std::max(worst, rel);
      worst_double = std::max(worst_double, rel_err(analytic[i], numeric_double[i]));
      if (rel > 1e-5) {
        o.fail("instance " + std::to_string(k) + " component " + std::to_string(i) + " rel " + fmt(rel));
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 10.0) o.fail("took " + fmt(secs) + " s");
  if (o.pass) o.detail = "20 instances, worst rel " + fmt(worst) + " (all-double quotient " + fmt(worst_double) + "), " +
               fmt(secs) + " s";
  return o;
}

Outcome lstm_zero_identity() {
  Outcome o;
  for (std::size_t h : {1u, 3u, 50u}) {
    const lstm::LstmParams p(1, h);
    const std::vector<double> x{0.37};
    const auto out = lstm::cell_forward(x, lstm::LstmState::zeros(h), p);
    for (std::size_t j = 0; j < h; ++j) {
      if (out.cache.input_gate[j] != 0.5 || out.cache.forget_gate[j] != 0.5 || out.cache.output_gate[j] != 0.5) {
        o.fail("gate != 0.5 at H=" + std::to_string(h));
      }
      if (out.state.c[j] != 0.0 || out.state.h[j] != 0.0) o.fail("state != 0 at H=" + std::to_string(h));
    }
  }
  if (o.pass) o.detail = "gates 0.5, C = 0, h = 0 exactly";
  return o;
}

Outcome adam_first_step() {
  Outcome o;
  lstm::LstmParams p(1, 1), g(1, 1);
  g.b_y = 1.0;
  lstm::AdamState s(p, lstm::AdamConfig{});
  lstm::adam_step(p, g, s);
  const double expected = -0.001 / (1.0 + 1e-8);
  const double err = std::fabs(p.b_y - expected);
  if (!(err <= 1e-12)) o.fail("delta " + fmt(p.b_y) + " off by " + fmt(err));
  if (o.pass) o.detail = "delta " + cryptofc::format_double(p.b_y) + ", abs err " + fmt(err);
  return o;
}

Outcome svr_oracle_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  const svr::KernelKind kinds[] = {svr::KernelKind::Linear, svr::KernelKind::Rbf, svr::KernelKind::Sigmoid};
  const oracle::OracleKernel okinds[] = {oracle::OracleKernel::Linear, oracle::OracleKernel::Rbf,
                                         oracle::OracleKernel::Sigmoid};
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int rejected = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int kind_index = inst % 3;
    const std::size_t n = 3 + gen() % 8;  // 3..10 points
    const bool sigmoid = kind_index == 2;
    const std::size_t d = sigmoid ? n : 1 + gen() % 3;
    const double gamma = sigmoid ? 0.05 + 0.25 * (u(gen) + 1.0) / 2.0 : 0.1 + 0.9 * (u(gen) + 1.0) / 2.0;
    const double cs[] = {0.5, 1.0, 10.0};
    const double eps_values[] = {0.01, 0.1};
    const double c = cs[gen() % 3];
    const double eps = eps_values[gen() % 2];

    std::vector<svr::FeatureVector> x;
    std::vector<double> y;
    oracle::SvrQpOracle qp;
    // The sigmoid kernel is not positive semidefinite in general; the dual is
    // then non-convex and has no unique optimum to compare against, so only
    // PSD draws are kept.
    for (;;) {
      x.assign(n, svr::FeatureVector(d));
      y.assign(n, 0.0);
      for (auto& row : x) {
        for (double& v : row) v = u(gen);
      }
      for (double& v : y) v = u(gen);
      qp = oracle::SvrQpOracle{x, y, okinds[kind_index], gamma, 0.0, c, eps};
      if (!sigmoid) break;
      std::vector<std::vector<double>> gram(n, std::vector<double>(n));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) gram[i][j] = oracle::oracle_kernel(okinds[2], gamma, 0.0, x[i], x[j]);
      }
      if (oracle::is_psd(gram)) break;
      ++rejected;
    }

    svr::SvrConfig cfg;
    cfg.kernel = {kinds[kind_index], gamma, 0.0};
    cfg.c = c;
    cfg.epsilon = eps;
    cfg.tol = 1e-9;
    cfg.max_iter = 1000000;
    const auto model = svr::fit(x, y, cfg);
    const auto sol = qp.solve();
    const std::string tag = "instance " + std::to_string(inst) + " (" + std::string(svr::to_string(kinds[kind_index])) + ")";
    if (!model.converged) {
      o.fail(tag + " did not converge");
      continue;
    }
    const double rel = std::fabs(model.dual_objective - sol.objective) /
                       std::max({std::fabs(model.dual_objective), std::fabs(sol.objective), 1e-12});
    worst = std::max(worst, rel);
    if (rel > 1e-6) o.fail(tag + " objective rel " + fmt(rel));

    // Dual bounds and the equality constraint.
    double sum = 0.0;
    for (double a : model.dual_coefs) {
      if (a < -c || a > c) o.fail(tag + " coefficient outside [-C, C]");
      sum += a;
    }
    if (std::fabs(sum) > cfg.tol) o.fail(tag + " sum of coefficients " + fmt(sum));

    // Tube conditions, matching stored support vectors back to points.
    std::vector<double> coef(n, 0.0);
    std::vector<bool> used(model.support_vectors.size(), false);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < model.support_vectors.size(); ++s) {
        if (!used[s] && model.support_vectors[s] == x[i]) {
          coef[i] = model.dual_coefs[s];
          used[s] = true;
          break;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::fabs(svr::predict(model, x[i]) - y[i]);
      const double a = std::fabs(coef[i]);
      if (r < eps - cfg.tol && a != 0.0) o.fail(tag + " point inside the tube has a nonzero coefficient");
      if (a > 0.0 && a < c && std::fabs(r - eps) > cfg.tol) {
        o.fail(tag + " free support vector off the tube edge by " + fmt(std::fabs(r - eps)));
      }
      if (a >= c && r < eps - cfg.tol) o.fail(tag + " bounded coefficient inside the tube");
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 30.0) o.fail("took " + fmt(secs) + " s");
  if (o.pass) {
    o.detail = "50 instances, worst objective rel " + fmt(worst) + ", " + std::to_string(rejected) +
               " non-PSD sigmoid draws resampled, " + fmt(secs) + " s";
  }
  return o;
}

Outcome linear_gamma_invariance() {
  Outcome o;
  const auto f = load_fixture();
  std::vector<svr::FeatureVector> x;
  for (std::size_t i = 0; i < f.train.size(); ++i) {
    x.push_back({static_cast<double>(i) / static_cast<double>(f.train.size() - 1)});
  }
  const auto grid = svr::grid_search(x, f.train, svr::GridSpec{});
  if (grid.cells.size() != 48) o.fail(std::to_string(grid.cells.size()) + " cells");
  std::size_t linear = 0;
  for (const auto& cell : grid.cells) {
    if (cell.kernel != svr::KernelKind::Linear) continue;
    ++linear;
    for (const auto& other : grid.cells) {
      if (other.kernel == svr::KernelKind::Linear && other.c == cell.c &&
          std::memcmp(&other.cv_mse, &cell.cv_mse, sizeof(double)) != 0) {
        o.fail("C=" + fmt(cell.c) + " differs across gamma");
      }
    }
  }
  if (linear != 16) o.fail(std::to_string(linear) + " linear cells");
  if (o.pass) o.detail = "48 cells, 16 linear cells bitwise equal across the 4 gammas per C";
  return o;
}

Outcome polynomial_recovery() {
  Outcome o;
  auto cubic = [](double x) { return 0.25 * x * x * x - 1.5 * x * x + 2.0 * x + 0.5; };
  std::vector<double> trx, try_, tex, tey;
  for (int i = 0; i < 40; ++i) {
    const double x = i * 0.15;
    (i < 32 ? trx : tex).push_back(x);
    (i < 32 ? try_ : tey).push_back(cubic(x));
  }
  const auto model = poly::fit(trx, try_, 3);
  const double test_mse = cryptofc::eval::mse(tey, poly::predict(model, tex));
  if (!(test_mse < 1e-10)) o.fail("degree-3 test MSE " + fmt(test_mse));

  // Training MSE over the benchmark degrees, on the fixture (time and lag
  // features) and on random walks.
  const std::vector<int> degrees{2, 4, 6, 9, 11};
  auto check_monotone = [&](const std::vector<double>& xs, const std::vector<double>& ys, const std::string& what) {
    const auto sweep = poly::degree_sweep(xs, ys, xs, ys, degrees);
    for (std::size_t r = 1; r < sweep.rows.size(); ++r) {
      if (sweep.rows[r].train_mse > sweep.rows[r - 1].train_mse) {
        o.fail(what + ": train MSE rises from degree " + std::to_string(sweep.rows[r - 1].degree) + " to " +
               std::to_string(sweep.rows[r].degree));
      }
    }
  };
  const auto f = load_fixture();
  std::vector<double> idx, lag_x, lag_y;
  for (std::size_t i = 0; i < f.train.size(); ++i) idx.push_back(static_cast<double>(i));
  for (std::size_t i = 1; i < f.train.size(); ++i) {
    lag_x.push_back(f.train[i - 1]);
    lag_y.push_back(f.train[i]);
  }
  check_monotone(idx, f.train, "fixture time");
  check_monotone(lag_x, lag_y, "fixture lag");
  std::mt19937_64 gen(77);
  std::normal_distribution<double> step(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> xs, ys;
    double level = 0.0;
    for (int i = 0; i < 48; ++i) {
      level += step(gen);
      xs.push_back(i);
      ys.push_back(level);
    }
    check_monotone(xs, ys, "random walk " + std::to_string(trial));
  }
  if (o.pass) o.detail = "degree-3 test MSE " + fmt(test_mse) + "; train MSE non-increasing on 22 series";
  return o;
}

Outcome mse_unit_relation(const fs::path& run_dir) {
  Outcome o;
  double worst = 0.0;
  const auto meta = nlohmann::json::parse(slurp(run_dir / "dataset_meta.json"));
  const double span = meta.at("scaler").at("max").get<double>() - meta.at("scaler").at("min").get<double>();
  for (const char* model : {"lstm", "svr", "poly"}) {
    const auto result = nlohmann::json::parse(slurp(run_dir / (std::string(model) + "_result.json")));
    const double norm = result.at("mse_normalized").get<double>();
    const double raw = result.at("mse_raw").get<double>();
    const double rel = std::fabs(raw - span * span * norm) / std::max(raw, 1e-300);
    worst = std::max(worst, rel);
    if (rel > 1e-9) o.fail(std::string(model) + " rel " + fmt(rel));
  }
  // Random predictions against a random scaler.
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-0.5, 1.5), price(1000.0, 60000.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double lo = price(gen), hi = lo + price(gen);
    const ds::ScalerParams sc(lo, hi);
    std::vector<double> t(25), p(25);
    for (double& v : t) v = u(gen);
    for (double& v : p) v = u(gen);
    const double norm = cryptofc::eval::mse(t, p);
    const double raw = cryptofc::eval::mse(ds::inverse_scale(t, sc), ds::inverse_scale(p, sc));
    const double rel = std::fabs(raw - (hi - lo) * (hi - lo) * norm) / raw;
    worst = std::max(worst, rel);
    if (rel > 1e-9) o.fail("random trial " + std::to_string(trial) + " rel " + fmt(rel));
  }
  if (o.pass) o.detail = "3 pipeline models + 200 random draws, worst rel " + fmt(worst);
  return o;
}

Outcome structural_reproduction(const fs::path& work, double& seconds) {
  Outcome o;
  const auto t0 = Clock::now();
  const std::vector<cryptofc::pipeline::ModelKind> models{cryptofc::pipeline::ModelKind::Lstm,
                                                          cryptofc::pipeline::ModelKind::Svr,
                                                          cryptofc::pipeline::ModelKind::Poly};
  for (const char* sub : {"run1", "run2"}) {
    cryptofc::RunConfig cfg;
    cfg.input_path = CRYPTOFC_SAMPLE_CSV;
    cfg.out_dir = (work / sub).string();
    std::ostringstream out, err;
    const int rc = cryptofc::pipeline::cmd_all(cfg, models, out, err);
    if (rc != 0) o.fail(std::string(sub) + " exit " + std::to_string(rc) + ": " + err.str());
  }
  seconds = seconds_since(t0);
  if (!o.pass) return o;

  const fs::path a = work / "run1", b = work / "run2";
  const std::pair<const char*, std::size_t> shapes[] = {
      {"lstm_epochs.csv", 5}, {"svr_grid.csv", 48}, {"poly_degrees.csv", 5}, {"comparison.csv", 3}};
  for (const auto& [file, rows] : shapes) {
    const auto got = csv_rows(a / file);
    if (got != rows) o.fail(std::string(file) + " has " + std::to_string(got) + " rows");
  }
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    const auto twin = b / entry.path().filename();
    if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) {
      o.fail(entry.path().filename().string() + " differs between runs");
    }
  }
  for (const auto& entry : fs::directory_iterator(b)) {
    if (!fs::exists(a / entry.path().filename())) o.fail(entry.path().filename().string() + " only in run 2");
  }
  if (seconds >= 300.0) o.fail("took " + fmt(seconds) + " s");
  if (o.pass) {
    o.detail = "5/48/5/3 rows, " + std::to_string(files) + " artifacts byte-identical, " + fmt(seconds) +
               " s for two runs";
  }
  return o;
}

Outcome report_ranking() {
  Outcome o;
  const auto report = cryptofc::eval::compare({{"Long Short Term Memory", 97.91950725856172, 0.0, ""},
                                               {"Support Vector Machine", 0.02, 0.0, ""},
                                               {"Polynomial Regression", 51702001.51, 0.0, ""}});
  const char* order[] = {"Support Vector Machine", "Long Short Term Memory", "Polynomial Regression"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (report.results[i].model_name != order[i]) o.fail("position " + std::to_string(i) + " is " + report.results[i].model_name);
  }
  if (report.winner != "Support Vector Machine") o.fail("winner " + report.winner);
  if (o.pass) o.detail = "SVM < LSTM < Polynomial, winner Support Vector Machine";
  return o;
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "cryptofc_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << std::endl;
  };

  double pipeline_seconds = 0.0;
  report(1, "LSTM gradient check", lstm_gradient_check);
  report(2, "LSTM zero-weight identity", lstm_zero_identity);
  report(3, "Adam first step", adam_first_step);
  report(4, "SVR oracle equivalence", svr_oracle_equivalence);
  report(5, "Linear-kernel gamma invariance", linear_gamma_invariance);
  report(6, "Polynomial exact recovery", polynomial_recovery);
  // Criterion 7 reads the result files of the pipeline run in criterion 8.
  Outcome structural;
  try {
    structural = structural_reproduction(work, pipeline_seconds);
  } catch (const std::exception& e) {
    structural.fail(std::string("exception: ") + e.what());
  }
  report(7, "MSE unit relation", [&] { return mse_unit_relation(work / "run1"); });
  report(8, "Structural reproduction", [&] { return structural; });
  report(9, "Report ranking on reference MSEs", report_ranking);

  std::cout << (failures == 0 ? "all 9 criteria passed" : std::to_string(failures) + " of 9 criteria failed")
            << std::endl;
  fs::remove_all(work);
  return failures == 0 ? 0 : 1;
}
