#include "cryptofc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cryptofc::eval {

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

double mse(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw EvalError("mse: length mismatch (" + std::to_string(y_true.size()) + " vs " +
                    std::to_string(y_pred.size()) + ")");
  }
  if (y_true.empty()) throw EvalError("mse: empty input");
  std::vector<double> sq(y_true.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_pred[i];
    sq[i] = d * d;
  }
  return compensated_sum(sq) / static_cast<double>(sq.size());
}

EvalReport compare(std::vector<ModelResult> results, std::string dataset_fingerprint) {
  if (results.empty()) throw EvalError("compare: no results");
  std::sort(results.begin(), results.end(), [](const ModelResult& a, const ModelResult& b) {
    if (a.mse_normalized != b.mse_normalized) return a.mse_normalized < b.mse_normalized;
    return a.model_name < b.model_name;
  });
  EvalReport report;
  report.winner = results.front().model_name;
  report.results = std::move(results);
  report.dataset_fingerprint = std::move(dataset_fingerprint);
  return report;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_report_table(const EvalReport& report) {
  std::size_t name_width = 15;
  for (const auto& r : report.results) name_width = std::max(name_width, r.model_name.size());

  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %22s  %22s  %s\n", static_cast<int>(name_width), "algorithm model",
                "MSE (normalized)", "MSE (raw)", "config");
  out += line;
  out += std::string(name_width + 2 + 22 + 2 + 22 + 2 + 6, '-') + "\n";
  for (const auto& r : report.results) {
    std::snprintf(line, sizeof line, "%-*s  %22.12g  %22.12g  %s\n", static_cast<int>(name_width),
                  r.model_name.c_str(), r.mse_normalized, r.mse_raw, r.config_summary.c_str());
    out += line;
  }
  out += "\nwinner: " + report.winner + "\n";
  if (!report.dataset_fingerprint.empty()) out += "dataset fingerprint: " + report.dataset_fingerprint + "\n";
  return out;
}

}  // namespace cryptofc::eval
