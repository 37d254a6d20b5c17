#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cryptofc::eval {

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

/// Mean of squared differences with compensated accumulation. Throws
/// EvalError on empty input or a length mismatch.
double mse(std::span<const double> y_true, std::span<const double> y_pred);

struct ModelResult {
  std::string model_name;
  double mse_normalized = 0.0;
  double mse_raw = 0.0;
  std::string config_summary;
};

struct EvalReport {
  std::vector<ModelResult> results;  // ascending by mse_normalized, then name
  std::string winner;
  std::string dataset_fingerprint;
};

/// Sorts by normalized MSE with ties broken by name and names the winner.
/// Throws EvalError when `results` is empty.
EvalReport compare(std::vector<ModelResult> results, std::string dataset_fingerprint = {});

/// FNV-1a 64-bit over raw bytes; chained through `seed` when hashing several
/// pieces.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

/// Fixed-width text rendering of the comparison, one row per model.
std::string format_report_table(const EvalReport& report);

}  // namespace cryptofc::eval
