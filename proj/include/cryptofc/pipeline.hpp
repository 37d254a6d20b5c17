#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cryptofc/config.hpp"
#include "cryptofc/dataset.hpp"

namespace cryptofc::pipeline {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kDataFailure = 2;
inline constexpr int kModelFailure = 3;
inline constexpr int kMissingResults = 4;
}  // namespace exit_code

enum class ModelKind { Lstm, Svr, Poly };

std::string_view to_string(ModelKind kind);  // "lstm" / "svr" / "poly"
std::string_view display_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Output of the prepare step as read back by later commands.
struct PreparedData {
  std::vector<std::string> dates;
  std::vector<double> normalized;
  double scaler_min = 0.0;
  double scaler_max = 1.0;
  std::size_t train_size = 0;
  std::string config_hash;
  std::string dataset_fingerprint;

  dataset::ScalerParams scaler() const { return {scaler_min, scaler_max}; }
};

/// Reads dataset.csv and dataset_meta.json from `out_dir`. Throws
/// std::runtime_error if either is missing or malformed.
PreparedData load_prepared(const std::filesystem::path& out_dir);

/// parse -> clean -> split -> fit scaler on train -> write dataset.csv and
/// dataset_meta.json. Exit 2 on I/O or validation failure.
int cmd_prepare(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Runs one model family's sweep on the prepared data and writes its table,
/// best model and a result record. Exit 3 on model failure (completed table
/// rows are still written), 2 when prepared data is missing.
int cmd_run(ModelKind model, const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Builds the cross-model report from saved results. Exit 4 when a requested
/// result is missing and `subset_ok` is false, or when none is present.
int cmd_compare(const RunConfig& cfg, const std::vector<ModelKind>& models, bool subset_ok, std::ostream& out,
                std::ostream& err);

/// prepare, run every model in `models`, compare.
int cmd_all(const RunConfig& cfg, const std::vector<ModelKind>& models, std::ostream& out, std::ostream& err);

}  // namespace cryptofc::pipeline
