#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cryptofc/dataset.hpp"
#include "cryptofc/lstm.hpp"
#include "cryptofc/svr.hpp"

namespace cryptofc {

enum class SvrFeatures { Time, Window };
enum class PolyFeature { Time, Lag };

/// Everything a pipeline run depends on. Loaded from an INI-style file with
/// [data], [lstm], [svr], [poly] and [run] sections; command-line flags
/// override individual fields afterwards.
struct RunConfig {
  std::string input_path;
  std::string out_dir = "out";

  dataset::PriceColumn target = dataset::PriceColumn::Close;
  double train_fraction = 0.8;
  std::size_t window = 30;

  lstm::TrainConfig lstm;
  std::vector<int> epochs{10, 30, 50, 80, 100};

  svr::GridSpec svr;
  SvrFeatures svr_features = SvrFeatures::Time;

  std::vector<int> degrees{2, 4, 6, 9, 11};
  PolyFeature poly_feature = PolyFeature::Time;

  std::uint64_t seed = 42;

  /// Throws std::invalid_argument on an out-of-range field or empty list.
  void validate() const;

  /// Stable key = value rendering of every setting that affects results.
  /// Paths are excluded.
  std::string canonical() const;
  /// FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace cryptofc
