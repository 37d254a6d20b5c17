#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cryptofc::dataset {

enum class DataErrc {
  MissingHeader,
  UnknownColumn,
  MalformedRow,
  UnparseableDate,
  MixedDateFormats,
  NonMonotonicDates,
  InvalidBar,
  EmptyAfterClean,
  DegenerateRange,
  EmptySplit,
  SeriesTooShort,
};

std::string_view to_string(DataErrc code);

/// Validation or shape failure in the data pipeline. `row()` is the 1-based
/// data row (header excluded) when the failure is tied to one, otherwise -1.
class DataError : public std::runtime_error {
 public:
  DataError(DataErrc code, const std::string& what, long row = -1);

  DataErrc code() const noexcept { return code_; }
  long row() const noexcept { return row_; }

 private:
  DataErrc code_;
  long row_;
};

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  /// ISO 8601, YYYY-MM-DD.
  std::string iso() const;
};

enum class DateFormat { DayMonthYear, Iso };

/// Parses "DD/MM/YYYY" or "YYYY-MM-DD". Throws DataError(UnparseableDate).
std::pair<Date, DateFormat> parse_date(std::string_view text, long row = -1);

enum class PriceColumn { Open, High, Low, Close, AdjClose, Volume };

PriceColumn parse_price_column(std::string_view name);
std::string_view to_string(PriceColumn column);

/// One daily bar. Missing or unparseable numeric fields are stored as NaN.
struct OhlcvRecord {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double adj_close = 0.0;
  double volume = 0.0;

  bool is_complete() const noexcept;
  double value(PriceColumn column) const noexcept;
};

struct PriceSeries {
  std::vector<OhlcvRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  std::vector<double> column(PriceColumn column) const;
  std::vector<Date> dates() const;
};

/// Reads a Yahoo-style OHLCV CSV. The header must name the seven columns
/// Date, Open, High, Low, Close, Adj Close, Volume in any order and case.
/// Open/close outside [low, high] is not an error; a message is appended to
/// `warnings` when given.
PriceSeries parse_csv(std::istream& in, std::vector<std::string>* warnings = nullptr);
PriceSeries parse_csv(std::string_view text, std::vector<std::string>* warnings = nullptr);

/// Drops every record with a missing field. Throws EmptyAfterClean.
PriceSeries clean(const PriceSeries& series);

class ScalerParams {
 public:
  /// Throws DegenerateRange unless max > min and both are finite.
  ScalerParams(double min, double max);

  double min() const noexcept { return min_; }
  double max() const noexcept { return max_; }
  double span() const noexcept { return max_ - min_; }

  double scale(double value) const noexcept { return (value - min_) / (max_ - min_); }
  double inverse(double value) const noexcept { return value * (max_ - min_) + min_; }

 private:
  double min_;
  double max_;
};

/// Min/max of the values it is given; callers pass the training slice only.
ScalerParams fit_scaler(std::span<const double> values);

std::vector<double> scale(std::span<const double> values, const ScalerParams& params);
std::vector<double> inverse_scale(std::span<const double> values, const ScalerParams& params);

struct SeriesSplit {
  PriceSeries train;
  PriceSeries test;
};

/// First floor(n * train_fraction) records train, the rest test. No shuffling.
SeriesSplit chronological_split(const PriceSeries& series, double train_fraction);

/// Number of training records for a series of `n` records.
std::size_t split_boundary(std::size_t n, double train_fraction);

struct WindowedDataset {
  std::size_t window_size = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;

  std::size_t size() const noexcept { return targets.size(); }
  bool empty() const noexcept { return targets.empty(); }
};

/// Sample k is (values[k .. k+W), values[k+W]). Throws SeriesTooShort if
/// values.size() <= window.
WindowedDataset make_windows(std::span<const double> values, std::size_t window);

/// Windows whose targets are exactly `tail`, using the last `window` values of
/// `history` as leading context. Used to score the test split when it is
/// shorter than one window.
WindowedDataset make_windows_with_context(std::span<const double> history,
                                          std::span<const double> tail, std::size_t window);

}  // namespace cryptofc::dataset
