#include "cryptofc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>

namespace cryptofc::dataset {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

// Lowercase with spaces, underscores and quotes removed: "Adj Close" -> "adjclose".
std::string normalize_header(std::string_view name) {
  std::string out;
  for (char ch : name) {
    if (ch == ' ' || ch == '_' || ch == '"' || ch == '\'') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

bool parse_int(std::string_view text, int& out) {
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

double parse_number(std::string_view text) {
  if (!text.empty() && text.front() == '"' && text.back() == '"' && text.size() >= 2) {
    text = text.substr(1, text.size() - 2);
  }
  if (text.empty()) return kMissing;
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return kMissing;
  return value;
}

int days_in_month(int year, int month) {
  static constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  return month == 2 && leap ? 29 : kDays[static_cast<std::size_t>(month - 1)];
}

// Column slots in OhlcvRecord order, Date first.
constexpr std::array<std::string_view, 7> kColumns{"date",  "open",     "high",  "low",
                                                   "close", "adjclose", "volume"};

}  // namespace

std::string_view to_string(DataErrc code) {
  switch (code) {
    case DataErrc::MissingHeader: return "MissingHeader";
    case DataErrc::UnknownColumn: return "UnknownColumn";
    case DataErrc::MalformedRow: return "MalformedRow";
    case DataErrc::UnparseableDate: return "UnparseableDate";
    case DataErrc::MixedDateFormats: return "MixedDateFormats";
    case DataErrc::NonMonotonicDates: return "NonMonotonicDates";
    case DataErrc::InvalidBar: return "InvalidBar";
    case DataErrc::EmptyAfterClean: return "EmptyAfterClean";
    case DataErrc::DegenerateRange: return "DegenerateRange";
    case DataErrc::EmptySplit: return "EmptySplit";
    case DataErrc::SeriesTooShort: return "SeriesTooShort";
  }
  return "Unknown";
}

DataError::DataError(DataErrc code, const std::string& what, long row)
    : std::runtime_error(std::string(to_string(code)) + ": " + what +
                         (row >= 0 ? " (row " + std::to_string(row) + ")" : std::string())),
      code_(code),
      row_(row) {}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::pair<Date, DateFormat> parse_date(std::string_view text, long row) {
  text = trim(text);
  Date d;
  DateFormat format;
  bool ok = false;
  if (text.size() == 10 && text[2] == '/' && text[5] == '/') {
    format = DateFormat::DayMonthYear;
    ok = parse_int(text.substr(0, 2), d.day) && parse_int(text.substr(3, 2), d.month) &&
         parse_int(text.substr(6, 4), d.year);
  } else if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    format = DateFormat::Iso;
    ok = parse_int(text.substr(0, 4), d.year) && parse_int(text.substr(5, 2), d.month) &&
         parse_int(text.substr(8, 2), d.day);
  }
  if (ok) ok = d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= days_in_month(d.year, d.month);
  if (!ok) throw DataError(DataErrc::UnparseableDate, "cannot parse date '" + std::string(text) + "'", row);
  return {d, format};
}

PriceColumn parse_price_column(std::string_view name) {
  const auto key = normalize_header(name);
  if (key == "open") return PriceColumn::Open;
  if (key == "high") return PriceColumn::High;
  if (key == "low") return PriceColumn::Low;
  if (key == "close") return PriceColumn::Close;
  if (key == "adjclose") return PriceColumn::AdjClose;
  if (key == "volume") return PriceColumn::Volume;
  throw std::invalid_argument("unknown price column '" + std::string(name) + "'");
}

std::string_view to_string(PriceColumn column) {
  switch (column) {
    case PriceColumn::Open: return "open";
    case PriceColumn::High: return "high";
    case PriceColumn::Low: return "low";
    case PriceColumn::Close: return "close";
    case PriceColumn::AdjClose: return "adj_close";
    case PriceColumn::Volume: return "volume";
  }
  return "close";
}

bool OhlcvRecord::is_complete() const noexcept {
  return std::isfinite(open) && std::isfinite(high) && std::isfinite(low) && std::isfinite(close) &&
         std::isfinite(adj_close) && std::isfinite(volume);
}

double OhlcvRecord::value(PriceColumn column) const noexcept {
  switch (column) {
    case PriceColumn::Open: return open;
    case PriceColumn::High: return high;
    case PriceColumn::Low: return low;
    case PriceColumn::Close: return close;
    case PriceColumn::AdjClose: return adj_close;
    case PriceColumn::Volume: return volume;
  }
  return close;
}

std::vector<double> PriceSeries::column(PriceColumn column) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.value(column));
  return out;
}

std::vector<Date> PriceSeries::dates() const {
  std::vector<Date> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.date);
  return out;
}

PriceSeries parse_csv(std::istream& in, std::vector<std::string>* warnings) {
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // UTF-8 BOM
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw DataError(DataErrc::MissingHeader, "input has no header row");

  // slot[k] = index of kColumns[k] within the header.
  std::array<int, 7> slot;
  slot.fill(-1);
  const auto header = split_fields(line);
  for (std::size_t col = 0; col < header.size(); ++col) {
    const auto key = normalize_header(header[col]);
    const auto it = std::find(kColumns.begin(), kColumns.end(), key);
    if (it == kColumns.end()) {
      throw DataError(DataErrc::UnknownColumn, "unknown column '" + std::string(header[col]) + "'");
    }
    auto& s = slot[static_cast<std::size_t>(it - kColumns.begin())];
    if (s >= 0) throw DataError(DataErrc::UnknownColumn, "duplicate column '" + std::string(header[col]) + "'");
    s = static_cast<int>(col);
  }
  for (std::size_t k = 0; k < kColumns.size(); ++k) {
    if (slot[k] < 0) {
      throw DataError(DataErrc::MissingHeader, "header lacks column '" + std::string(kColumns[k]) + "'");
    }
  }

  PriceSeries series;
  std::optional<DateFormat> file_format;
  long row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() > header.size()) {
      throw DataError(DataErrc::MalformedRow,
                      "expected " + std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()),
                      row);
    }
    auto field = [&](std::size_t k) -> std::string_view {
      const auto idx = static_cast<std::size_t>(slot[k]);
      return idx < fields.size() ? fields[idx] : std::string_view{};
    };

    OhlcvRecord rec;
    const auto [date, format] = parse_date(field(0), row);
    if (file_format && *file_format != format) {
      throw DataError(DataErrc::MixedDateFormats, "date formats differ within the file", row);
    }
    file_format = format;
    rec.date = date;
    rec.open = parse_number(field(1));
    rec.high = parse_number(field(2));
    rec.low = parse_number(field(3));
    rec.close = parse_number(field(4));
    rec.adj_close = parse_number(field(5));
    rec.volume = parse_number(field(6));

    for (double price : {rec.open, rec.high, rec.low, rec.close, rec.adj_close}) {
      if (std::isfinite(price) && price <= 0.0) {
        throw DataError(DataErrc::InvalidBar, "non-positive price", row);
      }
    }
    if (std::isfinite(rec.volume) && rec.volume < 0.0) {
      throw DataError(DataErrc::InvalidBar, "negative volume", row);
    }
    if (std::isfinite(rec.low) && std::isfinite(rec.high)) {
      if (rec.low > rec.high) throw DataError(DataErrc::InvalidBar, "low exceeds high", row);
      if (warnings) {
        auto outside = [&](double v) { return std::isfinite(v) && (v < rec.low || v > rec.high); };
        if (outside(rec.open) || outside(rec.close)) {
          warnings->push_back("row " + std::to_string(row) + " (" + rec.date.iso() +
                              "): open/close outside [low, high]");
        }
      }
    }
    series.records.push_back(rec);
  }

  for (std::size_t k = 1; k < series.records.size(); ++k) {
    if (!(series.records[k - 1].date < series.records[k].date)) {
      throw DataError(DataErrc::NonMonotonicDates,
                      "date " + series.records[k].date.iso() + " does not follow " +
                          series.records[k - 1].date.iso(),
                      static_cast<long>(k + 1));
    }
  }
  return series;
}

PriceSeries parse_csv(std::string_view text, std::vector<std::string>* warnings) {
  std::istringstream in{std::string(text)};
  return parse_csv(in, warnings);
}

PriceSeries clean(const PriceSeries& series) {
  PriceSeries out;
  out.records.reserve(series.records.size());
  std::copy_if(series.records.begin(), series.records.end(), std::back_inserter(out.records),
               [](const OhlcvRecord& r) { return r.is_complete(); });
  if (out.empty()) throw DataError(DataErrc::EmptyAfterClean, "no complete records remain");
  return out;
}

ScalerParams::ScalerParams(double min, double max) : min_(min), max_(max) {
  if (!std::isfinite(min) || !std::isfinite(max) || !(max > min)) {
    throw DataError(DataErrc::DegenerateRange, "scaler requires finite max > min");
  }
}

ScalerParams fit_scaler(std::span<const double> values) {
  if (values.empty()) throw DataError(DataErrc::DegenerateRange, "no values to fit");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return ScalerParams(*lo, *hi);
}

std::vector<double> scale(std::span<const double> values, const ScalerParams& params) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(params.scale(v));
  return out;
}

std::vector<double> inverse_scale(std::span<const double> values, const ScalerParams& params) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(params.inverse(v));
  return out;
}

std::size_t split_boundary(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
}

SeriesSplit chronological_split(const PriceSeries& series, double train_fraction) {
  const auto boundary = split_boundary(series.size(), train_fraction);
  if (boundary == 0 || boundary == series.size()) {
    throw DataError(DataErrc::EmptySplit, std::to_string(series.size()) + " records give an empty split side");
  }
  SeriesSplit out;
  out.train.records.assign(series.records.begin(), series.records.begin() + static_cast<long>(boundary));
  out.test.records.assign(series.records.begin() + static_cast<long>(boundary), series.records.end());
  return out;
}

WindowedDataset make_windows(std::span<const double> values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  if (values.size() <= window) {
    throw DataError(DataErrc::SeriesTooShort, std::to_string(values.size()) +
                                                  " values cannot fill a window of " + std::to_string(window));
  }
  WindowedDataset out;
  out.window_size = window;
  const auto n = values.size() - window;
  out.inputs.reserve(n);
  out.targets.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.inputs.emplace_back(values.begin() + static_cast<long>(k),
                            values.begin() + static_cast<long>(k + window));
    out.targets.push_back(values[k + window]);
  }
  return out;
}

WindowedDataset make_windows_with_context(std::span<const double> history,
                                          std::span<const double> tail, std::size_t window) {
  if (history.size() < window) {
    throw DataError(DataErrc::SeriesTooShort, "history shorter than one window");
  }
  std::vector<double> joined(history.end() - static_cast<long>(window), history.end());
  joined.insert(joined.end(), tail.begin(), tail.end());
  return make_windows(joined, window);
}

}  // namespace cryptofc::dataset
