#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hbn {

/// Named columns of equal length. Header names carry their unit as a suffix
/// (freq_hz, power_w, sweep_ns, depth_nm, ...) or are one of the
/// dimensionless names counts, contrast, vacancies, enhancement, sigma.
struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  /// Throws ParseError if absent.
  const std::vector<double>& column(std::string_view name) const;
  bool has(std::string_view name) const noexcept;
};

/// Header line plus one line per row, values in shortest round-trip form.
std::string format_csv(const Table& t);
/// Throws ParseError with the 1-based line number on ragged rows, bad
/// numbers, empty input or columns without units.
Table parse_csv(std::string_view text);

void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

/// Unit suffix of a column name, empty for dimensionless names. Throws
/// ParseError when the name has neither.
std::string column_unit(std::string_view name);

enum class TraceKind { Odmr, Saturation, Decay, Rabi };

/// x-y data read for fitting. The kind follows from the x column:
/// freq_* is odmr, power_* saturation, anything time-like decay (or rabi when
/// requested by the caller).
struct MeasuredTrace {
  TraceKind kind = TraceKind::Odmr;
  std::string x_name, y_name;
  std::vector<double> x, y;
  std::optional<std::vector<double>> sigma;
  double dwell_s = 0.0;  // odmr only, 0 if the file has no dwell column

  /// Throws ParseError unless there are >= 4 points, x strictly increasing,
  /// lengths agree and sigma > 0.
  void validate() const;
};

MeasuredTrace trace_from_table(const Table& t);
MeasuredTrace read_trace(const std::filesystem::path& path);

}  // namespace hbn
