#include "hbn/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hbn/error.hpp"

namespace hbn {
namespace {

constexpr std::array<std::string_view, 6> kDimensionless{"counts", "contrast", "vacancies",
                                                         "enhancement", "sigma", "pl"};
constexpr std::array<std::string_view, 17> kUnits{"hz", "khz", "mhz", "ghz", "w", "mw", "uw", "s", "ms",
                                                  "us", "ns", "nm", "t", "mt", "ev", "cps",
                                                  "t_per_sqrthz"};

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(strip(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::ParseError, fmt::format("line {}: {}", line, msg));
}

}  // namespace

const std::vector<double>& Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return columns[i];
  }
  throw Error(ErrorKind::ParseError, fmt::format("missing column '{}'", name));
}

bool Table::has(std::string_view name) const noexcept {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string column_unit(std::string_view name) {
  if (std::find(kDimensionless.begin(), kDimensionless.end(), name) != kDimensionless.end()) return {};
  // longest matching suffix wins, so eta_t_per_sqrthz is not read as "hz"
  std::string_view best;
  for (auto unit : kUnits) {
    if (name.size() > unit.size() + 1 && name.ends_with(unit) && name[name.size() - unit.size() - 1] == '_' &&
        unit.size() > best.size()) {
      best = unit;
    }
  }
  if (best.empty()) throw Error(ErrorKind::ParseError, fmt::format("column '{}' has no unit suffix", name));
  return std::string(best);
}

std::string format_csv(const Table& t) {
  std::string out = fmt::format("{}\n", fmt::join(t.names, ","));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c) out += ',';
      out += fmt::format("{}", t.columns[c][r]);
    }
    out += '\n';
  }
  return out;
}

Table parse_csv(std::string_view text) {
  Table t;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = strip(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line);
    if (header) {
      for (auto f : fields) {
        if (f.empty()) fail(line_no, "empty column name");
        try {
          column_unit(f);
        } catch (const Error& e) {
          fail(line_no, e.what());
        }
        t.names.emplace_back(f);
      }
      t.columns.resize(t.names.size());
      header = false;
      continue;
    }
    if (fields.size() != t.names.size()) {
      fail(line_no, fmt::format("expected {} fields, found {}", t.names.size(), fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const char* end = fields[c].data() + fields[c].size();
      const auto [p, ec] = std::from_chars(fields[c].data(), end, v);
      if (fields[c].empty() || ec != std::errc() || p != end || !std::isfinite(v)) {
        fail(line_no, fmt::format("column '{}': '{}' is not a number", t.names[c], fields[c]));
      }
      t.columns[c].push_back(v);
    }
  }
  if (header) throw Error(ErrorKind::ParseError, "line 1: no header");
  if (t.rows() == 0) fail(line_no + 1, "no data rows");
  return t;
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot write {}", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void MeasuredTrace::validate() const {
  if (x.size() != y.size() || (sigma && sigma->size() != x.size())) {
    throw Error(ErrorKind::ParseError, "trace columns differ in length");
  }
  if (x.size() < 4) throw Error(ErrorKind::ParseError, "trace needs at least 4 points");
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) {
      throw Error(ErrorKind::ParseError, fmt::format("line {}: {} not strictly increasing", i + 2, x_name));
    }
  }
  if (sigma) {
    for (std::size_t i = 0; i < sigma->size(); ++i) {
      if (!((*sigma)[i] > 0.0)) throw Error(ErrorKind::ParseError, fmt::format("line {}: sigma must be positive", i + 2));
    }
  }
}

MeasuredTrace trace_from_table(const Table& t) {
  if (t.names.size() < 2) throw Error(ErrorKind::ParseError, "line 1: need an x and a y column");
  MeasuredTrace tr;
  tr.x_name = t.names[0];
  tr.y_name = t.names[1];
  tr.x = t.columns[0];
  tr.y = t.columns[1];
  const std::string unit = column_unit(tr.x_name);
  if (tr.x_name.starts_with("freq_")) {
    tr.kind = TraceKind::Odmr;
  } else if (tr.x_name.starts_with("power_")) {
    tr.kind = TraceKind::Saturation;
  } else if (unit == "s" || unit == "ms" || unit == "us" || unit == "ns") {
    tr.kind = TraceKind::Decay;
  } else {
    throw Error(ErrorKind::ParseError, fmt::format("line 1: cannot tell the trace kind from '{}'", tr.x_name));
  }
  if (t.has("sigma")) tr.sigma = t.column("sigma");
  if (t.has("dwell_s")) tr.dwell_s = t.column("dwell_s").front();
  tr.validate();
  return tr;
}

MeasuredTrace read_trace(const std::filesystem::path& path) { return trace_from_table(parse_csv(read_text(path))); }

}  // namespace hbn
