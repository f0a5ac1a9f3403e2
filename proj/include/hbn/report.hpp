#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hbn/fitting.hpp"
#include "json.hpp"

namespace hbn {

inline constexpr std::string_view kToolkitVersion = "0.4.0";

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool markers = false;  // points instead of a polyline
};

struct PlotSpec {
  std::string title;
  std::string x_label, y_label;
  bool log_x = false;
  std::vector<PlotSeries> series;
};

/// Standalone SVG document with axes, ticks and a legend.
std::string render_svg(const PlotSpec& plot);

nlohmann::ordered_json fit_report(const FitResult& fit, std::string_view x_name, std::string_view y_name);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Collects outputs of one CLI run and writes manifest.json listing the
/// inputs, seed, toolkit version and the hash of every output.
class RunManifest {
 public:
  RunManifest(std::filesystem::path out_dir, std::string command);

  void set_input(const std::string& key, nlohmann::ordered_json value);
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  /// Writes content under out_dir and records its hash. Returns the full path.
  std::filesystem::path write(const std::string& filename, std::string_view content);
  /// Writes manifest.json.
  void finish() const;
  const nlohmann::ordered_json& outputs() const noexcept { return outputs_; }

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::uint64_t seed_ = 0;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json outputs_ = nlohmann::ordered_json::object();
};

}  // namespace hbn
