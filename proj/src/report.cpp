#include "hbn/report.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "hbn/error.hpp"
#include "hbn/io.hpp"

namespace hbn {
namespace {

constexpr std::array<std::string_view, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1, 2, 5 steps giving about n ticks
std::vector<double> nice_ticks(double lo, double hi, int n) {
  const double raw = (hi - lo) / n;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return ticks;
}

std::string tick_label(double v) { return fmt::format("{:.4g}", v); }

}  // namespace

std::string render_svg(const PlotSpec& plot) {
  constexpr double W = 640, H = 420, L = 80, R = 20, T = 40, B = 60;
  auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (plot.log_x && !(s.x[i] > 0.0))) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  auto pxt = [&](double t) { return L + (t - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      W, H, W, H);
  out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
  out += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", W / 2,
                     escape(plot.title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", L, T,
                     W - L - R, H - T - B);

  const auto xticks = plot.log_x ? [&] {
    std::vector<double> t;
    for (double e = std::ceil(x0); e <= x1 + 1e-9; e += 1.0) t.push_back(e);
    return t;
  }()
                                 : nice_ticks(x0, x1, 6);
  for (double t : xticks) {
    const double x = pxt(t);
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{}\" x2=\"{:.2f}\" y2=\"{}\" stroke=\"black\"/>\n", x, H - B, x,
                       H - B + 5);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", x, H - B + 18,
                       plot.log_x ? fmt::format("1e{}", static_cast<int>(t)) : tick_label(t));
  }
  for (double t : nice_ticks(y0, y1, 6)) {
    const double y = py(t);
    out += fmt::format("<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", L - 5, y, L, y);
    out += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", L - 8, y + 4, tick_label(t));
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (L + W - R) / 2, H - 15,
                     escape(plot.x_label));
  out += fmt::format("<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
                     (T + H - B) / 2, (T + H - B) / 2, escape(plot.y_label));

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const auto color = kColors[k % kColors.size()];
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i]) || (plot.log_x && !(s.x[i] > 0.0))) continue;
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"{}\"/>\n", px(s.x[i]), py(s.y[i]),
                           color);
      }
    } else {
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"", color);
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i]) || (plot.log_x && !(s.x[i] > 0.0))) continue;
        out += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      }
      out += "\"/>\n";
    }
    if (!s.label.empty()) {
      const double ly = T + 16 + 16 * static_cast<double>(k);
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{}\"/>\n", W - R - 150, ly - 6,
                         color);
      out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", W - R - 132, ly, escape(s.label));
    }
  }
  out += "</svg>\n";
  return out;
}

nlohmann::ordered_json fit_report(const FitResult& fit, std::string_view x_name, std::string_view y_name) {
  nlohmann::ordered_json j;
  j["model_id"] = fit.model_id;
  j["x_column"] = x_name;
  j["y_column"] = y_name;
  j["converged"] = fit.converged;
  j["n_iterations"] = fit.n_iterations;
  j["chi2"] = fit.chi2;
  j["chi2_reduced"] = fit.chi2_reduced;
  const auto err = fit.standard_errors();
  auto params = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < fit.params.size(); ++i) {
    params[fit.param_names[i]] = {{"value", fit.params[i]}, {"sigma", err[i]}};
  }
  j["params"] = params;
  auto cov = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(fit.covariance(r, c));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  return j;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::InvalidArgument, "sha256 failed");
  }
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

RunManifest::RunManifest(std::filesystem::path out_dir, std::string command)
    : dir_(std::move(out_dir)), command_(std::move(command)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot create {}: {}", dir_.string(), ec.message()));
}

void RunManifest::set_input(const std::string& key, nlohmann::ordered_json value) { inputs_[key] = std::move(value); }

std::filesystem::path RunManifest::write(const std::string& filename, std::string_view content) {
  const auto path = dir_ / filename;
  write_text(path, content);
  outputs_[filename] = sha256_hex(content);
  return path;
}

void RunManifest::finish() const {
  nlohmann::ordered_json j;
  j["toolkit_version"] = kToolkitVersion;
  j["command"] = command_;
  j["seed"] = seed_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  write_text(dir_ / "manifest.json", j.dump(2) + "\n");
}

}  // namespace hbn
