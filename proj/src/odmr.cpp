#include "hbn/odmr.hpp"

#include <cmath>
#include <random>

#include "hbn/error.hpp"
#include "hbn/rng.hpp"

namespace hbn {

void LorentzianLine::validate() const {
  if (!(fwhm > 0.0)) throw Error(ErrorKind::InvalidArgument, "line fwhm must be positive");
  if (!(contrast >= 0.0 && contrast < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "line contrast must lie in [0, 1)");
  }
}

double LorentzianLine::profile(double nu) const noexcept {
  const double hw2 = 0.25 * fwhm * fwhm;
  const double dx = nu - center;
  return hw2 / (dx * dx + hw2);
}

void OdmrSpectrum::validate() const {
  if (freqs.size() != counts.size()) {
    throw Error(ErrorKind::DimensionMismatch, "freqs and counts differ in length");
  }
  for (std::size_t i = 1; i < freqs.size(); ++i) {
    if (!(freqs[i] > freqs[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "frequency grid must be strictly increasing");
    }
  }
  for (double c : counts) {
    if (!(c >= 0.0)) throw Error(ErrorKind::InvalidArgument, "counts must be non-negative");
  }
  if (!(dwell_time_s > 0.0)) throw Error(ErrorKind::InvalidArgument, "dwell time must be positive");
}

void PowerResponse::validate() const {
  if (!(c_inf > 0.0 && c_inf < 1.0)) throw Error(ErrorKind::InvalidArgument, "c_inf must lie in (0, 1)");
  if (!(p_sat_mw > 0.0)) throw Error(ErrorKind::InvalidArgument, "p_sat_mw must be positive");
  if (!(linewidth_0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "linewidth_0 must be positive");
}

OdmrSpectrum synth_spectrum(std::span<const LorentzianLine> lines, std::span<const double> grid,
                            double baseline_rate, double dwell_s) {
  for (const auto& line : lines) line.validate();
  OdmrSpectrum out;
  out.freqs.assign(grid.begin(), grid.end());
  out.dwell_time_s = dwell_s;
  out.baseline_rate = baseline_rate;
  if (!(baseline_rate >= 0.0)) throw Error(ErrorKind::InvalidArgument, "baseline rate must be non-negative");

  const double level = baseline_rate * dwell_s;
  out.counts.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double dip = 0.0;
    for (const auto& line : lines) dip += line.contrast * line.profile(grid[i]);
    if (dip >= 1.0) {
      throw Error(ErrorKind::ContrastOverflow, "summed dip depth reaches 1; counts would be negative");
    }
    out.counts[i] = level * (1.0 - dip);
  }
  out.validate();
  return out;
}

BroadenedLine power_broadened_line(const PowerResponse& resp, double p_mw) {
  if (!(p_mw >= 0.0)) throw Error(ErrorKind::InvalidArgument, "microwave power must be non-negative");
  const double s = p_mw / resp.p_sat_mw;
  return {resp.c_inf * s / (1.0 + s), resp.linewidth_0 * std::sqrt(1.0 + s)};
}

PowerResponse calibrate_power_response(double c_inf, double linewidth_0,
                                       std::span<const ContrastAnchor> anchors) {
  if (anchors.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one anchor");
  auto cost = [&](double log_psat) {
    PowerResponse r{c_inf, std::exp(log_psat), linewidth_0};
    double sum = 0.0;
    for (const auto& a : anchors) {
      const double rel = power_broadened_line(r, a.p_mw).contrast / a.contrast - 1.0;
      sum += rel * rel;
    }
    return sum;
  };
  // coarse log scan then golden-section polish
  double best = -12.0;
  double best_cost = cost(best);
  for (double x = -12.0; x <= 6.0; x += 0.05) {
    const double c = cost(x);
    if (c < best_cost) {
      best_cost = c;
      best = x;
    }
  }
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = best - 0.05, b = best + 0.05;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = cost(c), fd = cost(d);
  for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - invphi * (b - a); fc = cost(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + invphi * (b - a); fd = cost(d);
    }
  }
  PowerResponse out{c_inf, std::exp(0.5 * (a + b)), linewidth_0};
  out.validate();
  return out;
}

namespace {

double poisson_bin(double mean, std::uint64_t seed, std::size_t bin) {
  if (mean <= 0.0) return 0.0;
  CounterRng rng(seed, bin);
  std::poisson_distribution<long long> dist(mean);
  return static_cast<double>(dist(rng));
}

}  // namespace

OdmrSpectrum add_shot_noise_serial(const OdmrSpectrum& spec, std::uint64_t seed) {
  OdmrSpectrum out = spec;
  for (std::size_t i = 0; i < spec.counts.size(); ++i) out.counts[i] = poisson_bin(spec.counts[i], seed, i);
  return out;
}

OdmrSpectrum add_shot_noise(const OdmrSpectrum& spec, std::uint64_t seed) {
  OdmrSpectrum out = spec;
  const auto n = static_cast<std::ptrdiff_t>(spec.counts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.counts[i] = poisson_bin(spec.counts[i], seed, static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least two points");
  std::vector<double> g(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

}  // namespace hbn
