#include "hbn/sensitivity.hpp"

#include <cmath>
#include <limits>

#include "hbn/error.hpp"
#include "hbn/spin_model.hpp"

namespace hbn {

void SensitivityInput::validate() const {
  if (!(lineshape_factor > 0.0)) throw Error(ErrorKind::InvalidArgument, "lineshape factor must be positive");
  if (!(contrast > 0.0 && contrast < 1.0)) throw Error(ErrorKind::InvalidArgument, "contrast must lie in (0, 1)");
  if (!(fwhm > 0.0)) throw Error(ErrorKind::InvalidArgument, "fwhm must be positive");
  if (!(count_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "count rate must be positive");
  if (!(g_factor > 0.0)) throw Error(ErrorKind::InvalidArgument, "g_factor must be positive");
}

double eta_b(const SensitivityInput& inp) {
  inp.validate();
  const double tesla_per_hz = 1.0 / (inp.g_factor * kBohrHzPerTesla);
  return inp.lineshape_factor * tesla_per_hz * inp.fwhm / (inp.contrast * std::sqrt(inp.count_rate));
}

double eta_at_power(const PowerResponse& resp, double count_rate, double p_mw,
                    double lineshape_factor, double g_factor) {
  const BroadenedLine line = power_broadened_line(resp, p_mw);
  if (line.contrast <= 0.0) return std::numeric_limits<double>::infinity();
  return eta_b({lineshape_factor, line.contrast, line.fwhm, count_rate, g_factor});
}

std::vector<SensitivityPoint> sensitivity_vs_mw_power_serial(const PowerResponse& resp,
                                                             double count_rate,
                                                             std::span<const double> powers) {
  resp.validate();
  std::vector<SensitivityPoint> out(powers.size());
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (!(powers[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "powers must be positive");
    out[i] = {powers[i], eta_at_power(resp, count_rate, powers[i])};
  }
  return out;
}

std::vector<SensitivityPoint> sensitivity_vs_mw_power(const PowerResponse& resp, double count_rate,
                                                      std::span<const double> powers) {
  resp.validate();
  for (double p : powers) {
    if (!(p > 0.0)) throw Error(ErrorKind::InvalidArgument, "powers must be positive");
  }
  std::vector<SensitivityPoint> out(powers.size());
  const auto n = static_cast<std::ptrdiff_t>(powers.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = {powers[i], eta_at_power(resp, count_rate, powers[i])};
  return out;
}

double analytic_optimal_mw_power(const PowerResponse& resp) noexcept { return 2.0 * resp.p_sat_mw; }

GoldenResult golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                     double rel_tol, int max_iter) {
  if (!(lo < hi)) throw Error(ErrorKind::InvalidArgument, "empty search interval");
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  int evals = 2;
  for (int it = 0; it < max_iter; ++it) {
    if ((b - a) <= rel_tol * (std::abs(a) + std::abs(b))) break;
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - invphi * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + invphi * (b - a); fd = f(d);
    }
    ++evals;
  }
  GoldenResult best{0.5 * (a + b), 0.0, evals + 1};
  best.fx = f(best.x);
  // the bracket may have collapsed onto an end point
  const double flo = f(lo), fhi = f(hi);
  best.evaluations += 2;
  if (flo < best.fx) best = {lo, flo, best.evaluations};
  if (fhi < best.fx) best = {hi, fhi, best.evaluations};
  return best;
}

SensitivityOptimum optimize_sensitivity(const PowerResponse& resp, double count_rate, double p_lo,
                                        double p_hi) {
  resp.validate();
  if (!(p_lo > 0.0 && p_hi > p_lo)) throw Error(ErrorKind::InvalidArgument, "power range must be positive and non-empty");
  if (!(count_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "count rate must be positive");
  const auto objective = [&](double log_p) { return eta_at_power(resp, count_rate, std::exp(log_p)); };
  const GoldenResult g = golden_section_minimize(objective, std::log(p_lo), std::log(p_hi), 1e-14);
  SensitivityOptimum out;
  out.p_opt = std::exp(g.x);
  out.eta_opt = g.fx;
  const double edge_tol = 1e-9;
  out.boundary_optimum = std::abs(g.x - std::log(p_lo)) < edge_tol || std::abs(g.x - std::log(p_hi)) < edge_tol;
  if (out.boundary_optimum) out.p_opt = std::abs(g.x - std::log(p_lo)) < edge_tol ? p_lo : p_hi;
  return out;
}

}  // namespace hbn
