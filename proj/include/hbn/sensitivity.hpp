#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hbn/odmr.hpp"

namespace hbn {

/// Lorentzian lineshape factor for the shot-noise sensitivity formula.
inline constexpr double kLorentzianLineshapeFactor = 0.77;

struct SensitivityInput {
  double lineshape_factor = kLorentzianLineshapeFactor;
  double contrast = 0.0;
  double fwhm = 0.0;        // Hz
  double count_rate = 0.0;  // counts/s
  double g_factor = 2.0;

  void validate() const;
};

/// eta_B = A (h / g mu_B) fwhm / (C sqrt(R)), in T/sqrt(Hz).
double eta_b(const SensitivityInput& inp);

struct SensitivityPoint {
  double power = 0.0;  // W
  double eta = 0.0;    // T/sqrt(Hz)
};

/// eta_B at one microwave power using the power-broadened line.
/// Returns +inf at zero power (no contrast).
double eta_at_power(const PowerResponse& resp, double count_rate, double p_mw,
                    double lineshape_factor = kLorentzianLineshapeFactor, double g_factor = 2.0);

std::vector<SensitivityPoint> sensitivity_vs_mw_power(const PowerResponse& resp, double count_rate,
                                                      std::span<const double> powers);
std::vector<SensitivityPoint> sensitivity_vs_mw_power_serial(const PowerResponse& resp,
                                                             double count_rate,
                                                             std::span<const double> powers);

/// Microwave power at which fwhm/contrast is smallest under the saturation
/// forms: the stationary point of (1+s)^{3/2}/s, s = 2.
double analytic_optimal_mw_power(const PowerResponse& resp) noexcept;

struct GoldenResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
};

/// Golden-section minimization of a unimodal function on [lo, hi].
GoldenResult golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                     double rel_tol = 1e-12, int max_iter = 500);

struct SensitivityOptimum {
  double p_opt = 0.0;    // W
  double eta_opt = 0.0;  // T/sqrt(Hz)
  bool boundary_optimum = false;
};

/// Golden-section search over log power. boundary_optimum is set when the
/// minimum sits at an end of p_range.
SensitivityOptimum optimize_sensitivity(const PowerResponse& resp, double count_rate,
                                        double p_lo, double p_hi);

}  // namespace hbn
