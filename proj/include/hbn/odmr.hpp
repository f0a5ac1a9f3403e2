#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hbn {

/// One Lorentzian dip. contrast is the fractional PL drop at the center.
struct LorentzianLine {
  double center = 0.0;    // Hz
  double fwhm = 0.0;      // Hz
  double contrast = 0.0;  // in [0, 1)

  void validate() const;
  /// Dip profile (fwhm/2)^2 / ((nu - center)^2 + (fwhm/2)^2), peak value 1.
  double profile(double nu) const noexcept;
};

struct OdmrSpectrum {
  std::vector<double> freqs;   // Hz, strictly increasing
  std::vector<double> counts;  // photon counts per bin
  double dwell_time_s = 1e-3;
  double baseline_rate = 0.0;  // counts/s

  void validate() const;
};

/// Microwave power response: C(s) = c_inf s/(1+s), fwhm(s) = linewidth_0 sqrt(1+s),
/// s = p_mw / p_sat_mw.
struct PowerResponse {
  double c_inf = 0.55;
  double p_sat_mw = 0.2;        // W
  double linewidth_0 = 110e6;   // Hz

  void validate() const;
};

struct BroadenedLine {
  double contrast = 0.0;
  double fwhm = 0.0;  // Hz
};

/// Noiseless counts R dwell [1 - sum_i C_i L_i(nu)].
/// Throws ContrastOverflow if the summed dip depth reaches 1 at any grid point.
OdmrSpectrum synth_spectrum(std::span<const LorentzianLine> lines, std::span<const double> grid,
                            double baseline_rate, double dwell_s);

BroadenedLine power_broadened_line(const PowerResponse& resp, double p_mw);

/// A (microwave power, observed contrast) calibration point.
struct ContrastAnchor {
  double p_mw = 0.0;      // W
  double contrast = 0.0;
};

/// Chooses p_sat_mw for fixed c_inf and linewidth_0 by minimizing the summed
/// squared relative contrast errors over the anchors.
PowerResponse calibrate_power_response(double c_inf, double linewidth_0,
                                       std::span<const ContrastAnchor> anchors);

/// Each bin becomes an independent Poisson draw with the noiseless value as
/// mean. Bin i uses substream i of `seed`; the result does not depend on the
/// number of threads.
OdmrSpectrum add_shot_noise(const OdmrSpectrum& spec, std::uint64_t seed);
OdmrSpectrum add_shot_noise_serial(const OdmrSpectrum& spec, std::uint64_t seed);

/// Uniform grid of n points over [lo, hi].
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

}  // namespace hbn
