#pragma once

#include <complex>
#include <span>
#include <vector>

namespace hbn {

using cplx = std::complex<double>;

/// Relative permittivities use exp(-i omega t), so Im(eps) > 0 is loss.
/// Tabulated Johnson-Christy gold, interpolated in (n, k); valid 496-1937 nm.
cplx gold_permittivity(double wavelength_nm);
/// Crystalline silicon, interpolated in (n, k); valid 450-1000 nm.
cplx silicon_permittivity(double wavelength_nm);
inline constexpr double kSapphireIndex = 1.76;
inline constexpr double kHbnIndex = 2.1;

/// ambient | spacer (thickness) | lower half-space. A 300 nm gold film is
/// optically thick, so it is treated as semi-infinite.
struct LayerStack {
  cplx eps_ambient{1.0, 0.0};
  double n_spacer = kHbnIndex;
  double thickness_nm = 0.0;
  cplx eps_lower{1.0, 0.0};
  double wavelength_nm = 810.0;

  void validate() const;
  static LayerStack on_gold(double thickness_nm, double wavelength_nm = 810.0);
  static LayerStack on_silicon(double thickness_nm, double wavelength_nm = 810.0);
  static LayerStack on_sapphire(double thickness_nm, double wavelength_nm = 810.0);
};

enum class DipoleOrientation { Parallel, Perpendicular, Isotropic };

/// Rates relative to the same emitter in the homogeneous medium it sits in.
struct DecayRates {
  double total_rate_rel = 0.0;
  double radiative_rate_rel = 0.0;  // power escaping into the ambient half-space
  double collected_rate_rel = 0.0;  // the part of it inside the objective NA

  double quantum_efficiency(double q0) const noexcept {
    return q0 * radiative_rate_rel / (q0 * total_rate_rel + 1.0 - q0);
  }
};

struct QuadratureOptions {
  double rel_tol = 1e-4;
  bool high_order = false;  // 61-point instead of 31-point Kronrod rule
};

/// emitter_height_nm is measured from the lower half-space; the emitter is in
/// the spacer if the height is below the thickness, otherwise in the ambient.
/// Heights below 0.5 nm are rejected (classical validity floor).
/// Throws InvalidArgument, QuadratureNotConverged.
DecayRates dipole_rates(const LayerStack& stack, double emitter_height_nm, DipoleOrientation orientation,
                        double na = 0.9, const QuadratureOptions& quad = {});

/// Leading nonretarded image-dipole term for an emitter in a half-space of
/// permittivity eps_host at distance d from a half-space eps_lower, added to
/// the homogeneous rate 1. Perpendicular dipoles get twice the parallel term.
double quasi_static_rate(cplx eps_host, cplx eps_lower, double wavelength_nm, double distance_nm,
                         DipoleOrientation orientation);

enum class ReferenceSubstrate { Silicon, Sapphire };

struct EnhancementOptions {
  double emitter_depth_nm = 6.4;  // below the top of the hBN
  double q0 = 0.1;                // intrinsic quantum efficiency
  DipoleOrientation orientation = DipoleOrientation::Parallel;
  std::vector<double> emission_nm{750.0, 800.0, 850.0, 900.0, 950.0};
  double excitation_nm = 532.0;
  double na = 0.9;
  ReferenceSubstrate reference = ReferenceSubstrate::Silicon;
  QuadratureOptions quad{};

  void validate() const;
};

struct EnhancementPoint {
  double thickness_nm = 0.0;
  double enhancement = 0.0;      // detected PL on gold / on the reference substrate
  double emission_gain = 0.0;    // band-averaged collected quantum-efficiency ratio
  double excitation_gain = 0.0;  // in-plane excitation intensity ratio at the emitter
};

/// In-plane excitation intensity at depth z below the top of a spacer on a
/// lower half-space, averaged over a focused cone of the given NA (incident
/// field amplitude 1).
double excitation_intensity(double n_spacer, double thickness_nm, double depth_nm, cplx eps_lower,
                            double wavelength_nm, double na);

cplx reference_permittivity(ReferenceSubstrate ref, double wavelength_nm);

EnhancementPoint enhancement_at(double thickness_nm, const EnhancementOptions& options);
std::vector<EnhancementPoint> enhancement_vs_thickness(std::span<const double> thickness_nm,
                                                       const EnhancementOptions& options);
std::vector<EnhancementPoint> enhancement_vs_thickness_serial(std::span<const double> thickness_nm,
                                                              const EnhancementOptions& options);

}  // namespace hbn
