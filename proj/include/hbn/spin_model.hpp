#pragma once

#include <Eigen/Dense>
#include <complex>

namespace hbn {

/// gμ_B/h for g = 2, in Hz/T. The per-unit-g value is half of this.
inline constexpr double kGammaFreeG2HzPerTesla = 27.99e9;
inline constexpr double kBohrHzPerTesla = kGammaFreeG2HzPerTesla / 2.0;

/// Ground-state zero-field splitting of the spin-1 defect, as frequencies.
struct ZfsSpinParams {
  double d_gs = 3.47e9;  // Hz
  double e_gs = 50e6;    // Hz
  double g_factor = 2.0;

  /// Throws InvalidArgument if d_gs <= 0, e_gs < 0, e_gs >= d_gs or g <= 0.
  void validate() const;
  /// Zeeman coefficient gμ_B/h in Hz/T.
  double gyromagnetic() const noexcept { return g_factor * kBohrHzPerTesla; }
};

/// Static field in tesla; z is the defect axis (out of the hBN plane).
struct MagneticField {
  double bx = 0.0;
  double by = 0.0;
  double bz = 0.0;

  double magnitude() const noexcept;
  static MagneticField axial(double bz) noexcept { return {0.0, 0.0, bz}; }
};

/// Transition frequencies out of the m_s = 0 level, nu1 <= nu2.
struct ResonancePair {
  double nu1 = 0.0;
  double nu2 = 0.0;

  double splitting() const noexcept { return nu2 - nu1; }
  double center() const noexcept { return 0.5 * (nu1 + nu2); }
};

using Matrix3c = Eigen::Matrix3cd;

/// H/h in the S_z basis {|+1>, |0>, |-1>}, in Hz:
/// D S_z^2 + E (S_x^2 - S_y^2) + (g mu_B / h) B.S
Matrix3c hamiltonian_matrix(const ZfsSpinParams& params, const MagneticField& field);

/// Closed form for a field along the defect axis:
/// nu_{1,2} = D -+ sqrt(E^2 + (g mu_B B / h)^2).
ResonancePair resonance_frequencies_axial(const ZfsSpinParams& params, double b_z);

/// Eigensolve of the full Hamiltonian. The m_s = 0-like level is picked by its
/// overlap with |0>, so labels stay continuous through level crossings.
/// Throws DegenerateLevels when that level coincides with another one.
ResonancePair resonance_frequencies_general(const ZfsSpinParams& params,
                                            const MagneticField& field);

/// Axial field magnitude (T, >= 0) producing the given nu2 - nu1.
/// Throws BelowZeroFieldSplitting if splitting < 2 E.
double field_from_splitting(const ZfsSpinParams& params, double splitting);

}  // namespace hbn
