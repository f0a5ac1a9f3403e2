#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hbn {

struct Species {
  std::string symbol;
  int z = 0;
  double mass_u = 0.0;
};

struct IonBeamSpec {
  Species ion{"He", 2, 4.0026};
  double energy_ev = 1000.0;
  std::uint64_t n_ions = 10000;
  std::uint64_t seed = 1;

  /// Throws EnergyOutOfRange outside [100 eV, 10 keV], InvalidArgument otherwise.
  void validate() const;
};

struct TargetElement {
  Species species;
  double fraction = 0.0;              // atomic fraction
  double displacement_energy_ev = 0.0;
};

struct TargetMaterial {
  std::vector<TargetElement> elements{{{"B", 5, 10.81}, 0.5, 19.0}, {{"N", 7, 14.007}, 0.5, 23.0}};
  double density_g_cm3 = 2.1;
  double binding_energy_ev = 3.0;     // subtracted from every recoil
  double electronic_scale = 1.0;      // multiplies the Lindhard-Scharff coefficient
  double cutoff_factor = 5.0;         // particles stop below cutoff_factor * min E_d

  void validate() const;
  double atomic_density_per_a3() const;
  double mean_mass_u() const;
  double min_displacement_energy() const;
};

struct DepthHistogram {
  double bin_width_nm = 0.5;
  std::vector<long long> counts;  // bin i covers [i w, (i+1) w)
  std::uint64_t n_ions = 0;

  std::vector<double> edges_nm() const;
  double center_nm(std::size_t bin) const noexcept { return (static_cast<double>(bin) + 0.5) * bin_width_nm; }
  long long total() const noexcept;
  double mean_depth_nm() const;
};

/// Energy budget of one primary ion. initial = electronic + nuclear + residual.
struct IonLedger {
  double initial_ev = 0.0;
  double electronic_ev = 0.0;
  double nuclear_ev = 0.0;
  double residual_ev = 0.0;  // below the cutoff, or carried out through the surface
  long long vacancies = 0;
  double final_depth_nm = 0.0;  // where the primary stopped; negative if it left
};

/// sin^2(theta/2) of the centre-of-mass deflection for the universal
/// (ZBL) screened potential, using the five-parameter magic formula.
/// eps: reduced energy, b: reduced impact parameter.
double magic_sin2_half_theta(double eps, double b);

/// ZBL universal screening length (angstrom).
double zbl_screening_length(int z1, int z2);

/// Lindhard-Scharff electronic stopping cross section, eV angstrom^2.
double lindhard_scharff(int z1, double m1, int z2, double energy_ev);

/// Transports one primary ion and its recoil cascade, adding vacancies to hist
/// (resized as needed). Deterministic given (seed, ion_index).
IonLedger transport_ion(const IonBeamSpec& beam, const TargetMaterial& target,
                        std::uint64_t ion_index, DepthHistogram& hist);

DepthHistogram simulate_ions(const IonBeamSpec& beam, const TargetMaterial& target,
                             double bin_width_nm = 0.5);
DepthHistogram simulate_ions_serial(const IonBeamSpec& beam, const TargetMaterial& target,
                                    double bin_width_nm = 0.5);

/// Center of the largest bin after 3-bin moving-average smoothing. Ties go to
/// the larger raw bin, then to the shallower one. Throws EmptyHistogram.
double most_probable_depth(const DepthHistogram& hist);

}  // namespace hbn
