#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hbn {

// ---------------------------------------------------------------------------
// Optical pumping cycle
// ---------------------------------------------------------------------------

/// Ground (GS), excited (ES) and metastable (MS) levels. Optical transitions
/// conserve m_s; intersystem crossing out of ES is spin dependent.
enum Level : int { Gs0 = 0, GsPlus, GsMinus, Es0, EsPlus, EsMinus, Ms, kNumLevels };

using Populations = Eigen::Matrix<double, kNumLevels, 1>;
using RateMatrix = Eigen::Matrix<double, kNumLevels, kNumLevels>;

/// Rate constants in 1/s. The pump rate is k_pump_per_mw times the laser power.
struct RateConstants {
  double k_pump_per_mw = 1.6e7;
  double k_r = 4e8;        // ES -> GS, radiative, spin conserving
  double k_isc0 = 1e8;     // ES0 -> MS
  double k_isc1 = 6e8;     // ES+- -> MS
  double k_ms = 1e8;       // MS -> GS total
  double beta = 0.1;       // fraction of MS decay going to GS+- (split evenly)
  double k_gs_relax = 0.0; // GS pairwise mixing; spin polarization relaxes at 3 k_gs_relax

  void validate() const;
};

struct LevelSystem {
  Populations populations = Populations::Zero();
  RateConstants rates;
  double laser_power_mw = 1.0;

  /// Unpolarized ground state: 1/3 in each GS sublevel.
  static LevelSystem thermal(const RateConstants& rates, double laser_power_mw);
  double pump_rate() const noexcept { return rates.k_pump_per_mw * laser_power_mw; }
  double total() const noexcept { return populations.sum(); }
  /// GS0 share of the ground-state population.
  double gs0_fraction() const noexcept;
};

/// dP/dt = M P. Columns sum to zero.
RateMatrix rate_matrix(const RateConstants& rates, double pump_rate);

/// Largest step the integrator accepts, 1 ns.
inline constexpr double kMaxRateStep = 1e-9;

/// One classical fourth-order Runge-Kutta step of the rate equations.
/// Throws StepTooLarge if dt > 1 ns, InvalidArgument if dt <= 0.
LevelSystem evolve_rates(const LevelSystem& sys, bool laser_on, double dt);

/// Step used by the multi-step helpers: min(1 ns, 0.1 / fastest rate).
double stable_step(const RateConstants& rates, double pump_rate);

/// Null vector of the rate matrix normalized to unit sum.
Populations steady_state(const RateConstants& rates, double pump_rate);

/// Time for the GS0 share to cover 1 - 1/e of the way from the unpolarized
/// value to its steady state under continuous illumination.
/// Throws NoPolarization when ISC is spin independent.
double initialization_time(const LevelSystem& sys, double laser_power_mw);
std::vector<double> initialization_time_sweep(const LevelSystem& sys, std::span<const double> powers_mw);

// ---------------------------------------------------------------------------
// Two-level pseudo-spin on the {m_s = 0, m_s = +1} pair
// ---------------------------------------------------------------------------

struct BlochVector {
  double x = 0.0, y = 0.0, z = 1.0;

  double norm() const noexcept;
  /// Rotation by angle about the in-plane axis (cos phase, sin phase, 0).
  BlochVector rotated(double angle, double phase) const noexcept;
  /// Free precession-less evolution on resonance: transverse decay with t2,
  /// longitudinal relaxation towards z_eq with t1.
  BlochVector relaxed(double t, double t1, double t2, double z_eq = 0.0) const noexcept;
  /// Resonant drive: rotation with the components perpendicular to the drive
  /// axis decaying at 1/t_drive.
  BlochVector driven(double angle, double phase, double t, double t_drive) const noexcept;
};

struct BlochState {
  BlochVector vec;
  double t1_s = 17e-6;
  double t2_s = 1.1e-6;
  double t2star_s = 120e-9;

  void validate() const;
};

/// One component of the Rabi response: a sub-ensemble with its own coupling
/// scale and driven-decay time.
struct RabiTone {
  double weight = 1.0;
  double frequency_scale = 1.0;
  double decay_s = 120e-9;
};

/// f_Rabi = kappa sqrt(p_mw).
inline constexpr double kDefaultRabiKappa = 20e6;  // Hz / sqrt(W)
std::vector<double> rabi_frequency_vs_power(std::span<const double> p_mw, double kappa = kDefaultRabiKappa);

// ---------------------------------------------------------------------------
// Pulse sequences
// ---------------------------------------------------------------------------

enum class OpKind { Laser, Mw, Wait, Read };

struct Duration {
  enum class Kind { Fixed, PiFraction, Sweep };
  Kind kind = Kind::Fixed;
  double ns = 0.0;           // Fixed
  double pi_fraction = 1.0;  // PiFraction: rotation angle / pi

  bool operator==(const Duration&) const = default;
};

struct PulseOp {
  OpKind kind = OpKind::Wait;
  Duration duration;
  double phase_deg = 0.0;  // Mw only
  double rabi_hz = 0.0;    // Mw only; resolves pi fractions

  bool operator==(const PulseOp&) const = default;
};

struct PulseSequence {
  std::vector<PulseOp> ops;
  std::string placeholder;  // name of the swept duration, empty if none

  bool operator==(const PulseSequence&) const = default;
  std::size_t sweep_count() const noexcept;
  /// Throws MalformedSequence unless there is a read and a sweep placeholder.
  void validate_for_run() const;
  double duration_ns(const PulseOp& op, double sweep_ns) const;
};

inline constexpr double kDefaultRabiHz = 20e6;

/// Grammar: statements separated by ';' ('#' starts a comment)
///   laser <dur>             wait <dur>
///   mw <dur|pi|pi/N> [phase <deg>]
///   read <dur>
/// <dur> is a number with an optional ns|us|ms suffix (default ns) or an
/// identifier naming the swept duration. Every placeholder in one sequence
/// must use the same name.
/// Throws SyntaxError (with line:column), UnknownUnit, MultipleSweepPlaceholders.
PulseSequence parse_sequence(std::string_view text, double rabi_hz = kDefaultRabiHz);

/// Canonical text; parse_sequence(format_sequence(s)) == s.
std::string format_sequence(const PulseSequence& seq);

/// Ready-made sequences, each swept over the placeholder `t`.
PulseSequence rabi_template(double rabi_hz = kDefaultRabiHz);
PulseSequence t1_template();
PulseSequence echo_template(double rabi_hz = kDefaultRabiHz);

struct RunOptions {
  std::vector<RabiTone> tones{RabiTone{}};
  /// Expected photons in a reference readout; 0 gives noiseless output.
  double photons_per_readout = 0.0;
  /// Also run the sequence with the last mw phase shifted by 180 degrees and
  /// report half the difference, which cancels population backgrounds.
  bool phase_cycle = false;
};

/// Runs the sequence once per sweep value (ns) starting from the laser
/// steady state at sys.laser_power_mw, and returns the readout contrast
/// (I_ref - I) / I_ref, where I is the radiative ES flux integrated over the
/// read windows and I_ref the same readout taken directly from the steady state.
std::vector<double> run_sequence(const PulseSequence& seq, const LevelSystem& sys,
                                 const BlochState& bloch, std::span<const double> sweep_ns,
                                 std::uint64_t seed, const RunOptions& options = {});
std::vector<double> run_sequence_serial(const PulseSequence& seq, const LevelSystem& sys,
                                        const BlochState& bloch, std::span<const double> sweep_ns,
                                        std::uint64_t seed, const RunOptions& options = {});

}  // namespace hbn
