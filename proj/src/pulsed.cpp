#include "hbn/pulsed.hpp"

#include <cmath>
#include <exception>
#include <numbers>
#include <optional>
#include <random>

#include "hbn/error.hpp"
#include "hbn/rng.hpp"

namespace hbn {

void RateConstants::validate() const {
  for (double k : {k_pump_per_mw, k_r, k_isc0, k_isc1, k_ms, k_gs_relax}) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw Error(ErrorKind::InvalidArgument, "rate constants must be finite and non-negative");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "beta must lie in [0, 1]");
}

LevelSystem LevelSystem::thermal(const RateConstants& rates, double laser_power_mw) {
  LevelSystem sys;
  sys.rates = rates;
  sys.laser_power_mw = laser_power_mw;
  sys.populations(Gs0) = sys.populations(GsPlus) = sys.populations(GsMinus) = 1.0 / 3.0;
  return sys;
}

double LevelSystem::gs0_fraction() const noexcept {
  const double gs = populations(Gs0) + populations(GsPlus) + populations(GsMinus);
  return gs > 0.0 ? populations(Gs0) / gs : 0.0;
}

RateMatrix rate_matrix(const RateConstants& r, double pump_rate) {
  RateMatrix m = RateMatrix::Zero();
  auto link = [&m](int from, int to, double k) {
    m(to, from) += k;
    m(from, from) -= k;
  };
  for (int s = 0; s < 3; ++s) {
    link(Gs0 + s, Es0 + s, pump_rate);
    link(Es0 + s, Gs0 + s, r.k_r);
  }
  link(Es0, Ms, r.k_isc0);
  link(EsPlus, Ms, r.k_isc1);
  link(EsMinus, Ms, r.k_isc1);
  link(Ms, Gs0, r.k_ms * (1.0 - r.beta));
  link(Ms, GsPlus, 0.5 * r.k_ms * r.beta);
  link(Ms, GsMinus, 0.5 * r.k_ms * r.beta);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a != b) link(Gs0 + a, Gs0 + b, r.k_gs_relax);
    }
  }
  return m;
}

double stable_step(const RateConstants& rates, double pump_rate) {
  const RateMatrix m = rate_matrix(rates, pump_rate);
  const double fastest = (-m.diagonal()).maxCoeff();
  return fastest > 0.0 ? std::min(kMaxRateStep, 0.1 / fastest) : kMaxRateStep;
}

LevelSystem evolve_rates(const LevelSystem& sys, bool laser_on, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
  if (dt > kMaxRateStep) throw Error(ErrorKind::StepTooLarge, "time step exceeds 1 ns");
  const RateMatrix m = rate_matrix(sys.rates, laser_on ? sys.pump_rate() : 0.0);
  const Populations& x = sys.populations;
  const Populations k1 = m * x;
  const Populations k2 = m * (x + 0.5 * dt * k1);
  const Populations k3 = m * (x + 0.5 * dt * k2);
  const Populations k4 = m * (x + dt * k3);
  LevelSystem out = sys;
  out.populations = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return out;
}

Populations steady_state(const RateConstants& rates, double pump_rate) {
  RateMatrix a = rate_matrix(rates, pump_rate);
  a.row(0).setOnes();
  Populations rhs = Populations::Zero();
  rhs(0) = 1.0;
  return a.fullPivLu().solve(rhs);
}

namespace {

/// One RK4 step of a linear system written as a matrix: the degree-4 Taylor
/// polynomial of exp(dt M).
template <int N>
Eigen::Matrix<double, N, N> rk4_propagator(const Eigen::Matrix<double, N, N>& m, double dt) {
  using Mat = Eigen::Matrix<double, N, N>;
  const Mat a = dt * m;
  const Mat a2 = a * a;
  return Mat::Identity() + a + a2 / 2.0 + a2 * a / 6.0 + a2 * a2 / 24.0;
}

}  // namespace

double initialization_time(const LevelSystem& sys, double laser_power_mw) {
  sys.rates.validate();
  if (!(laser_power_mw > 0.0)) throw Error(ErrorKind::InvalidArgument, "laser power must be positive");
  if (sys.rates.k_isc0 == sys.rates.k_isc1) {
    throw Error(ErrorKind::NoPolarization, "spin-independent intersystem crossing cannot polarize");
  }
  const double pump = sys.rates.k_pump_per_mw * laser_power_mw;
  LevelSystem ss;
  ss.populations = steady_state(sys.rates, pump);
  const double start = 1.0 / 3.0;
  const double excess = ss.gs0_fraction() - start;
  if (std::abs(excess) < 1e-9) throw Error(ErrorKind::NoPolarization, "steady state is unpolarized");
  const double target = start + (1.0 - std::exp(-1.0)) * excess;

  const double dt = stable_step(sys.rates, pump);
  const RateMatrix step = rk4_propagator<kNumLevels>(rate_matrix(sys.rates, pump), dt);
  LevelSystem cur = LevelSystem::thermal(sys.rates, laser_power_mw);
  double prev_frac = cur.gs0_fraction();
  const auto max_steps = static_cast<long>(1e-3 / dt);
  for (long i = 1; i <= max_steps; ++i) {
    cur.populations = step * cur.populations;
    const double frac = cur.gs0_fraction();
    if ((frac - target) * (excess > 0 ? 1.0 : -1.0) >= 0.0) {
      const double w = (target - prev_frac) / (frac - prev_frac);
      return (static_cast<double>(i - 1) + w) * dt;
    }
    prev_frac = frac;
  }
  throw Error(ErrorKind::NotConverged, "polarization did not build up within 1 ms");
}

std::vector<double> initialization_time_sweep(const LevelSystem& sys, std::span<const double> powers_mw) {
  std::vector<double> out(powers_mw.size());
  const auto n = static_cast<std::ptrdiff_t>(powers_mw.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = initialization_time(sys, powers_mw[i]);
    } catch (...) {
#pragma omp critical(hbn_pulsed_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------

double BlochVector::norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }

BlochVector BlochVector::rotated(double angle, double phase) const noexcept {
  return driven(angle, phase, 0.0, 1.0);
}

BlochVector BlochVector::relaxed(double t, double t1, double t2, double z_eq) const noexcept {
  const double e2 = std::exp(-t / t2);
  const double e1 = std::exp(-t / t1);
  return {x * e2, y * e2, z_eq + (z - z_eq) * e1};
}

BlochVector BlochVector::driven(double angle, double phase, double t, double t_drive) const noexcept {
  const double ax = std::cos(phase), ay = std::sin(phase);
  // split into the part along the drive axis and the perpendicular plane
  // spanned by e1 = (-ay, ax, 0) and e2 = (0, 0, 1)
  const double along = x * ax + y * ay;
  const double p1 = -x * ay + y * ax;
  const double p2 = z;
  const double decay = t > 0.0 ? std::exp(-t / t_drive) : 1.0;
  const double c = std::cos(angle), s = std::sin(angle);
  // right-handed rotation about the axis: e1 -> e1 cos + e2 sin
  const double q1 = (p1 * c - p2 * s) * decay;
  const double q2 = (p1 * s + p2 * c) * decay;
  return {along * ax - q1 * ay, along * ay + q1 * ax, q2};
}

void BlochState::validate() const {
  if (!(t1_s > 0.0 && t2_s > 0.0 && t2star_s > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "relaxation times must be positive");
  }
  if (vec.norm() > 1.0 + 1e-9) throw Error(ErrorKind::InvalidArgument, "Bloch vector longer than 1");
}

std::vector<double> rabi_frequency_vs_power(std::span<const double> p_mw, double kappa) {
  std::vector<double> out(p_mw.size());
  for (std::size_t i = 0; i < p_mw.size(); ++i) {
    if (!(p_mw[i] >= 0.0)) throw Error(ErrorKind::InvalidArgument, "microwave power must be non-negative");
    out[i] = kappa * std::sqrt(p_mw[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t PulseSequence::sweep_count() const noexcept {
  std::size_t n = 0;
  for (const auto& op : ops) n += op.duration.kind == Duration::Kind::Sweep ? 1 : 0;
  return n;
}

void PulseSequence::validate_for_run() const {
  bool has_read = false;
  for (const auto& op : ops) has_read = has_read || op.kind == OpKind::Read;
  if (!has_read) throw Error(ErrorKind::MalformedSequence, "sequence has no read");
  if (sweep_count() == 0) throw Error(ErrorKind::MalformedSequence, "sequence has no sweep placeholder");
}

double PulseSequence::duration_ns(const PulseOp& op, double sweep_ns) const {
  switch (op.duration.kind) {
    case Duration::Kind::Fixed: return op.duration.ns;
    case Duration::Kind::Sweep: return sweep_ns;
    case Duration::Kind::PiFraction:
      if (!(op.rabi_hz > 0.0)) throw Error(ErrorKind::MalformedSequence, "pi pulse needs a Rabi frequency");
      return op.duration.pi_fraction / (2.0 * op.rabi_hz) * 1e9;
  }
  return 0.0;
}

PulseSequence rabi_template(double rabi_hz) {
  return parse_sequence("laser 5us; wait 1us; mw t; read 300ns", rabi_hz);
}

PulseSequence t1_template() { return parse_sequence("laser 5us; wait 1us; wait t; read 300ns"); }

PulseSequence echo_template(double rabi_hz) {
  return parse_sequence("laser 5us; wait 1us; mw pi/2; wait t; mw pi; wait t; mw pi/2; read 300ns", rabi_hz);
}

namespace {

/// Everything one run needs, precomputed for a given level system.
class SequenceEngine {
 public:
  SequenceEngine(const LevelSystem& sys, const BlochState& bloch) : bloch_(bloch) {
    rates_ = sys.rates;
    rates_.k_gs_relax = 1.0 / (3.0 * bloch.t1_s);
    const double pump = sys.pump_rate();
    dt_ = stable_step(rates_, pump);
    on_ = rate_matrix(rates_, pump);
    off_ = rate_matrix(rates_, 0.0);
    step_on_ = rk4_propagator<kNumLevels>(on_, dt_);
    step_off_ = rk4_propagator<kNumLevels>(off_, dt_);

    using Aug = Eigen::Matrix<double, kNumLevels + 1, kNumLevels + 1>;
    Aug aug = Aug::Zero();
    aug.topLeftCorner<kNumLevels, kNumLevels>() = on_;
    for (int s = 0; s < 3; ++s) aug(kNumLevels, Es0 + s) = rates_.k_r;
    read_step_ = rk4_propagator<kNumLevels + 1>(aug, dt_);
    initial_ = steady_state(rates_, pump);
  }

  struct State {
    Populations pop;
    double cx = 0.0, cy = 0.0;  // coherence of the {0, +1} pair
  };

  State initial() const { return {initial_, 0.0, 0.0}; }

  void laser(State& s, double t) const {
    s.cx = s.cy = 0.0;
    propagate(s.pop, t, step_on_, on_);
  }

  void wait(State& s, double t) const {
    const double e2 = std::exp(-t / bloch_.t2_s);
    s.cx *= e2;
    s.cy *= e2;
    double left = t;
    // integrate while ES/MS are still populated, then relax GS analytically
    while (left > 0.0 && s.pop.segment<4>(Es0).sum() > 1e-15 * s.pop.sum()) {
      const double chunk = std::min(left, 200.0 * dt_);
      propagate(s.pop, chunk, step_off_, off_);
      left -= chunk;
    }
    if (left > 0.0) {
      const double mean = s.pop.head<3>().sum() / 3.0;
      const double e1 = std::exp(-left / bloch_.t1_s);
      for (int i = 0; i < 3; ++i) s.pop(i) = mean + (s.pop(i) - mean) * e1;
    }
  }

  void mw(State& s, double t, double angle, double phase, double t_drive) const {
    propagate(s.pop, 0.5 * t, step_off_, off_);
    const double n = s.pop(Gs0) + s.pop(GsPlus);
    const BlochVector v = BlochVector{s.cx, s.cy, s.pop(Gs0) - s.pop(GsPlus)}.driven(angle, phase, t, t_drive);
    s.cx = v.x;
    s.cy = v.y;
    s.pop(Gs0) = 0.5 * (n + v.z);
    s.pop(GsPlus) = 0.5 * (n - v.z);
    propagate(s.pop, 0.5 * t, step_off_, off_);
  }

  /// Returns the photons (in units of total population) emitted during the window.
  double read(State& s, double t) const {
    s.cx = s.cy = 0.0;
    Eigen::Matrix<double, kNumLevels + 1, 1> aug;
    aug.head<kNumLevels>() = s.pop;
    aug(kNumLevels) = 0.0;
    const auto steps = static_cast<long>(std::floor(t / dt_));
    for (long i = 0; i < steps; ++i) aug = read_step_ * aug;
    const double rest = t - static_cast<double>(steps) * dt_;
    if (rest > 1e-6 * dt_) {
      Eigen::Matrix<double, kNumLevels + 1, kNumLevels + 1> m = Eigen::Matrix<double, kNumLevels + 1, kNumLevels + 1>::Zero();
      m.topLeftCorner<kNumLevels, kNumLevels>() = on_;
      for (int k = 0; k < 3; ++k) m(kNumLevels, Es0 + k) = rates_.k_r;
      aug = rk4_propagator<kNumLevels + 1>(m, rest) * aug;
    }
    s.pop = aug.head<kNumLevels>();
    return aug(kNumLevels);
  }

 private:
  void propagate(Populations& p, double t, const RateMatrix& step, const RateMatrix& m) const {
    if (t <= 0.0) return;
    const auto steps = static_cast<long>(std::floor(t / dt_));
    for (long i = 0; i < steps; ++i) p = step * p;
    const double rest = t - static_cast<double>(steps) * dt_;
    if (rest > 1e-6 * dt_) p = rk4_propagator<kNumLevels>(m, rest) * p;
  }

  BlochState bloch_;
  RateConstants rates_;
  double dt_ = 0.0;
  RateMatrix on_, off_, step_on_, step_off_;
  Eigen::Matrix<double, kNumLevels + 1, kNumLevels + 1> read_step_;
  Populations initial_;
};

double run_one(const SequenceEngine& engine, const PulseSequence& seq, const RabiTone& tone,
               double sweep_ns) {
  SequenceEngine::State s = engine.initial();
  double photons = 0.0;
  for (const auto& op : seq.ops) {
    const double t = seq.duration_ns(op, sweep_ns) * 1e-9;
    if (t < 0.0) throw Error(ErrorKind::InvalidArgument, "negative duration in sequence");
    switch (op.kind) {
      case OpKind::Laser: engine.laser(s, t); break;
      case OpKind::Wait: engine.wait(s, t); break;
      case OpKind::Read: photons += engine.read(s, t); break;
      case OpKind::Mw: {
        const double angle = 2.0 * std::numbers::pi * op.rabi_hz * tone.frequency_scale * t;
        engine.mw(s, t, angle, op.phase_deg * std::numbers::pi / 180.0, tone.decay_s);
        break;
      }
    }
  }
  return photons;
}

double reference_photons(const SequenceEngine& engine, const PulseSequence& seq) {
  double photons = 0.0;
  for (const auto& op : seq.ops) {
    if (op.kind != OpKind::Read) continue;
    SequenceEngine::State s = engine.initial();
    photons += engine.read(s, op.duration.ns * 1e-9);
  }
  return photons;
}

struct RunSetup {
  SequenceEngine engine;
  double reference;
  double weight_sum;
};

RunSetup prepare(const PulseSequence& seq, const LevelSystem& sys, const BlochState& bloch,
                 const RunOptions& options) {
  seq.validate_for_run();
  sys.rates.validate();
  bloch.validate();
  if (options.tones.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one Rabi tone");
  double wsum = 0.0;
  for (const auto& t : options.tones) {
    if (!(t.weight >= 0.0 && t.decay_s > 0.0)) throw Error(ErrorKind::InvalidArgument, "bad Rabi tone");
    wsum += t.weight;
  }
  if (!(wsum > 0.0)) throw Error(ErrorKind::InvalidArgument, "tone weights sum to zero");
  SequenceEngine engine(sys, bloch);
  const double ref = reference_photons(engine, seq);
  return {std::move(engine), ref, wsum};
}

double mixed_signal(const RunSetup& setup, const PulseSequence& seq, const RunOptions& options,
                    double sweep_ns) {
  double signal = 0.0;
  for (const auto& tone : options.tones) {
    signal += tone.weight / setup.weight_sum * run_one(setup.engine, seq, tone, sweep_ns);
  }
  return signal;
}

PulseSequence flipped_last_mw(PulseSequence seq) {
  for (auto it = seq.ops.rbegin(); it != seq.ops.rend(); ++it) {
    if (it->kind == OpKind::Mw) {
      it->phase_deg += 180.0;
      return seq;
    }
  }
  throw Error(ErrorKind::MalformedSequence, "phase cycling needs an mw pulse");
}

double sweep_point(const RunSetup& setup, const PulseSequence& seq, const PulseSequence* flipped,
                   const RunOptions& options, double sweep_ns, std::uint64_t seed, std::size_t index) {
  double signal = mixed_signal(setup, seq, options, sweep_ns);
  double signal_b = flipped ? mixed_signal(setup, *flipped, options, sweep_ns) : 0.0;
  double ref = setup.reference;
  if (options.photons_per_readout > 0.0) {
    const double scale = options.photons_per_readout / setup.reference;
    CounterRng rs(seed, 3 * index), rr(seed, 3 * index + 1), rb(seed, 3 * index + 2);
    signal = static_cast<double>(std::poisson_distribution<long long>(signal * scale)(rs));
    ref = static_cast<double>(std::poisson_distribution<long long>(options.photons_per_readout)(rr));
    if (flipped) signal_b = static_cast<double>(std::poisson_distribution<long long>(signal_b * scale)(rb));
  }
  if (flipped) return 0.5 * (signal - signal_b) / ref;
  return (ref - signal) / ref;
}

}  // namespace

std::vector<double> run_sequence_serial(const PulseSequence& seq, const LevelSystem& sys,
                                        const BlochState& bloch, std::span<const double> sweep_ns,
                                        std::uint64_t seed, const RunOptions& options) {
  const RunSetup setup = prepare(seq, sys, bloch, options);
  const std::optional<PulseSequence> flipped =
      options.phase_cycle ? std::optional(flipped_last_mw(seq)) : std::nullopt;
  std::vector<double> out(sweep_ns.size());
  for (std::size_t i = 0; i < sweep_ns.size(); ++i) {
    out[i] = sweep_point(setup, seq, flipped ? &*flipped : nullptr, options, sweep_ns[i], seed, i);
  }
  return out;
}

std::vector<double> run_sequence(const PulseSequence& seq, const LevelSystem& sys,
                                 const BlochState& bloch, std::span<const double> sweep_ns,
                                 std::uint64_t seed, const RunOptions& options) {
  const RunSetup setup = prepare(seq, sys, bloch, options);
  const std::optional<PulseSequence> flipped =
      options.phase_cycle ? std::optional(flipped_last_mw(seq)) : std::nullopt;
  std::vector<double> out(sweep_ns.size());
  const auto n = static_cast<std::ptrdiff_t>(sweep_ns.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = sweep_point(setup, seq, flipped ? &*flipped : nullptr, options, sweep_ns[i], seed,
                           static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(hbn_pulsed_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace hbn
