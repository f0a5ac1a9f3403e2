#include "hbn/ion_range.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hbn/error.hpp"
#include "hbn/rng.hpp"

namespace hbn {
namespace {

constexpr double kE2 = 14.3996;        // e^2 / (4 pi eps0), eV angstrom
constexpr double kBohr = 0.529177;     // angstrom
constexpr double kAvogadro = 6.02214076e23;

struct Particle {
  int z;
  double mass;
  double energy;
  double depth;  // angstrom
  double dx, dy, dz;
};

void deflect(Particle& p, double psi, double phi) {
  const double cp = std::cos(psi), sp = std::sin(psi);
  const double cf = std::cos(phi), sf = std::sin(phi);
  const double rho = std::sqrt(std::max(0.0, 1.0 - p.dz * p.dz));
  if (rho < 1e-10) {
    const double sign = p.dz >= 0.0 ? 1.0 : -1.0;
    p.dx = sp * cf;
    p.dy = sp * sf;
    p.dz = sign * cp;
    return;
  }
  const double nx = p.dx * cp + sp * (p.dx * p.dz * cf - p.dy * sf) / rho;
  const double ny = p.dy * cp + sp * (p.dy * p.dz * cf + p.dx * sf) / rho;
  const double nz = p.dz * cp - sp * cf * rho;
  const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
  p.dx = nx / norm;
  p.dy = ny / norm;
  p.dz = nz / norm;
}

void add_vacancy(DepthHistogram& hist, double depth_a) {
  const auto bin = static_cast<std::size_t>(depth_a / (10.0 * hist.bin_width_nm));
  if (bin >= hist.counts.size()) hist.counts.resize(bin + 1, 0);
  ++hist.counts[bin];
}

void merge(DepthHistogram& into, const DepthHistogram& from) {
  if (from.counts.size() > into.counts.size()) into.counts.resize(from.counts.size(), 0);
  for (std::size_t i = 0; i < from.counts.size(); ++i) into.counts[i] += from.counts[i];
}

}  // namespace

void IonBeamSpec::validate() const {
  if (!(energy_ev >= 100.0 && energy_ev <= 10000.0)) {
    throw Error(ErrorKind::EnergyOutOfRange, "ion energy must lie in [100 eV, 10 keV]");
  }
  if (n_ions < 1) throw Error(ErrorKind::InvalidArgument, "need at least one ion");
  if (ion.z < 1 || !(ion.mass_u > 0.0)) throw Error(ErrorKind::InvalidArgument, "bad ion species");
}

void TargetMaterial::validate() const {
  if (elements.empty()) throw Error(ErrorKind::InvalidArgument, "target has no elements");
  double sum = 0.0;
  for (const auto& e : elements) {
    if (!(e.fraction > 0.0) || e.species.z < 1 || !(e.species.mass_u > 0.0) || !(e.displacement_energy_ev > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "bad target element " + e.species.symbol);
    }
    sum += e.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InvalidArgument, "target fractions must sum to 1");
  if (!(density_g_cm3 > 0.0)) throw Error(ErrorKind::InvalidArgument, "density must be positive");
  if (!(binding_energy_ev >= 0.0) || !(electronic_scale >= 0.0) || !(cutoff_factor > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "binding energy and electronic scale must be non-negative");
  }
}

double TargetMaterial::mean_mass_u() const {
  double m = 0.0;
  for (const auto& e : elements) m += e.fraction * e.species.mass_u;
  return m;
}

double TargetMaterial::atomic_density_per_a3() const {
  return density_g_cm3 / mean_mass_u() * kAvogadro * 1e-24;
}

double TargetMaterial::min_displacement_energy() const {
  double m = elements.front().displacement_energy_ev;
  for (const auto& e : elements) m = std::min(m, e.displacement_energy_ev);
  return m;
}

std::vector<double> DepthHistogram::edges_nm() const {
  std::vector<double> e(counts.size() + 1);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = static_cast<double>(i) * bin_width_nm;
  return e;
}

long long DepthHistogram::total() const noexcept {
  long long t = 0;
  for (long long c : counts) t += c;
  return t;
}

double DepthHistogram::mean_depth_nm() const {
  const long long t = total();
  if (t == 0) throw Error(ErrorKind::EmptyHistogram, "histogram has no counts");
  double s = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) s += static_cast<double>(counts[i]) * center_nm(i);
  return s / static_cast<double>(t);
}

double zbl_screening_length(int z1, int z2) {
  return 0.8854 * kBohr / (std::pow(z1, 0.23) + std::pow(z2, 0.23));
}

double lindhard_scharff(int z1, double m1, int z2, double energy_ev) {
  const double zz = std::pow(std::pow(z1, 2.0 / 3.0) + std::pow(z2, 2.0 / 3.0), 1.5);
  // 1.212 ... sqrt(E/keV) in eV per 1e15 atoms/cm^2, which is 10 eV angstrom^2
  const double k = 12.12 * std::pow(z1, 7.0 / 6.0) * z2 / (zz * std::sqrt(m1));
  return k * std::sqrt(energy_ev / 1000.0);
}

double magic_sin2_half_theta(double eps, double b) {
  if (eps > 10.0) {
    return 1.0 / (1.0 + (1.0 + b * (1.0 + b)) * (2.0 * eps * b) * (2.0 * eps * b));
  }
  double r = b;
  double rr = -2.7 * std::log(eps * b);
  if (rr >= b) {
    r = rr;
    rr = -2.7 * std::log(eps * rr);
    if (rr >= b) r = rr;
  }
  double v = 0.0, v1 = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double ex1 = 0.18175 * std::exp(-3.1998 * r);
    const double ex2 = 0.50986 * std::exp(-0.94229 * r);
    const double ex3 = 0.28022 * std::exp(-0.4029 * r);
    const double ex4 = 0.028171 * std::exp(-0.20162 * r);
    v = (ex1 + ex2 + ex3 + ex4) / r;
    v1 = -(v + 3.1998 * ex1 + 0.94229 * ex2 + 0.4029 * ex3 + 0.20162 * ex4) / r;
    const double fr = b * b / r + v * r / eps - r;
    const double fr1 = -b * b / (r * r) + (v + v1 * r) / eps - 1.0;
    const double q = fr / fr1;
    r -= q;
    if (std::abs(q / r) <= 1e-6) break;
  }
  const double roc = -2.0 * (eps - v) / v1;
  const double sqe = std::sqrt(eps);
  const double cc = (0.011615 + sqe) / (0.007122 + sqe);
  const double aa = 2.0 * eps * (1.0 + 0.99229 / sqe) * std::pow(b, cc);
  const double g = (14.813 + eps) / (9.3066 + eps) / (std::sqrt(aa * aa + 1.0) - aa);
  const double delta = aa * (r - b) / (1.0 + g);
  const double co = (b + delta + roc) / (r + roc);
  return std::clamp(1.0 - co * co, 0.0, 1.0);
}

IonLedger transport_ion(const IonBeamSpec& beam, const TargetMaterial& target,
                        std::uint64_t ion_index, DepthHistogram& hist) {
  CounterRng rng(beam.seed, ion_index);
  const double n = target.atomic_density_per_a3();
  const double flight = std::cbrt(1.0 / n);
  const double pmax = 1.0 / std::sqrt(std::numbers::pi * n * flight);
  const double cutoff = target.cutoff_factor * target.min_displacement_energy();

  IonLedger ledger;
  ledger.initial_ev = beam.energy_ev;
  std::vector<Particle> stack{{beam.ion.z, beam.ion.mass_u, beam.energy_ev, 0.0, 0.0, 0.0, 1.0}};
  bool primary = true;
  // a random first flight keeps collision depths off a fixed lattice
  double first_flight = flight * rng.uniform();

  while (!stack.empty()) {
    Particle p = stack.back();
    stack.pop_back();
    while (p.energy >= cutoff) {
      const double step = primary && first_flight > 0.0 ? first_flight : flight;
      first_flight = 0.0;
      p.depth += p.dz * step;
      if (p.depth < 0.0) break;  // left through the surface

      double se = 0.0;
      for (const auto& e : target.elements) {
        se += e.fraction * lindhard_scharff(p.z, p.mass, e.species.z, p.energy);
      }
      const double de = std::min(p.energy, target.electronic_scale * n * se * step);
      p.energy -= de;
      if (primary) ledger.electronic_ev += de;
      if (p.energy <= 0.0) break;

      double pick = rng.uniform();
      std::size_t k = 0;
      for (; k + 1 < target.elements.size(); ++k) {
        pick -= target.elements[k].fraction;
        if (pick < 0.0) break;
      }
      const TargetElement& hit = target.elements[k];
      const double m2 = hit.species.mass_u;
      const double a = zbl_screening_length(p.z, hit.species.z);
      const double eps = a * m2 * p.energy / (p.z * hit.species.z * kE2 * (p.mass + m2));
      const double b = pmax * std::sqrt(rng.uniform()) / a;
      const double phi = 2.0 * std::numbers::pi * rng.uniform();
      if (b <= 0.0) continue;

      const double s2 = magic_sin2_half_theta(eps, b);
      const double gamma = 4.0 * p.mass * m2 / ((p.mass + m2) * (p.mass + m2));
      const double transfer = std::min(p.energy, gamma * p.energy * s2);
      p.energy -= transfer;
      if (primary) ledger.nuclear_ev += transfer;

      const double c2 = 1.0 - s2;
      const double cos_t = 2.0 * c2 - 1.0;
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
      const double theta = std::atan2(sin_t, cos_t);
      Particle recoil{hit.species.z, m2, transfer - target.binding_energy_ev, p.depth, p.dx, p.dy, p.dz};
      deflect(p, std::atan2(sin_t, cos_t + p.mass / m2), phi);

      if (transfer >= hit.displacement_energy_ev) {
        add_vacancy(hist, p.depth);
        if (primary) ++ledger.vacancies;
        if (recoil.energy >= cutoff) {
          deflect(recoil, 0.5 * (std::numbers::pi - theta), phi + std::numbers::pi);
          stack.push_back(recoil);
        }
      }
    }
    if (primary) {
      ledger.residual_ev = p.energy;
      ledger.final_depth_nm = p.depth / 10.0;
    }
    primary = false;
  }
  return ledger;
}

DepthHistogram simulate_ions_serial(const IonBeamSpec& beam, const TargetMaterial& target,
                                    double bin_width_nm) {
  beam.validate();
  target.validate();
  if (!(bin_width_nm > 0.0)) throw Error(ErrorKind::InvalidArgument, "bin width must be positive");
  DepthHistogram hist;
  hist.bin_width_nm = bin_width_nm;
  hist.n_ions = beam.n_ions;
  for (std::uint64_t i = 0; i < beam.n_ions; ++i) transport_ion(beam, target, i, hist);
  return hist;
}

DepthHistogram simulate_ions(const IonBeamSpec& beam, const TargetMaterial& target, double bin_width_nm) {
  beam.validate();
  target.validate();
  if (!(bin_width_nm > 0.0)) throw Error(ErrorKind::InvalidArgument, "bin width must be positive");
  DepthHistogram hist;
  hist.bin_width_nm = bin_width_nm;
  hist.n_ions = beam.n_ions;
  const auto n = static_cast<std::int64_t>(beam.n_ions);
#pragma omp parallel
  {
    DepthHistogram local;
    local.bin_width_nm = bin_width_nm;
#pragma omp for schedule(dynamic, 256) nowait
    for (std::int64_t i = 0; i < n; ++i) transport_ion(beam, target, static_cast<std::uint64_t>(i), local);
#pragma omp critical(hbn_ion_merge)
    merge(hist, local);
  }
  return hist;
}

double most_probable_depth(const DepthHistogram& hist) {
  if (hist.total() == 0) throw Error(ErrorKind::EmptyHistogram, "histogram has no counts");
  const std::size_t nb = hist.counts.size();
  std::size_t best = 0;
  long long best_sum = -1;
  for (std::size_t i = 0; i < nb; ++i) {
    // comparing 3-bin sums is the same as comparing 3-bin means
    long long s = hist.counts[i];
    if (i > 0) s += hist.counts[i - 1];
    if (i + 1 < nb) s += hist.counts[i + 1];
    // equal smoothed values: the larger raw bin wins, then the shallower
    if (s > best_sum || (s == best_sum && hist.counts[i] > hist.counts[best])) {
      best_sum = s;
      best = i;
    }
  }
  return hist.center_nm(best);
}

}  // namespace hbn
