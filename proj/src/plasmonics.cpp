#include "hbn/plasmonics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "hbn/error.hpp"

namespace hbn {
namespace {

struct Nk {
  double nm, n, k;
};

// Johnson and Christy (1972), gold
constexpr std::array<Nk, 16> kGold{{
    {495.9, 1.04, 1.833}, {520.9, 0.62, 2.081}, {548.6, 0.43, 2.455}, {582.1, 0.29, 2.863},
    {616.8, 0.21, 3.272}, {659.5, 0.14, 3.697}, {704.5, 0.13, 4.103}, {756.0, 0.14, 4.542},
    {821.1, 0.16, 5.083}, {892.0, 0.17, 5.663}, {984.0, 0.22, 6.350}, {1088.0, 0.27, 7.150},
    {1216.0, 0.35, 8.145}, {1393.0, 0.43, 9.519}, {1610.0, 0.56, 11.21}, {1937.0, 0.92, 13.78},
}};

// crystalline silicon, room temperature
constexpr std::array<Nk, 12> kSilicon{{
    {450.0, 4.67, 0.1260}, {500.0, 4.30, 0.0730}, {532.0, 4.15, 0.0440}, {550.0, 4.08, 0.0410},
    {600.0, 3.94, 0.0200}, {650.0, 3.85, 0.0160}, {700.0, 3.78, 0.0084}, {750.0, 3.73, 0.0070},
    {800.0, 3.69, 0.0056}, {850.0, 3.66, 0.0039}, {900.0, 3.62, 0.0021}, {1000.0, 3.57, 0.0006},
}};

template <std::size_t N>
cplx interpolate_eps(const std::array<Nk, N>& table, double nm, const char* what) {
  if (!(nm >= table.front().nm && nm <= table.back().nm)) {
    throw Error(ErrorKind::InvalidArgument, std::string(what) + " permittivity table does not cover the wavelength");
  }
  std::size_t i = 1;
  while (i + 1 < N && table[i].nm < nm) ++i;
  const Nk& a = table[i - 1];
  const Nk& b = table[i];
  const double w = (nm - a.nm) / (b.nm - a.nm);
  const cplx idx(a.n + w * (b.n - a.n), a.k + w * (b.k - a.k));
  return idx * idx;
}

/// k_z / k0 with Im >= 0 (outgoing or decaying).
cplx kz(cplx eps, cplx eps_e, cplx s) {
  cplx v = std::sqrt(eps - eps_e * s * s);
  if (v.imag() < 0.0) v = -v;
  return v;
}

cplx fresnel_p(cplx ei, cplx ej, cplx ki, cplx kj) { return (ej * ki - ei * kj) / (ej * ki + ei * kj); }
cplx fresnel_s(cplx ki, cplx kj) { return (ki - kj) / (ki + kj); }

/// Reflection seen from the emitter toward each side, with propagation phase.
struct Reflections {
  cplx ra_p, ra_s, rb_p, rb_s;   // including phase
  cplx top_p, top_s;             // bare top interface, for transmission
  cplx l;                        // k_z / k_e in the emitter medium
};

class Geometry {
 public:
  Geometry(const LayerStack& st, double height_nm) : st_(st) {
    k0_ = 2.0 * std::numbers::pi / st.wavelength_nm;
    eps_spacer_ = cplx(st.n_spacer * st.n_spacer, 0.0);
    in_spacer_ = height_nm < st.thickness_nm;
    if (in_spacer_) {
      eps_e_ = eps_spacer_;
      za_ = st.thickness_nm - height_nm;
      zb_ = height_nm;
    } else {
      eps_e_ = st.eps_ambient;
      za_ = 0.0;
      zb_ = height_nm - st.thickness_nm;
    }
    n_e_ = std::sqrt(eps_e_).real();
  }

  bool in_spacer() const { return in_spacer_; }
  double n_e() const { return n_e_; }
  double k_e() const { return k0_ * n_e_; }
  /// Distance that controls how fast the evanescent tail dies.
  double nearest() const { return in_spacer_ ? std::min(za_, zb_) : zb_; }
  double ambient_cutoff() const { return in_spacer_ ? std::sqrt(st_.eps_ambient).real() / n_e_ : 1.0; }

  /// Largest in-plane index at which the stack can guide or bind light.
  double n_max() const {
    double m = std::max({n_e_, st_.n_spacer, std::sqrt(st_.eps_ambient).real()});
    const cplx sl = std::sqrt(st_.eps_lower);
    if (st_.eps_lower.real() > 0.0) m = std::max(m, sl.real());
    if (st_.eps_lower.real() < 0.0) {
      for (cplx ed : {eps_spacer_, st_.eps_ambient}) {
        const cplx denom = st_.eps_lower + ed;
        if (std::abs(denom) > 1e-12) m = std::max(m, std::sqrt(st_.eps_lower * ed / denom).real());
      }
    }
    return m;
  }

  Reflections at(cplx s) const {
    Reflections r;
    const cplx kze = kz(eps_e_, eps_e_, s);
    r.l = kze / n_e_;
    if (in_spacer_) {
      const cplx kza = kz(st_.eps_ambient, eps_e_, s);
      const cplx kzl = kz(st_.eps_lower, eps_e_, s);
      r.top_p = fresnel_p(eps_e_, st_.eps_ambient, kze, kza);
      r.top_s = fresnel_s(kze, kza);
      const cplx pa = std::exp(cplx(0.0, 2.0 * k0_ * za_) * kze);
      const cplx pb = std::exp(cplx(0.0, 2.0 * k0_ * zb_) * kze);
      r.ra_p = r.top_p * pa;
      r.ra_s = r.top_s * pa;
      r.rb_p = fresnel_p(eps_e_, st_.eps_lower, kze, kzl) * pb;
      r.rb_s = fresnel_s(kze, kzl) * pb;
    } else {
      const cplx kz1 = kz(eps_spacer_, eps_e_, s);
      const cplx kzl = kz(st_.eps_lower, eps_e_, s);
      const cplx p1 = std::exp(cplx(0.0, 2.0 * k0_ * st_.thickness_nm) * kz1);
      const cplx a1p = fresnel_p(eps_e_, eps_spacer_, kze, kz1);
      const cplx a1s = fresnel_s(kze, kz1);
      const cplx l1p = fresnel_p(eps_spacer_, st_.eps_lower, kz1, kzl) * p1;
      const cplx l1s = fresnel_s(kz1, kzl) * p1;
      const cplx pb = std::exp(cplx(0.0, 2.0 * k0_ * zb_) * kze);
      r.rb_p = (a1p + l1p) / (1.0 + a1p * l1p) * pb;
      r.rb_s = (a1s + l1s) / (1.0 + a1s * l1s) * pb;
      r.ra_p = r.ra_s = r.top_p = r.top_s = 0.0;
    }
    return r;
  }

 private:
  LayerStack st_;
  double k0_ = 0.0;
  cplx eps_spacer_, eps_e_;
  double n_e_ = 1.0;
  bool in_spacer_ = false;
  double za_ = 0.0, zb_ = 0.0;
};

cplx total_integrand(const Geometry& g, cplx s, bool perpendicular) {
  const Reflections r = g.at(s);
  if (perpendicular) {
    return 1.5 * s * s * s / r.l * (1.0 + r.ra_p) * (1.0 + r.rb_p) / (1.0 - r.ra_p * r.rb_p);
  }
  return 0.75 * s / r.l *
         (r.l * r.l * (1.0 - r.ra_p) * (1.0 - r.rb_p) / (1.0 - r.ra_p * r.rb_p) +
          (1.0 + r.ra_s) * (1.0 + r.rb_s) / (1.0 - r.ra_s * r.rb_s));
}

/// Upward flux per unit phi, with s = sin(phi) on the real axis.
double upward_integrand(const Geometry& g, double phi, bool perpendicular) {
  const double s = std::sin(phi);
  const Reflections r = g.at(cplx(s, 0.0));
  const double tp = 1.0 - std::norm(r.top_p);
  const double ts = 1.0 - std::norm(r.top_s);
  if (perpendicular) {
    return 0.75 * s * s * s * tp * std::norm(1.0 + r.rb_p) / std::norm(1.0 - r.ra_p * r.rb_p);
  }
  const double l2 = std::norm(r.l);
  return 0.375 * s *
         (ts * std::norm(1.0 + r.rb_s) / std::norm(1.0 - r.ra_s * r.rb_s) +
          l2 * tp * std::norm(1.0 - r.rb_p) / std::norm(1.0 - r.ra_p * r.rb_p));
}

double integrate(const std::function<double(double)>& f, double a, double b, const QuadratureOptions& q) {
  double err = 0.0, l1 = 0.0;
  const double tol = 0.05 * q.rel_tol;
  double v = 0.0;
  if (q.high_order) {
    v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol, &err, &l1);
  } else {
    v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol, &err, &l1);
  }
  if (!std::isfinite(v) || err > q.rel_tol * std::max(l1, 1e-300) + 1e-15) {
    throw Error(ErrorKind::QuadratureNotConverged, "wavevector integral did not reach the requested tolerance");
  }
  return v;
}

double total_rate(const Geometry& g, bool perpendicular, const QuadratureOptions& q) {
  // ellipse through the fourth quadrant, clear of the guided and plasmon poles
  const double s_end = std::max(3.0, 1.5 * g.n_max() / g.n_e());
  const double a = 0.5 * s_end;
  const double b = std::min(0.5, 0.15 * s_end);
  auto on_ellipse = [&](double t) {
    const cplx s(a * (1.0 - std::cos(t)), -b * std::sin(t));
    const cplx ds(a * std::sin(t), -b * std::cos(t));
    return (total_integrand(g, s, perpendicular) * ds).real();
  };
  double sum = integrate(on_ellipse, 0.0, std::numbers::pi, q);

  // evanescent tail on the real axis, in segments that widen geometrically
  auto tail = [&](double s) { return total_integrand(g, cplx(s, 0.0), perpendicular).real(); };
  const double decay = 1.0 / (2.0 * g.k_e() * g.nearest());
  double lo = s_end;
  double width = std::max(1.0, decay);
  double tail_sum = 0.0;
  for (int seg = 0; seg < 60; ++seg) {
    const double part = integrate(tail, lo, lo + width, q);
    tail_sum += part;
    lo += width;
    width *= 2.0;
    if (lo > s_end + 40.0 * decay && std::abs(part) <= 1e-3 * q.rel_tol * std::abs(sum + tail_sum)) break;
  }
  return sum + tail_sum;
}

double upward_rate(const Geometry& g, bool perpendicular, double s_max, const QuadratureOptions& q) {
  // the transmission factor has a square-root edge at the critical angle,
  // which double-exponential quadrature handles better than Kronrod rules
  // grazing emission into matched media makes the Fresnel factors 0/0
  const double phi_max = std::asin(std::min(1.0 - 1e-12, s_max));
  static thread_local boost::math::quadrature::tanh_sinh<double> ts(15);
  const double tol = q.high_order ? 1e-3 * q.rel_tol : 0.05 * q.rel_tol;
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  auto f = [&](double phi) { return upward_integrand(g, phi, perpendicular); };
  double v = 0.0;
  try {
    v = ts.integrate(f, 0.0, phi_max, tol, &err, &l1, &levels);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::QuadratureNotConverged, std::string("far-field integral failed: ") + e.what());
  }
  if (!std::isfinite(v) || err > q.rel_tol * std::max(l1, 1e-300) + 1e-15) {
    throw Error(ErrorKind::QuadratureNotConverged, "far-field integral did not reach the requested tolerance");
  }
  return v;
}

}  // namespace

cplx gold_permittivity(double wavelength_nm) { return interpolate_eps(kGold, wavelength_nm, "gold"); }
cplx silicon_permittivity(double wavelength_nm) { return interpolate_eps(kSilicon, wavelength_nm, "silicon"); }

void LayerStack::validate() const {
  if (!(thickness_nm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "spacer thickness must be non-negative");
  if (!(wavelength_nm > 0.0)) throw Error(ErrorKind::InvalidArgument, "wavelength must be positive");
  if (!(n_spacer >= 1.0)) throw Error(ErrorKind::InvalidArgument, "spacer index must be at least 1");
  if (eps_ambient.imag() != 0.0 || !(eps_ambient.real() >= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "ambient must be a lossless dielectric");
  }
  if (eps_lower.imag() < 0.0) throw Error(ErrorKind::InvalidArgument, "Im(eps) < 0 would be gain");
}

LayerStack LayerStack::on_gold(double thickness_nm, double wavelength_nm) {
  return {cplx(1.0, 0.0), kHbnIndex, thickness_nm, gold_permittivity(wavelength_nm), wavelength_nm};
}

LayerStack LayerStack::on_silicon(double thickness_nm, double wavelength_nm) {
  return {cplx(1.0, 0.0), kHbnIndex, thickness_nm, silicon_permittivity(wavelength_nm), wavelength_nm};
}

LayerStack LayerStack::on_sapphire(double thickness_nm, double wavelength_nm) {
  return {cplx(1.0, 0.0), kHbnIndex, thickness_nm, cplx(kSapphireIndex * kSapphireIndex, 0.0), wavelength_nm};
}

DecayRates dipole_rates(const LayerStack& stack, double emitter_height_nm, DipoleOrientation orientation,
                        double na, const QuadratureOptions& quad) {
  stack.validate();
  if (!(emitter_height_nm > 0.5)) throw Error(ErrorKind::InvalidArgument, "emitter height must exceed 0.5 nm");
  if (!(na > 0.0 && na <= 1.0)) throw Error(ErrorKind::InvalidArgument, "NA must lie in (0, 1]");
  if (!(quad.rel_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "quadrature tolerance must be positive");
  const Geometry g(stack, emitter_height_nm);
  if (!(g.nearest() > 0.5)) throw Error(ErrorKind::InvalidArgument, "emitter must be more than 0.5 nm from every interface");
  const double cut = g.ambient_cutoff();

  auto one = [&](bool perp) {
    DecayRates r;
    r.total_rate_rel = total_rate(g, perp, quad);
    r.radiative_rate_rel = upward_rate(g, perp, cut, quad);
    r.collected_rate_rel = upward_rate(g, perp, na * cut, quad);
    return r;
  };
  DecayRates out;
  switch (orientation) {
    case DipoleOrientation::Parallel: out = one(false); break;
    case DipoleOrientation::Perpendicular: out = one(true); break;
    case DipoleOrientation::Isotropic: {
      const DecayRates par = one(false), perp = one(true);
      out.total_rate_rel = (2.0 * par.total_rate_rel + perp.total_rate_rel) / 3.0;
      out.radiative_rate_rel = (2.0 * par.radiative_rate_rel + perp.radiative_rate_rel) / 3.0;
      out.collected_rate_rel = (2.0 * par.collected_rate_rel + perp.collected_rate_rel) / 3.0;
      break;
    }
  }
  // energy conservation up to quadrature error
  if (out.radiative_rate_rel > out.total_rate_rel * (1.0 + 10.0 * quad.rel_tol)) {
    throw Error(ErrorKind::QuadratureNotConverged, "radiative rate exceeds total rate");
  }
  out.radiative_rate_rel = std::min(out.radiative_rate_rel, out.total_rate_rel);
  out.collected_rate_rel = std::min(out.collected_rate_rel, out.radiative_rate_rel);
  return out;
}

double quasi_static_rate(cplx eps_host, cplx eps_lower, double wavelength_nm, double distance_nm,
                         DipoleOrientation orientation) {
  const double kd = 2.0 * std::numbers::pi * std::sqrt(eps_host).real() / wavelength_nm * distance_nm;
  const double im_beta = ((eps_lower - eps_host) / (eps_lower + eps_host)).imag();
  const double perp = 3.0 * im_beta / (8.0 * kd * kd * kd);
  switch (orientation) {
    case DipoleOrientation::Perpendicular: return 1.0 + perp;
    case DipoleOrientation::Parallel: return 1.0 + 0.5 * perp;
    case DipoleOrientation::Isotropic: return 1.0 + (2.0 * 0.5 * perp + perp) / 3.0;
  }
  return 1.0;
}

void EnhancementOptions::validate() const {
  if (!(emitter_depth_nm > 0.0)) throw Error(ErrorKind::InvalidArgument, "emitter depth must be positive");
  if (!(q0 > 0.0 && q0 <= 1.0)) throw Error(ErrorKind::InvalidArgument, "q0 must lie in (0, 1]");
  if (emission_nm.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one emission wavelength");
  if (!(na > 0.0 && na <= 1.0)) throw Error(ErrorKind::InvalidArgument, "NA must lie in (0, 1]");
}

double excitation_intensity(double n_spacer, double thickness_nm, double depth_nm, cplx eps_lower,
                            double wavelength_nm, double na) {
  const double k0 = 2.0 * std::numbers::pi / wavelength_nm;
  const cplx e1(n_spacer * n_spacer, 0.0);
  const cplx i(0.0, 1.0);
  auto at_angle = [&](double theta) {
    const double sa = std::sin(theta);
    const cplx kza(std::cos(theta), 0.0);
    const cplx kz1 = std::sqrt(e1 - sa * sa);
    cplx kzl = std::sqrt(eps_lower - sa * sa);
    if (kzl.imag() < 0.0) kzl = -kzl;
    const cplx ph = std::exp(2.0 * i * k0 * kz1 * thickness_nm);
    const cplx down = std::exp(i * k0 * kz1 * depth_nm);
    const cplx up = std::exp(-i * k0 * kz1 * depth_nm);
    // s: E_y
    const cplx rs = fresnel_s(kz1, kzl) * ph;
    const cplx as = 2.0 * kza / (kza + kz1) / (1.0 - fresnel_s(kz1, kza) * rs);
    const double es = std::norm(as * (down + rs * up));
    // p: in-plane E_x from the H-field amplitudes
    const cplx rp = fresnel_p(e1, eps_lower, kz1, kzl) * ph;
    const cplx ah = 2.0 * e1 * kza / (e1 * kza + kz1) / (1.0 - fresnel_p(e1, cplx(1.0, 0.0), kz1, kza) * rp);
    const double ep = std::norm(kz1 / e1 * ah * (down - rp * up));
    return 0.5 * (es + ep);
  };
  if (na <= 0.0) return at_angle(0.0);
  const double tmax = std::asin(std::min(1.0, na));
  const double weight = 0.5 * std::sin(tmax) * std::sin(tmax);
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double t) { return at_angle(t) * std::cos(t) * std::sin(t); }, 0.0, tmax, 10, 1e-10);
  return v / weight;
}

cplx reference_permittivity(ReferenceSubstrate ref, double wavelength_nm) {
  if (ref == ReferenceSubstrate::Silicon) return silicon_permittivity(wavelength_nm);
  return cplx(kSapphireIndex * kSapphireIndex, 0.0);
}

EnhancementPoint enhancement_at(double thickness_nm, const EnhancementOptions& o) {
  o.validate();
  if (!(thickness_nm > o.emitter_depth_nm)) {
    throw Error(ErrorKind::InvalidArgument, "hBN thickness must exceed the emitter depth");
  }
  const double height = thickness_nm - o.emitter_depth_nm;
  double gold = 0.0, ref = 0.0;
  for (double nm : o.emission_nm) {
    LayerStack g = LayerStack::on_gold(thickness_nm, nm);
    LayerStack r = g;
    r.eps_lower = reference_permittivity(o.reference, nm);
    const DecayRates rg = dipole_rates(g, height, o.orientation, o.na, o.quad);
    const DecayRates rr = dipole_rates(r, height, o.orientation, o.na, o.quad);
    // detected PL per excitation: q0 F_coll / (q0 F_tot + 1 - q0)
    gold += o.q0 * rg.collected_rate_rel / (o.q0 * rg.total_rate_rel + 1.0 - o.q0);
    ref += o.q0 * rr.collected_rate_rel / (o.q0 * rr.total_rate_rel + 1.0 - o.q0);
  }
  EnhancementPoint p;
  p.thickness_nm = thickness_nm;
  p.emission_gain = gold / ref;
  p.excitation_gain =
      excitation_intensity(kHbnIndex, thickness_nm, o.emitter_depth_nm, gold_permittivity(o.excitation_nm),
                           o.excitation_nm, o.na) /
      excitation_intensity(kHbnIndex, thickness_nm, o.emitter_depth_nm,
                           reference_permittivity(o.reference, o.excitation_nm), o.excitation_nm, o.na);
  p.enhancement = p.emission_gain * p.excitation_gain;
  return p;
}

std::vector<EnhancementPoint> enhancement_vs_thickness_serial(std::span<const double> thickness_nm,
                                                              const EnhancementOptions& options) {
  options.validate();
  std::vector<EnhancementPoint> out;
  out.reserve(thickness_nm.size());
  for (double t : thickness_nm) out.push_back(enhancement_at(t, options));
  return out;
}

std::vector<EnhancementPoint> enhancement_vs_thickness(std::span<const double> thickness_nm,
                                                       const EnhancementOptions& options) {
  options.validate();
  std::vector<EnhancementPoint> out(thickness_nm.size());
  const auto n = static_cast<std::ptrdiff_t>(thickness_nm.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = enhancement_at(thickness_nm[i], options);
    } catch (...) {
#pragma omp critical(hbn_plasmon_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace hbn
