#include "hbn/fitting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "hbn/error.hpp"

namespace hbn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// e x / t^2 for e = exp(-x / t), ordered so an underflowed e gives 0, not 0 * inf
double decay_slope(double e, double x, double t) { return e * (x / t) / t; }

}  // namespace

FitModel::FitModel(ModelKind kind, int n_peaks, std::vector<std::string> names,
                   std::vector<Bound> bounds)
    : kind_(kind), n_peaks_(n_peaks), names_(std::move(names)), bounds_(std::move(bounds)) {}

FitModel FitModel::multi_lorentzian(int n_peaks) {
  if (n_peaks < 1) throw Error(ErrorKind::InvalidArgument, "multi_lorentzian needs n >= 1");
  std::vector<std::string> names{"baseline"};
  std::vector<Bound> bounds{{0.0, kInf}};
  for (int i = 1; i <= n_peaks; ++i) {
    const auto k = std::to_string(i);
    names.insert(names.end(), {"contrast_" + k, "center_" + k, "fwhm_" + k});
    bounds.insert(bounds.end(), {Bound{0.0, 0.999}, Bound{-kInf, kInf}, Bound{1e-300, kInf}});
  }
  return FitModel(ModelKind::MultiLorentzian, n_peaks, std::move(names), std::move(bounds));
}

FitModel FitModel::saturation() {
  return FitModel(ModelKind::Saturation, 0, {"i_sat", "p_sat"}, {{0.0, kInf}, {0.0, kInf}});
}

FitModel FitModel::exp_decay() {
  return FitModel(ModelKind::ExpDecay, 0, {"amplitude", "t", "offset"},
                  {{-kInf, kInf}, {1e-300, kInf}, {-kInf, kInf}});
}

FitModel FitModel::echo_decay() {
  return FitModel(ModelKind::EchoDecay, 0, {"amplitude", "t2", "offset"},
                  {{-kInf, kInf}, {1e-300, kInf}, {-kInf, kInf}});
}

FitModel FitModel::rabi_two_tone() {
  return FitModel(ModelKind::RabiTwoTone, 0,
                  {"offset", "amp_1", "tau_a", "freq_1", "phase_1", "amp_2", "tau_b", "freq_2",
                   "phase_2"},
                  {{-kInf, kInf}, {-kInf, kInf}, {1e-300, kInf}, {0.0, kInf}, {-kInf, kInf},
                   {-kInf, kInf}, {1e-300, kInf}, {0.0, kInf}, {-kInf, kInf}});
}

FitModel FitModel::from_id(std::string_view id) {
  if (id == "saturation") return saturation();
  if (id == "exp_decay") return exp_decay();
  if (id == "echo_decay") return echo_decay();
  if (id == "rabi_two_tone") return rabi_two_tone();
  constexpr std::string_view prefix = "multi_lorentzian";
  if (id.substr(0, prefix.size()) == prefix) {
    int n = 1;
    if (id.size() > prefix.size()) {
      if (id[prefix.size()] != ':') throw Error(ErrorKind::InvalidArgument, "unknown model '" + std::string(id) + "'");
      const auto digits = id.substr(prefix.size() + 1);
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
      if (ec != std::errc() || ptr != digits.data() + digits.size()) {
        throw Error(ErrorKind::InvalidArgument, "bad peak count in '" + std::string(id) + "'");
      }
    }
    return multi_lorentzian(n);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown model '" + std::string(id) + "'");
}

std::string FitModel::id() const {
  switch (kind_) {
    case ModelKind::MultiLorentzian: return "multi_lorentzian:" + std::to_string(n_peaks_);
    case ModelKind::Saturation: return "saturation";
    case ModelKind::ExpDecay: return "exp_decay";
    case ModelKind::EchoDecay: return "echo_decay";
    case ModelKind::RabiTwoTone: return "rabi_two_tone";
  }
  return "unknown";
}

void FitModel::set_bound(std::size_t index, Bound b) {
  if (index >= bounds_.size()) throw Error(ErrorKind::InvalidArgument, "bound index out of range");
  if (!(b.lo <= b.hi)) throw Error(ErrorKind::InvalidArgument, "bound lower exceeds upper");
  bounds_[index] = b;
}

std::size_t FitModel::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw Error(ErrorKind::InvalidArgument, "model " + id() + " has no parameter '" + std::string(name) + "'");
}

double FitModel::value(double x, std::span<const double> p) const {
  switch (kind_) {
    case ModelKind::MultiLorentzian: {
      double dip = 0.0;
      for (int i = 0; i < n_peaks_; ++i) {
        const double c = p[1 + 3 * i], nu = p[2 + 3 * i], hw = 0.5 * p[3 + 3 * i];
        const double dx = x - nu;
        dip += c * hw * hw / (dx * dx + hw * hw);
      }
      return p[0] * (1.0 - dip);
    }
    case ModelKind::Saturation:
      return p[0] * x / (x + p[1]);
    case ModelKind::ExpDecay:
      return p[0] * std::exp(-x / p[1]) + p[2];
    case ModelKind::EchoDecay:
      return p[0] * std::exp(-2.0 * x / p[1]) + p[2];
    case ModelKind::RabiTwoTone:
      return p[0] + p[1] * std::exp(-x / p[2]) * std::cos(kTwoPi * p[3] * x + p[4]) +
             p[5] * std::exp(-x / p[6]) * std::cos(kTwoPi * p[7] * x + p[8]);
  }
  return 0.0;
}

void FitModel::gradient(double x, std::span<const double> p, std::span<double> out) const {
  switch (kind_) {
    case ModelKind::MultiLorentzian: {
      const double b = p[0];
      double dip = 0.0;
      for (int i = 0; i < n_peaks_; ++i) {
        const double c = p[1 + 3 * i], nu = p[2 + 3 * i], hw = 0.5 * p[3 + 3 * i];
        const double dx = x - nu;
        const double den = dx * dx + hw * hw;
        const double lor = hw * hw / den;
        dip += c * lor;
        out[1 + 3 * i] = -b * lor;
        out[2 + 3 * i] = -b * c * 2.0 * hw * hw * dx / (den * den);
        out[3 + 3 * i] = -b * c * hw * dx * dx / (den * den);
      }
      out[0] = 1.0 - dip;
      return;
    }
    case ModelKind::Saturation: {
      const double d = x + p[1];
      out[0] = x / d;
      out[1] = -p[0] * x / (d * d);
      return;
    }
    case ModelKind::ExpDecay: {
      const double e = std::exp(-x / p[1]);
      out[0] = e;
      out[1] = p[0] * decay_slope(e, x, p[1]);
      out[2] = 1.0;
      return;
    }
    case ModelKind::EchoDecay: {
      const double e = std::exp(-2.0 * x / p[1]);
      out[0] = e;
      out[1] = p[0] * decay_slope(e, 2.0 * x, p[1]);
      out[2] = 1.0;
      return;
    }
    case ModelKind::RabiTwoTone: {
      out[0] = 1.0;
      for (int k = 0; k < 2; ++k) {
        const std::size_t o = 1 + 4 * static_cast<std::size_t>(k);
        const double amp = p[o], tau = p[o + 1], f = p[o + 2], ph = p[o + 3];
        const double e = std::exp(-x / tau);
        const double arg = kTwoPi * f * x + ph;
        const double c = std::cos(arg), s = std::sin(arg);
        out[o] = e * c;
        out[o + 1] = amp * c * decay_slope(e, x, tau);
        out[o + 2] = -amp * e * s * kTwoPi * x;
        out[o + 3] = -amp * e * s;
      }
      return;
    }
  }
}

std::vector<double> evaluate(const FitModel& model, std::span<const double> x,
                             std::span<const double> p) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = model.value(x[i], p);
  return out;
}

Eigen::MatrixXd jacobian(const FitModel& model, std::span<const double> x,
                         std::span<const double> p) {
  const auto m = model.n_params();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(m));
  std::vector<double> row(m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    model.gradient(x[i], p, row);
    for (std::size_t j = 0; j < m; ++j) jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return jac;
}

std::vector<double> FitResult::standard_errors() const {
  std::vector<double> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out[i] = std::sqrt(std::max(0.0, covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
  }
  return out;
}

double FitResult::param(std::string_view name) const {
  for (std::size_t i = 0; i < param_names.size(); ++i) {
    if (param_names[i] == name) return params[i];
  }
  throw Error(ErrorKind::InvalidArgument, "fit result has no parameter '" + std::string(name) + "'");
}

namespace {

double weighted_chi2(const FitModel& model, std::span<const double> x, std::span<const double> y,
                     std::span<const double> sigma, std::span<const double> p,
                     Eigen::VectorXd* residual = nullptr) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - model.value(x[i], p)) / sigma[i];
    if (residual) (*residual)(static_cast<Eigen::Index>(i)) = r;
    sum += r * r;
  }
  return sum;
}

void clamp_to_bounds(const FitModel& model, std::span<double> p) {
  const auto& bounds = model.bounds();
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::clamp(p[j], bounds[j].lo, bounds[j].hi);
}

}  // namespace

FitResult lm_fit(const FitModel& model, std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma, std::span<const double> p0,
                 const FitOptions& options) {
  const std::size_t n = x.size();
  const std::size_t m = model.n_params();
  if (y.size() != n || sigma.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "x, y and sigma must have equal length");
  }
  if (p0.size() != m) {
    throw Error(ErrorKind::DimensionMismatch,
                "model " + model.id() + " expects " + std::to_string(m) + " parameters");
  }
  if (n <= m) throw Error(ErrorKind::InvalidArgument, "need more samples than parameters");
  for (double s : sigma) {
    if (!(s > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!model.bounds()[j].contains(p0[j])) {
      throw Error(ErrorKind::InvalidArgument, "initial " + model.param_names()[j] + " is outside its bounds");
    }
  }

  const auto en = static_cast<Eigen::Index>(n);
  const auto em = static_cast<Eigen::Index>(m);
  std::vector<double> p(p0.begin(), p0.end());
  std::vector<double> trial(m);
  Eigen::VectorXd resid(en);
  Eigen::MatrixXd jac(en, em);
  Eigen::VectorXd inv_sigma(en);
  double signal = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    inv_sigma(static_cast<Eigen::Index>(i)) = 1.0 / sigma[i];
    signal += (y[i] / sigma[i]) * (y[i] / sigma[i]);
  }
  // chi^2 below this is rounding noise
  const double chi2_floor = 16.0 * std::numeric_limits<double>::epsilon() *
                            std::numeric_limits<double>::epsilon() * signal;

  FitResult result;
  result.model_id = model.id();
  result.param_names = model.param_names();

  double chi2 = weighted_chi2(model, x, y, sigma, p, &resid);
  result.chi2_history.push_back(chi2);
  double lambda = -1.0;
  bool need_jacobian = true;
  Eigen::MatrixXd normal;
  Eigen::VectorXd grad;
  Eigen::VectorXd scale;
  int iterations = 0;
  bool converged = false;

  while (iterations < options.max_iterations) {
    if (need_jacobian) {
      jac = jacobian(model, x, p);
      jac.array().colwise() *= inv_sigma.array();
      normal = jac.transpose() * jac;
      grad = jac.transpose() * resid;  // descent direction of chi^2 / 2
      scale = normal.diagonal();
      const double max_diag = scale.maxCoeff();
      if (lambda < 0.0) {
        if (!(max_diag > 0.0) || (scale.array() <= 0.0).any()) {
          throw Error(ErrorKind::SingularJacobian,
                      "a parameter has no influence on the model at the initial point");
        }
        lambda = 1e-3 * max_diag;
      }
      scale /= max_diag;
      scale = scale.cwiseMax(1e-12);
      need_jacobian = false;
    }

    // gradient projection: parameters pinned at a bound with the descent
    // direction pointing outward are frozen for this step
    std::vector<Eigen::Index> free;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& b = model.bounds()[j];
      const double g = grad(static_cast<Eigen::Index>(j));
      const bool stuck = (p[j] <= b.lo && g < 0.0) || (p[j] >= b.hi && g > 0.0);
      if (!stuck) free.push_back(static_cast<Eigen::Index>(j));
    }
    ++iterations;
    if (free.empty()) {
      converged = true;
      break;
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd a(nf, nf);
    Eigen::VectorXd g(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
      g(r) = grad(free[r]);
      for (Eigen::Index c = 0; c < nf; ++c) a(r, c) = normal(free[r], free[c]);
      a(r, r) += lambda * scale(free[r]);
    }
    const Eigen::VectorXd delta = a.ldlt().solve(g);
    if (!delta.allFinite()) {
      throw Error(ErrorKind::SingularJacobian, "damped normal equations could not be solved");
    }

    std::copy(p.begin(), p.end(), trial.begin());
    for (Eigen::Index r = 0; r < nf; ++r) trial[static_cast<std::size_t>(free[r])] += delta(r);
    clamp_to_bounds(model, trial);

    double step2 = 0.0, norm2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      step2 += (trial[j] - p[j]) * (trial[j] - p[j]);
      norm2 += p[j] * p[j];
    }
    const double rel_step = std::sqrt(step2) / (std::sqrt(norm2) + options.xtol);

    Eigen::VectorXd trial_resid(en);
    const double trial_chi2 = weighted_chi2(model, x, y, sigma, trial, &trial_resid);

    if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
      const double decrease = chi2 - trial_chi2;
      p.swap(trial);
      resid.swap(trial_resid);
      chi2 = trial_chi2;
      result.chi2_history.push_back(chi2);
      lambda /= 3.0;
      need_jacobian = true;
      if (rel_step < options.xtol && (decrease <= options.ftol * chi2 || chi2 <= chi2_floor)) {
        converged = true;
        break;
      }
    } else {
      lambda *= 2.0;
      // no representable improvement left in any direction
      if (rel_step < options.xtol) {
        converged = true;
        break;
      }
    }
  }

  result.params = p;
  result.chi2 = chi2;
  result.chi2_reduced = chi2 / static_cast<double>(n - m);
  result.n_iterations = iterations;
  result.converged = converged;

  jac = jacobian(model, x, p);
  jac.array().colwise() *= inv_sigma.array();
  const Eigen::MatrixXd info = jac.transpose() * jac;
  // invert in units of each parameter's own curvature; raw entries span ~20 decades
  Eigen::VectorXd d = info.diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    if (!(d(j) > 0.0)) d(j) = 1.0;
  }
  const Eigen::VectorXd dinv = d.cwiseInverse();
  const Eigen::MatrixXd corr = dinv.asDiagonal() * info * dinv.asDiagonal();
  Eigen::MatrixXd cov = dinv.asDiagonal() * corr.completeOrthogonalDecomposition().pseudoInverse() * dinv.asDiagonal();
  result.covariance = 0.5 * (cov + cov.transpose());

  if (!converged && options.throw_on_failure) {
    throw Error(ErrorKind::NotConverged, "no convergence after " + std::to_string(iterations) +
                                             " iterations (chi2 = " + std::to_string(chi2) + ")");
  }
  return result;
}

FitModel multi_lorentzian_for(const OdmrSpectrum& spec, int n_peaks) {
  FitModel model = FitModel::multi_lorentzian(n_peaks);
  if (!spec.freqs.empty()) {
    const Bound span{spec.freqs.front(), spec.freqs.back()};
    for (int i = 0; i < n_peaks; ++i) {
      model.set_bound(static_cast<std::size_t>(2 + 3 * i), span);
      model.set_bound(static_cast<std::size_t>(3 + 3 * i), Bound{1e-300, 2.0 * (span.hi - span.lo)});
    }
  }
  return model;
}

std::vector<double> seed_multi_lorentzian(const OdmrSpectrum& spec, int n_peaks) {
  if (n_peaks < 1) throw Error(ErrorKind::InvalidArgument, "n_peaks must be at least 1");
  const std::size_t n = spec.freqs.size();
  if (n < 10 * static_cast<std::size_t>(n_peaks)) {
    throw Error(ErrorKind::InvalidArgument, "spectrum needs at least 10 points per peak");
  }
  spec.validate();

  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(n - 1, i + 2);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += spec.counts[k];
    smooth[i] = sum / static_cast<double>(hi - lo + 1);
  }

  std::vector<double> sorted = smooth;
  std::sort(sorted.begin(), sorted.end());
  const double baseline = sorted[static_cast<std::size_t>(0.9 * static_cast<double>(n - 1))];

  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (smooth[i] < smooth[i - 1] && smooth[i] <= smooth[i + 1] && smooth[i] < baseline) minima.push_back(i);
  }
  std::sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) { return smooth[a] < smooth[b]; });

  struct Dip {
    double center, depth, fwhm;
  };
  std::vector<Dip> dips;
  for (std::size_t idx : minima) {
    const double depth = baseline - smooth[idx];
    const double half = baseline - 0.5 * depth;
    std::size_t l = idx, r = idx;
    while (l > 0 && smooth[l] < half) --l;
    while (r + 1 < n && smooth[r] < half) ++r;
    const double left_hw = spec.freqs[idx] - spec.freqs[l];
    const double right_hw = spec.freqs[r] - spec.freqs[idx];
    double hw = std::min(left_hw, right_hw);
    if (hw <= 0.0) hw = std::max(left_hw, right_hw);
    if (hw <= 0.0) hw = spec.freqs[1] - spec.freqs[0];

    double center = spec.freqs[idx];
    // parabolic refinement through the three smoothed samples
    const double y0 = smooth[idx - 1], y1 = smooth[idx], y2 = smooth[idx + 1];
    const double curv = y0 - 2.0 * y1 + y2;
    if (curv > 0.0) {
      const double shift = 0.5 * (y0 - y2) / curv;
      if (std::abs(shift) <= 1.0) center += shift * 0.5 * (spec.freqs[idx + 1] - spec.freqs[idx - 1]);
    }

    const bool suppressed = std::any_of(dips.begin(), dips.end(), [&](const Dip& d) {
      return std::abs(d.center - center) < 0.25 * std::max(d.fwhm, 2.0 * hw);
    });
    if (suppressed) continue;
    dips.push_back({center, depth, 2.0 * hw});
    if (dips.size() == static_cast<std::size_t>(n_peaks)) break;
  }
  if (dips.size() < static_cast<std::size_t>(n_peaks)) {
    throw Error(ErrorKind::TooFewDips, "found " + std::to_string(dips.size()) + " dips, need " +
                                           std::to_string(n_peaks));
  }
  std::sort(dips.begin(), dips.end(), [](const Dip& a, const Dip& b) { return a.center < b.center; });

  const FitModel model = multi_lorentzian_for(spec, n_peaks);
  std::vector<double> p{baseline};
  for (const auto& d : dips) p.insert(p.end(), {d.depth / baseline, d.center, d.fwhm});
  for (std::size_t j = 0; j < p.size(); ++j) {
    const auto& b = model.bounds()[j];
    p[j] = std::clamp(p[j], b.lo, b.hi);
  }
  return p;
}

}  // namespace hbn
