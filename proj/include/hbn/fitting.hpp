#pragma once

#include <Eigen/Dense>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbn/odmr.hpp"

namespace hbn {

enum class ModelKind { MultiLorentzian, Saturation, ExpDecay, EchoDecay, RabiTwoTone };

struct Bound {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

/// Parametric curve with analytic partial derivatives.
///
///   multi_lorentzian(n)  baseline (1 - sum_i c_i L(x; center_i, fwhm_i))
///   saturation           i_sat / (1 + p_sat / x)
///   exp_decay            a exp(-x / t) + c
///   echo_decay           a exp(-2 x / t) + c        (x = half echo spacing)
///   rabi_two_tone        offset + sum_{k=1,2} amp_k exp(-x / tau_k) cos(2 pi f_k x + phase_k)
class FitModel {
 public:
  static FitModel multi_lorentzian(int n_peaks);
  static FitModel saturation();
  static FitModel exp_decay();
  static FitModel echo_decay();
  static FitModel rabi_two_tone();
  /// Accepts the ids produced by id(): "multi_lorentzian:2", "saturation", ...
  static FitModel from_id(std::string_view id);

  ModelKind kind() const noexcept { return kind_; }
  int n_peaks() const noexcept { return n_peaks_; }
  std::string id() const;
  std::size_t n_params() const noexcept { return names_.size(); }
  const std::vector<std::string>& param_names() const noexcept { return names_; }
  const std::vector<Bound>& bounds() const noexcept { return bounds_; }
  void set_bound(std::size_t index, Bound b);
  std::size_t index_of(std::string_view name) const;

  double value(double x, std::span<const double> p) const;
  /// Writes df/dp_j into out (size n_params()).
  void gradient(double x, std::span<const double> p, std::span<double> out) const;

 private:
  FitModel(ModelKind kind, int n_peaks, std::vector<std::string> names, std::vector<Bound> bounds);

  ModelKind kind_;
  int n_peaks_ = 0;
  std::vector<std::string> names_;
  std::vector<Bound> bounds_;
};

std::vector<double> evaluate(const FitModel& model, std::span<const double> x,
                             std::span<const double> p);

/// Rows are samples, columns parameters.
Eigen::MatrixXd jacobian(const FitModel& model, std::span<const double> x,
                         std::span<const double> p);

struct FitOptions {
  int max_iterations = 200;
  double xtol = 1e-10;  // relative step
  double ftol = 1e-10;  // relative decrease of chi^2
  bool throw_on_failure = true;
};

struct FitResult {
  std::string model_id;
  std::vector<std::string> param_names;
  std::vector<double> params;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  double chi2_reduced = 0.0;
  int n_iterations = 0;
  bool converged = false;
  std::vector<double> chi2_history;  // chi^2 after every accepted step, starting at p0

  std::vector<double> standard_errors() const;
  double param(std::string_view name) const;
};

/// Damped Gauss-Newton minimization of sum((y - f(x; p)) / sigma)^2 with box
/// bounds (clamping plus gradient projection). The covariance is
/// (J^T W J)^-1 at the solution, i.e. sigma is taken as absolute.
/// Throws DimensionMismatch, InvalidArgument, SingularJacobian, and
/// NotConverged (unless options.throw_on_failure is false).
FitResult lm_fit(const FitModel& model, std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma, std::span<const double> p0,
                 const FitOptions& options = {});

/// Initial parameters for multi_lorentzian(n_peaks) from the n deepest local
/// minima of a 5-bin moving average. Centers come out sorted ascending.
/// Throws TooFewDips and InvalidArgument (fewer than 10 n points).
std::vector<double> seed_multi_lorentzian(const OdmrSpectrum& spec, int n_peaks);

/// multi_lorentzian model whose center bounds are the spectrum's frequency span.
FitModel multi_lorentzian_for(const OdmrSpectrum& spec, int n_peaks);

}  // namespace hbn
