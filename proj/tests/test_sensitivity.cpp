#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "hbn/error.hpp"
#include "hbn/odmr.hpp"
#include "hbn/sensitivity.hpp"

using namespace hbn;

namespace {

// CODATA 2018
constexpr double kPlanck = 6.62607015e-34;
constexpr double kBohrMagneton = 9.2740100783e-24;

double direct_eta(double a, double c, double fwhm, double rate, double g = 2.0) {
  return a * kPlanck / (g * kBohrMagneton) * fwhm / (c * std::sqrt(rate));
}

PowerResponse calibrated() {
  const std::array<ContrastAnchor, 2> anchors{{{2.0, 0.46}, {0.04, 0.10}}};
  return calibrate_power_response(0.55, 110e6, anchors);
}

}  // namespace

TEST_CASE("eta_b: about 8 uT/sqrt(Hz) at the quoted operating point") {
  SensitivityInput in{0.77, 0.2, 110e6, 3.6e6, 2.0};
  const double eta = eta_b(in);
  CHECK(eta == doctest::Approx(direct_eta(0.77, 0.2, 110e6, 3.6e6)).epsilon(1e-3));
  CHECK(std::abs(eta / 8e-6 - 1.0) < 0.05);
}

TEST_CASE("eta_b: scaling laws") {
  SensitivityInput in{0.77, 0.2, 110e6, 3.6e6, 2.0};
  const double base = eta_b(in);
  SensitivityInput doubled = in;
  doubled.count_rate *= 2.0;
  CHECK(eta_b(doubled) == doctest::Approx(base / std::sqrt(2.0)).epsilon(1e-14));
  for (double k : {0.5, 2.0, 3.7}) {
    SensitivityInput s = in;
    s.fwhm *= k;
    s.contrast *= k / 4.0;
    SensitivityInput t = in;
    t.contrast /= 4.0;
    CHECK(eta_b(s) == doctest::Approx(eta_b(t)).epsilon(1e-15));
  }
  double last = base;
  for (int i = 1; i <= 50; ++i) {
    SensitivityInput s = in;
    s.contrast = 0.2 + 0.79 * i / 50.0;
    s.fwhm = 110e6 * (1.0 - 0.999 * i / 50.0);
    CHECK(eta_b(s) < last);
    last = eta_b(s);
  }
  CHECK(last < 1e-3 * base);
  CHECK_THROWS_AS((eta_b(SensitivityInput{0.77, 0.0, 110e6, 3.6e6, 2.0})), Error);
  CHECK_THROWS_AS((eta_b(SensitivityInput{0.77, 1.0, 110e6, 3.6e6, 2.0})), Error);
}

TEST_CASE("sensitivity curve is U-shaped with one interior minimum") {
  const auto r = calibrated();
  std::vector<double> powers;
  for (int i = 0; i < 400; ++i) powers.push_back(1e-4 * std::pow(10.0, 6.0 * i / 399.0));
  const auto curve = sensitivity_vs_mw_power(r, 3.6e6, powers);
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].eta < curve[argmin].eta) argmin = i;
  }
  CHECK(argmin > 0);
  CHECK(argmin + 1 < curve.size());
  for (std::size_t i = 1; i <= argmin; ++i) CHECK(curve[i].eta < curve[i - 1].eta);
  for (std::size_t i = argmin + 1; i < curve.size(); ++i) CHECK(curve[i].eta > curve[i - 1].eta);
  const auto serial = sensitivity_vs_mw_power_serial(r, 3.6e6, powers);
  for (std::size_t i = 0; i < curve.size(); ++i) CHECK(serial[i].eta == curve[i].eta);
  CHECK(std::isinf(eta_at_power(r, 3.6e6, 0.0)));
  CHECK(eta_at_power(r, 3.6e6, 1e-9) > 1e3 * curve[argmin].eta);
}

TEST_CASE("optimum matches the calculus oracle and a 1e6-point scan") {
  const PowerResponse r{0.55, 0.2, 110e6};
  // d/ds (1+s)^{3/2}/s = 0  ->  3s/2 = 1 + s  ->  s = 2
  const double analytic = 2.0 * r.p_sat_mw;
  CHECK(analytic_optimal_mw_power(r) == doctest::Approx(analytic).epsilon(1e-15));
  const auto opt = optimize_sensitivity(r, 3.6e6, 1e-3, 10.0);
  CHECK_FALSE(opt.boundary_optimum);
  CHECK(opt.p_opt == doctest::Approx(analytic).epsilon(1e-6));

  const double lo = 1e-3, hi = 10.0;
  const int n = 1000000;
  double best_p = lo, best = 1e300;
  for (int i = 0; i < n; ++i) {
    const double p = lo + (hi - lo) * i / (n - 1);
    const double e = eta_at_power(r, 3.6e6, p);
    if (e < best) best = e, best_p = p;
  }
  CHECK(std::abs(opt.p_opt - best_p) <= (hi - lo) / (n - 1));
  CHECK(opt.eta_opt <= best * (1.0 + 1e-12));
  CHECK(opt.eta_opt <= eta_at_power(r, 3.6e6, lo));
  CHECK(opt.eta_opt <= eta_at_power(r, 3.6e6, hi));
}

TEST_CASE("optimum on a range left of the minimum sits at the right edge") {
  const PowerResponse r{0.55, 0.2, 110e6};
  const auto opt = optimize_sensitivity(r, 3.6e6, 1e-3, 0.1);
  CHECK(opt.boundary_optimum);
  CHECK(opt.p_opt == 0.1);
}

TEST_CASE("calibrated inputs give an optimum within a factor 2 of 8 uT/sqrt(Hz)") {
  const auto opt = optimize_sensitivity(calibrated(), 3.6e6, 1e-3, 10.0);
  CHECK(opt.eta_opt >= 4e-6);
  CHECK(opt.eta_opt <= 16e-6);
}

TEST_CASE("two laser calibrations give different optima") {
  const auto low = optimize_sensitivity(calibrated(), 3.6e6, 1e-3, 10.0);
  const auto high = optimize_sensitivity(PowerResponse{0.65, 0.5, 160e6}, 9e6, 1e-3, 10.0);
  CHECK(std::abs(low.p_opt / high.p_opt - 1.0) > 0.1);
  CHECK(std::abs(low.eta_opt / high.eta_opt - 1.0) > 0.05);
}

TEST_CASE("golden section on a known parabola") {
  const auto g = golden_section_minimize([](double x) { return (x - 1.234) * (x - 1.234) + 2.0; }, -5.0, 5.0);
  CHECK(g.x == doctest::Approx(1.234).epsilon(1e-7));
  CHECK(g.fx == doctest::Approx(2.0));
}
