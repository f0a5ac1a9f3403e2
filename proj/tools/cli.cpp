#include "hbn/cli.hpp"

#include <fmt/format.h>
#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <optional>
#include <ostream>

#include "hbn/config.hpp"
#include "hbn/fitting.hpp"
#include "hbn/io.hpp"
#include "hbn/ion_range.hpp"
#include "hbn/odmr.hpp"
#include "hbn/plasmonics.hpp"
#include "hbn/pulsed.hpp"
#include "hbn/report.hpp"
#include "hbn/sensitivity.hpp"
#include "hbn/spin_model.hpp"

namespace hbn {

int exit_code_for(ErrorKind kind, bool fitting) noexcept {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::ParseError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::SyntaxError:
    case ErrorKind::UnknownUnit:
    case ErrorKind::MultipleSweepPlaceholders:
    case ErrorKind::MalformedSequence:
    case ErrorKind::EnergyOutOfRange:
    case ErrorKind::DimensionMismatch:
      return kExitConfig;
    case ErrorKind::SingularJacobian:
    case ErrorKind::TooFewDips:
      return fitting ? kExitFit : kExitNumerical;
    case ErrorKind::NotConverged:
      return fitting ? kExitFit : kExitNumerical;
    case ErrorKind::QuadratureNotConverged:
    case ErrorKind::StepTooLarge:
      return kExitNumerical;
    default:
      return kExitFailure;
  }
}

namespace {

using json = nlohmann::ordered_json;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 0;
};

struct Context {
  ToolkitConfig cfg;
  RunManifest manifest;
  std::ostream& out;
};

Context make_context(const Globals& g, const std::string& command, std::ostream& out) {
  ToolkitConfig cfg = g.config_path.empty() ? ToolkitConfig::defaults() : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.threads > 0) omp_set_num_threads(g.threads);
  Context ctx{cfg, RunManifest(cfg.out_dir, command), out};
  ctx.manifest.set_seed(cfg.seed);
  ctx.manifest.set_input("config_file", g.config_path.empty() ? json(nullptr) : json(g.config_path));
  // the output location is not a model input; reruns elsewhere hash the same
  ToolkitConfig hashed = cfg;
  hashed.out_dir.clear();
  ctx.manifest.set_input("config_sha256", sha256_hex(format_config(hashed)));
  return ctx;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct OdmrArgs {
  std::optional<double> field_mt, mw_power_w;
  std::optional<std::string> calibration;
  bool no_noise = false;
};

int cmd_simulate_odmr(Context& ctx, const OdmrArgs& a) {
  auto& s = ctx.cfg.odmr;
  const double field = a.field_mt ? *a.field_mt * 1e-3 : s.field_t;
  const double p_mw = a.mw_power_w.value_or(s.mw_power_w);
  const std::string cal_name = a.calibration.value_or(s.calibration);
  const LaserCalibration& cal = ctx.cfg.calibration(cal_name);

  const ResonancePair res = resonance_frequencies_general(ctx.cfg.spin, MagneticField::axial(field));
  const BroadenedLine line = power_broadened_line(cal.response, p_mw);
  // the summed contrast of both branches equals the calibrated contrast
  const std::vector<LorentzianLine> lines{{res.nu1, line.fwhm, 0.5 * line.contrast},
                                          {res.nu2, line.fwhm, 0.5 * line.contrast}};
  const auto grid = linear_grid(s.freq_lo_hz, s.freq_hi_hz, s.n_points);
  OdmrSpectrum spec = synth_spectrum(lines, grid, cal.count_rate, s.dwell_s);
  const bool noise = s.shot_noise && !a.no_noise;
  if (noise) spec = add_shot_noise(spec, ctx.cfg.seed);

  Table t{{"freq_hz", "counts", "dwell_s"}, {spec.freqs, spec.counts, std::vector<double>(spec.freqs.size(), s.dwell_s)}};
  ctx.manifest.write("odmr.csv", format_csv(t));

  json side;
  side["field_t"] = field;
  side["mw_power_w"] = p_mw;
  side["calibration"] = cal_name;
  side["baseline_rate_cps"] = cal.count_rate;
  side["dwell_s"] = s.dwell_s;
  side["shot_noise"] = noise;
  side["lines"] = json::array();
  for (const auto& l : lines) side["lines"].push_back({{"center_hz", l.center}, {"fwhm_hz", l.fwhm}, {"contrast", l.contrast}});
  ctx.manifest.write("odmr.json", side.dump(2) + "\n");

  std::vector<double> ghz(spec.freqs.size());
  for (std::size_t i = 0; i < ghz.size(); ++i) ghz[i] = spec.freqs[i] * 1e-9;
  PlotSpec plot{fmt::format("ODMR, B = {:.2f} mT", field * 1e3), "frequency (GHz)", "counts", false,
                {{"", ghz, spec.counts, noise}}};
  ctx.manifest.write("odmr.svg", render_svg(plot));

  ctx.manifest.set_input("field_t", field);
  ctx.manifest.set_input("mw_power_w", p_mw);
  ctx.manifest.set_input("calibration", cal_name);
  ctx.manifest.set_input("shot_noise", noise);
  ctx.manifest.finish();
  ctx.out << fmt::format("resonances {:.6g} / {:.6g} Hz, splitting {:.6g} Hz\n", res.nu1, res.nu2, res.splitting());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string trace;
  std::string model;
  std::vector<double> p0;
  bool rabi = false;
};

std::vector<double> split_list(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size()) throw Error(ErrorKind::InvalidArgument, fmt::format("--p0: bad value '{}'", tok));
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// two strongest lines of a direct Fourier scan
std::vector<double> guess_rabi(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  const double span = x.back() - x.front();
  const double f_max = 0.5 * static_cast<double>(n - 1) / span;
  const double df = 0.25 / span;
  std::vector<std::pair<double, std::complex<double>>> spectrum;
  for (double f = df; f < f_max; f += df) {
    std::complex<double> acc;
    for (std::size_t i = 0; i < n; ++i) acc += (y[i] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * f * x[i]);
    spectrum.emplace_back(f, acc);
  }
  // the two largest local maxima; shoulders of a damped line are not peaks
  std::size_t k1 = 0, k2 = 0;
  double m1 = -1.0, m2 = -1.0;
  for (std::size_t k = 1; k + 1 < spectrum.size(); ++k) {
    const double m = std::abs(spectrum[k].second);
    if (m < std::abs(spectrum[k - 1].second) || m < std::abs(spectrum[k + 1].second)) continue;
    if (m > m1) {
      k2 = k1, m2 = m1;
      k1 = k, m1 = m;
    } else if (m > m2) {
      k2 = k, m2 = m;
    }
  }
  if (m2 < 0.0) throw Error(ErrorKind::TooFewDips, "could not find two oscillation frequencies; pass --p0");
  const auto [f1, y1] = spectrum[k1];
  const auto [f2, y2] = spectrum[k2];
  const double scale = 2.0 / static_cast<double>(n);
  // envelope decay from the rms of the two halves
  double r1 = 0.0, r2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) (2 * i < n ? r1 : r2) += (y[i] - mean) * (y[i] - mean);
  const double ratio = std::sqrt(r2 / std::max(r1, 1e-300));
  const double tau = ratio > 0.0 && ratio < 1.0 ? 0.5 * span / std::log(1.0 / ratio) : span;
  return {mean, scale * std::abs(y1), tau, f1, std::arg(y1), scale * std::abs(y2), tau, f2, std::arg(y2)};
}

// Dip-finder seed plus, for a pair of lines, symmetric pairs about the deepest
// point: merged power-broadened dips hide the splitting from the dip finder.
std::vector<std::vector<double>> odmr_starts(const OdmrSpectrum& spec, int n) {
  std::vector<std::vector<double>> starts;
  try {
    starts.push_back(seed_multi_lorentzian(spec, n));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::TooFewDips || n != 2) throw;
  }
  if (n != 2) return starts;
  const auto& f = spec.freqs;
  const auto& c = spec.counts;
  const std::size_t lo = std::min_element(c.begin(), c.end()) - c.begin();
  const double baseline = *std::max_element(c.begin(), c.end());
  const double depth = std::max(1.0 - c[lo] / baseline, 1e-3);
  const double span = f.back() - f.front();
  // width from the half-depth crossings
  const double half = baseline - 0.5 * (baseline - c[lo]);
  std::size_t l = lo, r = lo;
  while (l > 0 && c[l] < half) --l;
  while (r + 1 < c.size() && c[r] < half) ++r;
  const double width = std::max(f[r] - f[l], 4.0 * span / static_cast<double>(f.size()));
  for (double frac : {0.05, 0.15, 0.3, 0.5}) {
    const double h = frac * width;
    starts.push_back({baseline, 0.5 * depth, f[lo] - h, width, 0.5 * depth, f[lo] + h, width});
  }
  return starts;
}

int cmd_fit(Context& ctx, const FitArgs& a) {
  MeasuredTrace tr = read_trace(a.trace);
  if (a.rabi) {
    if (tr.kind != TraceKind::Decay) throw Error(ErrorKind::InvalidArgument, "--rabi needs a time-like x column");
    tr.kind = TraceKind::Rabi;
  }
  FitModel model = FitModel::exp_decay();
  std::vector<double> p0 = a.p0;
  std::vector<std::vector<double>> starts;
  if (tr.kind == TraceKind::Odmr) {
    OdmrSpectrum spec{tr.x, tr.y, tr.dwell_s > 0.0 ? tr.dwell_s : 1.0, 0.0};
    const int n = a.model.empty() ? 2 : FitModel::from_id(a.model).n_peaks();
    if (!a.model.empty() && FitModel::from_id(a.model).kind() != ModelKind::MultiLorentzian) {
      throw Error(ErrorKind::InvalidArgument, "odmr traces take a multi_lorentzian model");
    }
    model = multi_lorentzian_for(spec, n);
    if (p0.empty()) starts = odmr_starts(spec, n);
  } else {
    if (!a.model.empty()) {
      model = FitModel::from_id(a.model);
    } else if (tr.kind == TraceKind::Saturation) {
      model = FitModel::saturation();
    } else if (tr.kind == TraceKind::Rabi) {
      model = FitModel::rabi_two_tone();
    }
    if (p0.empty()) {
      const double span = tr.x.back() - tr.x.front();
      switch (model.kind()) {
        case ModelKind::Saturation: {
          const double ymax = *std::max_element(tr.y.begin(), tr.y.end());
          p0 = {ymax, tr.x[tr.x.size() / 2]};
          break;
        }
        case ModelKind::ExpDecay:
        case ModelKind::EchoDecay:
        {
          // 1/e point of the drop towards the last value
          const double drop = tr.y.front() - tr.y.back();
          double t_e = span / 3.0;
          for (std::size_t i = 1; i < tr.x.size(); ++i) {
            if (std::abs(tr.y[i] - tr.y.back()) < std::abs(drop) / std::numbers::e) {
              t_e = tr.x[i] - tr.x.front();
              break;
            }
          }
          p0 = {drop, model.kind() == ModelKind::EchoDecay ? 2.0 * t_e : t_e, tr.y.back()};
          break;
        }
        case ModelKind::RabiTwoTone:
          p0 = guess_rabi(tr.x, tr.y);
          break;
        case ModelKind::MultiLorentzian:
          throw Error(ErrorKind::InvalidArgument, "multi_lorentzian needs an odmr trace (freq_* column)");
      }
    }
  }
  if (starts.empty()) {
    if (p0.size() != model.n_params()) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("--p0 has {} values, model {} takes {}", p0.size(), model.id(), model.n_params()));
    }
    starts.push_back(p0);
  }

  std::string sigma_source = "column";
  std::vector<double> sigma;
  if (tr.sigma) {
    sigma = *tr.sigma;
  } else if (tr.y_name == "counts") {
    sigma_source = "poisson";
    for (double v : tr.y) sigma.push_back(std::sqrt(std::max(v, 1.0)));
  } else {
    sigma_source = "residuals";
    sigma.assign(tr.y.size(), 1.0);
  }

  FitOptions opts;
  opts.throw_on_failure = false;
  // lowest chi2 over the starts, converged fits first
  std::optional<FitResult> best;
  for (const auto& start : starts) {
    FitResult f = lm_fit(model, tr.x, tr.y, sigma, start, opts);
    if (!best || (f.converged && !best->converged) || (f.converged == best->converged && f.chi2 < best->chi2)) {
      best = std::move(f);
      p0 = start;
    }
  }
  FitResult fit = std::move(*best);
  if (sigma_source == "residuals") fit.covariance *= fit.chi2_reduced;

  json report = fit_report(fit, tr.x_name, tr.y_name);
  report["sigma_source"] = sigma_source;
  report["n_points"] = tr.x.size();
  ctx.manifest.write("fit_report.json", report.dump(2) + "\n");

  std::vector<double> xs = linear_grid(tr.x.front(), tr.x.back(), 600);
  PlotSpec plot{fmt::format("fit: {}", model.id()), tr.x_name, tr.y_name, false,
                {{"data", tr.x, tr.y, true}, {"model", xs, evaluate(model, xs, fit.params), false}}};
  ctx.manifest.write("fit_overlay.svg", render_svg(plot));

  ctx.manifest.set_input("trace", a.trace);
  ctx.manifest.set_input("trace_sha256", sha256_hex(read_text(a.trace)));
  ctx.manifest.set_input("model", model.id());
  ctx.manifest.set_input("p0", p0);
  ctx.manifest.set_input("n_starts", starts.size());
  ctx.manifest.finish();

  const auto err = fit.standard_errors();
  for (std::size_t i = 0; i < fit.params.size(); ++i) {
    ctx.out << fmt::format("{:>10} = {:.8g} +- {:.3g}\n", fit.param_names[i], fit.params[i], err[i]);
  }
  ctx.out << fmt::format("chi2_reduced = {:.4g}, iterations = {}\n", fit.chi2_reduced, fit.n_iterations);
  if (!fit.converged) {
    throw Error(ErrorKind::NotConverged,
                fmt::format("no convergence after {} iterations (chi2 {:.6g}); partial report written",
                            fit.n_iterations, fit.chi2));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_sensitivity(Context& ctx) {
  const auto& s = ctx.cfg.sensitivity;
  const auto powers = log_grid(s.p_lo_w, s.p_hi_w, s.n_points);
  // eta is proportional to the lineshape factor
  const double a_scale = s.lineshape_factor / kLorentzianLineshapeFactor;
  PlotSpec plot{"Shot-noise sensitivity", "microwave power (W)", "eta (uT/sqrt(Hz))", true, {}};
  json summary = json::object();
  for (const auto& [name, cal] : ctx.cfg.calibrations) {
    auto curve = sensitivity_vs_mw_power(cal.response, cal.count_rate, powers);
    Table t{{"power_w", "eta_t_per_sqrthz"}, {{}, {}}};
    PlotSeries series{fmt::format("{} ({} mW laser)", name, cal.laser_power_mw), {}, {}, false};
    for (const auto& pt : curve) {
      t.columns[0].push_back(pt.power);
      t.columns[1].push_back(pt.eta * a_scale);
      series.x.push_back(pt.power);
      series.y.push_back(pt.eta * a_scale * 1e6);
    }
    ctx.manifest.write(fmt::format("sensitivity_{}.csv", name), format_csv(t));
    plot.series.push_back(std::move(series));
    const auto opt = optimize_sensitivity(cal.response, cal.count_rate, s.p_lo_w, s.p_hi_w);
    summary[name] = {{"laser_power_mw", cal.laser_power_mw},
                     {"p_opt_w", opt.p_opt},
                     {"eta_opt_t_per_sqrthz", opt.eta_opt * a_scale},
                     {"boundary_optimum", opt.boundary_optimum},
                     {"analytic_p_opt_w", analytic_optimal_mw_power(cal.response)}};
    ctx.out << fmt::format("{}: optimum {:.4g} W, eta {:.4g} uT/sqrt(Hz){}\n", name, opt.p_opt,
                           opt.eta_opt * a_scale * 1e6, opt.boundary_optimum ? " (at range edge)" : "");
  }
  ctx.manifest.write("sensitivity.json", summary.dump(2) + "\n");
  ctx.manifest.write("sensitivity.svg", render_svg(plot));
  ctx.manifest.finish();
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PulseArgs {
  std::string sequence = "rabi";
  std::string sequence_file;
  std::optional<double> max_ns;
  std::optional<std::size_t> points;
  bool phase_cycle = false;
};

int cmd_pulse_sim(Context& ctx, const PulseArgs& a) {
  const auto& p = ctx.cfg.pulse;
  PulseSequence seq;
  RunOptions opts;
  opts.photons_per_readout = p.photons_per_readout;
  opts.tones = {RabiTone{1.0, 1.0, p.bloch.t2star_s}};
  std::string name = a.sequence;
  double max_ns = 0.0;
  if (!a.sequence_file.empty()) {
    seq = parse_sequence(read_text(a.sequence_file), p.rabi_hz);
    name = std::filesystem::path(a.sequence_file).stem().string();
    opts.tones = p.tones;
    opts.phase_cycle = a.phase_cycle;
    max_ns = p.rabi_max_ns;
    ctx.manifest.set_input("sequence_file_sha256", sha256_hex(read_text(a.sequence_file)));
  } else if (a.sequence == "rabi") {
    seq = rabi_template(p.rabi_hz);
    opts.tones = p.tones;
    max_ns = p.rabi_max_ns;
  } else if (a.sequence == "t1") {
    seq = t1_template();
    max_ns = p.t1_max_ns;
  } else if (a.sequence == "echo") {
    seq = echo_template(p.rabi_hz);
    opts.phase_cycle = true;
    max_ns = p.echo_max_ns;
  } else {
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown sequence '{}' (rabi, t1, echo)", a.sequence));
  }
  if (a.max_ns) max_ns = *a.max_ns;
  const std::size_t n = a.points.value_or(p.n_points);
  if (!(max_ns > 0.0) || n < 2) throw Error(ErrorKind::InvalidArgument, "sweep needs max_ns > 0 and >= 2 points");

  const auto sweep = linear_grid(0.0, max_ns, n);
  const LevelSystem sys = LevelSystem::thermal(ctx.cfg.rates, p.laser_power_mw);
  BlochState bloch = p.bloch;
  const auto contrast = run_sequence(seq, sys, bloch, sweep, ctx.cfg.seed, opts);

  Table t{{"sweep_ns", "contrast"}, {sweep, contrast}};
  ctx.manifest.write(fmt::format("pulse_{}.csv", name), format_csv(t));
  PlotSpec plot{fmt::format("pulse sequence: {}", name), "sweep (ns)", "contrast", false,
                {{"", sweep, contrast, p.photons_per_readout > 0.0}}};
  ctx.manifest.write(fmt::format("pulse_{}.svg", name), render_svg(plot));
  ctx.manifest.set_input("sequence", format_sequence(seq));
  ctx.manifest.set_input("phase_cycle", opts.phase_cycle);
  ctx.manifest.set_input("max_ns", max_ns);
  ctx.manifest.set_input("points", n);
  ctx.manifest.finish();
  ctx.out << fmt::format("{}: {} points up to {} ns\n", name, n, max_ns);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct IonArgs {
  std::optional<double> energy_ev;
  std::optional<std::uint64_t> ions;
};

int cmd_ion_range(Context& ctx, const IonArgs& a) {
  IonBeamSpec beam = ctx.cfg.ion.beam;
  if (a.energy_ev) beam.energy_ev = *a.energy_ev;
  if (a.ions) beam.n_ions = *a.ions;
  beam.seed = ctx.cfg.seed;
  const DepthHistogram h = simulate_ions(beam, ctx.cfg.target, ctx.cfg.ion.bin_width_nm);

  Table t{{"depth_nm", "vacancies"}, {{}, {}}};
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    t.columns[0].push_back(h.center_nm(i));
    t.columns[1].push_back(static_cast<double>(h.counts[i]));
  }
  ctx.manifest.write("ion_range.csv", format_csv(t));
  const double mode = most_probable_depth(h);
  const double mean = h.mean_depth_nm();
  json summary{{"energy_ev", beam.energy_ev},
               {"n_ions", beam.n_ions},
               {"bin_width_nm", h.bin_width_nm},
               {"total_vacancies", h.total()},
               {"most_probable_depth_nm", mode},
               {"mean_depth_nm", mean}};
  ctx.manifest.write("ion_range.json", summary.dump(2) + "\n");
  PlotSpec plot{fmt::format("vacancy depth, He {} eV", beam.energy_ev), "depth (nm)", "vacancies", false,
                {{"", t.columns[0], t.columns[1], false}}};
  ctx.manifest.write("ion_range.svg", render_svg(plot));
  ctx.manifest.set_input("energy_ev", beam.energy_ev);
  ctx.manifest.set_input("n_ions", beam.n_ions);
  ctx.manifest.finish();
  ctx.out << fmt::format("{} eV: most probable depth {:.3g} nm, mean {:.3g} nm\n", beam.energy_ev, mode, mean);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_plasmon(Context& ctx) {
  const auto& s = ctx.cfg.plasmon;
  std::vector<double> th;
  for (double t = s.thickness_lo_nm; t <= s.thickness_hi_nm + 1e-9; t += s.thickness_step_nm) th.push_back(t);
  const auto pts = enhancement_vs_thickness(th, s.options);

  Table t{{"thickness_nm", "enhancement"}, {th, {}}};
  std::size_t best = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t.columns[1].push_back(pts[i].enhancement);
    if (pts[i].enhancement > pts[best].enhancement) best = i;
  }
  ctx.manifest.write("plasmon.csv", format_csv(t));
  json summary{{"peak_thickness_nm", th[best]},
               {"peak_enhancement", pts[best].enhancement},
               {"q0", s.options.q0},
               {"emitter_depth_nm", s.options.emitter_depth_nm},
               {"points", json::array()}};
  for (const auto& p : pts) {
    summary["points"].push_back({{"thickness_nm", p.thickness_nm},
                                 {"enhancement", p.enhancement},
                                 {"emission_gain", p.emission_gain},
                                 {"excitation_gain", p.excitation_gain}});
  }
  ctx.manifest.write("plasmon.json", summary.dump(2) + "\n");
  PlotSpec plot{"PL enhancement on gold", "hBN thickness (nm)", "enhancement", false,
                {{"", th, t.columns[1], false}}};
  ctx.manifest.write("plasmon.svg", render_svg(plot));
  ctx.manifest.finish();
  ctx.out << fmt::format("peak enhancement {:.3g} at {} nm\n", pts[best].enhancement, th[best]);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hBN spin-defect simulation and analysis toolkit", "hbn-toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));
  Globals g;
  app.add_option("--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "RNG seed (overrides [run] seed)");
  app.add_option("--out-dir", g.out_dir, "output directory (overrides [run] out_dir)");
  app.add_option("--threads", g.threads, "OpenMP threads")->check(CLI::PositiveNumber);

  OdmrArgs odmr;
  auto* c_odmr = app.add_subcommand("simulate-odmr", "synthesize a CW ODMR spectrum");
  c_odmr->add_option("--field-mt", odmr.field_mt, "axial field (mT)");
  c_odmr->add_option("--mw-power-w", odmr.mw_power_w, "microwave power (W)");
  c_odmr->add_option("--calibration", odmr.calibration, "laser calibration name");
  c_odmr->add_flag("--no-noise", odmr.no_noise, "skip shot noise");

  FitArgs fit;
  std::string p0_text;
  auto* c_fit = app.add_subcommand("fit", "fit a measured trace");
  c_fit->add_option("trace", fit.trace, "CSV trace")->required()->check(CLI::ExistingFile);
  c_fit->add_option("--model", fit.model, "model id, e.g. multi_lorentzian:2, exp_decay, echo_decay");
  c_fit->add_option("--p0", p0_text, "comma-separated initial parameters");
  c_fit->add_flag("--rabi", fit.rabi, "treat a time trace as a Rabi oscillation");

  auto* c_sens = app.add_subcommand("sensitivity", "sensitivity versus microwave power");

  PulseArgs pulse;
  auto* c_pulse = app.add_subcommand("pulse-sim", "simulate a swept pulse sequence");
  c_pulse->add_option("--sequence", pulse.sequence, "built-in sequence: rabi, t1, echo");
  c_pulse->add_option("--sequence-file", pulse.sequence_file, "sequence text file")->check(CLI::ExistingFile);
  c_pulse->add_option("--max-ns", pulse.max_ns, "sweep end (ns)");
  c_pulse->add_option("--points", pulse.points, "sweep points");
  c_pulse->add_flag("--phase-cycle", pulse.phase_cycle, "phase-cycle the last mw pulse (file sequences)");

  IonArgs ion;
  auto* c_ion = app.add_subcommand("ion-range", "He implantation vacancy depth profile");
  c_ion->add_option("--energy-ev", ion.energy_ev, "ion energy (eV)");
  c_ion->add_option("--ions", ion.ions, "number of ions");

  auto* c_plasmon = app.add_subcommand("plasmon", "PL enhancement versus hBN thickness on gold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  bool fitting = false;
  try {
    if (c_odmr->parsed()) {
      Context ctx = make_context(g, "simulate-odmr", out);
      return cmd_simulate_odmr(ctx, odmr);
    }
    if (c_fit->parsed()) {
      if (!p0_text.empty()) fit.p0 = split_list(p0_text);
      Context ctx = make_context(g, "fit", out);
      fitting = true;
      return cmd_fit(ctx, fit);
    }
    if (c_sens->parsed()) {
      Context ctx = make_context(g, "sensitivity", out);
      return cmd_sensitivity(ctx);
    }
    if (c_pulse->parsed()) {
      Context ctx = make_context(g, "pulse-sim", out);
      return cmd_pulse_sim(ctx, pulse);
    }
    if (c_ion->parsed()) {
      Context ctx = make_context(g, "ion-range", out);
      return cmd_ion_range(ctx, ion);
    }
    if (c_plasmon->parsed()) {
      Context ctx = make_context(g, "plasmon", out);
      return cmd_plasmon(ctx);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind(), fitting);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace hbn
