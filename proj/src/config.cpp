#include "hbn/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "hbn/error.hpp"

namespace hbn {
namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::string_view what) {
  throw Error(ErrorKind::ConfigError, fmt::format("{}: cannot read '{}' as {}", key, value, what));
}

std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& raw) {
  const std::string v = trimmed(raw);
  double out = 0.0;
  const char* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) bad_value(key, raw, "a number");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& raw) {
  const std::string v = trimmed(raw);
  std::uint64_t out = 0;
  const char* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) bad_value(key, raw, "a non-negative integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& raw) {
  const std::string v = trimmed(raw);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, raw, "a boolean");
}

std::vector<double> to_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::string spaced = raw;  // commas or whitespace
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  std::istringstream in(spaced);
  std::string tok;
  while (in >> tok) out.push_back(to_double(key, tok));
  if (out.empty()) bad_value(key, raw, "a list of numbers");
  return out;
}

std::string list_text(const std::vector<double>& v) {
  return fmt::format("{}", fmt::join(v, " "));
}

constexpr std::array<std::pair<std::string_view, DipoleOrientation>, 3> kOrientations{{
    {"parallel", DipoleOrientation::Parallel},
    {"perpendicular", DipoleOrientation::Perpendicular},
    {"isotropic", DipoleOrientation::Isotropic},
}};

constexpr std::array<std::pair<std::string_view, ReferenceSubstrate>, 2> kReferences{{
    {"silicon", ReferenceSubstrate::Silicon},
    {"sapphire", ReferenceSubstrate::Sapphire},
}};

template <class E, std::size_t N>
E to_enum(const std::string& key, const std::string& raw, const std::array<std::pair<std::string_view, E>, N>& table) {
  const std::string v = trimmed(raw);
  for (const auto& [name, value] : table) {
    if (v == name) return value;
  }
  bad_value(key, raw, "one of the allowed names");
}

template <class E, std::size_t N>
std::string enum_text(E e, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == e) return std::string(name);
  }
  return "?";
}

struct Field {
  std::string key;
  std::function<void(const std::string& full_key, const std::string&)> set;
  std::function<std::string()> get;
};

using Section = std::vector<Field>;

Field num(std::string key, double& ref) {
  return {std::move(key), [&ref](const std::string& k, const std::string& v) { ref = to_double(k, v); },
          [&ref] { return fmt::format("{}", ref); }};
}

template <class T>
Field count(std::string key, T& ref) {
  return {std::move(key), [&ref](const std::string& k, const std::string& v) { ref = static_cast<T>(to_u64(k, v)); },
          [&ref] { return fmt::format("{}", ref); }};
}

Field flag(std::string key, bool& ref) {
  return {std::move(key), [&ref](const std::string& k, const std::string& v) { ref = to_bool(k, v); },
          [&ref] { return ref ? std::string("true") : std::string("false"); }};
}

Field text(std::string key, std::string& ref) {
  return {std::move(key), [&ref](const std::string&, const std::string& v) { ref = trimmed(v); },
          [&ref] { return ref; }};
}

Field list(std::string key, std::vector<double>& ref) {
  return {std::move(key), [&ref](const std::string& k, const std::string& v) { ref = to_list(k, v); },
          [&ref] { return list_text(ref); }};
}

// RabiTone lists are stored column-wise in the file
Field tone_column(std::string key, std::vector<RabiTone>& tones, double RabiTone::*member) {
  return {std::move(key),
          [&tones, member](const std::string& k, const std::string& v) {
            const auto vals = to_list(k, v);
            tones.resize(vals.size());
            for (std::size_t i = 0; i < vals.size(); ++i) tones[i].*member = vals[i];
          },
          [&tones, member] {
            std::vector<double> vals;
            for (const auto& t : tones) vals.push_back(t.*member);
            return list_text(vals);
          }};
}

Section calibration_fields(LaserCalibration& c) {
  return {num("laser_power_mw", c.laser_power_mw), num("count_rate_cps", c.count_rate),
          num("c_inf", c.response.c_inf), num("p_sat_w", c.response.p_sat_mw),
          num("linewidth_0_hz", c.response.linewidth_0)};
}

TargetElement& element(TargetMaterial& t, std::size_t i) {
  if (t.elements.size() <= i) t.elements.resize(i + 1);
  return t.elements[i];
}

std::vector<std::pair<std::string, Section>> fixed_sections(ToolkitConfig& c) {
  auto& od = c.odmr;
  auto& se = c.sensitivity;
  auto& r = c.rates;
  auto& pu = c.pulse;
  auto& t = c.target;
  auto& io = c.ion;
  auto& pl = c.plasmon;
  auto& po = pl.options;
  return {
      {"run", {count("seed", c.seed), text("out_dir", c.out_dir)}},
      {"spin", {num("d_gs_hz", c.spin.d_gs), num("e_gs_hz", c.spin.e_gs), num("g_factor", c.spin.g_factor)}},
      {"odmr",
       {num("field_t", od.field_t), num("mw_power_w", od.mw_power_w), text("calibration", od.calibration),
        num("freq_lo_hz", od.freq_lo_hz), num("freq_hi_hz", od.freq_hi_hz), count("n_points", od.n_points),
        num("dwell_s", od.dwell_s), flag("shot_noise", od.shot_noise)}},
      {"sensitivity",
       {num("p_lo_w", se.p_lo_w), num("p_hi_w", se.p_hi_w), count("n_points", se.n_points),
        num("lineshape_factor", se.lineshape_factor)}},
      {"rates",
       {num("k_pump_per_mw", r.k_pump_per_mw), num("k_r", r.k_r), num("k_isc0", r.k_isc0),
        num("k_isc1", r.k_isc1), num("k_ms", r.k_ms), num("beta", r.beta)}},
      {"pulse",
       {num("laser_power_mw", pu.laser_power_mw), num("rabi_hz", pu.rabi_hz), num("t1_s", pu.bloch.t1_s),
        num("t2_s", pu.bloch.t2_s), num("t2star_s", pu.bloch.t2star_s),
        tone_column("tone_weights", pu.tones, &RabiTone::weight),
        tone_column("tone_scales", pu.tones, &RabiTone::frequency_scale),
        tone_column("tone_decays_s", pu.tones, &RabiTone::decay_s),
        num("photons_per_readout", pu.photons_per_readout), count("n_points", pu.n_points),
        num("rabi_max_ns", pu.rabi_max_ns), num("t1_max_ns", pu.t1_max_ns), num("echo_max_ns", pu.echo_max_ns)}},
      {"target",
       {num("density_g_cm3", t.density_g_cm3), num("binding_energy_ev", t.binding_energy_ev),
        num("electronic_scale", t.electronic_scale), num("cutoff_factor", t.cutoff_factor),
        num("ed_boron_ev", element(t, 0).displacement_energy_ev),
        num("ed_nitrogen_ev", element(t, 1).displacement_energy_ev)}},
      {"beam",
       {num("energy_ev", io.beam.energy_ev), count("n_ions", io.beam.n_ions), num("bin_width_nm", io.bin_width_nm)}},
      {"plasmon",
       {num("emitter_depth_nm", po.emitter_depth_nm), num("q0", po.q0),
        {"orientation",
         [&po](const std::string& k, const std::string& v) { po.orientation = to_enum(k, v, kOrientations); },
         [&po] { return enum_text(po.orientation, kOrientations); }},
        list("emission_nm", po.emission_nm), num("excitation_nm", po.excitation_nm), num("na", po.na),
        {"reference",
         [&po](const std::string& k, const std::string& v) { po.reference = to_enum(k, v, kReferences); },
         [&po] { return enum_text(po.reference, kReferences); }},
        num("rel_tol", po.quad.rel_tol), num("thickness_lo_nm", pl.thickness_lo_nm),
        num("thickness_hi_nm", pl.thickness_hi_nm), num("thickness_step_nm", pl.thickness_step_nm)}},
  };
}

constexpr std::string_view kCalibrationPrefix = "calibration.";

}  // namespace

ToolkitConfig ToolkitConfig::defaults() {
  ToolkitConfig c;
  const std::array<ContrastAnchor, 2> anchors{{{2.0, 0.46}, {0.04, 0.10}}};
  LaserCalibration low;
  low.laser_power_mw = 1.0;
  low.count_rate = 3.6e6;
  low.response = calibrate_power_response(0.55, 110e6, anchors);
  LaserCalibration high;
  high.laser_power_mw = 5.0;
  high.count_rate = 9.0e6;
  high.response = {0.65, 0.5, 160e6};
  c.calibrations = {{"1mw", low}, {"5mw", high}};
  return c;
}

const LaserCalibration& ToolkitConfig::calibration(std::string_view name) const {
  const auto it = calibrations.find(std::string(name));
  if (it == calibrations.end()) {
    throw Error(ErrorKind::ConfigError, fmt::format("odmr.calibration: no section [calibration.{}]", name));
  }
  return it->second;
}

void ToolkitConfig::validate() const {
  auto check = [](std::string_view where, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, fmt::format("[{}] {}", where, e.what()));
    }
  };
  auto require = [](bool ok, std::string_view key, std::string_view msg) {
    if (!ok) throw Error(ErrorKind::ConfigError, fmt::format("{}: {}", key, msg));
  };
  check("spin", [&] { spin.validate(); });
  for (const auto& [name, cal] : calibrations) {
    check("calibration." + name, [&] { cal.response.validate(); });
    require(cal.count_rate > 0.0, "calibration." + name + ".count_rate_cps", "must be positive");
    require(cal.laser_power_mw > 0.0, "calibration." + name + ".laser_power_mw", "must be positive");
  }
  (void)calibration(odmr.calibration);
  require(odmr.freq_hi_hz > odmr.freq_lo_hz && odmr.freq_lo_hz > 0.0, "odmr.freq_hi_hz", "need 0 < freq_lo_hz < freq_hi_hz");
  require(odmr.n_points >= 10, "odmr.n_points", "need at least 10 points");
  require(odmr.dwell_s > 0.0, "odmr.dwell_s", "must be positive");
  require(odmr.mw_power_w >= 0.0, "odmr.mw_power_w", "must be non-negative");
  require(std::isfinite(odmr.field_t), "odmr.field_t", "must be finite");
  require(sensitivity.p_lo_w > 0.0 && sensitivity.p_hi_w > sensitivity.p_lo_w, "sensitivity.p_hi_w",
          "need 0 < p_lo_w < p_hi_w");
  require(sensitivity.n_points >= 3, "sensitivity.n_points", "need at least 3 points");
  require(sensitivity.lineshape_factor > 0.0, "sensitivity.lineshape_factor", "must be positive");
  check("rates", [&] { rates.validate(); });
  check("pulse", [&] { pulse.bloch.validate(); });
  require(pulse.laser_power_mw > 0.0, "pulse.laser_power_mw", "must be positive");
  require(pulse.rabi_hz > 0.0, "pulse.rabi_hz", "must be positive");
  require(pulse.n_points >= 2, "pulse.n_points", "need at least 2 points");
  require(pulse.photons_per_readout >= 0.0, "pulse.photons_per_readout", "must be non-negative");
  require(pulse.rabi_max_ns > 0.0 && pulse.t1_max_ns > 0.0 && pulse.echo_max_ns > 0.0, "pulse.*_max_ns",
          "sweep ranges must be positive");
  require(!pulse.tones.empty(), "pulse.tone_weights", "need at least one tone");
  for (const auto& tone : pulse.tones) {
    require(tone.weight >= 0.0 && tone.frequency_scale > 0.0 && tone.decay_s > 0.0, "pulse.tone_*",
            "weights must be non-negative, scales and decays positive");
  }
  check("target", [&] { target.validate(); });
  check("beam", [&] { ion.beam.validate(); });
  require(ion.bin_width_nm > 0.0, "beam.bin_width_nm", "must be positive");
  check("plasmon", [&] { plasmon.options.validate(); });
  require(plasmon.thickness_lo_nm > 0.0 && plasmon.thickness_hi_nm >= plasmon.thickness_lo_nm,
          "plasmon.thickness_hi_nm", "need 0 < thickness_lo_nm <= thickness_hi_nm");
  require(plasmon.thickness_lo_nm > plasmon.options.emitter_depth_nm, "plasmon.thickness_lo_nm",
          "must exceed emitter_depth_nm");
  require(plasmon.thickness_step_nm > 0.0, "plasmon.thickness_step_nm", "must be positive");
}

namespace {

// the three tone columns describe one list; a length change must set all of them
void check_tone_lists(const boost::property_tree::ptree& tree, std::size_t default_count) {
  const auto pulse = tree.get_child_optional("pulse");
  if (!pulse) return;
  std::vector<std::pair<std::string, std::size_t>> given;
  for (const char* key : {"tone_weights", "tone_scales", "tone_decays_s"}) {
    if (const auto v = pulse->get_optional<std::string>(key)) {
      given.emplace_back(key, to_list(std::string("pulse.") + key, *v).size());
    }
  }
  for (const auto& [key, n] : given) {
    if (n != given.front().second || (n != default_count && given.size() < 3)) {
      throw Error(ErrorKind::ConfigError,
                  fmt::format("pulse.{}: tone_weights, tone_scales and tone_decays_s must list the same number of tones", key));
    }
  }
}

}  // namespace

ToolkitConfig parse_config(std::string_view ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(ini_text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::ConfigError, fmt::format("line {}: {}", e.line(), e.message()));
  }

  ToolkitConfig cfg = ToolkitConfig::defaults();
  auto fixed = fixed_sections(cfg);
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw Error(ErrorKind::ConfigError, fmt::format("{}: key outside any section", section));
    }
    Section dynamic;
    const Section* fields = nullptr;
    if (section.starts_with(kCalibrationPrefix) && section.size() > kCalibrationPrefix.size()) {
      auto [it, inserted] = cfg.calibrations.try_emplace(section.substr(kCalibrationPrefix.size()));
      if (inserted) it->second = cfg.calibrations.at("1mw");
      dynamic = calibration_fields(it->second);
      fields = &dynamic;
    } else {
      for (const auto& [name, f] : fixed) {
        if (name == section) fields = &f;
      }
    }
    if (!fields) throw Error(ErrorKind::ConfigError, fmt::format("unknown section [{}]", section));
    for (const auto& [key, value] : keys) {
      const std::string full = section + "." + key;
      const Field* match = nullptr;
      for (const auto& f : *fields) {
        if (f.key == key) match = &f;
      }
      if (!match) throw Error(ErrorKind::ConfigError, fmt::format("unknown key {}", full));
      match->set(full, value.data());
    }
  }
  check_tone_lists(tree, ToolkitConfig::defaults().pulse.tones.size());
  cfg.validate();
  return cfg;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigError, fmt::format("cannot open config {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ToolkitConfig& cfg) {
  ToolkitConfig copy = cfg;
  std::string out;
  auto emit = [&out](std::string_view name, const Section& fields) {
    out += fmt::format("[{}]\n", name);
    for (const auto& f : fields) out += fmt::format("{} = {}\n", f.key, f.get());
    out += "\n";
  };
  const auto fixed = fixed_sections(copy);
  emit(fixed[0].first, fixed[0].second);
  emit(fixed[1].first, fixed[1].second);
  for (auto& [name, cal] : copy.calibrations) emit(std::string(kCalibrationPrefix) + name, calibration_fields(cal));
  for (std::size_t i = 2; i < fixed.size(); ++i) emit(fixed[i].first, fixed[i].second);
  return out;
}

}  // namespace hbn
