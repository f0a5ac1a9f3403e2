#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hbn/ion_range.hpp"
#include "hbn/odmr.hpp"
#include "hbn/plasmonics.hpp"
#include "hbn/pulsed.hpp"
#include "hbn/spin_model.hpp"

namespace hbn {

/// Microwave response and photon rate measured at one laser power.
struct LaserCalibration {
  double laser_power_mw = 1.0;
  double count_rate = 3.6e6;  // counts/s at the detector
  PowerResponse response;
};

struct OdmrSettings {
  double field_t = 0.0;
  double mw_power_w = 2.0;
  std::string calibration = "1mw";
  double freq_lo_hz = 3.0e9;
  double freq_hi_hz = 4.0e9;
  std::size_t n_points = 401;
  double dwell_s = 1e-3;
  bool shot_noise = true;
};

struct SensitivitySettings {
  double p_lo_w = 1e-3;
  double p_hi_w = 10.0;
  std::size_t n_points = 200;
  double lineshape_factor = 0.77;
};

struct PulseSettings {
  double laser_power_mw = 1.0;
  double rabi_hz = kDefaultRabiHz;
  BlochState bloch;
  std::vector<RabiTone> tones{{0.6, 1.0, 120e-9}, {0.4, 1.6, 120e-9}};
  double photons_per_readout = 0.0;
  std::size_t n_points = 101;
  double rabi_max_ns = 500.0;
  double t1_max_ns = 80000.0;
  double echo_max_ns = 5000.0;
};

struct IonRangeSettings {
  IonBeamSpec beam;
  double bin_width_nm = 0.5;
};

struct PlasmonSettings {
  EnhancementOptions options;
  double thickness_lo_nm = 10.0;
  double thickness_hi_nm = 200.0;
  double thickness_step_nm = 5.0;
};

struct ToolkitConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  ZfsSpinParams spin;
  std::map<std::string, LaserCalibration> calibrations;
  OdmrSettings odmr;
  SensitivitySettings sensitivity;
  RateConstants rates;
  PulseSettings pulse;
  TargetMaterial target;
  IonRangeSettings ion;
  PlasmonSettings plasmon;

  /// Built-in values, with the "1mw" and "5mw" calibrations.
  static ToolkitConfig defaults();
  /// Runs every module's invariant check. Throws ConfigError.
  void validate() const;
  const LaserCalibration& calibration(std::string_view name) const;
};

/// INI text: sections [run] [spin] [calibration.<name>] [odmr] [sensitivity]
/// [rates] [pulse] [target] [beam] [plasmon]. Keys not set keep their
/// defaults. Unknown sections or keys and unparsable values throw ConfigError
/// naming the key.
ToolkitConfig parse_config(std::string_view ini_text);
ToolkitConfig load_config(const std::filesystem::path& path);

/// Every setting as INI text. Formatting the parse of this text reproduces it.
std::string format_config(const ToolkitConfig& cfg);

}  // namespace hbn
