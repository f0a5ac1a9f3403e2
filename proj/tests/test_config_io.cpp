#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "hbn/config.hpp"
#include "hbn/error.hpp"
#include "hbn/io.hpp"
#include "hbn/report.hpp"

using namespace hbn;
namespace fs = std::filesystem;

namespace {

Error error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("no error raised");
  return Error(ErrorKind::InvalidArgument, "");
}

bool mentions(const Error& e, std::string_view s) { return std::string(e.what()).find(s) != std::string::npos; }

}  // namespace

TEST_CASE("shipped default.ini equals the built-in defaults") {
  const auto cfg = load_config(fs::path(HBN_SOURCE_DIR) / "config" / "default.ini");
  CHECK(format_config(cfg) == format_config(ToolkitConfig::defaults()));
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.calibrations.count("1mw") == 1);
  CHECK(cfg.calibrations.count("5mw") == 1);
}

TEST_CASE("format then parse reproduces every setting") {
  auto cfg = ToolkitConfig::defaults();
  cfg.seed = 987654321;
  cfg.spin.e_gs = 48.5e6;
  cfg.odmr.field_t = 9.8e-3;
  cfg.odmr.shot_noise = false;
  cfg.pulse.tones = {{0.5, 1.0, 100e-9}, {0.3, 1.3, 90e-9}, {0.2, 2.0, 80e-9}};
  cfg.plasmon.options.orientation = DipoleOrientation::Isotropic;
  cfg.plasmon.options.reference = ReferenceSubstrate::Sapphire;
  cfg.calibrations["2mw"] = cfg.calibrations.at("1mw");
  cfg.calibrations["2mw"].laser_power_mw = 2.0;
  const std::string text = format_config(cfg);
  const auto back = parse_config(text);
  CHECK(format_config(back) == text);
  CHECK(back.seed == 987654321);
  CHECK(back.spin.e_gs == 48.5e6);
  CHECK(back.pulse.tones.size() == 3);
  CHECK(back.calibration("2mw").laser_power_mw == 2.0);
}

TEST_CASE("partial config keeps defaults for missing keys") {
  const auto cfg = parse_config("[odmr]\nfield_t = 0.0059\n[beam]\nenergy_ev = 600\n");
  CHECK(cfg.odmr.field_t == 0.0059);
  CHECK(cfg.ion.beam.energy_ev == 600.0);
  CHECK(cfg.spin.d_gs == ToolkitConfig::defaults().spin.d_gs);
}

TEST_CASE("strict parsing names the offending key") {
  const auto unknown = error_of([] { parse_config("[spin]\nbogus = 1\n"); });
  CHECK(unknown.kind() == ErrorKind::ConfigError);
  CHECK(mentions(unknown, "spin.bogus"));
  CHECK(mentions(error_of([] { parse_config("[nonsense]\nx = 1\n"); }), "nonsense"));
  const auto bad_value = error_of([] { parse_config("[odmr]\nn_points = lots\n"); });
  CHECK(bad_value.kind() == ErrorKind::ConfigError);
  CHECK(mentions(bad_value, "odmr.n_points"));
  const auto invalid = error_of([] { parse_config("[spin]\ng_factor = -2\n"); });
  CHECK(invalid.kind() == ErrorKind::ConfigError);
  CHECK(mentions(error_of([] { parse_config("[odmr]\ncalibration = 9mw\n"); }), "9mw"));
  CHECK(error_of([] { parse_config("[plasmon]\nthickness_lo_nm = 5\n"); }).kind() == ErrorKind::ConfigError);
  CHECK(mentions(error_of([] { parse_config("[pulse]\ntone_weights = 0.5, 0.3, 0.2\n"); }), "pulse.tone_weights"));
  CHECK(error_of([] { parse_config("[pulse]\ntone_weights = 0.5, 0.5\ntone_scales = 1\n"); }).kind() ==
        ErrorKind::ConfigError);
  CHECK(parse_config("[pulse]\ntone_weights = 0.5, 0.5\n").pulse.tones[1].weight == 0.5);
}

TEST_CASE("CSV: random tables round-trip losslessly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  for (int trial = 0; trial < 100; ++trial) {
    Table t{{"freq_hz", "counts", "sigma"}, {{}, {}, {}}};
    for (int r = 0; r < 50; ++r) {
      for (auto& c : t.columns) c.push_back(std::ldexp(mant(rng), expo(rng)));
    }
    const auto back = parse_csv(format_csv(t));
    CHECK(back.names == t.names);
    CHECK(back.columns == t.columns);
  }
}

TEST_CASE("CSV: errors name the line") {
  const auto ragged = error_of([] { parse_csv("freq_hz,counts\n1,2\n3,4\n5\n"); });
  CHECK(ragged.kind() == ErrorKind::ParseError);
  CHECK(mentions(ragged, "line 4"));
  CHECK(mentions(error_of([] { parse_csv("freq_hz,counts\n1,2\n3,x\n"); }), "line 3"));
  CHECK(error_of([] { parse_csv(""); }).kind() == ErrorKind::ParseError);
  // comments are skipped but still counted
  CHECK(mentions(error_of([] { parse_csv("# run 4\nfreq_hz,counts\n1,2,3\n"); }), "line 3"));
}

TEST_CASE("CSV: unitless columns are rejected") {
  const auto e = error_of([] { parse_csv("frequency,counts\n1,2\n"); });
  CHECK(e.kind() == ErrorKind::ParseError);
  CHECK(mentions(e, "frequency"));
  CHECK(column_unit("freq_hz") == "hz");
  CHECK(column_unit("eta_t_per_sqrthz") == "t_per_sqrthz");
  CHECK(column_unit("sweep_ns") == "ns");
  CHECK(column_unit("power_mw") == "mw");
  CHECK(column_unit("counts").empty());
}

TEST_CASE("trace kinds follow the x column") {
  const std::string tail = "\n1,10\n2,9\n3,8\n4,7\n5,6\n";
  CHECK(trace_from_table(parse_csv("freq_hz,counts" + tail)).kind == TraceKind::Odmr);
  CHECK(trace_from_table(parse_csv("power_mw,counts" + tail)).kind == TraceKind::Saturation);
  CHECK(trace_from_table(parse_csv("sweep_ns,contrast" + tail)).kind == TraceKind::Decay);
  CHECK(trace_from_table(parse_csv("time_us,counts" + tail)).kind == TraceKind::Decay);
  const auto with_sigma = trace_from_table(parse_csv("freq_hz,counts,sigma\n1,10,1\n2,9,1\n3,8,1\n4,7,1\n"));
  CHECK(with_sigma.sigma.has_value());
  CHECK(error_of([] { trace_from_table(parse_csv("freq_hz,counts\n1,2\n2,3\n3,4\n")); }).kind() ==
        ErrorKind::ParseError);
  CHECK(error_of([] { trace_from_table(parse_csv("freq_hz,counts\n1,2\n3,3\n2,4\n4,4\n")); }).kind() ==
        ErrorKind::ParseError);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest records the hash of every output") {
  const fs::path dir = fs::temp_directory_path() / "hbn_manifest_test";
  fs::remove_all(dir);
  RunManifest m(dir, "unit");
  m.set_seed(42);
  m.set_input("note", "x");
  m.write("a.csv", "freq_hz,counts\n1,2\n");
  m.finish();
  const auto j = nlohmann::json::parse(read_text(dir / "manifest.json"));
  CHECK(j["seed"] == 42);
  CHECK(j["toolkit_version"] == std::string(kToolkitVersion));
  CHECK(j["outputs"]["a.csv"] == sha256_hex("freq_hz,counts\n1,2\n"));
  fs::remove_all(dir);
}

TEST_CASE("svg output is a standalone document") {
  PlotSpec p{"t", "x", "y", true, {{"a", {1.0, 10.0, 100.0}, {1.0, 2.0, 3.0}, false}}};
  const auto svg = render_svg(p);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("href") == std::string::npos);
}
