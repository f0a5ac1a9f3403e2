#include <doctest.h>

#include <random>
#include <string>

#include "hbn/error.hpp"
#include "hbn/pulsed.hpp"

using namespace hbn;

namespace {

Error error_of(std::string_view text) {
  try {
    parse_sequence(text);
  } catch (const Error& e) {
    return e;
  }
  FAIL("parsed: " << text);
  return Error(ErrorKind::InvalidArgument, "");
}

}  // namespace

TEST_CASE("parse: Rabi example") {
  const auto s = parse_sequence("laser 5us; wait 1us; mw t; read 300ns");
  REQUIRE(s.ops.size() == 4);
  CHECK(s.placeholder == "t");
  CHECK(s.sweep_count() == 1);
  CHECK(s.ops[0].kind == OpKind::Laser);
  CHECK(s.ops[0].duration.ns == 5000.0);
  CHECK(s.ops[1].duration.ns == 1000.0);
  CHECK(s.ops[2].kind == OpKind::Mw);
  CHECK(s.ops[2].duration.kind == Duration::Kind::Sweep);
  CHECK(s.ops[3].kind == OpKind::Read);
  CHECK(s.ops[3].duration.ns == 300.0);
  CHECK(s.duration_ns(s.ops[2], 42.0) == 42.0);
}

TEST_CASE("parse: echo with pi fractions, phases, comments and bare numbers") {
  const auto s = parse_sequence(
      "# echo\n"
      "laser 5us;\n"
      "wait 1000; mw pi/2;\n"
      "wait tau; mw pi phase 90; wait tau;\n"
      "mw pi/2 phase 180;  # final\n"
      "read 0.3us",
      25e6);
  REQUIRE(s.ops.size() == 8);
  CHECK(s.placeholder == "tau");
  CHECK(s.sweep_count() == 2);
  CHECK(s.ops[1].duration.ns == 1000.0);
  CHECK(s.ops[2].duration.kind == Duration::Kind::PiFraction);
  CHECK(s.ops[2].duration.pi_fraction == 0.5);
  // pi pulse at 25 MHz lasts 1 / (2 * 25 MHz) = 20 ns
  CHECK(s.duration_ns(s.ops[4], 0.0) == doctest::Approx(20.0));
  CHECK(s.duration_ns(s.ops[2], 0.0) == doctest::Approx(10.0));
  CHECK(s.ops[4].phase_deg == 90.0);
  CHECK(s.ops[6].phase_deg == 180.0);
  CHECK(s.ops[7].duration.ns == doctest::Approx(300.0));
  CHECK(parse_sequence("read 1ms").ops[0].duration.ns == 1e6);
}

TEST_CASE("parse: error kinds and positions") {
  const auto unit = error_of("wait 5parsecs");
  CHECK(unit.kind() == ErrorKind::UnknownUnit);
  CHECK(std::string(unit.what()).find("parsecs") != std::string::npos);

  CHECK(error_of("laser 5us; wait t; mw s; read 1us").kind() == ErrorKind::MultipleSweepPlaceholders);

  const auto syn = error_of("laser 5us;\nwait 1us; zap 3ns");
  CHECK(syn.kind() == ErrorKind::SyntaxError);
  CHECK(std::string(syn.what()).find("2:11") != std::string::npos);

  CHECK(error_of("laser").kind() == ErrorKind::SyntaxError);
  CHECK(error_of("wait -5ns").kind() == ErrorKind::SyntaxError);
  CHECK(error_of("read t").kind() == ErrorKind::SyntaxError);
  CHECK(error_of("mw pi/0").kind() == ErrorKind::SyntaxError);
  CHECK(error_of("laser 5us wait 1us").kind() == ErrorKind::SyntaxError);
}

TEST_CASE("validate_for_run needs a read and a sweep") {
  CHECK_NOTHROW(rabi_template().validate_for_run());
  CHECK_NOTHROW(t1_template().validate_for_run());
  CHECK_NOTHROW(echo_template().validate_for_run());
  CHECK_THROWS_AS(parse_sequence("laser 5us; read 300ns").validate_for_run(), Error);
  CHECK_THROWS_AS(parse_sequence("laser 5us; wait t").validate_for_run(), Error);
}

TEST_CASE("format then parse is the identity (random sequences)") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> op(0, 3), len(1, 12), coin(0, 1);
  std::uniform_real_distribution<double> dur(0.0, 5000.0), phase(-180.0, 180.0);
  std::uniform_int_distribution<int> div(1, 8);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      if (!text.empty()) text += "; ";
      switch (op(rng)) {
        case 0: text += "laser " + std::to_string(dur(rng)) + "ns"; break;
        case 1: text += coin(rng) ? "wait t" : "wait " + std::to_string(dur(rng) / 1e3) + "us"; break;
        case 2: text += "read " + std::to_string(dur(rng)); break;
        default:
          text += coin(rng) ? "mw pi/" + std::to_string(div(rng)) : std::string("mw t");
          if (coin(rng)) text += " phase " + std::to_string(phase(rng));
      }
    }
    CAPTURE(text);
    const auto s = parse_sequence(text, 17e6);
    const auto back = parse_sequence(format_sequence(s), 17e6);
    CHECK(back == s);
    CHECK(format_sequence(back) == format_sequence(s));
  }
  for (const auto& t : {rabi_template(), t1_template(), echo_template()}) {
    CHECK(parse_sequence(format_sequence(t)) == t);
  }
}
