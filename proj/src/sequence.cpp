#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "hbn/error.hpp"
#include "hbn/pulsed.hpp"

namespace hbn {
namespace {

class Parser {
 public:
  Parser(std::string_view text, double rabi_hz) : text_(text), rabi_hz_(rabi_hz) {}

  PulseSequence run() {
    PulseSequence seq;
    for (;;) {
      skip_space();
      if (at_end()) break;
      if (peek() == ';') {
        ++pos_;
        continue;
      }
      seq.ops.push_back(statement(seq));
      skip_space();
      if (at_end()) break;
      if (peek() != ';') fail("expected ';'");
      ++pos_;
    }
    return seq;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  [[noreturn]] void fail(const std::string& what, ErrorKind kind = ErrorKind::SyntaxError) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(kind, fmt::format("{}:{}: {}", line, col, what));
  }

  void skip_space() {
    while (!at_end()) {
      if (peek() == '#') {
        while (!at_end() && peek() != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(peek()))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view word() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  double number() {
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc()) fail("expected a number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  Duration duration(PulseSequence& seq, bool allow_pi) {
    skip_space();
    if (at_end()) fail("expected a duration");
    const std::size_t start = pos_;
    if (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_') {
      const std::string name(word());
      if (allow_pi && name == "pi") {
        Duration d{Duration::Kind::PiFraction, 0.0, 1.0};
        if (!at_end() && peek() == '/') {
          ++pos_;
          const double n = number();
          if (!(n > 0.0)) fail("pi divisor must be positive");
          d.pi_fraction = 1.0 / n;
        }
        return d;
      }
      if (!seq.placeholder.empty() && seq.placeholder != name) {
        pos_ = start;
        fail(fmt::format("second sweep placeholder '{}' (already sweeping '{}')", name, seq.placeholder),
             ErrorKind::MultipleSweepPlaceholders);
      }
      seq.placeholder = name;
      return {Duration::Kind::Sweep, 0.0, 1.0};
    }
    const double v = number();
    if (!(v >= 0.0)) {
      pos_ = start;
      fail("duration must be non-negative");
    }
    const std::size_t unit_pos = pos_;
    const std::string_view unit = word();
    double scale = 1.0;
    if (unit.empty() || unit == "ns") {
      scale = 1.0;
    } else if (unit == "us") {
      scale = 1e3;
    } else if (unit == "ms") {
      scale = 1e6;
    } else {
      pos_ = unit_pos;
      fail(fmt::format("unknown unit '{}'", unit), ErrorKind::UnknownUnit);
    }
    return {Duration::Kind::Fixed, v * scale, 1.0};
  }

  PulseOp statement(PulseSequence& seq) {
    const std::size_t start = pos_;
    const std::string_view kw = word();
    PulseOp op;
    if (kw == "laser") {
      op.kind = OpKind::Laser;
    } else if (kw == "wait") {
      op.kind = OpKind::Wait;
    } else if (kw == "read") {
      op.kind = OpKind::Read;
    } else if (kw == "mw") {
      op.kind = OpKind::Mw;
      op.rabi_hz = rabi_hz_;
    } else {
      pos_ = start;
      fail(kw.empty() ? std::string("expected an operation") : fmt::format("unknown operation '{}'", kw));
    }
    const std::size_t dur_pos = pos_;
    op.duration = duration(seq, op.kind == OpKind::Mw);
    if (op.kind == OpKind::Read && op.duration.kind != Duration::Kind::Fixed) {
      pos_ = dur_pos;
      skip_space();
      fail("read needs a fixed duration");
    }
    if (op.kind == OpKind::Mw) {
      skip_space();
      const std::size_t save = pos_;
      if (word() == "phase") {
        skip_space();
        op.phase_deg = number();
      } else {
        pos_ = save;
      }
    }
    return op;
  }

  std::string_view text_;
  double rabi_hz_;
  std::size_t pos_ = 0;
};

}  // namespace

PulseSequence parse_sequence(std::string_view text, double rabi_hz) { return Parser(text, rabi_hz).run(); }

std::string format_sequence(const PulseSequence& seq) {
  std::string out;
  for (const auto& op : seq.ops) {
    if (!out.empty()) out += "; ";
    switch (op.kind) {
      case OpKind::Laser: out += "laser "; break;
      case OpKind::Wait: out += "wait "; break;
      case OpKind::Read: out += "read "; break;
      case OpKind::Mw: out += "mw "; break;
    }
    switch (op.duration.kind) {
      case Duration::Kind::Fixed: out += fmt::format("{}ns", op.duration.ns); break;
      case Duration::Kind::Sweep: out += seq.placeholder; break;
      case Duration::Kind::PiFraction:
        out += op.duration.pi_fraction == 1.0 ? std::string("pi") : fmt::format("pi/{}", 1.0 / op.duration.pi_fraction);
        break;
    }
    if (op.kind == OpKind::Mw && op.phase_deg != 0.0) out += fmt::format(" phase {}", op.phase_deg);
  }
  return out;
}

}  // namespace hbn
