#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "mktsim/errors.hpp"

namespace mktsim {

// Shortest round-trip decimal form; integral values print without a point.
// One canonical formatter keeps every emitted file byte-stable.
inline std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.007199254740992e15) {
    return std::to_string(static_cast<std::int64_t>(v));
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot open output file: " + path);
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, write_field(fields)), ...);
    out_ << '\n';
  }

 private:
  void write_field(const std::string& s) { out_ << s; }
  void write_field(const char* s) { out_ << s; }
  void write_field(double v) { out_ << format_number(v); }
  void write_field(std::int64_t v) { out_ << v; }
  void write_field(std::uint64_t v) { out_ << v; }
  void write_field(int v) { out_ << v; }

  std::ofstream out_;
};

}  // namespace mktsim
