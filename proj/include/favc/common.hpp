#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace favc {

// Numerical guard used across losses, metrics and normalizations.
inline constexpr double kEps = 1e-8;

enum class ErrorKind { Config, Shape, Numeric, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg) {
  throw Error(ErrorKind::Config, msg);
}
[[noreturn]] inline void fail_shape(const std::string& msg) {
  throw Error(ErrorKind::Shape, msg);
}
[[noreturn]] inline void fail_numeric(const std::string& msg) {
  throw Error(ErrorKind::Numeric, msg);
}
[[noreturn]] inline void fail_io(const std::string& msg) {
  throw Error(ErrorKind::Io, msg);
}

std::string shape_str(const std::vector<int>& shape);

// Fixed-width float formatting shared by every CSV/JSON/SVG writer so that
// identical runs emit byte-identical files.
std::string fmt_double(double v);

}  // namespace favc
