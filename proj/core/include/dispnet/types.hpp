#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dispnet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Positions = std::vector<Vec3>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated input file. Carries the byte offset when known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, long long offset = -1)
      : Error(offset >= 0 ? what + " (at byte offset " + std::to_string(offset) + ")" : what),
        offset_(offset) {}
  long long offset() const noexcept { return offset_; }

 private:
  long long offset_;
};

/// Default Bohr/Angstrom conversion (CODATA 2018 Bohr radius).
inline constexpr double kBohrPerAngstrom = 1.8897261246257702;

}  // namespace dispnet
