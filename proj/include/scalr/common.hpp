#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace scalr {

/// Dense row-major real matrix used for per-point feature blocks
/// (student features f, teacher features g, logits, ...).
using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Sentinel for unlabeled points. Excluded from every supervised loss and
/// metric.
inline constexpr int kIgnoreLabel = -1;

/// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent data artifacts (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite value detected during optimization (CLI exit code 4).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace scalr
