#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace marl {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
using Matrix2X = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;
using Index = Eigen::Index;

/// Number of discrete environment actions (nothing, left, right, down, up).
inline constexpr int kNumActions = 5;

/// Invalid or inconsistent configuration values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// NaN or Inf reached a numeric buffer.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) {
    throw NumericError("non-finite values in " + what);
  }
}

inline void check_finite(Scalar v, const std::string& what) {
  if (!std::isfinite(v)) {
    throw NumericError("non-finite value in " + what);
  }
}

}  // namespace marl
