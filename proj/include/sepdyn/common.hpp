#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sepdyn {

using cd = std::complex<double>;
using MatX = Eigen::MatrixXcd;
using VecX = Eigen::VectorXcd;
using RVecX = Eigen::VectorXd;

inline constexpr cd kI{0.0, 1.0};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// Raised when the product of spectator-state norms under a reduced-operator
// sandwich falls below 1e-30.
struct DegenerateSandwich : Error {
    using Error::Error;
};

struct ZeroNormState : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

inline constexpr double kSandwichFloor = 1e-30;
inline constexpr double kEntropyEigFloor = 1e-14;
inline constexpr double kSupportLeakTol = 1e-10;

}  // namespace sepdyn
