// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string_view>

#include <Eigen/Dense>

namespace cpscm {

using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline double to_db(double linear) { return 10.0 * std::log10(linear); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

// e^{-j 2 pi k / n} with the exponent reduced modulo n before any floating
// point rounding, so integer phase ramps stay exact for large k.
inline Cplx unit_phase(long long k, long long n) {
  long long r = k % n;
  if (r < 0) r += n;
  return std::polar(1.0, -2.0 * kPi * static_cast<double>(r) / static_cast<double>(n));
}

}  // namespace cpscm
