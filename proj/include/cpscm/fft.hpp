// SPDX-License-Identifier: Apache-2.0
//
// Thin FFTW wrapper. Plans are cached per (size, direction) behind a mutex
// and executed through the new-array interface, which is safe to call from
// several threads at once. FFTW_ESTIMATE keeps planning deterministic and
// FFTW_UNALIGNED lets plans run on whatever buffers Eigen hands us.
#pragma once

#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

#include <fftw3.h>

#include "cpscm/common.hpp"

namespace cpscm::fft {

namespace detail {

class PlanCache {
 public:
  PlanCache() = default;
  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto key = std::pair{n, sign};
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    fftw_complex* in = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_plan plan =
        fftw_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (plan == nullptr) throw std::runtime_error("fftw planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

inline PlanCache& cache() {
  static PlanCache c;
  return c;
}

inline void execute(const CVec& x, CVec& y, int sign) {
  const int n = static_cast<int>(x.size());
  if (n == 0) throw std::invalid_argument("fft: empty input");
  fftw_plan plan = cache().get(n, sign);
  auto* in = const_cast<fftw_complex*>(reinterpret_cast<const fftw_complex*>(x.data()));
  fftw_execute_dft(plan, in, reinterpret_cast<fftw_complex*>(y.data()));
}

}  // namespace detail

// Unnormalized forward DFT: X[i] = sum_n x[n] e^{-j 2 pi i n / N}.
inline CVec fft(const CVec& x) {
  CVec y(x.size());
  detail::execute(x, y, FFTW_FORWARD);
  return y;
}

// Inverse of fft(), scaled by 1/N so ifft(fft(x)) == x.
inline CVec ifft(const CVec& x) {
  CVec y(x.size());
  detail::execute(x, y, FFTW_BACKWARD);
  y *= 1.0 / static_cast<double>(x.size());
  return y;
}

// Unitary pair; preserves energy, so noise variance reads the same in both
// domains. Used for signal spectra (as opposed to operator eigenvalues).
inline CVec fft_unitary(const CVec& x) {
  CVec y = fft(x);
  y *= 1.0 / std::sqrt(static_cast<double>(x.size()));
  return y;
}

inline CVec ifft_unitary(const CVec& x) {
  CVec y(x.size());
  detail::execute(x, y, FFTW_BACKWARD);
  y *= 1.0 / std::sqrt(static_cast<double>(x.size()));
  return y;
}

}  // namespace cpscm::fft
