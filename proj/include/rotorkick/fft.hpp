#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <mutex>
#include <vector>

#include "rotorkick/errors.hpp"

namespace rotorkick::detail {

// y_j = sum_k x_k exp(sign * 2 pi i j k / n), unnormalized.
// FFTW planning mutates global state, so it is serialized; execution is
// concurrency-safe. FFTW_ESTIMATE keeps the plan choice deterministic.
inline void dft(std::vector<std::complex<double>>& data, int sign) {
  static std::mutex plan_mutex;
  const std::size_t n = data.size();
  if (n == 0) throw NumericsError("dft: empty buffer");

  fftw_complex* buf = fftw_alloc_complex(n);
  std::memcpy(buf, data.data(), n * sizeof(fftw_complex));
  fftw_plan plan = nullptr;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf,
                            sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  if (!plan) {
    fftw_free(buf);
    throw NumericsError("dft: fftw plan creation failed");
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  std::memcpy(data.data(), buf, n * sizeof(fftw_complex));
  fftw_free(buf);
}

// Swap halves; for even n this is its own inverse and converts between
// centered ordering and DFT ordering.
inline void fftshift(std::vector<std::complex<double>>& v) {
  const std::size_t n = v.size();
  if (n % 2 != 0) throw NumericsError("fftshift: length must be even");
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) std::swap(v[i], v[i + half]);
}

}  // namespace rotorkick::detail
