#pragma once

// Thin RAII layer over FFTW's complex 1-D transform. Plans are created once
// under a process-wide lock (FFTW's planner is not thread-safe) and executed
// concurrently through the new-array interface on fftw_malloc'd buffers, which
// all share FFTW's default alignment.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <stdexcept>

namespace wwb {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
}  // namespace detail

using FftBuffer = std::unique_ptr<fftw_complex[], detail::FftwFree>;

inline FftBuffer make_fft_buffer(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftBuffer(p);
}

/// Unnormalized forward DFT y_k = sum_j x_j exp(-2 pi i jk / n).
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("FFT length must be positive");
    FftBuffer in = make_fft_buffer(n);
    FftBuffer out = make_fft_buffer(n);
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), FFTW_FORWARD, FFTW_ESTIMATE);
    if (plan_ == nullptr) throw std::runtime_error("FFTW failed to create a plan");
  }

  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  ~FftPlan() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }

  std::size_t size() const noexcept { return n_; }

  /// Thread-safe; `in` and `out` must come from make_fft_buffer(size()).
  void execute(fftw_complex* in, fftw_complex* out) const { fftw_execute_dft(plan_, in, out); }

 private:
  std::size_t n_;
  fftw_plan plan_ = nullptr;
};

}  // namespace wwb
