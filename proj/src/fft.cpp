#include "rsed/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace rsed {

namespace {
// FFTW planning is not thread safe; execution with the new-array API is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(int n) : n_(n) {
  if (n <= 0) throw std::invalid_argument("FFT size must be positive");
  std::lock_guard<std::mutex> lock(plan_mutex());
  real_buf_ = fftw_alloc_real(n);
  cplx_buf_ = fftw_alloc_complex(n / 2 + 1);
  std::memset(real_buf_, 0, sizeof(double) * n);
  std::memset(cplx_buf_, 0, sizeof(fftw_complex) * (n / 2 + 1));
  fwd_plan_ = fftw_plan_dft_r2c_1d(n, real_buf_, static_cast<fftw_complex*>(cplx_buf_),
                                   FFTW_ESTIMATE);
  inv_plan_ = fftw_plan_dft_c2r_1d(n, static_cast<fftw_complex*>(cplx_buf_), real_buf_,
                                   FFTW_ESTIMATE);
  if (!fwd_plan_ || !inv_plan_) throw std::runtime_error("FFTW plan creation failed");
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inv_plan_));
  fftw_free(real_buf_);
  fftw_free(cplx_buf_);
}

void RealFft::forward(const double* in, std::complex<double>* out) const {
  // fftw_execute_dft_r2c does not modify the input for 1-d r2c transforms,
  // but the API takes a non-const pointer.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_plan_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(const std::complex<double>* in, double* out) const {
  // c2r transforms destroy their input; work on a copy.
  std::vector<std::complex<double>> tmp(in, in + n_bins());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inv_plan_),
                       reinterpret_cast<fftw_complex*>(tmp.data()), out);
  const double scale = 1.0 / n_;
  for (int i = 0; i < n_; ++i) out[i] *= scale;
}

}  // namespace rsed
