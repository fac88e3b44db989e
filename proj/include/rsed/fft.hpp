#pragma once

#include <complex>
#include <vector>

namespace rsed {

// Real-input FFT of a fixed size, backed by FFTW. Plans are created once;
// execution on caller-provided buffers is thread safe.
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int n_bins() const { return n_ / 2 + 1; }

  // in: n samples, out: n/2+1 bins.
  void forward(const double* in, std::complex<double>* out) const;
  // in: n/2+1 bins, out: n samples. Output is scaled by 1/n.
  void inverse(const std::complex<double>* in, double* out) const;

 private:
  int n_;
  void* fwd_plan_;
  void* inv_plan_;
  double* real_buf_;
  void* cplx_buf_;
};

}  // namespace rsed
