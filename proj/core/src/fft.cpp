#include "echoroom/fft.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include <fftw3.h>

namespace echoroom::dsp {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

  PlanPair get(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    const int len = static_cast<int>(n);
    PlanPair p;
    p.forward = fftw_plan_dft_r2c_1d(len, in, out, FFTW_ESTIMATE);
    p.backward = fftw_plan_dft_c2r_1d(len, out, in, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(n, p);
    return p;
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, PlanPair> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwDeleter>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwDeleter>;

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<Complex> rfft(std::span<const double> x, std::size_t n) {
  const PlanPair plan = cache().get(n);
  RealBuffer in(fftw_alloc_real(n));
  ComplexBuffer out(fftw_alloc_complex(n / 2 + 1));
  const std::size_t m = std::min(n, x.size());
  std::copy_n(x.begin(), m, in.get());
  std::fill(in.get() + m, in.get() + n, 0.0);
  fftw_execute_dft_r2c(plan.forward, in.get(), out.get());
  std::vector<Complex> spectrum(n / 2 + 1);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    spectrum[k] = Complex(out.get()[k][0], out.get()[k][1]);
  }
  return spectrum;
}

std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
  const PlanPair plan = cache().get(n);
  ComplexBuffer in(fftw_alloc_complex(n / 2 + 1));
  RealBuffer out(fftw_alloc_real(n));
  for (std::size_t k = 0; k < n / 2 + 1; ++k) {
    const Complex v = k < spectrum.size() ? spectrum[k] : Complex{};
    in.get()[k][0] = v.real();
    in.get()[k][1] = v.imag();
  }
  fftw_execute_dft_c2r(plan.backward, in.get(), out.get());
  std::vector<double> x(out.get(), out.get() + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : x) v *= scale;
  return x;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(len);
  auto fa = rfft(a, n);
  const auto fb = rfft(b, n);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  auto y = irfft(fa, n);
  y.resize(len);
  return y;
}

std::vector<double> xcorr_positive_lags(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) return {};
  const std::size_t n = next_pow2(x.size() + y.size());
  auto fx = rfft(x, n);
  const auto fy = rfft(y, n);
  for (std::size_t k = 0; k < fx.size(); ++k) fx[k] *= std::conj(fy[k]);
  auto r = irfft(fx, n);
  r.resize(x.size());
  return r;
}

}  // namespace echoroom::dsp
