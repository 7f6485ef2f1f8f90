#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <new>
#include <span>
#include <utility>
#include <vector>

namespace eegwl::fft {

template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { fftw_free(p); }
  friend bool operator==(const FftwAllocator&, const FftwAllocator&) { return true; }
};

using cplx = std::complex<double>;
using ComplexVec = std::vector<cplx, FftwAllocator<cplx>>;
using RealVec = std::vector<double, FftwAllocator<double>>;

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
inline std::size_t fast_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

namespace detail {

enum class Kind { R2C, C2CForward, C2CBackward };

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  // Plans are always built against fftw_malloc'd buffers so the new-array
  // execute functions can reuse them on any other such buffer.
  fftw_plan get(Kind kind, std::size_t n) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(kind, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    fftw_plan plan = nullptr;
    const int len = static_cast<int>(n);
    if (kind == Kind::R2C) {
      RealVec in(n);
      ComplexVec out(n / 2 + 1);
      plan = fftw_plan_dft_r2c_1d(len, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                  FFTW_ESTIMATE);
    } else {
      ComplexVec buf(n);
      auto* p = reinterpret_cast<fftw_complex*>(buf.data());
      plan = fftw_plan_dft_1d(len, p, p, kind == Kind::C2CForward ? FFTW_FORWARD : FFTW_BACKWARD,
                              FFTW_ESTIMATE);
    }
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<Kind, std::size_t>, fftw_plan> plans_;
};

}  // namespace detail

/// Real-to-half-complex transform of `x` zero-padded to length n.
/// Returns n/2 + 1 bins (unnormalized).
inline ComplexVec rfft(std::span<const double> x, std::size_t n) {
  RealVec in(n, 0.0);
  const std::size_t m = std::min(n, x.size());
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m), in.begin());
  ComplexVec out(n / 2 + 1);
  fftw_plan plan = detail::PlanCache::instance().get(detail::Kind::R2C, n);
  fftw_execute_dft_r2c(plan, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

/// In-place complex transform. Backward is unnormalized (no 1/n).
inline void transform(ComplexVec& data, bool inverse) {
  fftw_plan plan = detail::PlanCache::instance().get(
      inverse ? detail::Kind::C2CBackward : detail::Kind::C2CForward, data.size());
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace eegwl::fft
