#ifndef WFDCS_WAVELET_HPP
#define WFDCS_WAVELET_HPP

#include <array>
#include <stdexcept>
#include <vector>

namespace wfdcs {

// Orthonormal 10-tap scaling filter of the least-asymmetric Daubechies
// wavelet with 5 vanishing moments (sym5). Sum is sqrt(2); even shifts are
// orthonormal (guarded by tests).
inline constexpr std::array<double, 10> kSym5Scaling = {
    0.027333068345077982,  0.029519490925774643, -0.039134249302383094,
    0.1993975339773936,    0.7234076904024206,   0.6339789634582119,
    0.01660210576452232,   -0.17532808990845047, -0.021101834024758855,
    0.019538882735286728};

struct WaveletSpec {
  int levels = 4;
};

namespace detail {

inline constexpr int kTaps = 10;

inline std::array<double, kTaps> sym5_highpass() {
  std::array<double, kTaps> g{};
  for (int k = 0; k < kTaps; ++k) {
    const double h = kSym5Scaling[kTaps - 1 - k];
    g[k] = (k % 2 == 0) ? h : -h;
  }
  return g;
}

// One periodic analysis step: x[0..n) -> approx x[0..n/2), detail x[n/2..n).
inline void dwt_step(const double *x, int n, double *out) {
  static const std::array<double, kTaps> g = sym5_highpass();
  const int half = n / 2;
  for (int i = 0; i < half; ++i) {
    double a = 0.0, d = 0.0;
    for (int k = 0; k < kTaps; ++k) {
      int idx = 2 * i + k;
      while (idx >= n)
        idx -= n;
      a += kSym5Scaling[k] * x[idx];
      d += g[k] * x[idx];
    }
    out[i] = a;
    out[half + i] = d;
  }
}

// One periodic synthesis step, exact inverse of dwt_step.
inline void idwt_step(const double *c, int n, double *out) {
  static const std::array<double, kTaps> g = sym5_highpass();
  const int half = n / 2;
  for (int i = 0; i < n; ++i)
    out[i] = 0.0;
  for (int i = 0; i < half; ++i) {
    const double a = c[i];
    const double d = c[half + i];
    for (int k = 0; k < kTaps; ++k) {
      int idx = 2 * i + k;
      while (idx >= n)
        idx -= n;
      out[idx] += kSym5Scaling[k] * a + g[k] * d;
    }
  }
}

inline void check_square(size_t size, int n) {
  if (n < 2 || static_cast<size_t>(n) * n != size)
    throw std::invalid_argument("wavelet: array is not an n x n square");
}

inline void check_levels(int n, int levels) {
  if (levels < 1)
    throw std::invalid_argument("wavelet: levels must be >= 1");
  if (n % (1 << levels) != 0)
    throw std::invalid_argument("wavelet: side not divisible by 2^levels");
}

} // namespace detail

// Separable multilevel 2-D decomposition with periodic boundary. The
// coefficients replace the input in the conventional quadrant layout
// (approximation in the top-left block).
inline void wavelet_forward(std::vector<double> &a, int n,
                            const WaveletSpec &spec = {}) {
  detail::check_square(a.size(), n);
  detail::check_levels(n, spec.levels);
  std::vector<double> row(n), tmp(n);
  int s = n;
  for (int lev = 0; lev < spec.levels; ++lev) {
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j)
        row[j] = a[static_cast<size_t>(i) * n + j];
      detail::dwt_step(row.data(), s, tmp.data());
      for (int j = 0; j < s; ++j)
        a[static_cast<size_t>(i) * n + j] = tmp[j];
    }
    for (int j = 0; j < s; ++j) {
      for (int i = 0; i < s; ++i)
        row[i] = a[static_cast<size_t>(i) * n + j];
      detail::dwt_step(row.data(), s, tmp.data());
      for (int i = 0; i < s; ++i)
        a[static_cast<size_t>(i) * n + j] = tmp[i];
    }
    s /= 2;
  }
}

inline void wavelet_inverse(std::vector<double> &a, int n,
                            const WaveletSpec &spec = {}) {
  detail::check_square(a.size(), n);
  detail::check_levels(n, spec.levels);
  std::vector<double> row(n), tmp(n);
  int s = n >> (spec.levels - 1);
  for (int lev = 0; lev < spec.levels; ++lev) {
    for (int j = 0; j < s; ++j) {
      for (int i = 0; i < s; ++i)
        row[i] = a[static_cast<size_t>(i) * n + j];
      detail::idwt_step(row.data(), s, tmp.data());
      for (int i = 0; i < s; ++i)
        a[static_cast<size_t>(i) * n + j] = tmp[i];
    }
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j)
        row[j] = a[static_cast<size_t>(i) * n + j];
      detail::idwt_step(row.data(), s, tmp.data());
      for (int j = 0; j < s; ++j)
        a[static_cast<size_t>(i) * n + j] = tmp[j];
    }
    s *= 2;
  }
}

} // namespace wfdcs

#endif
