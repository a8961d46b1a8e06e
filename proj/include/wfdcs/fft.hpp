#ifndef WFDCS_FFT_HPP
#define WFDCS_FFT_HPP

#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace wfdcs {

using cdouble = std::complex<double>;

namespace detail {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n)
    p <<= 1;
  return p;
}

// In-place iterative radix-2 transform; sign = -1 forward, +1 inverse
// (inverse is unscaled).
inline void fft_pow2(std::vector<cdouble> &a, int sign) {
  const size_t n = a.size();
  if (n <= 1)
    return;
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1)
      j ^= bit;
    j ^= bit;
    if (i < j)
      std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const cdouble wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const cdouble u = a[i + k];
        const cdouble t = a[i + k + len / 2] * w;
        a[i + k] = u + t;
        a[i + k + len / 2] = u - t;
        w *= wlen;
      }
    }
  }
}

// Bluestein chirp-z for arbitrary length, on top of fft_pow2.
inline void fft_bluestein(std::vector<cdouble> &a, int sign) {
  const size_t n = a.size();
  const size_t m = next_pow2(2 * n - 1);
  std::vector<cdouble> chirp(n);
  for (size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small
    const size_t k2 = (k * k) % (2 * n);
    const double ang =
        sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = cdouble(std::cos(ang), std::sin(ang));
  }
  std::vector<cdouble> fa(m, cdouble(0, 0)), fb(m, cdouble(0, 0));
  for (size_t k = 0; k < n; ++k)
    fa[k] = a[k] * chirp[k];
  fb[0] = std::conj(chirp[0]);
  for (size_t k = 1; k < n; ++k)
    fb[k] = fb[m - k] = std::conj(chirp[k]);
  fft_pow2(fa, -1);
  fft_pow2(fb, -1);
  for (size_t k = 0; k < m; ++k)
    fa[k] *= fb[k];
  fft_pow2(fa, +1);
  const double scale = 1.0 / static_cast<double>(m);
  for (size_t k = 0; k < n; ++k)
    a[k] = fa[k] * scale * chirp[k];
}

} // namespace detail

// Unscaled forward DFT: X[k] = sum_n x[n] exp(-2*pi*i*n*k/N).
inline void fft(std::vector<cdouble> &a) {
  if (detail::is_pow2(a.size()))
    detail::fft_pow2(a, -1);
  else
    detail::fft_bluestein(a, -1);
}

// Inverse DFT with 1/N scaling.
inline void ifft(std::vector<cdouble> &a) {
  if (detail::is_pow2(a.size()))
    detail::fft_pow2(a, +1);
  else
    detail::fft_bluestein(a, +1);
  const double s = 1.0 / static_cast<double>(a.size());
  for (auto &x : a)
    x *= s;
}

// Row-major square complex field with in-place 2-D transforms.
struct ComplexField {
  int n = 0;
  std::vector<cdouble> v;

  ComplexField() = default;
  explicit ComplexField(int side)
      : n(side), v(static_cast<size_t>(side) * side, cdouble(0, 0)) {
    if (side < 1)
      throw std::invalid_argument("ComplexField: bad side");
  }
  cdouble &at(int i, int j) { return v[static_cast<size_t>(i) * n + j]; }
  cdouble at(int i, int j) const { return v[static_cast<size_t>(i) * n + j]; }
};

namespace detail {
template <typename RowFn> inline void transform_2d(ComplexField &f, RowFn fn) {
  const int n = f.n;
  std::vector<cdouble> buf(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      buf[j] = f.at(i, j);
    fn(buf);
    for (int j = 0; j < n; ++j)
      f.at(i, j) = buf[j];
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i)
      buf[i] = f.at(i, j);
    fn(buf);
    for (int i = 0; i < n; ++i)
      f.at(i, j) = buf[i];
  }
}
} // namespace detail

inline void fft2(ComplexField &f) {
  detail::transform_2d(f, [](std::vector<cdouble> &r) { fft(r); });
}

inline void ifft2(ComplexField &f) {
  detail::transform_2d(f, [](std::vector<cdouble> &r) { ifft(r); });
}

// Swaps quadrants so the zero-frequency sample moves between index 0 and
// the grid center n/2 (even n: fftshift and ifftshift coincide).
inline void fftshift(ComplexField &f) {
  const int n = f.n;
  const int h = n / 2;
  if (n % 2 != 0)
    throw std::invalid_argument("fftshift: even side required");
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < n; ++j)
      std::swap(f.at(i, j), f.at((i + h) % n, (j + h) % n));
}

} // namespace wfdcs

#endif
