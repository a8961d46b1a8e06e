#ifndef WFDCS_METRICS_HPP
#define WFDCS_METRICS_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wfdcs/field.hpp"

namespace wfdcs {

inline constexpr double kPsnrCap = 200.0; // reported for mse == 0

// Mean squared difference, optionally restricted to mask > 0.5 cells.
inline double mse(const Field2D &a, const Field2D &b,
                  const Field2D *mask = nullptr) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("mse: shape mismatch");
  if (mask && (mask->rows != a.rows || mask->cols != a.cols))
    throw std::invalid_argument("mse: mask shape mismatch");
  double sum = 0.0;
  size_t count = 0;
  for (size_t k = 0; k < a.v.size(); ++k) {
    if (mask && mask->v[k] <= 0.5)
      continue;
    const double d = a.v[k] - b.v[k];
    sum += d * d;
    ++count;
  }
  if (count == 0)
    throw std::invalid_argument("mse: empty mask");
  return sum / static_cast<double>(count);
}

inline double psnr(const Field2D &a, const Field2D &b, double peak) {
  if (!(peak > 0.0))
    throw std::invalid_argument("psnr: peak must be positive");
  const double e = mse(a, b);
  if (e == 0.0)
    return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / e));
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Mean structural similarity over all fully interior windows, with
// Gaussian-weighted local statistics.
inline double ssim(const Field2D &a, const Field2D &b,
                   const SsimParams &p = {}) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("ssim: shape mismatch");
  const int w = p.window;
  if (a.rows < w || a.cols < w)
    throw std::invalid_argument("ssim: image smaller than window");
  std::vector<double> kernel(static_cast<size_t>(w) * w);
  {
    double sum = 0.0;
    const double c = (w - 1) / 2.0;
    for (int i = 0; i < w; ++i)
      for (int j = 0; j < w; ++j) {
        const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
        kernel[static_cast<size_t>(i) * w + j] =
            std::exp(-d2 / (2.0 * p.sigma * p.sigma));
        sum += kernel[static_cast<size_t>(i) * w + j];
      }
    for (double &k : kernel)
      k /= sum;
  }
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double acc = 0.0;
  size_t count = 0;
  for (int i0 = 0; i0 + w <= a.rows; ++i0) {
    for (int j0 = 0; j0 + w <= a.cols; ++j0) {
      double m1 = 0, m2 = 0, s11 = 0, s22 = 0, s12 = 0;
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const double k = kernel[static_cast<size_t>(i) * w + j];
          const double va = a.at(i0 + i, j0 + j);
          const double vb = b.at(i0 + i, j0 + j);
          m1 += k * va;
          m2 += k * vb;
          s11 += k * va * va;
          s22 += k * vb * vb;
          s12 += k * va * vb;
        }
      const double var1 = s11 - m1 * m1;
      const double var2 = s22 - m2 * m2;
      const double cov = s12 - m1 * m2;
      acc += ((2.0 * m1 * m2 + c1) * (2.0 * cov + c2)) /
             ((m1 * m1 + m2 * m2 + c1) * (var1 + var2 + c2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

} // namespace wfdcs

#endif
