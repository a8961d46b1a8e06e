#ifndef WFDCS_TURBULENCE_HPP
#define WFDCS_TURBULENCE_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "wfdcs/fft.hpp"
#include "wfdcs/field.hpp"
#include "wfdcs/random.hpp"

namespace wfdcs {

struct TurbulenceParams {
  double r0 = 0.02;          // Fried parameter, meters
  double L0 = 10.0;          // outer scale, meters
  double l0 = 0.001;         // inner scale, meters
  double screen_size = 0.10; // physical side, meters
  int n = 128;               // grid cells per side, power of two
  uint64_t seed = 1;
};

inline void validate(const TurbulenceParams &p) {
  if (!(p.r0 > 0.0) || !(p.L0 > p.l0) || !(p.l0 > 0.0) ||
      !(p.screen_size > 0.0))
    throw std::invalid_argument("TurbulenceParams: bad physical parameters");
  if (p.n < 2 || (p.n & (p.n - 1)) != 0)
    throw std::invalid_argument("TurbulenceParams: N must be a power of two");
}

// Modified Von Karman phase power spectrum. Cutoffs follow kappa0 = 2*pi/L0
// and kappa_m = 5.92/l0; written here in cyclic frequency f = kappa/(2*pi)
// with the 0.023 constant, the convention under which the Kolmogorov
// structure function comes out as 6.88 (r/r0)^(5/3).
inline double von_karman_psd(double f, double r0, double L0, double l0) {
  const double f0 = 1.0 / L0;
  const double fm = 5.92 / (2.0 * std::numbers::pi * l0);
  return 0.023 * std::pow(r0, -5.0 / 3.0) *
         std::pow(f * f + f0 * f0, -11.0 / 6.0) *
         std::exp(-(f * f) / (fm * fm));
}

namespace detail {

// Power integrated over a frequency bin of width w centered at (fx, fy),
// 4x4 midpoint rule. Point sampling badly underweights the steep spectrum
// in the innermost bins.
inline double bin_power(const TurbulenceParams &p, double fx, double fy,
                        double w) {
  double s = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double gx = fx + (a - 1.5) * w / 4.0;
      const double gy = fy + (b - 1.5) * w / 4.0;
      s += von_karman_psd(std::hypot(gx, gy), p.r0, p.L0, p.l0);
    }
  return s * w * w / 16.0;
}

} // namespace detail

// Spectral (FFT) synthesis: circular-Gaussian spectrum weighted by the
// square root of the per-bin Von Karman power, real part of the inverse
// transform. Three 3x3 subharmonic levels restore the power below the
// fundamental frequency that the plain FFT grid cannot carry; without them
// the structure function falls tens of percent short of the Kolmogorov law
// whenever L0 exceeds the screen. The zero-frequency bin carries no power
// (piston is unobservable from gradients) and the residual mean is removed.
inline Field2D generate_phase_screen(const TurbulenceParams &p) {
  validate(p);
  const int n = p.n;
  const double df = 1.0 / p.screen_size;
  GaussianRng rng(mix_seed(p.seed, 0x566b)); // screen stream
  ComplexField spec(n);
  for (int i = 0; i < n; ++i) {
    const int si = (i < n / 2) ? i : i - n;
    for (int j = 0; j < n; ++j) {
      const int sj = (j < n / 2) ? j : j - n;
      const double g1 = rng.gaussian();
      const double g2 = rng.gaussian();
      if (si == 0 && sj == 0) {
        spec.at(i, j) = cdouble(0.0, 0.0);
        continue;
      }
      const double fx = df * sj, fy = df * si;
      double power;
      if (std::abs(si) <= 4 && std::abs(sj) <= 4)
        power = detail::bin_power(p, fx, fy, df);
      else
        power = von_karman_psd(std::hypot(fx, fy), p.r0, p.L0, p.l0) * df * df;
      const double amp = std::sqrt(power);
      spec.at(i, j) = cdouble(g1 * amp, g2 * amp);
    }
  }
  ifft2(spec);
  Field2D screen = make_centered_grid(n, 0.5 * p.screen_size);
  const double scale = double(n) * double(n); // undo the 1/N^2 of ifft2
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      screen.at(i, j) = spec.at(i, j).real() * scale;

  // subharmonic levels p = 1..3: 3x3 grids of width df/3^p, bin-integrated
  for (int level = 1; level <= 3; ++level) {
    const double dfp = df / std::pow(3.0, level);
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j) {
        const double g1 = rng.gaussian();
        const double g2 = rng.gaussian();
        if (i == 0 && j == 0)
          continue;
        const double fx = dfp * j, fy = dfp * i;
        const double amp = std::sqrt(detail::bin_power(p, fx, fy, dfp));
        // Re[(g1 + i g2) e^{2 pi i f.x}] accumulated directly on the lattice
        for (int r = 0; r < n; ++r) {
          const double yy = screen.y(r);
          for (int c = 0; c < n; ++c) {
            const double ang =
                2.0 * std::numbers::pi * (fx * screen.x(c) + fy * yy);
            screen.at(r, c) +=
                amp * (g1 * std::cos(ang) - g2 * std::sin(ang));
          }
        }
      }
  }

  double mean = 0.0;
  for (double v : screen.v)
    mean += v;
  mean /= scale;
  for (double &v : screen.v)
    v -= mean;
  return screen;
}

} // namespace wfdcs

#endif
