#ifndef WFDCS_OPTICS_HPP
#define WFDCS_OPTICS_HPP

#include <cmath>
#include <stdexcept>

#include "wfdcs/fft.hpp"
#include "wfdcs/field.hpp"

namespace wfdcs {

// Generalized pupil function P = A exp(j phi) with the imaging constants.
struct Pupil {
  ApertureSpec aperture;
  Field2D phase;              // radians, same grid as the aperture
  double wavelength = 550e-9; // meters
  double focal = 1.0;         // image distance z_i, meters

  void check() const {
    if (!aperture.amplitude.same_shape(phase))
      throw std::invalid_argument("Pupil: amplitude/phase grids differ");
  }
};

// Amplitude spread function: centered discrete Fourier transform of the
// zero-padded pupil, unitary scaling, times 1/(lambda z). The prefactor
// cancels once the PSF is normalized.
inline ComplexField asf(const Pupil &p, int out_size) {
  p.check();
  const int n = p.aperture.n;
  if (out_size < n)
    throw std::invalid_argument("asf: out_size < pupil grid");
  if (n % 2 != 0 || out_size % 2 != 0)
    throw std::invalid_argument("asf: even grid sizes required");
  ComplexField f(out_size);
  const int off = (out_size - n) / 2;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = p.aperture.amplitude.at(i, j);
      if (a != 0.0) {
        const double ph = p.phase.at(i, j);
        f.at(i + off, j + off) = cdouble(a * std::cos(ph), a * std::sin(ph));
      }
    }
  fftshift(f); // move pupil center to index 0
  fft2(f);
  fftshift(f); // zero frequency back to the grid center
  const double scale = 1.0 / (p.wavelength * p.focal * out_size);
  for (auto &z : f.v)
    z *= scale;
  return f;
}

struct Psf {
  Field2D intensity; // non-negative, unit sum
};

inline Psf psf(const Pupil &p, int out_size) {
  const ComplexField h = asf(p, out_size);
  double sum = 0.0;
  for (const auto &z : h.v)
    sum += std::norm(z);
  if (!(sum > 0.0))
    throw std::invalid_argument("psf: degenerate pupil (zero amplitude)");
  Psf out;
  // image-plane sample pitch of the padded transform
  const double pitch = p.wavelength * p.focal /
                       (out_size * p.aperture.amplitude.spacing);
  out.intensity = make_centered_grid(out_size, 0.5 * pitch * out_size);
  const double inv = 1.0 / sum;
  for (size_t k = 0; k < h.v.size(); ++k)
    out.intensity.v[k] = std::norm(h.v[k]) * inv;
  return out;
}

} // namespace wfdcs

#endif
