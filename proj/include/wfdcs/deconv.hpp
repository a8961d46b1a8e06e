#ifndef WFDCS_DECONV_HPP
#define WFDCS_DECONV_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wfdcs/fft.hpp"
#include "wfdcs/field.hpp"
#include "wfdcs/linop.hpp"
#include "wfdcs/optics.hpp"
#include "wfdcs/solver.hpp"

namespace wfdcs {

// Periodic convolution with a fixed kernel, held as its transfer function.
// The kernel center sits at cell (n/2, n/2) before the shift, so a
// delta-like PSF at the grid center acts as the identity.
struct BlurOp {
  int n = 0;
  double spacing = 1.0;
  std::vector<cdouble> transfer;
};

inline BlurOp make_blur_op(const Psf &p, int image_side) {
  const int pn = p.intensity.rows;
  if (image_side < 2 || image_side % 2 != 0 || pn % 2 != 0)
    throw std::invalid_argument("make_blur_op: even sides required");
  BlurOp op;
  op.n = image_side;
  op.spacing = p.intensity.spacing;
  // center-embed or center-crop the PSF onto the image grid
  Field2D k(image_side, image_side, 1.0);
  double sum = 0.0;
  const int off = (image_side - pn) / 2;
  for (int i = 0; i < pn; ++i) {
    const int ti = i + off;
    if (ti < 0 || ti >= image_side)
      continue;
    for (int j = 0; j < pn; ++j) {
      const int tj = j + off;
      if (tj < 0 || tj >= image_side)
        continue;
      k.at(ti, tj) = p.intensity.at(i, j);
      sum += k.at(ti, tj);
    }
  }
  if (!(sum > 0.0))
    throw std::invalid_argument("make_blur_op: empty kernel");
  ComplexField kc(image_side);
  const int h = image_side / 2;
  for (int i = 0; i < image_side; ++i)
    for (int j = 0; j < image_side; ++j)
      kc.at(i, j) =
          cdouble(k.at((i + h) % image_side, (j + h) % image_side) / sum, 0.0);
  fft2(kc);
  op.transfer = std::move(kc.v);
  return op;
}

namespace detail {
inline Field2D blur_apply(const Field2D &u, const BlurOp &op, bool adjoint) {
  if (u.rows != op.n || u.cols != op.n)
    throw std::invalid_argument("convolve: shape mismatch");
  ComplexField f(op.n);
  for (size_t k = 0; k < u.v.size(); ++k)
    f.v[k] = cdouble(u.v[k], 0.0);
  fft2(f);
  for (size_t k = 0; k < f.v.size(); ++k)
    f.v[k] *= adjoint ? std::conj(op.transfer[k]) : op.transfer[k];
  ifft2(f);
  Field2D out = u;
  for (size_t k = 0; k < out.v.size(); ++k)
    out.v[k] = f.v[k].real();
  return out;
}
} // namespace detail

inline Field2D convolve(const Field2D &u, const BlurOp &op) {
  return detail::blur_apply(u, op, false);
}

inline Field2D convolve_adjoint(const Field2D &u, const BlurOp &op) {
  return detail::blur_apply(u, op, true);
}

// ||H* H|| estimated by power iteration (it equals max |transfer|^2 for the
// periodic operator; the iteration is kept as the generic route).
inline double blur_gram_norm(const BlurOp &op, int iters = 50) {
  const int dim = op.n * op.n;
  auto sym = [&op](const std::vector<double> &x, std::vector<double> &out) {
    ComplexField f(op.n);
    for (int k = 0; k < op.n * op.n; ++k)
      f.v[k] = cdouble(x[k], 0.0);
    fft2(f);
    for (size_t k = 0; k < f.v.size(); ++k)
      f.v[k] *= std::norm(op.transfer[k]);
    ifft2(f);
    for (int k = 0; k < op.n * op.n; ++k)
      out[k] = f.v[k].real();
  };
  return power_iteration(dim, sym, iters);
}

// Chambolle dual fixed-point TV denoising:
//   min_u 1/2 ||u - w||^2 + gamma TV(u),
// isotropic discrete TV with forward differences, dual step 1/8.
inline Field2D tv_denoise(const Field2D &w, double gamma, int iters) {
  if (gamma < 0.0)
    throw std::invalid_argument("tv_denoise: negative gamma");
  if (gamma == 0.0 || iters < 1)
    return w;
  const int nr = w.rows, nc = w.cols;
  std::vector<double> px(w.v.size(), 0.0), py(w.v.size(), 0.0);
  std::vector<double> divp(w.v.size(), 0.0);
  const double tau = 0.125;
  const double inv_gamma = 1.0 / gamma;
  for (int it = 0; it < iters; ++it) {
    double change = 0.0, scale = 0.0;
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nc; ++j) {
        const size_t k = static_cast<size_t>(i) * nc + j;
        double d = px[k] + py[k];
        if (j > 0)
          d -= px[k - 1];
        if (i > 0)
          d -= py[k - nc];
        divp[k] = d - w.v[k] * inv_gamma;
      }
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nc; ++j) {
        const size_t k = static_cast<size_t>(i) * nc + j;
        const double gx = (j + 1 < nc) ? divp[k + 1] - divp[k] : 0.0;
        const double gy = (i + 1 < nr) ? divp[k + nc] - divp[k] : 0.0;
        const double mag = std::sqrt(gx * gx + gy * gy);
        const double denom = 1.0 + tau * mag;
        const double nx = (px[k] + tau * gx) / denom;
        const double ny = (py[k] + tau * gy) / denom;
        change = std::max({change, std::abs(nx - px[k]), std::abs(ny - py[k])});
        scale = std::max({scale, std::abs(nx), std::abs(ny)});
        px[k] = nx;
        py[k] = ny;
      }
    if (change <= 1e-6 * std::max(scale, 1.0))
      break;
  }
  Field2D u = w;
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j) {
      const size_t k = static_cast<size_t>(i) * nc + j;
      double d = px[k] + py[k];
      if (j > 0)
        d -= px[k - 1];
      if (i > 0)
        d -= py[k - nc];
      u.v[k] -= gamma * d;
    }
  return u;
}

// Discrete isotropic TV with the same stencil as tv_denoise.
inline double tv_seminorm(const Field2D &u) {
  double s = 0.0;
  for (int i = 0; i < u.rows; ++i)
    for (int j = 0; j < u.cols; ++j) {
      const double gx = (j + 1 < u.cols) ? u.at(i, j + 1) - u.at(i, j) : 0.0;
      const double gy = (i + 1 < u.rows) ? u.at(i + 1, j) - u.at(i, j) : 0.0;
      s += std::sqrt(gx * gx + gy * gy);
    }
  return s;
}

struct DeconvOpts {
  double gamma = 0.0;     // TV weight of the data-fit objective
  double mu = 0.0;        // gradient step; <= 0 selects 0.9/||H*H||
  int inner_tv_iters = 50;
  int outer_iters = 200;
  double tol = 1e-5;
};

struct DeconvResult {
  Field2D u;
  std::vector<double> objective; // 1/2||Hu-v||^2 + gamma TV(u) per iteration
  double mu = 0.0;
};

// FISTA-accelerated majorize-minimize loop: gradient step on the data term,
// TV-proximal step (weight mu*gamma), and the tau-momentum extrapolation
// y+ = u+ + (tau/tau+) (u+ - u).
inline DeconvResult tv_deconvolve(const Field2D &v, const BlurOp &op,
                                  const DeconvOpts &opts) {
  if (v.rows != op.n || v.cols != op.n)
    throw std::invalid_argument("tv_deconvolve: shape mismatch");
  DeconvResult res;
  double mu = opts.mu;
  if (!(mu > 0.0))
    mu = 0.9 / blur_gram_norm(op);
  res.mu = mu;

  const size_t cells = v.v.size();
  ComplexField vf(op.n);
  for (size_t k = 0; k < cells; ++k)
    vf.v[k] = cdouble(v.v[k], 0.0);
  fft2(vf);

  Field2D u = v;
  ComplexField uf = vf; // FFT of u
  ComplexField yf = vf; // FFT of y
  Field2D w = v, u_new = v;
  double tau = 1.0;
  ComplexField work(op.n);

  for (int t = 1; t <= opts.outer_iters; ++t) {
    // w = y + mu H*(v - H y), evaluated in the frequency domain
    for (size_t k = 0; k < cells; ++k) {
      const cdouble r = vf.v[k] - op.transfer[k] * yf.v[k];
      work.v[k] = yf.v[k] + mu * std::conj(op.transfer[k]) * r;
    }
    ifft2(work);
    for (size_t k = 0; k < cells; ++k)
      w.v[k] = work.v[k].real();

    u_new = tv_denoise(w, mu * opts.gamma, opts.inner_tv_iters);

    ComplexField unf(op.n);
    for (size_t k = 0; k < cells; ++k)
      unf.v[k] = cdouble(u_new.v[k], 0.0);
    fft2(unf);
    double fit = 0.0;
    for (size_t k = 0; k < cells; ++k)
      fit += std::norm(op.transfer[k] * unf.v[k] - vf.v[k]);
    fit *= 0.5 / static_cast<double>(cells); // Parseval back to image domain
    const double obj = fit + opts.gamma * tv_seminorm(u_new);
    if (!std::isfinite(obj))
      throw divergence_error("tv_deconvolve: non-finite objective", t);
    res.objective.push_back(obj);

    const double tau_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tau * tau));
    const double momentum = tau / tau_new;
    double diff2 = 0.0, unorm2 = 0.0;
    for (size_t k = 0; k < cells; ++k) {
      const double d = u_new.v[k] - u.v[k];
      diff2 += d * d;
      unorm2 += u_new.v[k] * u_new.v[k];
      yf.v[k] = unf.v[k] + momentum * (unf.v[k] - uf.v[k]);
    }
    u = u_new;
    uf = unf;
    tau = tau_new;
    if (diff2 <= opts.tol * opts.tol * std::max(unorm2, 1e-300))
      break;
  }
  res.u = std::move(u);
  return res;
}

} // namespace wfdcs

#endif
