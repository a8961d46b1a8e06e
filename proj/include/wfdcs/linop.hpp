#ifndef WFDCS_LINOP_HPP
#define WFDCS_LINOP_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "wfdcs/random.hpp"

namespace wfdcs {

// Matrix-free linear operator: only products with the operator and its
// transpose are defined.
struct LinOp {
  int in_dim = 0;
  int out_dim = 0;
  std::function<void(const std::vector<double> &, std::vector<double> &)> apply;
  std::function<void(const std::vector<double> &, std::vector<double> &)>
      apply_adjoint;

  std::vector<double> operator()(const std::vector<double> &x) const {
    std::vector<double> y(out_dim);
    apply(x, y);
    return y;
  }
  std::vector<double> adjoint(const std::vector<double> &y) const {
    std::vector<double> x(in_dim);
    apply_adjoint(y, x);
    return x;
  }
};

inline double dot(const std::vector<double> &a, const std::vector<double> &b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double> &a) {
  return std::sqrt(dot(a, a));
}

// Largest relative defect of <Ax, y> == <x, A'y> over random probes.
inline double adjoint_mismatch(const LinOp &op, int probes = 5,
                               uint64_t seed = 0xad01) {
  GaussianRng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < probes; ++t) {
    std::vector<double> x(op.in_dim), y(op.out_dim);
    for (double &v : x)
      v = rng.gaussian();
    for (double &v : y)
      v = rng.gaussian();
    std::vector<double> ax(op.out_dim), aty(op.in_dim);
    op.apply(x, ax);
    op.apply_adjoint(y, aty);
    const double lhs = dot(ax, y);
    const double rhs = dot(x, aty);
    const double scale = norm2(ax) * norm2(y) + norm2(x) * norm2(aty) + 1e-300;
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

// Power iteration for the largest eigenvalue of a symmetric PSD operator
// given as x -> M x.
inline double
power_iteration(int dim,
                const std::function<void(const std::vector<double> &,
                                         std::vector<double> &)> &sym_apply,
                int max_iters = 50, double tol = 1e-4,
                uint64_t seed = 0x9e37) {
  GaussianRng rng(seed);
  std::vector<double> v(dim), w(dim);
  for (double &x : v)
    x = rng.gaussian();
  double nv = norm2(v);
  for (double &x : v)
    x /= nv;
  double lam = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    sym_apply(v, w);
    const double nw = norm2(w);
    if (nw == 0.0)
      return 0.0;
    const double lam_new = nw;
    for (size_t i = 0; i < w.size(); ++i)
      v[i] = w[i] / nw;
    if (it > 0 && std::abs(lam_new - lam) <= tol * lam_new) {
      lam = lam_new;
      break;
    }
    lam = lam_new;
  }
  return lam;
}

// Largest eigenvalue of op' op by power iteration.
inline double gram_norm(const LinOp &op, int max_iters = 50,
                        double tol = 1e-4, uint64_t seed = 0x9e37) {
  return power_iteration(
      op.in_dim,
      [&op](const std::vector<double> &x, std::vector<double> &out) {
        std::vector<double> y(op.out_dim);
        op.apply(x, y);
        op.apply_adjoint(y, out);
      },
      max_iters, tol, seed);
}

} // namespace wfdcs

#endif
