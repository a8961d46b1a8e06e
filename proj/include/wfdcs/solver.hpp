#ifndef WFDCS_SOLVER_HPP
#define WFDCS_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wfdcs/field.hpp"
#include "wfdcs/linop.hpp"
#include "wfdcs/shi.hpp"
#include "wfdcs/wavelet.hpp"

namespace wfdcs {

struct SolverOpts {
  double lambda = -1.0;        // l1 weight; <= 0 selects 0.02*max|A'b|
  double delta = 0.5;          // Bregman penalty weight
  int max_inner = 300;         // FISTA iterations per solve
  int max_outer = 30;          // Bregman iterations
  double tol = 1e-6;           // relative-change stop for FISTA
  double tol_constraint = 1e-4; // ||Bc||/||c|| stop for the outer loop
  double step = 0.0;           // gradient step; <= 0 selects 0.99/L
  // penalty continuation: delta *= delta_growth per outer iteration up to
  // delta_max, with the running multiplier rescaled to stay consistent.
  // 1.0 keeps the constant-penalty iteration.
  double delta_growth = 1.0;
  double delta_max = 64.0;
};

struct divergence_error : std::runtime_error {
  int iteration;
  divergence_error(const std::string &msg, int iter)
      : std::runtime_error(msg + " at iteration " + std::to_string(iter)),
        iteration(iter) {}
};

// Square embedding of the lenslet lattice: which row-major cell of the
// side x side grid each lenslet occupies, plus the sparsifying transform
// acting on that grid.
struct MeasurementLayout {
  int side = 0;
  double diameter = 0.0; // lattice half-span; pitch = 2*diameter/side
  std::vector<int> cell_of_lenslet;
  WaveletSpec wavelet;
};

inline MeasurementLayout make_layout(const LensletSet &ls,
                                     WaveletSpec wavelet = {}) {
  MeasurementLayout lay;
  lay.side = ls.n_grid;
  lay.diameter = ls.diameter;
  lay.wavelet = wavelet;
  lay.cell_of_lenslet.reserve(ls.cells.size());
  for (const auto &c : ls.cells)
    lay.cell_of_lenslet.push_back(c[0] * ls.n_grid + c[1]);
  return lay;
}

inline std::vector<double> soft_threshold(const std::vector<double> &v,
                                          double t) {
  if (t < 0.0)
    throw std::invalid_argument("soft_threshold: negative threshold");
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - t;
    out[i] = (a > 0.0) ? std::copysign(a, v[i]) : 0.0;
  }
  return out;
}

// Measurement operator A = diag{Psi_x W, Psi_y W}: synthesize both gradient
// fields from stacked coefficients and read the retained lenslet cells.
inline LinOp make_measurement_op(const GradientMeasurement &m,
                                 const MeasurementLayout &lay) {
  const int n = lay.side;
  const int cells = n * n;
  const int kept = static_cast<int>(m.keep_x.size());
  if (m.keep_y.size() != m.keep_x.size())
    throw std::invalid_argument("make_measurement_op: unbalanced channels");
  LinOp op;
  op.in_dim = 2 * cells;
  op.out_dim = 2 * kept;
  const std::vector<int> cell = lay.cell_of_lenslet;
  const std::vector<int> keep_x = m.keep_x, keep_y = m.keep_y;
  const WaveletSpec spec = lay.wavelet;
  op.apply = [n, cells, kept, cell, keep_x, keep_y,
              spec](const std::vector<double> &c, std::vector<double> &out) {
    std::vector<double> f(c.begin(), c.begin() + cells);
    wavelet_inverse(f, n, spec);
    for (int t = 0; t < kept; ++t)
      out[t] = f[cell[keep_x[t]]];
    f.assign(c.begin() + cells, c.end());
    wavelet_inverse(f, n, spec);
    for (int t = 0; t < kept; ++t)
      out[kept + t] = f[cell[keep_y[t]]];
  };
  op.apply_adjoint = [n, cells, kept, cell, keep_x, keep_y,
                      spec](const std::vector<double> &b,
                            std::vector<double> &out) {
    std::vector<double> f(cells, 0.0);
    for (int t = 0; t < kept; ++t)
      f[cell[keep_x[t]]] += b[t];
    wavelet_forward(f, n, spec);
    std::copy(f.begin(), f.end(), out.begin());
    f.assign(cells, 0.0);
    for (int t = 0; t < kept; ++t)
      f[cell[keep_y[t]]] += b[kept + t];
    wavelet_forward(f, n, spec);
    std::copy(f.begin(), f.end(), out.begin() + cells);
  };
  return op;
}

// Cross-derivative operator B c = D_y(W c_x) - D_x(W c_y) with forward
// differences on the (side-1)^2 valid region. A gradient field of any
// discrete potential lies in its null space. Rows whose 2x2 stencil leaves
// the sampled disk are zeroed; outside it the field is not modeled, and
// letting the constraint straddle the rim would make it fight the jump to
// the unsampled corners.
inline LinOp make_cross_derivative_op(const MeasurementLayout &lay) {
  const int n = lay.side;
  if (n < 2)
    throw std::invalid_argument("make_cross_derivative_op: side < 2");
  const int cells = n * n;
  const int vn = n - 1;
  const WaveletSpec spec = lay.wavelet;

  std::vector<char> sampled(cells, 0);
  for (int cell : lay.cell_of_lenslet)
    sampled[cell] = 1;
  auto stencil_inside = [&](int i, int j) {
    return sampled[static_cast<size_t>(i) * n + j] &&
           sampled[static_cast<size_t>(i + 1) * n + j] &&
           sampled[static_cast<size_t>(i) * n + j + 1] &&
           sampled[static_cast<size_t>(i + 1) * n + j + 1];
  };
  std::vector<char> active(static_cast<size_t>(vn) * vn, 0);
  for (int i = 0; i < vn; ++i)
    for (int j = 0; j < vn; ++j)
      active[static_cast<size_t>(i) * vn + j] = stencil_inside(i, j);

  LinOp op;
  op.in_dim = 2 * cells;
  op.out_dim = vn * vn;
  op.apply = [n, cells, vn, spec, active](const std::vector<double> &c,
                                          std::vector<double> &out) {
    std::vector<double> fx(c.begin(), c.begin() + cells);
    std::vector<double> fy(c.begin() + cells, c.end());
    wavelet_inverse(fx, n, spec);
    wavelet_inverse(fy, n, spec);
    for (int i = 0; i < vn; ++i)
      for (int j = 0; j < vn; ++j) {
        const size_t k = static_cast<size_t>(i) * vn + j;
        out[k] = active[k]
                     ? (fx[static_cast<size_t>(i + 1) * n + j] -
                        fx[static_cast<size_t>(i) * n + j]) -
                           (fy[static_cast<size_t>(i) * n + j + 1] -
                            fy[static_cast<size_t>(i) * n + j])
                     : 0.0;
      }
  };
  op.apply_adjoint = [n, cells, vn, spec, active](const std::vector<double> &u,
                                                  std::vector<double> &out) {
    std::vector<double> fx(cells, 0.0), fy(cells, 0.0);
    for (int i = 0; i < vn; ++i)
      for (int j = 0; j < vn; ++j) {
        const size_t k = static_cast<size_t>(i) * vn + j;
        if (!active[k])
          continue;
        const double v = u[k];
        fx[static_cast<size_t>(i + 1) * n + j] += v;
        fx[static_cast<size_t>(i) * n + j] -= v;
        fy[static_cast<size_t>(i) * n + j + 1] -= v;
        fy[static_cast<size_t>(i) * n + j] += v;
      }
    wavelet_forward(fx, n, spec);
    wavelet_forward(fy, n, spec);
    std::copy(fx.begin(), fx.end(), out.begin());
    std::copy(fy.begin(), fy.end(), out.begin() + cells);
  };
  return op;
}

// Optional augmented quadratic delta/2 ||B c + p||^2 for the Bregman inner
// problem.
struct QuadPenalty {
  const LinOp *B = nullptr;
  const std::vector<double> *p = nullptr;
  double delta = 0.0;
};

namespace detail {
inline double l1_norm(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v)
    s += std::abs(x);
  return s;
}
} // namespace detail

// Accelerated proximal gradient (FISTA) for
//   min 1/2 ||A c - b||^2 + lambda ||c||_1 [+ delta/2 ||B c + p||^2].
// Momentum uses the tau-schedule tau+ = (1 + sqrt(1 + 4 tau^2)) / 2.
inline std::vector<double>
fista_bpdn(const LinOp &A, const std::vector<double> &b, const SolverOpts &opts,
           const QuadPenalty *extra = nullptr,
           const std::vector<double> *warm_start = nullptr,
           std::vector<double> *objective_trace = nullptr) {
  if (static_cast<int>(b.size()) != A.out_dim)
    throw std::invalid_argument("fista_bpdn: b length mismatch");
  const double lambda = opts.lambda;
  if (lambda < 0.0)
    throw std::invalid_argument("fista_bpdn: lambda must be resolved (>= 0)");
  const int dim = A.in_dim;
  const bool quad = extra && extra->B && extra->delta > 0.0;
  const double delta = quad ? extra->delta : 0.0;

  double step = opts.step;
  if (!(step > 0.0)) {
    // the sum of the two Gram norms bounds the composite Lipschitz constant
    // from above, which keeps the step safe even when the joint power
    // iteration would converge poorly
    double lip = gram_norm(A);
    if (quad)
      lip += delta * gram_norm(*extra->B);
    step = (lip > 0.0) ? 0.99 / lip : 1.0;
  }

  std::vector<double> c = warm_start ? *warm_start
                                     : std::vector<double>(dim, 0.0);
  std::vector<double> y = c;
  std::vector<double> ac(A.out_dim), ay(A.out_dim);
  A.apply(c, ac);
  ay = ac;
  std::vector<double> bc, by, grad(dim), tmp(dim);
  if (quad) {
    bc.resize(extra->B->out_dim);
    extra->B->apply(c, bc);
    by = bc;
  }
  double tau = 1.0;
  std::vector<double> c_new(dim), ac_new(A.out_dim), bc_new;
  if (quad)
    bc_new.resize(extra->B->out_dim);
  std::vector<double> resid(A.out_dim);

  for (int t = 1; t <= opts.max_inner; ++t) {
    // gradient of the smooth part at y
    for (int i = 0; i < A.out_dim; ++i)
      resid[i] = ay[i] - b[i];
    A.apply_adjoint(resid, grad);
    if (quad) {
      std::vector<double> rb(extra->B->out_dim);
      for (size_t i = 0; i < rb.size(); ++i)
        rb[i] = by[i] + (*extra->p)[i];
      extra->B->apply_adjoint(rb, tmp);
      for (int i = 0; i < dim; ++i)
        grad[i] += delta * tmp[i];
    }
    const double thr = step * lambda;
    for (int i = 0; i < dim; ++i) {
      const double z = y[i] - step * grad[i];
      const double a = std::abs(z) - thr;
      c_new[i] = (a > 0.0) ? std::copysign(a, z) : 0.0;
    }
    A.apply(c_new, ac_new);
    if (quad)
      extra->B->apply(c_new, bc_new);

    double obj = 0.0;
    for (int i = 0; i < A.out_dim; ++i) {
      const double r = ac_new[i] - b[i];
      obj += 0.5 * r * r;
    }
    obj += lambda * detail::l1_norm(c_new);
    if (quad)
      for (size_t i = 0; i < bc_new.size(); ++i) {
        const double r = bc_new[i] + (*extra->p)[i];
        obj += 0.5 * delta * r * r;
      }
    if (!std::isfinite(obj))
      throw divergence_error("fista_bpdn: non-finite objective", t);
    if (objective_trace)
      objective_trace->push_back(obj);

    const double tau_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tau * tau));
    const double beta = (tau - 1.0) / tau_new;
    double diff2 = 0.0, cnorm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double d = c_new[i] - c[i];
      diff2 += d * d;
      cnorm2 += c_new[i] * c_new[i];
      y[i] = c_new[i] + beta * d;
    }
    for (int i = 0; i < A.out_dim; ++i)
      ay[i] = ac_new[i] + beta * (ac_new[i] - ac[i]);
    if (quad)
      for (size_t i = 0; i < bc_new.size(); ++i)
        by[i] = bc_new[i] + beta * (bc_new[i] - bc[i]);
    c.swap(c_new);
    ac.swap(ac_new);
    if (quad)
      bc.swap(bc_new);
    tau = tau_new;
    if (diff2 <= opts.tol * opts.tol * std::max(cnorm2, 1e-300))
      break;
  }
  return c;
}

struct RecoveryResult {
  std::vector<double> c; // stacked coefficients [c_x; c_y]
  Field2D fx, fy;        // recovered gradient fields on the full square
  std::vector<double> objective;            // per inner iteration
  std::vector<double> constraint_residual;  // per outer iteration (DCS only)
  double lambda = 0.0;
  int outer_iterations = 0;
};

namespace detail {

inline std::vector<double> stack_measurements(const GradientMeasurement &m) {
  std::vector<double> b;
  b.reserve(m.bx.size() + m.by.size());
  b.insert(b.end(), m.bx.begin(), m.bx.end());
  b.insert(b.end(), m.by.begin(), m.by.end());
  return b;
}

inline double resolve_lambda(const LinOp &A, const std::vector<double> &b,
                             const SolverOpts &opts) {
  if (opts.lambda > 0.0)
    return opts.lambda;
  std::vector<double> atb(A.in_dim);
  A.apply_adjoint(b, atb);
  double peak = 0.0;
  for (double v : atb)
    peak = std::max(peak, std::abs(v));
  return 0.02 * peak;
}

inline void fill_fields(RecoveryResult &res, const MeasurementLayout &lay) {
  const int n = lay.side;
  const int cells = n * n;
  std::vector<double> f(res.c.begin(), res.c.begin() + cells);
  wavelet_inverse(f, n, lay.wavelet);
  res.fx = make_centered_grid(n, lay.diameter);
  res.fx.v = f;
  f.assign(res.c.begin() + cells, res.c.end());
  wavelet_inverse(f, n, lay.wavelet);
  res.fy = make_centered_grid(n, lay.diameter);
  res.fy.v = std::move(f);
}

} // namespace detail

// Classical compressed sensing: independent l1 recovery of the two
// channels through the block-diagonal measurement operator.
inline RecoveryResult ccs_recover(const GradientMeasurement &m,
                                  const MeasurementLayout &lay,
                                  const SolverOpts &opts) {
  const LinOp A = make_measurement_op(m, lay);
  const std::vector<double> b = detail::stack_measurements(m);
  SolverOpts o = opts;
  o.lambda = detail::resolve_lambda(A, b, opts);
  RecoveryResult res;
  res.lambda = o.lambda;
  res.c = fista_bpdn(A, b, o, nullptr, nullptr, &res.objective);
  detail::fill_fields(res, lay);
  return res;
}

// Derivative compressed sensing: Bregman outer loop enforcing the
// cross-derivative constraint B c = 0.
inline RecoveryResult dcs_recover(const GradientMeasurement &m,
                                  const MeasurementLayout &lay,
                                  const SolverOpts &opts) {
  const LinOp A = make_measurement_op(m, lay);
  const LinOp B = make_cross_derivative_op(lay);
  const std::vector<double> b = detail::stack_measurements(m);
  SolverOpts o = opts;
  o.lambda = detail::resolve_lambda(A, b, opts);
  const double gram_a = gram_norm(A);
  const double gram_b = gram_norm(B);
  auto fit_step = [&](double delta) {
    const double lip = gram_a + delta * gram_b;
    return (lip > 0.0) ? 0.99 / lip : 1.0;
  };
  const bool auto_step = !(o.step > 0.0);
  if (auto_step)
    o.step = fit_step(o.delta);

  RecoveryResult res;
  res.lambda = o.lambda;
  std::vector<double> p(B.out_dim, 0.0);
  std::vector<double> c(A.in_dim, 0.0);
  QuadPenalty quad{&B, &p, o.delta};
  std::vector<double> bc(B.out_dim);
  const bool continuation = o.delta_growth > 1.0;
  for (int outer = 0; outer < o.max_outer; ++outer) {
    quad.delta = o.delta;
    c = fista_bpdn(A, b, o, &quad, &c, &res.objective);
    B.apply(c, bc);
    const double rel = norm2(bc) / std::max(norm2(c), 1e-300);
    res.constraint_residual.push_back(rel);
    res.outer_iterations = outer + 1;
    if (rel < o.tol_constraint)
      break;
    // Constant penalty follows the reference update p += delta B c, whose
    // effective dual step is delta^2 (stable for delta <= 1). Under
    // continuation the dual step must match the penalty weight, which is
    // the scaled-form update p += B c.
    const double p_step = continuation ? 1.0 : o.delta;
    for (size_t i = 0; i < p.size(); ++i)
      p[i] += p_step * bc[i];
    if (continuation && o.delta < o.delta_max) {
      const double grown = std::min(o.delta * o.delta_growth, o.delta_max);
      // keep the accumulated multiplier delta*p invariant under the change
      const double rescale = o.delta / grown;
      for (double &v : p)
        v *= rescale;
      o.delta = grown;
      if (auto_step)
        o.step = fit_step(o.delta);
    }
  }
  res.c = std::move(c);
  detail::fill_fields(res, lay);
  return res;
}

inline void write_trace_csv(std::ostream &os, const RecoveryResult &res) {
  os << "iteration,objective,constraint_residual\n";
  char buf[64];
  const size_t n = std::max(res.objective.size(),
                            res.constraint_residual.size());
  for (size_t i = 0; i < n; ++i) {
    os << i;
    os << ',';
    if (i < res.objective.size()) {
      std::snprintf(buf, sizeof(buf), "%.17g", res.objective[i]);
      os << buf;
    }
    os << ',';
    if (i < res.constraint_residual.size()) {
      std::snprintf(buf, sizeof(buf), "%.17g", res.constraint_residual[i]);
      os << buf;
    }
    os << '\n';
  }
}

} // namespace wfdcs

#endif
