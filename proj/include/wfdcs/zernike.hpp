#ifndef WFDCS_ZERNIKE_HPP
#define WFDCS_ZERNIKE_HPP

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wfdcs/field.hpp"
#include "wfdcs/shi.hpp"

namespace wfdcs {

// Noll single index k (1-based) with its radial degree n and signed
// azimuthal frequency m (m >= 0 -> cos term, m < 0 -> sin term).
struct ZernikeIndex {
  int noll = 1;
  int n = 0;
  int m = 0;
};

inline ZernikeIndex noll_index(int noll) {
  if (noll < 1)
    throw std::invalid_argument("noll_index: k must be >= 1");
  int j = 1;
  for (int n = 0;; ++n) {
    for (int m0 = n % 2; m0 <= n; m0 += 2) {
      if (m0 == 0) {
        if (j == noll)
          return {noll, n, 0};
        ++j;
      } else {
        // within a pair, the even index carries the cos term
        const int first = (j % 2 == 0) ? m0 : -m0;
        if (j == noll)
          return {noll, n, first};
        ++j;
        if (j == noll)
          return {noll, n, -first};
        ++j;
      }
    }
  }
}

namespace detail {
inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i)
    f *= i;
  return f;
}
} // namespace detail

// Radial polynomial R_n^m evaluated as the finite factorial sum.
inline double radial_poly(int n, int m, double rho) {
  if (m < 0 || n < m || (n - m) % 2 != 0)
    throw std::invalid_argument("radial_poly: need n >= m >= 0, n-m even");
  double sum = 0.0;
  for (int k = 0; k <= (n - m) / 2; ++k) {
    const double coef = ((k % 2 == 0) ? 1.0 : -1.0) * detail::factorial(n - k) /
                        (detail::factorial(k) * detail::factorial((n + m) / 2 - k) *
                         detail::factorial((n - m) / 2 - k));
    sum += coef * std::pow(rho, n - 2 * k);
  }
  return sum;
}

// Plain (non-normalized) Zernike polynomial in polar coordinates.
inline double zernike_eval(const ZernikeIndex &k, double rho, double phi) {
  const int ma = std::abs(k.m);
  const double r = radial_poly(k.n, ma, rho);
  if (k.m >= 0)
    return r * std::cos(ma * phi);
  return r * std::sin(ma * phi);
}

namespace detail {

// Dense bivariate polynomial sum c[a][b] x^a y^b, degree bounded.
struct Poly2D {
  int deg = 0;
  std::vector<double> c; // (deg+1)^2, index a*(deg+1)+b

  explicit Poly2D(int d = 0) : deg(d), c((d + 1) * (d + 1), 0.0) {}

  double &at(int a, int b) { return c[static_cast<size_t>(a) * (deg + 1) + b]; }
  double at(int a, int b) const {
    return c[static_cast<size_t>(a) * (deg + 1) + b];
  }

  double eval(double x, double y) const {
    double acc = 0.0;
    for (int a = deg; a >= 0; --a) {
      double py = 0.0;
      for (int b = deg; b >= 0; --b)
        py = py * y + at(a, b);
      acc = acc * x + py;
    }
    return acc;
  }

  Poly2D dx() const {
    Poly2D r(deg);
    for (int a = 1; a <= deg; ++a)
      for (int b = 0; b <= deg; ++b)
        r.at(a - 1, b) = a * at(a, b);
    return r;
  }

  Poly2D dy() const {
    Poly2D r(deg);
    for (int a = 0; a <= deg; ++a)
      for (int b = 1; b <= deg; ++b)
        r.at(a, b - 1) = b * at(a, b);
    return r;
  }
};

inline double binom(int n, int k) {
  return factorial(n) / (factorial(k) * factorial(n - k));
}

// Cartesian expansion of Z_k: R_n^{|m|}(rho) {cos,sin}(|m| phi) is a
// polynomial because rho^|m| {cos,sin}(|m| phi) is harmonic and the
// remaining radial powers are even.
inline Poly2D zernike_poly(const ZernikeIndex &k) {
  const int ma = std::abs(k.m);
  Poly2D angular(k.n);
  if (k.m >= 0) {
    for (int t = 0; t <= ma; t += 2)
      angular.at(ma - t, t) = binom(ma, t) * ((t / 2) % 2 == 0 ? 1.0 : -1.0);
  } else {
    for (int t = 1; t <= ma; t += 2)
      angular.at(ma - t, t) =
          binom(ma, t) * (((t - 1) / 2) % 2 == 0 ? 1.0 : -1.0);
  }
  Poly2D out(k.n);
  for (int s = 0; s <= (k.n - ma) / 2; ++s) {
    const double coef =
        ((s % 2 == 0) ? 1.0 : -1.0) * factorial(k.n - s) /
        (factorial(s) * factorial((k.n + ma) / 2 - s) *
         factorial((k.n - ma) / 2 - s));
    const int pw = (k.n - 2 * s - ma) / 2; // power of (x^2+y^2)
    // accumulate coef * (x^2+y^2)^pw * angular
    for (int a = 0; a <= k.n; ++a)
      for (int b = 0; b <= k.n; ++b) {
        const double base = angular.at(a, b);
        if (base == 0.0)
          continue;
        for (int q = 0; q <= pw; ++q) {
          const int aa = a + 2 * q, bb = b + 2 * (pw - q);
          if (aa <= k.n && bb <= k.n)
            out.at(aa, bb) += coef * base * binom(pw, q);
        }
      }
  }
  return out;
}

} // namespace detail

// Analytic Cartesian gradient of Z_k, valid on the whole plane (the
// polynomial form has no polar singularity at the origin).
inline std::pair<double, double> zernike_gradient(const ZernikeIndex &k,
                                                  double x, double y) {
  const detail::Poly2D p = detail::zernike_poly(k);
  return {p.dx().eval(x, y), p.dy().eval(x, y)};
}

// 2M x (L+1) matrix of Zernike gradients at the lenslet centers; column k
// holds Noll index k+1, scaled to derivatives per meter on the pupil of
// diameter D (unit-disk radius D/2).
struct DesignMatrix {
  Eigen::MatrixXd Z;
  int lenslet_count = 0;
  int order = 0;
  double diameter = 0.0;
};

inline DesignMatrix build_design_matrix(const LensletSet &lenslets, int order,
                                        double diameter) {
  const int m = lenslets.count();
  if (order < 0 || !(diameter > 0.0))
    throw std::invalid_argument("build_design_matrix: bad arguments");
  if (2 * m < order + 1)
    throw std::invalid_argument("build_design_matrix: need 2M >= L+1");
  DesignMatrix dm;
  dm.lenslet_count = m;
  dm.order = order;
  dm.diameter = diameter;
  dm.Z.resize(2 * m, order + 1);
  const double unit = 2.0 / diameter; // meters -> unit-disk coordinates
  for (int col = 0; col <= order; ++col) {
    const ZernikeIndex zk = noll_index(col + 1);
    const detail::Poly2D p = detail::zernike_poly(zk);
    const detail::Poly2D px = p.dx(), py = p.dy();
    for (int r = 0; r < m; ++r) {
      const double ux = lenslets.centers[r][0] * unit;
      const double uy = lenslets.centers[r][1] * unit;
      dm.Z(r, col) = px.eval(ux, uy) * unit;
      dm.Z(m + r, col) = py.eval(ux, uy) * unit;
    }
  }
  return dm;
}

struct ZernikeFit {
  std::vector<double> coeffs; // length order+1, coeffs[k] for Noll k+1
  int order = 0;
  double rms_residual = 0.0;
};

// Truncated-SVD pseudo-inverse solve of Z a = d. The piston coefficient is
// pinned to zero (a pure piston produces no gradient signal).
inline ZernikeFit fit_coefficients(const DesignMatrix &dm,
                                   const std::vector<double> &d) {
  const int rows = static_cast<int>(dm.Z.rows());
  if (d.empty())
    throw std::invalid_argument("fit_coefficients: empty measurement vector");
  if (static_cast<int>(d.size()) != rows)
    throw std::invalid_argument("fit_coefficients: measurement length != 2M");
  Eigen::VectorXd dv(rows);
  for (int i = 0; i < rows; ++i)
    dv[i] = d[i];
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dm.Z,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd &sv = svd.singularValues();
  const double cutoff = 1e-10 * sv[0];
  Eigen::VectorXd ut = svd.matrixU().transpose() * dv;
  for (int i = 0; i < sv.size(); ++i)
    ut[i] = (sv[i] > cutoff) ? ut[i] / sv[i] : 0.0;
  Eigen::VectorXd a = svd.matrixV() * ut;
  a[0] = 0.0;
  ZernikeFit fit;
  fit.order = dm.order;
  fit.coeffs.assign(a.data(), a.data() + a.size());
  fit.rms_residual = (dm.Z * a - dv).norm() / std::sqrt(double(rows));
  return fit;
}

// Sum of the fitted modes over the pupil; cells outside the mask are zero.
inline Field2D synthesize_phase(const ZernikeFit &fit,
                                const ApertureSpec &aperture) {
  const Field2D &amp = aperture.amplitude;
  Field2D phase(amp.rows, amp.cols, amp.spacing, amp.origin_x, amp.origin_y);
  const double radius = 0.5 * aperture.diameter;
  std::vector<detail::Poly2D> polys;
  polys.reserve(fit.coeffs.size());
  for (size_t k = 0; k < fit.coeffs.size(); ++k)
    polys.push_back(detail::zernike_poly(noll_index(static_cast<int>(k) + 1)));
  for (int i = 0; i < amp.rows; ++i) {
    for (int j = 0; j < amp.cols; ++j) {
      if (amp.at(i, j) <= 0.5)
        continue;
      const double ux = amp.x(j) / radius;
      const double uy = amp.y(i) / radius;
      double sum = 0.0;
      for (size_t k = 0; k < fit.coeffs.size(); ++k)
        if (fit.coeffs[k] != 0.0)
          sum += fit.coeffs[k] * polys[k].eval(ux, uy);
      phase.at(i, j) = sum;
    }
  }
  return phase;
}

inline void write_fit_csv(std::ostream &os, const ZernikeFit &fit) {
  os << "index,n,m,coefficient\n";
  char buf[64];
  for (size_t k = 0; k < fit.coeffs.size(); ++k) {
    const ZernikeIndex zk = noll_index(static_cast<int>(k) + 1);
    std::snprintf(buf, sizeof(buf), "%.17g", fit.coeffs[k]);
    os << zk.noll << ',' << zk.n << ',' << zk.m << ',' << buf << '\n';
  }
}

} // namespace wfdcs

#endif
