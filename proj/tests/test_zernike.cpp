#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "wfdcs/random.hpp"
#include "wfdcs/zernike.hpp"

using namespace wfdcs;

TEST_CASE("noll ordering matches the conventional table") {
  struct Row {
    int k, n, m;
  };
  const Row table[] = {{1, 0, 0},  {2, 1, 1},  {3, 1, -1}, {4, 2, 0},
                       {5, 2, -2}, {6, 2, 2},  {7, 3, -1}, {8, 3, 1},
                       {9, 3, -3}, {10, 3, 3}, {11, 4, 0}, {12, 4, 2},
                       {13, 4, -2}, {14, 4, 4}, {15, 4, -4}};
  for (const Row &r : table) {
    const ZernikeIndex z = noll_index(r.k);
    REQUIRE(z.n == r.n);
    REQUIRE(z.m == r.m);
  }
  REQUIRE_THROWS_AS(noll_index(0), std::invalid_argument);
}

TEST_CASE("radial polynomial base cases") {
  REQUIRE(radial_poly(0, 0, 0.3) == 1.0);
  REQUIRE(radial_poly(0, 0, 0.9) == 1.0);
  REQUIRE(radial_poly(1, 1, 0.42) == Approx(0.42).margin(1e-15));
  REQUIRE(radial_poly(2, 0, 0.5) == Approx(-0.5).margin(1e-15));
  REQUIRE_THROWS_AS(radial_poly(2, 1, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(radial_poly(1, 2, 0.5), std::invalid_argument);
}

TEST_CASE("zernike evaluation") {
  REQUIRE(zernike_eval(noll_index(1), 0.77, 1.3) == 1.0);
  REQUIRE(zernike_eval(ZernikeIndex{2, 1, 1}, 1.0, 0.0) == Approx(1.0));
  REQUIRE(zernike_eval(ZernikeIndex{3, 1, -1}, 0.7, std::numbers::pi / 2) ==
          Approx(0.7).margin(1e-14));
}

TEST_CASE("gradient of piston and tilt") {
  auto [px, py] = zernike_gradient(noll_index(1), 0.3, -0.4);
  REQUIRE(px == 0.0);
  REQUIRE(py == 0.0);
  // Noll 2 is rho cos(phi) = x
  auto [tx, ty] = zernike_gradient(noll_index(2), 0.3, -0.4);
  REQUIRE(tx == Approx(1.0).margin(1e-14));
  REQUIRE(ty == Approx(0.0).margin(1e-14));
}

TEST_CASE("analytic gradients match central differences for k <= 36") {
  GaussianRng rng(31);
  const double h = 1e-5;
  for (int k = 1; k <= 36; ++k) {
    const ZernikeIndex z = noll_index(k);
    for (int t = 0; t < 100; ++t) {
      // random interior point away from the rim
      double x, y;
      do {
        x = 1.9 * (rng.uniform() - 0.5);
        y = 1.9 * (rng.uniform() - 0.5);
      } while (x * x + y * y > 0.9 * 0.9);
      auto eval_at = [&](double xx, double yy) {
        const double rho = std::hypot(xx, yy);
        const double phi = std::atan2(yy, xx);
        return zernike_eval(z, rho, phi);
      };
      const double fdx = (eval_at(x + h, y) - eval_at(x - h, y)) / (2 * h);
      const double fdy = (eval_at(x, y + h) - eval_at(x, y - h)) / (2 * h);
      auto [gx, gy] = zernike_gradient(z, x, y);
      REQUIRE(gx == Approx(fdx).margin(1e-6));
      REQUIRE(gy == Approx(fdy).margin(1e-6));
    }
  }
}

TEST_CASE("numerical orthogonality over the unit disk", "[slow]") {
  // midpoint quadrature of the integral Z_j Z_k rho drho dphi on the polar
  // rectangle [0,1] x [0,2pi), 512 x 512 samples
  const int kmax = 36;
  const int samples = 512;
  std::vector<ZernikeIndex> idx;
  for (int k = 1; k <= kmax; ++k)
    idx.push_back(noll_index(k));
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(kmax, kmax);
  std::vector<double> radial(kmax), z(kmax);
  for (int i = 0; i < samples; ++i) {
    const double rho = (i + 0.5) / samples;
    for (int k = 0; k < kmax; ++k)
      radial[k] = radial_poly(idx[k].n, std::abs(idx[k].m), rho);
    for (int j = 0; j < samples; ++j) {
      const double phi = 2.0 * std::numbers::pi * (j + 0.5) / samples;
      for (int k = 0; k < kmax; ++k) {
        const int ma = std::abs(idx[k].m);
        z[k] = radial[k] *
               (idx[k].m >= 0 ? std::cos(ma * phi) : std::sin(ma * phi));
      }
      for (int a = 0; a < kmax; ++a)
        for (int b = a; b < kmax; ++b)
          gram(a, b) += rho * z[a] * z[b];
    }
  }
  for (int a = 0; a < kmax; ++a)
    for (int b = a + 1; b < kmax; ++b) {
      const double rel = std::abs(gram(a, b)) /
                         std::sqrt(gram(a, a) * gram(b, b));
      REQUIRE(rel < 1e-3);
    }
}

TEST_CASE("design matrix shape and tilt column") {
  const double d = 0.08;
  const LensletSet ls = make_lenslets(16, d, 0.01);
  const int m = ls.count();

  const DesignMatrix piston_only = build_design_matrix(ls, 0, d);
  REQUIRE(piston_only.Z.rows() == 2 * m);
  REQUIRE(piston_only.Z.cols() == 1);
  REQUIRE(piston_only.Z.cwiseAbs().maxCoeff() == 0.0);

  const DesignMatrix dm = build_design_matrix(ls, 5, d);
  REQUIRE(dm.Z.rows() == 2 * m);
  REQUIRE(dm.Z.cols() == 6);
  for (int r = 0; r < m; ++r) {
    REQUIRE(dm.Z(r, 1) == Approx(2.0 / d).margin(1e-12));
    REQUIRE(dm.Z(m + r, 1) == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("design matrix rejects underdetermined orders") {
  const LensletSet ls = make_lenslets(2, 1.0, 0.01); // M = 4
  REQUIRE_THROWS_AS(build_design_matrix(ls, 8, 1.0), std::invalid_argument);
}

TEST_CASE("fit recovers single-mode gradients exactly") {
  const double d = 0.1;
  const LensletSet ls = make_lenslets(24, d, 0.01);
  const DesignMatrix dm = build_design_matrix(ls, 21, d);
  for (int k : {1, 4, 11, 21}) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(22);
    e[k] = 1.0;
    const Eigen::VectorXd dv = dm.Z * e;
    const ZernikeFit fit =
        fit_coefficients(dm, std::vector<double>(dv.data(), dv.data() + dv.size()));
    for (int c = 0; c <= 21; ++c)
      REQUIRE(fit.coeffs[c] == Approx(c == k ? 1.0 : 0.0).margin(1e-8));
    REQUIRE(fit.rms_residual < 1e-10);
  }
}

TEST_CASE("fit of zero measurements is zero") {
  const LensletSet ls = make_lenslets(12, 0.1, 0.01);
  const DesignMatrix dm = build_design_matrix(ls, 10, 0.1);
  const std::vector<double> d(2 * ls.count(), 0.0);
  const ZernikeFit fit = fit_coefficients(dm, d);
  for (double c : fit.coeffs)
    REQUIRE(c == 0.0);
  REQUIRE_THROWS_AS(fit_coefficients(dm, std::vector<double>{}),
                    std::invalid_argument);
}

TEST_CASE("noisy fit error obeys the pseudo-inverse bound") {
  GaussianRng rng(77);
  const double d = 0.1;
  const LensletSet ls = make_lenslets(20, d, 0.01);
  const DesignMatrix dm = build_design_matrix(ls, 14, d);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(15);
  for (int k = 1; k <= 14; ++k)
    truth[k] = rng.gaussian();
  Eigen::VectorXd dv = dm.Z * truth;
  Eigen::VectorXd noise(dv.size());
  for (int i = 0; i < noise.size(); ++i)
    noise[i] = 1e-4 * rng.gaussian();
  dv += noise;
  const ZernikeFit fit =
      fit_coefficients(dm, std::vector<double>(dv.data(), dv.data() + dv.size()));
  Eigen::VectorXd err(15);
  for (int k = 0; k <= 14; ++k)
    err[k] = fit.coeffs[k] - truth[k];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dm.Z);
  const Eigen::VectorXd &sv = svd.singularValues();
  double smin = sv[0];
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * sv[0])
      smin = sv[i];
  REQUIRE(err.norm() <= noise.norm() / smin + 1e-12);
}

TEST_CASE("synthesis reproduces basis modes over the pupil") {
  const ApertureSpec ap = make_circular_aperture(64, 0.1);
  ZernikeFit fit;
  fit.order = 6;
  fit.coeffs.assign(7, 0.0);
  fit.coeffs[5] = 1.0; // Noll 6
  const Field2D ph = synthesize_phase(fit, ap);
  const ZernikeIndex z6 = noll_index(6);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      if (ap.amplitude.at(i, j) <= 0.5) {
        REQUIRE(ph.at(i, j) == 0.0);
        continue;
      }
      const double ux = ph.x(j) / 0.05, uy = ph.y(i) / 0.05;
      const double want =
          zernike_eval(z6, std::hypot(ux, uy), std::atan2(uy, ux));
      REQUIRE(ph.at(i, j) == Approx(want).margin(1e-12));
    }

  ZernikeFit zero;
  zero.order = 3;
  zero.coeffs.assign(4, 0.0);
  const Field2D zf = synthesize_phase(zero, ap);
  for (double v : zf.v)
    REQUIRE(v == 0.0);
}

TEST_CASE("dense closed loop recovers random coefficients") {
  GaussianRng rng(123);
  const double d = 0.1;
  const LensletSet ls = make_lenslets(32, d, 0.01);
  const DesignMatrix dm = build_design_matrix(ls, 21, d);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(22);
  for (int k = 1; k <= 21; ++k)
    truth[k] = rng.gaussian();
  const Eigen::VectorXd dv = dm.Z * truth;
  const ZernikeFit fit =
      fit_coefficients(dm, std::vector<double>(dv.data(), dv.data() + dv.size()));
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= 21; ++k) {
    num += (fit.coeffs[k] - truth[k]) * (fit.coeffs[k] - truth[k]);
    den += truth[k] * truth[k];
  }
  REQUIRE(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("fit serializes to CSV") {
  ZernikeFit fit;
  fit.order = 2;
  fit.coeffs = {0.0, 0.5, -0.25};
  std::ostringstream os;
  write_fit_csv(os, fit);
  const std::string text = os.str();
  REQUIRE(text.rfind("index,n,m,coefficient\n", 0) == 0);
  REQUIRE(text.find("2,1,1,0.5") != std::string::npos);
  REQUIRE(text.find("3,1,-1,-0.25") != std::string::npos);
}
