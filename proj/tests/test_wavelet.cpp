#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wfdcs/random.hpp"
#include "wfdcs/turbulence.hpp"
#include "wfdcs/wavelet.hpp"

using namespace wfdcs;

namespace {
double norm_of(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v)
    s += x * x;
  return std::sqrt(s);
}
} // namespace

TEST_CASE("scaling filter is orthonormal with sum sqrt(2)") {
  double sum = 0.0;
  for (double h : kSym5Scaling)
    sum += h;
  REQUIRE(sum == Approx(std::sqrt(2.0)).margin(1e-10));
  for (int m = 0; m <= 4; ++m) {
    double dot = 0.0;
    for (int k = 0; k + 2 * m < 10; ++k)
      dot += kSym5Scaling[k] * kSym5Scaling[k + 2 * m];
    REQUIRE(dot == Approx(m == 0 ? 1.0 : 0.0).margin(1e-10));
  }
}

TEST_CASE("perfect reconstruction and norm preservation") {
  GaussianRng rng(11);
  for (int n : {32, 64, 128}) {
    std::vector<double> x(static_cast<size_t>(n) * n);
    for (double &v : x)
      v = rng.gaussian();
    std::vector<double> c = x;
    wavelet_forward(c, n);
    REQUIRE(norm_of(c) == Approx(norm_of(x)).epsilon(1e-10));
    std::vector<double> back = c;
    wavelet_inverse(back, n);
    double err = 0.0;
    for (size_t k = 0; k < x.size(); ++k)
      err = std::max(err, std::abs(back[k] - x[k]));
    REQUIRE(err < 1e-10 * (1.0 + norm_of(x)));
  }
}

TEST_CASE("adjoint identity <Wx, y> == <x, W'y>") {
  GaussianRng rng(12);
  const int n = 32;
  std::vector<double> x(n * n), y(n * n);
  for (double &v : x)
    v = rng.gaussian();
  for (double &v : y)
    v = rng.gaussian();
  std::vector<double> fx = x;
  wavelet_forward(fx, n);
  std::vector<double> iy = y;
  wavelet_inverse(iy, n);
  double lhs = 0.0, rhs = 0.0;
  for (int k = 0; k < n * n; ++k) {
    lhs += fx[k] * y[k];
    rhs += x[k] * iy[k];
  }
  REQUIRE(lhs == Approx(rhs).epsilon(1e-10));
}

TEST_CASE("constant input has zero detail subbands") {
  const int n = 32;
  std::vector<double> x(n * n, 1.0);
  wavelet_forward(x, n);
  // with 4 levels the approximation block is the top-left (n/16)^2 corner
  const int keep = n >> 4;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i >= keep || j >= keep)
        REQUIRE(std::abs(x[static_cast<size_t>(i) * n + j]) < 1e-10);
}

TEST_CASE("unit coefficient inverts to a unit-norm basis column") {
  const int n = 32;
  std::vector<double> c(n * n, 0.0);
  c[5 * n + 17] = 1.0;
  wavelet_inverse(c, n);
  REQUIRE(norm_of(c) == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("wavelet rejects bad sizes") {
  std::vector<double> x(24 * 24, 0.0);
  REQUIRE_THROWS_AS(wavelet_forward(x, 24), std::invalid_argument);
  std::vector<double> y(8 * 8, 0.0);
  WaveletSpec four{};
  REQUIRE_THROWS_AS(wavelet_forward(y, 8, four), std::invalid_argument);
  WaveletSpec three{3};
  REQUIRE_NOTHROW(wavelet_forward(y, 8, three));
}

TEST_CASE("Von Karman gradient fields compress well in the basis") {
  TurbulenceParams p;
  p.seed = 99;
  const Field2D screen = generate_phase_screen(p);
  auto [gx, gy] = field_gradient(screen);
  std::vector<double> c = gx.v;
  wavelet_forward(c, p.n);
  std::vector<double> mag(c.size());
  double total = 0.0;
  for (size_t k = 0; k < c.size(); ++k) {
    mag[k] = c[k] * c[k];
    total += mag[k];
  }
  std::sort(mag.begin(), mag.end(), std::greater<double>());
  double top = 0.0;
  const size_t tenth = mag.size() / 10;
  for (size_t k = 0; k < tenth; ++k)
    top += mag[k];
  REQUIRE(top >= 0.90 * total);
  (void)gy;
}
