#include <catch2/catch.hpp>

#include <cmath>
#include <sstream>

#include "wfdcs/field.hpp"

using namespace wfdcs;

TEST_CASE("circular aperture matches brute-force lattice count") {
  const int n = 128;
  const double d = 0.10;
  const ApertureSpec ap = make_circular_aperture(n, d);

  // independent enumeration of half-offset lattice points with
  // x^2 + y^2 <= (D/2)^2
  const double sp = 2.0 * d / n;
  long expected = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = -d + sp * (j + 0.5);
      const double y = -d + sp * (i + 0.5);
      if (x * x + y * y <= 0.25 * d * d)
        ++expected;
    }
  long got = 0;
  for (double v : ap.amplitude.v)
    got += (v > 0.5);
  REQUIRE(got == expected);
  REQUIRE(got == Approx(3.14159265 * (n / 4.0) * (n / 4.0)).epsilon(0.02));

  REQUIRE(ap.amplitude.at(n / 2, n / 2) == 1.0);
  REQUIRE(ap.amplitude.at(0, 0) == 0.0);
  REQUIRE(ap.amplitude.at(n - 1, n - 1) == 0.0);
}

TEST_CASE("tight grid puts the pupil on the inscribed circle") {
  const int n = 128;
  const ApertureSpec ap = make_circular_aperture(n, 0.10, true);
  REQUIRE(ap.amplitude.spacing == Approx(0.10 / n));
  // center column reaches the mask edge
  REQUIRE(ap.amplitude.at(n / 2, 0) == 1.0);
  REQUIRE(ap.amplitude.at(0, 0) == 0.0);
  long ones = 0;
  for (double v : ap.amplitude.v)
    ones += (v > 0.5);
  REQUIRE(ones == Approx(3.14159265 * (n / 2.0) * (n / 2.0)).epsilon(0.02));
}

TEST_CASE("aperture mask is radially symmetric") {
  const ApertureSpec ap = make_circular_aperture(64, 0.05);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j)
      REQUIRE(ap.amplitude.at(i, j) == ap.amplitude.at(63 - i, 63 - j));
}

TEST_CASE("aperture rejects bad arguments") {
  REQUIRE_THROWS_AS(make_circular_aperture(1, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(make_circular_aperture(64, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(make_circular_aperture(64, -2.0), std::invalid_argument);
}

TEST_CASE("gradient of linear and constant fields") {
  Field2D f = make_centered_grid(16, 1.0);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      f.at(i, j) = 3.0 * f.x(j);
  auto [gx, gy] = field_gradient(f);
  for (size_t k = 0; k < gx.v.size(); ++k) {
    REQUIRE(gx.v[k] == Approx(3.0).margin(1e-12));
    REQUIRE(gy.v[k] == Approx(0.0).margin(1e-12));
  }

  Field2D c(8, 8, 0.5);
  for (double &v : c.v)
    v = 7.25;
  auto [cx, cy] = field_gradient(c);
  for (size_t k = 0; k < cx.v.size(); ++k) {
    REQUIRE(cx.v[k] == 0.0);
    REQUIRE(cy.v[k] == 0.0);
  }
}

TEST_CASE("central difference of a quadratic is exact in the interior") {
  Field2D f = make_centered_grid(32, 1.0);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      f.at(i, j) = f.x(j) * f.x(j);
  auto [gx, gy] = field_gradient(f);
  for (int i = 0; i < 32; ++i)
    for (int j = 1; j < 31; ++j)
      REQUIRE(gx.at(i, j) == Approx(2.0 * f.x(j)).margin(1e-10));
  (void)gy;
}

TEST_CASE("gradient of affine field exact everywhere interior") {
  Field2D f = make_centered_grid(12, 2.0);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      f.at(i, j) = 1.5 * f.x(j) - 2.5 * f.y(i) + 0.75;
  auto [gx, gy] = field_gradient(f);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      REQUIRE(gx.at(i, j) == Approx(1.5).margin(1e-12));
      REQUIRE(gy.at(i, j) == Approx(-2.5).margin(1e-12));
    }
}

TEST_CASE("gradient rejects degenerate grids") {
  Field2D tiny(2, 2, 1.0);
  REQUIRE_THROWS_AS(field_gradient(tiny), std::invalid_argument);
}

TEST_CASE("binary field format round trip") {
  Field2D f = make_centered_grid(6, 0.3);
  for (size_t k = 0; k < f.v.size(); ++k)
    f.v[k] = std::sin(0.37 * k) * 1e3;
  std::stringstream ss;
  write_field(ss, f);
  const Field2D g = read_field(ss);
  REQUIRE(g.rows == f.rows);
  REQUIRE(g.cols == f.cols);
  REQUIRE(g.spacing == f.spacing);
  for (size_t k = 0; k < f.v.size(); ++k)
    REQUIRE(g.v[k] == f.v[k]);
}

TEST_CASE("field reader rejects bad magic") {
  std::stringstream ss;
  ss << "NOPE garbage";
  REQUIRE_THROWS(read_field(ss));
}
