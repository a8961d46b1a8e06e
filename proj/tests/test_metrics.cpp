#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "wfdcs/metrics.hpp"
#include "wfdcs/random.hpp"

using namespace wfdcs;

namespace {
Field2D random_field(int n, uint64_t seed, double offset = 0.0) {
  GaussianRng rng(seed);
  Field2D f(n, n, 1.0);
  for (double &v : f.v)
    v = 0.5 + 0.15 * rng.gaussian() + offset;
  return f;
}
} // namespace

TEST_CASE("mse basics") {
  const Field2D a = random_field(16, 1);
  REQUIRE(mse(a, a) == 0.0);
  Field2D b = a;
  for (double &v : b.v)
    v += 2.0;
  REQUIRE(mse(a, b) == Approx(4.0).margin(1e-12));
  Field2D c(8, 8, 1.0);
  REQUIRE_THROWS_AS(mse(a, c), std::invalid_argument);
}

TEST_CASE("masked mse equals a direct loop") {
  const Field2D a = random_field(12, 2);
  const Field2D b = random_field(12, 3);
  Field2D mask(12, 12, 1.0);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      mask.at(i, j) = (j < 6) ? 1.0 : 0.0;
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 6; ++j) {
      const double d = a.at(i, j) - b.at(i, j);
      sum += d * d;
      ++count;
    }
  REQUIRE(mse(a, b, &mask) == Approx(sum / count).margin(1e-15));
}

TEST_CASE("psnr corner cases") {
  const Field2D a = random_field(8, 4);
  REQUIRE(psnr(a, a, 1.0) == kPsnrCap);
  Field2D b = a;
  for (double &v : b.v)
    v += 1.0; // mse = peak^2
  REQUIRE(psnr(a, b, 1.0) == Approx(0.0).margin(1e-12));
  Field2D c = a;
  for (double &v : c.v)
    v += 0.1; // mse = peak^2 / 100
  REQUIRE(psnr(a, c, 1.0) == Approx(20.0).margin(1e-12));
  REQUIRE_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
}

TEST_CASE("psnr falls as noise grows") {
  const Field2D clean = random_field(32, 9);
  auto noisy_psnr = [&](double sigma) {
    double acc = 0.0;
    for (int t = 0; t < 20; ++t) {
      GaussianRng rng(100 + t);
      Field2D n = clean;
      for (double &v : n.v)
        v += sigma * rng.gaussian();
      acc += psnr(clean, n, 1.0);
    }
    return acc / 20.0;
  };
  REQUIRE(noisy_psnr(0.01) > noisy_psnr(0.03));
  REQUIRE(noisy_psnr(0.03) > noisy_psnr(0.1));
}

TEST_CASE("ssim of identical images is one and symmetric") {
  const Field2D a = random_field(32, 5);
  const Field2D b = random_field(32, 6);
  REQUIRE(ssim(a, a) == Approx(1.0).margin(1e-12));
  REQUIRE(ssim(a, b) == Approx(ssim(b, a)).margin(1e-12));
  Field2D small(8, 8, 1.0);
  REQUIRE_THROWS_AS(ssim(small, small), std::invalid_argument);
}

TEST_CASE("constant images collapse ssim to the luminance term") {
  Field2D a(16, 16, 1.0), b(16, 16, 1.0);
  for (double &v : a.v)
    v = 0.25;
  for (double &v : b.v)
    v = 0.75; // differs by dynamic_range / 2
  const SsimParams p;
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double want =
      (2.0 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
  REQUIRE(ssim(a, b, p) == Approx(want).margin(1e-12));
}

namespace {
// independent straightforward SSIM (uniform loop, no shared code paths)
double ssim_oracle(const Field2D &a, const Field2D &b, const SsimParams &p) {
  const int w = p.window;
  std::vector<double> k(static_cast<size_t>(w) * w);
  double ks = 0.0;
  for (int i = 0; i < w; ++i)
    for (int j = 0; j < w; ++j) {
      const double dx = i - (w - 1) / 2.0, dy = j - (w - 1) / 2.0;
      k[i * w + j] = std::exp(-(dx * dx + dy * dy) / (2 * p.sigma * p.sigma));
      ks += k[i * w + j];
    }
  for (double &v : k)
    v /= ks;
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double acc = 0.0;
  int cnt = 0;
  for (int i0 = 0; i0 + w <= a.rows; ++i0)
    for (int j0 = 0; j0 + w <= a.cols; ++j0) {
      double m1 = 0, m2 = 0, q11 = 0, q22 = 0, q12 = 0;
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const double kw = k[i * w + j];
          m1 += kw * a.at(i0 + i, j0 + j);
          m2 += kw * b.at(i0 + i, j0 + j);
          q11 += kw * a.at(i0 + i, j0 + j) * a.at(i0 + i, j0 + j);
          q22 += kw * b.at(i0 + i, j0 + j) * b.at(i0 + i, j0 + j);
          q12 += kw * a.at(i0 + i, j0 + j) * b.at(i0 + i, j0 + j);
        }
      acc += ((2 * m1 * m2 + c1) * (2 * (q12 - m1 * m2) + c2)) /
             ((m1 * m1 + m2 * m2 + c1) *
              ((q11 - m1 * m1) + (q22 - m2 * m2) + c2));
      ++cnt;
    }
  return acc / cnt;
}
} // namespace

TEST_CASE("ssim under a common offset matches the direct-loop oracle") {
  const Field2D a = random_field(24, 21);
  const Field2D b = random_field(24, 22);
  Field2D ao = a, bo = b;
  for (double &v : ao.v)
    v += 0.1;
  for (double &v : bo.v)
    v += 0.1;
  const SsimParams p;
  REQUIRE(ssim(ao, bo, p) == Approx(ssim_oracle(ao, bo, p)).margin(1e-12));
}
