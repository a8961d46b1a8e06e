#ifndef WFDCS_SHI_HPP
#define WFDCS_SHI_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wfdcs/field.hpp"
#include "wfdcs/random.hpp"

namespace wfdcs {

// Lenslet centers on the half-offset N x N lattice over [-D, D]^2, kept
// where x^2 + y^2 <= D^2. Ordering is row-major (y outer, x inner).
struct LensletSet {
  int n_grid = 0;
  double diameter = 0.0; // the D parameter of the lattice
  double focal = 0.0;
  std::vector<std::array<double, 2>> centers; // (x, y) meters
  std::vector<std::array<int, 2>> cells;      // (row i_y, col i_x) lattice slots

  int count() const { return static_cast<int>(centers.size()); }
};

inline LensletSet make_lenslets(int n_grid, double diameter, double focal_f) {
  if (n_grid < 2 || !(diameter > 0.0) || !(focal_f > 0.0))
    throw std::invalid_argument("make_lenslets: bad arguments");
  LensletSet ls;
  ls.n_grid = n_grid;
  ls.diameter = diameter;
  ls.focal = focal_f;
  const double pitch = 2.0 * diameter / n_grid;
  const double r2 = diameter * diameter;
  for (int iy = 0; iy < n_grid; ++iy) {
    const double y = -diameter + pitch * (iy + 0.5);
    for (int ix = 0; ix < n_grid; ++ix) {
      const double x = -diameter + pitch * (ix + 0.5);
      if (x * x + y * y <= r2) {
        ls.centers.push_back({x, y});
        ls.cells.push_back({iy, ix});
      }
    }
  }
  return ls;
}

// Local wavefront slopes per lenslet: least-squares plane fit over the
// screen samples inside each lenslet block. The focal displacement
// delta = f * grad(phi) cancels back to the gradient, so the returned
// values are radians per meter.
inline std::pair<std::vector<double>, std::vector<double>>
sense_gradients(const Field2D &screen, const LensletSet &lenslets) {
  const int m = lenslets.count();
  std::vector<double> fx(m, 0.0), fy(m, 0.0);
  const double pitch = 2.0 * lenslets.diameter / lenslets.n_grid;
  const double eps = 1e-9 * screen.spacing;
  for (int l = 0; l < m; ++l) {
    const double x_lo = -lenslets.diameter + pitch * lenslets.cells[l][1];
    const double y_lo = -lenslets.diameter + pitch * lenslets.cells[l][0];
    const int j0 = static_cast<int>(
        std::ceil((x_lo - screen.origin_x - eps) / screen.spacing));
    const int j1 = static_cast<int>(
        std::floor((x_lo + pitch - screen.origin_x - eps) / screen.spacing));
    const int i0 = static_cast<int>(
        std::ceil((y_lo - screen.origin_y - eps) / screen.spacing));
    const int i1 = static_cast<int>(
        std::floor((y_lo + pitch - screen.origin_y - eps) / screen.spacing));
    if (j0 < 0 || i0 < 0 || j1 >= screen.cols || i1 >= screen.rows)
      throw std::invalid_argument(
          "sense_gradients: screen does not cover lenslet block");
    const int samples = (j1 - j0 + 1) * (i1 - i0 + 1);
    if (samples < 3)
      throw std::invalid_argument(
          "sense_gradients: lenslet block holds fewer than 3 samples");
    const double cx = x_lo + 0.5 * pitch, cy = y_lo + 0.5 * pitch;
    double sxx = 0, sxy = 0, syy = 0, sx = 0, sy = 0, s1 = 0;
    double sxz = 0, syz = 0, sz = 0;
    for (int i = i0; i <= i1; ++i) {
      const double dy = screen.y(i) - cy;
      for (int j = j0; j <= j1; ++j) {
        const double dx = screen.x(j) - cx;
        const double z = screen.at(i, j);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sx += dx;
        sy += dy;
        s1 += 1.0;
        sxz += dx * z;
        syz += dy * z;
        sz += z;
      }
    }
    // Cramer solve of the 3x3 normal equations for (a, b, c)
    const double det = sxx * (syy * s1 - sy * sy) - sxy * (sxy * s1 - sy * sx) +
                       sx * (sxy * sy - syy * sx);
    if (std::abs(det) < 1e-300)
      throw std::invalid_argument("sense_gradients: degenerate lenslet block");
    const double det_a = sxz * (syy * s1 - sy * sy) -
                         sxy * (syz * s1 - sy * sz) +
                         sx * (syz * sy - syy * sz);
    const double det_b = sxx * (syz * s1 - sz * sy) -
                         sxz * (sxy * s1 - sy * sx) +
                         sx * (sxy * sz - syz * sx);
    fx[l] = det_a / det;
    fy[l] = det_b / det;
  }
  return {std::move(fx), std::move(fy)};
}

// Random row subsets of the two sampling matrices, plus the retained
// measurement values. keep lists are sorted and unique.
struct GradientMeasurement {
  std::vector<double> bx, by;   // retained values, length n each
  std::vector<int> keep_x, keep_y; // retained lenslet indices
  double snr_db = std::numeric_limits<double>::infinity();
  uint64_t seed = 0;
  int total = 0; // M, lenslets per channel before decimation
};

namespace detail {
inline std::vector<int> sample_without_replacement(int m, int n,
                                                   GaussianRng &rng) {
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  for (int t = 0; t < n; ++t) {
    const int j = t + static_cast<int>(rng.below(m - t));
    std::swap(idx[t], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}
} // namespace detail

// Keeps a random fraction r of each gradient channel. By default the two
// channels draw independent subsets; coupled = true reuses one subset for
// both (rows of Psi_x == rows of Psi_y).
inline GradientMeasurement decimate(const std::vector<double> &fx,
                                    const std::vector<double> &fy, double r,
                                    uint64_t seed, bool coupled = false) {
  if (fx.size() != fy.size() || fx.empty())
    throw std::invalid_argument("decimate: channel size mismatch");
  if (!(r > 0.0) || r > 1.0)
    throw std::invalid_argument("decimate: ratio must lie in (0, 1]");
  const int m = static_cast<int>(fx.size());
  const int n = static_cast<int>(std::llround(r * m));
  if (n < 1)
    throw std::invalid_argument("decimate: r*M < 1");
  GradientMeasurement out;
  out.total = m;
  out.seed = seed;
  GaussianRng rng_x(mix_seed(seed, 0x78));
  GaussianRng rng_y(mix_seed(seed, 0x79));
  out.keep_x = detail::sample_without_replacement(m, n, rng_x);
  out.keep_y = coupled ? out.keep_x
                       : detail::sample_without_replacement(m, n, rng_y);
  out.bx.reserve(n);
  out.by.reserve(n);
  for (int i : out.keep_x)
    out.bx.push_back(fx[i]);
  for (int i : out.keep_y)
    out.by.push_back(fy[i]);
  return out;
}

// White Gaussian noise at the requested SNR over the stacked [bx; by]
// vector: sigma^2 = ||b||^2 / (2n) * 10^(-snr/10).
inline GradientMeasurement add_noise(const GradientMeasurement &m,
                                     double snr_db, uint64_t seed) {
  GradientMeasurement out = m;
  if (std::isinf(snr_db) && snr_db > 0) {
    out.snr_db = snr_db;
    return out;
  }
  double energy = 0.0;
  for (double v : m.bx)
    energy += v * v;
  for (double v : m.by)
    energy += v * v;
  if (!(energy > 0.0))
    throw std::invalid_argument("add_noise: non-positive signal energy");
  const size_t n = m.bx.size();
  const double sigma =
      std::sqrt(energy / (2.0 * n) * std::pow(10.0, -snr_db / 10.0));
  GaussianRng rng(mix_seed(seed, 0x7e));
  for (double &v : out.bx)
    v += sigma * rng.gaussian();
  for (double &v : out.by)
    v += sigma * rng.gaussian();
  out.snr_db = snr_db;
  out.seed = seed;
  return out;
}

inline void write_measurement_csv(std::ostream &os,
                                  const GradientMeasurement &m, int n_grid) {
  char buf[64];
  os << "n,M,N_grid,snr_db,seed\n";
  os << m.bx.size() << ',' << m.total << ',' << n_grid << ',';
  if (std::isinf(m.snr_db))
    os << "inf";
  else {
    std::snprintf(buf, sizeof(buf), "%.17g", m.snr_db);
    os << buf;
  }
  os << ',' << m.seed << '\n';
  os << "channel,index,value\n";
  for (size_t i = 0; i < m.bx.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", m.bx[i]);
    os << "x," << m.keep_x[i] << ',' << buf << '\n';
  }
  for (size_t i = 0; i < m.by.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", m.by[i]);
    os << "y," << m.keep_y[i] << ',' << buf << '\n';
  }
}

inline GradientMeasurement read_measurement_csv(std::istream &is,
                                                int *n_grid_out = nullptr) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("n,M,N_grid", 0) != 0)
    throw std::runtime_error("read_measurement_csv: bad header");
  if (!std::getline(is, line))
    throw std::runtime_error("read_measurement_csv: missing summary row");
  GradientMeasurement m;
  {
    std::istringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ','); // n (redundant with row count)
    std::getline(ss, tok, ',');
    m.total = std::stoi(tok);
    std::getline(ss, tok, ',');
    if (n_grid_out)
      *n_grid_out = std::stoi(tok);
    std::getline(ss, tok, ',');
    m.snr_db = (tok == "inf") ? std::numeric_limits<double>::infinity()
                              : std::stod(tok);
    std::getline(ss, tok, ',');
    m.seed = std::stoull(tok);
  }
  if (!std::getline(is, line) || line.rfind("channel,", 0) != 0)
    throw std::runtime_error("read_measurement_csv: bad column header");
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    std::istringstream ss(line);
    std::string ch, idx, val;
    std::getline(ss, ch, ',');
    std::getline(ss, idx, ',');
    std::getline(ss, val, ',');
    if (ch == "x") {
      m.keep_x.push_back(std::stoi(idx));
      m.bx.push_back(std::stod(val));
    } else if (ch == "y") {
      m.keep_y.push_back(std::stoi(idx));
      m.by.push_back(std::stod(val));
    } else {
      throw std::runtime_error("read_measurement_csv: bad channel tag");
    }
  }
  return m;
}

} // namespace wfdcs

#endif
