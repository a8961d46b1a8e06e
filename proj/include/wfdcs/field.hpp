#ifndef WFDCS_FIELD_HPP
#define WFDCS_FIELD_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wfdcs {

// Real scalar field on a uniform lattice. Row index i runs along y,
// column index j along x; value (i,j) lives at the cell center
// (origin_x + j*spacing, origin_y + i*spacing).
struct Field2D {
  int rows = 0;
  int cols = 0;
  double spacing = 0.0;  // meters per cell
  double origin_x = 0.0; // physical x of cell (0,0) center
  double origin_y = 0.0;
  std::vector<double> v; // row-major, rows*cols entries

  Field2D() = default;
  Field2D(int r, int c, double sp, double ox = 0.0, double oy = 0.0)
      : rows(r), cols(c), spacing(sp), origin_x(ox), origin_y(oy),
        v(static_cast<size_t>(r) * c, 0.0) {
    if (r < 1 || c < 1 || !(sp > 0.0))
      throw std::invalid_argument("Field2D: bad dimensions or spacing");
  }

  double &at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

  double x(int j) const { return origin_x + j * spacing; }
  double y(int i) const { return origin_y + i * spacing; }

  size_t size() const { return v.size(); }

  bool same_shape(const Field2D &o) const {
    return rows == o.rows && cols == o.cols &&
           std::abs(spacing - o.spacing) <= 1e-12 * spacing;
  }
};

// Square grid of N cells spanning [-half_span, half_span] in both axes,
// cell-centered (centers at -half_span + (k + 1/2) * spacing).
inline Field2D make_centered_grid(int n, double half_span) {
  if (n < 1 || !(half_span > 0.0))
    throw std::invalid_argument("make_centered_grid: bad arguments");
  const double sp = 2.0 * half_span / n;
  return Field2D(n, n, sp, -half_span + 0.5 * sp, -half_span + 0.5 * sp);
}

// Circular pupil: binary amplitude mask of diameter D on an N x N lattice
// spanning [-D, D]^2.
struct ApertureSpec {
  double diameter = 0.0; // pupil diameter D, meters
  int n = 0;             // grid cells per side
  Field2D amplitude;     // values in {0,1}

  bool inside(int i, int j) const { return amplitude.at(i, j) > 0.5; }
};

// The default lattice spans [-D, D]^2 with the pupil of radius D/2 in the
// middle; tight_grid shrinks the lattice to [-D/2, D/2]^2 so the pupil
// fills the inscribed circle.
inline ApertureSpec make_circular_aperture(int n, double diameter,
                                           bool tight_grid = false) {
  if (n < 2 || !(diameter > 0.0))
    throw std::invalid_argument("make_circular_aperture: need N >= 2, D > 0");
  ApertureSpec ap;
  ap.diameter = diameter;
  ap.n = n;
  ap.amplitude = make_centered_grid(n, tight_grid ? 0.5 * diameter : diameter);
  const double r2 = 0.25 * diameter * diameter;
  for (int i = 0; i < n; ++i) {
    const double yy = ap.amplitude.y(i);
    for (int j = 0; j < n; ++j) {
      const double xx = ap.amplitude.x(j);
      ap.amplitude.at(i, j) = (xx * xx + yy * yy <= r2) ? 1.0 : 0.0;
    }
  }
  return ap;
}

// Finite-difference gradient: central in the interior, one-sided at the
// borders. Returns (df/dx, df/dy) in field-units per meter.
inline std::pair<Field2D, Field2D> field_gradient(const Field2D &f) {
  if (f.rows < 3 || f.cols < 3)
    throw std::invalid_argument("field_gradient: grid too small");
  Field2D gx(f.rows, f.cols, f.spacing, f.origin_x, f.origin_y);
  Field2D gy(f.rows, f.cols, f.spacing, f.origin_x, f.origin_y);
  const double inv_h = 1.0 / f.spacing;
  const double inv_2h = 0.5 * inv_h;
  for (int i = 0; i < f.rows; ++i) {
    for (int j = 0; j < f.cols; ++j) {
      if (j == 0)
        gx.at(i, j) = (f.at(i, 1) - f.at(i, 0)) * inv_h;
      else if (j == f.cols - 1)
        gx.at(i, j) = (f.at(i, j) - f.at(i, j - 1)) * inv_h;
      else
        gx.at(i, j) = (f.at(i, j + 1) - f.at(i, j - 1)) * inv_2h;
      if (i == 0)
        gy.at(i, j) = (f.at(1, j) - f.at(0, j)) * inv_h;
      else if (i == f.rows - 1)
        gy.at(i, j) = (f.at(i, j) - f.at(i - 1, j)) * inv_h;
      else
        gy.at(i, j) = (f.at(i + 1, j) - f.at(i - 1, j)) * inv_2h;
    }
  }
  return {std::move(gx), std::move(gy)};
}

// --- binary field format ------------------------------------------------
// Header: magic "FLD2", u32 rows, u32 cols, f64 spacing, all little-endian,
// followed by row-major f64 values.

namespace detail {
inline void put_u32(std::ostream &os, uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x & 0xff),
                        static_cast<unsigned char>((x >> 8) & 0xff),
                        static_cast<unsigned char>((x >> 16) & 0xff),
                        static_cast<unsigned char>((x >> 24) & 0xff)};
  os.write(reinterpret_cast<const char *>(b), 4);
}
inline uint32_t get_u32(std::istream &is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char *>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}
inline void put_f64(std::ostream &os, double x) {
  uint64_t u;
  std::memcpy(&u, &x, 8);
  unsigned char b[8];
  for (int k = 0; k < 8; ++k)
    b[k] = static_cast<unsigned char>((u >> (8 * k)) & 0xff);
  os.write(reinterpret_cast<const char *>(b), 8);
}
inline double get_f64(std::istream &is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char *>(b), 8);
  uint64_t u = 0;
  for (int k = 0; k < 8; ++k)
    u |= static_cast<uint64_t>(b[k]) << (8 * k);
  double x;
  std::memcpy(&x, &u, 8);
  return x;
}
} // namespace detail

inline void write_field(std::ostream &os, const Field2D &f) {
  os.write("FLD2", 4);
  detail::put_u32(os, static_cast<uint32_t>(f.rows));
  detail::put_u32(os, static_cast<uint32_t>(f.cols));
  detail::put_f64(os, f.spacing);
  for (double x : f.v)
    detail::put_f64(os, x);
}

inline void write_field(const std::string &path, const Field2D &f) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("write_field: cannot open " + path);
  write_field(os, f);
  if (!os)
    throw std::runtime_error("write_field: write failed for " + path);
}

// Reads a field written by write_field. The origin is not stored; the
// loaded grid is re-centered on (0,0).
inline Field2D read_field(std::istream &is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FLD2", 4) != 0)
    throw std::runtime_error("read_field: bad magic");
  const uint32_t rows = detail::get_u32(is);
  const uint32_t cols = detail::get_u32(is);
  const double spacing = detail::get_f64(is);
  if (!is || rows == 0 || cols == 0 || !(spacing > 0.0))
    throw std::runtime_error("read_field: bad header");
  Field2D f(static_cast<int>(rows), static_cast<int>(cols), spacing);
  f.origin_x = -0.5 * spacing * (static_cast<int>(cols) - 1);
  f.origin_y = -0.5 * spacing * (static_cast<int>(rows) - 1);
  for (double &x : f.v)
    x = detail::get_f64(is);
  if (!is)
    throw std::runtime_error("read_field: truncated data");
  return f;
}

inline Field2D read_field(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("read_field: cannot open " + path);
  return read_field(is);
}

} // namespace wfdcs

#endif
