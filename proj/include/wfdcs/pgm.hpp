#ifndef WFDCS_PGM_HPP
#define WFDCS_PGM_HPP

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "wfdcs/field.hpp"

namespace wfdcs {

// Binary PGM (P5), 8- or 16-bit. Fields are interpreted on the [0,1]
// scale; 16-bit samples are big-endian per the format.

inline void write_pgm(const std::string &path, const Field2D &f,
                      int maxval = 255) {
  if (maxval != 255 && maxval != 65535)
    throw std::invalid_argument("write_pgm: maxval must be 255 or 65535");
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("write_pgm: cannot open " + path);
  os << "P5\n" << f.cols << ' ' << f.rows << '\n' << maxval << '\n';
  for (double v : f.v) {
    long q = std::lround(std::min(1.0, std::max(0.0, v)) * maxval);
    if (maxval == 255) {
      const unsigned char b = static_cast<unsigned char>(q);
      os.write(reinterpret_cast<const char *>(&b), 1);
    } else {
      const unsigned char b[2] = {static_cast<unsigned char>(q >> 8),
                                  static_cast<unsigned char>(q & 0xff)};
      os.write(reinterpret_cast<const char *>(b), 2);
    }
  }
  if (!os)
    throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace detail {
inline int pgm_token(std::istream &is) {
  // skips whitespace and '#' comments, then parses an integer
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n')
        c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c))
    throw std::runtime_error("read_pgm: malformed header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = is.get();
  }
  return value;
}
} // namespace detail

inline Field2D read_pgm(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("read_pgm: cannot open " + path);
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || m1 != '5')
    throw std::runtime_error("read_pgm: not a binary PGM (P5) file");
  const int cols = detail::pgm_token(is);
  const int rows = detail::pgm_token(is);
  const int maxval = detail::pgm_token(is);
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 65535)
    throw std::runtime_error("read_pgm: bad dimensions");
  Field2D f(rows, cols, 1.0);
  const double inv = 1.0 / maxval;
  for (double &v : f.v) {
    if (maxval < 256) {
      const int b = is.get();
      if (b == EOF)
        throw std::runtime_error("read_pgm: truncated data");
      v = b * inv;
    } else {
      const int hi = is.get();
      const int lo = is.get();
      if (hi == EOF || lo == EOF)
        throw std::runtime_error("read_pgm: truncated data");
      v = ((hi << 8) | lo) * inv;
    }
  }
  return f;
}

// Maps a non-negative field onto [0,1] through log10 compression spanning
// the given number of decades below the peak. Used for PSF previews.
inline Field2D log_stretch(const Field2D &f, double decades = 4.0) {
  Field2D out = f;
  double peak = 0.0;
  for (double v : f.v)
    peak = std::max(peak, v);
  if (peak <= 0.0)
    return out;
  const double floor_v = peak * std::pow(10.0, -decades);
  for (double &v : out.v) {
    const double x = std::max(v, floor_v);
    v = 1.0 + std::log10(x / peak) / decades;
  }
  return out;
}

} // namespace wfdcs

#endif
