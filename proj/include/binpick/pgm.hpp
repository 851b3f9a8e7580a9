#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "binpick/errors.hpp"
#include "binpick/grid.hpp"

namespace binpick::pgm {

// Binary (P5) greymaps. Samples wider than 8 bits are big-endian, as the
// format requires.

inline void write(std::ostream& os, const Grid<std::uint16_t>& g, std::uint16_t maxval = 65535) {
  os << "P5\n" << g.width() << ' ' << g.height() << '\n' << maxval << '\n';
  if (maxval < 256) {
    for (std::uint16_t v : g.data()) os.put(static_cast<char>(v > maxval ? maxval : v));
  } else {
    for (std::uint16_t v : g.data()) {
      os.put(static_cast<char>(v >> 8));
      os.put(static_cast<char>(v & 0xFF));
    }
  }
  if (!os) throw FormatError("failed writing PGM data");
}

inline void write_file(const std::string& path, const Grid<std::uint16_t>& g, std::uint16_t maxval = 65535) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write(os, g, maxval);
}

namespace detail {
inline std::string token(std::istream& is) {
  std::string t;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!t.empty()) break;
      continue;
    }
    t.push_back(static_cast<char>(c));
  }
  return t;
}

inline int number(std::istream& is, const char* what) {
  const std::string t = token(is);
  try {
    std::size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used != t.size() || v < 0) throw FormatError("");
    return v;
  } catch (...) {
    throw FormatError(std::string("bad PGM ") + what + " '" + t + "'");
  }
}
}  // namespace detail

/// Reads 8- or 16-bit P5 data into 16-bit samples.
inline Grid<std::uint16_t> read(std::istream& is) {
  if (detail::token(is) != "P5") throw FormatError("not a binary PGM (P5)");
  const int w = detail::number(is, "width");
  const int h = detail::number(is, "height");
  const int maxval = detail::number(is, "maxval");
  if (maxval <= 0 || maxval > 65535) throw FormatError("PGM maxval out of range");
  Grid<std::uint16_t> g(w, h);
  for (auto& v : g.data()) {
    int hi = is.get();
    if (maxval < 256) {
      if (hi == EOF) throw FormatError("truncated PGM data");
      v = static_cast<std::uint16_t>(hi);
    } else {
      const int lo = is.get();
      if (hi == EOF || lo == EOF) throw FormatError("truncated PGM data");
      v = static_cast<std::uint16_t>((hi << 8) | lo);
    }
  }
  return g;
}

inline Grid<std::uint16_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read(is);
}

}  // namespace binpick::pgm
