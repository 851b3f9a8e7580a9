#pragma once

#include <stdexcept>
#include <string>

namespace binpick {

/// Invalid argument: out-of-range scale, mismatched raster dims, bad config values.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A piece footprint that does not touch the tray interior at all.
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mask too small or degenerate to carry a best-fit ellipse, or an ellipse
/// that has no pixel inside the raster.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed files: PGM headers, JSON documents, manifests.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace binpick
