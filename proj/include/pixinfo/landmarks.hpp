#pragma once

#include <cmath>
#include <vector>

#include "pixinfo/imaging.hpp"

namespace pixinfo {

/// Sub-pixel image coordinate.
struct Point2 {
  double row = 0.0;
  double col = 0.0;

  Pixel rounded() const {
    return {static_cast<int>(std::lround(row)), static_cast<int>(std::lround(col))};
  }

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 to_point(Pixel p) { return {static_cast<double>(p.row), static_cast<double>(p.col)}; }

/// Ordered landmarks; index l is landmark identity.
struct LandmarkSet {
  std::vector<Point2> points;
  double spacing = 1.0;

  std::size_t size() const noexcept { return points.size(); }
};

}  // namespace pixinfo
