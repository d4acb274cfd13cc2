#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "psfr/error.hpp"

namespace psfr {

// Dense row-major single-channel plane.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> px;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), px(static_cast<std::size_t>(w) * h, fill) {}
  Image(int w, int h, std::vector<T> data) : width(w), height(h), px(std::move(data)) {
    require(px.size() == static_cast<std::size_t>(w) * h, ErrorCode::InvalidArgument,
            "plane size does not match dimensions");
  }

  bool empty() const { return px.empty(); }
  std::size_t size() const { return px.size(); }

  T& at(int x, int y) { return px[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return px[static_cast<std::size_t>(y) * width + x]; }

  // Border-replicating read.
  const T& clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
  }

  std::span<T> row(int y) { return {px.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)}; }
  std::span<const T> row(int y) const {
    return {px.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }

  bool operator==(const Image&) const = default;
};

using GrayImage = Image<std::uint8_t>;
using FloatImage = Image<float>;

template <typename Out, typename In>
Image<Out> convert(const Image<In>& src) {
  Image<Out> out(src.width, src.height);
  std::transform(src.px.begin(), src.px.end(), out.px.begin(), [](In v) { return static_cast<Out>(v); });
  return out;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

inline double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace psfr
