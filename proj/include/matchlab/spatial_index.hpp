#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "matchlab/geometry.hpp"

namespace matchlab {

// Uniform bucket grid over a point set for k-nearest-neighbour queries.
class GridIndex {
 public:
  explicit GridIndex(std::span<const Point> points, double points_per_cell = 2.0)
      : points_(points.begin(), points.end()) {
    if (points_.empty()) return;
    bounds_ = {points_.front(), points_.front()};
    for (Point p : points_) {
      bounds_.lo.x = std::min(bounds_.lo.x, p.x);
      bounds_.lo.y = std::min(bounds_.lo.y, p.y);
      bounds_.hi.x = std::max(bounds_.hi.x, p.x);
      bounds_.hi.y = std::max(bounds_.hi.y, p.y);
    }
    const double w = std::max(bounds_.width(), 1e-12);
    const double h = std::max(bounds_.height(), 1e-12);
    const double cells = std::max(1.0, static_cast<double>(points_.size()) / points_per_cell);
    cell_ = std::sqrt(w * h / cells);
    nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
    start_.assign(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
    for (Point p : points_) ++start_[static_cast<std::size_t>(cell_of(p)) + 1];
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    order_.resize(points_.size());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      order_[static_cast<std::size_t>(fill[static_cast<std::size_t>(cell_of(points_[i]))]++)] = static_cast<int>(i);
    }
  }

  // Indices of the k nearest points to q (fewer if the set is smaller),
  // nearest first, ties by index.
  std::vector<int> nearest(Point q, std::size_t k) const {
    std::vector<std::pair<double, int>> found;
    k = std::min(k, points_.size());
    if (k == 0) return {};
    const int cx = std::clamp(static_cast<int>((q.x - bounds_.lo.x) / cell_), 0, nx_ - 1);
    const int cy = std::clamp(static_cast<int>((q.y - bounds_.lo.y) / cell_), 0, ny_ - 1);
    for (int ring = 0;; ++ring) {
      for (int gx = cx - ring; gx <= cx + ring; ++gx) {
        for (int gy = cy - ring; gy <= cy + ring; ++gy) {
          if (std::max(std::abs(gx - cx), std::abs(gy - cy)) != ring) continue;
          if (gx < 0 || gy < 0 || gx >= nx_ || gy >= ny_) continue;
          const auto c = static_cast<std::size_t>(gy * nx_ + gx);
          for (int s = start_[c]; s < start_[c + 1]; ++s) {
            const int i = order_[static_cast<std::size_t>(s)];
            found.emplace_back(squared_norm(points_[static_cast<std::size_t>(i)] - q), i);
          }
        }
      }
      // Every point outside the scanned rings is farther than ring * cell_
      // from q, so the k best are final once they are all within that radius.
      if (found.size() >= k) {
        std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k - 1), found.end());
        const double r = ring * cell_;
        if (found[k - 1].first <= r * r) break;
      }
      if (ring > nx_ + ny_) break;
    }
    std::sort(found.begin(), found.end());
    found.resize(k);
    std::vector<int> out;
    out.reserve(k);
    for (const auto& f : found) out.push_back(f.second);
    return out;
  }

 private:
  int cell_of(Point p) const {
    const int gx = std::clamp(static_cast<int>((p.x - bounds_.lo.x) / cell_), 0, nx_ - 1);
    const int gy = std::clamp(static_cast<int>((p.y - bounds_.lo.y) / cell_), 0, ny_ - 1);
    return gy * nx_ + gx;
  }

  std::vector<Point> points_;
  Box bounds_{};
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<int> start_;
  std::vector<int> order_;
};

}  // namespace matchlab
