/* Copyright 2026 The mmpred Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Plane geometry used by scene normalization, map cropping and region
// partitioning: rigid frames, segment/box clipping, convex hulls.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "mmp/common.hpp"

namespace mmp {

inline Eigen::Matrix2d rotation2d(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// World-to-local rigid transform: local = R(rotation) * (world - origin).
struct RigidFrame {
  Vec2 origin = Vec2::Zero();
  double rotation = 0.0;

  Vec2 to_local(const Vec2& p) const {
    return rotation2d(rotation) * (p - origin);
  }
  Vec2 to_world(const Vec2& q) const {
    return rotation2d(-rotation) * q + origin;
  }
  // Row-per-point variants.
  Points to_local(const Points& p) const {
    return (p.rowwise() - origin.transpose()) *
           rotation2d(rotation).transpose();
  }
  Points to_world(const Points& q) const {
    return (q * rotation2d(-rotation).transpose()).rowwise() +
           origin.transpose();
  }
};

// Frame equivalent to applying `first` then `second`.
inline RigidFrame compose(const RigidFrame& first, const RigidFrame& second) {
  RigidFrame f;
  f.rotation = first.rotation + second.rotation;
  f.origin = first.to_world(second.origin);
  return f;
}

// Rotation that maps the direction `heading` onto +y.
inline double heading_to_rotation(const Vec2& heading) {
  return M_PI / 2.0 - std::atan2(heading.y(), heading.x());
}

// Liang-Barsky clip of segment [a,b] to the box [-hx,hx] x [-hy,hy].
// Returns the clipped endpoints, or nothing if the segment misses the box.
inline std::optional<std::pair<Vec2, Vec2>> clip_segment_to_box(
    const Vec2& a, const Vec2& b, double hx, double hy) {
  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x() + hx, hx - a.x(), a.y() + hy, hy - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      if (r > t1) return std::nullopt;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return std::nullopt;
      t1 = std::min(t1, r);
    }
  }
  if (t0 > t1) return std::nullopt;
  const Vec2 d(dx, dy);
  return std::make_pair(Vec2(a + t0 * d), Vec2(a + t1 * d));
}

inline double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Convex hull (Andrew monotone chain), counter-clockwise, strict turns.
// Degenerate inputs (point, segment, collinear) return the extreme points.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) {
                          return a.x() == b.x() && a.y() == b.y();
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<Vec2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Point-in-convex-polygon test for a counter-clockwise hull; boundary counts
// as inside (tolerance on the cross products). Degenerate hulls accept only
// points within tol of the point/segment.
inline bool point_in_convex_polygon(const Vec2& p, const std::vector<Vec2>& hull,
                                    double tol = 1e-9) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return (p - hull[0]).norm() <= tol;
  if (hull.size() == 2) {
    const Vec2 d = hull[1] - hull[0];
    const double len2 = d.squaredNorm();
    const double t = std::clamp((p - hull[0]).dot(d) / len2, 0.0, 1.0);
    return (p - (hull[0] + t * d)).norm() <= tol;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    if (cross2(a, b, p) < -tol) return false;
  }
  return true;
}

}  // namespace mmp
