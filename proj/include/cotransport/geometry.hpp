/*
 * Copyright 2026 The Cotransport Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace cotransport {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Planar pose. Heading is kept in (-pi, pi].
struct Pose2D {
  Vec2 position{Vec2::Zero()};
  double heading{0.0};

  Pose2D() = default;
  Pose2D(const Vec2& p, double h);
  Pose2D(double x, double y, double h) : Pose2D(Vec2(x, y), h) {}

  /// Maps a point expressed in this frame into the parent frame.
  Vec2 transform(const Vec2& local) const;
  /// Composition this ∘ other.
  Pose2D compose(const Pose2D& other) const;
  Vec2 direction() const;
};

/// Spatial pose; the quaternion is normalized on construction.
struct PoseSE3 {
  Vec3 position{Vec3::Zero()};
  Eigen::Quaterniond orientation{Eigen::Quaterniond::Identity()};

  PoseSE3() = default;
  PoseSE3(const Vec3& p, const Eigen::Quaterniond& q);
  static PoseSE3 from_isometry(const Eigen::Isometry3d& iso);
  Eigen::Isometry3d isometry() const;
};

/// Closed simple-or-not polygon; vertex order is preserved as given.
class Polygon {
 public:
  /// Throws std::invalid_argument on fewer than 3 vertices, non-finite
  /// coordinates, or two identical consecutive vertices (wrapping included).
  explicit Polygon(std::vector<Vec2> vertices);

  /// Padded vertex lists for degenerate point clusters. Only finiteness and the
  /// 3-vertex minimum are enforced.
  static Polygon degenerate(std::vector<Vec2> vertices);

  static Polygon rectangle(const Pose2D& center, double length, double width);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }

  /// Signed shoelace area (positive for counter-clockwise order).
  double signed_area() const;
  double area() const;
  Vec2 centroid() const;
  /// Closed-set containment: points on an edge count as inside.
  bool contains(const Vec2& p) const;
  Polygon transformed(const Pose2D& pose) const;

 private:
  struct Unchecked {};
  Polygon(std::vector<Vec2> vertices, Unchecked);
  std::vector<Vec2> vertices_;
};

/// Wraps to (-pi, pi]. Throws std::invalid_argument for non-finite input.
double wrap_angle(double a);

struct MinPair {
  double distance;
  Vec2 a;
  Vec2 b;
  std::size_t index_a;
  std::size_t index_b;
};

/// Closest point pair between two point sets. Ties resolve to the lowest
/// (index in a, index in b) in lexicographic order.
MinPair point_set_min_pair(std::span<const Vec2> a, std::span<const Vec2> b);

struct Segment {
  Vec2 p;
  Vec2 q;
};

/// Smallest t >= 0 with origin + t * direction on the segment, if any.
/// Collinear overlaps report the nearest overlapping point.
std::optional<double> segment_ray_intersection(const Vec2& origin, const Vec2& direction,
                                               const Segment& seg);

/// Closed-set segment intersection (touching endpoints and collinear overlap count).
bool segments_intersect(const Segment& s1, const Segment& s2);

/// Closed-set polygon overlap test: edge contact counts as intersection.
bool polygons_intersect(const Polygon& a, const Polygon& b);

double cross(const Vec2& a, const Vec2& b);

}  // namespace cotransport
