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

#include "cotransport/geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cotransport {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kParamTol = 1e-12;

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

bool on_segment(const Vec2& p, const Segment& s) {
  const Vec2 d = s.q - s.p;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - s.p).norm() <= kParamTol;
  const double scale = std::max(1.0, std::sqrt(len2));
  if (std::abs(cross(d, p - s.p)) > kParamTol * scale * scale) return false;
  const double u = d.dot(p - s.p) / len2;
  return u >= -kParamTol && u <= 1.0 + kParamTol;
}

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  const double scale = std::max({1.0, (b - a).squaredNorm(), (c - a).squaredNorm()});
  if (std::abs(v) <= kParamTol * scale) return 0;
  return v > 0 ? 1 : -1;
}

}  // namespace

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double wrap_angle(double a) {
  if (!std::isfinite(a)) throw std::invalid_argument("wrap_angle: non-finite angle");
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

Pose2D::Pose2D(const Vec2& p, double h) : position(p), heading(wrap_angle(h)) {}

Vec2 Pose2D::direction() const { return {std::cos(heading), std::sin(heading)}; }

Vec2 Pose2D::transform(const Vec2& local) const {
  const double c = std::cos(heading), s = std::sin(heading);
  return position + Vec2(c * local.x() - s * local.y(), s * local.x() + c * local.y());
}

Pose2D Pose2D::compose(const Pose2D& other) const {
  return {transform(other.position), heading + other.heading};
}

PoseSE3::PoseSE3(const Vec3& p, const Eigen::Quaterniond& q) : position(p), orientation(q) {
  const double n = orientation.norm();
  if (!(n > 0.0) || !position.allFinite())
    throw std::invalid_argument("PoseSE3: invalid position or orientation");
  orientation.normalize();
}

PoseSE3 PoseSE3::from_isometry(const Eigen::Isometry3d& iso) {
  return {iso.translation(), Eigen::Quaterniond(iso.rotation())};
}

Eigen::Isometry3d PoseSE3::isometry() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = orientation.toRotationMatrix();
  iso.translation() = position;
  return iso;
}

Polygon::Polygon(std::vector<Vec2> vertices, Unchecked) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) throw std::invalid_argument("Polygon: fewer than 3 vertices");
  for (const auto& v : vertices_)
    if (!finite(v)) throw std::invalid_argument("Polygon: non-finite vertex");
}

Polygon::Polygon(std::vector<Vec2> vertices) : Polygon(std::move(vertices), Unchecked{}) {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (vertices_[i] == vertices_[(i + 1) % vertices_.size()])
      throw std::invalid_argument("Polygon: identical consecutive vertices");
  }
}

Polygon Polygon::degenerate(std::vector<Vec2> vertices) {
  return Polygon(std::move(vertices), Unchecked{});
}

Polygon Polygon::rectangle(const Pose2D& center, double length, double width) {
  if (!(length > 0.0) || !(width > 0.0))
    throw std::invalid_argument("Polygon::rectangle: non-positive dimension");
  const double hl = 0.5 * length, hw = 0.5 * width;
  return Polygon({center.transform({hl, hw}), center.transform({-hl, hw}),
                  center.transform({-hl, -hw}), center.transform({hl, -hw})});
}

double Polygon::signed_area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i)
    a += cross(vertices_[i], vertices_[(i + 1) % vertices_.size()]);
  return 0.5 * a;
}

double Polygon::area() const { return std::abs(signed_area()); }

Vec2 Polygon::centroid() const {
  const double a = signed_area();
  if (std::abs(a) < 1e-12) {
    Vec2 sum = Vec2::Zero();
    for (const auto& v : vertices_) sum += v;
    return sum / static_cast<double>(vertices_.size());
  }
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2& p = vertices_[i];
    const Vec2& q = vertices_[(i + 1) % vertices_.size()];
    c += (p + q) * cross(p, q);
  }
  return c / (6.0 * a);
}

bool Polygon::contains(const Vec2& p) const {
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i)
    if (on_segment(p, {vertices_[i], vertices_[(i + 1) % n]})) return true;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

Polygon Polygon::transformed(const Pose2D& pose) const {
  std::vector<Vec2> out;
  out.reserve(vertices_.size());
  for (const auto& v : vertices_) out.push_back(pose.transform(v));
  return Polygon(std::move(out), Unchecked{});
}

MinPair point_set_min_pair(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("point_set_min_pair: empty point set");
  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d2 = (a[i] - b[j]).squaredNorm();
      if (d2 < best) {
        best = d2;
        bi = i;
        bj = j;
      }
    }
  }
  return {std::sqrt(best), a[bi], b[bj], bi, bj};
}

std::optional<double> segment_ray_intersection(const Vec2& origin, const Vec2& direction,
                                               const Segment& seg) {
  if (std::abs(direction.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("segment_ray_intersection: direction is not unit length");
  const Vec2 s = seg.q - seg.p;
  const double len = s.norm();
  if (len == 0.0) throw std::invalid_argument("segment_ray_intersection: degenerate segment");

  const Vec2 w = seg.p - origin;
  const double denom = cross(direction, s);
  if (std::abs(denom) > 1e-14 * len) {
    const double t = cross(w, s) / denom;
    const double u = cross(w, direction) / denom;
    if (t >= 0.0 && u >= -kParamTol && u <= 1.0 + kParamTol) return t;
    return std::nullopt;
  }
  // Parallel: only a collinear overlap can hit.
  if (std::abs(cross(w, direction)) > kParamTol * std::max(1.0, w.norm())) return std::nullopt;
  const double t0 = w.dot(direction);
  const double t1 = (seg.q - origin).dot(direction);
  if (std::max(t0, t1) < 0.0) return std::nullopt;
  if (std::min(t0, t1) <= 0.0) return 0.0;
  return std::min(t0, t1);
}

bool segments_intersect(const Segment& s1, const Segment& s2) {
  const int o1 = orientation(s1.p, s1.q, s2.p);
  const int o2 = orientation(s1.p, s1.q, s2.q);
  const int o3 = orientation(s2.p, s2.q, s1.p);
  const int o4 = orientation(s2.p, s2.q, s1.q);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  return (o1 == 0 && on_segment(s2.p, s1)) || (o2 == 0 && on_segment(s2.q, s1)) ||
         (o3 == 0 && on_segment(s1.p, s2)) || (o4 == 0 && on_segment(s1.q, s2));
}

bool polygons_intersect(const Polygon& a, const Polygon& b) {
  const auto& va = a.vertices();
  const auto& vb = b.vertices();
  for (std::size_t i = 0; i < va.size(); ++i) {
    const Segment ea{va[i], va[(i + 1) % va.size()]};
    for (std::size_t j = 0; j < vb.size(); ++j) {
      if (segments_intersect(ea, {vb[j], vb[(j + 1) % vb.size()]})) return true;
    }
  }
  return a.contains(vb.front()) || b.contains(va.front());
}

}  // namespace cotransport
