#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace crowdnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_in, double y_in) : x(x_in), y(y_in) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  constexpr double squared_norm() const { return x * x + y * y; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline Vec2 unit_from_angle(double angle) { return {std::cos(angle), std::sin(angle)}; }

inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

struct Segment {
  Vec2 a;
  Vec2 b;

  double length() const { return (b - a).norm(); }
};

// Cheap rejection: true when p is farther than `reach` from the segment's bounding box.
inline bool outside_segment_box(const Segment& s, const Vec2& p, double reach) {
  return p.x < std::min(s.a.x, s.b.x) - reach || p.x > std::max(s.a.x, s.b.x) + reach ||
         p.y < std::min(s.a.y, s.b.y) - reach || p.y > std::max(s.a.y, s.b.y) + reach;
}

inline Vec2 closest_point_on_segment(const Segment& s, const Vec2& p) {
  const Vec2 ab = s.b - s.a;
  const double len2 = ab.squared_norm();
  if (len2 == 0.0) return s.a;
  double t = (p - s.a).dot(ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return s.a + ab * t;
}

inline double distance_to_segment(const Segment& s, const Vec2& p) {
  return (p - closest_point_on_segment(s, p)).norm();
}

// Ray parameter t >= 0 of the first hit of origin + t*dir (dir unit length) with a
// segment; parallel overlap is treated as a miss.
inline std::optional<double> ray_segment(const Vec2& origin, const Vec2& dir, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double denom = dir.cross(e);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const Vec2 w = s.a - origin;
  const double t = w.cross(e) / denom;
  const double u = w.cross(dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

// First non-negative hit of a ray with a circle. An origin inside the circle
// returns 0.
inline std::optional<double> ray_circle(const Vec2& origin, const Vec2& dir, const Vec2& center,
                                        double radius) {
  const Vec2 oc = origin - center;
  const double c = oc.squared_norm() - radius * radius;
  if (c <= 0.0) return 0.0;
  const double b = oc.dot(dir);
  if (b > 0.0) return std::nullopt;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  return -b - std::sqrt(disc);
}

}  // namespace crowdnav
