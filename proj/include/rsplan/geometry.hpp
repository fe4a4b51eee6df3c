#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsplan {

/// Raised when a config file, checkpoint, or parameter set fails validation.
/// what() names the offending field where one can be identified.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Axis-aligned rectangle, treated as the closed region [xmin,xmax]x[ymin,ymax].
struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  static Rect from_xywh(double x, double y, double w, double h) {
    return Rect{x, y, x + w, y + h};
  }

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }

  bool contains(const Point& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }

  /// Euclidean distance from p to this rectangle; 0 on the boundary or inside.
  double distance_to(const Point& p) const {
    double dx = std::max({xmin - p.x, p.x - xmax, 0.0});
    double dy = std::max({ymin - p.y, p.y - ymax, 0.0});
    return std::hypot(dx, dy);
  }
};

struct SegmentQuery {
  bool hit = false;
  std::uint64_t points_tested = 0;
};

/// A 2D world: rectangular bounds plus axis-aligned rectangular obstacles.
/// Immutable after construction; all queries are const and thread-safe.
class Environment {
public:
  Environment(std::string name, Rect bounds, std::vector<Rect> obstacles);

  const std::string& name() const { return name_; }
  const Rect& bounds() const { return bounds_; }
  const std::vector<Rect>& obstacles() const { return obstacles_; }

  /// True iff q is outside the bounds or inside any obstacle. Boundary
  /// points count as collision.
  bool point_in_collision(const Point& q) const;

  /// Tests points along [a,b] at spacing <= resolution, endpoints included,
  /// short-circuiting on the first colliding point. points_tested reports
  /// how many point queries were issued so the caller can account for them.
  SegmentQuery segment_in_collision(const Point& a, const Point& b,
                                    double resolution) const;

  /// Distance from q to the nearest obstacle boundary or to the bounds
  /// boundary, whichever is closer; 0 if q is in collision.
  double distance_to_obstacles(const Point& q) const;

  std::string to_json_string() const;
  static Environment from_json_string(const std::string& text);
  static Environment load(const std::string& path);
  void save(const std::string& path) const;

private:
  std::string name_;
  Rect bounds_;
  std::vector<Rect> obstacles_;
};

struct FlytrapParams {
  double arena_side = 100.0;
  double trap_side = 40.0;
  double wall_thickness = 2.0;
  double tunnel_width = 4.0;
  enum class Side { left, right, top, bottom };
  Side tunnel_side = Side::left;
  Point trap_center{50.0, 50.0};

  static FlytrapParams train_default();
  /// Held-out variant: everything scaled 2x except the wall and tunnel.
  static FlytrapParams test_default();
};

FlytrapParams::Side side_from_string(const std::string& s);
std::string side_to_string(FlytrapParams::Side s);

/// Builds an arena with a hollow square trap reachable only through a single
/// gap of tunnel_width on tunnel_side. Throws ValidationError on parameter
/// sets that would produce degenerate walls or a trap outside the arena.
Environment make_flytrap(const FlytrapParams& p);

}  // namespace rsplan
