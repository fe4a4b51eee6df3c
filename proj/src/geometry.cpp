#include "rsplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rsplan {

using nlohmann::json;

Environment::Environment(std::string name, Rect bounds, std::vector<Rect> obstacles)
    : name_(std::move(name)), bounds_(bounds), obstacles_(std::move(obstacles)) {
  if (bounds_.width() <= 0.0 || bounds_.height() <= 0.0) {
    throw ValidationError("bounds: width and height must be positive");
  }
  for (std::size_t i = 0; i < obstacles_.size(); ++i) {
    const Rect& r = obstacles_[i];
    const std::string field = "obstacles[" + std::to_string(i) + "]";
    if (r.width() <= 0.0 || r.height() <= 0.0) {
      throw ValidationError(field + ": degenerate rectangle (area must be > 0)");
    }
    if (r.xmin < bounds_.xmin || r.xmax > bounds_.xmax || r.ymin < bounds_.ymin ||
        r.ymax > bounds_.ymax) {
      throw ValidationError(field + ": obstacle extends outside bounds");
    }
  }
}

bool Environment::point_in_collision(const Point& q) const {
  if (q.x <= bounds_.xmin || q.x >= bounds_.xmax || q.y <= bounds_.ymin ||
      q.y >= bounds_.ymax) {
    return true;
  }
  for (const Rect& r : obstacles_) {
    if (r.contains(q)) return true;
  }
  return false;
}

SegmentQuery Environment::segment_in_collision(const Point& a, const Point& b,
                                               double resolution) const {
  if (resolution <= 0.0) {
    throw ValidationError("resolution must be > 0");
  }
  SegmentQuery out;
  const double len = distance(a, b);
  const std::uint64_t intervals =
      len > 0.0 ? static_cast<std::uint64_t>(std::ceil(len / resolution)) : 0;
  for (std::uint64_t k = 0; k <= intervals; ++k) {
    const double t = intervals == 0 ? 0.0 : static_cast<double>(k) / intervals;
    const Point p{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    ++out.points_tested;
    if (point_in_collision(p)) {
      out.hit = true;
      return out;
    }
  }
  return out;
}

double Environment::distance_to_obstacles(const Point& q) const {
  if (point_in_collision(q)) return 0.0;
  // Inside the bounds and outside all obstacles here.
  double d = std::min({q.x - bounds_.xmin, bounds_.xmax - q.x, q.y - bounds_.ymin,
                       bounds_.ymax - q.y});
  for (const Rect& r : obstacles_) {
    d = std::min(d, r.distance_to(q));
  }
  return d;
}

std::string Environment::to_json_string() const {
  json j;
  j["name"] = name_;
  j["bounds"] = {bounds_.xmin, bounds_.ymin, bounds_.xmax, bounds_.ymax};
  json obs = json::array();
  for (const Rect& r : obstacles_) {
    obs.push_back({r.xmin, r.ymin, r.width(), r.height()});
  }
  j["obstacles"] = obs;
  return j.dump(2);
}

namespace {

Rect rect_from_bounds_array(const json& arr, const std::string& field) {
  if (!arr.is_array() || arr.size() != 4) {
    throw ValidationError(field + ": expected [xmin, ymin, xmax, ymax]");
  }
  for (const auto& v : arr) {
    if (!v.is_number()) throw ValidationError(field + ": entries must be numbers");
  }
  return Rect{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
              arr[3].get<double>()};
}

}  // namespace

Environment Environment::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("environment JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("environment: expected a JSON object");
  if (!j.contains("name") || !j["name"].is_string()) {
    throw ValidationError("name: missing or not a string");
  }
  if (!j.contains("bounds")) throw ValidationError("bounds: missing");
  const Rect bounds = rect_from_bounds_array(j["bounds"], "bounds");
  std::vector<Rect> obstacles;
  if (j.contains("obstacles")) {
    if (!j["obstacles"].is_array()) throw ValidationError("obstacles: expected an array");
    std::size_t i = 0;
    for (const auto& o : j["obstacles"]) {
      const std::string field = "obstacles[" + std::to_string(i) + "]";
      if (!o.is_array() || o.size() != 4) {
        throw ValidationError(field + ": expected [x, y, w, h]");
      }
      obstacles.push_back(Rect::from_xywh(o[0].get<double>(), o[1].get<double>(),
                                          o[2].get<double>(), o[3].get<double>()));
      ++i;
    }
  }
  return Environment(j["name"].get<std::string>(), bounds, std::move(obstacles));
}

Environment Environment::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open environment file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_string(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void Environment::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write environment file: " + path);
  out << to_json_string() << "\n";
}

FlytrapParams FlytrapParams::train_default() { return FlytrapParams{}; }

FlytrapParams FlytrapParams::test_default() {
  FlytrapParams p;
  p.arena_side = 200.0;
  p.trap_side = 80.0;
  p.trap_center = Point{100.0, 100.0};
  return p;
}

FlytrapParams::Side side_from_string(const std::string& s) {
  if (s == "left") return FlytrapParams::Side::left;
  if (s == "right") return FlytrapParams::Side::right;
  if (s == "top") return FlytrapParams::Side::top;
  if (s == "bottom") return FlytrapParams::Side::bottom;
  throw ValidationError("tunnel_side: expected left|right|top|bottom, got '" + s + "'");
}

std::string side_to_string(FlytrapParams::Side s) {
  switch (s) {
    case FlytrapParams::Side::left: return "left";
    case FlytrapParams::Side::right: return "right";
    case FlytrapParams::Side::top: return "top";
    case FlytrapParams::Side::bottom: return "bottom";
  }
  return "left";
}

Environment make_flytrap(const FlytrapParams& p) {
  const double s = p.trap_side, w = p.wall_thickness, t = p.tunnel_width;
  if (w <= 0.0) throw ValidationError("wall_thickness must be > 0");
  if (t <= 0.0) throw ValidationError("tunnel_width must be > 0");
  if (s <= 2.0 * w) throw ValidationError("trap_side must exceed 2*wall_thickness");
  if (t >= s - 2.0 * w) {
    throw ValidationError("tunnel_width must be smaller than trap_side - 2*wall_thickness");
  }
  const double x0 = p.trap_center.x - s / 2.0, x1 = p.trap_center.x + s / 2.0;
  const double y0 = p.trap_center.y - s / 2.0, y1 = p.trap_center.y + s / 2.0;
  if (x0 <= 0.0 || y0 <= 0.0 || x1 >= p.arena_side || y1 >= p.arena_side) {
    throw ValidationError("trap must lie strictly inside the arena");
  }

  // Four wall rectangles; the tunnel-side wall is shortened by tunnel_width.
  // Horizontal walls span the full outer width, vertical walls sit between them.
  using Side = FlytrapParams::Side;
  Rect bottom{x0, y0, x1, y0 + w};
  Rect top{x0, y1 - w, x1, y1};
  Rect left{x0, y0 + w, x0 + w, y1 - w};
  Rect right{x1 - w, y0 + w, x1, y1 - w};
  switch (p.tunnel_side) {
    case Side::left: left.ymax -= t; break;
    case Side::right: right.ymax -= t; break;
    case Side::top: top.xmax -= t; break;
    case Side::bottom: bottom.xmax -= t; break;
  }

  return Environment("flytrap", Rect{0.0, 0.0, p.arena_side, p.arena_side},
                     {bottom, top, left, right});
}

}  // namespace rsplan
