#include "crowdnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <tuple>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr int kWorldJsonVersion = 1;

// Closed segment / axis-aligned box test (Liang-Barsky clip).
bool segment_touches_box(const Segment& s, double xmin, double ymin, double xmax, double ymax) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double dx = s.b.x - s.a.x;
  const double dy = s.b.y - s.a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {s.a.x - xmin, xmax - s.a.x, s.a.y - ymin, ymax - s.a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
  }
  return t0 <= t1;
}

double octile(const GridCell& a, const GridCell& b) {
  const int dx = std::abs(a.ix - b.ix);
  const int dy = std::abs(a.iy - b.iy);
  return (std::max(dx, dy) - std::min(dx, dy)) + kSqrt2 * std::min(dx, dy);
}

double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

}  // namespace

void WorldParams::validate() const {
  if (!(width_min >= 2.0 && width_max <= 4.0 && width_min <= width_max)) {
    throw ConfigError("world width range must lie within [2.0, 4.0] m");
  }
  if (!(length_min >= 7.0 && length_min <= length_max)) {
    throw ConfigError("world length must be at least 7.0 m");
  }
  if (!(grid_resolution > 0.0 && grid_resolution <= 0.5)) {
    throw ConfigError("grid resolution must lie in (0, 0.5] m");
  }
  if (inset_rate < 0.0 || inset_depth_max < 0.0 || inset_depth_max > 0.5 ||
      inset_length_min <= 0.0 || inset_length_min > inset_length_max) {
    throw ConfigError("invalid wall inset parameters");
  }
  if (!(goal_distance > 0.0) || start_offset < 0.5 ||
      start_offset + goal_distance > length_min - 0.5) {
    throw ConfigError("start/goal placement does not fit the corridor length");
  }
  if (heading_jitter < 0.0) throw ConfigError("heading jitter must be non-negative");
}

bool CorridorWorld::disc_is_free(const Vec2& p, double radius) const {
  if (p.x < radius || p.x > length - radius || p.y < radius || p.y > width - radius) {
    return false;
  }
  for (const Inset& in : insets) {
    const double y0 = in.top ? width - in.depth : 0.0;
    const double y1 = in.top ? width : in.depth;
    const double cx = std::clamp(p.x, in.x0, in.x1);
    const double cy = std::clamp(p.y, y0, y1);
    if ((p - Vec2{cx, cy}).norm() < radius) return false;
  }
  return true;
}

nlohmann::json CorridorWorld::to_json() const {
  nlohmann::json j;
  j["version"] = kWorldJsonVersion;
  j["seed"] = seed;
  j["width"] = width;
  j["length"] = length;
  j["start"] = {start.x, start.y};
  j["start_heading"] = start_heading;
  j["goal"] = {goal.x, goal.y};
  j["free_area"] = free_area;
  j["insets"] = nlohmann::json::array();
  for (const Inset& in : insets) {
    j["insets"].push_back({{"x0", in.x0}, {"x1", in.x1}, {"depth", in.depth}, {"top", in.top}});
  }
  j["walls"] = nlohmann::json::array();
  for (const Segment& s : walls) j["walls"].push_back({s.a.x, s.a.y, s.b.x, s.b.y});
  return j;
}

CorridorWorld CorridorWorld::from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kWorldJsonVersion) {
    throw ConfigError("unsupported world document version");
  }
  CorridorWorld w;
  w.seed = j.at("seed").get<std::uint64_t>();
  w.width = j.at("width").get<double>();
  w.length = j.at("length").get<double>();
  w.start = {j.at("start")[0].get<double>(), j.at("start")[1].get<double>()};
  w.start_heading = j.at("start_heading").get<double>();
  w.goal = {j.at("goal")[0].get<double>(), j.at("goal")[1].get<double>()};
  w.free_area = j.at("free_area").get<double>();
  for (const auto& in : j.at("insets")) {
    w.insets.push_back({in.at("x0").get<double>(), in.at("x1").get<double>(),
                        in.at("depth").get<double>(), in.at("top").get<bool>()});
  }
  for (const auto& s : j.at("walls")) {
    w.walls.push_back({{s[0].get<double>(), s[1].get<double>()},
                       {s[2].get<double>(), s[3].get<double>()}});
  }
  return w;
}

CorridorWorld generate_corridor(std::uint64_t seed, const WorldParams& params) {
  params.validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  CorridorWorld w;
  w.seed = seed;
  w.width = uniform(params.width_min, params.width_max);
  w.length = uniform(params.length_min, params.length_max);

  const double W = w.width;
  const double L = w.length;
  w.walls = {
      {{0.0, 0.0}, {L, 0.0}},
      {{0.0, W}, {L, W}},
      {{0.0, 0.0}, {0.0, W}},
      {{L, 0.0}, {L, W}},
  };

  if (params.inset_rate > 0.0 && params.inset_depth_max > 0.0) {
    std::poisson_distribution<int> count_dist(params.inset_rate * L);
    for (bool top : {false, true}) {
      const int count = count_dist(rng);
      for (int i = 0; i < count; ++i) {
        const double len = uniform(params.inset_length_min, params.inset_length_max);
        const double x0 = uniform(0.0, std::max(0.0, L - len));
        const double depth = uniform(0.1 * params.inset_depth_max, params.inset_depth_max);
        const Inset cand{x0, x0 + len, depth, top};
        // Insets never overlap along the axis, on either side, so the free gap is at
        // least width - inset_depth_max.
        const bool clash = std::any_of(w.insets.begin(), w.insets.end(), [&](const Inset& o) {
          return cand.x0 < o.x1 && o.x0 < cand.x1;
        });
        if (!clash) w.insets.push_back(cand);
      }
    }
    std::sort(w.insets.begin(), w.insets.end(), [](const Inset& a, const Inset& b) {
      return std::tie(a.x0, a.top) < std::tie(b.x0, b.top);
    });
    for (const Inset& in : w.insets) {
      const double wall_y = in.top ? W : 0.0;
      const double face_y = in.top ? W - in.depth : in.depth;
      w.walls.push_back({{in.x0, wall_y}, {in.x0, face_y}});
      w.walls.push_back({{in.x0, face_y}, {in.x1, face_y}});
      w.walls.push_back({{in.x1, face_y}, {in.x1, wall_y}});
    }
  }

  w.start = {params.start_offset, W / 2.0};
  w.start_heading = uniform(-params.heading_jitter, params.heading_jitter);
  w.goal = {params.start_offset + params.goal_distance, W / 2.0};

  double inset_area = 0.0;
  for (const Inset& in : w.insets) inset_area += in.area();
  w.free_area = W * L - inset_area;
  return w;
}

OccupancyGrid::OccupancyGrid(int cols_in, int rows_in, double resolution_in, Vec2 origin_in)
    : resolution(resolution_in),
      origin(origin_in),
      cols(cols_in),
      rows(rows_in),
      cells(static_cast<std::size_t>(cols_in) * static_cast<std::size_t>(rows_in), 0) {}

GridCell OccupancyGrid::cell_of(const Vec2& p) const {
  return {static_cast<int>(std::floor((p.x - origin.x) / resolution)),
          static_cast<int>(std::floor((p.y - origin.y) / resolution))};
}

Vec2 OccupancyGrid::center_of(const GridCell& c) const {
  return {origin.x + (c.ix + 0.5) * resolution, origin.y + (c.iy + 0.5) * resolution};
}

OccupancyGrid OccupancyGrid::inflated(double radius) const {
  OccupancyGrid out = *this;
  if (radius <= 0.0) return out;
  const double r_cells = radius / resolution;
  const int n = static_cast<int>(std::ceil(r_cells));
  const double r2 = r_cells * r_cells + 1e-9;
  for (int iy = 0; iy < rows; ++iy) {
    for (int ix = 0; ix < cols; ++ix) {
      if (!occupied(ix, iy)) continue;
      for (int dy = -n; dy <= n; ++dy) {
        for (int dx = -n; dx <= n; ++dx) {
          if (dx * dx + dy * dy > r2) continue;
          if (in_bounds(ix + dx, iy + dy)) out.set_occupied(ix + dx, iy + dy);
        }
      }
    }
  }
  return out;
}

OccupancyGrid rasterize(const CorridorWorld& world, double resolution, double margin) {
  if (!(resolution > 0.0 && resolution <= 0.5)) {
    throw ConfigError("grid resolution must lie in (0, 0.5] m");
  }
  double xmin = std::numeric_limits<double>::infinity();
  double ymin = xmin;
  double xmax = -xmin;
  double ymax = -xmin;
  for (const Segment& s : world.walls) {
    for (const Vec2& p : {s.a, s.b}) {
      xmin = std::min(xmin, p.x);
      ymin = std::min(ymin, p.y);
      xmax = std::max(xmax, p.x);
      ymax = std::max(ymax, p.y);
    }
  }
  const Vec2 origin{xmin - margin, ymin - margin};
  const int cols = static_cast<int>(std::ceil((xmax - xmin + 2.0 * margin) / resolution)) + 1;
  const int rows = static_cast<int>(std::ceil((ymax - ymin + 2.0 * margin) / resolution)) + 1;
  OccupancyGrid grid(cols, rows, resolution, origin);

  constexpr double kEps = 1e-9;
  for (const Segment& s : world.walls) {
    if (s.a == s.b) {
      const GridCell c = grid.cell_of(s.a);
      if (grid.in_bounds(c.ix, c.iy)) grid.set_occupied(c.ix, c.iy);
      continue;
    }
    const GridCell lo = grid.cell_of({std::min(s.a.x, s.b.x) - kEps, std::min(s.a.y, s.b.y) - kEps});
    const GridCell hi = grid.cell_of({std::max(s.a.x, s.b.x) + kEps, std::max(s.a.y, s.b.y) + kEps});
    for (int iy = std::max(0, lo.iy); iy <= std::min(rows - 1, hi.iy); ++iy) {
      for (int ix = std::max(0, lo.ix); ix <= std::min(cols - 1, hi.ix); ++ix) {
        const double x0 = origin.x + ix * resolution;
        const double y0 = origin.y + iy * resolution;
        if (segment_touches_box(s, x0 - kEps, y0 - kEps, x0 + resolution + kEps,
                                y0 + resolution + kEps)) {
          grid.set_occupied(ix, iy);
        }
      }
    }
  }
  return grid;
}

double GridPath::cost() const { return straight_moves + kSqrt2 * diagonal_moves; }

GridPath astar(const OccupancyGrid& grid, GridCell start, GridCell goal) {
  if (!grid.in_bounds(start.ix, start.iy) || grid.occupied(start.ix, start.iy)) {
    throw PlanningError("start cell is outside the grid or occupied");
  }
  if (!grid.in_bounds(goal.ix, goal.iy) || grid.occupied(goal.ix, goal.iy)) {
    throw PlanningError("goal cell is outside the grid or occupied");
  }

  const std::size_t n = grid.cells.size();
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<int> straight(n, 0);
  std::vector<int> diagonal(n, 0);
  std::vector<std::uint8_t> closed(n, 0);

  // (f, h, index); smallest f first, then smallest h, then lowest index.
  using Entry = std::tuple<double, double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const int s_idx = grid.index(start.ix, start.iy);
  const int g_idx = grid.index(goal.ix, goal.iy);
  g[s_idx] = 0.0;
  open.emplace(octile(start, goal), octile(start, goal), s_idx);

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

  while (!open.empty()) {
    const auto [f, h, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (idx == g_idx) break;
    const int ix = idx % grid.cols;
    const int iy = idx / grid.cols;
    for (int k = 0; k < 8; ++k) {
      const int nx = ix + kDx[k];
      const int ny = iy + kDy[k];
      if (!grid.in_bounds(nx, ny) || grid.occupied(nx, ny)) continue;
      const bool diag = k >= 4;
      if (diag && (grid.occupied(nx, iy) || grid.occupied(ix, ny))) continue;
      const int nidx = grid.index(nx, ny);
      if (closed[nidx]) continue;
      const double cand = g[idx] + (diag ? kSqrt2 : 1.0);
      if (cand < g[nidx]) {
        g[nidx] = cand;
        parent[nidx] = idx;
        straight[nidx] = straight[idx] + (diag ? 0 : 1);
        diagonal[nidx] = diagonal[idx] + (diag ? 1 : 0);
        const double hn = octile({nx, ny}, goal);
        open.emplace(cand + hn, hn, nidx);
      }
    }
  }

  if (!closed[g_idx]) throw PlanningError("no path between start and goal");

  GridPath path;
  path.straight_moves = straight[g_idx];
  path.diagonal_moves = diagonal[g_idx];
  for (int idx = g_idx; idx != -1; idx = parent[idx]) {
    path.cells.push_back({idx % grid.cols, idx / grid.cols});
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

std::vector<Vec2> resample_polyline(const std::vector<Vec2>& points, double spacing) {
  if (points.empty()) return {};
  const double total = polyline_length(points);
  if (total == 0.0) return {points.front()};
  const int n = static_cast<int>(std::ceil(total / spacing - 1e-12));
  const double step = total / n;

  std::vector<Vec2> out;
  out.reserve(n + 1);
  out.push_back(points.front());
  std::size_t seg = 0;
  double seg_start = 0.0;
  for (int k = 1; k < n; ++k) {
    const double s = k * step;
    while (seg + 1 < points.size()) {
      const double len = (points[seg + 1] - points[seg]).norm();
      if (seg_start + len >= s || seg + 2 == points.size()) {
        const double t = len > 0.0 ? std::clamp((s - seg_start) / len, 0.0, 1.0) : 0.0;
        out.push_back(points[seg] + (points[seg + 1] - points[seg]) * t);
        break;
      }
      seg_start += len;
      ++seg;
    }
  }
  out.push_back(points.back());
  return out;
}

std::vector<double> GlobalPath::cumulative() const {
  std::vector<double> c(waypoints.size(), 0.0);
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    c[i] = c[i - 1] + (waypoints[i] - waypoints[i - 1]).norm();
  }
  return c;
}

double GlobalPath::project(const Vec2& p) const {
  if (waypoints.size() < 2) return 0.0;
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Segment seg{waypoints[i], waypoints[i + 1]};
    const Vec2 q = closest_point_on_segment(seg, p);
    const double d2 = (p - q).squared_norm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_s = s + (q - seg.a).norm();
    }
    s += seg.length();
  }
  return best_s;
}

GlobalPath plan_global(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal,
                       double robot_radius, double spacing) {
  const OccupancyGrid inflated = grid.inflated(robot_radius);
  const GridPath cells = astar(inflated, grid.cell_of(start), grid.cell_of(goal));

  std::vector<Vec2> raw;
  raw.reserve(cells.cells.size() + 1);
  for (const GridCell& c : cells.cells) raw.push_back(grid.center_of(c));
  raw.front() = start;
  if (raw.size() == 1) {
    if (!(goal == start)) raw.push_back(goal);
  } else {
    raw.back() = goal;
  }

  GlobalPath path;
  path.raw_arc_length = polyline_length(raw);
  path.waypoints = resample_polyline(raw, spacing);
  path.arc_length = polyline_length(path.waypoints);
  return path;
}

}  // namespace crowdnav
