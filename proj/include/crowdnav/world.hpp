#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "crowdnav/geometry.hpp"

namespace crowdnav {

struct WorldParams {
  double width_min = 2.0;
  double width_max = 4.0;
  double length_min = 7.0;
  double length_max = 9.0;
  // Expected number of wall insets per metre of corridor, per side.
  double inset_rate = 0.15;
  double inset_depth_max = 0.5;
  double inset_length_min = 0.3;
  double inset_length_max = 1.0;
  double start_offset = 1.0;
  double goal_distance = 5.0;
  double heading_jitter = 0.3;
  double grid_resolution = 0.1;

  void validate() const;
};

// Rectangular obstacle protruding from a side wall into the corridor.
struct Inset {
  double x0 = 0.0;
  double x1 = 0.0;
  double depth = 0.0;
  bool top = false;

  double area() const { return (x1 - x0) * depth; }
};

struct CorridorWorld {
  std::vector<Segment> walls;
  std::vector<Inset> insets;
  double width = 0.0;
  double length = 0.0;
  Vec2 start;
  double start_heading = 0.0;
  Vec2 goal;
  double free_area = 0.0;
  std::uint64_t seed = 0;

  // True when a disc of the given radius at p lies inside the corridor and clear of
  // every wall and inset.
  bool disc_is_free(const Vec2& p, double radius) const;

  nlohmann::json to_json() const;
  static CorridorWorld from_json(const nlohmann::json& j);
};

CorridorWorld generate_corridor(std::uint64_t seed, const WorldParams& params);

struct GridCell {
  int ix = 0;
  int iy = 0;
  bool operator==(const GridCell&) const = default;
};

struct OccupancyGrid {
  double resolution = 0.1;
  Vec2 origin;
  int cols = 0;
  int rows = 0;
  std::vector<std::uint8_t> cells;  // row-major, 1 = occupied

  OccupancyGrid() = default;
  OccupancyGrid(int cols_in, int rows_in, double resolution_in, Vec2 origin_in);

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < cols && iy < rows; }
  int index(int ix, int iy) const { return iy * cols + ix; }
  bool occupied(int ix, int iy) const { return cells[index(ix, iy)] != 0; }
  void set_occupied(int ix, int iy, bool value = true) { cells[index(ix, iy)] = value ? 1 : 0; }
  GridCell cell_of(const Vec2& p) const;
  Vec2 center_of(const GridCell& c) const;

  // Copy with every cell whose centre lies within radius of an occupied cell centre
  // marked occupied.
  OccupancyGrid inflated(double radius) const;
};

// Conservative rasterization: any cell touched by a wall segment is occupied. The grid
// spans the world's bounding box grown by margin on every side.
OccupancyGrid rasterize(const CorridorWorld& world, double resolution, double margin);

struct GridPath {
  std::vector<GridCell> cells;
  int straight_moves = 0;
  int diagonal_moves = 0;

  // Path cost in cell units, computed from the move counts so that equal-cost paths
  // compare equal exactly.
  double cost() const;
};

// 8-connected A* with octile heuristic on the given (already inflated) grid. Diagonal
// moves may not cut occupied corners. Throws PlanningError on blocked endpoints or
// when no path exists.
GridPath astar(const OccupancyGrid& grid, GridCell start, GridCell goal);

struct GlobalPath {
  std::vector<Vec2> waypoints;
  double arc_length = 0.0;
  double raw_arc_length = 0.0;

  // Cumulative arc length at every waypoint.
  std::vector<double> cumulative() const;
  // Arc length of the closest point on the polyline to p.
  double project(const Vec2& p) const;
};

GlobalPath plan_global(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal,
                       double robot_radius, double spacing = 0.5);

// Uniformly resamples a polyline to points at most `spacing` apart (arc length).
std::vector<Vec2> resample_polyline(const std::vector<Vec2>& points, double spacing);

}  // namespace crowdnav
