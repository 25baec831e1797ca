#include "pasta/spatial_stats.hpp"

#include <cmath>

#include "pasta/error.hpp"

namespace pasta {
namespace {

void check_grid(const GridView& grid) {
  if (grid.n == 0 || grid.m == 0) throw InvalidArgument("spatial statistics need a non-empty grid");
  if (grid.values.size() != grid.n * grid.m)
    throw ShapeError("grid has " + std::to_string(grid.values.size()) + " values, expected " +
                     std::to_string(grid.n * grid.m));
}

struct Moments {
  double mean;
  double sd;
};

Moments moments(const GridView& grid) {
  const std::size_t count = grid.n * grid.m;
  double sum = 0.0;
  for (double v : grid.values) sum += v;
  const double mean = sum / static_cast<double>(count);
  if (count < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : grid.values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(count - 1))};
}

// Sum of f(neighbour value) over the clipped queen neighbourhood.
template <typename Fn>
double neighbor_sum(const GridView& grid, std::size_t i, std::size_t j, Fn&& f) {
  double acc = 0.0;
  const std::size_t i0 = i == 0 ? 0 : i - 1, i1 = i + 1 < grid.n ? i + 1 : i;
  const std::size_t j0 = j == 0 ? 0 : j - 1, j1 = j + 1 < grid.m ? j + 1 : j;
  for (std::size_t a = i0; a <= i1; ++a)
    for (std::size_t b = j0; b <= j1; ++b)
      if (a != i || b != j) acc += f(grid(a, b));
  return acc;
}

}  // namespace

std::string_view quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::HH: return "HH";
    case Quadrant::HL: return "HL";
    case Quadrant::LH: return "LH";
    case Quadrant::LL: return "LL";
    case Quadrant::None: return "NONE";
  }
  return "NONE";
}

std::size_t queen_neighbor_count(std::size_t n, std::size_t m, std::size_t i, std::size_t j) {
  const std::size_t rows = (i > 0) + 1 + (i + 1 < n);
  const std::size_t cols = (j > 0) + 1 + (j + 1 < m);
  return rows * cols - 1;
}

MoranField local_morans_i(GridView grid) {
  check_grid(grid);
  const Moments mo = moments(grid);
  MoranField field{grid.n, grid.m, std::vector<double>(grid.n * grid.m, 0.0), mo.mean, mo.sd};
  if (mo.sd == 0.0) return field;
  const auto z = [&](double v) { return (v - mo.mean) / mo.sd; };
  for (std::size_t i = 0; i < grid.n; ++i)
    for (std::size_t j = 0; j < grid.m; ++j)
      field.stats[i * grid.m + j] = z(grid(i, j)) * neighbor_sum(grid, i, j, z);
  return field;
}

QuadrantMap quadrants(GridView grid) {
  check_grid(grid);
  const Moments mo = moments(grid);
  QuadrantMap map{grid.n, grid.m, std::vector<Quadrant>(grid.n * grid.m, Quadrant::None)};
  if (mo.sd == 0.0) return map;
  for (std::size_t i = 0; i < grid.n; ++i) {
    for (std::size_t j = 0; j < grid.m; ++j) {
      const double own = grid(i, j) - mo.mean;
      const double around = neighbor_sum(grid, i, j, [&](double v) { return v - mo.mean; });
      Quadrant q = Quadrant::None;
      if (own > 0.0 && around > 0.0) q = Quadrant::HH;
      else if (own > 0.0 && around < 0.0) q = Quadrant::HL;
      else if (own < 0.0 && around > 0.0) q = Quadrant::LH;
      else if (own < 0.0 && around < 0.0) q = Quadrant::LL;
      map.labels[i * grid.m + j] = q;
    }
  }
  return map;
}

}  // namespace pasta
