#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace pasta {

/// Read-only row-major view of one N x M grid.
struct GridView {
  std::span<const double> values;
  std::size_t n = 0;
  std::size_t m = 0;

  double operator()(std::size_t i, std::size_t j) const { return values[i * m + j]; }
};

/// Local Moran's I for every cell of one grid.
///
/// s(i,j) = z(i,j) * sum_{queen neighbours q} z(q), with z = (x - mean) / sd
/// and sd the sample standard deviation. Neighbourhoods are clipped at the
/// border (3 at corners, 5 on edges, 8 inside), unit weights, no row
/// standardisation. A zero-variance grid yields all-zero statistics.
struct MoranField {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> stats;
  double mean = 0.0;
  double sd = 0.0;

  double operator()(std::size_t i, std::size_t j) const { return stats[i * m + j]; }
};

enum class Quadrant : std::uint8_t { HH, HL, LH, LL, None };

std::string_view quadrant_name(Quadrant q);

struct QuadrantMap {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<Quadrant> labels;

  Quadrant operator()(std::size_t i, std::size_t j) const { return labels[i * m + j]; }
};

MoranField local_morans_i(GridView grid);

/// LISA quadrant per cell from the signs of the cell's deviation and the mean
/// deviation of its queen neighbours. Any zero deviation (or zero variance)
/// gives Quadrant::None.
QuadrantMap quadrants(GridView grid);

/// Number of in-bounds queen neighbours of (i, j).
std::size_t queen_neighbor_count(std::size_t n, std::size_t m, std::size_t i, std::size_t j);

}  // namespace pasta
