#pragma once

// Brute-force reference implementations written directly from the metric
// definitions, shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "volt/metrics.hpp"
#include "volt/rng.hpp"
#include "volt/tensor.hpp"
#include "volt/voxel_grid.hpp"

namespace volt::oracle {

inline double iou(const VoxelGrid& pred, const VoxelGrid& gt, double t) {
  std::size_t inter = 0, uni = 0;
  const std::size_t g = gt.g();
  for (std::size_t k = 0; k < g; ++k)
    for (std::size_t j = 0; j < g; ++j)
      for (std::size_t i = 0; i < g; ++i) {
        const bool p = pred.at(i, j, k) > t;
        const bool y = gt.at(i, j, k) > 0.5;
        inter += (p && y) ? 1 : 0;
        uni += (p || y) ? 1 : 0;
      }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double distance(const Point3& a, const Point3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

// Fraction of points in `from` whose nearest neighbour in `to` is closer than d.
inline double covered_fraction(const std::vector<Point3>& from, const std::vector<Point3>& to,
                               double d) {
  std::size_t hit = 0;
  for (const Point3& p : from) {
    double best = INFINITY;
    for (const Point3& q : to) best = std::min(best, distance(p, q));
    if (best < d) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(from.size());
}

inline PrecisionRecall precision_recall(const PointSet& r, const PointSet& g, double d) {
  if (r.empty() && g.empty()) return {1.0, 1.0};
  if (r.empty() || g.empty()) return {0.0, 0.0};
  return {covered_fraction(r.points, g.points, d), covered_fraction(g.points, r.points, d)};
}

inline double f_score(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

inline double view_divergence(const Tensor& s) {
  const std::size_t m = s.rows(), n = s.cols();
  double total = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double mean = 0.0;
      for (std::size_t b = 0; b < m; ++b) mean += s(b, j);
      mean /= static_cast<double>(m);
      sq += (s(a, j) - mean) * (s(a, j) - mean);
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(m);
}

inline double kde_at(const std::vector<double>& samples, double x, double h) {
  double acc = 0.0;
  for (double s : samples) {
    acc += std::exp(-(x - s) * (x - s) / (2.0 * h * h)) / (h * std::sqrt(2.0 * std::numbers::pi));
  }
  return acc / static_cast<double>(samples.size());
}

inline std::vector<Point3> surface_points(const VoxelGrid& grid) {
  const int g = static_cast<int>(grid.g());
  auto on = [&](int i, int j, int k) {
    return i >= 0 && j >= 0 && k >= 0 && i < g && j < g && k < g &&
           grid.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                   static_cast<std::size_t>(k)) > 0.5;
  };
  const std::array<std::array<int, 3>, 6> nbr{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                               {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  std::vector<Point3> out;
  for (int k = 0; k < g; ++k)
    for (int j = 0; j < g; ++j)
      for (int i = 0; i < g; ++i) {
        if (!on(i, j, k)) continue;
        bool boundary = false;
        for (const auto& n : nbr) boundary = boundary || !on(i + n[0], j + n[1], k + n[2]);
        if (boundary) out.push_back({(i + 0.5) / g, (j + 0.5) / g, (k + 0.5) / g});
      }
  return out;
}

// ---- random small instances ----------------------------------------------

inline VoxelGrid random_binary_grid(std::size_t g, double fill, Rng& rng) {
  VoxelGrid grid(g, GridKind::Binary);
  for (double& v : grid.values()) v = rng.uniform(0.0, 1.0) < fill ? 1.0 : 0.0;
  return grid;
}

inline VoxelGrid random_prob_grid(std::size_t g, Rng& rng) {
  VoxelGrid grid(g, GridKind::Probabilistic);
  for (double& v : grid.values()) v = rng.uniform(0.0, 1.0);
  return grid;
}

inline PointSet random_points(std::size_t n, double spread, Rng& rng) {
  PointSet p;
  for (std::size_t i = 0; i < n; ++i) {
    p.points.push_back({rng.uniform(0.0, spread), rng.uniform(0.0, spread), rng.uniform(0.0, spread)});
  }
  return p;
}

inline Tensor random_stochastic(std::size_t m, Rng& rng) {
  Tensor s({m, m});
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum += (s(i, j) = rng.uniform(0.01, 1.0));
    for (std::size_t j = 0; j < m; ++j) s(i, j) /= sum;
  }
  return s;
}

}  // namespace volt::oracle
