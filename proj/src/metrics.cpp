#include "volt/metrics.hpp"

#include <limits>
#include <string>

#include "volt/error.hpp"

namespace volt {

double iou(const VoxelGrid& pred, const VoxelGrid& gt, double t) {
  if (pred.g() != gt.g()) {
    throw ShapeError("iou: grid sizes differ (" + std::to_string(pred.g()) + " vs " +
                     std::to_string(gt.g()) + ")");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const bool p = pred[n] > t;
    const bool g = gt[n] > 0.5;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PointSet voxel_surface_points(const VoxelGrid& grid) {
  PointSet out;
  const std::size_t g = grid.g();
  const double gd = static_cast<double>(g);
  auto filled = [&](std::ptrdiff_t i, std::ptrdiff_t j, std::ptrdiff_t k) {
    const auto gi = static_cast<std::ptrdiff_t>(g);
    if (i < 0 || j < 0 || k < 0 || i >= gi || j >= gi || k >= gi) return false;
    return grid.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                   static_cast<std::size_t>(k)) > 0.5;
  };
  for (std::size_t k = 0; k < g; ++k)
    for (std::size_t j = 0; j < g; ++j)
      for (std::size_t i = 0; i < g; ++i) {
        const auto ii = static_cast<std::ptrdiff_t>(i);
        const auto jj = static_cast<std::ptrdiff_t>(j);
        const auto kk = static_cast<std::ptrdiff_t>(k);
        if (!filled(ii, jj, kk)) continue;
        const bool interior = filled(ii - 1, jj, kk) && filled(ii + 1, jj, kk) &&
                              filled(ii, jj - 1, kk) && filled(ii, jj + 1, kk) &&
                              filled(ii, jj, kk - 1) && filled(ii, jj, kk + 1);
        if (interior) continue;
        out.points.push_back({(static_cast<double>(i) + 0.5) / gd,
                              (static_cast<double>(j) + 0.5) / gd,
                              (static_cast<double>(k) + 0.5) / gd});
      }
  return out;
}

namespace {

// Fraction of `from` points whose nearest `to` point is closer than d.
double fraction_within(const PointSet& from, const PointSet& to, double d) {
  const double d2 = d * d;
  std::size_t hits = 0;
  for (const Point3& a : from.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point3& b : to.points) {
      const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
      if (best < d2) break;
    }
    if (best < d2) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(from.size());
}

}  // namespace

PrecisionRecall precision_recall(const PointSet& r, const PointSet& g, double d) {
  if (!(d > 0.0)) throw ConfigError("precision_recall: distance threshold must be positive");
  if (r.empty() && g.empty()) return {1.0, 1.0};
  if (r.empty() || g.empty()) return {0.0, 0.0};
  return {fraction_within(r, g, d), fraction_within(g, r, d)};
}

double f_score(double p, double r) {
  const double denom = p + r;
  if (denom == 0.0) return 0.0;
  return 2.0 * p * r / denom;
}

SurfaceScore surface_fscore(const VoxelGrid& pred, const VoxelGrid& gt, double t, double d) {
  if (pred.g() != gt.g()) throw ShapeError("surface_fscore: grid sizes differ");
  const PointSet rp = voxel_surface_points(pred.threshold(t));
  const PointSet gp = voxel_surface_points(gt);
  const PrecisionRecall pr = precision_recall(rp, gp, d);
  const double f = (rp.empty() && gp.empty()) ? 1.0 : f_score(pr.precision, pr.recall);
  return {pr.precision, pr.recall, f};
}

}  // namespace volt
