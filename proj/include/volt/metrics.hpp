#pragma once

#include <array>
#include <vector>

#include "volt/voxel_grid.hpp"

namespace volt {

inline constexpr double kDefaultFScoreDistance = 0.01;

using Point3 = std::array<double, 3>;

struct PointSet {
  std::vector<Point3> points;
  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

// |{pred > t} ∩ gt| / |{pred > t} ∪ gt|; 1 when both sets are empty.
double iou(const VoxelGrid& pred, const VoxelGrid& gt, double t);

// Centers of occupied voxels with at least one empty or out-of-bounds
// 6-neighbor, in unit-cube coordinates.
PointSet voxel_surface_points(const VoxelGrid& grid);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Exact nearest-neighbor distances, strict "< d". Both sets empty -> (1, 1);
// exactly one empty -> (0, 0).
PrecisionRecall precision_recall(const PointSet& r, const PointSet& g,
                                 double d = kDefaultFScoreDistance);

// 2pr / (p + r), 0 when p + r = 0.
double f_score(double p, double r);

struct SurfaceScore {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
};

// Surface F-score of a probabilistic prediction thresholded at t. Both
// surfaces empty scores 1.
SurfaceScore surface_fscore(const VoxelGrid& pred, const VoxelGrid& gt, double t,
                            double d = kDefaultFScoreDistance);

}  // namespace volt
