#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "volt/data_synth.hpp"
#include "volt/model.hpp"
#include "volt/tensor.hpp"

namespace volt {

// Distance of each attention row from the mean row, ||s_m - s_bar||_2.
std::vector<double> row_deviations(const Tensor& scores);

// D = (1/M) * sum_m ||s_m - s_bar||_2 over the rows of a row-stochastic matrix.
double view_divergence(const Tensor& scores);

// Scott's rule for one-dimensional data: sample stddev * n^(-1/5).
double scott_bandwidth(std::span<const double> samples);

struct KdeResult {
  std::vector<double> density;
  double bandwidth = 0.0;
  bool fallback = false;  // sample stddev was zero; bandwidth forced to 1e-3
};

inline constexpr double kKdeFallbackBandwidth = 1e-3;

// Gaussian-kernel density at every grid point. Bandwidth from Scott's rule
// unless given.
KdeResult kde_density(std::span<const double> samples, std::span<const double> eval_grid,
                      std::optional<double> bandwidth = std::nullopt);

// Evenly spaced grid covering [min - pad*h, max + pad*h].
std::vector<double> kde_grid(std::span<const double> samples, double bandwidth,
                             std::size_t points = 201, double pad = 4.0);

struct LayerDivergence {
  std::size_t layer = 0;
  std::vector<double> object_d;         // one D per object
  std::vector<double> view_distances;   // every ||s_m - s_bar|| of every object
  std::vector<Tensor> matrices;         // the attention matrix D was computed from
  std::vector<double> grid;
  KdeResult kde;
};

struct DivergenceOptions {
  // Head whose view-view attention feeds D; nullopt averages the heads'
  // matrices first.
  std::optional<std::size_t> head;
  std::size_t grid_points = 201;
};

struct DivergenceReport {
  std::vector<std::size_t> object_ids;
  std::size_t views = 0;
  std::vector<LayerDivergence> layers;  // one per encoder block
  bool bandwidth_fallback = false;
};

// Runs the encoder on the first m_views views of every sample and gathers the
// per-layer divergence statistics. The KDE is taken over the per-view row
// distances pooled across objects.
DivergenceReport divergence_report(const VoltModel& model,
                                   std::span<const ViewSample* const> samples,
                                   std::size_t m_views, const DivergenceOptions& options = {});

// Same, for explicit view-embedding sets (object ids are their positions).
DivergenceReport divergence_report(const VoltModel& model, std::span<const Tensor> view_sets,
                                   const DivergenceOptions& options = {});

}  // namespace volt
