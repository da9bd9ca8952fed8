#include "volt/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "volt/error.hpp"

namespace volt {

std::vector<double> row_deviations(const Tensor& s) {
  require_rank2(s, "view_divergence");
  const std::size_t m = s.rows(), n = s.cols();
  if (m == 0) throw ShapeError("view_divergence: empty attention matrix");
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (double v : s.row(i)) sum += v;
    if (std::abs(sum - 1.0) > 1e-6) {
      throw NumericError("view_divergence: row " + std::to_string(i) + " sums to " +
                         std::to_string(sum));
    }
  }
  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) mean[j] += s(i, j);
  for (double& v : mean) v /= static_cast<double>(m);
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) sq += (s(i, j) - mean[j]) * (s(i, j) - mean[j]);
    out[i] = std::sqrt(sq);
  }
  return out;
}

double view_divergence(const Tensor& s) {
  const auto dev = row_deviations(s);
  double sum = 0.0;
  for (double v : dev) sum += v;
  return sum / static_cast<double>(dev.size());
}

double scott_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw DataError("scott_bandwidth: need at least 2 samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  return std::sqrt(var) * std::pow(static_cast<double>(n), -0.2);
}

KdeResult kde_density(std::span<const double> samples, std::span<const double> eval_grid,
                      std::optional<double> bandwidth) {
  if (samples.size() < 2) throw DataError("kde_density: need at least 2 samples");
  KdeResult r;
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw ConfigError("kde_density: bandwidth must be positive");
    r.bandwidth = *bandwidth;
  } else {
    r.bandwidth = scott_bandwidth(samples);
    if (r.bandwidth == 0.0) {
      r.bandwidth = kKdeFallbackBandwidth;
      r.fallback = true;
    }
  }
  const double h = r.bandwidth;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  r.density.reserve(eval_grid.size());
  for (double x : eval_grid) {
    double acc = 0.0;
    for (double s : samples) {
      const double u = (s - x) / h;
      acc += std::exp(-0.5 * u * u);
    }
    r.density.push_back(acc * norm);
  }
  return r;
}

std::vector<double> kde_grid(std::span<const double> samples, double bandwidth,
                             std::size_t points, double pad) {
  if (samples.empty()) throw DataError("kde_grid: no samples");
  if (points < 2) throw ConfigError("kde_grid: need at least 2 grid points");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it - pad * bandwidth;
  const double hi = *hi_it + pad * bandwidth;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

namespace {

Tensor select_matrix(const std::vector<attention::AttentionTrace>& traces, std::size_t layer,
                     const DivergenceOptions& options) {
  Tensor acc;
  std::size_t count = 0;
  for (const auto& t : traces) {
    if (t.layer != layer || t.role != attention::TraceRole::ViewView) continue;
    if (options.head) {
      if (t.head == *options.head) return t.scores;
      continue;
    }
    if (count == 0) acc = t.scores;
    else add_inplace(acc, t.scores);
    ++count;
  }
  if (count == 0) {
    throw Error("divergence_report: no view attention traces for layer " + std::to_string(layer));
  }
  for (double& v : acc.data()) v /= static_cast<double>(count);
  return acc;
}

}  // namespace

DivergenceReport divergence_report(const VoltModel& model, std::span<const Tensor> view_sets,
                                   const DivergenceOptions& options) {
  const ModelConfig& cfg = model.config();
  if (options.head && *options.head >= cfg.heads) {
    throw ConfigError("divergence_report: head index out of range");
  }
  if (view_sets.empty()) throw DataError("divergence_report: no objects");
  DivergenceReport report;
  report.views = view_sets.front().rows();
  report.layers.resize(cfg.l_enc);
  for (std::size_t l = 0; l < cfg.l_enc; ++l) report.layers[l].layer = l;

  for (std::size_t obj = 0; obj < view_sets.size(); ++obj) {
    report.object_ids.push_back(obj);
    const EncodeResult enc = encode(view_sets[obj], model);
    if (enc.traces.empty()) throw Error("divergence_report: model produced no attention traces");
    for (std::size_t l = 0; l < cfg.l_enc; ++l) {
      Tensor s = select_matrix(enc.traces, l, options);
      const auto dev = row_deviations(s);
      double sum = 0.0;
      for (double v : dev) sum += v;
      LayerDivergence& ld = report.layers[l];
      ld.object_d.push_back(sum / static_cast<double>(dev.size()));
      ld.view_distances.insert(ld.view_distances.end(), dev.begin(), dev.end());
      ld.matrices.push_back(std::move(s));
    }
  }
  for (LayerDivergence& ld : report.layers) {
    if (ld.view_distances.size() < 2) continue;
    double h = scott_bandwidth(ld.view_distances);
    if (h == 0.0) h = kKdeFallbackBandwidth;
    ld.grid = kde_grid(ld.view_distances, h, options.grid_points);
    ld.kde = kde_density(ld.view_distances, ld.grid);
    report.bandwidth_fallback = report.bandwidth_fallback || ld.kde.fallback;
  }
  return report;
}

DivergenceReport divergence_report(const VoltModel& model,
                                   std::span<const ViewSample* const> samples,
                                   std::size_t m_views, const DivergenceOptions& options) {
  std::vector<Tensor> sets;
  sets.reserve(samples.size());
  for (const ViewSample* s : samples) sets.push_back(s->first_views(m_views));
  DivergenceReport r = divergence_report(model, std::span<const Tensor>(sets), options);
  for (std::size_t i = 0; i < samples.size(); ++i) r.object_ids[i] = samples[i]->id;
  return r;
}

}  // namespace volt
