#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "volt/tensor.hpp"
#include "volt/voxel_grid.hpp"

namespace volt {

enum class ShapeKind { Box, Sphere, Ell, Cross, Stack };
std::string_view shape_kind_name(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view name);

// Parametric solid in voxel units. Which fields matter depends on kind:
//   box    origin, extent
//   sphere center (voxel-index coordinates; voxel i's center is i), radius
//   ell    origin, extent = (foot length, thickness, height)
//   cross  origin = center voxel, arm (half length), thickness
//   stack  origin, extent = base box, arm = height of the narrower top box
// quarter_turns rotates the result by 90 degree steps about the vertical (z) axis.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Box;
  std::array<int, 3> origin{};
  std::array<int, 3> extent{};
  std::array<double, 3> center{};
  double radius = 0.0;
  int arm = 0;
  int thickness = 0;
  int quarter_turns = 0;
};

VoxelGrid generate_shape(const ShapeSpec& spec, std::size_t g);

// Square binary image, row-major; row index grows with z.
struct Silhouette {
  std::size_t p = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * p + col]; }
  friend bool operator==(const Silhouette&, const Silhouette&) = default;
};

// Orthographic view along +x after rotating the object by -azimuth about the
// vertical axis through the grid center; nearest-cell rasterization.
Silhouette render_silhouette(const VoxelGrid& grid, double azimuth, std::size_t p);

// Frozen view-shared linear map from P*P silhouette pixels to d features.
class ViewEmbedder {
 public:
  ViewEmbedder(std::uint64_t seed, std::size_t p, std::size_t d);

  std::uint64_t seed() const { return seed_; }
  std::size_t image_size() const { return p_; }
  std::size_t dim() const { return d_; }
  // 64-bit hash of the projection matrix.
  std::uint64_t fingerprint() const { return fingerprint_; }

  Tensor embed(std::span<const Silhouette> silhouettes) const;  // M x d

 private:
  std::uint64_t seed_;
  std::size_t p_, d_;
  Tensor matrix_;  // P^2 x d
  std::uint64_t fingerprint_;
};

inline constexpr std::uint64_t kDefaultEmbedderSeed = 0x5eedf00dULL;

struct DatasetOptions {
  std::size_t image_size = 16;
  std::size_t embed_dim = 64;
  std::uint64_t embedder_seed = kDefaultEmbedderSeed;
};

struct ViewSample {
  std::size_t id = 0;
  ShapeSpec shape;
  std::vector<double> azimuths;
  std::vector<Silhouette> silhouettes;
  Tensor embeddings;  // M x d
  VoxelGrid gt;
  bool validation = false;

  // First m views, matching a fresh render at those azimuths.
  Tensor first_views(std::size_t m) const;
};

struct DatasetHeader {
  std::uint64_t seed = 0;
  std::size_t g = 0;
  std::size_t views = 0;
  std::size_t image_size = 0;
  std::size_t embed_dim = 0;
  std::uint64_t embedder_seed = 0;
  std::uint64_t embedder_fingerprint = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<ViewSample> samples;

  std::vector<const ViewSample*> train() const;
  std::vector<const ViewSample*> validation() const;
};

// 80/20 split keyed on a hash of the object id.
bool is_validation_id(std::size_t id);

ShapeSpec random_shape(std::size_t g, std::uint64_t seed, std::size_t id);

Dataset build_dataset(std::size_t n_objects, std::size_t m_views, std::size_t g,
                      std::uint64_t seed, const DatasetOptions& options = {});

// Directory layout: manifest.txt, grids/obj_NNNNN.vg, views/obj_NNNNN.emb,
// views/obj_NNNNN.sil. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir);
// Refuses datasets whose stored embedder fingerprint does not match the one
// recomputed from the stored embedder seed.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace volt
