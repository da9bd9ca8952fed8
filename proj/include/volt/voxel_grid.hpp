#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace volt {

enum class GridKind { Binary, Probabilistic };

// G x G x G occupancy, x fastest, then y, then z.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(std::size_t g, GridKind kind);
  VoxelGrid(std::size_t g, GridKind kind, std::vector<double> values);

  std::size_t g() const { return g_; }
  GridKind kind() const { return kind_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + g_ * (j + g_ * k);
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return values_[index(i, j, k)]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values_[index(i, j, k)]; }
  double& operator[](std::size_t n) { return values_[n]; }
  double operator[](std::size_t n) const { return values_[n]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  std::size_t occupied_count() const;  // values > 0.5
  // Binary grid of {value > t}.
  VoxelGrid threshold(double t) const;
  // Throws DataError if values violate the kind's range.
  void validate() const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  std::size_t g_ = 0;
  GridKind kind_ = GridKind::Binary;
  std::vector<double> values_;
};

// Binary files: magic "VG01", u32 G, G^3 bytes (0/1).
// Probabilistic files: magic "VGP1", u32 G, G^3 little-endian f64.
void write_grid(std::ostream& os, const VoxelGrid& grid);
VoxelGrid read_grid(std::istream& is);
void save_grid(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid load_grid(const std::filesystem::path& path);

// Little-endian helpers shared by the binary formats.
namespace le {
void put_u16(std::ostream& os, std::uint16_t v);
void put_u32(std::ostream& os, std::uint32_t v);
void put_u64(std::ostream& os, std::uint64_t v);
void put_f64(std::ostream& os, double v);
std::uint8_t get_u8(std::istream& is);
std::uint16_t get_u16(std::istream& is);
std::uint32_t get_u32(std::istream& is);
std::uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);
}  // namespace le

}  // namespace volt
