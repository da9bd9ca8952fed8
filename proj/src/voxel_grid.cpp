#include "volt/voxel_grid.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "volt/error.hpp"

namespace volt {

VoxelGrid::VoxelGrid(std::size_t g, GridKind kind) : g_(g), kind_(kind), values_(g * g * g, 0.0) {}

VoxelGrid::VoxelGrid(std::size_t g, GridKind kind, std::vector<double> values)
    : g_(g), kind_(kind), values_(std::move(values)) {
  if (values_.size() != g * g * g) {
    throw ShapeError("voxel grid: expected " + std::to_string(g * g * g) + " values, got " +
                     std::to_string(values_.size()));
  }
}

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return v > 0.5; }));
}

VoxelGrid VoxelGrid::threshold(double t) const {
  VoxelGrid out(g_, GridKind::Binary);
  for (std::size_t n = 0; n < values_.size(); ++n) out.values_[n] = values_[n] > t ? 1.0 : 0.0;
  return out;
}

void VoxelGrid::validate() const {
  for (double v : values_) {
    const bool ok = kind_ == GridKind::Binary ? (v == 0.0 || v == 1.0)
                                              : (std::isfinite(v) && v >= 0.0 && v <= 1.0);
    if (!ok) throw DataError("voxel grid value out of range: " + std::to_string(v));
  }
}

namespace le {

void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

namespace {
template <std::size_t N>
std::array<unsigned char, N> read_bytes(std::istream& is) {
  std::array<unsigned char, N> b{};
  is.read(reinterpret_cast<char*>(b.data()), N);
  if (!is) throw DataError("unexpected end of file");
  return b;
}
}  // namespace

std::uint8_t get_u8(std::istream& is) { return read_bytes<1>(is)[0]; }

std::uint16_t get_u16(std::istream& is) {
  const auto b = read_bytes<2>(is);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  const auto b = read_bytes<4>(is);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  const auto b = read_bytes<8>(is);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace le

void write_grid(std::ostream& os, const VoxelGrid& grid) {
  if (grid.kind() == GridKind::Binary) {
    os.write("VG01", 4);
    le::put_u32(os, static_cast<std::uint32_t>(grid.g()));
    std::string bytes(grid.size(), '\0');
    for (std::size_t n = 0; n < grid.size(); ++n) bytes[n] = grid[n] > 0.5 ? 1 : 0;
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    os.write("VGP1", 4);
    le::put_u32(os, static_cast<std::uint32_t>(grid.g()));
    for (double v : grid.values()) le::put_f64(os, v);
  }
}

VoxelGrid read_grid(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is) throw DataError("voxel grid: truncated header");
  const std::string m(magic, 4);
  const std::size_t g = le::get_u32(is);
  if (g == 0 || g > 1024) throw DataError("voxel grid: implausible resolution " + std::to_string(g));
  const std::size_t count = g * g * g;
  std::vector<double> values(count);
  if (m == "VG01") {
    std::string bytes(count, '\0');
    is.read(bytes.data(), static_cast<std::streamsize>(count));
    if (!is) throw DataError("voxel grid: truncated payload");
    for (std::size_t n = 0; n < count; ++n) {
      if (bytes[n] != 0 && bytes[n] != 1) throw DataError("voxel grid: non-binary byte");
      values[n] = bytes[n];
    }
    return VoxelGrid(g, GridKind::Binary, std::move(values));
  }
  if (m == "VGP1") {
    for (double& v : values) v = le::get_f64(is);
    VoxelGrid grid(g, GridKind::Probabilistic, std::move(values));
    grid.validate();
    return grid;
  }
  throw DataError("voxel grid: bad magic '" + m + "'");
}

void save_grid(const std::filesystem::path& path, const VoxelGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  write_grid(os, grid);
}

VoxelGrid load_grid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  return read_grid(is);
}

}  // namespace volt
