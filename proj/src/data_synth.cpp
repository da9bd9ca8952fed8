#include "volt/data_synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "volt/error.hpp"
#include "volt/rng.hpp"

namespace volt {

std::string_view shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Box: return "box";
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Ell: return "ell";
    case ShapeKind::Cross: return "cross";
    case ShapeKind::Stack: return "stack";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(std::string_view name) {
  for (ShapeKind k : {ShapeKind::Box, ShapeKind::Sphere, ShapeKind::Ell, ShapeKind::Cross,
                      ShapeKind::Stack}) {
    if (shape_kind_name(k) == name) return k;
  }
  throw DataError("unknown shape kind '" + std::string(name) + "'");
}

namespace {

struct Box {
  std::array<int, 3> lo;
  std::array<int, 3> size;
};

void fill_box(VoxelGrid& grid, const Box& b) {
  const int g = static_cast<int>(grid.g());
  for (int a = 0; a < 3; ++a) {
    if (b.size[a] <= 0) throw DataError("shape: zero or negative extent");
    if (b.lo[a] < 0 || b.lo[a] + b.size[a] > g) throw DataError("shape: exceeds grid bounds");
  }
  for (int k = b.lo[2]; k < b.lo[2] + b.size[2]; ++k)
    for (int j = b.lo[1]; j < b.lo[1] + b.size[1]; ++j)
      for (int i = b.lo[0]; i < b.lo[0] + b.size[0]; ++i)
        grid.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                static_cast<std::size_t>(k)) = 1.0;
}

VoxelGrid quarter_turn(const VoxelGrid& in) {
  const std::size_t g = in.g();
  VoxelGrid out(g, GridKind::Binary);
  for (std::size_t k = 0; k < g; ++k)
    for (std::size_t j = 0; j < g; ++j)
      for (std::size_t i = 0; i < g; ++i) out.at(g - 1 - j, i, k) = in.at(i, j, k);
  return out;
}

}  // namespace

VoxelGrid generate_shape(const ShapeSpec& spec, std::size_t g) {
  if (g == 0) throw DataError("shape: resolution must be positive");
  VoxelGrid grid(g, GridKind::Binary);
  const auto& o = spec.origin;
  const auto& e = spec.extent;
  switch (spec.kind) {
    case ShapeKind::Box:
      fill_box(grid, {o, e});
      break;
    case ShapeKind::Sphere: {
      if (spec.radius <= 0.0) throw DataError("sphere: radius must be positive");
      const double r = spec.radius;
      for (std::size_t a = 0; a < 3; ++a) {
        if (spec.center[a] - r < -0.5 || spec.center[a] + r > static_cast<double>(g) - 0.5) {
          throw DataError("sphere: exceeds grid bounds");
        }
      }
      for (std::size_t k = 0; k < g; ++k)
        for (std::size_t j = 0; j < g; ++j)
          for (std::size_t i = 0; i < g; ++i) {
            const double dx = static_cast<double>(i) - spec.center[0];
            const double dy = static_cast<double>(j) - spec.center[1];
            const double dz = static_cast<double>(k) - spec.center[2];
            if (dx * dx + dy * dy + dz * dz <= r * r) grid.at(i, j, k) = 1.0;
          }
      break;
    }
    case ShapeKind::Ell: {
      const int foot = e[0], t = e[1], h = e[2];
      fill_box(grid, {o, {t, t, h}});
      fill_box(grid, {o, {foot, t, t}});
      break;
    }
    case ShapeKind::Cross: {
      const int a = spec.arm, t = spec.thickness;
      if (a <= 0 || t <= 0) throw DataError("cross: arm and thickness must be positive");
      const int half = t / 2;
      fill_box(grid, {{o[0] - a, o[1] - half, o[2] - half}, {2 * a + 1, t, t}});
      fill_box(grid, {{o[0] - half, o[1] - a, o[2] - half}, {t, 2 * a + 1, t}});
      fill_box(grid, {{o[0] - half, o[1] - half, o[2] - a}, {t, t, 2 * a + 1}});
      break;
    }
    case ShapeKind::Stack: {
      fill_box(grid, {o, e});
      const int tx = std::max(1, e[0] / 2), ty = std::max(1, e[1] / 2);
      fill_box(grid, {{o[0] + (e[0] - tx) / 2, o[1] + (e[1] - ty) / 2, o[2] + e[2]},
                      {tx, ty, spec.arm}});
      break;
    }
  }
  for (int q = 0; q < ((spec.quarter_turns % 4) + 4) % 4; ++q) grid = quarter_turn(grid);
  if (grid.occupied_count() == 0) throw DataError("shape: generated grid is empty");
  return grid;
}

Silhouette render_silhouette(const VoxelGrid& grid, double azimuth, std::size_t p) {
  Silhouette s{p, std::vector<std::uint8_t>(p * p, 0)};
  const double g = static_cast<double>(grid.g());
  const double c = std::cos(-azimuth), sn = std::sin(-azimuth);
  const double pd = static_cast<double>(p);
  for (std::size_t k = 0; k < grid.g(); ++k)
    for (std::size_t j = 0; j < grid.g(); ++j)
      for (std::size_t i = 0; i < grid.g(); ++i) {
        if (grid.at(i, j, k) <= 0.5) continue;
        const double x = (static_cast<double>(i) + 0.5) / g - 0.5;
        const double y = (static_cast<double>(j) + 0.5) / g - 0.5;
        const double z = (static_cast<double>(k) + 0.5) / g;
        const double u = 0.5 + x * sn + y * c;  // rotated y, seen along +x
        const double col = std::floor(u * pd);
        const double row = std::floor(z * pd);
        if (col < 0.0 || col >= pd || row < 0.0 || row >= pd) continue;
        s.pixels[static_cast<std::size_t>(row) * p + static_cast<std::size_t>(col)] = 1;
      }
  return s;
}

ViewEmbedder::ViewEmbedder(std::uint64_t seed, std::size_t p, std::size_t d)
    : seed_(seed), p_(p), d_(d), matrix_({p * p, d}) {
  if (p == 0 || d == 0) throw ConfigError("embedder: image size and dim must be positive");
  Rng rng = Rng(seed).split("view-embedder");
  const double stddev = 1.0 / std::sqrt(static_cast<double>(p * p));
  for (double& v : matrix_.data()) v = rng.normal(0.0, stddev);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : matrix_.data()) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    h = fnv1a64(bytes, 8, h);
  }
  fingerprint_ = h;
}

Tensor ViewEmbedder::embed(std::span<const Silhouette> silhouettes) const {
  Tensor out({silhouettes.size(), d_});
  for (std::size_t m = 0; m < silhouettes.size(); ++m) {
    const Silhouette& s = silhouettes[m];
    if (s.p != p_) throw ShapeError("embedder: silhouette size does not match embedder");
    auto row = out.row(m);
    for (std::size_t px = 0; px < s.pixels.size(); ++px) {
      if (s.pixels[px] == 0) continue;
      const auto w = matrix_.row(px);
      for (std::size_t j = 0; j < d_; ++j) row[j] += w[j];
    }
  }
  return out;
}

Tensor ViewSample::first_views(std::size_t m) const {
  if (m == 0 || m > embeddings.rows()) {
    throw DataError("requested " + std::to_string(m) + " views, sample has " +
                    std::to_string(embeddings.rows()));
  }
  return slice_rows(embeddings, 0, m);
}

std::vector<const ViewSample*> Dataset::train() const {
  std::vector<const ViewSample*> out;
  for (const auto& s : samples)
    if (!s.validation) out.push_back(&s);
  return out;
}

std::vector<const ViewSample*> Dataset::validation() const {
  std::vector<const ViewSample*> out;
  for (const auto& s : samples)
    if (s.validation) out.push_back(&s);
  return out;
}

bool is_validation_id(std::size_t id) { return mix64(static_cast<std::uint64_t>(id)) % 5 == 0; }

ShapeSpec random_shape(std::size_t g_size, std::uint64_t seed, std::size_t id) {
  if (g_size < 4) throw ConfigError("random shapes need g >= 4");
  Rng rng = Rng(seed).split("object/" + std::to_string(id));
  const int g = static_cast<int>(g_size);
  auto pick = [&rng](int lo, int hi) {  // inclusive, tolerant of hi < lo
    hi = std::max(lo, hi);
    return lo + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(hi - lo + 1)));
  };
  ShapeSpec s;
  s.kind = static_cast<ShapeKind>(rng.uniform_index(5));
  s.quarter_turns = static_cast<int>(rng.uniform_index(4));
  switch (s.kind) {
    case ShapeKind::Box:
      for (int a = 0; a < 3; ++a) {
        s.extent[a] = pick(std::max(1, g / 4), g / 2 + g / 8);
        s.origin[a] = (g - s.extent[a]) / 2 + pick(-g / 16, g / 16);
        s.origin[a] = std::clamp(s.origin[a], 0, g - s.extent[a]);
      }
      break;
    case ShapeKind::Sphere:
      s.radius = rng.uniform(0.2, 0.35) * g;
      for (int a = 0; a < 3; ++a) s.center[a] = (g - 1) / 2.0 + rng.uniform(-0.75, 0.75);
      s.radius = std::min(s.radius, (g - 1) / 2.0 - 0.76);
      break;
    case ShapeKind::Ell:
      s.extent = {pick(g / 2, 3 * g / 4 - 1), pick(std::max(1, g / 8), g / 4),
                  pick(g / 2, 3 * g / 4)};
      s.origin = {(g - s.extent[0]) / 2, (g - s.extent[1]) / 2, (g - s.extent[2]) / 2};
      break;
    case ShapeKind::Cross:
      s.arm = pick(std::max(1, g / 4), std::max(1, g / 2 - 2));
      s.thickness = pick(std::max(1, g / 8), std::max(1, g / 6 + 1));
      s.origin = {g / 2, g / 2, g / 2};
      s.arm = std::min(s.arm, g / 2 - 1);
      break;
    case ShapeKind::Stack: {
      s.extent = {pick(g / 2, 3 * g / 4), pick(g / 2, 3 * g / 4), pick(std::max(1, g / 6), g / 3)};
      s.arm = pick(std::max(1, g / 6), g / 3);
      const int height = s.extent[2] + s.arm;
      s.origin = {(g - s.extent[0]) / 2, (g - s.extent[1]) / 2, (g - height) / 2};
      break;
    }
  }
  return s;
}

Dataset build_dataset(std::size_t n_objects, std::size_t m_views, std::size_t g,
                      std::uint64_t seed, const DatasetOptions& options) {
  if (n_objects < 2) throw ConfigError("dataset needs at least 2 objects");
  if (m_views < 1 || m_views > 24) throw ConfigError("views must be in [1, 24]");
  const ViewEmbedder embedder(options.embedder_seed, options.image_size, options.embed_dim);
  Dataset ds;
  ds.header = {seed, g, m_views, options.image_size, options.embed_dim, options.embedder_seed,
               embedder.fingerprint()};
  ds.samples.reserve(n_objects);
  for (std::size_t id = 0; id < n_objects; ++id) {
    ViewSample s;
    s.id = id;
    s.shape = random_shape(g, seed, id);
    s.gt = generate_shape(s.shape, g);
    for (std::size_t m = 0; m < m_views; ++m) {
      const double az = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(m_views);
      s.azimuths.push_back(az);
      s.silhouettes.push_back(render_silhouette(s.gt, az, options.image_size));
    }
    s.embeddings = embedder.embed(s.silhouettes);
    s.validation = is_validation_id(id);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

namespace {

std::string object_stem(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "obj_%05zu", id);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string shape_params(const ShapeSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << s.origin[0] << ',' << s.origin[1] << ',' << s.origin[2] << ';' << s.extent[0] << ','
     << s.extent[1] << ',' << s.extent[2] << ';' << s.center[0] << ',' << s.center[1] << ','
     << s.center[2] << ';' << s.radius << ';' << s.arm << ';' << s.thickness << ';'
     << s.quarter_turns;
  return os.str();
}

ShapeSpec parse_shape_params(ShapeKind kind, const std::string& text) {
  ShapeSpec s;
  s.kind = kind;
  std::string t = text;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::replace(t.begin(), t.end(), ';', ' ');
  std::istringstream is(t);
  is >> s.origin[0] >> s.origin[1] >> s.origin[2] >> s.extent[0] >> s.extent[1] >> s.extent[2] >>
      s.center[0] >> s.center[1] >> s.center[2] >> s.radius >> s.arm >> s.thickness >>
      s.quarter_turns;
  if (!is) throw DataError("manifest: malformed shape parameters '" + text + "'");
  return s;
}

}  // namespace

std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "grids");
  fs::create_directories(dir / "views");
  const DatasetHeader& h = ds.header;
  std::ostringstream manifest;
  manifest << "# volt synthetic dataset v1\n"
           << "seed = " << h.seed << "\n"
           << "g = " << h.g << "\n"
           << "views = " << h.views << "\n"
           << "image_size = " << h.image_size << "\n"
           << "embed_dim = " << h.embed_dim << "\n"
           << "embedder_seed = " << h.embedder_seed << "\n"
           << "embedder_fingerprint = " << hex64(h.embedder_fingerprint) << "\n"
           << "objects = " << ds.samples.size() << "\n"
           << "# id kind azimuths grid embeddings silhouettes split shape\n";
  for (const ViewSample& s : ds.samples) {
    const std::string stem = object_stem(s.id);
    const std::string grid_rel = "grids/" + stem + ".vg";
    const std::string emb_rel = "views/" + stem + ".emb";
    const std::string sil_rel = "views/" + stem + ".sil";
    save_grid(dir / grid_rel, s.gt);
    {
      std::ofstream os(dir / emb_rel, std::ios::binary);
      if (!os) throw DataError("cannot write " + (dir / emb_rel).string());
      os.write("EMB1", 4);
      le::put_u32(os, static_cast<std::uint32_t>(s.embeddings.rows()));
      le::put_u32(os, static_cast<std::uint32_t>(s.embeddings.cols()));
      for (double v : s.embeddings.data()) le::put_f64(os, v);
    }
    {
      std::ofstream os(dir / sil_rel, std::ios::binary);
      if (!os) throw DataError("cannot write " + (dir / sil_rel).string());
      os.write("SIL1", 4);
      le::put_u32(os, static_cast<std::uint32_t>(s.silhouettes.size()));
      le::put_u32(os, static_cast<std::uint32_t>(h.image_size));
      for (const Silhouette& sil : s.silhouettes) {
        os.write(reinterpret_cast<const char*>(sil.pixels.data()),
                 static_cast<std::streamsize>(sil.pixels.size()));
      }
    }
    manifest << "object " << s.id << ' ' << shape_kind_name(s.shape.kind) << ' '
             << s.azimuths.size() << ' ' << grid_rel << ' ' << emb_rel << ' ' << sil_rel << ' '
             << (s.validation ? "val" : "train") << ' ' << shape_params(s.shape) << "\n";
  }
  const fs::path manifest_path = dir / "manifest.txt";
  std::ofstream os(manifest_path, std::ios::binary);
  if (!os) throw DataError("cannot write " + manifest_path.string());
  os << manifest.str();
  return manifest_path;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.txt";
  std::ifstream is(manifest_path);
  if (!is) throw DataError("no dataset manifest at " + manifest_path.string());
  Dataset ds;
  DatasetHeader& h = ds.header;
  std::size_t declared_objects = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "object") {
      ViewSample s;
      std::string kind, grid_rel, emb_rel, sil_rel, split, params;
      std::size_t n_az = 0;
      ls >> s.id >> kind >> n_az >> grid_rel >> emb_rel >> sil_rel >> split >> params;
      if (!ls) throw DataError("manifest: malformed object line: " + line);
      s.shape = parse_shape_params(parse_shape_kind(kind), params);
      s.validation = split == "val";
      s.gt = load_grid(dir / grid_rel);
      if (s.gt.g() != h.g) throw DataError("dataset: grid resolution differs from header");
      std::ifstream es(dir / emb_rel, std::ios::binary);
      char magic[4];
      es.read(magic, 4);
      if (!es || std::string(magic, 4) != "EMB1") throw DataError("bad embedding file " + emb_rel);
      const std::size_t m = le::get_u32(es), d = le::get_u32(es);
      if (m != n_az || d != h.embed_dim) throw DataError("embedding file shape mismatch: " + emb_rel);
      std::vector<double> vals(m * d);
      for (double& v : vals) v = le::get_f64(es);
      s.embeddings = Tensor({m, d}, std::move(vals));
      std::ifstream ss(dir / sil_rel, std::ios::binary);
      ss.read(magic, 4);
      if (!ss || std::string(magic, 4) != "SIL1") throw DataError("bad silhouette file " + sil_rel);
      const std::size_t sm = le::get_u32(ss), p = le::get_u32(ss);
      if (sm != m || p != h.image_size) throw DataError("silhouette file shape mismatch: " + sil_rel);
      for (std::size_t v = 0; v < m; ++v) {
        Silhouette sil{p, std::vector<std::uint8_t>(p * p)};
        ss.read(reinterpret_cast<char*>(sil.pixels.data()), static_cast<std::streamsize>(p * p));
        if (!ss) throw DataError("truncated silhouette file " + sil_rel);
        sil.pixels.shrink_to_fit();
        s.silhouettes.push_back(std::move(sil));
        s.azimuths.push_back(2.0 * std::numbers::pi * static_cast<double>(v) /
                             static_cast<double>(h.views));
      }
      ds.samples.push_back(std::move(s));
      continue;
    }
    std::string eq, value;
    ls >> eq >> value;
    if (eq != "=") throw DataError("manifest: malformed line: " + line);
    if (key == "seed") h.seed = std::stoull(value);
    else if (key == "g") h.g = std::stoull(value);
    else if (key == "views") h.views = std::stoull(value);
    else if (key == "image_size") h.image_size = std::stoull(value);
    else if (key == "embed_dim") h.embed_dim = std::stoull(value);
    else if (key == "embedder_seed") h.embedder_seed = std::stoull(value);
    else if (key == "embedder_fingerprint") h.embedder_fingerprint = std::stoull(value, nullptr, 16);
    else if (key == "objects") declared_objects = std::stoull(value);
    else throw DataError("manifest: unknown key '" + key + "'");
  }
  if (ds.samples.size() != declared_objects) {
    throw DataError("manifest declares " + std::to_string(declared_objects) + " objects, found " +
                    std::to_string(ds.samples.size()));
  }
  const ViewEmbedder embedder(h.embedder_seed, h.image_size, h.embed_dim);
  if (embedder.fingerprint() != h.embedder_fingerprint) {
    throw DataError("dataset embedder fingerprint " + hex64(h.embedder_fingerprint) +
                    " does not match embedder seed (expected " + hex64(embedder.fingerprint()) + ")");
  }
  return ds;
}

}  // namespace volt
