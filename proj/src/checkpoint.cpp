#include "volt/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "volt/error.hpp"
#include "volt/voxel_grid.hpp"

namespace volt {
namespace {

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  if (name.size() > 0xffff) throw Error("checkpoint: tensor name too long");
  if (t.rank() > 0xff) throw Error("checkpoint: tensor rank too large");
  le::put_u16(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  os.put(static_cast<char>(t.rank()));
  for (std::size_t dim : t.shape()) le::put_u32(os, static_cast<std::uint32_t>(dim));
  for (double v : t.data()) le::put_f64(os, v);
}

std::pair<std::string, Tensor> read_tensor(std::istream& is) {
  const std::size_t name_len = le::get_u16(is);
  std::string name(name_len, '\0');
  is.read(name.data(), static_cast<std::streamsize>(name_len));
  if (!is) throw DataError("checkpoint: truncated tensor name");
  const std::size_t rank = le::get_u8(is);
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (auto& dim : shape) {
    dim = le::get_u32(is);
    count *= dim;
  }
  if (count > (std::size_t{1} << 32)) throw DataError("checkpoint: implausible tensor size");
  std::vector<double> data(count);
  for (double& v : data) v = le::get_f64(is);
  return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

}  // namespace

void write_checkpoint(std::ostream& os, const RunConfig& config, const VoltModel& model,
                      const AdamWState* optimizer) {
  os.write("VLTC", 4);
  le::put_u32(os, kCheckpointFormat);
  const std::string text = config.to_text();
  le::put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::size_t count = model.params().size();
  if (optimizer != nullptr) count += optimizer->m.size() + optimizer->v.size() + 1;
  le::put_u32(os, static_cast<std::uint32_t>(count));
  for (const auto& e : model.params().entries()) write_tensor(os, e.name, e.value);
  if (optimizer != nullptr) {
    for (const auto& e : optimizer->m.entries()) write_tensor(os, "opt.m/" + e.name, e.value);
    for (const auto& e : optimizer->v.entries()) write_tensor(os, "opt.v/" + e.name, e.value);
    write_tensor(os, "opt.t", Tensor::vector({static_cast<double>(optimizer->t)}));
  }
  if (!os) throw DataError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "VLTC") throw DataError("checkpoint: bad magic");
  const std::uint32_t format = le::get_u32(is);
  if (format != kCheckpointFormat) {
    throw DataError("checkpoint: unsupported format " + std::to_string(format));
  }
  const std::size_t text_len = le::get_u32(is);
  std::string text(text_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(text_len));
  if (!is) throw DataError("checkpoint: truncated config block");
  RunConfig config = RunConfig::from_text(text);

  ParamStore params = init_params(config.model, Rng(0));
  std::vector<bool> seen(params.size(), false);
  AdamWState opt = AdamWState::init(params, config.optimizer());
  bool has_opt = false;

  const std::size_t count = le::get_u32(is);
  for (std::size_t n = 0; n < count; ++n) {
    auto [name, tensor] = read_tensor(is);
    ParamStore* target = &params;
    std::string key = name;
    if (name == "opt.t") {
      opt.t = static_cast<std::int64_t>(tensor[0]);
      has_opt = true;
      continue;
    }
    if (name.starts_with("opt.m/")) {
      target = &opt.m;
      key = name.substr(6);
      has_opt = true;
    } else if (name.starts_with("opt.v/")) {
      target = &opt.v;
      key = name.substr(6);
      has_opt = true;
    }
    if (!target->contains(key)) throw DataError("checkpoint: unexpected tensor " + name);
    Tensor& dst = target->get(key);
    if (!dst.same_shape(tensor)) {
      throw DataError("checkpoint: tensor " + name + " has shape " + tensor.shape_string() +
                      ", config expects " + dst.shape_string());
    }
    dst = std::move(tensor);
    if (target == &params) {
      for (std::size_t i = 0; i < params.entries().size(); ++i) {
        if (params.entries()[i].name == key) seen[i] = true;
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw DataError("checkpoint: missing tensor " + params.entries()[i].name);
  }
  Checkpoint ck{config, VoltModel(config.model, std::move(params)), std::nullopt};
  if (has_opt) ck.optimizer = std::move(opt);
  return ck;
}

void save_checkpoint(const std::string& path, const RunConfig& config, const VoltModel& model,
                     const AdamWState* optimizer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path);
  write_checkpoint(os, config, model, optimizer);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint " + path);
  return read_checkpoint(is);
}

}  // namespace volt
