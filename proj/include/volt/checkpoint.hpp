#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "volt/adamw.hpp"
#include "volt/model.hpp"
#include "volt/run_config.hpp"

namespace volt {

inline constexpr std::uint32_t kCheckpointFormat = 1;

// Binary layout, little-endian:
//   "VLTC", u32 format, u32 config length + config text (key = value lines),
//   u32 tensor count, then per tensor: u16 name length, name bytes, u8 rank,
//   u32 per dim, f64 values.
// Optimizer state, when saved, travels as extra tensors named
// "opt.m/<param>", "opt.v/<param>" and "opt.t".
struct Checkpoint {
  RunConfig config;
  VoltModel model;
  std::optional<AdamWState> optimizer;
};

void write_checkpoint(std::ostream& os, const RunConfig& config, const VoltModel& model,
                      const AdamWState* optimizer = nullptr);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const RunConfig& config, const VoltModel& model,
                     const AdamWState* optimizer = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace volt
