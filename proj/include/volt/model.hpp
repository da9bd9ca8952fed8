#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "volt/attention.hpp"
#include "volt/autodiff.hpp"
#include "volt/param_store.hpp"
#include "volt/rng.hpp"
#include "volt/tensor.hpp"
#include "volt/voxel_grid.hpp"

namespace volt {

struct ModelConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t d_k = 16;
  std::size_t ffn_hidden = 256;
  std::size_t l_enc = 6;
  std::size_t l_dec = 6;
  std::size_t g = 16;  // voxels per axis
  std::size_t s = 4;   // sub-volume edge owned by one volume token
  std::size_t m_max = 24;
  bool enhance = true;  // EVolT when true, VolT otherwise

  std::size_t token_grid() const { return g / s; }
  std::size_t tokens() const { return token_grid() * token_grid() * token_grid(); }
  std::size_t logits_per_token() const { return s * s * s; }

  // Throws ConfigError on any violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Token stitching between the (G/s)^3 token lattice and the G^3 voxel grid.
// Token n sits at lattice (a,b,c) with n = a + T*(b + T*c); offset
// o = ox + s*(oy + s*oz) inside its sub-volume.
struct TokenSlot {
  std::size_t token = 0;
  std::size_t offset = 0;
};
TokenSlot voxel_to_token(const ModelConfig& cfg, std::size_t i, std::size_t j, std::size_t k);
std::array<std::size_t, 3> token_to_voxel(const ModelConfig& cfg, TokenSlot slot);

// N x s^3 per-token values -> G^3 grid, and back.
VoxelGrid stitch(const ModelConfig& cfg, const Tensor& per_token, GridKind kind);
Tensor unstitch(const ModelConfig& cfg, const VoxelGrid& grid);

// Frozen 3D sinusoidal encoding of the token lattice, N x d.
Tensor volume_positional_encoding(const ModelConfig& cfg);

// Parameter names, kept in one place so checkpoints and tests agree.
namespace names {
std::string enc(std::size_t layer, const std::string& leaf);
std::string dec(std::size_t layer, const std::string& leaf);
inline constexpr const char* kQueries = "queries";
inline constexpr const char* kPositional = "pos_enc";
inline constexpr const char* kHead = "head.w";
}  // namespace names

class VoltModel {
 public:
  VoltModel(ModelConfig config, ParamStore params);

  // Fresh initialization: Xavier-uniform linear weights, queries ~ N(0, 0.02),
  // frozen sinusoidal positional encodings, zero output head.
  static VoltModel create(const ModelConfig& config, const Rng& rng);

  const ModelConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

 private:
  ModelConfig config_;
  ParamStore params_;
};

// Builds a fresh parameter store for cfg (used by create and checkpoint load).
ParamStore init_params(const ModelConfig& cfg, const Rng& rng);

struct ForwardOptions {
  bool capture_traces = true;
  bool capture_decoder_traces = false;
};

// Everything one forward pass leaves on the tape.
struct ForwardPass {
  Var x_l;     // M x d encoder output
  Var y_l;     // N x d decoder output
  Var logits;  // N x s^3
  Var probs;   // sigmoid(logits)
  std::vector<attention::AttentionTrace> traces;
};

Var encode_on(Tape& tape, const ModelConfig& cfg, const ParamStore& params, Var x0,
              const ForwardOptions& opts, std::vector<attention::AttentionTrace>* traces);
Var decode_on(Tape& tape, const ModelConfig& cfg, const ParamStore& params, Var x_l,
              const ForwardOptions& opts, std::vector<attention::AttentionTrace>* traces);
ForwardPass forward(Tape& tape, const ModelConfig& cfg, const ParamStore& params,
                    const Tensor& views, const ForwardOptions& opts = {});

struct EncodeResult {
  Tensor x_l;
  std::vector<attention::AttentionTrace> traces;
};
struct DecodeResult {
  Tensor y_l;
  std::vector<attention::AttentionTrace> traces;
};

EncodeResult encode(const Tensor& x0, const VoltModel& model);
DecodeResult decode(const Tensor& x_l, const VoltModel& model);
VoxelGrid predict_volume(const Tensor& views, const VoltModel& model);

// Mean voxel BCE with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(const VoxelGrid& pred, const VoxelGrid& gt);

// Loss of one sample; accumulates the parameter gradient into grads when
// non-null. target is the ground truth in token-major layout (see unstitch).
// probs_out, when non-null, receives the per-token probabilities.
double sample_loss(const ModelConfig& cfg, const ParamStore& params, const Tensor& views,
                   const Tensor& target, ParamStore* grads, Tensor* probs_out = nullptr);

}  // namespace volt
