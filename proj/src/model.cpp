#include "volt/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "volt/error.hpp"
#include "volt/ops.hpp"

namespace volt {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (d < 1) fail("d must be >= 1");
  if (heads < 1) fail("heads must be >= 1");
  if (d_k < 1) fail("d_k must be >= 1");
  if (ffn_hidden < 1) fail("ffn_hidden must be >= 1");
  if (l_enc < 1) fail("l_enc must be >= 1");
  if (l_dec < 1) fail("l_dec must be >= 1");
  if (s < 1 || g < 1) fail("g and s must be >= 1");
  if (g % s != 0) fail("g (" + std::to_string(g) + ") must be divisible by s (" + std::to_string(s) + ")");
  if (m_max < 1) fail("m_max must be >= 1");
}

TokenSlot voxel_to_token(const ModelConfig& cfg, std::size_t i, std::size_t j, std::size_t k) {
  const std::size_t s = cfg.s, t = cfg.token_grid();
  const std::size_t token = i / s + t * (j / s + t * (k / s));
  const std::size_t offset = i % s + s * (j % s + s * (k % s));
  return {token, offset};
}

std::array<std::size_t, 3> token_to_voxel(const ModelConfig& cfg, TokenSlot slot) {
  const std::size_t s = cfg.s, t = cfg.token_grid();
  const std::size_t a = slot.token % t, b = (slot.token / t) % t, c = slot.token / (t * t);
  const std::size_t ox = slot.offset % s, oy = (slot.offset / s) % s, oz = slot.offset / (s * s);
  return {a * s + ox, b * s + oy, c * s + oz};
}

VoxelGrid stitch(const ModelConfig& cfg, const Tensor& per_token, GridKind kind) {
  if (per_token.rows() != cfg.tokens() || per_token.cols() != cfg.logits_per_token()) {
    throw ShapeError("stitch: expected " + std::to_string(cfg.tokens()) + "x" +
                     std::to_string(cfg.logits_per_token()) + ", got " + per_token.shape_string());
  }
  VoxelGrid grid(cfg.g, kind);
  for (std::size_t n = 0; n < per_token.rows(); ++n) {
    for (std::size_t o = 0; o < per_token.cols(); ++o) {
      const auto [i, j, k] = token_to_voxel(cfg, {n, o});
      grid.at(i, j, k) = per_token(n, o);
    }
  }
  return grid;
}

Tensor unstitch(const ModelConfig& cfg, const VoxelGrid& grid) {
  if (grid.g() != cfg.g) {
    throw ShapeError("unstitch: grid resolution " + std::to_string(grid.g()) + " != " +
                     std::to_string(cfg.g));
  }
  Tensor out({cfg.tokens(), cfg.logits_per_token()});
  for (std::size_t k = 0; k < cfg.g; ++k)
    for (std::size_t j = 0; j < cfg.g; ++j)
      for (std::size_t i = 0; i < cfg.g; ++i) {
        const TokenSlot slot = voxel_to_token(cfg, i, j, k);
        out(slot.token, slot.offset) = grid.at(i, j, k);
      }
  return out;
}

Tensor volume_positional_encoding(const ModelConfig& cfg) {
  const std::size_t t = cfg.token_grid();
  const std::size_t per_axis = 2 * (cfg.d / 6);  // even width <= d/3
  Tensor pe({cfg.tokens(), cfg.d});
  for (std::size_t n = 0; n < cfg.tokens(); ++n) {
    const std::array<std::size_t, 3> coord{n % t, (n / t) % t, n / (t * t)};
    for (std::size_t axis = 0; axis < 3; ++axis) {
      for (std::size_t f = 0; f < per_axis / 2; ++f) {
        const double angle = std::numbers::pi * static_cast<double>(f + 1) *
                             (static_cast<double>(coord[axis]) + 0.5) / static_cast<double>(t);
        pe(n, axis * per_axis + 2 * f) = std::sin(angle);
        pe(n, axis * per_axis + 2 * f + 1) = std::cos(angle);
      }
    }
  }
  return pe;
}

namespace names {
std::string enc(std::size_t layer, const std::string& leaf) {
  return "enc." + std::to_string(layer) + "." + leaf;
}
std::string dec(std::size_t layer, const std::string& leaf) {
  return "dec." + std::to_string(layer) + "." + leaf;
}
}  // namespace names

namespace {

std::string head_name(const std::string& block, std::size_t h, const char* which) {
  return block + ".h" + std::to_string(h) + "." + which;
}

Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  for (double& v : w.data()) v = rng.uniform(-limit, limit);
  return w;
}

void add_linear(ParamStore& p, const Rng& rng, const std::string& name, std::size_t in,
                std::size_t out) {
  p.add(name, xavier(in, out, rng.split(name)));
}

void add_heads(ParamStore& p, const Rng& rng, const ModelConfig& cfg, const std::string& block) {
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    for (const char* which : {"wq", "wk", "wv"}) {
      add_linear(p, rng, head_name(block, h, which), cfg.d, cfg.d_k);
    }
  }
}

void add_norm(ParamStore& p, const std::string& prefix, std::size_t d) {
  p.add(prefix + ".gamma", Tensor::filled({d}, 1.0));
  p.add(prefix + ".beta", Tensor({d}));
}

void add_ffn(ParamStore& p, const Rng& rng, const ModelConfig& cfg, const std::string& prefix) {
  add_linear(p, rng, prefix + ".w1", cfg.d, cfg.ffn_hidden);
  p.add(prefix + ".b1", Tensor({cfg.ffn_hidden}));
  add_linear(p, rng, prefix + ".w2", cfg.ffn_hidden, cfg.d);
  p.add(prefix + ".b2", Tensor({cfg.d}));
}

std::vector<attention::HeadVars> head_vars(Tape& tape, const ParamStore& params,
                                           const ModelConfig& cfg, const std::string& block) {
  std::vector<attention::HeadVars> hv;
  hv.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    hv.push_back({tape.param(params, head_name(block, h, "wq")),
                  tape.param(params, head_name(block, h, "wk")),
                  tape.param(params, head_name(block, h, "wv"))});
  }
  return hv;
}

Var norm(Tape& tape, const ParamStore& params, const std::string& prefix, Var x) {
  return ad::layer_norm(x, tape.param(params, prefix + ".gamma"),
                        tape.param(params, prefix + ".beta"), kLayerNormEps);
}

Var ffn(Tape& tape, const ParamStore& params, const std::string& prefix, Var x) {
  const Var hidden = ad::relu(ad::add_row(ad::matmul(x, tape.param(params, prefix + ".w1")),
                                          tape.param(params, prefix + ".b1")));
  return ad::add_row(ad::matmul(hidden, tape.param(params, prefix + ".w2")),
                     tape.param(params, prefix + ".b2"));
}

void record(std::vector<attention::AttentionTrace>* traces, std::size_t layer,
            attention::TraceRole role, std::vector<Tensor>& scores) {
  if (traces == nullptr) return;
  for (std::size_t h = 0; h < scores.size(); ++h) {
    traces->push_back({layer, h, role, std::move(scores[h])});
  }
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, const Rng& rng) {
  cfg.validate();
  ParamStore p;
  const std::size_t cat_width = cfg.heads * cfg.d_k;
  for (std::size_t l = 0; l < cfg.l_enc; ++l) {
    add_heads(p, rng, cfg, names::enc(l, "att"));
    add_linear(p, rng, names::enc(l, "att.w_view"), cfg.enhance ? cat_width + cfg.d : cat_width,
               cfg.d);
    add_norm(p, names::enc(l, "ln1"), cfg.d);
    add_ffn(p, rng, cfg, names::enc(l, "ffn"));
    add_norm(p, names::enc(l, "ln2"), cfg.d);
  }
  for (std::size_t l = 0; l < cfg.l_dec; ++l) {
    add_heads(p, rng, cfg, names::dec(l, "vol"));
    add_linear(p, rng, names::dec(l, "vol.w"), cat_width, cfg.d);
    add_norm(p, names::dec(l, "ln1"), cfg.d);
    add_heads(p, rng, cfg, names::dec(l, "cross"));
    add_linear(p, rng, names::dec(l, "cross.w"), cat_width, cfg.d);
    add_norm(p, names::dec(l, "ln2"), cfg.d);
    add_ffn(p, rng, cfg, names::dec(l, "ffn"));
    add_norm(p, names::dec(l, "ln3"), cfg.d);
  }
  Tensor queries({cfg.tokens(), cfg.d});
  Rng qrng = rng.split(names::kQueries);
  for (double& v : queries.data()) v = qrng.normal(0.0, 0.02);
  p.add(names::kQueries, std::move(queries));
  p.add(names::kPositional, volume_positional_encoding(cfg), /*trainable=*/false);
  p.add(names::kHead, Tensor({cfg.d, cfg.logits_per_token()}));
  return p;
}

VoltModel::VoltModel(ModelConfig config, ParamStore params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
}

VoltModel VoltModel::create(const ModelConfig& config, const Rng& rng) {
  return VoltModel(config, init_params(config, rng));
}

Var encode_on(Tape& tape, const ModelConfig& cfg, const ParamStore& params, Var x0,
              const ForwardOptions& opts, std::vector<attention::AttentionTrace>* traces) {
  const Tensor& xv = x0.value();
  require_rank2(xv, "encode input");
  if (xv.rows() == 0) throw DataError("encode: no views");
  if (xv.rows() > cfg.m_max) {
    throw DataError("encode: " + std::to_string(xv.rows()) + " views exceed m_max " +
                    std::to_string(cfg.m_max));
  }
  if (xv.cols() != cfg.d) {
    throw ShapeError("encode: view embeddings have width " + std::to_string(xv.cols()) +
                     ", model expects " + std::to_string(cfg.d));
  }
  Var x = x0;
  for (std::size_t l = 0; l < cfg.l_enc; ++l) {
    const auto heads = head_vars(tape, params, cfg, names::enc(l, "att"));
    auto att = attention::mh_deatt(x, x0, heads, tape.param(params, names::enc(l, "att.w_view")),
                                   cfg.enhance);
    if (opts.capture_traces) record(traces, l, attention::TraceRole::ViewView, att.scores);
    const Var x_hat = norm(tape, params, names::enc(l, "ln1"), ad::add(att.out, x));
    const Var f = ffn(tape, params, names::enc(l, "ffn"), x_hat);
    x = norm(tape, params, names::enc(l, "ln2"), ad::add(f, x_hat));
  }
  return x;
}

Var decode_on(Tape& tape, const ModelConfig& cfg, const ParamStore& params, Var x_l,
              const ForwardOptions& opts, std::vector<attention::AttentionTrace>* traces) {
  if (x_l.value().cols() != cfg.d) throw ShapeError("decode: view embedding width mismatch");
  Var y = ad::add(tape.param(params, names::kQueries), tape.param(params, names::kPositional));
  const bool keep = opts.capture_traces && opts.capture_decoder_traces;
  for (std::size_t l = 0; l < cfg.l_dec; ++l) {
    auto vol = attention::mh_vol_attn(y, head_vars(tape, params, cfg, names::dec(l, "vol")),
                                      tape.param(params, names::dec(l, "vol.w")));
    if (keep) record(traces, l, attention::TraceRole::VolumeVolume, vol.scores);
    const Var y_hat = norm(tape, params, names::dec(l, "ln1"), ad::add(vol.out, y));
    auto cross = attention::mh_view_vol_attn(y_hat, x_l,
                                             head_vars(tape, params, cfg, names::dec(l, "cross")),
                                             tape.param(params, names::dec(l, "cross.w")));
    if (keep) record(traces, l, attention::TraceRole::ViewVolume, cross.scores);
    const Var y_tilde = norm(tape, params, names::dec(l, "ln2"), ad::add(cross.out, y_hat));
    const Var f = ffn(tape, params, names::dec(l, "ffn"), y_tilde);
    y = norm(tape, params, names::dec(l, "ln3"), ad::add(f, y_tilde));
  }
  return y;
}

ForwardPass forward(Tape& tape, const ModelConfig& cfg, const ParamStore& params,
                    const Tensor& views, const ForwardOptions& opts) {
  ForwardPass pass;
  pass.x_l = encode_on(tape, cfg, params, tape.constant(views), opts, &pass.traces);
  pass.y_l = decode_on(tape, cfg, params, pass.x_l, opts, &pass.traces);
  pass.logits = ad::matmul(pass.y_l, tape.param(params, names::kHead));
  pass.probs = ad::sigmoid(pass.logits);
  return pass;
}

EncodeResult encode(const Tensor& x0, const VoltModel& model) {
  Tape tape(false);
  EncodeResult r;
  r.x_l = encode_on(tape, model.config(), model.params(), tape.constant(x0), {}, &r.traces)
              .value();
  return r;
}

DecodeResult decode(const Tensor& x_l, const VoltModel& model) {
  Tape tape(false);
  DecodeResult r;
  ForwardOptions opts;
  opts.capture_decoder_traces = true;
  r.y_l = decode_on(tape, model.config(), model.params(), tape.constant(x_l), opts, &r.traces)
              .value();
  return r;
}

VoxelGrid predict_volume(const Tensor& views, const VoltModel& model) {
  Tape tape(false);
  ForwardOptions opts;
  opts.capture_traces = false;
  const ForwardPass pass = forward(tape, model.config(), model.params(), views, opts);
  return stitch(model.config(), pass.probs.value(), GridKind::Probabilistic);
}

double bce_loss(const VoxelGrid& pred, const VoxelGrid& gt) {
  if (pred.g() != gt.g()) {
    throw ShapeError("bce_loss: grid sizes differ (" + std::to_string(pred.g()) + " vs " +
                     std::to_string(gt.g()) + ")");
  }
  return bce_mean(Tensor({pred.size()}, pred.values()), Tensor({gt.size()}, gt.values()));
}

double sample_loss(const ModelConfig& cfg, const ParamStore& params, const Tensor& views,
                   const Tensor& target, ParamStore* grads, Tensor* probs_out) {
  Tape tape(grads != nullptr);
  ForwardOptions opts;
  opts.capture_traces = false;
  const ForwardPass pass = forward(tape, cfg, params, views, opts);
  const Var loss = ad::bce(pass.probs, target);
  if (grads != nullptr) {
    tape.backward(loss);
    tape.collect_param_grads(*grads);
  }
  if (probs_out != nullptr) *probs_out = pass.probs.value();
  return loss.value()[0];
}

}  // namespace volt
