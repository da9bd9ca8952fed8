#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "volt/autodiff.hpp"
#include "volt/tensor.hpp"

namespace volt::attention {

// Per-head projections, each d x d_k. No biases.
struct HeadParams {
  Tensor w_q, w_k, w_v;
};

struct HeadVars {
  Var w_q, w_k, w_v;
};

enum class TraceRole { ViewView, VolumeVolume, ViewVolume };
std::string_view role_name(TraceRole role);

// Attention scores of one head in one layer; every row is a probability vector.
struct AttentionTrace {
  std::size_t layer = 0;
  std::size_t head = 0;
  TraceRole role = TraceRole::ViewView;
  Tensor scores;
};

// ---- differentiable forms (used by the model) -------------------------------

struct AttnVars {
  Var output;
  Var scores;
};

// softmax(q k^T / sqrt(d_k)) v
AttnVars attn(Var q, Var k, Var v);

// Feature-dimension concatenation [a | x0]; the last d columns are x0.
Var diview(Var a, Var x0);

struct MultiHeadVars {
  Var out;
  std::vector<Tensor> scores;  // one per head, copied off the tape
};

// enhance=true:  [cat(A^1..A^H) | x0] * w_view, w_view is (H*d_k + d) x d.
// enhance=false: cat(A^1..A^H) * w_view,         w_view is (H*d_k) x d.
// Queries, keys and values all come from x.
MultiHeadVars mh_deatt(Var x, Var x0, std::span<const HeadVars> heads, Var w_view, bool enhance);

// Self-attention over volume tokens: cat(A^h) * w_vol.
MultiHeadVars mh_vol_attn(Var y, std::span<const HeadVars> heads, Var w_vol);

// Queries from y, keys and values from x_l: cat(A^h) * w. Scores are N x M.
MultiHeadVars mh_view_vol_attn(Var y, Var x_l, std::span<const HeadVars> heads, Var w);

// ---- value forms -------------------------------------------------------------

struct AttnResult {
  Tensor output;
  Tensor scores;
};

struct MultiHeadResult {
  Tensor out;
  std::vector<Tensor> scores;
};

AttnResult attn(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor diview(const Tensor& a, const Tensor& x0);
MultiHeadResult mh_deatt(const Tensor& x, const Tensor& x0, std::span<const HeadParams> heads,
                         const Tensor& w_view, bool enhance);
MultiHeadResult mh_vol_attn(const Tensor& y, std::span<const HeadParams> heads,
                            const Tensor& w_vol);
MultiHeadResult mh_view_vol_attn(const Tensor& y, const Tensor& x_l,
                                 std::span<const HeadParams> heads, const Tensor& w);

}  // namespace volt::attention
