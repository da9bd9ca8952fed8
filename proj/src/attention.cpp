#include "volt/attention.hpp"

#include <cmath>
#include <string>

#include "volt/error.hpp"

namespace volt::attention {
namespace {

struct HeadGeometry {
  std::size_t d = 0;
  std::size_t d_k = 0;
};

HeadGeometry check_heads(std::span<const HeadVars> heads, std::size_t d_in) {
  if (heads.empty()) throw ShapeError("multi-head attention: no heads");
  const Tensor& first = heads.front().w_q.value();
  require_rank2(first, "head projection");
  const HeadGeometry g{first.rows(), first.cols()};
  if (g.d != d_in) {
    throw ShapeError("head projection expects d=" + std::to_string(g.d) + ", input has " +
                     std::to_string(d_in));
  }
  for (const HeadVars& h : heads) {
    for (const Var* w : {&h.w_q, &h.w_k, &h.w_v}) {
      const Tensor& t = w->value();
      if (t.rank() != 2 || t.rows() != g.d || t.cols() != g.d_k) {
        throw ShapeError("head projections must all be " + std::to_string(g.d) + "x" +
                         std::to_string(g.d_k) + ", got " + t.shape_string());
      }
    }
  }
  return g;
}

void check_output_projection(const Tensor& w, std::size_t rows, const char* what) {
  if (w.rank() != 2 || w.rows() != rows) {
    throw ShapeError(std::string(what) + " must have " + std::to_string(rows) + " rows, got " +
                     w.shape_string());
  }
}

// cat(A^1..A^H) with per-head score capture.
struct Heads {
  Var cat;
  std::vector<Tensor> scores;
};

Heads run_heads(Var queries_from, Var keys_from, std::span<const HeadVars> heads) {
  Heads out;
  out.scores.reserve(heads.size());
  for (const HeadVars& h : heads) {
    const AttnVars a = attn(ad::matmul(queries_from, h.w_q), ad::matmul(keys_from, h.w_k),
                            ad::matmul(keys_from, h.w_v));
    out.scores.push_back(a.scores.value());
    out.cat = out.cat.valid() ? ad::concat_cols(out.cat, a.output) : a.output;
  }
  return out;
}

std::vector<HeadVars> to_vars(Tape& tape, std::span<const HeadParams> heads) {
  std::vector<HeadVars> vars;
  vars.reserve(heads.size());
  for (const HeadParams& h : heads) {
    vars.push_back({tape.constant(h.w_q), tape.constant(h.w_k), tape.constant(h.w_v)});
  }
  return vars;
}

}  // namespace

std::string_view role_name(TraceRole role) {
  switch (role) {
    case TraceRole::ViewView: return "view-view";
    case TraceRole::VolumeVolume: return "volume-volume";
    case TraceRole::ViewVolume: return "view-volume";
  }
  return "unknown";
}

AttnVars attn(Var q, Var k, Var v) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  require_rank2(qv, "attn q");
  require_rank2(kv, "attn k");
  require_rank2(vv, "attn v");
  if (qv.cols() != kv.cols()) {
    throw ShapeError("attn: query and key widths differ: " + qv.shape_string() + " vs " +
                     kv.shape_string());
  }
  if (kv.rows() != vv.rows()) {
    throw ShapeError("attn: key and value row counts differ: " + kv.shape_string() + " vs " +
                     vv.shape_string());
  }
  if (kv.rows() == 0) throw ShapeError("attn: no keys");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(qv.cols()));
  const Var scores = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_sqrt));
  return {ad::matmul(scores, v), scores};
}

Var diview(Var a, Var x0) {
  if (a.value().rows() != x0.value().rows()) {
    throw ShapeError("diview: row counts differ: " + a.value().shape_string() + " vs " +
                     x0.value().shape_string());
  }
  return ad::concat_cols(a, x0);
}

MultiHeadVars mh_deatt(Var x, Var x0, std::span<const HeadVars> heads, Var w_view, bool enhance) {
  const Tensor& xv = x.value();
  require_rank2(xv, "mh_deatt x");
  const HeadGeometry g = check_heads(heads, xv.cols());
  if (enhance && !x0.value().same_shape(xv)) {
    throw ShapeError("mh_deatt: x0 " + x0.value().shape_string() + " must match x " +
                     xv.shape_string());
  }
  const std::size_t cat_width = heads.size() * g.d_k;
  check_output_projection(w_view.value(), enhance ? cat_width + xv.cols() : cat_width,
                          "mh_deatt w_view");
  Heads h = run_heads(x, x, heads);
  const Var mixed = enhance ? diview(h.cat, x0) : h.cat;
  return {ad::matmul(mixed, w_view), std::move(h.scores)};
}

MultiHeadVars mh_vol_attn(Var y, std::span<const HeadVars> heads, Var w_vol) {
  require_rank2(y.value(), "mh_vol_attn y");
  const HeadGeometry g = check_heads(heads, y.value().cols());
  check_output_projection(w_vol.value(), heads.size() * g.d_k, "mh_vol_attn w_vol");
  Heads h = run_heads(y, y, heads);
  return {ad::matmul(h.cat, w_vol), std::move(h.scores)};
}

MultiHeadVars mh_view_vol_attn(Var y, Var x_l, std::span<const HeadVars> heads, Var w) {
  require_rank2(y.value(), "mh_view_vol_attn y");
  require_rank2(x_l.value(), "mh_view_vol_attn x_l");
  const HeadGeometry g = check_heads(heads, y.value().cols());
  if (x_l.value().cols() != g.d) {
    throw ShapeError("mh_view_vol_attn: view embeddings have width " +
                     std::to_string(x_l.value().cols()) + ", expected " + std::to_string(g.d));
  }
  check_output_projection(w.value(), heads.size() * g.d_k, "mh_view_vol_attn w");
  Heads h = run_heads(y, x_l, heads);
  return {ad::matmul(h.cat, w), std::move(h.scores)};
}

AttnResult attn(const Tensor& q, const Tensor& k, const Tensor& v) {
  Tape tape(false);
  const AttnVars r = attn(tape.constant(q), tape.constant(k), tape.constant(v));
  return {r.output.value(), r.scores.value()};
}

Tensor diview(const Tensor& a, const Tensor& x0) {
  Tape tape(false);
  return diview(tape.constant(a), tape.constant(x0)).value();
}

MultiHeadResult mh_deatt(const Tensor& x, const Tensor& x0, std::span<const HeadParams> heads,
                         const Tensor& w_view, bool enhance) {
  Tape tape(false);
  const auto hv = to_vars(tape, heads);
  MultiHeadVars r = mh_deatt(tape.constant(x), tape.constant(x0), hv, tape.constant(w_view), enhance);
  return {r.out.value(), std::move(r.scores)};
}

MultiHeadResult mh_vol_attn(const Tensor& y, std::span<const HeadParams> heads,
                            const Tensor& w_vol) {
  Tape tape(false);
  const auto hv = to_vars(tape, heads);
  MultiHeadVars r = mh_vol_attn(tape.constant(y), hv, tape.constant(w_vol));
  return {r.out.value(), std::move(r.scores)};
}

MultiHeadResult mh_view_vol_attn(const Tensor& y, const Tensor& x_l,
                                 std::span<const HeadParams> heads, const Tensor& w) {
  Tape tape(false);
  const auto hv = to_vars(tape, heads);
  MultiHeadVars r = mh_view_vol_attn(tape.constant(y), tape.constant(x_l), hv, tape.constant(w));
  return {r.out.value(), std::move(r.scores)};
}

}  // namespace volt::attention
