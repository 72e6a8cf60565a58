#include "attnkit/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace attnkit {

namespace {

std::vector<std::string> cat(const std::vector<std::string>& batch,
                             std::initializer_list<const char*> tail) {
  std::vector<std::string> out = batch;
  for (const char* s : tail) out.emplace_back(s);
  return out;
}

// Axis names of a node's value with the last `replaced` names swapped out.
std::vector<std::string> swap_tail(const Tape& tape, NodeId id,
                                   std::initializer_list<const char*> tail) {
  const auto& axes = tape.value(id).axes();
  if (axes.size() < tail.size()) throw std::invalid_argument("rank too small for axis relabel");
  std::vector<std::string> names;
  names.reserve(axes.size());
  for (size_t i = 0; i < axes.size() - tail.size(); ++i) names.push_back(axes[i].name);
  for (const char* s : tail) names.emplace_back(s);
  return names;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

Tensor bind(const Tensor& t, const std::vector<std::string>& names) {
  if (t.rank() != static_cast<int>(names.size()))
    throw std::invalid_argument("attention input has unexpected rank");
  return t.renamed(names);
}

void fill_trace(AttentionTrace* out, const Tape& tape, const AttentionTraceNodes& nodes) {
  if (!out) return;
  out->q = tape.value(nodes.q);
  out->k = tape.value(nodes.k);
  out->v = tape.value(nodes.v);
  out->j = tape.value(nodes.j);
  out->l = tape.value(nodes.l);
  out->w = tape.value(nodes.w);
  out->u = tape.value(nodes.u);
  out->o = tape.value(nodes.o);
  out->y = tape.value(nodes.y);
  if (nodes.r_xl >= 0) out->r_xl = tape.value(nodes.r_xl);
  if (nodes.r_ml >= 0) out->r_ml = tape.value(nodes.r_ml);
  if (nodes.r_xw >= 0) out->r_xw = tape.value(nodes.r_xw);
  if (nodes.r_mw >= 0) out->r_mw = tape.value(nodes.r_mw);
}

}  // namespace

void AttentionDims::validate() const {
  const int64_t vals[] = {n, m, d_x, d_m, d_y, d_k, d_v, h_k, h, h_v};
  for (int64_t v : vals) require(v >= 1, "attention dimensions must be positive");
}

AttentionDims AttentionDims::uniform(int64_t n, int64_t m, int64_t d_model, int64_t d_k,
                                     int64_t d_v, int64_t h_k, int64_t h, int64_t h_v) {
  AttentionDims d;
  d.n = n;
  d.m = m;
  d.d_x = d.d_m = d.d_y = d_model;
  d.d_k = d_k;
  d.d_v = d_v;
  d.h_k = h_k;
  d.h = h;
  d.h_v = h_v;
  d.validate();
  return d;
}

// ---- Tape builders -------------------------------------------------------

NodeId dot_product_attention_tape(Tape& tape, NodeId x, NodeId m,
                                  const std::vector<std::string>& batch, CounterChannel* counter) {
  NodeId l = tape.einsum({x, m}, cat(batch, {"n", "m"}), counter, "logits");
  NodeId w = tape.softmax(l, "m");
  return tape.einsum({w, m}, cat(batch, {"n", "d"}), counter, "outputs");
}

NodeId dot_product_attention_with_projections_tape(Tape& tape, NodeId x, NodeId m, NodeId p_q,
                                                   NodeId p_k, NodeId p_v, NodeId p_o,
                                                   const std::vector<std::string>& batch,
                                                   CounterChannel* counter) {
  NodeId q = tape.einsum({x, p_q}, cat(batch, {"n", "d_k"}), counter, "queries");
  NodeId k = tape.einsum({m, p_k}, cat(batch, {"m", "d_k"}), counter, "keys");
  NodeId v = tape.einsum({m, p_v}, cat(batch, {"m", "d_v"}), counter, "values");
  NodeId l = tape.einsum({q, k}, cat(batch, {"n", "m"}), counter, "logits");
  NodeId w = tape.softmax(l, "m");
  NodeId o = tape.einsum({w, v}, cat(batch, {"n", "d_v"}), counter, "outputs-weighted-sum");
  return tape.einsum({o, p_o}, cat(batch, {"n", "d_y"}), counter, "output-projection");
}

NodeId multi_head_attention_tape(Tape& tape, NodeId x, NodeId m, const MhParamNodes& p,
                                 const std::vector<std::string>& batch, CounterChannel* counter,
                                 AttentionTraceNodes* trace) {
  NodeId q = tape.einsum({x, p.p_q}, cat(batch, {"n", "d_k", "h"}), counter, "queries");
  NodeId k = tape.einsum({m, p.p_k}, cat(batch, {"m", "d_k", "h"}), counter, "keys");
  NodeId v = tape.einsum({m, p.p_v}, cat(batch, {"m", "d_v", "h"}), counter, "values");
  NodeId l = tape.einsum({q, k}, cat(batch, {"n", "m", "h"}), counter, "logits");
  NodeId w = tape.softmax(l, "m");
  NodeId o = tape.einsum({w, v}, cat(batch, {"n", "d_v", "h"}), counter, "outputs-weighted-sum");
  NodeId y = tape.einsum({o, p.p_o}, cat(batch, {"n", "d_y"}), counter, "output-projection");
  if (trace) {
    trace->q = q;
    trace->k = k;
    trace->v = v;
    trace->j = l;
    trace->l = l;
    trace->w = w;
    trace->u = w;
    trace->o = o;
    trace->y = y;
  }
  return y;
}

NodeId talking_heads_attention_tape(Tape& tape, NodeId x, NodeId m, const ThParamNodes& p,
                                    const std::vector<std::string>& batch, CounterChannel* counter,
                                    AttentionTraceNodes* trace, bool apply_logits,
                                    bool apply_weights) {
  NodeId q = tape.einsum({x, p.p_q}, cat(batch, {"n", "d_k", "h_k"}), counter, "queries");
  NodeId k = tape.einsum({m, p.p_k}, cat(batch, {"m", "d_k", "h_k"}), counter, "keys");
  NodeId v = tape.einsum({m, p.p_v}, cat(batch, {"m", "d_v", "h_v"}), counter, "values");
  NodeId j = tape.einsum({q, k}, cat(batch, {"n", "m", "h_k"}), counter, "dot-product");
  NodeId l;
  if (apply_logits) {
    l = tape.einsum({j, p.p_l}, cat(batch, {"n", "m", "h"}), counter, "logits-projection");
  } else {
    require(tape.value(j).axis_size("h_k") == tape.value(p.p_l).axis_size("h"),
            "logits-only hybrid requires h_k == h");
    l = tape.rename(j, swap_tail(tape, j, {"n", "m", "h"}));
  }
  NodeId w = tape.softmax(l, "m");
  NodeId u;
  if (apply_weights) {
    u = tape.einsum({w, p.p_w}, cat(batch, {"n", "m", "h_v"}), counter, "weights-projection");
  } else {
    require(tape.value(w).axis_size("h") == tape.value(p.p_w).axis_size("h_v"),
            "weights-only hybrid requires h == h_v");
    u = tape.rename(w, swap_tail(tape, w, {"n", "m", "h_v"}));
  }
  NodeId o = tape.einsum({u, v}, cat(batch, {"n", "d_v", "h_v"}), counter, "outputs-weighted-sum");
  NodeId y = tape.einsum({o, p.p_o}, cat(batch, {"n", "d_y"}), counter, "output-projection");
  if (trace) {
    trace->q = q;
    trace->k = k;
    trace->v = v;
    trace->j = j;
    trace->l = l;
    trace->w = w;
    trace->u = u;
    trace->o = o;
    trace->y = y;
  }
  return y;
}

NodeId dynamic_projection_attention_tape(Tape& tape, NodeId x, NodeId m, const DynParamNodes& p,
                                         const std::vector<std::string>& batch,
                                         CounterChannel* counter, AttentionTraceNodes* trace) {
  NodeId q = tape.einsum({x, p.th.p_q}, cat(batch, {"n", "d_k", "h_k"}), counter, "queries");
  NodeId k = tape.einsum({m, p.th.p_k}, cat(batch, {"m", "d_k", "h_k"}), counter, "keys");
  NodeId v = tape.einsum({m, p.th.p_v}, cat(batch, {"m", "d_v", "h_v"}), counter, "values");
  NodeId j = tape.einsum({q, k}, cat(batch, {"n", "m", "h_k"}), counter, "dot-product");

  NodeId r_xl = -1, r_ml = -1, r_xw = -1, r_mw = -1;
  NodeId l = tape.einsum({j, p.th.p_l}, cat(batch, {"n", "m", "h"}), counter, "logits-projection");
  if (p.enabled.xl) {
    r_xl = tape.einsum({x, p.p_xl}, cat(batch, {"n", "h_k", "h"}), counter, "logits-generator-x");
    NodeId t = tape.einsum({j, r_xl}, cat(batch, {"n", "m", "h"}), counter, "logits-dynamic-x");
    l = tape.add(l, t);
  }
  if (p.enabled.ml) {
    r_ml = tape.einsum({m, p.p_ml}, cat(batch, {"m", "h_k", "h"}), counter, "logits-generator-m");
    NodeId t = tape.einsum({j, r_ml}, cat(batch, {"n", "m", "h"}), counter, "logits-dynamic-m");
    l = tape.add(l, t);
  }
  NodeId w = tape.softmax(l, "m");
  NodeId u =
      tape.einsum({w, p.th.p_w}, cat(batch, {"n", "m", "h_v"}), counter, "weights-projection");
  if (p.enabled.xw) {
    r_xw = tape.einsum({x, p.p_xw}, cat(batch, {"n", "h", "h_v"}), counter, "weights-generator-x");
    NodeId t = tape.einsum({w, r_xw}, cat(batch, {"n", "m", "h_v"}), counter, "weights-dynamic-x");
    u = tape.add(u, t);
  }
  if (p.enabled.mw) {
    r_mw = tape.einsum({m, p.p_mw}, cat(batch, {"m", "h", "h_v"}), counter, "weights-generator-m");
    NodeId t = tape.einsum({w, r_mw}, cat(batch, {"n", "m", "h_v"}), counter, "weights-dynamic-m");
    u = tape.add(u, t);
  }
  NodeId o = tape.einsum({u, v}, cat(batch, {"n", "d_v", "h_v"}), counter, "outputs-weighted-sum");
  NodeId y = tape.einsum({o, p.th.p_o}, cat(batch, {"n", "d_y"}), counter, "output-projection");
  if (trace) {
    trace->q = q;
    trace->k = k;
    trace->v = v;
    trace->j = j;
    trace->l = l;
    trace->w = w;
    trace->u = u;
    trace->o = o;
    trace->y = y;
    trace->r_xl = r_xl;
    trace->r_ml = r_ml;
    trace->r_xw = r_xw;
    trace->r_mw = r_mw;
  }
  return y;
}

NodeId gbma_tape(Tape& tape, NodeId x, NodeId m, NodeId p, NodeId q,
                 const std::vector<std::string>& batch, CounterChannel* counter) {
  // Operand order fixes the evaluation schedule: (X*P), then *M.
  NodeId l = tape.einsum({x, p, m}, cat(batch, {"n", "m", "h"}), counter, "logits");
  NodeId w = tape.softmax(l, "m");
  // (W*M), then *Q.
  return tape.einsum({w, m, q}, cat(batch, {"n", "d_y"}), counter, "outputs");
}

// ---- Plain forwards ------------------------------------------------------

Tensor dot_product_attention(const Tensor& x, const Tensor& m, CounterChannel* counter) {
  Tape tape;
  NodeId xn = tape.leaf(bind(x, {"n", "d"}));
  NodeId mn = tape.leaf(bind(m, {"m", "d"}));
  return tape.value(dot_product_attention_tape(tape, xn, mn, {}, counter));
}

Tensor dot_product_attention_with_projections(const Tensor& x, const Tensor& m, const Tensor& p_q,
                                              const Tensor& p_k, const Tensor& p_v,
                                              const Tensor& p_o, CounterChannel* counter) {
  Tape tape;
  NodeId xn = tape.leaf(bind(x, {"n", "d_x"}));
  NodeId mn = tape.leaf(bind(m, {"m", "d_m"}));
  NodeId pq = tape.leaf(bind(p_q, {"d_x", "d_k"}));
  NodeId pk = tape.leaf(bind(p_k, {"d_m", "d_k"}));
  NodeId pv = tape.leaf(bind(p_v, {"d_m", "d_v"}));
  NodeId po = tape.leaf(bind(p_o, {"d_y", "d_v"}));
  return tape.value(
      dot_product_attention_with_projections_tape(tape, xn, mn, pq, pk, pv, po, {}, counter));
}

Tensor multi_head_attention(const Tensor& x, const Tensor& m, const MultiHeadParams& p,
                            CounterChannel* counter, AttentionTrace* trace) {
  Tape tape;
  NodeId xn = tape.leaf(bind(x, {"n", "d_x"}));
  NodeId mn = tape.leaf(bind(m, {"m", "d_m"}));
  MhParamNodes pn{tape.leaf(bind(p.p_q, {"d_x", "d_k", "h"})),
                  tape.leaf(bind(p.p_k, {"d_m", "d_k", "h"})),
                  tape.leaf(bind(p.p_v, {"d_m", "d_v", "h"})),
                  tape.leaf(bind(p.p_o, {"d_y", "d_v", "h"}))};
  AttentionTraceNodes tn;
  NodeId y = multi_head_attention_tape(tape, xn, mn, pn, {}, counter, &tn);
  fill_trace(trace, tape, tn);
  return tape.value(y);
}

Tensor multi_head_attention_concise(const Tensor& x, const Tensor& m, const MultiHeadParams& p) {
  Tensor l = einsum({{x, {"n", "d_x"}},
                     {m, {"m", "d_m"}},
                     {p.p_q, {"d_x", "d_k", "h"}},
                     {p.p_k, {"d_m", "d_k", "h"}}},
                    {"n", "m", "h"});
  Tensor w = softmax(l, "m");
  return einsum({{w, {"n", "m", "h"}},
                 {m, {"m", "d_m"}},
                 {p.p_v, {"d_m", "d_v", "h"}},
                 {p.p_o, {"d_y", "d_v", "h"}}},
                {"n", "d_y"});
}

namespace {

ThParamNodes push_th(Tape& tape, const TalkingHeadsParams& p) {
  return ThParamNodes{tape.leaf(bind(p.p_q, {"d_x", "d_k", "h_k"})),
                      tape.leaf(bind(p.p_k, {"d_m", "d_k", "h_k"})),
                      tape.leaf(bind(p.p_v, {"d_m", "d_v", "h_v"})),
                      tape.leaf(bind(p.p_o, {"d_y", "d_v", "h_v"})),
                      tape.leaf(bind(p.p_l, {"h_k", "h"})),
                      tape.leaf(bind(p.p_w, {"h", "h_v"}))};
}

}  // namespace

Tensor talking_heads_attention(const Tensor& x, const Tensor& m, const TalkingHeadsParams& p,
                               CounterChannel* counter, AttentionTrace* trace) {
  Tape tape;
  NodeId xn = tape.leaf(bind(x, {"n", "d_x"}));
  NodeId mn = tape.leaf(bind(m, {"m", "d_m"}));
  ThParamNodes pn = push_th(tape, p);
  AttentionTraceNodes tn;
  NodeId y = talking_heads_attention_tape(tape, xn, mn, pn, {}, counter, &tn);
  fill_trace(trace, tape, tn);
  return tape.value(y);
}

Tensor talking_heads_attention_concise(const Tensor& x, const Tensor& m,
                                       const TalkingHeadsParams& p) {
  Tensor l = einsum({{x, {"n", "d_x"}},
                     {m, {"m", "d_m"}},
                     {p.p_q, {"d_x", "d_k", "h_k"}},
                     {p.p_k, {"d_m", "d_k", "h_k"}},
                     {p.p_l, {"h_k", "h"}}},
                    {"n", "m", "h"});
  Tensor w = softmax(l, "m");
  return einsum({{w, {"n", "m", "h"}},
                 {p.p_w, {"h", "h_v"}},
                 {m, {"m", "d_m"}},
                 {p.p_v, {"d_m", "d_v", "h_v"}},
                 {p.p_o, {"d_y", "d_v", "h_v"}}},
                {"n", "d_y"});
}

Tensor hybrid_attention(HybridKind kind, const Tensor& x, const Tensor& m,
                        const TalkingHeadsParams& p, CounterChannel* counter,
                        AttentionTrace* trace) {
  Tape tape;
  NodeId xn = tape.leaf(bind(x, {"n", "d_x"}));
  NodeId mn = tape.leaf(bind(m, {"m", "d_m"}));
  ThParamNodes pn = push_th(tape, p);
  AttentionTraceNodes tn;
  const bool logits_only = kind == HybridKind::LogitsOnly;
  NodeId y = talking_heads_attention_tape(tape, xn, mn, pn, {}, counter, &tn,
                                          /*apply_logits=*/logits_only,
                                          /*apply_weights=*/!logits_only);
  fill_trace(trace, tape, tn);
  return tape.value(y);
}

Tensor dynamic_projection_attention(const Tensor& x, const Tensor& m,
                                    const DynamicProjectionParams& p, CounterChannel* counter,
                                    AttentionTrace* trace) {
  Tape tape;
  NodeId xn = tape.leaf(bind(x, {"n", "d_x"}));
  NodeId mn = tape.leaf(bind(m, {"m", "d_m"}));
  DynParamNodes pn;
  pn.th = push_th(tape, p.th);
  pn.p_xl = tape.leaf(bind(p.p_xl, {"d_x", "h_k", "h"}));
  pn.p_ml = tape.leaf(bind(p.p_ml, {"d_m", "h_k", "h"}));
  pn.p_xw = tape.leaf(bind(p.p_xw, {"d_x", "h", "h_v"}));
  pn.p_mw = tape.leaf(bind(p.p_mw, {"d_m", "h", "h_v"}));
  pn.enabled = p.enabled;
  AttentionTraceNodes tn;
  NodeId y = dynamic_projection_attention_tape(tape, xn, mn, pn, {}, counter, &tn);
  fill_trace(trace, tape, tn);
  return tape.value(y);
}

Tensor gbma(const Tensor& x, const Tensor& m, const GbmaParams& p, CounterChannel* counter) {
  Tape tape;
  NodeId xn = tape.leaf(bind(x, {"n", "d_x"}));
  NodeId mn = tape.leaf(bind(m, {"m", "d_m"}));
  NodeId pp = tape.leaf(bind(p.p, {"d_x", "d_m", "h"}));
  NodeId pq = tape.leaf(bind(p.q, {"d_m", "d_y", "h"}));
  return tape.value(gbma_tape(tape, xn, mn, pp, pq, {}, counter));
}

GbmaParams factor_to_gbma(const MultiHeadParams& p) {
  GbmaParams out;
  out.p = einsum({{p.p_q, {"d_x", "d_k", "h"}}, {p.p_k, {"d_m", "d_k", "h"}}},
                 {"d_x", "d_m", "h"});
  out.q = einsum({{p.p_v, {"d_m", "d_v", "h"}}, {p.p_o, {"d_y", "d_v", "h"}}},
                 {"d_m", "d_y", "h"});
  return out;
}

GbmaParams factor_to_gbma(const TalkingHeadsParams& p) {
  GbmaParams out;
  out.p = einsum({{p.p_q, {"d_x", "d_k", "h_k"}},
                  {p.p_k, {"d_m", "d_k", "h_k"}},
                  {p.p_l, {"h_k", "h"}}},
                 {"d_x", "d_m", "h"});
  out.q = einsum({{p.p_w, {"h", "h_v"}},
                  {p.p_v, {"d_m", "d_v", "h_v"}},
                  {p.p_o, {"d_y", "d_v", "h_v"}}},
                 {"d_m", "d_y", "h"});
  return out;
}

// ---- Initialization ------------------------------------------------------

namespace {

// Per-tensor stream indices. Multi-head and talking-heads share indices for
// the four shared projections, so a zero-noise talking-heads init with
// h_k == h == h_v draws exactly the multi-head parameters.
enum Stream : uint64_t {
  kPq = 1,
  kPk = 2,
  kPv = 3,
  kPo = 4,
  kPl = 5,
  kPw = 6,
  kPxl = 7,
  kPml = 8,
  kPxw = 9,
  kPmw = 10,
};

Tensor draw(const Rng& rng, uint64_t stream, std::vector<Axis> axes, double stddev) {
  Rng r = rng.child(stream);
  return normal_init(std::move(axes), stddev, r);
}

Tensor head_matrix(const Rng& rng, uint64_t stream, const Axis& rows, const Axis& cols,
                   double noise_std) {
  Tensor base = identity_matrix(rows, cols);
  if (noise_std == 0.0) return base;
  Rng r = rng.child(stream);
  return add(base, normal_init({rows, cols}, noise_std, r));
}

}  // namespace

MultiHeadParams init_multi_head_params(const AttentionDims& dims, Rng rng) {
  dims.validate();
  require(dims.h_k == dims.h && dims.h == dims.h_v,
          "multi-head attention needs equal head counts");
  MultiHeadParams p;
  p.p_q = draw(rng, kPq, {{"d_x", dims.d_x}, {"d_k", dims.d_k}, {"h", dims.h}},
               1.0 / std::sqrt(double(dims.d_x) * double(dims.d_k)));
  p.p_k = draw(rng, kPk, {{"d_m", dims.d_m}, {"d_k", dims.d_k}, {"h", dims.h}},
               1.0 / std::sqrt(double(dims.d_m)));
  p.p_v = draw(rng, kPv, {{"d_m", dims.d_m}, {"d_v", dims.d_v}, {"h", dims.h}},
               1.0 / std::sqrt(double(dims.d_m)));
  p.p_o = draw(rng, kPo, {{"d_y", dims.d_y}, {"d_v", dims.d_v}, {"h", dims.h}},
               1.0 / std::sqrt(double(dims.d_v) * double(dims.h_v)));
  return p;
}

TalkingHeadsParams init_talking_heads_params(const AttentionDims& dims, Rng rng,
                                             double th_noise_std) {
  dims.validate();
  TalkingHeadsParams p;
  p.p_q = draw(rng, kPq, {{"d_x", dims.d_x}, {"d_k", dims.d_k}, {"h_k", dims.h_k}},
               1.0 / std::sqrt(double(dims.d_x) * double(dims.d_k)));
  p.p_k = draw(rng, kPk, {{"d_m", dims.d_m}, {"d_k", dims.d_k}, {"h_k", dims.h_k}},
               1.0 / std::sqrt(double(dims.d_m)));
  p.p_v = draw(rng, kPv, {{"d_m", dims.d_m}, {"d_v", dims.d_v}, {"h_v", dims.h_v}},
               1.0 / std::sqrt(double(dims.d_m)));
  p.p_o = draw(rng, kPo, {{"d_y", dims.d_y}, {"d_v", dims.d_v}, {"h_v", dims.h_v}},
               1.0 / std::sqrt(double(dims.d_v) * double(dims.h_v)));
  p.p_l = head_matrix(rng, kPl, {"h_k", dims.h_k}, {"h", dims.h}, th_noise_std);
  p.p_w = head_matrix(rng, kPw, {"h", dims.h}, {"h_v", dims.h_v}, th_noise_std);
  return p;
}

DynamicProjectionParams init_dynamic_params(const AttentionDims& dims, Rng rng,
                                            GeneratorSet enabled, double th_noise_std) {
  DynamicProjectionParams p;
  p.th = init_talking_heads_params(dims, rng, th_noise_std);
  p.enabled = enabled;
  const std::vector<Axis> xl_axes{{"d_x", dims.d_x}, {"h_k", dims.h_k}, {"h", dims.h}};
  const std::vector<Axis> ml_axes{{"d_m", dims.d_m}, {"h_k", dims.h_k}, {"h", dims.h}};
  const std::vector<Axis> xw_axes{{"d_x", dims.d_x}, {"h", dims.h}, {"h_v", dims.h_v}};
  const std::vector<Axis> mw_axes{{"d_m", dims.d_m}, {"h", dims.h}, {"h_v", dims.h_v}};
  p.p_xl = enabled.xl ? draw(rng, kPxl, xl_axes, 0.1 / std::sqrt(double(dims.d_x * dims.h_k)))
                      : Tensor(xl_axes);
  p.p_ml = enabled.ml ? draw(rng, kPml, ml_axes, 0.1 / std::sqrt(double(dims.d_m * dims.h_k)))
                      : Tensor(ml_axes);
  p.p_xw = enabled.xw ? draw(rng, kPxw, xw_axes, 0.1 / std::sqrt(double(dims.d_x * dims.h)))
                      : Tensor(xw_axes);
  p.p_mw = enabled.mw ? draw(rng, kPmw, mw_axes, 0.1 / std::sqrt(double(dims.d_m * dims.h)))
                      : Tensor(mw_axes);
  return p;
}

GbmaParams init_gbma_params(const AttentionDims& dims, Rng rng) {
  dims.validate();
  GbmaParams p;
  p.p = draw(rng, kPq, {{"d_x", dims.d_x}, {"d_m", dims.d_m}, {"h", dims.h}},
             1.0 / std::sqrt(double(dims.d_x) * double(dims.d_m)));
  p.q = draw(rng, kPv, {{"d_m", dims.d_m}, {"d_y", dims.d_y}, {"h", dims.h}},
             1.0 / std::sqrt(double(dims.d_m) * double(dims.h)));
  return p;
}

}  // namespace attnkit
