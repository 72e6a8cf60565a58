#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attnkit/autograd.hpp"
#include "attnkit/tensor.hpp"

namespace attnkit {

// Dimension record shared by every attention variant. h_k counts the
// query/key heads, h the softmax heads, h_v the value heads; plain
// multi-head attention requires h_k == h == h_v.
struct AttentionDims {
  int64_t n = 1;    // query count
  int64_t m = 1;    // memory count
  int64_t d_x = 1;  // input width
  int64_t d_m = 1;  // memory width
  int64_t d_y = 1;  // output width
  int64_t d_k = 1;  // key width
  int64_t d_v = 1;  // value width
  int64_t h_k = 1;
  int64_t h = 1;
  int64_t h_v = 1;

  void validate() const;
  static AttentionDims uniform(int64_t n, int64_t m, int64_t d_model, int64_t d_k, int64_t d_v,
                               int64_t h_k, int64_t h, int64_t h_v);
};

struct MultiHeadParams {
  Tensor p_q;  // [d_x, d_k, h]
  Tensor p_k;  // [d_m, d_k, h]
  Tensor p_v;  // [d_m, d_v, h]
  Tensor p_o;  // [d_y, d_v, h]
};

struct TalkingHeadsParams {
  Tensor p_q;  // [d_x, d_k, h_k]
  Tensor p_k;  // [d_m, d_k, h_k]
  Tensor p_v;  // [d_m, d_v, h_v]
  Tensor p_o;  // [d_y, d_v, h_v]
  Tensor p_l;  // [h_k, h]
  Tensor p_w;  // [h, h_v]
};

struct GeneratorSet {
  bool xl = false;
  bool ml = false;
  bool xw = false;
  bool mw = false;
  bool any() const { return xl || ml || xw || mw; }
  int count() const { return int(xl) + int(ml) + int(xw) + int(mw); }
};

struct DynamicProjectionParams {
  TalkingHeadsParams th;
  Tensor p_xl;  // [d_x, h_k, h]
  Tensor p_ml;  // [d_m, h_k, h]
  Tensor p_xw;  // [d_x, h, h_v]
  Tensor p_mw;  // [d_m, h, h_v]
  GeneratorSet enabled;  // disabled generators hold all-zero tensors
};

struct GbmaParams {
  Tensor p;  // [d_x, d_m, h]
  Tensor q;  // [d_m, d_y, h]
};

enum class HybridKind { LogitsOnly, WeightsOnly };

struct AttentionTrace {
  Tensor q, k, v, j, l, w, u, o, y;
  std::optional<Tensor> r_xl, r_ml, r_xw, r_mw;
};

// ---- Tape builders -------------------------------------------------------
// Inputs are tape nodes; x carries axes batch + ["n","d_x"], m carries
// batch + ["m","d_m"]. Every projection einsum is recorded on the counter
// with the step labels used by the cost schedule.

struct MhParamNodes {
  NodeId p_q, p_k, p_v, p_o;
};
struct ThParamNodes {
  NodeId p_q, p_k, p_v, p_o, p_l, p_w;
};
struct DynParamNodes {
  ThParamNodes th;
  NodeId p_xl, p_ml, p_xw, p_mw;
  GeneratorSet enabled;
};

struct AttentionTraceNodes {
  NodeId q = -1, k = -1, v = -1, j = -1, l = -1, w = -1, u = -1, o = -1, y = -1;
  NodeId r_xl = -1, r_ml = -1, r_xw = -1, r_mw = -1;
};

NodeId dot_product_attention_tape(Tape& tape, NodeId x, NodeId m,
                                  const std::vector<std::string>& batch = {},
                                  CounterChannel* counter = nullptr);
NodeId dot_product_attention_with_projections_tape(Tape& tape, NodeId x, NodeId m, NodeId p_q,
                                                   NodeId p_k, NodeId p_v, NodeId p_o,
                                                   const std::vector<std::string>& batch = {},
                                                   CounterChannel* counter = nullptr);
NodeId multi_head_attention_tape(Tape& tape, NodeId x, NodeId m, const MhParamNodes& p,
                                 const std::vector<std::string>& batch = {},
                                 CounterChannel* counter = nullptr,
                                 AttentionTraceNodes* trace = nullptr);
// apply_logits / apply_weights turn off one talking-heads projection,
// substituting an identity relabel; that is how the hybrids are realized.
NodeId talking_heads_attention_tape(Tape& tape, NodeId x, NodeId m, const ThParamNodes& p,
                                    const std::vector<std::string>& batch = {},
                                    CounterChannel* counter = nullptr,
                                    AttentionTraceNodes* trace = nullptr, bool apply_logits = true,
                                    bool apply_weights = true);
NodeId dynamic_projection_attention_tape(Tape& tape, NodeId x, NodeId m, const DynParamNodes& p,
                                         const std::vector<std::string>& batch = {},
                                         CounterChannel* counter = nullptr,
                                         AttentionTraceNodes* trace = nullptr);
NodeId gbma_tape(Tape& tape, NodeId x, NodeId m, NodeId p, NodeId q,
                 const std::vector<std::string>& batch = {}, CounterChannel* counter = nullptr);

// ---- Plain forwards ------------------------------------------------------
// x is bound to ["n","d_x"] (or ["n","d"] for plain dot-product attention)
// and m to ["m","d_m"], whatever the callers' axis names are.

Tensor dot_product_attention(const Tensor& x, const Tensor& m, CounterChannel* counter = nullptr);
Tensor dot_product_attention_with_projections(const Tensor& x, const Tensor& m, const Tensor& p_q,
                                              const Tensor& p_k, const Tensor& p_v,
                                              const Tensor& p_o, CounterChannel* counter = nullptr);
Tensor multi_head_attention(const Tensor& x, const Tensor& m, const MultiHeadParams& p,
                            CounterChannel* counter = nullptr, AttentionTrace* trace = nullptr);
Tensor multi_head_attention_concise(const Tensor& x, const Tensor& m, const MultiHeadParams& p);
Tensor talking_heads_attention(const Tensor& x, const Tensor& m, const TalkingHeadsParams& p,
                               CounterChannel* counter = nullptr, AttentionTrace* trace = nullptr);
Tensor talking_heads_attention_concise(const Tensor& x, const Tensor& m,
                                       const TalkingHeadsParams& p);
Tensor hybrid_attention(HybridKind kind, const Tensor& x, const Tensor& m,
                        const TalkingHeadsParams& p, CounterChannel* counter = nullptr,
                        AttentionTrace* trace = nullptr);
Tensor dynamic_projection_attention(const Tensor& x, const Tensor& m,
                                    const DynamicProjectionParams& p,
                                    CounterChannel* counter = nullptr,
                                    AttentionTrace* trace = nullptr);
Tensor gbma(const Tensor& x, const Tensor& m, const GbmaParams& p,
            CounterChannel* counter = nullptr);

// Collapse the factored parameterizations into the bilinear form.
GbmaParams factor_to_gbma(const MultiHeadParams& p);
GbmaParams factor_to_gbma(const TalkingHeadsParams& p);

// ---- Initialization ------------------------------------------------------
// Projections draw from normal(0, 1/sqrt(fan_in)); the logit scaling factor
// is folded into p_q's standard deviation. p_l/p_w start as identity (zero
// padded when rectangular) plus normal(0, th_noise_std); pass 0 for an
// exact-identity start. Dynamic generators use 0.1/sqrt(width * head count).
MultiHeadParams init_multi_head_params(const AttentionDims& dims, Rng rng);
TalkingHeadsParams init_talking_heads_params(const AttentionDims& dims, Rng rng,
                                             double th_noise_std = 0.02);
DynamicProjectionParams init_dynamic_params(const AttentionDims& dims, Rng rng,
                                            GeneratorSet enabled, double th_noise_std = 0.02);
GbmaParams init_gbma_params(const AttentionDims& dims, Rng rng);

}  // namespace attnkit
