#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "attnkit/attention.hpp"
#include "attnkit/verify.hpp"

using namespace attnkit;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.numel() == b.numel());
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  return worst;
}

Tensor random_tensor(std::vector<Axis> axes, uint64_t seed) {
  Rng rng(seed);
  return normal_init(std::move(axes), 1.0, rng);
}

AttentionDims small_dims() {
  AttentionDims d;
  d.n = 3;
  d.m = 4;
  d.d_x = 3;
  d.d_m = 4;
  d.d_y = 3;
  d.d_k = 2;
  d.d_v = 2;
  d.h_k = d.h = d.h_v = 2;
  return d;
}

}  // namespace

TEST_CASE("dot-product attention with one memory row returns that row") {
  Tensor x = random_tensor({{"n", 3}, {"d", 2}}, 1);
  Tensor m = random_tensor({{"m", 1}, {"d", 2}}, 2);
  Tensor y = dot_product_attention(x, m);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 2; ++j) CHECK(y.at({i, j}) == doctest::Approx(m.at({0, j})));
}

TEST_CASE("dot-product attention over identical memory rows returns that row") {
  Tensor x = random_tensor({{"n", 2}, {"d", 3}}, 3);
  Tensor m({{"m", 4}, {"d", 3}});
  for (int64_t r = 0; r < 4; ++r)
    for (int64_t c = 0; c < 3; ++c) m.at({r, c}) = double(c) - 1.0;
  Tensor y = dot_product_attention(x, m);
  for (int64_t i = 0; i < 2; ++i)
    for (int64_t j = 0; j < 3; ++j) CHECK(y.at({i, j}) == doctest::Approx(double(j) - 1.0));
}

TEST_CASE("projected attention with identity projections reduces to dot-product") {
  const int64_t d = 3;
  Tensor x = random_tensor({{"n", 2}, {"d", d}}, 4);
  Tensor m = random_tensor({{"m", 3}, {"d", d}}, 5);
  Tensor eye = identity_matrix({"r", d}, {"c", d});
  Tensor y1 = dot_product_attention_with_projections(x, m, eye, eye, eye, eye);
  Tensor y2 = dot_product_attention(x, m);
  CHECK(max_abs_diff(y1, y2) < 1e-13);
}

TEST_CASE("projected attention with zero value projection is zero") {
  Tensor x = random_tensor({{"n", 2}, {"d_x", 3}}, 6);
  Tensor m = random_tensor({{"m", 3}, {"d_m", 4}}, 7);
  Tensor pq = random_tensor({{"d_x", 3}, {"d_k", 2}}, 8);
  Tensor pk = random_tensor({{"d_m", 4}, {"d_k", 2}}, 9);
  Tensor pv({{"d_m", 4}, {"d_v", 2}});
  Tensor po = random_tensor({{"d_y", 3}, {"d_v", 2}}, 10);
  Tensor y = dot_product_attention_with_projections(x, m, pq, pk, pv, po);
  CHECK(y.max_abs() == 0.0);
}

TEST_CASE("multi-head counter carries the six schedule labels") {
  AttentionDims d = small_dims();
  MultiHeadParams p = init_multi_head_params(d, Rng(11));
  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, 12);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, 13);
  CounterChannel counter;
  multi_head_attention(x, m, p, &counter);
  std::set<std::string> labels;
  for (const auto& [label, cost] : counter.records()) {
    labels.insert(label);
    CHECK(cost > 0);
  }
  CHECK(labels == std::set<std::string>{"queries", "keys", "values", "logits",
                                        "outputs-weighted-sum", "output-projection"});
}

TEST_CASE("multi-head output is linear in the output projection") {
  AttentionDims d = small_dims();
  MultiHeadParams p = init_multi_head_params(d, Rng(14));
  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, 15);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, 16);
  Tensor y1 = multi_head_attention(x, m, p);
  p.p_o = scale(p.p_o, 2.0);
  Tensor y2 = multi_head_attention(x, m, p);
  CHECK(max_abs_diff(scale(y1, 2.0), y2) == 0.0);
}

TEST_CASE("talking-heads trace satisfies shape and weight-sum invariants") {
  AttentionDims d = small_dims();
  TalkingHeadsParams p = init_talking_heads_params(d, Rng(17), 0.02);
  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, 18);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, 19);
  AttentionTrace trace;
  CounterChannel counter;
  Tensor y = talking_heads_attention(x, m, p, &counter, &trace);

  CHECK(trace.j.axes().size() == 3);
  CHECK(trace.j.axis_size("h_k") == d.h_k);
  CHECK(trace.w.axis_size("h") == d.h);
  CHECK(trace.u.axis_size("h_v") == d.h_v);
  CHECK(y.axis_size("d_y") == d.d_y);
  CHECK(!trace.r_xl.has_value());

  for (int64_t i = 0; i < d.n; ++i)
    for (int64_t h = 0; h < d.h; ++h) {
      double sum = 0.0;
      for (int64_t j = 0; j < d.m; ++j) sum += trace.w.at({i, j, h});
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }

  std::set<std::string> labels;
  for (const auto& [label, cost] : counter.records()) labels.insert(label);
  CHECK(labels.count("dot-product") == 1);
  CHECK(labels.count("logits-projection") == 1);
  CHECK(labels.count("weights-projection") == 1);
}

TEST_CASE("talking-heads output is linear in the weights projection") {
  AttentionDims d = small_dims();
  TalkingHeadsParams p = init_talking_heads_params(d, Rng(20), 0.02);
  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, 21);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, 22);
  Tensor y1 = talking_heads_attention(x, m, p);
  p.p_w = scale(p.p_w, -3.0);
  Tensor y2 = talking_heads_attention(x, m, p);
  CHECK(max_abs_diff(scale(y1, -3.0), y2) < 1e-14);
}

TEST_CASE("weights-only hybrid equals talking-heads with identity logits projection") {
  AttentionDims d = small_dims();
  TalkingHeadsParams p = init_talking_heads_params(d, Rng(23), 0.02);
  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, 24);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, 25);

  Tensor y_hybrid = hybrid_attention(HybridKind::WeightsOnly, x, m, p);
  TalkingHeadsParams with_identity = p;
  with_identity.p_l = identity_matrix({"h_k", d.h_k}, {"h", d.h});
  Tensor y_full = talking_heads_attention(x, m, with_identity);
  CHECK(max_abs_diff(y_hybrid, y_full) < 1e-13);
}

TEST_CASE("hybrid identity substitution rejects mismatched head counts") {
  AttentionDims d = small_dims();
  d.h_v = 3;  // h != h_v, so logits-only cannot relabel weights
  TalkingHeadsParams p = init_talking_heads_params(d, Rng(26), 0.02);
  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, 27);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, 28);
  CHECK_THROWS_AS(hybrid_attention(HybridKind::LogitsOnly, x, m, p), std::invalid_argument);
}

TEST_CASE("bilinear attention with a zero output factor is zero") {
  AttentionDims d = small_dims();
  GbmaParams p = init_gbma_params(d, Rng(29));
  for (double& v : p.q.data()) v = 0.0;
  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, 30);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, 31);
  CHECK(gbma(x, m, p).max_abs() == 0.0);
}

TEST_CASE("factor_to_gbma emits the contracted shapes") {
  AttentionDims d = small_dims();
  TalkingHeadsParams p = init_talking_heads_params(d, Rng(32), 0.02);
  GbmaParams g = factor_to_gbma(p);
  CHECK(g.p.axis_size("d_x") == d.d_x);
  CHECK(g.p.axis_size("d_m") == d.d_m);
  CHECK(g.p.axis_size("h") == d.h);
  CHECK(g.q.axis_size("d_m") == d.d_m);
  CHECK(g.q.axis_size("d_y") == d.d_y);
  CHECK(g.q.axis_size("h") == d.h);
}

TEST_CASE("identity talking-heads factors like the multi-head factoring") {
  AttentionDims d = small_dims();
  const Rng init(33);
  MultiHeadParams mh = init_multi_head_params(d, init);
  TalkingHeadsParams th = init_talking_heads_params(d, init, 0.0);
  GbmaParams from_mh = factor_to_gbma(mh);
  GbmaParams from_th = factor_to_gbma(th);
  CHECK(max_abs_diff(from_mh.p, from_th.p) < 1e-13);
  CHECK(max_abs_diff(from_mh.q, from_th.q) < 1e-13);
}

TEST_CASE("dynamic variant with one generator matches the three-term loop oracle") {
  AttentionDims d;
  d.n = d.m = 2;
  d.d_x = d.d_m = d.d_y = 2;
  d.d_k = d.d_v = 2;
  d.h_k = d.h = d.h_v = 2;
  DynamicProjectionParams p = init_dynamic_params(d, Rng(34), {true, false, false, false}, 0.02);
  Tensor x = random_tensor({{"n", 2}, {"d_x", 2}}, 35);
  Tensor m = random_tensor({{"m", 2}, {"d_m", 2}}, 36);

  AttentionTrace trace;
  Tensor y = dynamic_projection_attention(x, m, p, nullptr, &trace);
  REQUIRE(trace.r_xl.has_value());
  CHECK(!trace.r_ml.has_value());

  // Independent evaluation through the loop oracle.
  Tensor q = reference_einsum({{x, {"n", "d_x"}}, {p.th.p_q, {"d_x", "d_k", "h_k"}}},
                              {"n", "d_k", "h_k"});
  Tensor k = reference_einsum({{m, {"m", "d_m"}}, {p.th.p_k, {"d_m", "d_k", "h_k"}}},
                              {"m", "d_k", "h_k"});
  Tensor v = reference_einsum({{m, {"m", "d_m"}}, {p.th.p_v, {"d_m", "d_v", "h_v"}}},
                              {"m", "d_v", "h_v"});
  Tensor j = reference_einsum({{q, {}}, {k, {}}}, {"n", "m", "h_k"});
  Tensor r_xl = reference_einsum({{x, {}}, {p.p_xl, {}}}, {"n", "h_k", "h"});
  Tensor l = add(reference_einsum({{j, {}}, {p.th.p_l, {}}}, {"n", "m", "h"}),
                 reference_einsum({{j, {}}, {r_xl, {}}}, {"n", "m", "h"}));
  Tensor w = softmax(l, "m");
  Tensor u = reference_einsum({{w, {}}, {p.th.p_w, {}}}, {"n", "m", "h_v"});
  Tensor o = reference_einsum({{u, {}}, {v, {}}}, {"n", "d_v", "h_v"});
  Tensor y_ref = reference_einsum({{o, {}}, {p.th.p_o, {"d_y", "d_v", "h_v"}}}, {"n", "d_y"});
  CHECK(max_abs_diff(y, y_ref) < 1e-12);
  CHECK(max_abs_diff(*trace.r_xl, r_xl) < 1e-14);
}

TEST_CASE("memory permutation invariance and query equivariance") {
  AttentionDims d = small_dims();
  TalkingHeadsParams p = init_talking_heads_params(d, Rng(37), 0.02);
  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, 38);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, 39);

  // Rotate memory rows by one.
  Tensor m_perm({{"m", d.m}, {"d_m", d.d_m}});
  for (int64_t r = 0; r < d.m; ++r)
    for (int64_t c = 0; c < d.d_m; ++c) m_perm.at({r, c}) = m.at({(r + 1) % d.m, c});
  CHECK(max_abs_diff(talking_heads_attention(x, m, p),
                     talking_heads_attention(x, m_perm, p)) < 1e-12);

  // Rotate query rows by one; outputs rotate identically.
  Tensor x_perm({{"n", d.n}, {"d_x", d.d_x}});
  for (int64_t r = 0; r < d.n; ++r)
    for (int64_t c = 0; c < d.d_x; ++c) x_perm.at({r, c}) = x.at({(r + 1) % d.n, c});
  Tensor y = talking_heads_attention(x, m, p);
  Tensor y_perm = talking_heads_attention(x_perm, m, p);
  double worst = 0.0;
  for (int64_t r = 0; r < d.n; ++r)
    for (int64_t c = 0; c < d.d_y; ++c)
      worst = std::max(worst, std::fabs(y_perm.at({r, c}) - y.at({(r + 1) % d.n, c})));
  CHECK(worst < 1e-12);
}

TEST_CASE("initialization is seed deterministic and shares streams across variants") {
  AttentionDims d = small_dims();
  MultiHeadParams a = init_multi_head_params(d, Rng(40));
  MultiHeadParams b = init_multi_head_params(d, Rng(40));
  CHECK(max_abs_diff(a.p_q, b.p_q) == 0.0);
  CHECK(max_abs_diff(a.p_o, b.p_o) == 0.0);

  // Zero-noise talking-heads draws the identical shared projections, so the
  // reduction to multi-head holds bit for bit at init.
  TalkingHeadsParams th = init_talking_heads_params(d, Rng(40), 0.0);
  CHECK(max_abs_diff(a.p_q, th.p_q.renamed({"d_x", "d_k", "h"})) == 0.0);
  CHECK(max_abs_diff(a.p_v, th.p_v.renamed({"d_m", "d_v", "h"})) == 0.0);
  CHECK(max_abs_diff(th.p_l, identity_matrix({"h_k", d.h_k}, {"h", d.h})) == 0.0);

  CHECK_THROWS_AS(init_multi_head_params(AttentionDims::uniform(2, 2, 4, 2, 2, 1, 2, 2), Rng(1)),
                  std::invalid_argument);
}

TEST_CASE("disabled dynamic generators come back as zero tensors") {
  AttentionDims d = small_dims();
  DynamicProjectionParams p = init_dynamic_params(d, Rng(41), {false, true, false, false}, 0.02);
  CHECK(p.p_xl.max_abs() == 0.0);
  CHECK(p.p_ml.max_abs() > 0.0);
  CHECK(p.p_xw.max_abs() == 0.0);
  CHECK(p.p_mw.max_abs() == 0.0);
  CHECK(p.enabled.count() == 1);
}
