#include "attnkit/verify.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "attnkit/attention.hpp"
#include "attnkit/autograd.hpp"
#include "attnkit/cost.hpp"

namespace attnkit {

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) return 1e30;
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  return worst;
}

Tensor random_tensor(std::vector<Axis> axes, Rng& rng) {
  return normal_init(std::move(axes), 1.0, rng);
}

struct SuiteRunner {
  std::vector<PropertyResult>& out;
  std::string suite;

  void record(const std::string& name, double err, double tol, std::string detail = "") {
    out.push_back({suite, name, err <= tol, err, std::move(detail)});
  }
  void record_flag(const std::string& name, bool pass, std::string detail = "") {
    out.push_back({suite, name, pass, pass ? 0.0 : 1.0, std::move(detail)});
  }
};

// ---- einsum oracle -------------------------------------------------------

void run_einsum_suite(std::vector<PropertyResult>& results) {
  SuiteRunner s{results, "einsum-oracle"};
  Rng rng(11);

  struct Case {
    std::string name;
    std::vector<std::vector<Axis>> ops;
    std::vector<std::string> out;
  };
  const std::vector<Case> cases = {
      {"matmul", {{{"a", 3}, {"b", 4}}, {{"b", 4}, {"c", 2}}}, {"a", "c"}},
      {"chain-of-three", {{{"a", 2}, {"b", 3}}, {{"b", 3}, {"c", 4}}, {{"c", 4}, {"d", 2}}},
       {"a", "d"}},
      {"hadamard", {{{"a", 3}, {"b", 2}}, {{"a", 3}, {"b", 2}}}, {"a", "b"}},
      {"partial-reduce", {{{"a", 3}, {"b", 2}}, {{"a", 3}, {"b", 2}}}, {"a"}},
      {"single-operand-sum", {{{"a", 4}, {"b", 3}}}, {"b"}},
      {"broadcast-outer", {{{"a", 3}}, {{"b", 4}}}, {"a", "b"}},
      {"four-way", {{{"n", 2}, {"x", 3}}, {{"m", 4}, {"x", 3}}, {{"m", 4}, {"v", 2}, {"h", 2}},
                    {{"y", 3}, {"v", 2}, {"h", 2}}}, {"n", "y"}},
      {"batched", {{{"b", 2}, {"n", 2}, {"d", 3}}, {{"b", 2}, {"m", 2}, {"d", 3}}},
       {"b", "n", "m"}},
  };
  for (const Case& c : cases) {
    std::vector<Tensor> tensors;
    tensors.reserve(c.ops.size());
    for (const auto& axes : c.ops) tensors.push_back(random_tensor(axes, rng));
    std::vector<EinsumOperand> operands;
    for (const Tensor& t : tensors) operands.emplace_back(t);
    const Tensor fast = einsum(operands, c.out);
    const Tensor slow = reference_einsum(operands, c.out);
    s.record(c.name, max_abs_diff(fast, slow), 1e-11);
  }

  // Name-rebinding path: same tensor used under two bindings.
  Tensor sq = random_tensor({{"i", 3}, {"j", 3}}, rng);
  const Tensor fast = einsum({{sq, {"a", "b"}}, {sq, {"b", "c"}}}, {"a", "c"});
  const Tensor slow = reference_einsum({{sq, {"a", "b"}}, {sq, {"b", "c"}}}, {"a", "c"});
  s.record("rebound-names", max_abs_diff(fast, slow), 1e-11);
}

// ---- reduction -----------------------------------------------------------

AttentionDims random_small_dims(Rng& rng, int64_t head_cap = 4) {
  AttentionDims d;
  d.n = 1 + int64_t(rng.below(6));
  d.m = 1 + int64_t(rng.below(6));
  d.d_x = 1 + int64_t(rng.below(8));
  d.d_m = 1 + int64_t(rng.below(8));
  d.d_y = 1 + int64_t(rng.below(8));
  d.d_k = 1 + int64_t(rng.below(4));
  d.d_v = 1 + int64_t(rng.below(4));
  const int64_t h = 1 + int64_t(rng.below(uint64_t(head_cap)));
  d.h_k = d.h = d.h_v = h;
  return d;
}

void run_reduction_suite(std::vector<PropertyResult>& results) {
  SuiteRunner s{results, "reduction"};
  Rng rng(23);

  double worst_th = 0.0, worst_hybrid = 0.0, worst_dyn = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const AttentionDims d = random_small_dims(rng);
    const Rng init(rng.next_u64());
    const MultiHeadParams mh = init_multi_head_params(d, init);
    const TalkingHeadsParams th = init_talking_heads_params(d, init, 0.0);
    Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, rng);
    Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, rng);

    const Tensor y_mh = multi_head_attention(x, m, mh);
    worst_th = std::max(worst_th, max_abs_diff(talking_heads_attention(x, m, th), y_mh));
    worst_hybrid =
        std::max(worst_hybrid,
                 max_abs_diff(hybrid_attention(HybridKind::LogitsOnly, x, m, th), y_mh));
    worst_hybrid =
        std::max(worst_hybrid,
                 max_abs_diff(hybrid_attention(HybridKind::WeightsOnly, x, m, th), y_mh));

    DynamicProjectionParams dyn;
    dyn.th = init_talking_heads_params(d, init, 0.02);
    dyn.p_xl = Tensor({{"d_x", d.d_x}, {"h_k", d.h_k}, {"h", d.h}});
    dyn.p_ml = Tensor({{"d_m", d.d_m}, {"h_k", d.h_k}, {"h", d.h}});
    dyn.p_xw = Tensor({{"d_x", d.d_x}, {"h", d.h}, {"h_v", d.h_v}});
    dyn.p_mw = Tensor({{"d_m", d.d_m}, {"h", d.h}, {"h_v", d.h_v}});
    dyn.enabled = GeneratorSet{};
    worst_dyn = std::max(worst_dyn, max_abs_diff(dynamic_projection_attention(x, m, dyn),
                                                 talking_heads_attention(x, m, dyn.th)));
  }
  s.record("identity-talking-heads-equals-multi-head", worst_th, 1e-13);
  s.record("identity-hybrids-equal-multi-head", worst_hybrid, 1e-13);
  s.record("zero-generators-equal-static", worst_dyn, 0.0, "bit-exact requirement");

  // Single head collapses to projected dot-product attention.
  {
    AttentionDims d = random_small_dims(rng, 1);
    const MultiHeadParams mh = init_multi_head_params(d, Rng(5));
    Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, rng);
    Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, rng);
    Tensor pq = mh.p_q.renamed({"d_x", "d_k", "h"});  // h = 1; squeeze below
    const auto squeeze = [](const Tensor& t) {
      std::vector<Axis> axes(t.axes().begin(), t.axes().end() - 1);
      return Tensor(axes, t.data());
    };
    const Tensor y1 = multi_head_attention(x, m, mh);
    const Tensor y2 = dot_product_attention_with_projections(
        x, m, squeeze(mh.p_q), squeeze(mh.p_k), squeeze(mh.p_v), squeeze(mh.p_o));
    s.record("single-head-equals-projected", max_abs_diff(y1, y2), 1e-12);
  }

  // Step-by-step vs concise einsum forms.
  double worst_concise = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const AttentionDims d = random_small_dims(rng);
    const Rng init(rng.next_u64());
    const MultiHeadParams mh = init_multi_head_params(d, init);
    const TalkingHeadsParams th = init_talking_heads_params(d, init, 0.02);
    Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, rng);
    Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, rng);
    worst_concise = std::max(
        worst_concise, max_abs_diff(multi_head_attention(x, m, mh),
                                    multi_head_attention_concise(x, m, mh)));
    worst_concise = std::max(
        worst_concise, max_abs_diff(talking_heads_attention(x, m, th),
                                    talking_heads_attention_concise(x, m, th)));
  }
  s.record("step-by-step-equals-concise", worst_concise, 1e-12);
}

// ---- gbma ----------------------------------------------------------------

AttentionDims random_tiny_dims(Rng& rng) {
  AttentionDims d;
  d.n = 1 + int64_t(rng.below(4));
  d.m = 1 + int64_t(rng.below(4));
  d.d_x = 1 + int64_t(rng.below(4));
  d.d_m = 1 + int64_t(rng.below(4));
  d.d_y = 1 + int64_t(rng.below(4));
  d.d_k = 1 + int64_t(rng.below(4));
  d.d_v = 1 + int64_t(rng.below(4));
  d.h_k = 1 + int64_t(rng.below(4));
  d.h = 1 + int64_t(rng.below(4));
  d.h_v = 1 + int64_t(rng.below(4));
  return d;
}

void run_gbma_suite(std::vector<PropertyResult>& results) {
  SuiteRunner s{results, "gbma"};
  Rng rng(37);

  double worst_mh = 0.0, worst_th = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    AttentionDims d = random_tiny_dims(rng);
    Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, rng);
    Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, rng);

    AttentionDims dm = d;
    dm.h_k = dm.h_v = dm.h;
    const MultiHeadParams mh = init_multi_head_params(dm, Rng(rng.next_u64()));
    worst_mh = std::max(worst_mh, max_abs_diff(multi_head_attention(x, m, mh),
                                               gbma(x, m, factor_to_gbma(mh))));

    const TalkingHeadsParams th = init_talking_heads_params(d, Rng(rng.next_u64()), 0.02);
    worst_th = std::max(worst_th, max_abs_diff(talking_heads_attention(x, m, th),
                                               gbma(x, m, factor_to_gbma(th))));
  }
  s.record("multi-head-equals-factored-bilinear", worst_mh, 1e-11);
  s.record("talking-heads-equals-factored-bilinear", worst_th, 1e-11);

  // Brute-force oracle on a 2x2x2 instance.
  {
    AttentionDims d;
    d.n = d.m = 2;
    d.d_x = d.d_m = d.d_y = 2;
    d.h = 2;
    const GbmaParams p = init_gbma_params(d, Rng(99));
    Tensor x = random_tensor({{"n", 2}, {"d_x", 2}}, rng);
    Tensor m = random_tensor({{"m", 2}, {"d_m", 2}}, rng);
    const Tensor l = reference_einsum({{x, {"n", "d_x"}}, {p.p, {"d_x", "d_m", "h"}},
                                       {m, {"m", "d_m"}}}, {"n", "m", "h"});
    const Tensor w = softmax(l, "m");
    const Tensor y_ref = reference_einsum({{w, {"n", "m", "h"}}, {m, {"m", "d_m"}},
                                           {p.q, {"d_m", "d_y", "h"}}}, {"n", "d_y"});
    s.record("bilinear-matches-loop-oracle", max_abs_diff(gbma(x, m, p), y_ref), 1e-13);
  }
}

// ---- gradients -----------------------------------------------------------

struct GradCase {
  std::string name;
  std::vector<std::pair<std::string, Tensor>> inputs;
  std::function<NodeId(Tape&, const std::vector<NodeId>&)> build;
};

void run_gradient_case(SuiteRunner& s, const GradCase& c, bool corrupt_pl) {
  Tape tape;
  std::vector<NodeId> ids;
  for (const auto& [name, t] : c.inputs) ids.push_back(tape.leaf(t));
  const NodeId y = c.build(tape, ids);
  const NodeId loss = tape.einsum({y}, {});
  const auto grads = tape.backward(loss);

  for (size_t i = 0; i < c.inputs.size(); ++i) {
    Tensor analytic = grads.at(ids[i]);
    if (corrupt_pl && c.inputs[i].first == "p_l")
      for (double& v : analytic.data()) v += 1e-2;
    const size_t which = i;
    const auto f = [&](const Tensor& probe) {
      Tape t2;
      std::vector<NodeId> probe_ids;
      for (size_t j = 0; j < c.inputs.size(); ++j)
        probe_ids.push_back(t2.leaf(j == which ? probe : c.inputs[j].second));
      const NodeId out = c.build(t2, probe_ids);
      return t2.value(t2.einsum({out}, {})).data()[0];
    };
    const GradientReport report = finite_diff_check(f, c.inputs[i].second, analytic);
    s.record(c.name + "/" + c.inputs[i].first, report.max_rel_err, 1e-5);
  }
}

void run_gradient_suite(std::vector<PropertyResult>& results, bool corrupt_pl) {
  SuiteRunner s{results, "gradient"};
  Rng rng(53);

  AttentionDims d;
  d.n = 2;
  d.m = 3;
  d.d_x = 2;
  d.d_m = 3;
  d.d_y = 2;
  d.d_k = 2;
  d.d_v = 2;
  d.h_k = d.h = d.h_v = 2;

  Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, rng);
  Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, rng);
  Tensor xd = random_tensor({{"n", d.n}, {"d", 3}}, rng);
  Tensor md = random_tensor({{"m", d.m}, {"d", 3}}, rng);

  const MultiHeadParams mh = init_multi_head_params(d, Rng(7));
  const TalkingHeadsParams th = init_talking_heads_params(d, Rng(8), 0.02);
  DynamicProjectionParams dyn = init_dynamic_params(d, Rng(9), {true, true, true, true}, 0.02);
  const GbmaParams gb = init_gbma_params(d, Rng(10));

  std::vector<GradCase> cases;
  cases.push_back({"dot-product",
                   {{"x", xd}, {"m", md}},
                   [](Tape& t, const std::vector<NodeId>& in) {
                     return dot_product_attention_tape(t, in[0], in[1]);
                   }});
  cases.push_back(
      {"projected",
       {{"x", x.renamed({"n", "d_x"})}, {"m", m}, {"p_q", random_tensor({{"d_x", 2}, {"d_k", 2}}, rng)},
        {"p_k", random_tensor({{"d_m", 3}, {"d_k", 2}}, rng)},
        {"p_v", random_tensor({{"d_m", 3}, {"d_v", 2}}, rng)},
        {"p_o", random_tensor({{"d_y", 2}, {"d_v", 2}}, rng)}},
       [](Tape& t, const std::vector<NodeId>& in) {
         return dot_product_attention_with_projections_tape(t, in[0], in[1], in[2], in[3], in[4],
                                                            in[5]);
       }});
  cases.push_back({"multi-head",
                   {{"x", x}, {"m", m}, {"p_q", mh.p_q}, {"p_k", mh.p_k}, {"p_v", mh.p_v},
                    {"p_o", mh.p_o}},
                   [](Tape& t, const std::vector<NodeId>& in) {
                     return multi_head_attention_tape(
                         t, in[0], in[1], MhParamNodes{in[2], in[3], in[4], in[5]});
                   }});
  cases.push_back({"talking-heads",
                   {{"x", x}, {"m", m}, {"p_q", th.p_q}, {"p_k", th.p_k}, {"p_v", th.p_v},
                    {"p_o", th.p_o}, {"p_l", th.p_l}, {"p_w", th.p_w}},
                   [](Tape& t, const std::vector<NodeId>& in) {
                     return talking_heads_attention_tape(
                         t, in[0], in[1], ThParamNodes{in[2], in[3], in[4], in[5], in[6], in[7]});
                   }});
  for (const bool logits_only : {true, false}) {
    cases.push_back({logits_only ? "project-logits" : "project-weights",
                     {{"x", x}, {"m", m}, {"p_q", th.p_q}, {"p_k", th.p_k}, {"p_v", th.p_v},
                      {"p_o", th.p_o}, {"p_l", th.p_l}, {"p_w", th.p_w}},
                     [logits_only](Tape& t, const std::vector<NodeId>& in) {
                       return talking_heads_attention_tape(
                           t, in[0], in[1], ThParamNodes{in[2], in[3], in[4], in[5], in[6], in[7]},
                           {}, nullptr, nullptr, logits_only, !logits_only);
                     }});
  }
  cases.push_back({"dynamic-projection",
                   {{"x", x}, {"m", m}, {"p_q", dyn.th.p_q}, {"p_k", dyn.th.p_k},
                    {"p_v", dyn.th.p_v}, {"p_o", dyn.th.p_o}, {"p_l", dyn.th.p_l},
                    {"p_w", dyn.th.p_w}, {"p_xl", dyn.p_xl}, {"p_ml", dyn.p_ml},
                    {"p_xw", dyn.p_xw}, {"p_mw", dyn.p_mw}},
                   [](Tape& t, const std::vector<NodeId>& in) {
                     DynParamNodes p;
                     p.th = ThParamNodes{in[2], in[3], in[4], in[5], in[6], in[7]};
                     p.p_xl = in[8];
                     p.p_ml = in[9];
                     p.p_xw = in[10];
                     p.p_mw = in[11];
                     p.enabled = GeneratorSet{true, true, true, true};
                     return dynamic_projection_attention_tape(t, in[0], in[1], p);
                   }});
  cases.push_back({"general-bilinear",
                   {{"x", x}, {"m", m}, {"p", gb.p}, {"q", gb.q}},
                   [](Tape& t, const std::vector<NodeId>& in) {
                     return gbma_tape(t, in[0], in[1], in[2], in[3]);
                   }});

  for (const GradCase& c : cases) run_gradient_case(s, c, corrupt_pl);
}

// ---- cost parity ---------------------------------------------------------

void run_cost_suite(std::vector<PropertyResult>& results) {
  SuiteRunner s{results, "cost-parity"};
  Rng rng(71);
  auto dim = [&]() { return 1 + int64_t(rng.below(64)); };

  int64_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    AttentionDims d;
    d.n = dim();
    d.m = dim();
    d.d_x = d.d_y = dim();
    d.d_m = dim();
    d.d_k = dim();
    d.d_v = dim();
    d.h_k = dim();
    d.h = dim();
    d.h_v = dim();

    AttentionDims dm = d;
    dm.h_k = dm.h_v = dm.h;
    const CostQuery qm{dm, CostVariant::MultiHead, {}};
    const CostQuery qt{d, CostVariant::TalkingHeads, {}};
    if (multiplies_schedule(qm).schedule_total != multiplies_closed_form(qm)) ++mismatches;
    if (multiplies_schedule(qt).schedule_total != multiplies_closed_form(qt)) ++mismatches;
  }
  s.record("closed-form-equals-schedule-200-random-dims", double(mismatches), 0.0);

  // Parameter-count delta between talking-heads and the matched multi-head.
  {
    AttentionDims d = AttentionDims::uniform(7, 9, 16, 5, 6, 3, 3, 3);
    const int64_t th = parameter_count(CostQuery{d, CostVariant::TalkingHeads, {}});
    const int64_t mh = parameter_count(CostQuery{d, CostVariant::MultiHead, {}});
    s.record_flag("talking-heads-parameter-overhead",
                  th - mh == d.h_k * d.h + d.h * d.h_v);
  }

  // Monotonicity in n and symmetry under (d_k,h_k) <-> (d_v,h_v).
  {
    AttentionDims a = AttentionDims::uniform(8, 8, 12, 3, 5, 2, 4, 6);
    AttentionDims b = a;
    b.n = 16;
    const bool mono = multiplies_closed_form({b, CostVariant::TalkingHeads, {}}) >=
                      multiplies_closed_form({a, CostVariant::TalkingHeads, {}});
    AttentionDims sw = a;
    std::swap(sw.d_k, sw.d_v);
    std::swap(sw.h_k, sw.h_v);
    const bool sym = multiplies_closed_form({a, CostVariant::TalkingHeads, {}}) ==
                     multiplies_closed_form({sw, CostVariant::TalkingHeads, {}});
    s.record_flag("multiplies-monotone-in-n", mono);
    s.record_flag("key-value-symmetry", sym);
  }
}

}  // namespace

Tensor reference_einsum(const std::vector<EinsumOperand>& operands,
                        const std::vector<std::string>& out) {
  if (operands.empty()) throw std::invalid_argument("reference_einsum: empty operand list");

  struct Bound {
    const Tensor* t;
    std::vector<Axis> axes;
  };
  std::vector<Bound> ops;
  for (const EinsumOperand& op : operands) {
    Bound b{op.tensor, op.tensor->axes()};
    if (!op.names.empty()) {
      if (op.names.size() != b.axes.size())
        throw std::invalid_argument("reference_einsum: name count mismatch");
      for (size_t i = 0; i < b.axes.size(); ++i) b.axes[i].name = op.names[i];
    }
    ops.push_back(std::move(b));
  }

  std::vector<Axis> uni;
  for (const Bound& b : ops)
    for (const Axis& ax : b.axes) {
      bool found = false;
      for (const Axis& u : uni)
        if (u.name == ax.name) {
          if (u.size != ax.size)
            throw std::invalid_argument("reference_einsum: axis size mismatch");
          found = true;
        }
      if (!found) uni.push_back(ax);
    }

  std::vector<Axis> out_axes;
  for (const std::string& name : out) {
    bool found = false;
    for (const Axis& u : uni)
      if (u.name == name) {
        out_axes.push_back(u);
        found = true;
      }
    if (!found) throw std::invalid_argument("reference_einsum: unknown out axis " + name);
  }

  // Stride of each union axis within a given axis list (0 when absent).
  const auto strides_in = [&](const std::vector<Axis>& axes) {
    const std::vector<int64_t> local = strides_of(axes);
    std::vector<int64_t> s(uni.size(), 0);
    for (size_t u = 0; u < uni.size(); ++u)
      for (size_t i = 0; i < axes.size(); ++i)
        if (axes[i].name == uni[u].name) s[u] = local[i];
    return s;
  };
  std::vector<std::vector<int64_t>> op_strides;
  for (const Bound& b : ops) op_strides.push_back(strides_in(b.axes));
  const std::vector<int64_t> out_strides = strides_in(out_axes);

  Tensor result(out_axes);
  std::vector<int64_t> idx(uni.size(), 0);
  const int64_t total = numel_of(uni);
  for (int64_t it = 0; it < total; ++it) {
    double prod = 1.0;
    for (size_t o = 0; o < ops.size(); ++o) {
      int64_t off = 0;
      for (size_t u = 0; u < uni.size(); ++u) off += idx[u] * op_strides[o][u];
      prod *= ops[o].t->data()[off];
    }
    int64_t off = 0;
    for (size_t u = 0; u < uni.size(); ++u) off += idx[u] * out_strides[u];
    result.data()[off] += prod;

    for (int64_t u = int64_t(uni.size()) - 1; u >= 0; --u) {
      if (++idx[u] < uni[u].size) break;
      idx[u] = 0;
    }
  }
  return result;
}

std::vector<PropertyResult> run_verification(const VerifyOptions& options) {
  std::vector<PropertyResult> results;
  const auto wants = [&](const char* suite) {
    return options.filter.empty() || std::string(suite).find(options.filter) != std::string::npos;
  };
  if (wants("einsum-oracle")) run_einsum_suite(results);
  if (wants("reduction")) run_reduction_suite(results);
  if (wants("gbma")) run_gbma_suite(results);
  if (wants("gradient")) run_gradient_suite(results, options.corrupt_pl_adjoint);
  if (wants("cost-parity")) run_cost_suite(results);
  return results;
}

}  // namespace attnkit
