#include "attnkit/cost.hpp"

#include <cstdio>
#include <set>
#include <stdexcept>

namespace attnkit {

namespace {

using Ax = std::vector<Axis>;

// Size-only mirror of the einsum engine's pairwise contraction: each step
// costs the product of the union-axis sizes, and >2-operand calls suffix the
// label with the step number, exactly as the engine does.
void sym_einsum(const std::vector<Ax>& ops, const std::vector<std::string>& out,
                CounterChannel& counter, const std::string& label) {
  Ax acc = ops[0];
  for (size_t i = 1; i < ops.size(); ++i) {
    std::set<std::string> keep(out.begin(), out.end());
    for (size_t j = i + 1; j < ops.size(); ++j)
      for (const Axis& ax : ops[j]) keep.insert(ax.name);

    Ax space = acc;
    for (const Axis& ax : ops[i]) {
      bool found = false;
      for (const Axis& sx : space) found = found || sx.name == ax.name;
      if (!found) space.push_back(ax);
    }
    int64_t cost = 1;
    for (const Axis& ax : space) cost *= ax.size;
    std::string step_label = label;
    if (ops.size() > 2) step_label += "#" + std::to_string(i);
    counter.record(step_label, cost);

    Ax next;
    for (const Axis& ax : space)
      if (keep.count(ax.name)) next.push_back(ax);
    acc = next;
  }
}

void tally_schedule(const CostQuery& q, CounterChannel& c) {
  const AttentionDims& d = q.dims;
  const Axis n{"n", d.n}, m{"m", d.m};
  const Axis dx{"d_x", d.d_x}, dm{"d_m", d.d_m}, dy{"d_y", d.d_y};
  const Axis dk{"d_k", d.d_k}, dv{"d_v", d.d_v};
  const Axis hk{"h_k", d.h_k}, h{"h", d.h}, hv{"h_v", d.h_v};

  if (q.variant == CostVariant::MultiHead) {
    const Axis hh{"h", d.h};
    sym_einsum({{n, dx}, {dx, dk, hh}}, {"n", "d_k", "h"}, c, "queries");
    sym_einsum({{m, dm}, {dm, dk, hh}}, {"m", "d_k", "h"}, c, "keys");
    sym_einsum({{m, dm}, {dm, dv, hh}}, {"m", "d_v", "h"}, c, "values");
    sym_einsum({{n, dk, hh}, {m, dk, hh}}, {"n", "m", "h"}, c, "logits");
    sym_einsum({{n, m, hh}, {m, dv, hh}}, {"n", "d_v", "h"}, c, "outputs-weighted-sum");
    sym_einsum({{n, dv, hh}, {dy, dv, hh}}, {"n", "d_y"}, c, "output-projection");
    return;
  }

  if (q.variant == CostVariant::Gbma) {
    sym_einsum({{n, dx}, {dx, dm, h}, {m, dm}}, {"n", "m", "h"}, c, "logits");
    sym_einsum({{n, m, h}, {m, dm}, {dm, dy, h}}, {"n", "d_y"}, c, "outputs");
    return;
  }

  // Talking-heads family (full, hybrids, dynamic).
  const bool logits_proj = q.variant != CostVariant::WeightsOnly;
  const bool weights_proj = q.variant != CostVariant::LogitsOnly;
  const bool dyn = q.variant == CostVariant::Dynamic;

  sym_einsum({{n, dx}, {dx, dk, hk}}, {"n", "d_k", "h_k"}, c, "queries");
  sym_einsum({{m, dm}, {dm, dk, hk}}, {"m", "d_k", "h_k"}, c, "keys");
  sym_einsum({{m, dm}, {dm, dv, hv}}, {"m", "d_v", "h_v"}, c, "values");
  sym_einsum({{n, dk, hk}, {m, dk, hk}}, {"n", "m", "h_k"}, c, "dot-product");
  if (logits_proj)
    sym_einsum({{n, m, hk}, {hk, h}}, {"n", "m", "h"}, c, "logits-projection");
  if (dyn && q.generators.xl) {
    sym_einsum({{n, dx}, {dx, hk, h}}, {"n", "h_k", "h"}, c, "logits-generator-x");
    sym_einsum({{n, m, hk}, {n, hk, h}}, {"n", "m", "h"}, c, "logits-dynamic-x");
  }
  if (dyn && q.generators.ml) {
    sym_einsum({{m, dm}, {dm, hk, h}}, {"m", "h_k", "h"}, c, "logits-generator-m");
    sym_einsum({{n, m, hk}, {m, hk, h}}, {"n", "m", "h"}, c, "logits-dynamic-m");
  }
  if (weights_proj)
    sym_einsum({{n, m, h}, {h, hv}}, {"n", "m", "h_v"}, c, "weights-projection");
  if (dyn && q.generators.xw) {
    sym_einsum({{n, dx}, {dx, h, hv}}, {"n", "h", "h_v"}, c, "weights-generator-x");
    sym_einsum({{n, m, h}, {n, h, hv}}, {"n", "m", "h_v"}, c, "weights-dynamic-x");
  }
  if (dyn && q.generators.mw) {
    sym_einsum({{m, dm}, {dm, h, hv}}, {"m", "h", "h_v"}, c, "weights-generator-m");
    sym_einsum({{n, m, h}, {m, h, hv}}, {"n", "m", "h_v"}, c, "weights-dynamic-m");
  }
  sym_einsum({{n, m, hv}, {m, dv, hv}}, {"n", "d_v", "h_v"}, c, "outputs-weighted-sum");
  sym_einsum({{n, dv, hv}, {dy, dv, hv}}, {"n", "d_y"}, c, "output-projection");
}

}  // namespace

std::string variant_name(CostVariant v) {
  switch (v) {
    case CostVariant::MultiHead: return "multi-head";
    case CostVariant::TalkingHeads: return "talking-heads";
    case CostVariant::LogitsOnly: return "project-logits";
    case CostVariant::WeightsOnly: return "project-weights";
    case CostVariant::Dynamic: return "dynamic-projection";
    case CostVariant::Gbma: return "general-bilinear";
  }
  throw std::invalid_argument("unknown variant");
}

int64_t multiplies_closed_form(const CostQuery& q) {
  const AttentionDims& d = q.dims;
  d.validate();
  if (q.variant == CostVariant::Gbma) throw std::runtime_error("schedule only");
  if (d.d_x != d.d_y)
    throw std::invalid_argument("closed form assumes equal input and output widths");

  const int64_t base = d.n * d.d_x + d.m * d.d_m + d.n * d.m;
  if (q.variant == CostVariant::MultiHead)
    return d.h * (d.d_k + d.d_v) * base;

  int64_t total = (d.d_k * d.h_k + d.d_v * d.h_v) * base;
  if (q.variant != CostVariant::WeightsOnly) total += d.n * d.m * d.h_k * d.h;
  if (q.variant != CostVariant::LogitsOnly) total += d.n * d.m * d.h * d.h_v;
  if (q.variant == CostVariant::Dynamic) {
    if (q.generators.xl) total += d.n * d.d_x * d.h_k * d.h;
    if (q.generators.ml) total += d.m * d.d_m * d.h_k * d.h;
    if (q.generators.xw) total += d.n * d.d_x * d.h * d.h_v;
    if (q.generators.mw) total += d.m * d.d_m * d.h * d.h_v;
  }
  return total;
}

int64_t parameter_count(const CostQuery& q) {
  const AttentionDims& d = q.dims;
  d.validate();
  if (q.variant == CostVariant::Gbma) return d.d_x * d.d_m * d.h + d.d_m * d.d_y * d.h;
  if (q.variant == CostVariant::MultiHead)
    return (d.d_x + d.d_m) * d.d_k * d.h + (d.d_m + d.d_y) * d.d_v * d.h;

  int64_t total = (d.d_x + d.d_m) * d.d_k * d.h_k + (d.d_m + d.d_y) * d.d_v * d.h_v;
  if (q.variant != CostVariant::WeightsOnly) total += d.h_k * d.h;
  if (q.variant != CostVariant::LogitsOnly) total += d.h * d.h_v;
  if (q.variant == CostVariant::Dynamic) {
    if (q.generators.xl) total += d.d_x * d.h_k * d.h;
    if (q.generators.ml) total += d.d_m * d.h_k * d.h;
    if (q.generators.xw) total += d.d_x * d.h * d.h_v;
    if (q.generators.mw) total += d.d_m * d.h * d.h_v;
  }
  return total;
}

CostReport multiplies_schedule(const CostQuery& q) {
  q.dims.validate();
  CostReport report;
  CounterChannel c;
  tally_schedule(q, c);
  report.per_einsum = c.records();
  report.schedule_total = c.total();
  if (q.variant != CostVariant::Gbma) report.closed_form_total = multiplies_closed_form(q);
  report.parameter_count = parameter_count(q);
  return report;
}

void emit_cost_table(const std::vector<CostQuery>& queries, std::ostream& sink) {
  sink << "variant,h_k,h,h_v,d_k,d_v,params,multiplies_raw,multiplies_sci\n";
  for (const CostQuery& q : queries) {
    const bool has_hk = q.variant == CostVariant::TalkingHeads ||
                        q.variant == CostVariant::LogitsOnly || q.variant == CostVariant::Dynamic;
    const bool has_hv = q.variant == CostVariant::TalkingHeads ||
                        q.variant == CostVariant::WeightsOnly || q.variant == CostVariant::Dynamic;
    const CostReport r = multiplies_schedule(q);
    const int64_t mult = r.closed_form_total ? *r.closed_form_total : r.schedule_total;
    char sci[32];
    std::snprintf(sci, sizeof(sci), "%.3e", double(mult));
    sink << variant_name(q.variant) << ',';
    if (has_hk) sink << q.dims.h_k;
    sink << ',' << q.dims.h << ',';
    if (has_hv) sink << q.dims.h_v;
    sink << ',' << q.dims.d_k << ',' << q.dims.d_v << ',' << r.parameter_count << ',' << mult
         << ',' << sci << '\n';
    if (!sink) throw std::runtime_error("cost table write failure");
  }
  if (!sink) throw std::runtime_error("cost table write failure");
}

std::vector<CostQuery> preset_queries(const std::string& name) {
  const auto mh = [](int64_t h, int64_t dkv) {
    return CostQuery{AttentionDims::uniform(512, 512, 768, dkv, dkv, h, h, h),
                     CostVariant::MultiHead, {}};
  };
  const auto th = [](int64_t hk, int64_t h, int64_t hv, int64_t dk, int64_t dv) {
    return CostQuery{AttentionDims::uniform(512, 512, 768, dk, dv, hk, h, hv),
                     CostVariant::TalkingHeads, {}};
  };
  const auto dyn = [](int64_t h, int64_t dkv, GeneratorSet g) {
    return CostQuery{AttentionDims::uniform(512, 512, 768, dkv, dkv, h, h, h),
                     CostVariant::Dynamic, g};
  };
  const GeneratorSet all{true, true, true, true};

  if (name == "table1") {
    std::vector<CostQuery> qs = {mh(6, 128), mh(12, 64), mh(24, 32), mh(48, 16),
                                 th(6, 6, 6, 128, 128), th(12, 12, 12, 64, 64),
                                 th(24, 24, 24, 32, 32), th(48, 48, 48, 16, 16), mh(24, 64)};
    qs.push_back(CostQuery{AttentionDims::uniform(512, 512, 768, 768, 768, 12, 12, 12),
                           CostVariant::Gbma, {}});
    return qs;
  }
  if (name == "table2")
    return {th(6, 6, 6, 128, 128),  th(6, 24, 6, 128, 128), th(24, 6, 24, 32, 32),
            th(6, 24, 24, 128, 32), th(24, 24, 6, 32, 128), th(24, 24, 24, 32, 32)};
  if (name == "table3") {
    const AttentionDims d24 = AttentionDims::uniform(512, 512, 768, 32, 32, 24, 24, 24);
    return {mh(24, 32),
            CostQuery{d24, CostVariant::LogitsOnly, {}},
            CostQuery{d24, CostVariant::WeightsOnly, {}},
            th(24, 24, 24, 32, 32)};
  }
  if (name == "table6")
    return {mh(12, 64), th(12, 12, 12, 64, 64), dyn(12, 64, all),
            mh(24, 32), th(24, 24, 24, 32, 32), dyn(24, 32, all)};
  if (name == "table7")
    return {th(12, 12, 12, 64, 64),
            dyn(12, 64, {true, false, false, false}),
            dyn(12, 64, {false, false, true, false}),
            dyn(12, 64, {false, true, false, false}),
            dyn(12, 64, {false, false, false, true}),
            dyn(12, 64, all)};
  throw std::invalid_argument("unknown preset '" + name + "'");
}

}  // namespace attnkit
