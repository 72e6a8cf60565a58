#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "attnkit/attention.hpp"

namespace attnkit {

enum class CostVariant { MultiHead, TalkingHeads, LogitsOnly, WeightsOnly, Dynamic, Gbma };

std::string variant_name(CostVariant v);

struct CostQuery {
  AttentionDims dims;
  CostVariant variant = CostVariant::MultiHead;
  GeneratorSet generators;  // meaningful for Dynamic only
};

struct CostReport {
  std::vector<std::pair<std::string, int64_t>> per_einsum;
  int64_t schedule_total = 0;
  std::optional<int64_t> closed_form_total;
  int64_t parameter_count = 0;
};

// Closed-form multiply count. Throws std::runtime_error("schedule only")
// for the general bilinear variant, which has no closed form here.
int64_t multiplies_closed_form(const CostQuery& q);

int64_t parameter_count(const CostQuery& q);

// Tallies the step-by-step einsum schedule symbolically (axis sizes only,
// no tensor data), using exactly the pairwise-contraction cost rule of the
// einsum engine. For the dynamic variant this is the naive tally where each
// generated projection is applied in its own einsum; the closed form instead
// counts a single fused projection application, so the two may differ.
CostReport multiplies_schedule(const CostQuery& q);

// CSV with header: variant,h_k,h,h_v,d_k,d_v,params,multiplies_raw,multiplies_sci.
// Head columns that do not apply to a variant are left blank.
void emit_cost_table(const std::vector<CostQuery>& queries, std::ostream& sink);

// Query lists reproducing the published comparison tables at n = m = 512,
// model widths 768. Names: table1, table2, table3, table6, table7.
std::vector<CostQuery> preset_queries(const std::string& name);

}  // namespace attnkit
