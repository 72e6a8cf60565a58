#pragma once

#include <string>
#include <vector>

#include "attnkit/tensor.hpp"

namespace attnkit {

struct PropertyResult {
  std::string suite;
  std::string name;
  bool pass = false;
  double worst_err = 0.0;
  std::string detail;
};

struct VerifyOptions {
  std::string filter;  // substring match on suite name; empty runs everything
  // Test hook: perturb the analytic adjoint of P_l before comparison, to
  // prove the gradient suite can actually fail.
  bool corrupt_pl_adjoint = false;
};

// Runs the library property suites: einsum-oracle, reduction, gbma,
// gradient, cost-parity.
std::vector<PropertyResult> run_verification(const VerifyOptions& options = {});

// Independent many-nested-loops contraction oracle used by the einsum suite;
// exposed for reuse in tests.
Tensor reference_einsum(const std::vector<EinsumOperand>& operands,
                        const std::vector<std::string>& out);

}  // namespace attnkit
