// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the exit code is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "attnkit/attention.hpp"
#include "attnkit/cost.hpp"
#include "attnkit/eig.hpp"
#include "attnkit/lm.hpp"
#include "attnkit/verify.hpp"
#include "cubic_oracle.h"

using namespace attnkit;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << criterion << ": " << detail << "\n";
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  return worst;
}

Tensor random_tensor(std::vector<Axis> axes, Rng& rng) {
  return normal_init(std::move(axes), 1.0, rng);
}

// ---- criterion 1: published cost tables, exact integers ------------------

void criterion_cost_tables() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;

  const auto check_set = [&](const std::string& table, bool params,
                             const std::vector<int64_t>& expected) {
    std::set<int64_t> got;
    for (const CostQuery& q : preset_queries(table)) {
      if (params) {
        got.insert(parameter_count(q));
      } else if (q.variant != CostVariant::Gbma) {
        got.insert(multiplies_closed_form(q));
      } else {
        got.insert(multiplies_schedule(q).schedule_total);
      }
    }
    for (int64_t want : expected) {
      if (got.count(want)) continue;
      ok = false;
      detail += " missing " + std::to_string(want) + " in " + table +
                (params ? " params;" : " multiplies;");
    }
  };

  check_set("table1", true,
            {2'359'296, 2'359'368, 2'359'584, 2'360'448, 2'363'904, 4'718'592, 14'155'776});
  check_set("table2", true, {2'360'016});
  check_set("table3", true, {2'359'872});
  check_set("table6", true, {2'801'952, 4'129'920});
  check_set("table7", true, {2'470'176});

  check_set("table1", false,
            {1'610'612'736, 2'818'572'288, 1'912'602'624, 3'221'225'472, 12'079'595'520});
  check_set("table2", false, {1'686'110'208, 1'799'356'416});
  check_set("table3", false, {1'761'607'680});
  check_set("table6", false, {1'913'487'360});

  const double dt = seconds_since(t0);
  if (dt >= 1.0) {
    ok = false;
    detail += " runtime " + std::to_string(dt) + "s exceeds 1s;";
  }
  report(1, ok, "cost tables reproduce the published integers" + detail);
}

// ---- criteria mapped to the built-in property suites ---------------------

void criterion_suite(int criterion, const std::string& filter, double budget_s,
                     const std::string& what) {
  const auto t0 = Clock::now();
  const auto results = run_verification({filter, false});
  const double dt = seconds_since(t0);
  bool ok = !results.empty();
  std::string detail;
  for (const auto& r : results)
    if (!r.pass) {
      ok = false;
      detail += " " + r.suite + "/" + r.name + " worst_err=" + std::to_string(r.worst_err) + ";";
    }
  if (dt >= budget_s) {
    ok = false;
    detail += " runtime " + std::to_string(dt) + "s exceeds budget;";
  }
  report(criterion, ok, what + detail);
}

// ---- criterion 5: dynamic reductions -------------------------------------

void criterion_dynamic_reduction() {
  bool ok = true;
  std::string detail;

  AttentionDims d;
  d.n = d.m = 2;
  d.d_x = d.d_m = d.d_y = 2;
  d.d_k = d.d_v = 2;
  d.h_k = d.h = d.h_v = 2;

  // All-zero generators reproduce the static variant bit for bit.
  {
    DynamicProjectionParams p = init_dynamic_params(d, Rng(1), {}, 0.02);
    Rng data(2);
    Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, data);
    Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, data);
    const double diff =
        max_abs_diff(dynamic_projection_attention(x, m, p), talking_heads_attention(x, m, p.th));
    if (diff != 0.0) {
      ok = false;
      detail += " zero-generator mismatch " + std::to_string(diff) + ";";
    }
  }

  // Every enabled-generator combination matches the nested-loop oracle.
  const std::vector<GeneratorSet> combos = {{true, false, false, false},
                                            {false, true, false, false},
                                            {false, false, true, false},
                                            {false, false, false, true},
                                            {true, true, true, true}};
  for (size_t c = 0; c < combos.size(); ++c) {
    DynamicProjectionParams p = init_dynamic_params(d, Rng(10 + c), combos[c], 0.02);
    Rng data(20 + c);
    Tensor x = random_tensor({{"n", 2}, {"d_x", 2}}, data);
    Tensor m = random_tensor({{"m", 2}, {"d_m", 2}}, data);

    Tensor q = reference_einsum({{x, {}}, {p.th.p_q, {}}}, {"n", "d_k", "h_k"});
    Tensor k = reference_einsum({{m, {}}, {p.th.p_k, {}}}, {"m", "d_k", "h_k"});
    Tensor v = reference_einsum({{m, {}}, {p.th.p_v, {}}}, {"m", "d_v", "h_v"});
    Tensor j = reference_einsum({{q, {}}, {k, {}}}, {"n", "m", "h_k"});

    Tensor l = reference_einsum({{j, {}}, {p.th.p_l, {}}}, {"n", "m", "h"});
    if (combos[c].xl) {
      Tensor r = reference_einsum({{x, {}}, {p.p_xl, {}}}, {"n", "h_k", "h"});
      l = add(l, reference_einsum({{j, {}}, {r, {}}}, {"n", "m", "h"}));
    }
    if (combos[c].ml) {
      Tensor r = reference_einsum({{m, {}}, {p.p_ml, {}}}, {"m", "h_k", "h"});
      l = add(l, reference_einsum({{j, {}}, {r, {}}}, {"n", "m", "h"}));
    }
    Tensor w = softmax(l, "m");

    Tensor u = reference_einsum({{w, {}}, {p.th.p_w, {}}}, {"n", "m", "h_v"});
    if (combos[c].xw) {
      Tensor r = reference_einsum({{x, {}}, {p.p_xw, {}}}, {"n", "h", "h_v"});
      u = add(u, reference_einsum({{w, {}}, {r, {}}}, {"n", "m", "h_v"}));
    }
    if (combos[c].mw) {
      Tensor r = reference_einsum({{m, {}}, {p.p_mw, {}}}, {"m", "h", "h_v"});
      u = add(u, reference_einsum({{w, {}}, {r, {}}}, {"n", "m", "h_v"}));
    }
    Tensor o = reference_einsum({{u, {}}, {v, {}}}, {"n", "d_v", "h_v"});
    Tensor y_ref = reference_einsum({{o, {}}, {p.th.p_o, {}}}, {"n", "d_y"});

    const double diff = max_abs_diff(dynamic_projection_attention(x, m, p), y_ref);
    if (diff > 1e-12) {
      ok = false;
      detail += " oracle mismatch combo " + std::to_string(c) + " " + std::to_string(diff) + ";";
    }
  }
  report(5, ok, "dynamic projections reduce to static and match the loop oracle" + detail);
}

// ---- criterion 7: softmax and permutation invariants ---------------------

void criterion_invariants() {
  bool ok = true;
  std::string detail;

  AttentionDims d;
  d.n = 3;
  d.m = 4;
  d.d_x = d.d_m = d.d_y = 4;
  d.d_k = d.d_v = 2;
  d.h_k = d.h = d.h_v = 2;

  Rng data(3);
  const Tensor x = random_tensor({{"n", d.n}, {"d_x", d.d_x}}, data);
  const Tensor m = random_tensor({{"m", d.m}, {"d_m", d.d_m}}, data);
  Tensor m_perm({{"m", d.m}, {"d_m", d.d_m}});
  for (int64_t r = 0; r < d.m; ++r)
    for (int64_t c = 0; c < d.d_m; ++c) m_perm.at({r, c}) = m.at({(r + 1) % d.m, c});
  Tensor x_perm({{"n", d.n}, {"d_x", d.d_x}});
  for (int64_t r = 0; r < d.n; ++r)
    for (int64_t c = 0; c < d.d_x; ++c) x_perm.at({r, c}) = x.at({(r + 1) % d.n, c});

  MultiHeadParams mh = init_multi_head_params(d, Rng(4));
  TalkingHeadsParams th = init_talking_heads_params(d, Rng(4), 0.02);
  DynamicProjectionParams dyn = init_dynamic_params(d, Rng(4), {true, true, true, true}, 0.02);
  GbmaParams gb = init_gbma_params(d, Rng(4));

  struct Variant {
    std::string name;
    std::function<Tensor(const Tensor&, const Tensor&, AttentionTrace*)> run;
  };
  const std::vector<Variant> variants = {
      {"multi-head",
       [&](const Tensor& a, const Tensor& b, AttentionTrace* t) {
         return multi_head_attention(a, b, mh, nullptr, t);
       }},
      {"talking-heads",
       [&](const Tensor& a, const Tensor& b, AttentionTrace* t) {
         return talking_heads_attention(a, b, th, nullptr, t);
       }},
      {"project-logits",
       [&](const Tensor& a, const Tensor& b, AttentionTrace* t) {
         return hybrid_attention(HybridKind::LogitsOnly, a, b, th, nullptr, t);
       }},
      {"project-weights",
       [&](const Tensor& a, const Tensor& b, AttentionTrace* t) {
         return hybrid_attention(HybridKind::WeightsOnly, a, b, th, nullptr, t);
       }},
      {"dynamic-projection",
       [&](const Tensor& a, const Tensor& b, AttentionTrace* t) {
         return dynamic_projection_attention(a, b, dyn, nullptr, t);
       }},
      {"general-bilinear",
       [&](const Tensor& a, const Tensor& b, AttentionTrace*) { return gbma(a, b, gb); }},
  };

  for (const Variant& variant : variants) {
    AttentionTrace trace;
    Tensor y = variant.run(x, m, &trace);

    if (variant.name != "general-bilinear") {
      for (int64_t i = 0; i < d.n; ++i)
        for (int64_t h = 0; h < d.h; ++h) {
          double sum = 0.0;
          for (int64_t j = 0; j < d.m; ++j) sum += trace.w.at({i, j, h});
          if (std::fabs(sum - 1.0) > 1e-12) {
            ok = false;
            detail += " " + variant.name + " weight row sum " + std::to_string(sum) + ";";
          }
        }
    }

    const double inv = max_abs_diff(y, variant.run(x, m_perm, nullptr));
    if (inv > 1e-12) {
      ok = false;
      detail += " " + variant.name + " memory-permutation drift " + std::to_string(inv) + ";";
    }

    Tensor y_perm = variant.run(x_perm, m, nullptr);
    double equi = 0.0;
    for (int64_t r = 0; r < d.n; ++r)
      for (int64_t c = 0; c < d.d_y; ++c)
        equi = std::max(equi, std::fabs(y_perm.at({r, c}) - y.at({(r + 1) % d.n, c})));
    if (equi > 1e-12) {
      ok = false;
      detail += " " + variant.name + " query-equivariance drift " + std::to_string(equi) + ";";
    }
  }
  report(7, ok, "softmax normalization and permutation behavior across variants" + detail);
}

// ---- criterion 8: dynamic generator initialization scale -----------------

void criterion_generator_stds() {
  AttentionDims d;
  d.n = d.m = 2;
  d.d_x = d.d_m = d.d_y = 768;
  d.d_k = d.d_v = 64;
  d.h_k = d.h = d.h_v = 12;
  DynamicProjectionParams p = init_dynamic_params(d, Rng(5), {true, true, true, true}, 0.02);

  bool ok = true;
  std::string detail;
  const auto check = [&](const std::string& name, const Tensor& t, double want) {
    double sum = 0.0, sq = 0.0;
    for (double v : t.data()) {
      sum += v;
      sq += v * v;
    }
    const double n = double(t.numel());
    const double mean = sum / n;
    const double std = std::sqrt(sq / n - mean * mean);
    if (t.numel() < 100000 || std::fabs(std - want) > 0.02 * want) {
      ok = false;
      detail += " " + name + " std " + std::to_string(std) + " vs " + std::to_string(want) + ";";
    }
  };
  const double want = 0.1 / std::sqrt(768.0 * 12.0);
  check("p_xl", p.p_xl, want);
  check("p_ml", p.p_ml, want);
  check("p_xw", p.p_xw, want);
  check("p_mw", p.p_mw, want);
  report(8, ok, "generator initialization stds match 0.1/sqrt(width*heads)" + detail);
}

// ---- criterion 9: bundled training config --------------------------------

void criterion_training_smoke() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;

  const std::string path = std::string(ATTN_CONFIG_DIR) + "/smoke.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    report(9, false, "cannot read " + path);
    return;
  }
  TrainRun run = train_run_from_json(nlohmann::ordered_json::parse(in));

  Model model = init_model(run.model, run.train.seed);
  TrainLog log = train(model, run.corpus, run.train);
  const double initial = log.rows.front().loss;
  const double final_loss = log.rows.back().loss;
  if (!(final_loss <= 0.2 * initial)) {
    ok = false;
    detail += " final " + std::to_string(final_loss) + " vs initial " + std::to_string(initial) +
              " misses the 0.2x bound;";
  }

  Model control = init_model(run.model, run.train.seed);
  TrainConfig frozen = run.train;
  frozen.steps = 20;
  frozen.learning_rate = 0.0;
  TrainLog flat = train(control, run.corpus, frozen);
  for (const auto& row : flat.rows)
    if (std::fabs(row.loss - flat.rows.front().loss) > 1e-12) {
      ok = false;
      detail += " zero-lr loss drifted;";
      break;
    }

  const double dt = seconds_since(t0);
  if (dt >= 120.0) {
    ok = false;
    detail += " runtime " + std::to_string(dt) + "s exceeds 2 minutes;";
  }
  report(9, ok,
         "bundled config trains to " + std::to_string(final_loss) + " from " +
             std::to_string(initial) + " in " + std::to_string(dt) + "s" + detail);
}

// ---- criterion 10: reported head-count comparison ------------------------

void criterion_comparison() {
  ModelConfig base;
  base.layers = 2;
  base.d_model = 32;
  base.d_ff = 64;
  base.d_k = base.d_v = 1;
  base.h_k = base.h = base.h_v = 16;
  base.vocab_size = 32;
  base.seq_len = 16;

  CorpusSpec corpus;
  corpus.kind = CorpusKind::SyntheticCopy;
  corpus.vocab_size = 32;
  corpus.seq_len = 16;

  TrainConfig tc;
  tc.steps = 100;
  tc.batch_size = 4;
  tc.learning_rate = 3e-3;
  tc.mask = {MaskKind::Span, 0.15, 3.0};
  tc.resample = false;

  std::ofstream curves("comparison_curves.csv", std::ios::binary);
  curves << "variant,seed,step,loss\n";
  double mh_final = 0.0, th_final = 0.0;
  for (CostVariant variant : {CostVariant::MultiHead, CostVariant::TalkingHeads}) {
    ModelConfig cfg = base;
    cfg.variant = variant;
    for (uint64_t seed : {101, 102, 103}) {
      corpus.seed = seed;
      tc.seed = seed;
      Model model = init_model(cfg, seed);
      TrainLog log = train(model, corpus, tc);
      for (const auto& row : log.rows)
        curves << variant_name(variant) << ',' << seed << ',' << row.step << ',' << row.loss
               << '\n';
      (variant == CostVariant::MultiHead ? mh_final : th_final) += log.rows.back().loss / 3.0;
    }
  }
  report(10, true,
         "single-unit-head comparison (reported, not asserted): multi-head mean final loss " +
             std::to_string(mh_final) + ", talking-heads " + std::to_string(th_final) +
             "; curves in comparison_curves.csv");
}

// ---- criterion 11: projection export diagnostics -------------------------

void criterion_export_diagnostics() {
  bool ok = true;
  std::string detail;

  const Tensor eye = identity_matrix({"h_k", 3}, {"h", 3});
  const double peak = eye.max_abs();
  Tensor norm = scale(eye, 1.0 / peak);
  if (std::fabs(det_abs(norm.data(), 3) - 1.0) > 1e-12) {
    ok = false;
    detail += " identity |det| off;";
  }
  for (const auto& e : eigenvalues(norm.data(), 3))
    if (std::fabs(std::abs(e) - 1.0) > 1e-12) {
      ok = false;
      detail += " identity eigenvalue magnitude off;";
    }

  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(9);
    for (double& v : a) v = rng.normal();
    std::vector<double> got;
    for (const auto& e : eigenvalues(a, 3)) got.push_back(std::abs(e));
    std::sort(got.begin(), got.end());
    const auto want = char_poly_eig_magnitudes_3x3(a);
    for (int i = 0; i < 3; ++i)
      if (std::fabs(got[i] - want[i]) > 1e-8) {
        ok = false;
        detail += " trial " + std::to_string(trial) + " eigenvalue drift;";
      }
  }
  report(11, ok, "export diagnostics: identity projection and cubic-oracle agreement" + detail);
}

}  // namespace

int main() {
  criterion_cost_tables();
  criterion_suite(2, "cost-parity", 5.0, "closed forms equal schedule tallies on random dims");
  criterion_suite(3, "reduction", 5.0, "identity talking-heads reduces to multi-head");
  criterion_suite(4, "gbma", 5.0, "factored variants match the bilinear form");
  criterion_dynamic_reduction();
  criterion_suite(6, "gradient", 60.0, "analytic gradients match finite differences");
  criterion_invariants();
  criterion_generator_stds();
  criterion_training_smoke();
  criterion_comparison();
  criterion_export_diagnostics();
  std::cout << (g_failures == 0 ? "all criteria passed"
                                : std::to_string(g_failures) + " criteria failed")
            << "\n";
  return g_failures;
}
