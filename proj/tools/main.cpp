#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnkit/attention.hpp"
#include "attnkit/checkpoint.hpp"
#include "attnkit/cost.hpp"
#include "attnkit/eig.hpp"
#include "attnkit/lm.hpp"
#include "attnkit/verify.hpp"

namespace {

using namespace attnkit;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_verify(const std::string& filter, bool inject_fault) {
  VerifyOptions options;
  options.filter = filter;
  options.corrupt_pl_adjoint = inject_fault;
  const auto results = run_verification(options);
  if (results.empty()) {
    std::cerr << "no suites match filter '" << filter << "'\n";
    return kExitUsage;
  }
  int failures = 0;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.suite << "/" << r.name
              << "  worst_err=" << fmt17(r.worst_err);
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
    if (!r.pass) ++failures;
  }
  std::cout << results.size() << " properties, " << failures << " failures\n";
  return failures == 0 ? kExitOk : kExitVerifyFailure;
}

GeneratorSet parse_generators(const std::string& spec) {
  GeneratorSet g;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "xl")
      g.xl = true;
    else if (item == "ml")
      g.ml = true;
    else if (item == "xw")
      g.xw = true;
    else if (item == "mw")
      g.mw = true;
    else
      throw CLI::ValidationError("--generators", "unknown generator '" + item + "'");
  }
  return g;
}

void write_matrix_csv(const Tensor& t, const std::string& path) {
  if (t.rank() != 2) throw std::runtime_error("matrix export expects rank 2: " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const int64_t rows = t.axes()[0].size;
  const int64_t cols = t.axes()[1].size;
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << fmt17(t.data()[r * cols + c]);
    }
    out << '\n';
  }
}

Tensor max_abs_normalized(const Tensor& t) {
  const double peak = t.max_abs();
  if (peak == 0.0) return t;
  return scale(t, 1.0 / peak);
}

void emit_diagnostics(std::ostream& out, const std::string& name, const Tensor& t) {
  if (t.rank() != 2 || t.axes()[0].size != t.axes()[1].size) {
    out << name << ": diagnostics skipped (non-square matrix)\n";
    return;
  }
  const int n = int(t.axes()[0].size);
  const double det = det_abs(t.data(), n);
  const auto eigs = eigenvalues(t.data(), n);
  double min_eig = 0.0;
  for (size_t i = 0; i < eigs.size(); ++i) {
    const double mag = std::abs(eigs[i]);
    if (i == 0 || mag < min_eig) min_eig = mag;
  }
  out << name << ": |det|=" << fmt17(det) << " min|eig|=" << fmt17(min_eig)
      << " det_above_1e-9=" << (det > 1e-9 ? "yes" : "no")
      << " min_eig_above_1e-3=" << (min_eig > 1e-3 ? "yes" : "no") << "\n";
}

int cmd_cost(const std::string& preset, const std::string& variant, int64_t hk, int64_t h,
             int64_t hv, int64_t dk, int64_t dv, int64_t n, int64_t m, int64_t dmodel,
             const std::string& generators, const std::string& out_path) {
  std::vector<CostQuery> queries;
  if (!preset.empty()) {
    queries = preset_queries(preset);
  } else {
    CostQuery q;
    q.variant = parse_variant(variant);
    q.dims.n = n;
    q.dims.m = m;
    q.dims.d_x = q.dims.d_m = q.dims.d_y = dmodel;
    q.dims.d_k = dk;
    q.dims.d_v = dv;
    q.dims.h_k = hk;
    q.dims.h = h;
    q.dims.h_v = hv;
    q.generators = parse_generators(generators);
    q.dims.validate();
    queries.push_back(q);
  }
  if (out_path.empty()) {
    emit_cost_table(queries, std::cout);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    emit_cost_table(queries, out);
  }
  return kExitOk;
}

int cmd_train(const std::string& config_path, int64_t seed_override, bool has_seed,
              const std::string& out_dir) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot read config: " << config_path << "\n";
    return kExitUsage;
  }
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const std::exception& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return kExitUsage;
  }
  TrainRun run = train_run_from_json(doc);
  if (has_seed) run.train.seed = uint64_t(seed_override);

  std::cout << "resolved config:\n" << train_run_to_json(run).dump(1) << "\n";

  Model model = init_model(run.model, run.train.seed);
  const TrainLog log = train(model, run.corpus, run.train);

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/train_log.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write train log");
    write_train_log(log, out);
  }
  save_checkpoint(to_checkpoint(model), out_dir + "/checkpoint.json");
  std::cout << "final log-perplexity: " << fmt17(log.final_log_perplexity) << "\n";
  return kExitOk;
}

int cmd_export_proj(const std::string& ckpt_path, int64_t layer, const std::string& out_dir) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::string prefix = "layer" + std::to_string(layer) + ".";
  const Tensor* p_l = ckpt.find(prefix + "p_l");
  const Tensor* p_w = ckpt.find(prefix + "p_w");
  if (p_l == nullptr || p_w == nullptr) {
    std::cerr << "checkpoint has no talking-heads projections for layer " << layer << "\n";
    return kExitUsage;
  }
  const Tensor product = einsum({{*p_l, {"h_k", "h"}}, {*p_w, {"h", "h_v"}}}, {"h_k", "h_v"});

  std::filesystem::create_directories(out_dir);
  write_matrix_csv(max_abs_normalized(*p_l), out_dir + "/p_l.csv");
  write_matrix_csv(max_abs_normalized(*p_w), out_dir + "/p_w.csv");
  write_matrix_csv(max_abs_normalized(product), out_dir + "/p_l_x_p_w.csv");

  std::ofstream diag(out_dir + "/diagnostics.txt", std::ios::binary);
  if (!diag) throw std::runtime_error("cannot write diagnostics");
  emit_diagnostics(diag, "p_l", *p_l);
  emit_diagnostics(diag, "p_w", *p_w);
  emit_diagnostics(diag, "p_l_x_p_w", product);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention variants: verification, cost tables, toy training, projection export"};
  app.require_subcommand(1);

  std::string filter;
  bool inject_fault = false;
  auto* verify = app.add_subcommand("verify", "run the property suites");
  verify->add_option("--filter", filter, "only run suites whose name contains this substring");
  verify->add_flag("--inject-gradient-fault", inject_fault)->group("");

  std::string preset, variant = "multi-head", generators = "xl,ml,xw,mw", cost_out;
  int64_t hk = 1, h = 1, hv = 1, dk = 1, dv = 1, n = 1, m = 1, dmodel = 1;
  auto* cost = app.add_subcommand("cost", "emit parameter/multiply tables");
  // --h would collide with the default -h help alias.
  cost->set_help_flag("--help", "print help");
  cost->add_option("--preset", preset, "table1|table2|table3|table6|table7");
  cost->add_option("--variant", variant, "attention variant for a manual query");
  cost->add_option("--hk", hk);
  cost->add_option("--h", h);
  cost->add_option("--hv", hv);
  cost->add_option("--dk", dk);
  cost->add_option("--dv", dv);
  cost->add_option("--n", n);
  cost->add_option("--m", m);
  cost->add_option("--dmodel", dmodel);
  cost->add_option("--generators", generators, "comma list of xl,ml,xw,mw (dynamic variant)");
  cost->add_option("--out", cost_out, "write the table to this file instead of stdout");

  std::string train_config, train_out = "train_out";
  int64_t seed_override = 0;
  auto* train_cmd = app.add_subcommand("train", "run the toy masked-LM training loop");
  auto* config_opt =
      train_cmd->add_option("--config", train_config, "JSON run config")->required();
  (void)config_opt;
  auto* seed_opt = train_cmd->add_option("--seed", seed_override, "override the training seed");
  train_cmd->add_option("--out", train_out, "output directory");

  std::string ckpt_path, export_out = "export_out";
  int64_t layer = 0;
  auto* export_cmd = app.add_subcommand("export-proj", "export head-projection matrices");
  export_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  export_cmd->add_option("--layer", layer, "layer index");
  export_cmd->add_option("--out", export_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (verify->parsed()) return cmd_verify(filter, inject_fault);
    if (cost->parsed())
      return cmd_cost(preset, variant, hk, h, hv, dk, dv, n, m, dmodel, generators, cost_out);
    if (train_cmd->parsed())
      return cmd_train(train_config, seed_override, seed_opt->count() > 0, train_out);
    if (export_cmd->parsed()) return cmd_export_proj(ckpt_path, layer, export_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
