#include "attnkit/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace attnkit {

using nlohmann::ordered_json;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Tensor ones(std::vector<Axis> axes) {
  Tensor t(std::move(axes));
  std::fill(t.data().begin(), t.data().end(), 1.0);
  return t;
}

}  // namespace

void CorpusSpec::validate() const {
  require(vocab_size >= 4, "corpus vocab_size must be at least 4");
  require(seq_len >= 2, "corpus seq_len must be at least 2");
  if (kind == CorpusKind::TextFile) require(!path.empty(), "text-file corpus needs a path");
}

AttentionDims ModelConfig::attention_dims() const {
  AttentionDims d;
  d.n = d.m = seq_len;
  d.d_x = d.d_m = d.d_y = d_model;
  d.d_k = d_k;
  d.d_v = d_v;
  d.h_k = h_k;
  d.h = h;
  d.h_v = h_v;
  return d;
}

void ModelConfig::validate() const {
  require(layers >= 1, "model needs at least one layer");
  require(d_model >= 1 && d_ff >= 1, "model widths must be positive");
  require(vocab_size >= 4 && seq_len >= 2, "model vocab/seq bounds");
  attention_dims().validate();
  if (variant == CostVariant::MultiHead)
    require(h_k == h && h == h_v, "multi-head attention needs equal head counts");
  if (variant == CostVariant::LogitsOnly)
    require(h == h_v, "logits-only hybrid requires h == h_v");
  if (variant == CostVariant::WeightsOnly)
    require(h_k == h, "weights-only hybrid requires h_k == h");
}

Tensor* Model::find(const std::string& name) {
  for (auto& [n, t] : params)
    if (n == name) return &t;
  return nullptr;
}

const Tensor* Model::find(const std::string& name) const {
  for (const auto& [n, t] : params)
    if (n == name) return &t;
  return nullptr;
}

Model init_model(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Model model;
  model.config = config;
  const Rng root(seed);
  const double embed_std = 1.0 / std::sqrt(double(config.d_model));

  auto push = [&](const std::string& name, Tensor t) {
    model.params.emplace_back(name, std::move(t));
  };
  auto draw = [&](uint64_t stream, std::vector<Axis> axes, double std) {
    Rng r = root.child(stream);
    return normal_init(std::move(axes), std, r);
  };

  push("embed", draw(100, {{"vocab", config.vocab_size}, {"d_x", config.d_model}}, embed_std));
  push("pos", draw(101, {{"n", config.seq_len}, {"d_x", config.d_model}}, embed_std));
  if (!config.tie_embeddings)
    push("out_embed",
         draw(102, {{"vocab", config.vocab_size}, {"d_x", config.d_model}}, embed_std));

  const AttentionDims dims = config.attention_dims();
  for (int64_t i = 0; i < config.layers; ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    const Rng layer_rng = root.child(200 + uint64_t(i));
    switch (config.variant) {
      case CostVariant::MultiHead: {
        MultiHeadParams p = init_multi_head_params(dims, layer_rng);
        push(prefix + "p_q", std::move(p.p_q));
        push(prefix + "p_k", std::move(p.p_k));
        push(prefix + "p_v", std::move(p.p_v));
        push(prefix + "p_o", std::move(p.p_o));
        break;
      }
      case CostVariant::TalkingHeads:
      case CostVariant::LogitsOnly:
      case CostVariant::WeightsOnly: {
        TalkingHeadsParams p = init_talking_heads_params(dims, layer_rng, config.th_noise_std);
        push(prefix + "p_q", std::move(p.p_q));
        push(prefix + "p_k", std::move(p.p_k));
        push(prefix + "p_v", std::move(p.p_v));
        push(prefix + "p_o", std::move(p.p_o));
        if (config.variant != CostVariant::WeightsOnly) push(prefix + "p_l", std::move(p.p_l));
        if (config.variant != CostVariant::LogitsOnly) push(prefix + "p_w", std::move(p.p_w));
        break;
      }
      case CostVariant::Dynamic: {
        DynamicProjectionParams p =
            init_dynamic_params(dims, layer_rng, config.generators, config.th_noise_std);
        push(prefix + "p_q", std::move(p.th.p_q));
        push(prefix + "p_k", std::move(p.th.p_k));
        push(prefix + "p_v", std::move(p.th.p_v));
        push(prefix + "p_o", std::move(p.th.p_o));
        push(prefix + "p_l", std::move(p.th.p_l));
        push(prefix + "p_w", std::move(p.th.p_w));
        if (p.enabled.xl) push(prefix + "p_xl", std::move(p.p_xl));
        if (p.enabled.ml) push(prefix + "p_ml", std::move(p.p_ml));
        if (p.enabled.xw) push(prefix + "p_xw", std::move(p.p_xw));
        if (p.enabled.mw) push(prefix + "p_mw", std::move(p.p_mw));
        break;
      }
      case CostVariant::Gbma: {
        GbmaParams p = init_gbma_params(dims, layer_rng);
        push(prefix + "p", std::move(p.p));
        push(prefix + "q", std::move(p.q));
        break;
      }
    }
    push(prefix + "ln1.gain", ones({{"d_x", config.d_model}}));
    push(prefix + "ln1.bias", Tensor({{"d_x", config.d_model}}));
    push(prefix + "ln2.gain", ones({{"d_x", config.d_model}}));
    push(prefix + "ln2.bias", Tensor({{"d_x", config.d_model}}));
    push(prefix + "ffn.w1",
         draw(300 + uint64_t(i), {{"d_x", config.d_model}, {"d_ff", config.d_ff}},
              1.0 / std::sqrt(double(config.d_model))));
    push(prefix + "ffn.w2",
         draw(400 + uint64_t(i), {{"d_ff", config.d_ff}, {"d_x", config.d_model}},
              1.0 / std::sqrt(double(config.d_ff))));
  }
  push("ln_f.gain", ones({{"d_x", config.d_model}}));
  push("ln_f.bias", Tensor({{"d_x", config.d_model}}));
  return model;
}

TokenBatch generate_batch(const CorpusSpec& spec, int64_t batch, Rng& rng) {
  spec.validate();
  require(batch >= 1, "batch size must be positive");
  const int64_t content = spec.vocab_size - kFirstContentToken;
  auto content_token = [&]() {
    return kFirstContentToken + int64_t(rng.below(uint64_t(content)));
  };

  TokenBatch out(batch, std::vector<int64_t>(spec.seq_len, kPadToken));
  switch (spec.kind) {
    case CorpusKind::SyntheticCopy: {
      const int64_t half = spec.seq_len / 2;
      for (auto& row : out) {
        for (int64_t j = 0; j < half; ++j) row[j] = content_token();
        for (int64_t j = half; j < 2 * half; ++j) row[j] = row[j - half];
        if (spec.seq_len % 2 != 0) row[spec.seq_len - 1] = content_token();
      }
      break;
    }
    case CorpusKind::SyntheticRepeat: {
      for (auto& row : out) {
        for (auto& tok : row) tok = content_token();
        const int64_t src = int64_t(rng.below(uint64_t(spec.seq_len - 1)));
        const int64_t dst = int64_t(rng.below(uint64_t(spec.seq_len - 1)));
        row[dst] = row[src];
        row[dst + 1] = row[src + 1];
      }
      break;
    }
    case CorpusKind::TextFile: {
      std::ifstream in(spec.path, std::ios::binary);
      if (!in) throw std::runtime_error("cannot read corpus file: " + spec.path);
      std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
      if (static_cast<int64_t>(bytes.size()) < spec.seq_len)
        throw std::runtime_error("corpus file shorter than seq_len");
      for (auto& row : out) {
        const int64_t span = int64_t(bytes.size()) - spec.seq_len;
        const int64_t off = span == 0 ? 0 : int64_t(rng.below(uint64_t(span + 1)));
        for (int64_t j = 0; j < spec.seq_len; ++j) {
          const int64_t id = kFirstContentToken + bytes[off + j];
          if (id >= spec.vocab_size) throw std::runtime_error("vocab overflow: byte id exceeds vocab_size");
          row[j] = id;
        }
      }
      break;
    }
  }
  return out;
}

MaskedBatch mask_tokens(const TokenBatch& batch, const MaskPolicy& policy, Rng& rng) {
  require(policy.p >= 0.0 && policy.p <= 1.0, "mask rate must lie in [0, 1]");
  MaskedBatch out;
  out.tokens = batch;
  const int64_t rows = int64_t(batch.size());
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t s = int64_t(batch[r].size());
    if (policy.kind == MaskKind::Token) {
      for (int64_t j = 0; j < s; ++j) {
        if (rng.uniform() < policy.p) {
          out.positions.push_back(r * s + j);
          out.targets.push_back(batch[r][j]);
          out.tokens[r][j] = kMaskToken;
        }
      }
    } else {
      require(policy.mean_len >= 1.0, "span mean length must be at least 1");
      const double q = 1.0 / policy.mean_len;       // geometric success rate
      const double start_p = policy.p / policy.mean_len;
      int64_t j = 0;
      while (j < s) {
        if (rng.uniform() < start_p) {
          int64_t len = 1;
          while (rng.uniform() > q) ++len;
          const int64_t end = std::min(j + len, s);
          for (; j < end; ++j) {
            out.positions.push_back(r * s + j);
            out.targets.push_back(batch[r][j]);
            out.tokens[r][j] = kMaskToken;
          }
        } else {
          ++j;
        }
      }
    }
  }
  return out;
}

ForwardResult forward_loss(const Model& model, const MaskedBatch& batch) {
  const ModelConfig& cfg = model.config;
  const int64_t b = int64_t(batch.tokens.size());
  require(b >= 1, "empty batch");
  const int64_t s = cfg.seq_len;
  for (const auto& row : batch.tokens)
    require(int64_t(row.size()) == s, "batch row length does not match seq_len");
  if (batch.positions.empty()) throw std::runtime_error("degenerate batch: no masked positions");

  ForwardResult res;
  Tape& tape = res.tape;
  auto leaf = [&](const std::string& name) {
    const Tensor* t = model.find(name);
    require(t != nullptr, "model parameter missing: " + name);
    NodeId id = tape.leaf(*t);
    res.leaves[name] = id;
    return id;
  };

  NodeId embed = leaf("embed");
  NodeId pos = leaf("pos");
  NodeId out_table = cfg.tie_embeddings ? embed : leaf("out_embed");

  std::vector<int64_t> flat;
  flat.reserve(b * s);
  for (const auto& row : batch.tokens)
    for (int64_t tok : row) flat.push_back(tok);

  NodeId x = tape.gather_rows(embed, flat, {{"b", b}, {"n", s}});
  NodeId ones_b = tape.leaf(ones({{"b", b}}));
  NodeId pos_b = tape.einsum({ones_b, pos}, {"b", "n", "d_x"});
  x = tape.add(x, pos_b);

  for (int64_t i = 0; i < cfg.layers; ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    NodeId a_in = tape.layer_norm(x, "d_x", leaf(prefix + "ln1.gain"), leaf(prefix + "ln1.bias"));
    NodeId m_in = tape.rename(a_in, {"b", "m", "d_m"});
    NodeId y;
    switch (cfg.variant) {
      case CostVariant::MultiHead: {
        MhParamNodes p{leaf(prefix + "p_q"), leaf(prefix + "p_k"), leaf(prefix + "p_v"),
                       leaf(prefix + "p_o")};
        y = multi_head_attention_tape(tape, a_in, m_in, p, {"b"});
        break;
      }
      case CostVariant::TalkingHeads:
      case CostVariant::LogitsOnly:
      case CostVariant::WeightsOnly: {
        const bool logits_proj = cfg.variant != CostVariant::WeightsOnly;
        const bool weights_proj = cfg.variant != CostVariant::LogitsOnly;
        // Hybrids store only the present projection; stand in an identity
        // leaf for the absent one (the builder skips it anyway).
        NodeId p_l = logits_proj
                         ? leaf(prefix + "p_l")
                         : tape.leaf(identity_matrix({"h_k", cfg.h_k}, {"h", cfg.h}));
        NodeId p_w = weights_proj
                         ? leaf(prefix + "p_w")
                         : tape.leaf(identity_matrix({"h", cfg.h}, {"h_v", cfg.h_v}));
        ThParamNodes p{leaf(prefix + "p_q"), leaf(prefix + "p_k"), leaf(prefix + "p_v"),
                       leaf(prefix + "p_o"), p_l, p_w};
        y = talking_heads_attention_tape(tape, a_in, m_in, p, {"b"}, nullptr, nullptr,
                                         logits_proj, weights_proj);
        break;
      }
      case CostVariant::Dynamic: {
        DynParamNodes p;
        p.th = ThParamNodes{leaf(prefix + "p_q"), leaf(prefix + "p_k"), leaf(prefix + "p_v"),
                            leaf(prefix + "p_o"), leaf(prefix + "p_l"), leaf(prefix + "p_w")};
        p.enabled = cfg.generators;
        const AttentionDims d = cfg.attention_dims();
        p.p_xl = p.enabled.xl ? leaf(prefix + "p_xl")
                              : tape.leaf(Tensor({{"d_x", d.d_x}, {"h_k", d.h_k}, {"h", d.h}}));
        p.p_ml = p.enabled.ml ? leaf(prefix + "p_ml")
                              : tape.leaf(Tensor({{"d_m", d.d_m}, {"h_k", d.h_k}, {"h", d.h}}));
        p.p_xw = p.enabled.xw ? leaf(prefix + "p_xw")
                              : tape.leaf(Tensor({{"d_x", d.d_x}, {"h", d.h}, {"h_v", d.h_v}}));
        p.p_mw = p.enabled.mw ? leaf(prefix + "p_mw")
                              : tape.leaf(Tensor({{"d_m", d.d_m}, {"h", d.h}, {"h_v", d.h_v}}));
        y = dynamic_projection_attention_tape(tape, a_in, m_in, p, {"b"});
        break;
      }
      case CostVariant::Gbma: {
        y = gbma_tape(tape, a_in, m_in, leaf(prefix + "p"), leaf(prefix + "q"), {"b"});
        break;
      }
      default:
        throw std::invalid_argument("unknown attention variant");
    }
    y = tape.rename(y, {"b", "n", "d_x"});
    x = tape.add(x, y);

    NodeId f_in = tape.layer_norm(x, "d_x", leaf(prefix + "ln2.gain"), leaf(prefix + "ln2.bias"));
    NodeId f1 = tape.einsum({f_in, leaf(prefix + "ffn.w1")}, {"b", "n", "d_ff"});
    NodeId f2 = tape.einsum({tape.relu(f1), leaf(prefix + "ffn.w2")}, {"b", "n", "d_x"});
    x = tape.add(x, f2);
  }
  x = tape.layer_norm(x, "d_x", leaf("ln_f.gain"), leaf("ln_f.bias"));

  NodeId flat_x = tape.reshape(x, {{"rows", b * s}, {"d_x", cfg.d_model}});
  NodeId sel = tape.gather_rows(flat_x, batch.positions, {{"k", int64_t(batch.positions.size())}});
  res.logits = tape.einsum({sel, out_table}, {"k", "vocab"});
  res.loss = tape.cross_entropy_mean(res.logits, batch.targets);

  const Tensor& logits = tape.value(res.logits);
  const int64_t v = cfg.vocab_size;
  int64_t hits = 0;
  for (size_t r = 0; r < batch.targets.size(); ++r) {
    const double* row = logits.data().data() + int64_t(r) * v;
    int64_t best = 0;
    for (int64_t i = 1; i < v; ++i)
      if (row[i] > row[best]) best = i;
    if (best == batch.targets[r]) ++hits;
  }
  res.masked_accuracy = double(hits) / double(batch.targets.size());
  return res;
}

namespace {

MaskedBatch masked_batch_or_throw(const TokenBatch& batch, const MaskPolicy& policy, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    MaskedBatch m = mask_tokens(batch, policy, rng);
    if (!m.positions.empty()) return m;
  }
  throw std::runtime_error("mask policy produced no masked positions");
}

}  // namespace

TrainLog train(Model& model, const CorpusSpec& corpus, const TrainConfig& config) {
  require(config.steps >= 0, "train steps must be nonnegative");
  require(config.batch_size >= 1, "batch size must be positive");
  require(corpus.seq_len == model.config.seq_len && corpus.vocab_size == model.config.vocab_size,
          "corpus and model disagree on seq_len/vocab_size");

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<std::vector<double>> adam_m, adam_v;
  for (const auto& [name, t] : model.params) {
    adam_m.emplace_back(t.numel(), 0.0);
    adam_v.emplace_back(t.numel(), 0.0);
  }

  MaskedBatch fixed;
  if (!config.resample) {
    Rng gen(corpus.seed);
    TokenBatch batch = generate_batch(corpus, config.batch_size, gen);
    Rng mask_rng = Rng(config.seed).child(1);
    fixed = masked_batch_or_throw(batch, config.mask, mask_rng);
  }

  TrainLog log;
  for (int64_t step = 1; step <= config.steps; ++step) {
    MaskedBatch masked;
    if (config.resample) {
      Rng gen = Rng(corpus.seed).child(uint64_t(step));
      TokenBatch batch = generate_batch(corpus, config.batch_size, gen);
      Rng mask_rng = Rng(config.seed).child(1000 + uint64_t(step));
      masked = masked_batch_or_throw(batch, config.mask, mask_rng);
    } else {
      masked = fixed;
    }

    ForwardResult fwd = forward_loss(model, masked);
    const double loss = fwd.tape.value(fwd.loss).data()[0];
    if (!std::isfinite(loss)) {
      std::string culprit = "loss";
      for (const auto& [name, t] : model.params)
        if (!t.all_finite()) {
          culprit = name;
          break;
        }
      throw std::runtime_error("training diverged at step " + std::to_string(step) +
                               "; first non-finite tensor: " + culprit);
    }
    log.rows.push_back({step, loss, fwd.masked_accuracy});

    auto grads = fwd.tape.backward(fwd.loss);
    for (size_t i = 0; i < model.params.size(); ++i) {
      auto& [name, param] = model.params[i];
      auto lit = fwd.leaves.find(name);
      if (lit == fwd.leaves.end()) continue;
      auto git = grads.find(lit->second);
      if (git == grads.end()) continue;
      const std::vector<double>& g = git->second.data();
      std::vector<double>& m = adam_m[i];
      std::vector<double>& v = adam_v[i];
      const double c1 = 1.0 - std::pow(b1, double(step));
      const double c2 = 1.0 - std::pow(b2, double(step));
      for (int64_t j = 0; j < param.numel(); ++j) {
        m[j] = b1 * m[j] + (1.0 - b1) * g[j];
        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
        const double mhat = m[j] / c1;
        const double vhat = v[j] / c2;
        param.data()[j] -= config.learning_rate * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  log.final_log_perplexity = eval_log_perplexity(model, corpus, config.mask, 2, config.batch_size,
                                                 config.seed ^ 0x9e3779b97f4a7c15ULL);
  return log;
}

double eval_log_perplexity(const Model& model, const CorpusSpec& corpus, const MaskPolicy& policy,
                           int64_t batches, int64_t batch_size, uint64_t seed) {
  require(batches >= 1, "eval needs at least one batch");
  double total = 0.0;
  int64_t count = 0;
  for (int64_t i = 0; i < batches; ++i) {
    Rng gen = Rng(seed).child(uint64_t(i) + 1);
    TokenBatch batch = generate_batch(corpus, batch_size, gen);
    Rng mask_rng = Rng(seed).child(5000 + uint64_t(i));
    MaskedBatch masked = masked_batch_or_throw(batch, policy, mask_rng);
    ForwardResult fwd = forward_loss(model, masked);
    const int64_t k = int64_t(masked.targets.size());
    total += fwd.tape.value(fwd.loss).data()[0] * double(k);
    count += k;
  }
  return total / double(count);
}

void write_train_log(const TrainLog& log, std::ostream& out) {
  out << "step,loss,masked_accuracy\n";
  char buf[64];
  for (const auto& row : log.rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(row.step),
                  row.loss, row.masked_accuracy);
    out << buf;
  }
}

Checkpoint to_checkpoint(const Model& model) {
  Checkpoint ckpt;
  ckpt.model = model_config_to_json(model.config);
  ckpt.tensors = model.params;
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model model;
  model.config = model_config_from_json(ckpt.model);
  model.params = ckpt.tensors;
  return model;
}

// ---- JSON config plumbing ------------------------------------------------

namespace {

void reject_unknown_keys(const ordered_json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

std::string corpus_kind_name(CorpusKind k) {
  switch (k) {
    case CorpusKind::SyntheticCopy: return "synthetic-copy";
    case CorpusKind::SyntheticRepeat: return "synthetic-repeat";
    case CorpusKind::TextFile: return "text-file";
  }
  throw std::invalid_argument("unknown corpus kind");
}

CorpusKind parse_corpus_kind(const std::string& name) {
  if (name == "synthetic-copy") return CorpusKind::SyntheticCopy;
  if (name == "synthetic-repeat") return CorpusKind::SyntheticRepeat;
  if (name == "text-file") return CorpusKind::TextFile;
  throw std::invalid_argument("unknown corpus kind '" + name + "'");
}

}  // namespace

CostVariant parse_variant(const std::string& name) {
  for (CostVariant v : {CostVariant::MultiHead, CostVariant::TalkingHeads, CostVariant::LogitsOnly,
                        CostVariant::WeightsOnly, CostVariant::Dynamic, CostVariant::Gbma})
    if (variant_name(v) == name) return v;
  throw std::invalid_argument("unknown attention variant '" + name + "'");
}

ordered_json model_config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["layers"] = c.layers;
  j["d_model"] = c.d_model;
  j["d_ff"] = c.d_ff;
  j["variant"] = variant_name(c.variant);
  j["d_k"] = c.d_k;
  j["d_v"] = c.d_v;
  j["h_k"] = c.h_k;
  j["h"] = c.h;
  j["h_v"] = c.h_v;
  ordered_json gens = ordered_json::array();
  if (c.generators.xl) gens.push_back("xl");
  if (c.generators.ml) gens.push_back("ml");
  if (c.generators.xw) gens.push_back("xw");
  if (c.generators.mw) gens.push_back("mw");
  j["generators"] = gens;
  j["tie_embeddings"] = c.tie_embeddings;
  j["vocab_size"] = c.vocab_size;
  j["seq_len"] = c.seq_len;
  j["th_noise_std"] = c.th_noise_std;
  return j;
}

ModelConfig model_config_from_json(const ordered_json& j) {
  reject_unknown_keys(j,
                      {"layers", "d_model", "d_ff", "variant", "d_k", "d_v", "h_k", "h", "h_v",
                       "generators", "tie_embeddings", "vocab_size", "seq_len", "th_noise_std"},
                      "model config");
  ModelConfig c;
  if (j.contains("layers")) c.layers = j["layers"].get<int64_t>();
  if (j.contains("d_model")) c.d_model = j["d_model"].get<int64_t>();
  if (j.contains("d_ff")) c.d_ff = j["d_ff"].get<int64_t>();
  if (j.contains("variant")) c.variant = parse_variant(j["variant"].get<std::string>());
  if (j.contains("d_k")) c.d_k = j["d_k"].get<int64_t>();
  if (j.contains("d_v")) c.d_v = j["d_v"].get<int64_t>();
  if (j.contains("h_k")) c.h_k = j["h_k"].get<int64_t>();
  if (j.contains("h")) c.h = j["h"].get<int64_t>();
  if (j.contains("h_v")) c.h_v = j["h_v"].get<int64_t>();
  if (j.contains("generators")) {
    c.generators = GeneratorSet{};
    for (const auto& g : j["generators"]) {
      const std::string name = g.get<std::string>();
      if (name == "xl")
        c.generators.xl = true;
      else if (name == "ml")
        c.generators.ml = true;
      else if (name == "xw")
        c.generators.xw = true;
      else if (name == "mw")
        c.generators.mw = true;
      else
        throw std::invalid_argument("unknown generator '" + name + "'");
    }
  }
  if (j.contains("tie_embeddings")) c.tie_embeddings = j["tie_embeddings"].get<bool>();
  if (j.contains("vocab_size")) c.vocab_size = j["vocab_size"].get<int64_t>();
  if (j.contains("seq_len")) c.seq_len = j["seq_len"].get<int64_t>();
  if (j.contains("th_noise_std")) c.th_noise_std = j["th_noise_std"].get<double>();
  c.validate();
  return c;
}

ordered_json train_run_to_json(const TrainRun& run) {
  ordered_json j;
  j["model"] = model_config_to_json(run.model);
  ordered_json corpus;
  corpus["kind"] = corpus_kind_name(run.corpus.kind);
  corpus["vocab_size"] = run.corpus.vocab_size;
  corpus["seq_len"] = run.corpus.seq_len;
  corpus["seed"] = run.corpus.seed;
  if (!run.corpus.path.empty()) corpus["path"] = run.corpus.path;
  j["corpus"] = corpus;
  ordered_json train;
  train["steps"] = run.train.steps;
  train["batch_size"] = run.train.batch_size;
  train["learning_rate"] = run.train.learning_rate;
  train["seed"] = run.train.seed;
  train["resample"] = run.train.resample;
  ordered_json mask;
  mask["policy"] = run.train.mask.kind == MaskKind::Span ? "span" : "token";
  mask["p"] = run.train.mask.p;
  mask["mean_len"] = run.train.mask.mean_len;
  train["mask"] = mask;
  j["train"] = train;
  return j;
}

TrainRun train_run_from_json(const ordered_json& j) {
  reject_unknown_keys(j, {"model", "corpus", "train"}, "run config");
  TrainRun run;
  if (j.contains("model")) run.model = model_config_from_json(j["model"]);
  if (j.contains("corpus")) {
    const ordered_json& c = j["corpus"];
    reject_unknown_keys(c, {"kind", "vocab_size", "seq_len", "seed", "path"}, "corpus config");
    if (c.contains("kind")) run.corpus.kind = parse_corpus_kind(c["kind"].get<std::string>());
    if (c.contains("vocab_size")) run.corpus.vocab_size = c["vocab_size"].get<int64_t>();
    if (c.contains("seq_len")) run.corpus.seq_len = c["seq_len"].get<int64_t>();
    if (c.contains("seed")) run.corpus.seed = c["seed"].get<uint64_t>();
    if (c.contains("path")) run.corpus.path = c["path"].get<std::string>();
  }
  if (j.contains("train")) {
    const ordered_json& t = j["train"];
    reject_unknown_keys(t, {"steps", "batch_size", "learning_rate", "seed", "resample", "mask"},
                        "train config");
    if (t.contains("steps")) run.train.steps = t["steps"].get<int64_t>();
    if (t.contains("batch_size")) run.train.batch_size = t["batch_size"].get<int64_t>();
    if (t.contains("learning_rate")) run.train.learning_rate = t["learning_rate"].get<double>();
    if (t.contains("seed")) run.train.seed = t["seed"].get<uint64_t>();
    if (t.contains("resample")) run.train.resample = t["resample"].get<bool>();
    if (t.contains("mask")) {
      const ordered_json& m = t["mask"];
      reject_unknown_keys(m, {"policy", "p", "mean_len"}, "mask config");
      if (m.contains("policy")) {
        const std::string p = m["policy"].get<std::string>();
        if (p == "span")
          run.train.mask.kind = MaskKind::Span;
        else if (p == "token")
          run.train.mask.kind = MaskKind::Token;
        else
          throw std::invalid_argument("unknown mask policy '" + p + "'");
      }
      if (m.contains("p")) run.train.mask.p = m["p"].get<double>();
      if (m.contains("mean_len")) run.train.mask.mean_len = m["mean_len"].get<double>();
    }
  }
  // Keep corpus and model shape fields coherent by construction.
  run.corpus.validate();
  run.model.validate();
  return run;
}

}  // namespace attnkit
