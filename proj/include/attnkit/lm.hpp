#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "attnkit/attention.hpp"
#include "attnkit/autograd.hpp"
#include "attnkit/checkpoint.hpp"
#include "attnkit/cost.hpp"

namespace attnkit {

// Reserved token ids; content tokens start at kFirstContentToken.
constexpr int64_t kPadToken = 0;
constexpr int64_t kMaskToken = 1;
constexpr int64_t kBosToken = 2;
constexpr int64_t kFirstContentToken = 3;

enum class CorpusKind { SyntheticCopy, SyntheticRepeat, TextFile };

struct CorpusSpec {
  CorpusKind kind = CorpusKind::SyntheticCopy;
  int64_t vocab_size = 32;
  int64_t seq_len = 16;
  uint64_t seed = 1;
  std::string path;  // text-file only

  void validate() const;
};

enum class MaskKind { Token, Span };

struct MaskPolicy {
  MaskKind kind = MaskKind::Span;
  double p = 0.15;        // token policy: per-position rate; span: target masked fraction
  double mean_len = 3.0;  // span policy only: geometric mean span length
};

struct ModelConfig {
  int64_t layers = 2;
  int64_t d_model = 32;
  int64_t d_ff = 64;
  CostVariant variant = CostVariant::TalkingHeads;
  int64_t d_k = 4, d_v = 4;
  int64_t h_k = 4, h = 4, h_v = 4;
  GeneratorSet generators;  // dynamic variant only
  bool tie_embeddings = true;
  int64_t vocab_size = 32;
  int64_t seq_len = 16;
  double th_noise_std = 0.02;

  AttentionDims attention_dims() const;
  void validate() const;
};

// Flat named-parameter model; the name list and order are fixed by
// init_model so checkpoints and optimizer state line up.
struct Model {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor>> params;

  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
};

Model init_model(const ModelConfig& config, uint64_t seed);

using TokenBatch = std::vector<std::vector<int64_t>>;

TokenBatch generate_batch(const CorpusSpec& spec, int64_t batch, Rng& rng);

struct MaskedBatch {
  TokenBatch tokens;               // with mask substitutions applied
  std::vector<int64_t> positions;  // row-major flat indices of masked slots
  std::vector<int64_t> targets;    // original token ids at those slots
};

MaskedBatch mask_tokens(const TokenBatch& batch, const MaskPolicy& policy, Rng& rng);

struct ForwardResult {
  Tape tape;
  NodeId loss = -1;
  NodeId logits = -1;  // [masked positions, vocab]
  std::unordered_map<std::string, NodeId> leaves;
  double masked_accuracy = 0.0;
};

// Builds the full encoder stack on a fresh tape and returns the mean
// cross-entropy over the masked positions. Throws on an empty target set.
ForwardResult forward_loss(const Model& model, const MaskedBatch& batch);

struct TrainConfig {
  int64_t steps = 100;
  int64_t batch_size = 4;
  double learning_rate = 1e-3;
  MaskPolicy mask;
  uint64_t seed = 1;
  // false: one fixed masked batch reused every step (the overfit setting);
  // true: fresh batch and mask each step.
  bool resample = false;
};

struct TrainLog {
  struct Row {
    int64_t step;
    double loss;
    double masked_accuracy;
  };
  std::vector<Row> rows;
  double final_log_perplexity = 0.0;
};

void write_train_log(const TrainLog& log, std::ostream& out);

// Adam (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected) on all parameters.
// Aborts with a diagnostic naming the first non-finite tensor on divergence.
TrainLog train(Model& model, const CorpusSpec& corpus, const TrainConfig& config);

double eval_log_perplexity(const Model& model, const CorpusSpec& corpus, const MaskPolicy& policy,
                           int64_t batches, int64_t batch_size, uint64_t seed);

Checkpoint to_checkpoint(const Model& model);
Model model_from_checkpoint(const Checkpoint& ckpt);

// Config (de)serialization for the CLI and checkpoints. Parsers reject
// unknown keys so typos fail loudly.
nlohmann::ordered_json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);

struct TrainRun {
  ModelConfig model;
  CorpusSpec corpus;
  TrainConfig train;
};

nlohmann::ordered_json train_run_to_json(const TrainRun& run);
TrainRun train_run_from_json(const nlohmann::ordered_json& j);

CostVariant parse_variant(const std::string& name);

}  // namespace attnkit
