#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ifx/data_mix.hpp"
#include "ifx/model.hpp"

namespace ifx {

struct TrainConfig {
  std::int64_t total_steps = 10000;
  std::int64_t warmup_steps = 2500;
  double peak_lr = 1e-5;
  std::int64_t batch_size = 32;
  double mask_ratio = 0.15;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::optional<double> grad_clip_norm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct MaskedSequence {
  std::vector<TokenId> inputs;
  std::vector<TokenId> labels;  // -1 where not selected
};

// BERT masking: each non-special position is selected with probability
// `mask_ratio`; selected positions become [mask] (80%), a random non-special
// id (10%) or stay unchanged (10%). At least one position is always selected.
MaskedSequence apply_masking(std::span<const TokenId> ids, double mask_ratio, Rng& rng,
                             std::size_t vocab_size);

// Linear warmup to peak_lr, then cosine decay reaching zero at total_steps.
double lr_at(std::int64_t step, const TrainConfig& config);

// Masked evaluation set. Mask positions depend only on each sentence's text
// and the mask seed, so every model is scored on the same positions.
struct EvalSet {
  std::string code;
  std::vector<std::vector<TokenId>> inputs;
  std::vector<std::vector<TokenId>> labels;

  std::size_t masked_count() const;
  // Masked positions of sentence i.
  std::vector<std::size_t> positions(std::size_t i) const;
};

EvalSet prepare_eval(const Corpus& corpus, const Vocab& vocab, std::size_t max_len,
                     std::uint64_t mask_seed);

// Mean cross-entropy over every masked token of the set.
double evaluate(const Model& model, const EvalSet& eval);
double evaluate(const Model& model, const Corpus& eval_corpus, const Vocab& vocab,
                std::uint64_t mask_seed);

struct TrainReport {
  std::vector<double> loss_history;
  std::map<std::string, double> initial_losses;
  std::map<std::string, double> final_losses;
  double wall_seconds = 0.0;
  std::int64_t steps_completed = 0;
};

std::string to_json(const TrainReport& report);

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainHooks {
  // Held-out sets scored before the first and after the last step.
  std::vector<const EvalSet*> eval_sets;
  // Called with each step's loss before the finiteness check; may rewrite it.
  std::function<void(std::int64_t step, double& loss)> on_loss;
};

struct TrainOutcome {
  Model model;
  TrainReport report;
};

// Exactly total_steps AdamW updates on batches drawn from the mix. Fully
// determined by the model's parameters, the mix and config.seed.
TrainOutcome train(Model model, const DataMix& mix, const TrainConfig& config,
                   const TrainHooks& hooks = {});

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};
// One AdamW update (decoupled decay, bias correction). With a tensor layout,
// biases and layer-norm parameters are not decayed; without one, every
// parameter is.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                double lr, const TrainConfig& config, std::span<const TensorInfo> tensors = {});

}  // namespace ifx
