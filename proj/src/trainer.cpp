#include "ifx/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "json.hpp"

#include "ifx/kernels.hpp"

namespace ifx {

void TrainConfig::validate() const {
  if (total_steps <= 0) throw Error("train config: total_steps must be positive");
  if (warmup_steps < 0 || warmup_steps > total_steps) {
    throw Error("train config: warmup_steps must lie in [0, total_steps]");
  }
  if (!(peak_lr > 0.0)) throw Error("train config: peak_lr must be positive");
  if (batch_size <= 0) throw Error("train config: batch_size must be positive");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw Error("train config: mask_ratio must be in (0,1)");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) {
    throw Error("train config: grad_clip_norm must be positive");
  }
}

MaskedSequence apply_masking(std::span<const TokenId> ids, double mask_ratio, Rng& rng,
                             std::size_t vocab_size) {
  if (vocab_size <= static_cast<std::size_t>(kNumSpecial)) {
    throw Error("apply_masking: vocabulary has no regular tokens");
  }
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= kNumSpecial) maskable.push_back(i);
  }
  if (maskable.empty()) throw Error("apply_masking: sequence has no maskable tokens");
  MaskedSequence out{{ids.begin(), ids.end()}, std::vector<TokenId>(ids.size(), -1)};
  auto corrupt = [&](std::size_t pos) {
    out.labels[pos] = ids[pos];
    const double u = rng.uniform();
    if (u < 0.8) {
      out.inputs[pos] = kMaskId;
    } else if (u < 0.9) {
      out.inputs[pos] = static_cast<TokenId>(kNumSpecial + rng.below(vocab_size - kNumSpecial));
    }
  };
  bool any = false;
  for (std::size_t pos : maskable) {
    if (rng.uniform() < mask_ratio) {
      corrupt(pos);
      any = true;
    }
  }
  if (!any) corrupt(maskable[rng.below(maskable.size())]);
  return out;
}

double lr_at(std::int64_t step, const TrainConfig& config) {
  if (step < 0 || step >= config.total_steps) {
    throw Error("lr_at: step " + std::to_string(step) + " outside [0, " +
                std::to_string(config.total_steps) + ")");
  }
  if (step < config.warmup_steps) {
    return config.peak_lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  }
  const double progress = static_cast<double>(step - config.warmup_steps) /
                          static_cast<double>(config.total_steps - config.warmup_steps);
  return config.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::size_t EvalSet::masked_count() const {
  std::size_t n = 0;
  for (const auto& l : labels) {
    for (TokenId t : l) n += t >= 0 ? 1 : 0;
  }
  return n;
}

std::vector<std::size_t> EvalSet::positions(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < labels[i].size(); ++t) {
    if (labels[i][t] >= 0) out.push_back(t);
  }
  return out;
}

EvalSet prepare_eval(const Corpus& corpus, const Vocab& vocab, std::size_t max_len,
                     std::uint64_t mask_seed) {
  if (corpus.sentences.empty()) throw Error("evaluation corpus is empty");
  EvalSet out;
  out.code = corpus.code;
  for (const auto& s : corpus.sentences) {
    const auto ids = encode(vocab, s, max_len);
    if (ids.size() <= 2) continue;
    Rng rng(Fnv1a{}.str(s).u64(mask_seed).digest());
    auto masked = apply_masking(ids, 0.15, rng, vocab.size());
    out.inputs.push_back(std::move(masked.inputs));
    out.labels.push_back(std::move(masked.labels));
  }
  if (out.inputs.empty()) throw Error("evaluation corpus " + corpus.code + " has no usable sentences");
  return out;
}

double evaluate(const Model& model, const EvalSet& eval) {
  constexpr std::size_t kChunk = 32;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < eval.inputs.size(); start += kChunk) {
    const std::size_t end = std::min(eval.inputs.size(), start + kChunk);
    const std::span<const std::vector<TokenId>> in(eval.inputs.data() + start, end - start);
    const std::span<const std::vector<TokenId>> lb(eval.labels.data() + start, end - start);
    const Batch batch = Batch::pack(in, lb);
    const auto fwd = forward(model, batch, HeadRows::labeled);
    const auto loss = mlm_loss(fwd.logits, batch.labels);
    const std::size_t n = fwd.logits.rows.size();
    total += loss.loss * static_cast<double>(n);
    count += n;
  }
  return total / static_cast<double>(count);
}

double evaluate(const Model& model, const Corpus& eval_corpus, const Vocab& vocab,
                std::uint64_t mask_seed) {
  return evaluate(model, prepare_eval(eval_corpus, vocab,
                                      static_cast<std::size_t>(model.config().max_len), mask_seed));
}

std::string to_json(const TrainReport& report) {
  nlohmann::ordered_json j;
  j["steps_completed"] = report.steps_completed;
  j["wall_seconds"] = report.wall_seconds;
  j["loss_averaging"] = "mean over masked tokens";
  j["initial_losses"] = report.initial_losses;
  j["final_losses"] = report.final_losses;
  j["loss_history"] = report.loss_history;
  return j.dump(2) + "\n";
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                double lr, const TrainConfig& config, std::span<const TensorInfo> tensors) {
  if (params.size() != grads.size()) throw Error("adamw_step: gradient size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.t;
  const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.t));
  const auto& k = kernels::active();
  auto run = [&](std::size_t offset, std::size_t n, double decay) {
    k.adamw(params.data() + offset, grads.data() + offset, state.m.data() + offset,
            state.v.data() + offset, n, lr, config.adam_beta1, config.adam_beta2, bias1, bias2,
            config.adam_eps, decay);
  };
  if (tensors.empty()) {
    run(0, params.size(), config.weight_decay);
    return;
  }
  for (const auto& t : tensors) {
    const bool decayed = t.kind == TensorKind::weight || t.kind == TensorKind::token_embedding ||
                         t.kind == TensorKind::position_embedding;
    run(t.offset, t.size(), decayed ? config.weight_decay : 0.0);
  }
}

TrainOutcome train(Model model, const DataMix& mix, const TrainConfig& config,
                   const TrainHooks& hooks) {
  config.validate();
  mix.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto vocab_size = static_cast<std::size_t>(model.config().vocab_size);
  for (const auto& lang : mix.languages) {
    for (const auto& s : lang->sequences) {
      if (s.size() > static_cast<std::size_t>(model.config().max_len)) {
        throw Error("training sequence longer than the model's max_len");
      }
      for (TokenId id : s) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
          throw Error("training data uses ids outside the model vocabulary");
        }
      }
    }
  }

  TrainReport report;
  for (const auto* e : hooks.eval_sets) report.initial_losses[e->code] = evaluate(model, *e);

  BatchStream stream(mix, static_cast<std::size_t>(config.batch_size), config.seed);
  Rng mask_rng(derive_seed(config.seed, "masking"));
  AdamState adam;
  const auto& tensors = model.layout().tensors();
  std::vector<std::vector<TokenId>> inputs, labels;
  for (std::int64_t step = 0; step < config.total_steps; ++step) {
    const auto draw = stream.next();
    inputs.clear();
    labels.clear();
    for (const auto* seq : draw.sequences) {
      auto m = apply_masking(*seq, config.mask_ratio, mask_rng, vocab_size);
      inputs.push_back(std::move(m.inputs));
      labels.push_back(std::move(m.labels));
    }
    const Batch batch = Batch::pack(inputs, labels);
    const auto fwd = forward(model, batch, HeadRows::labeled);
    auto loss = mlm_loss(fwd.logits, batch.labels);
    if (hooks.on_loss) hooks.on_loss(step, loss.loss);
    if (!std::isfinite(loss.loss)) {
      throw TrainingError("non-finite training loss at step " + std::to_string(step));
    }
    report.loss_history.push_back(loss.loss);
    auto grads = backward(model, batch, fwd.cache, loss.grad);
    if (config.grad_clip_norm) {
      const double norm = std::sqrt(kernels::sum_squares(grads));
      if (!std::isfinite(norm)) {
        throw TrainingError("non-finite gradient norm at step " + std::to_string(step));
      }
      if (norm > *config.grad_clip_norm) kernels::scale(*config.grad_clip_norm / norm, grads);
    }
    adamw_step(model.params(), grads, adam, lr_at(step, config), config, tensors);
    if (!model.all_finite()) {
      throw TrainingError("non-finite parameters after step " + std::to_string(step));
    }
    ++report.steps_completed;
  }
  for (const auto* e : hooks.eval_sets) report.final_losses[e->code] = evaluate(model, *e);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrainOutcome{std::move(model), std::move(report)};
}

}  // namespace ifx
