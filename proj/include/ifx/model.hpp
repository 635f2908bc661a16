#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ifx/tokenizer.hpp"

namespace ifx {

struct ModelConfig {
  std::int64_t n_layers = 2;
  std::int64_t d_model = 128;
  std::int64_t n_heads = 4;
  std::int64_t d_ffn = 512;
  std::int64_t max_len = 64;
  std::int64_t vocab_size = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  std::int64_t head_dim() const { return d_model / n_heads; }
  bool operator==(const ModelConfig&) const = default;
};

enum class TensorKind { token_embedding, position_embedding, weight, bias, norm_gain, norm_bias };

struct TensorInfo {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  TensorKind kind = TensorKind::weight;
  std::size_t size() const { return rows * cols; }
};

// Parameter tensors in declaration order (also the checkpoint order):
//   tok_emb (V x d), pos_emb (T x d),
//   per layer: ln1.g, ln1.b, wq, bq, wk, bk, wv, bv, wo, bo, ln2.g, ln2.b,
//              w1 (d x f), b1, w2 (f x d), b2,
//   lnf.g, lnf.b, head_bias (V).
// The output head is tied to tok_emb.
class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelConfig& config);

  struct Layer {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& operator[](std::size_t i) const { return tensors_[i]; }
  std::size_t total() const { return total_; }

  std::size_t tok_emb = 0, pos_emb = 0, lnf_g = 0, lnf_b = 0, head_bias = 0;
  std::vector<Layer> layers;

 private:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, TensorKind kind);
  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);  // all parameters zero

  const ModelConfig& config() const { return config_; }
  const ParameterLayout& layout() const { return layout_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> tensor(std::size_t index);
  std::span<const double> tensor(std::size_t index) const;
  const double* data(std::size_t index) const { return params_.data() + layout_[index].offset; }
  double* data(std::size_t index) { return params_.data() + layout_[index].offset; }

  bool all_finite() const;

 private:
  ModelConfig config_;
  ParameterLayout layout_;
  std::vector<double> params_;
};

// Normal(0, 0.02) weights and embeddings, zero biases, unit norm gains.
Model init(const ModelConfig& config);

// Padded token batch. mask[i] = true for real tokens; labels use -1 for
// positions that are not predicted.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
  std::vector<TokenId> labels;

  // Right-pads with [pad]; labels empty means "no labels".
  static Batch pack(std::span<const std::vector<TokenId>> sequences,
                    std::span<const std::vector<TokenId>> labels = {});
  std::size_t labeled_count() const;
};

// Logits for a subset of flattened (b * seq_len + t) positions.
struct Logits {
  std::vector<std::size_t> rows;
  std::size_t vocab = 0;
  std::vector<double> values;  // rows.size() x vocab

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * vocab, vocab};
  }
};

struct LayerCache {
  std::vector<double> x_in, ln1_xhat, ln1_rstd, h1, q, k, v, probs, ctx, x_mid, ln2_xhat, ln2_rstd,
      h2, u, g;
};

struct ForwardCache {
  std::size_t batch_size = 0, seq_len = 0;
  std::vector<LayerCache> layers;
  std::vector<double> x_final, lnf_xhat, lnf_rstd;
  std::vector<double> hidden;  // final layer-normed states, (B*T) x d
};

// Which positions get output-head logits.
enum class HeadRows { all, labeled, none };

struct ForwardResult {
  ForwardCache cache;
  Logits logits;
};

ForwardResult forward(const Model& model, const Batch& batch, HeadRows rows = HeadRows::all);

struct LossResult {
  double loss = 0.0;
  Logits grad;  // d(loss)/d(logits), same rows as the input logits
};

// Mean cross-entropy over the logits rows whose label is not -1.
LossResult mlm_loss(const Logits& logits, std::span<const TokenId> labels);

// Gradients in the parameter layout of `model`.
std::vector<double> backward(const Model& model, const Batch& batch, const ForwardCache& cache,
                             const Logits& dlogits);

// Mean of final hidden states over real tokens; B x d row-major.
std::vector<double> mean_pool(const Model& model, const Batch& batch);

// Binary checkpoint: "ifxckpt1", config as int64 fields, length-prefixed
// float64 tensors in layout order, trailing FNV-1a over everything before it.
std::string serialize(const Model& model);
Model parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace ifx
