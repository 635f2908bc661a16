#include "ifx/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "ifx/kernels.hpp"

namespace ifx {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;
constexpr std::string_view kCheckpointMagic = "ifxckpt1";

// y = x W + b for `rows` rows.
void linear(const double* x, std::size_t rows, std::size_t in, const double* w, const double* b,
            std::size_t out, double* y) {
  kernels::matmul(x, rows, in, w, out, y);
  for (std::size_t r = 0; r < rows; ++r) kernels::active().axpy(1.0, b, y + r * out, out);
}

// Backward of linear: dx = dy W^T (written), dW += x^T dy, db += sum dy.
void linear_backward(const double* x, std::size_t rows, std::size_t in, const double* w,
                     std::size_t out, const double* dy, double* dx, double* dw, double* db) {
  kernels::matmul_transposed(dy, rows, out, w, in, dx);
  kernels::outer_accumulate(x, rows, in, dy, out, dw);
  for (std::size_t r = 0; r < rows; ++r) kernels::active().axpy(1.0, dy + r * out, db, out);
}

void layer_norm(const double* x, std::size_t rows, std::size_t d, const double* gain,
                const double* bias, double* y, double* xhat, double* rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    rstd[r] = rs;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (xr[i] - mean) * rs;
      xhat[r * d + i] = h;
      y[r * d + i] = gain[i] * h + bias[i];
    }
  }
}

// Accumulates into dx.
void layer_norm_backward(const double* dy, std::size_t rows, std::size_t d, const double* gain,
                         const double* xhat, const double* rstd, double* dx, double* dgain,
                         double* dbias) {
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * d;
    const double* hr = xhat + r * d;
    double mean_d = 0.0, mean_dh = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dgain[i] += dyr[i] * hr[i];
      dbias[i] += dyr[i];
      dxhat[i] = dyr[i] * gain[i];
      mean_d += dxhat[i];
      mean_dh += dxhat[i] * hr[i];
    }
    mean_d /= static_cast<double>(d);
    mean_dh /= static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) {
      dx[r * d + i] += rstd[r] * (dxhat[i] - mean_d - hr[i] * mean_dh);
    }
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void check_batch(const Model& model, const Batch& batch) {
  const auto& cfg = model.config();
  if (batch.batch_size == 0 || batch.seq_len == 0) throw Error("forward: empty batch");
  if (batch.seq_len > static_cast<std::size_t>(cfg.max_len)) {
    throw Error("forward: sequence length " + std::to_string(batch.seq_len) + " exceeds max_len " +
                std::to_string(cfg.max_len));
  }
  const std::size_t n = batch.batch_size * batch.seq_len;
  if (batch.ids.size() != n || batch.mask.size() != n ||
      (!batch.labels.empty() && batch.labels.size() != n)) {
    throw Error("forward: batch tensor shapes disagree");
  }
  for (TokenId id : batch.ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw Error("forward: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    bool any = false;
    for (std::size_t t = 0; t < batch.seq_len; ++t) any |= batch.mask[b * batch.seq_len + t] != 0;
    if (!any) throw Error("forward: sequence " + std::to_string(b) + " has no real tokens");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (n_layers <= 0 || d_model <= 0 || n_heads <= 0 || d_ffn <= 0 || vocab_size <= 0) {
    throw Error("model config: sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw Error("model config: d_model (" + std::to_string(d_model) +
                ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
  }
  if (max_len < 4) throw Error("model config: max_len must be >= 4");
  if (vocab_size <= kNumSpecial) throw Error("model config: vocab_size must exceed the specials");
}

ParameterLayout::ParameterLayout(const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto f = static_cast<std::size_t>(c.d_ffn);
  tok_emb = add("tok_emb", static_cast<std::size_t>(c.vocab_size), d, TensorKind::token_embedding);
  pos_emb = add("pos_emb", static_cast<std::size_t>(c.max_len), d, TensorKind::position_embedding);
  for (std::int64_t l = 0; l < c.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer L{};
    L.ln1_g = add(p + "ln1.g", 1, d, TensorKind::norm_gain);
    L.ln1_b = add(p + "ln1.b", 1, d, TensorKind::norm_bias);
    L.wq = add(p + "wq", d, d, TensorKind::weight);
    L.bq = add(p + "bq", 1, d, TensorKind::bias);
    L.wk = add(p + "wk", d, d, TensorKind::weight);
    L.bk = add(p + "bk", 1, d, TensorKind::bias);
    L.wv = add(p + "wv", d, d, TensorKind::weight);
    L.bv = add(p + "bv", 1, d, TensorKind::bias);
    L.wo = add(p + "wo", d, d, TensorKind::weight);
    L.bo = add(p + "bo", 1, d, TensorKind::bias);
    L.ln2_g = add(p + "ln2.g", 1, d, TensorKind::norm_gain);
    L.ln2_b = add(p + "ln2.b", 1, d, TensorKind::norm_bias);
    L.w1 = add(p + "w1", d, f, TensorKind::weight);
    L.b1 = add(p + "b1", 1, f, TensorKind::bias);
    L.w2 = add(p + "w2", f, d, TensorKind::weight);
    L.b2 = add(p + "b2", 1, d, TensorKind::bias);
    layers.push_back(L);
  }
  lnf_g = add("lnf.g", 1, d, TensorKind::norm_gain);
  lnf_b = add("lnf.b", 1, d, TensorKind::norm_bias);
  head_bias = add("head_bias", 1, static_cast<std::size_t>(c.vocab_size), TensorKind::bias);
}

std::size_t ParameterLayout::add(std::string name, std::size_t rows, std::size_t cols,
                                 TensorKind kind) {
  tensors_.push_back(TensorInfo{std::move(name), rows, cols, total_, kind});
  total_ += rows * cols;
  return tensors_.size() - 1;
}

Model::Model(const ModelConfig& config) : config_(config), layout_((config.validate(), config)) {
  params_.assign(layout_.total(), 0.0);
}

std::span<double> Model::tensor(std::size_t index) {
  return {params_.data() + layout_[index].offset, layout_[index].size()};
}

std::span<const double> Model::tensor(std::size_t index) const {
  return {params_.data() + layout_[index].offset, layout_[index].size()};
}

bool Model::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

Model init(const ModelConfig& config) {
  Model model(config);
  Rng rng(derive_seed(config.seed, "init"));
  for (std::size_t i = 0; i < model.layout().tensors().size(); ++i) {
    const auto& info = model.layout()[i];
    auto t = model.tensor(i);
    switch (info.kind) {
      case TensorKind::token_embedding:
      case TensorKind::position_embedding:
      case TensorKind::weight:
        for (auto& v : t) v = kInitStd * rng.normal();
        break;
      case TensorKind::norm_gain: std::fill(t.begin(), t.end(), 1.0); break;
      case TensorKind::bias:
      case TensorKind::norm_bias: std::fill(t.begin(), t.end(), 0.0); break;
    }
  }
  return model;
}

Batch Batch::pack(std::span<const std::vector<TokenId>> sequences,
                  std::span<const std::vector<TokenId>> labels) {
  if (sequences.empty()) throw Error("Batch::pack: no sequences");
  if (!labels.empty() && labels.size() != sequences.size()) {
    throw Error("Batch::pack: label count differs from sequence count");
  }
  Batch b;
  b.batch_size = sequences.size();
  for (const auto& s : sequences) b.seq_len = std::max(b.seq_len, s.size());
  const std::size_t n = b.batch_size * b.seq_len;
  b.ids.assign(n, kPadId);
  b.mask.assign(n, 0);
  if (!labels.empty()) b.labels.assign(n, -1);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& s = sequences[i];
    if (!labels.empty() && labels[i].size() != s.size()) {
      throw Error("Batch::pack: label length differs from sequence length");
    }
    for (std::size_t t = 0; t < s.size(); ++t) {
      b.ids[i * b.seq_len + t] = s[t];
      b.mask[i * b.seq_len + t] = 1;
      if (!labels.empty()) b.labels[i * b.seq_len + t] = labels[i][t];
    }
  }
  return b;
}

std::size_t Batch::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](TokenId l) { return l >= 0; }));
}

ForwardResult forward(const Model& model, const Batch& batch, HeadRows head_rows) {
  check_batch(model, batch);
  const auto& cfg = model.config();
  const auto& lay = model.layout();
  const std::size_t B = batch.batch_size, T = batch.seq_len, N = B * T;
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto f = static_cast<std::size_t>(cfg.d_ffn);
  const auto H = static_cast<std::size_t>(cfg.n_heads);
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& k = kernels::active();

  ForwardResult res;
  ForwardCache& c = res.cache;
  c.batch_size = B;
  c.seq_len = T;

  std::vector<double> x(N * d);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t row = b * T + t;
      const double* te = model.data(lay.tok_emb) + static_cast<std::size_t>(batch.ids[row]) * d;
      const double* pe = model.data(lay.pos_emb) + t * d;
      for (std::size_t i = 0; i < d; ++i) x[row * d + i] = te[i] + pe[i];
    }
  }

  std::vector<double> scores(T);
  for (const auto& L : lay.layers) {
    LayerCache lc;
    lc.x_in = x;
    lc.h1.resize(N * d);
    lc.ln1_xhat.resize(N * d);
    lc.ln1_rstd.resize(N);
    layer_norm(x.data(), N, d, model.data(L.ln1_g), model.data(L.ln1_b), lc.h1.data(),
               lc.ln1_xhat.data(), lc.ln1_rstd.data());
    lc.q.resize(N * d);
    lc.k.resize(N * d);
    lc.v.resize(N * d);
    linear(lc.h1.data(), N, d, model.data(L.wq), model.data(L.bq), d, lc.q.data());
    linear(lc.h1.data(), N, d, model.data(L.wk), model.data(L.bk), d, lc.k.data());
    linear(lc.h1.data(), N, d, model.data(L.wv), model.data(L.bv), d, lc.v.data());

    lc.probs.assign(B * H * T * T, 0.0);
    lc.ctx.assign(N * d, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < T; ++i) {
          const double* qi = lc.q.data() + (b * T + i) * d + h * dh;
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < T; ++j) {
            if (!batch.mask[b * T + j]) {
              scores[j] = -std::numeric_limits<double>::infinity();
              continue;
            }
            scores[j] = k.dot(qi, lc.k.data() + (b * T + j) * d + h * dh, dh) * inv_sqrt_dh;
            mx = std::max(mx, scores[j]);
          }
          double* p = lc.probs.data() + ((b * H + h) * T + i) * T;
          double sum = 0.0;
          for (std::size_t j = 0; j < T; ++j) {
            p[j] = batch.mask[b * T + j] ? std::exp(scores[j] - mx) : 0.0;
            sum += p[j];
          }
          double* ci = lc.ctx.data() + (b * T + i) * d + h * dh;
          for (std::size_t j = 0; j < T; ++j) {
            p[j] /= sum;
            if (p[j] != 0.0) k.axpy(p[j], lc.v.data() + (b * T + j) * d + h * dh, ci, dh);
          }
        }
      }
    }
    std::vector<double> attn_out(N * d);
    linear(lc.ctx.data(), N, d, model.data(L.wo), model.data(L.bo), d, attn_out.data());
    for (std::size_t i = 0; i < N * d; ++i) x[i] += attn_out[i];
    lc.x_mid = x;

    lc.h2.resize(N * d);
    lc.ln2_xhat.resize(N * d);
    lc.ln2_rstd.resize(N);
    layer_norm(x.data(), N, d, model.data(L.ln2_g), model.data(L.ln2_b), lc.h2.data(),
               lc.ln2_xhat.data(), lc.ln2_rstd.data());
    lc.u.resize(N * f);
    linear(lc.h2.data(), N, d, model.data(L.w1), model.data(L.b1), f, lc.u.data());
    lc.g.resize(N * f);
    for (std::size_t i = 0; i < N * f; ++i) lc.g[i] = gelu(lc.u[i]);
    std::vector<double> ffn_out(N * d);
    linear(lc.g.data(), N, f, model.data(L.w2), model.data(L.b2), d, ffn_out.data());
    for (std::size_t i = 0; i < N * d; ++i) x[i] += ffn_out[i];
    c.layers.push_back(std::move(lc));
  }

  c.x_final = x;
  c.hidden.resize(N * d);
  c.lnf_xhat.resize(N * d);
  c.lnf_rstd.resize(N);
  layer_norm(x.data(), N, d, model.data(lay.lnf_g), model.data(lay.lnf_b), c.hidden.data(),
             c.lnf_xhat.data(), c.lnf_rstd.data());

  Logits& lg = res.logits;
  lg.vocab = V;
  if (head_rows == HeadRows::none) return res;
  if (head_rows == HeadRows::all) {
    lg.rows.resize(N);
    for (std::size_t r = 0; r < N; ++r) lg.rows[r] = r;
  } else {
    if (batch.labels.empty()) throw Error("forward: labeled head rows requested without labels");
    for (std::size_t r = 0; r < N; ++r) {
      if (batch.labels[r] >= 0) lg.rows.push_back(r);
    }
  }
  lg.values.resize(lg.rows.size() * V);
  const double* emb = model.data(lay.tok_emb);
  const double* hb = model.data(lay.head_bias);
  const std::size_t R = lg.rows.size();
  std::vector<double> gathered(R * d);
  for (std::size_t r = 0; r < R; ++r) {
    std::copy_n(c.hidden.data() + lg.rows[r] * d, d, gathered.data() + r * d);
    std::copy_n(hb, V, lg.values.data() + r * V);
  }
  kernels::matmul_transposed(gathered.data(), R, d, emb, V, lg.values.data(), true);
  return res;
}

LossResult mlm_loss(const Logits& logits, std::span<const TokenId> labels) {
  LossResult res;
  res.grad.rows = logits.rows;
  res.grad.vocab = logits.vocab;
  res.grad.values.assign(logits.values.size(), 0.0);
  const std::size_t V = logits.vocab;
  std::size_t count = 0;
  for (std::size_t r = 0; r < logits.rows.size(); ++r) {
    if (logits.rows[r] >= labels.size()) throw Error("mlm_loss: logits row outside label range");
    count += labels[logits.rows[r]] >= 0 ? 1 : 0;
  }
  if (count == 0) throw Error("mlm_loss: no labeled positions");
  const double inv = 1.0 / static_cast<double>(count);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows.size(); ++r) {
    const TokenId label = labels[logits.rows[r]];
    if (label < 0) continue;
    if (static_cast<std::size_t>(label) >= V) throw Error("mlm_loss: label outside vocabulary");
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - mx);
    const double log_z = mx + std::log(sum);
    total += log_z - row[static_cast<std::size_t>(label)];
    double* g = res.grad.values.data() + r * V;
    for (std::size_t v = 0; v < V; ++v) g[v] = std::exp(row[v] - log_z) * inv;
    g[static_cast<std::size_t>(label)] -= inv;
  }
  res.loss = total * inv;
  return res;
}

std::vector<double> backward(const Model& model, const Batch& batch, const ForwardCache& c,
                             const Logits& dlogits) {
  const auto& cfg = model.config();
  const auto& lay = model.layout();
  const std::size_t B = c.batch_size, T = c.seq_len, N = B * T;
  if (B != batch.batch_size || T != batch.seq_len || c.layers.size() != lay.layers.size()) {
    throw Error("backward: cache does not match batch/model");
  }
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto f = static_cast<std::size_t>(cfg.d_ffn);
  const auto H = static_cast<std::size_t>(cfg.n_heads);
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  if (dlogits.vocab != V || dlogits.values.size() != dlogits.rows.size() * V) {
    throw Error("backward: logits gradient shape mismatch");
  }
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& k = kernels::active();

  std::vector<double> grads(lay.total(), 0.0);
  auto g = [&](std::size_t idx) { return grads.data() + lay[idx].offset; };

  // Tied head: logits = hidden E^T + bias.
  std::vector<double> dhidden(N * d, 0.0);
  const double* emb = model.data(lay.tok_emb);
  {
    const std::size_t R = dlogits.rows.size();
    std::vector<double> hrows(R * d), dhrows(R * d);
    double* db = g(lay.head_bias);
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t row = dlogits.rows[r];
      if (row >= N) throw Error("backward: logits row outside batch");
      std::copy_n(c.hidden.data() + row * d, d, hrows.data() + r * d);
      k.axpy(1.0, dlogits.values.data() + r * V, db, V);
    }
    kernels::matmul(dlogits.values.data(), R, V, emb, d, dhrows.data());
    kernels::outer_accumulate(dlogits.values.data(), R, V, hrows.data(), d, g(lay.tok_emb));
    for (std::size_t r = 0; r < R; ++r) {
      k.axpy(1.0, dhrows.data() + r * d, dhidden.data() + dlogits.rows[r] * d, d);
    }
  }

  std::vector<double> dx(N * d, 0.0);
  layer_norm_backward(dhidden.data(), N, d, model.data(lay.lnf_g), c.lnf_xhat.data(),
                      c.lnf_rstd.data(), dx.data(), g(lay.lnf_g), g(lay.lnf_b));

  std::vector<double> tmp_d(N * d), dg(N * f), dq(N * d), dk(N * d), dv(N * d), dctx(N * d),
      dp(T);
  for (std::size_t li = lay.layers.size(); li-- > 0;) {
    const auto& L = lay.layers[li];
    const auto& lc = c.layers[li];

    // FFN block: x_out = x_mid + W2 gelu(W1 ln2(x_mid)).
    linear_backward(lc.g.data(), N, f, model.data(L.w2), d, dx.data(), dg.data(), g(L.w2), g(L.b2));
    for (std::size_t i = 0; i < N * f; ++i) dg[i] *= gelu_grad(lc.u[i]);
    linear_backward(lc.h2.data(), N, d, model.data(L.w1), f, dg.data(), tmp_d.data(), g(L.w1),
                    g(L.b1));
    layer_norm_backward(tmp_d.data(), N, d, model.data(L.ln2_g), lc.ln2_xhat.data(),
                        lc.ln2_rstd.data(), dx.data(), g(L.ln2_g), g(L.ln2_b));

    // Attention block: x_mid = x_in + Wo attn(ln1(x_in)).
    linear_backward(lc.ctx.data(), N, d, model.data(L.wo), d, dx.data(), dctx.data(), g(L.wo),
                    g(L.bo));
    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < T; ++i) {
          const double* p = lc.probs.data() + ((b * H + h) * T + i) * T;
          const double* dci = dctx.data() + (b * T + i) * d + h * dh;
          double weighted = 0.0;
          for (std::size_t j = 0; j < T; ++j) {
            if (p[j] == 0.0) {
              dp[j] = 0.0;
              continue;
            }
            const std::size_t off = (b * T + j) * d + h * dh;
            dp[j] = k.dot(dci, lc.v.data() + off, dh);
            k.axpy(p[j], dci, dv.data() + off, dh);
            weighted += p[j] * dp[j];
          }
          const double* qi = lc.q.data() + (b * T + i) * d + h * dh;
          double* dqi = dq.data() + (b * T + i) * d + h * dh;
          for (std::size_t j = 0; j < T; ++j) {
            if (p[j] == 0.0) continue;
            const double ds = p[j] * (dp[j] - weighted) * inv_sqrt_dh;
            const std::size_t off = (b * T + j) * d + h * dh;
            k.axpy(ds, lc.k.data() + off, dqi, dh);
            k.axpy(ds, qi, dk.data() + off, dh);
          }
        }
      }
    }
    linear_backward(lc.h1.data(), N, d, model.data(L.wq), d, dq.data(), tmp_d.data(), g(L.wq),
                    g(L.bq));
    std::vector<double> dh1 = tmp_d;
    linear_backward(lc.h1.data(), N, d, model.data(L.wk), d, dk.data(), tmp_d.data(), g(L.wk),
                    g(L.bk));
    for (std::size_t i = 0; i < N * d; ++i) dh1[i] += tmp_d[i];
    linear_backward(lc.h1.data(), N, d, model.data(L.wv), d, dv.data(), tmp_d.data(), g(L.wv),
                    g(L.bv));
    for (std::size_t i = 0; i < N * d; ++i) dh1[i] += tmp_d[i];
    layer_norm_backward(dh1.data(), N, d, model.data(L.ln1_g), lc.ln1_xhat.data(),
                        lc.ln1_rstd.data(), dx.data(), g(L.ln1_g), g(L.ln1_b));
  }

  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t row = b * T + t;
      const double* dxr = dx.data() + row * d;
      k.axpy(1.0, dxr, g(lay.tok_emb) + static_cast<std::size_t>(batch.ids[row]) * d, d);
      k.axpy(1.0, dxr, g(lay.pos_emb) + t * d, d);
    }
  }
  return grads;
}

std::vector<double> mean_pool(const Model& model, const Batch& batch) {
  const auto res = forward(model, batch, HeadRows::none);
  const std::size_t B = batch.batch_size, T = batch.seq_len;
  const auto d = static_cast<std::size_t>(model.config().d_model);
  std::vector<double> out(B * d, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t count = 0;
    double* o = out.data() + b * d;
    for (std::size_t t = 0; t < T; ++t) {
      if (!batch.mask[b * T + t]) continue;
      ++count;
      const double* h = res.cache.hidden.data() + (b * T + t) * d;
      for (std::size_t i = 0; i < d; ++i) o[i] += h[i];
    }
    for (std::size_t i = 0; i < d; ++i) o[i] /= static_cast<double>(count);
  }
  return out;
}

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  void f64s(double* dst, std::size_t n) {
    need(8 * n);
    std::memcpy(dst, bytes_.data() + pos_, 8 * n);
    pos_ += 8 * n;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("checkpoint is truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const Model& model) {
  const auto& c = model.config();
  std::string out(kCheckpointMagic);
  for (std::int64_t v : {c.n_layers, c.d_model, c.n_heads, c.d_ffn, c.max_len, c.vocab_size}) {
    put_u64(out, static_cast<std::uint64_t>(v));
  }
  put_u64(out, c.seed);
  for (std::size_t i = 0; i < model.layout().tensors().size(); ++i) {
    const auto t = model.tensor(i);
    put_u64(out, t.size());
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  put_u64(out, fnv1a(out));
  return out;
}

Model parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8 || bytes.substr(0, 8) != kCheckpointMagic) {
    throw Error("not a checkpoint (bad magic)");
  }
  const auto body = bytes.substr(0, bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (stored != fnv1a(body)) throw Error("checkpoint checksum mismatch");
  Reader r(body.substr(8));
  ModelConfig c;
  c.n_layers = static_cast<std::int64_t>(r.u64());
  c.d_model = static_cast<std::int64_t>(r.u64());
  c.n_heads = static_cast<std::int64_t>(r.u64());
  c.d_ffn = static_cast<std::int64_t>(r.u64());
  c.max_len = static_cast<std::int64_t>(r.u64());
  c.vocab_size = static_cast<std::int64_t>(r.u64());
  c.seed = r.u64();
  Model model(c);
  for (std::size_t i = 0; i < model.layout().tensors().size(); ++i) {
    auto t = model.tensor(i);
    if (r.u64() != t.size()) throw Error("checkpoint tensor size mismatch: " + model.layout()[i].name);
    r.f64s(t.data(), t.size());
  }
  if (r.pos() != body.size() - 8) throw Error("checkpoint has trailing data");
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(model));
}

Model load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace ifx
