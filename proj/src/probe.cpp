#include "ifx/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ifx/similarity.hpp"
#include "ifx/sweep.hpp"
#include "json.hpp"

namespace ifx {

ProbeTask make_probe_task(const SyntheticLanguageSpec& spec, const ProbeTaskOptions& options) {
  if (options.classes < 2) throw Error("a probe task needs at least 2 classes");
  if (options.per_class < 20) throw Error("a probe task needs at least 20 examples per class");
  SyntheticLanguageSpec topical = spec;
  if (spec.topics == 0) {
    topical.topics = options.classes;
    topical.topic_tilt = options.tilt;
  } else if (spec.topics != options.classes) {
    throw Error("probe classes must match the " + std::to_string(spec.topics) + " topics of " +
                spec.code);
  }
  const SyntheticGenerator gen(topical);

  ProbeTask task;
  task.code = spec.code;
  task.name = "topic-" + std::to_string(options.classes);
  task.classes = options.classes;
  Rng rng(derive_seed(options.seed, "probe:" + spec.code));
  for (int i = 0; i < options.per_class; ++i) {
    for (int c = 0; c < options.classes; ++c) {
      task.sentences.push_back(gen.render(gen.sentence_ranks(rng, c)));
      task.labels.push_back(c);
    }
  }
  return task;
}

namespace {

// Softmax cross-entropy + L2 on non-bias weights; returns loss, fills grad.
double objective(const std::vector<double>& z, std::size_t n, std::size_t cols,
                 const std::vector<int>& y, int classes, const std::vector<double>& w, double l2,
                 std::vector<double>& grad) {
  const auto K = static_cast<std::size_t>(classes);
  grad.assign(w.size(), 0.0);
  std::vector<double> logits(K);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* zi = z.data() + i * cols;
    double mx = -INFINITY;
    for (std::size_t c = 0; c < K; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += w[c * cols + j] * zi[j];
      logits[c] = s;
      mx = std::max(mx, s);
    }
    double sum = 0.0;
    for (auto v : logits) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    loss += log_z - logits[static_cast<std::size_t>(y[i])];
    for (std::size_t c = 0; c < K; ++c) {
      const double p = std::exp(logits[c] - log_z) - (static_cast<int>(c) == y[i] ? 1.0 : 0.0);
      for (std::size_t j = 0; j < cols; ++j) grad[c * cols + j] += p * zi[j] * inv_n;
    }
  }
  loss *= inv_n;
  for (std::size_t c = 0; c < K; ++c) {
    for (std::size_t j = 0; j + 1 < cols; ++j) {
      const double v = w[c * cols + j];
      loss += 0.5 * l2 * v * v;
      grad[c * cols + j] += l2 * v;
    }
  }
  return loss;
}

// Largest eigenvalue of Z^T Z / n by power iteration.
double top_eigenvalue(const std::vector<double>& z, std::size_t n, std::size_t cols) {
  std::vector<double> v(cols, 1.0 / std::sqrt(static_cast<double>(cols))), u(cols), zv(n);
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += z[i * cols + j] * v[j];
      zv[i] = s;
    }
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < cols; ++j) u[j] += z[i * cols + j] * zv[i];
    }
    double norm = 0.0;
    for (auto& x : u) {
      x /= static_cast<double>(n);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    const double prev = lambda;
    lambda = norm;
    for (std::size_t j = 0; j < cols; ++j) v[j] = u[j] / norm;
    if (std::abs(lambda - prev) <= 1e-9 * lambda) break;
  }
  return lambda;
}

}  // namespace

LogisticProbe LogisticProbe::fit(const std::vector<std::vector<double>>& x,
                                 const std::vector<int>& y, int classes,
                                 const LogisticOptions& options) {
  if (x.empty() || x.size() != y.size()) throw Error("probe: features and labels disagree");
  if (classes < 2) throw Error("probe: need at least 2 classes");
  LogisticProbe p;
  p.classes_ = classes;
  p.dim_ = x[0].size();
  const std::size_t n = x.size(), d = p.dim_, cols = d + 1;
  for (const auto& row : x) {
    if (row.size() != d) throw Error("probe: ragged features");
  }
  for (int label : y) {
    if (label < 0 || label >= classes) throw Error("probe: label out of range");
  }
  p.mean_.assign(d, 0.0);
  p.scale_.assign(d, 1.0);
  for (const auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) p.mean_[j] += row[j];
  }
  for (auto& m : p.mean_) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (const auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) var[j] += (row[j] - p.mean_[j]) * (row[j] - p.mean_[j]);
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    p.scale_[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  std::vector<double> z(n * cols);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z[i * cols + j] = (x[i][j] - p.mean_[j]) * p.scale_[j];
    z[i * cols + d] = 1.0;
  }

  const double lipschitz = 0.5 * top_eigenvalue(z, n, cols) + options.l2;
  const double step = 1.0 / lipschitz;
  const std::size_t size = static_cast<std::size_t>(classes) * cols;
  std::vector<double> w(size, 0.0), w_prev(size, 0.0), look(size), grad;
  double t = 1.0;
  for (p.iterations = 0; p.iterations < options.max_iterations; ++p.iterations) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < size; ++i) look[i] = w[i] + beta * (w[i] - w_prev[i]);
    objective(z, n, cols, y, classes, look, options.l2, grad);
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    p.gradient_norm = gmax;
    if (gmax < options.tolerance) {
      w = look;
      break;
    }
    // Adaptive restart: drop momentum when it points uphill.
    double uphill = 0.0;
    w_prev = w;
    for (std::size_t i = 0; i < size; ++i) {
      w[i] = look[i] - step * grad[i];
      uphill += grad[i] * (w[i] - w_prev[i]);
    }
    t = uphill > 0.0 ? 1.0 : t_next;
  }
  p.weights_ = std::move(w);
  return p;
}

int LogisticProbe::predict(const std::vector<double>& x) const {
  if (x.size() != dim_) throw Error("probe: feature dimension mismatch");
  const std::size_t cols = dim_ + 1;
  int best = 0;
  double best_score = -INFINITY;
  for (int c = 0; c < classes_; ++c) {
    const double* wc = weights_.data() + static_cast<std::size_t>(c) * cols;
    double s = wc[dim_];
    for (std::size_t j = 0; j < dim_; ++j) s += wc[j] * (x[j] - mean_[j]) * scale_[j];
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

double LogisticProbe::accuracy(const std::vector<std::vector<double>>& x,
                               const std::vector<int>& y) const {
  if (x.empty()) throw Error("probe: empty evaluation set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) hits += predict(x[i]) == y[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(x.size());
}

void stratified_split(const std::vector<int>& labels, int classes, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  train.clear();
  test.clear();
  Rng rng(derive_seed(seed, "probe-split"));
  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) idx.push_back(i);
    }
    if (idx.size() < 2) throw Error("probe: class " + std::to_string(c) + " has too few examples");
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(idx.size()))), 1,
        idx.size() - 1);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

ProbeResult eval_probe(const std::vector<std::vector<double>>& features, const ProbeTask& task,
                       const std::vector<std::uint64_t>& seeds, const LogisticOptions& options) {
  if (features.size() != task.labels.size()) throw Error("probe: one feature row per sentence");
  if (seeds.empty()) throw Error("probe: no seeds");
  ProbeResult result;
  for (auto seed : seeds) {
    std::vector<std::size_t> tr, te;
    stratified_split(task.labels, task.classes, seed, tr, te);
    std::vector<std::vector<double>> xtr, xte;
    std::vector<int> ytr, yte;
    for (auto i : tr) {
      xtr.push_back(features[i]);
      ytr.push_back(task.labels[i]);
    }
    for (auto i : te) {
      xte.push_back(features[i]);
      yte.push_back(task.labels[i]);
    }
    const auto probe = LogisticProbe::fit(xtr, ytr, task.classes, options);
    result.per_seed.push_back(probe.accuracy(xte, yte));
    result.train_size = tr.size();
    result.test_size = te.size();
  }
  result.accuracy = std::accumulate(result.per_seed.begin(), result.per_seed.end(), 0.0) /
                    static_cast<double>(result.per_seed.size());
  return result;
}

ProbeResult eval_probe(const Model& model, const Vocab& vocab, const ProbeTask& task,
                       const std::vector<std::uint64_t>& seeds, const LogisticOptions& options) {
  return eval_probe(sentence_embeddings(model, vocab, task.sentences), task, seeds, options);
}

PartnerChoice choose_partners(const Matrix& im, const std::string& target, std::size_t n_low,
                              std::size_t n_high) {
  const auto a = im.index_of(target);
  if (!a) throw Error("unknown target language " + target);
  std::vector<std::pair<double, std::string>> row;
  for (std::size_t b = 0; b < im.size(); ++b) {
    if (b == *a) continue;
    if (auto v = im.get(*a, b)) row.emplace_back(*v, im.labels()[b]);
  }
  if (row.size() < n_low + n_high) throw Error("not enough partners in the row of " + target);
  std::sort(row.begin(), row.end());
  PartnerChoice choice;
  for (std::size_t i = 0; i < n_low; ++i) choice.low.push_back(row[row.size() - 1 - i].second);
  for (std::size_t i = 0; i < n_high; ++i) choice.high.push_back(row[i].second);
  return choice;
}

double interference_delta(const std::vector<double>& low, const std::vector<double>& high) {
  if (low.empty() || high.empty()) throw Error("delta needs both partner groups");
  const double lo = std::accumulate(low.begin(), low.end(), 0.0) / static_cast<double>(low.size());
  const double hi =
      std::accumulate(high.begin(), high.end(), 0.0) / static_cast<double>(high.size());
  return lo - hi;
}

DeltaReport interference_delta(const std::string& target, const PartnerChoice& partners,
                               const std::filesystem::path& checkpoint_dir, const Vocab& vocab,
                               const ProbeTask& task, const std::vector<std::uint64_t>& seeds,
                               const LogisticOptions& options) {
  auto load = [&](const std::string& id) {
    const auto path = checkpoint_path(checkpoint_dir, id);
    if (!std::filesystem::exists(path)) throw Error("missing checkpoint for " + id);
    return load_checkpoint(path);
  };
  DeltaReport r;
  r.target = target;
  r.task = task.name;
  r.low = partners.low;
  r.high = partners.high;
  r.monolingual = eval_probe(load(mono_job_id(target)), vocab, task, seeds, options);
  std::vector<double> lo, hi;
  for (const auto& p : partners.low) {
    r.partners[p] = eval_probe(load(bilingual_job_id(target, p)), vocab, task, seeds, options);
    lo.push_back(r.partners[p].accuracy);
  }
  for (const auto& p : partners.high) {
    r.partners[p] = eval_probe(load(bilingual_job_id(target, p)), vocab, task, seeds, options);
    hi.push_back(r.partners[p].accuracy);
  }
  r.low_average = std::accumulate(lo.begin(), lo.end(), 0.0) / static_cast<double>(lo.size());
  r.high_average = std::accumulate(hi.begin(), hi.end(), 0.0) / static_cast<double>(hi.size());
  r.delta = interference_delta(lo, hi);
  return r;
}

std::string to_json(const DeltaReport& r) {
  using nlohmann::ordered_json;
  auto result = [](const ProbeResult& p) {
    ordered_json j;
    j["accuracy"] = p.accuracy;
    j["per_seed"] = p.per_seed;
    j["train_size"] = p.train_size;
    j["test_size"] = p.test_size;
    return j;
  };
  ordered_json j;
  j["target"] = r.target;
  j["task"] = r.task;
  if (r.monolingual) j["monolingual"] = result(*r.monolingual);
  ordered_json partners = ordered_json::object();
  for (const auto& [code, p] : r.partners) partners[code] = result(p);
  j["partners"] = std::move(partners);
  j["low_interference"] = r.low;
  j["high_interference"] = r.high;
  j["low_average"] = r.low_average;
  j["high_average"] = r.high_average;
  j["delta"] = r.delta;
  return j.dump(2) + "\n";
}

}  // namespace ifx
