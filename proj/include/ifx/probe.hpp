#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ifx/analytics.hpp"
#include "ifx/corpus.hpp"
#include "ifx/model.hpp"
#include "ifx/tokenizer.hpp"

namespace ifx {

struct ProbeTask {
  std::string code;
  std::string name;
  int classes = 0;
  std::vector<std::string> sentences;
  std::vector<int> labels;
};

struct ProbeTaskOptions {
  int classes = 3;
  int per_class = 50;
  // Probability that a word is redrawn from its class's topic.
  double tilt = 0.5;
  std::uint64_t seed = 0;
};

// Labeled sentences from the language's own generator, class = topic. A
// language with latent topics is probed on those (classes must match and its
// own tilt applies); otherwise `classes` topics with `tilt` are imposed.
ProbeTask make_probe_task(const SyntheticLanguageSpec& spec, const ProbeTaskOptions& options);

struct ProbeResult {
  double accuracy = 0.0;  // mean of per_seed
  std::vector<double> per_seed;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

struct LogisticOptions {
  double l2 = 1e-3;
  double tolerance = 1e-6;  // max-norm of the gradient
  int max_iterations = 20000;
};

// Multinomial logistic regression, trained full-batch with Nesterov
// accelerated gradient descent on standardized features.
class LogisticProbe {
 public:
  static LogisticProbe fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           int classes, const LogisticOptions& options = {});

  int predict(const std::vector<double>& x) const;
  double accuracy(const std::vector<std::vector<double>>& x, const std::vector<int>& y) const;

  int iterations = 0;
  double gradient_norm = 0.0;

 private:
  int classes_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> mean_, scale_;
  std::vector<double> weights_;  // classes x (dim + 1), bias last
};

// Class-stratified split; the first 80% of each shuffled class trains.
void stratified_split(const std::vector<int>& labels, int classes, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& test);

ProbeResult eval_probe(const std::vector<std::vector<double>>& features, const ProbeTask& task,
                       const std::vector<std::uint64_t>& seeds, const LogisticOptions& options = {});
ProbeResult eval_probe(const Model& model, const Vocab& vocab, const ProbeTask& task,
                       const std::vector<std::uint64_t>& seeds, const LogisticOptions& options = {});

struct PartnerChoice {
  std::vector<std::string> low;   // highest I(target, B)
  std::vector<std::string> high;  // lowest I(target, B)
};

PartnerChoice choose_partners(const Matrix& im, const std::string& target, std::size_t n_low,
                              std::size_t n_high);

struct DeltaReport {
  std::string target;
  std::string task;
  std::optional<ProbeResult> monolingual;
  std::map<std::string, ProbeResult> partners;
  std::vector<std::string> low, high;
  double low_average = 0.0;
  double high_average = 0.0;
  double delta = 0.0;  // positive when the matrix's prediction held
};

// Mean over the low group minus mean over the high group.
double interference_delta(const std::vector<double>& low_accuracies,
                          const std::vector<double>& high_accuracies);

// Probes the target's monolingual checkpoint and its bilingual checkpoints
// with each partner, all from `checkpoint_dir`.
DeltaReport interference_delta(const std::string& target, const PartnerChoice& partners,
                               const std::filesystem::path& checkpoint_dir, const Vocab& vocab,
                               const ProbeTask& task, const std::vector<std::uint64_t>& seeds,
                               const LogisticOptions& options = {});

std::string to_json(const DeltaReport& report);

}  // namespace ifx
