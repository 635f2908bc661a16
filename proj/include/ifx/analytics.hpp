#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ifx/registry.hpp"
#include "ifx/sweep.hpp"

namespace ifx {

// Square matrix over labeled rows/columns with a presence mask.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const;

  bool has(std::size_t i, std::size_t j) const { return present_[i * size() + j] != 0; }
  double at(std::size_t i, std::size_t j) const;  // throws when masked
  std::optional<double> get(std::size_t i, std::size_t j) const;
  void set(std::size_t i, std::size_t j, double v);
  void clear(std::size_t i, std::size_t j);
  std::size_t present_count() const;

  // Same matrix without the listed labels; order of the rest is kept.
  Matrix without(const std::vector<std::string>& excluded) const;

  bool operator==(const Matrix& other) const;

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
  std::vector<unsigned char> present_;
};

// Row = evaluated language, column = secondary language, diagonal = monolingual.
using LossMatrix = Matrix;
using InterferenceMatrix = Matrix;

using LanguageValues = std::vector<std::pair<std::string, double>>;

LossMatrix assemble_loss_matrix(const SweepManifest& manifest, const Registry& registry);

// I(A,B) = (L(A,A) - L(A,B)) / L(A,A); defined iff both entries are present.
InterferenceMatrix interference(const LossMatrix& loss);

// Mean of the present off-diagonal entries of each row (column).
LanguageValues robustness(const InterferenceMatrix& im,
                          const std::vector<std::string>& excluded = {});
LanguageValues friendliness(const InterferenceMatrix& im,
                            const std::vector<std::string>& excluded = {});

// Linear interpolation between order statistics (R type 7).
double quantile(std::span<const double> sorted, double p);

struct OutlierReport {
  std::string metric;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::string> outliers;  // input order
  std::vector<std::string> high;      // above upper
  std::vector<std::string> low;       // below lower
};

// Codes strictly outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
OutlierReport iqr_outliers(const LanguageValues& values, std::string metric = "value");

struct GroupMatrix {
  std::vector<std::string> labels;
  std::vector<std::size_t> group_sizes;
  Matrix mean;
  std::vector<std::size_t> counts;  // row-major, entries averaged per cell

  std::size_t count(std::size_t f, std::size_t g) const { return counts[f * labels.size() + g]; }
};

// Cell (F,G) averages I(A,B) over A in F, B in G, A != B, present only. Groups
// smaller than min_group_size are dropped; empty cells stay masked.
GroupMatrix aggregate_by_group(const InterferenceMatrix& im, const Grouping& grouping,
                               std::size_t min_group_size = 3,
                               const std::vector<std::string>& excluded = {});

struct ResourceStat {
  ResourceLevel level = ResourceLevel::unknown;
  std::size_t languages = 0;
  double mean_robustness = 0.0;
  double mean_friendliness = 0.0;
};

// Per resource level (high, then low); `unknown` and empty levels omitted.
std::vector<ResourceStat> resource_stats(const InterferenceMatrix& im, const Registry& registry,
                                         const std::vector<std::string>& excluded = {});

struct Asymmetry {
  Matrix delta;  // I - I^T
  std::string a, b;
  double max_delta = 0.0;  // delta(a, b) with the largest magnitude; positive
};

Asymmetry asymmetry(const InterferenceMatrix& im);

struct ConvergenceProfile {
  LanguageValues mean_loss;  // row means of L including the diagonal
  OutlierReport outliers;
};

// With screen_small false, fewer than 4 languages yield an empty outlier list
// instead of an error.
ConvergenceProfile convergence_profile(const LossMatrix& loss, bool screen_small = true);

// CSV with labels in the first row and column; masked cells are empty.
std::string to_csv(const Matrix& m);
Matrix parse_matrix_csv(std::string_view text);
void save_matrix(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix(const std::filesystem::path& path);

std::string to_csv(const LanguageValues& values, std::string_view column);
std::string to_json(const OutlierReport& report);

}  // namespace ifx
