#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifx/analytics.hpp"
#include "ifx/registry.hpp"
#include "ifx/sweep.hpp"

namespace ifx {

struct HeatmapOptions {
  std::string title;
  double cell = 28.0;  // px
  // Magnitude mapped to full color; 0 means the matrix's largest |value|.
  double scale = 0.0;
};

// Diverging scale centered at 0: red for negative (interference), blue for
// positive (transfer), white at 0. Masked cells are hatched.
std::string render_heatmap(const Matrix& m, const HeatmapOptions& options = {});
std::string diverging_color(double value, double scale);

struct AnalysisOptions {
  std::size_t min_group_size = 3;
  bool exclude_outliers = true;
};

struct Analysis {
  LossMatrix loss;
  InterferenceMatrix interference;
  ConvergenceProfile convergence;
  std::vector<std::string> excluded;  // outliers left out of the aggregates
  LanguageValues robustness;
  LanguageValues friendliness;
  // Absent when no group reaches the minimum size.
  std::optional<GroupMatrix> by_script;
  std::optional<GroupMatrix> by_family;
  std::vector<ResourceStat> resources;
  Asymmetry asymmetry;
  std::vector<std::string> failed_jobs;
};

Analysis analyze(const SweepManifest& manifest, const Registry& registry,
                 const AnalysisOptions& options = {});

// loss_matrix.csv, interference_matrix.csv, robustness.csv, friendliness.csv,
// outliers.json, group_matrix_script.csv, group_matrix_family.csv and
// asymmetry_matrix.csv.
void write_analysis(const Analysis& analysis, const std::filesystem::path& dir);

std::string summary_json(const Analysis& analysis);

// interference_heatmap.svg, group heatmaps and summary.json.
void write_report(const Analysis& analysis, const std::filesystem::path& dir);

}  // namespace ifx
