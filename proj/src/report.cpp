#include "ifx/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace ifx {

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string diverging_color(double value, double scale) {
  double t = scale > 0.0 ? std::clamp(value / scale, -1.0, 1.0) : 0.0;
  // White to #b2182b for negative, white to #2166ac for positive.
  const int r1 = t < 0 ? 0xb2 : 0x21, g1 = t < 0 ? 0x18 : 0x66, b1 = t < 0 ? 0x2b : 0xac;
  t = std::abs(t);
  auto mixc = [&](int c) { return static_cast<int>(std::lround(255.0 + (c - 255.0) * t)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mixc(r1), mixc(g1), mixc(b1));
  return buf;
}

std::string render_heatmap(const Matrix& m, const HeatmapOptions& options) {
  if (m.size() == 0) throw Error("cannot render an empty matrix");
  double scale = options.scale;
  if (scale <= 0.0) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (auto v = m.get(i, j)) {
          if (!std::isfinite(*v)) throw Error("heatmap cells must be finite");
          scale = std::max(scale, std::abs(*v));
        }
      }
    }
  }
  std::size_t longest = 0;
  for (const auto& l : m.labels()) longest = std::max(longest, l.size());
  const double c = options.cell;
  const double label_w = 7.0 * static_cast<double>(longest) + 10.0;
  const double title_h = options.title.empty() ? 10.0 : 30.0;
  const double left = label_w, top = title_h + label_w;
  const double n = static_cast<double>(m.size());
  const double width = left + n * c + 20.0;
  const double height = top + n * c + 20.0;

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(width) + "\" height=\"" +
       px(height) + "\" viewBox=\"0 0 " + px(width) + " " + px(height) + "\">\n";
  s += "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
       "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#ffffff\"/>"
       "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#888888\" stroke-width=\"2\"/>"
       "</pattern></defs>\n";
  s += "<g font-family=\"monospace\" font-size=\"11\">\n";
  if (!options.title.empty()) {
    s += "<text x=\"" + px(left) + "\" y=\"18.0\" font-size=\"14\">" +
         xml_escape(options.title) + "</text>\n";
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double y = top + static_cast<double>(i) * c + c * 0.65;
    s += "<text x=\"" + px(left - 4.0) + "\" y=\"" + px(y) + "\" text-anchor=\"end\">" +
         xml_escape(m.labels()[i]) + "</text>\n";
    const double x = left + static_cast<double>(i) * c + c * 0.65;
    s += "<text x=\"" + px(x) + "\" y=\"" + px(top - 4.0) + "\" transform=\"rotate(-90 " + px(x) +
         " " + px(top - 4.0) + ")\">" + xml_escape(m.labels()[i]) + "</text>\n";
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      const auto v = m.get(i, j);
      const std::string fill = v ? diverging_color(*v, scale) : "url(#hatch)";
      s += "<rect x=\"" + px(left + static_cast<double>(j) * c) + "\" y=\"" +
           px(top + static_cast<double>(i) * c) + "\" width=\"" + px(c) + "\" height=\"" + px(c) +
           "\" fill=\"" + fill + "\" stroke=\"#dddddd\"><title>" + xml_escape(m.labels()[i]) +
           " / " + xml_escape(m.labels()[j]) + ": " + (v ? format_double(*v) : "missing") +
           "</title></rect>\n";
    }
  }
  s += "</g>\n</svg>\n";
  return s;
}

Analysis analyze(const SweepManifest& manifest, const Registry& registry,
                 const AnalysisOptions& options) {
  Analysis a;
  a.loss = assemble_loss_matrix(manifest, registry);
  a.interference = interference(a.loss);
  a.convergence = convergence_profile(a.loss, false);
  if (options.exclude_outliers) a.excluded = a.convergence.outliers.outliers;
  a.robustness = robustness(a.interference, a.excluded);
  a.friendliness = friendliness(a.interference, a.excluded);
  auto grouped = [&](GroupKey key) -> std::optional<GroupMatrix> {
    const auto grouping = group_by(registry, key);
    for (const auto& g : grouping) {
      std::size_t kept = 0;
      for (const auto& code : g.codes) {
        kept += std::find(a.excluded.begin(), a.excluded.end(), code) == a.excluded.end();
      }
      if (kept >= std::max<std::size_t>(options.min_group_size, 1)) {
        return aggregate_by_group(a.interference, grouping, options.min_group_size, a.excluded);
      }
    }
    return std::nullopt;
  };
  a.by_script = grouped(GroupKey::script);
  a.by_family = grouped(GroupKey::family);
  a.resources = resource_stats(a.interference, registry, a.excluded);
  a.asymmetry = asymmetry(a.interference);
  for (const auto& job : manifest.jobs) {
    if (job.status != JobStatus::done) a.failed_jobs.push_back(job.id);
  }
  return a;
}

namespace {

Matrix counts_matrix(const GroupMatrix& g) {
  Matrix m(g.labels);
  for (std::size_t f = 0; f < g.labels.size(); ++f) {
    for (std::size_t k = 0; k < g.labels.size(); ++k) {
      m.set(f, k, static_cast<double>(g.count(f, k)));
    }
  }
  return m;
}

}  // namespace

void write_analysis(const Analysis& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_matrix(a.loss, dir / "loss_matrix.csv");
  save_matrix(a.interference, dir / "interference_matrix.csv");
  save_matrix(a.asymmetry.delta, dir / "asymmetry_matrix.csv");
  write_file_atomic(dir / "robustness.csv", to_csv(a.robustness, "robustness"));
  write_file_atomic(dir / "friendliness.csv", to_csv(a.friendliness, "friendliness"));
  const GroupMatrix empty;
  for (const auto& [key, group] : {std::pair{"script", &a.by_script}, {"family", &a.by_family}}) {
    const GroupMatrix& g = *group ? **group : empty;
    save_matrix(g.mean, dir / ("group_matrix_" + std::string(key) + ".csv"));
    save_matrix(counts_matrix(g), dir / ("group_counts_" + std::string(key) + ".csv"));
  }

  auto j = nlohmann::ordered_json::parse(to_json(a.convergence.outliers));
  nlohmann::ordered_json means = nlohmann::ordered_json::object();
  for (const auto& [code, v] : a.convergence.mean_loss) means[code] = v;
  j["mean_loss"] = std::move(means);
  j["excluded_from_aggregates"] = a.excluded;
  j["exclusion_policy"] = "outlier rows and columns are both removed before averaging";
  j["failed_jobs"] = a.failed_jobs;
  write_file_atomic(dir / "outliers.json", j.dump(2) + "\n");
}

std::string summary_json(const Analysis& a) {
  using nlohmann::ordered_json;
  auto ranked = [](LanguageValues v, bool top) {
    std::stable_sort(v.begin(), v.end(), [&](const auto& x, const auto& y) {
      return top ? x.second > y.second : x.second < y.second;
    });
    ordered_json out = ordered_json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(5, v.size()); ++i) {
      out.push_back(ordered_json{{"code", v[i].first}, {"value", v[i].second}});
    }
    return out;
  };
  auto group_json = [](const GroupMatrix& g) {
    ordered_json out;
    out["labels"] = g.labels;
    out["sizes"] = g.group_sizes;
    ordered_json rows = ordered_json::array();
    for (std::size_t f = 0; f < g.labels.size(); ++f) {
      ordered_json row = ordered_json::array();
      for (std::size_t k = 0; k < g.labels.size(); ++k) {
        auto v = g.mean.get(f, k);
        row.push_back(v ? ordered_json(*v) : ordered_json());
      }
      rows.push_back(std::move(row));
    }
    out["mean"] = std::move(rows);
    return out;
  };
  ordered_json j;
  j["languages"] = a.loss.labels();
  j["robustness_top5"] = ranked(a.robustness, true);
  j["robustness_bottom5"] = ranked(a.robustness, false);
  j["friendliness_top5"] = ranked(a.friendliness, true);
  j["friendliness_bottom5"] = ranked(a.friendliness, false);
  j["max_asymmetry"] = ordered_json{{"a", a.asymmetry.a},
                                    {"b", a.asymmetry.b},
                                    {"delta", a.asymmetry.max_delta}};
  j["outliers"] = a.convergence.outliers.outliers;
  j["excluded_from_aggregates"] = a.excluded;
  j["group_matrix_script"] = a.by_script ? group_json(*a.by_script) : ordered_json();
  j["group_matrix_family"] = a.by_family ? group_json(*a.by_family) : ordered_json();
  ordered_json res = ordered_json::array();
  for (const auto& r : a.resources) {
    res.push_back(ordered_json{{"level", to_string(r.level)},
                               {"languages", r.languages},
                               {"mean_robustness", r.mean_robustness},
                               {"mean_friendliness", r.mean_friendliness}});
  }
  j["resource_levels"] = std::move(res);
  j["failed_jobs"] = a.failed_jobs;
  return j.dump(2) + "\n";
}

void write_report(const Analysis& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "interference_heatmap.svg",
                    render_heatmap(a.interference, {.title = "Interference matrix"}));
  if (a.by_script && a.by_script->mean.present_count() > 0) {
    write_file_atomic(dir / "group_heatmap_script.svg",
                      render_heatmap(a.by_script->mean, {.title = "Interference by script"}));
  }
  if (a.by_family && a.by_family->mean.present_count() > 0) {
    write_file_atomic(dir / "group_heatmap_family.svg",
                      render_heatmap(a.by_family->mean, {.title = "Interference by family"}));
  }
  write_file_atomic(dir / "summary.json", summary_json(a));
}

}  // namespace ifx
