#include "ifx/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace ifx {

Matrix::Matrix(std::vector<std::string> labels)
    : labels_(std::move(labels)),
      values_(labels_.size() * labels_.size(), 0.0),
      present_(labels_.size() * labels_.size(), 0) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    for (std::size_t k = i + 1; k < labels_.size(); ++k) {
      if (labels_[i] == labels_[k]) throw Error("duplicate matrix label: " + labels_[i]);
    }
  }
}

std::optional<std::size_t> Matrix::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

double Matrix::at(std::size_t i, std::size_t j) const {
  if (!has(i, j)) throw Error("matrix cell (" + labels_[i] + ", " + labels_[j] + ") is masked");
  return values_[i * size() + j];
}

std::optional<double> Matrix::get(std::size_t i, std::size_t j) const {
  if (!has(i, j)) return std::nullopt;
  return values_[i * size() + j];
}

void Matrix::set(std::size_t i, std::size_t j, double v) {
  values_[i * size() + j] = v;
  present_[i * size() + j] = 1;
}

void Matrix::clear(std::size_t i, std::size_t j) {
  values_[i * size() + j] = 0.0;
  present_[i * size() + j] = 0;
}

std::size_t Matrix::present_count() const {
  return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), 1));
}

Matrix Matrix::without(const std::vector<std::string>& excluded) const {
  std::vector<std::size_t> keep;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < size(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), labels_[i]) == excluded.end()) {
      keep.push_back(i);
      labels.push_back(labels_[i]);
    }
  }
  Matrix out(std::move(labels));
  for (std::size_t a = 0; a < keep.size(); ++a) {
    for (std::size_t b = 0; b < keep.size(); ++b) {
      if (auto v = get(keep[a], keep[b])) out.set(a, b, *v);
    }
  }
  return out;
}

bool Matrix::operator==(const Matrix& other) const {
  if (labels_ != other.labels_ || present_ != other.present_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (present_[i] && values_[i] != other.values_[i]) return false;
  }
  return true;
}

LossMatrix assemble_loss_matrix(const SweepManifest& manifest, const Registry& registry) {
  if (manifest.languages != registry.codes() || manifest.registry_hash != registry.hash()) {
    throw Error("registry does not match the sweep manifest");
  }
  LossMatrix loss(registry.codes());
  for (const auto& [key, value] : manifest.results()) {
    const auto i = registry.index_of(key.first);
    const auto j = registry.index_of(key.second);
    if (!i || !j) throw Error("manifest result for a language outside the registry");
    loss.set(*i, *j, value);
  }
  return loss;
}

InterferenceMatrix interference(const LossMatrix& loss) {
  InterferenceMatrix im(loss.labels());
  for (std::size_t a = 0; a < loss.size(); ++a) {
    const auto base = loss.get(a, a);
    if (!base) continue;
    if (*base == 0.0) throw Error("zero monolingual loss for " + loss.labels()[a]);
    for (std::size_t b = 0; b < loss.size(); ++b) {
      if (a == b) {
        im.set(a, a, 0.0);
      } else if (auto v = loss.get(a, b)) {
        im.set(a, b, (*base - *v) / *base);
      }
    }
  }
  return im;
}

namespace {

LanguageValues line_means(const InterferenceMatrix& full, const std::vector<std::string>& excluded,
                          bool rows) {
  const Matrix im = full.without(excluded);
  LanguageValues out;
  for (std::size_t a = 0; a < im.size(); ++a) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < im.size(); ++b) {
      if (a == b) continue;
      if (auto v = rows ? im.get(a, b) : im.get(b, a)) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) {
      throw Error(std::string("no interference entries in the ") + (rows ? "row" : "column") +
                  " of " + im.labels()[a]);
    }
    out.emplace_back(im.labels()[a], sum / static_cast<double>(n));
  }
  return out;
}

}  // namespace

LanguageValues robustness(const InterferenceMatrix& im, const std::vector<std::string>& excluded) {
  return line_means(im, excluded, true);
}

LanguageValues friendliness(const InterferenceMatrix& im,
                            const std::vector<std::string>& excluded) {
  return line_means(im, excluded, false);
}

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("quantile level outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

OutlierReport iqr_outliers(const LanguageValues& values, std::string metric) {
  if (values.size() < 4) throw Error("IQR outlier detection needs at least 4 values");
  std::vector<double> sorted;
  for (const auto& [code, v] : values) {
    if (!std::isfinite(v)) throw Error("non-finite value for " + code);
    sorted.push_back(v);
  }
  std::sort(sorted.begin(), sorted.end());
  OutlierReport r;
  r.metric = std::move(metric);
  r.q1 = quantile(sorted, 0.25);
  r.q3 = quantile(sorted, 0.75);
  r.iqr = r.q3 - r.q1;
  r.lower = r.q1 - 1.5 * r.iqr;
  r.upper = r.q3 + 1.5 * r.iqr;
  for (const auto& [code, v] : values) {
    if (v < r.lower) {
      r.outliers.push_back(code);
      r.low.push_back(code);
    } else if (v > r.upper) {
      r.outliers.push_back(code);
      r.high.push_back(code);
    }
  }
  return r;
}

GroupMatrix aggregate_by_group(const InterferenceMatrix& full, const Grouping& grouping,
                               std::size_t min_group_size,
                               const std::vector<std::string>& excluded) {
  const Matrix im = full.without(excluded);
  struct Kept {
    std::string label;
    std::vector<std::size_t> members;
  };
  std::vector<Kept> kept;
  for (const auto& g : grouping) {
    Kept k{g.label, {}};
    for (const auto& code : g.codes) {
      if (std::find(excluded.begin(), excluded.end(), code) != excluded.end()) continue;
      const auto idx = im.index_of(code);
      if (!idx) throw Error("grouped code not in the matrix: " + code);
      k.members.push_back(*idx);
    }
    if (k.members.size() >= min_group_size && !k.members.empty()) kept.push_back(std::move(k));
  }
  if (kept.empty()) throw Error("no group has at least " + std::to_string(min_group_size) +
                                " languages");
  GroupMatrix gm;
  for (const auto& k : kept) {
    gm.labels.push_back(k.label);
    gm.group_sizes.push_back(k.members.size());
  }
  gm.mean = Matrix(gm.labels);
  const std::size_t G = kept.size();
  gm.counts.assign(G * G, 0);
  for (std::size_t f = 0; f < G; ++f) {
    for (std::size_t g = 0; g < G; ++g) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t a : kept[f].members) {
        for (std::size_t b : kept[g].members) {
          if (a == b) continue;
          if (auto v = im.get(a, b)) {
            sum += *v;
            ++n;
          }
        }
      }
      gm.counts[f * G + g] = n;
      if (n > 0) gm.mean.set(f, g, sum / static_cast<double>(n));
    }
  }
  return gm;
}

std::vector<ResourceStat> resource_stats(const InterferenceMatrix& full, const Registry& registry,
                                         const std::vector<std::string>& excluded) {
  const Matrix im = full.without(excluded);
  const auto rob = robustness(im);
  const auto fri = friendliness(im);
  std::vector<ResourceStat> out;
  for (auto level : {ResourceLevel::high, ResourceLevel::low}) {
    ResourceStat s;
    s.level = level;
    for (std::size_t i = 0; i < rob.size(); ++i) {
      if (registry.at(rob[i].first).resource_level != level) continue;
      s.mean_robustness += rob[i].second;
      s.mean_friendliness += fri[i].second;
      ++s.languages;
    }
    if (s.languages == 0) continue;
    s.mean_robustness /= static_cast<double>(s.languages);
    s.mean_friendliness /= static_cast<double>(s.languages);
    out.push_back(s);
  }
  return out;
}

Asymmetry asymmetry(const InterferenceMatrix& im) {
  Asymmetry r;
  r.delta = Matrix(im.labels());
  for (std::size_t a = 0; a < im.size(); ++a) {
    for (std::size_t b = 0; b < im.size(); ++b) {
      const auto x = im.get(a, b);
      const auto y = im.get(b, a);
      if (!x || !y) continue;
      const double d = a == b ? 0.0 : *x - *y;
      r.delta.set(a, b, d);
      if (d > r.max_delta) {
        r.max_delta = d;
        r.a = im.labels()[a];
        r.b = im.labels()[b];
      }
    }
  }
  // *x - *y and *y - *x are exact negations in IEEE arithmetic, so the
  // matrix is antisymmetric bit for bit.
  return r;
}

ConvergenceProfile convergence_profile(const LossMatrix& loss, bool screen_small) {
  ConvergenceProfile p;
  for (std::size_t a = 0; a < loss.size(); ++a) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < loss.size(); ++b) {
      if (auto v = loss.get(a, b)) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) throw Error("no losses in the row of " + loss.labels()[a]);
    p.mean_loss.emplace_back(loss.labels()[a], sum / static_cast<double>(n));
  }
  const std::string metric = "mean loss-matrix row (including the diagonal)";
  if (!screen_small && p.mean_loss.size() < 4) {
    // too few languages for quartiles; nothing is flagged
    p.outliers.metric = metric + "; not screened, fewer than 4 languages";
    return p;
  }
  p.outliers = iqr_outliers(p.mean_loss, metric);
  return p;
}

std::string to_csv(const Matrix& m) {
  if (m.size() == 0) return "\n";
  std::string out;
  for (const auto& l : m.labels()) {
    out += ',';
    out += l;
  }
  out += '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.labels()[i];
    for (std::size_t j = 0; j < m.size(); ++j) {
      out += ',';
      if (auto v = m.get(i, j)) out += format_double(*v);
    }
    out += '\n';
  }
  return out;
}

Matrix parse_matrix_csv(std::string_view text) {
  std::vector<std::string> lines;
  for (auto& l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    if (!l.empty()) lines.push_back(std::move(l));
  }
  if (lines.empty()) return Matrix{};
  auto header = split(lines[0], ',');
  if (header.empty() || !header[0].empty()) throw Error("matrix CSV header must start with ','");
  std::vector<std::string> labels(header.begin() + 1, header.end());
  if (lines.size() != labels.size() + 1) throw Error("matrix CSV is not square");
  Matrix m(labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto cells = split(lines[i + 1], ',');
    if (cells.size() != labels.size() + 1) throw Error("ragged matrix CSV row " + cells[0]);
    if (cells[0] != labels[i]) throw Error("matrix CSV row label mismatch: " + cells[0]);
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (!cells[j + 1].empty()) m.set(i, j, parse_double(cells[j + 1]));
    }
  }
  return m;
}

void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, to_csv(m));
}

Matrix load_matrix(const std::filesystem::path& path) { return parse_matrix_csv(read_file(path)); }

std::string to_csv(const LanguageValues& values, std::string_view column) {
  std::string out = "code," + std::string(column) + "\n";
  for (const auto& [code, v] : values) out += code + "," + format_double(v) + "\n";
  return out;
}

std::string to_json(const OutlierReport& r) {
  nlohmann::ordered_json j;
  j["metric"] = r.metric;
  j["q1"] = r.q1;
  j["q3"] = r.q3;
  j["iqr"] = r.iqr;
  j["lower"] = r.lower;
  j["upper"] = r.upper;
  j["outliers"] = r.outliers;
  j["high"] = r.high;
  j["low"] = r.low;
  return j.dump(2) + "\n";
}

}  // namespace ifx
