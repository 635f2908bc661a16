#include "ifx/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ifx/kernels.hpp"

namespace ifx {

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error("cosine of vectors with different lengths");
  const double uu = kernels::dot(u, u);
  const double vv = kernels::dot(v, v);
  if (uu == 0.0 || vv == 0.0) throw Error("cosine of a zero vector");
  const double c = kernels::dot(u, v) / std::sqrt(uu * vv);
  return std::clamp(c, -1.0, 1.0);
}

Matrix similarity_matrix(const std::vector<EmbeddingSet>& sets) {
  std::vector<std::string> labels;
  for (const auto& s : sets) labels.push_back(s.code);
  Matrix sim(labels);
  if (sets.empty()) return sim;
  const std::size_t m = sets[0].size();
  const std::size_t d = sets[0].dim;
  if (m == 0) throw Error("empty embedding set for " + sets[0].code);
  for (const auto& s : sets) {
    if (s.size() != m) throw Error("embedding sets are not aligned: " + s.code);
    if (s.dim != d) throw Error("embedding dimension mismatch: " + s.code);
  }
  for (std::size_t a = 0; a < sets.size(); ++a) {
    sim.set(a, a, 1.0);
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      double sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) sum += cosine(sets[a].vectors[i], sets[b].vectors[i]);
      const double s = sum / static_cast<double>(m);
      sim.set(a, b, s);
      sim.set(b, a, s);
    }
  }
  return sim;
}

std::vector<std::vector<double>> sentence_embeddings(const Model& model, const Vocab& vocab,
                                                     std::span<const std::string> sentences) {
  constexpr std::size_t kChunk = 32;
  const auto max_len = static_cast<std::size_t>(model.config().max_len);
  const auto d = static_cast<std::size_t>(model.config().d_model);
  std::vector<std::vector<double>> out;
  out.reserve(sentences.size());
  for (std::size_t start = 0; start < sentences.size(); start += kChunk) {
    const std::size_t end = std::min(sentences.size(), start + kChunk);
    std::vector<std::vector<TokenId>> ids;
    for (std::size_t i = start; i < end; ++i) ids.push_back(encode(vocab, sentences[i], max_len));
    const auto pooled = mean_pool(model, Batch::pack(ids));
    for (std::size_t b = 0; b < ids.size(); ++b) {
      out.emplace_back(pooled.begin() + static_cast<std::ptrdiff_t>(b * d),
                       pooled.begin() + static_cast<std::ptrdiff_t>((b + 1) * d));
    }
  }
  return out;
}

EmbeddingSet embed_corpus(const Model& model, const Vocab& vocab, const Corpus& corpus) {
  EmbeddingSet set;
  set.code = corpus.code;
  set.dim = static_cast<std::size_t>(model.config().d_model);
  set.vectors = sentence_embeddings(model, vocab, corpus.sentences);
  set.source = EmbeddingSource::own_model;
  return set;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("correlation of series with different lengths");
  if (x.size() < 2) throw Error("correlation needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("correlation of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

RowComparison row_compare(const Matrix& im, const Matrix& sim, std::string_view code) {
  const auto a = im.index_of(code);
  const auto sa = sim.index_of(code);
  if (!a || !sa) throw Error("row_compare: unknown language " + std::string(code));
  RowComparison r;
  r.code = std::string(code);
  for (std::size_t b = 0; b < im.size(); ++b) {
    if (b == *a) continue;
    const auto sb = sim.index_of(im.labels()[b]);
    if (!sb) throw Error("similarity matrix lacks " + im.labels()[b]);
    const auto iv = im.get(*a, b);
    const auto sv = sim.get(*sa, *sb);
    if (!iv || !sv) continue;
    r.partners.push_back(im.labels()[b]);
    r.similarity.push_back(*sv);
    r.interference.push_back(*iv);
  }
  if (r.partners.size() < 3) throw Error("row_compare needs at least 3 comparable entries");
  r.pearson = pearson(r.similarity, r.interference);
  r.spearman = spearman(r.similarity, r.interference);
  return r;
}

std::string to_csv(const RowComparison& row) {
  std::string out = "partner,similarity,interference\n";
  for (std::size_t i = 0; i < row.partners.size(); ++i) {
    out += row.partners[i] + "," + format_double(row.similarity[i]) + "," +
           format_double(row.interference[i]) + "\n";
  }
  return out;
}

std::string serialize(const EmbeddingSet& set) {
  std::string out = "emb v1 " + set.code + " " + std::to_string(set.size()) + " " +
                    std::to_string(set.dim) + "\n";
  for (const auto& v : set.vectors) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ' ';
      out += format_double(v[i]);
    }
    out += '\n';
  }
  return out;
}

EmbeddingSet parse_embeddings(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw Error("empty embedding file");
  std::vector<std::string> head;
  for (auto& f : split(trim(lines[0]), ' ')) {
    if (!f.empty()) head.push_back(f);
  }
  if (head.size() != 5 || head[0] != "emb" || head[1] != "v1") {
    throw Error("bad embedding header: expected 'emb v1 <code> <M> <d>'");
  }
  EmbeddingSet set;
  set.code = head[2];
  set.source = EmbeddingSource::external_file;
  std::size_t m = 0;
  try {
    m = std::stoul(head[3]);
    set.dim = std::stoul(head[4]);
  } catch (const std::exception&) {
    throw Error("bad embedding header counts");
  }
  if (m == 0 || set.dim == 0) throw Error("embedding file declares no vectors");
  if (lines.size() - 1 != m) throw Error("embedding file has " + std::to_string(lines.size() - 1) +
                                         " vectors, header declares " + std::to_string(m));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<double> v;
    for (auto& f : split(trim(lines[i]), ' ')) {
      if (!f.empty()) v.push_back(parse_double(f));
    }
    if (v.size() != set.dim) {
      throw Error("embedding vector " + std::to_string(i) + " has length " +
                  std::to_string(v.size()) + ", expected " + std::to_string(set.dim));
    }
    set.vectors.push_back(std::move(v));
  }
  return set;
}

EmbeddingSet load_external_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path));
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(set));
}

}  // namespace ifx
