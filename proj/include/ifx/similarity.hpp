#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ifx/analytics.hpp"
#include "ifx/model.hpp"
#include "ifx/tokenizer.hpp"

namespace ifx {

enum class EmbeddingSource { own_model, external_file };

// One vector per parallel sentence, index-aligned across languages.
struct EmbeddingSet {
  std::string code;
  std::size_t dim = 0;
  std::vector<std::vector<double>> vectors;
  EmbeddingSource source = EmbeddingSource::own_model;

  std::size_t size() const { return vectors.size(); }
};

double cosine(std::span<const double> u, std::span<const double> v);

// S(A,B) = mean_i cosine(A_i, B_i), over the sets in the given order; the
// diagonal is 1 and S is symmetric by construction.
Matrix similarity_matrix(const std::vector<EmbeddingSet>& sets);

// Mean-pooled final hidden states of `sentences` under a frozen model.
std::vector<std::vector<double>> sentence_embeddings(const Model& model, const Vocab& vocab,
                                                     std::span<const std::string> sentences);
EmbeddingSet embed_corpus(const Model& model, const Vocab& vocab, const Corpus& corpus);

double pearson(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks (ties share their mean rank).
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> x);

struct RowComparison {
  std::string code;
  std::vector<std::string> partners;
  std::vector<double> similarity;
  std::vector<double> interference;
  double pearson = 0.0;
  double spearman = 0.0;
};

// Correlates the off-diagonal present entries of row `code` of I and S.
RowComparison row_compare(const Matrix& im, const Matrix& sim, std::string_view code);
std::string to_csv(const RowComparison& row);

// "emb v1 <code> <M> <d>" then M lines of d space-separated reals.
std::string serialize(const EmbeddingSet& set);
EmbeddingSet parse_embeddings(std::string_view text);
EmbeddingSet load_external_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

}  // namespace ifx
