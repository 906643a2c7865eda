#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dnmf/matrix.hpp"

namespace dnmf {

enum class CorpusFormat { kJsonl, kDirPerClass, kMatrixMarket };

CorpusFormat parse_format(const std::string& name);
std::string to_string(CorpusFormat format);

struct Document {
  std::string id;
  std::optional<std::string> label;
  // Aggregated term counts; token order is irrelevant downstream.
  std::vector<std::pair<std::string, double>> term_counts;
};

struct Corpus {
  std::vector<Document> documents;  // sorted lexicographically by id
  // Vocabulary order fixed by a sidecar file (MatrixMarket variant);
  // otherwise the vocabulary is sorted lexicographically at build time.
  std::optional<std::vector<std::string>> fixed_vocab;

  int size() const { return static_cast<int>(documents.size()); }
  bool has_labels() const;
  /// Dense integer labels by sorted label name. Errors if any document is
  /// unlabeled: accuracy refuses to guess.
  std::vector<int> gold_labels() const;
  std::vector<std::string> label_names() const;
};

/// Lowercases, splits on non-alphanumerics, drops tokens shorter than 2.
std::vector<std::string> tokenize(const std::string& text);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

struct Vocabulary {
  std::vector<std::string> words;
  std::unordered_map<std::string, int> index;
  std::vector<int> doc_freq;

  int size() const { return static_cast<int>(words.size()); }
};

/// The document-word matrices: raw counts, TF-IDF weights (tf * ln(N/df),
/// zero-idf words dropped), and binary occurrence for coherence counting.
struct TermStats {
  Vocabulary vocab;
  SparseMatrix counts;
  SparseMatrix tfidf;
  SparseMatrix binary;
};

TermStats build_term_stats(const Corpus& corpus, int min_df,
                           const std::vector<std::string>* stopwords = nullptr);

SparseMatrix build_tfidf(const Corpus& corpus, int min_df);

/// Document frequencies of single words and word pairs, counted on binary
/// occurrence over the requested word set.
class CoocTable {
 public:
  CoocTable(const SparseMatrix& binary, const std::vector<int>& words);

  double freq(int word) const;
  double pair_freq(int w1, int w2) const;

 private:
  std::unordered_map<int, int> local_;
  std::vector<double> single_;
  std::vector<double> pair_;  // dense upper-triangular over the local set
  int count_ = 0;
};

CoocTable cooccurrence_stats(const SparseMatrix& binary, const std::vector<int>& words);

}  // namespace dnmf
