#pragma once

#include <utility>
#include <vector>

#include "dnmf/corpus.hpp"
#include "dnmf/matrix.hpp"

namespace dnmf {

/// Per-topic ranked word lists taken from the columns of C.
struct TopicWords {
  int n_words = 20;
  // topics[k] is a list of (word index, weight), weights non-increasing,
  // ties broken by the lower word index.
  std::vector<std::vector<std::pair<int, double>>> topics;
};

TopicWords top_words(const DenseMatrix& word_topic, int n_words);

/// Hungarian-matched clustering accuracy. Label values may be arbitrary
/// ints; the contingency table is built over the distinct values present.
double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& gold);

/// Minimum-cost assignment on a square cost matrix (O(n^3) potentials).
/// Returns the column matched to each row.
std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost);

enum class CoherencePairMode {
  kRankedPairs,        // v1 ranked strictly above v2
  kAllOrderedDistinct  // every ordered pair of distinct words
};

/// Sum over word pairs of ln((pair_freq + eps) / freq(v2)); pairs with
/// freq(v2) = 0 are skipped.
double coherence(const std::vector<std::pair<int, double>>& topic, const CoocTable& stats,
                 double eps = 0.01, CoherencePairMode mode = CoherencePairMode::kRankedPairs);

struct SimilarityCount {
  long total = 0;
  // (topic a, topic b, shared leading words) for a < b
  std::vector<std::tuple<int, int, int>> pairs;
};

SimilarityCount similarity_count(const TopicWords& topics, int n_words);

}  // namespace dnmf
