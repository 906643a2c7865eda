#include "dnmf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "dnmf/error.hpp"

namespace dnmf {

TopicWords top_words(const DenseMatrix& word_topic, int n_words) {
  if (n_words < 1 || n_words > word_topic.rows()) {
    throw ValidationError("n_words must be in [1, vocabulary size]");
  }
  TopicWords out;
  out.n_words = n_words;
  out.topics.resize(word_topic.cols());
  std::vector<int> order(word_topic.rows());
  for (int k = 0; k < word_topic.cols(); ++k) {
    for (int i = 0; i < word_topic.rows(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double wa = word_topic(a, k), wb = word_topic(b, k);
      return wa != wb ? wa > wb : a < b;
    });
    out.topics[k].reserve(n_words);
    for (int r = 0; r < n_words; ++r) {
      out.topics[k].emplace_back(order[r], word_topic(order[r], k));
    }
  }
  return out;
}

std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  // Potentials + shortest augmenting path; 1-indexed internals.
  const int n = static_cast<int>(cost.size());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);  // match[column] = row
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> min_v(n + 1, kInf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < min_v[j]) {
          min_v[j] = cur;
          way[j] = j0;
        }
        if (min_v[j] < delta) {
          delta = min_v[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          min_v[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("label vectors differ in length: " + std::to_string(pred.size()) +
                          " vs " + std::to_string(gold.size()));
  }
  if (pred.empty()) throw ValidationError("empty label vectors");

  const auto compress = [](const std::vector<int>& labels) {
    std::map<int, int> index;
    for (int l : labels) index.emplace(l, 0);
    int next = 0;
    for (auto& [label, idx] : index) idx = next++;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = index.at(labels[i]);
    return std::pair(out, next);
  };
  const auto [p, kp] = compress(pred);
  const auto [g, kg] = compress(gold);
  const int k = std::max(kp, kg);

  std::vector<std::vector<double>> agreement(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < p.size(); ++i) agreement[p[i]][g[i]] += 1.0;

  // Maximize agreement = minimize (max_entry - agreement); the zero padding
  // from rectangular tables is already in place.
  double top = 0.0;
  for (const auto& row : agreement)
    for (double a : row) top = std::max(top, a);
  std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) cost[i][j] = top - agreement[i][j];

  const std::vector<int> row_to_col = min_cost_assignment(cost);
  double matched = 0.0;
  for (int i = 0; i < k; ++i) matched += agreement[i][row_to_col[i]];
  return matched / static_cast<double>(p.size());
}

double coherence(const std::vector<std::pair<int, double>>& topic, const CoocTable& stats,
                 double eps, CoherencePairMode mode) {
  if (topic.empty()) throw ValidationError("coherence needs at least one topic word");
  double total = 0.0;
  const int n = static_cast<int>(topic.size());
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      if (mode == CoherencePairMode::kRankedPairs && a > b) continue;
      const int v1 = topic[a].first;
      const int v2 = topic[b].first;
      const double f2 = stats.freq(v2);
      if (f2 <= 0.0) continue;
      total += std::log((stats.pair_freq(v1, v2) + eps) / f2);
    }
  }
  return total;
}

SimilarityCount similarity_count(const TopicWords& topics, int n_words) {
  const int k = static_cast<int>(topics.topics.size());
  if (k < 2) throw ValidationError("similarity count needs at least two topics");
  std::vector<std::set<int>> leading(k);
  for (int t = 0; t < k; ++t) {
    const int depth = std::min<int>(n_words, static_cast<int>(topics.topics[t].size()));
    for (int r = 0; r < depth; ++r) leading[t].insert(topics.topics[t][r].first);
  }
  SimilarityCount out;
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      int shared = 0;
      for (int w : leading[a]) shared += leading[b].count(w) > 0 ? 1 : 0;
      out.pairs.emplace_back(a, b, shared);
      out.total += shared;
    }
  }
  return out;
}

}  // namespace dnmf
