#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dnmf/matrix.hpp"

namespace dnmf {

struct MbnConfig {
  int clusterings_per_layer = 400;  // M
  double delta = 0.5;               // layer-width decay in [0, 1)
  std::optional<int> k_top;         // smallest-layer width override
  int topics = 2;                   // K
  std::uint64_t seed = 0;
  bool imbalanced = false;
  std::optional<int> n_smallest;    // size of the smallest class, if known

  void validate() const;
};

/// Geometric layer-width schedule: k_1 = floor(N/2), k_l = floor(delta*k_{l-1}),
/// truncated at the terminal width (1.5K balanced; 30*ceil(N/n_smallest) or a
/// 300 cap when imbalanced), itself clamped to floor(N/2).
std::vector<int> layer_widths(int n_docs, int topics, double delta, bool imbalanced,
                              std::optional<int> n_smallest,
                              std::optional<int> k_top = std::nullopt);

/// One trained layer: M independent k-centroids clusterings whose centroids
/// are copies of input columns, referenced by column index.
struct MbnLayer {
  int width = 0;
  std::vector<std::vector<int>> centroid_docs;  // M lists of k column indices
};

struct MbnModel {
  std::uint64_t seed = 0;
  int clusterings = 0;
  int n_docs = 0;
  std::vector<MbnLayer> layers;
};

/// Assignments of a layer: entry (m, j) is the centroid slot (0..k-1) that
/// document j landed on in clustering m, i.e. the layer output is the stack
/// of M one-hot blocks.
struct LayerResult {
  MbnLayer layer;
  std::vector<std::uint32_t> assignments;  // M x N, row-major by clustering
};

/// Pairwise cosine similarities between the columns of the layer input.
/// Zero columns score 0 against everything.
DenseMatrix cosine_gram(const SparseMatrix& x);
DenseMatrix cosine_gram(const DenseMatrix& x);

/// Cosine gram of a one-hot-stacked layer output: agreement fraction.
DenseMatrix agreement_gram(const std::vector<std::uint32_t>& assignments,
                           int clusterings, int n_docs);

/// Trains one layer against a precomputed similarity gram. Centroids are
/// sampled without replacement per clustering on streams keyed by
/// (seed, layer, clustering); assignment maximizes similarity, ties to the
/// lowest centroid slot.
LayerResult train_layer(const DenseMatrix& gram, int width, int clusterings,
                        std::uint64_t seed, int layer_index);

/// Materializes the (M*k) x N one-hot output of a layer.
SparseMatrix layer_output_matrix(const LayerResult& layer, int n_docs);

struct MbnOutput {
  MbnModel model;
  std::vector<int> widths;
  LayerResult top;  // last layer's clusterings and assignments
};

/// Runs the full layer stack; layer 1 consumes D, deeper layers consume the
/// previous layer's one-hot output, cosine similarity throughout.
MbnOutput mbn_transform(const SparseMatrix& D, const MbnConfig& cfg);

/// Re-applies a trained model deterministically (used to recompute f(D)).
MbnOutput mbn_apply(const SparseMatrix& D, const MbnModel& model);

struct ClusterIndicator {
  DenseMatrix onehot;            // K x N, one-hot columns
  std::vector<int> labels;       // per-document cluster id
  std::vector<int> empty_rows;   // clusters that received no documents
};

ClusterIndicator indicator_from_labels(const std::vector<int>& labels, int topics);

/// Linear-kernel spectral clustering: columns unit-normalized, affinity XᵀX,
/// symmetric-normalized Laplacian embedding, row renormalization, seeded
/// k-means (greedy farthest-point init, 10 restarts).
ClusterIndicator spectral_cluster(const DenseMatrix& x, int topics, std::uint64_t seed);
ClusterIndicator spectral_cluster(const SparseMatrix& x, int topics, std::uint64_t seed);
/// Same head applied to a precomputed affinity (cosine gram).
ClusterIndicator spectral_cluster_gram(const DenseMatrix& affinity, int topics,
                                       std::uint64_t seed);

/// Full f(D): MBN stack then the spectral head on the top-layer cosine gram.
ClusterIndicator mbn_cluster(const SparseMatrix& D, const MbnConfig& cfg,
                             MbnOutput* out_model = nullptr);

void save_mbn_model(const std::filesystem::path& path, const MbnModel& model);
MbnModel load_mbn_model(const std::filesystem::path& path);

}  // namespace dnmf
