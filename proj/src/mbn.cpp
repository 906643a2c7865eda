#include "dnmf/mbn.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "dnmf/error.hpp"
#include "dnmf/rng.hpp"

#include <nlohmann/json.hpp>

namespace dnmf {

namespace {
using json = nlohmann::ordered_json;
}

void MbnConfig::validate() const {
  if (clusterings_per_layer < 1) throw ValidationError("clusterings per layer must be >= 1");
  if (!(delta >= 0.0 && delta < 1.0)) throw ValidationError("delta must be in [0, 1)");
  if (topics < 2) throw ValidationError("topics must be >= 2");
  if (k_top && *k_top < 1) throw ValidationError("k_top must be >= 1");
  if (n_smallest && *n_smallest < 1) throw ValidationError("n_smallest must be >= 1");
}

std::vector<int> layer_widths(int n_docs, int topics, double delta, bool imbalanced,
                              std::optional<int> n_smallest, std::optional<int> k_top) {
  if (n_docs <= 2 * topics) {
    throw ValidationError("corpus too small for MBN schedule: need docs > 2*topics, got " +
                          std::to_string(n_docs) + " docs for " + std::to_string(topics) +
                          " topics");
  }
  const int k1 = n_docs / 2;
  int terminal;
  if (k_top) {
    terminal = *k_top;
  } else if (imbalanced && n_smallest) {
    terminal = 30 * ((n_docs + *n_smallest - 1) / *n_smallest);
  } else if (imbalanced) {
    terminal = 300;
  } else {
    terminal = static_cast<int>(std::ceil(1.5 * topics));
  }
  terminal = std::min(terminal, k1);  // the first layer is the widest possible

  std::vector<int> widths;
  int k = k1;
  while (k >= terminal) {
    widths.push_back(k);
    if (k == terminal) break;
    k = static_cast<int>(std::floor(delta * k));
  }
  if (widths.empty()) widths.push_back(terminal);
  return widths;
}

DenseMatrix cosine_gram(const SparseMatrix& x) {
  return cosine_gram(x.to_dense());
}

DenseMatrix cosine_gram(const DenseMatrix& x) {
  const DenseMatrix normalized = columns_l2_normalized(x);
  return matmul_at_b(normalized, normalized);
}

DenseMatrix agreement_gram(const std::vector<std::uint32_t>& assignments,
                           int clusterings, int n_docs) {
  DenseMatrix gram(n_docs, n_docs);
  for (int m = 0; m < clusterings; ++m) {
    const std::uint32_t* row = assignments.data() + static_cast<std::size_t>(m) * n_docs;
    for (int j = 0; j < n_docs; ++j) {
      const std::uint32_t aj = row[j];
      for (int i = 0; i <= j; ++i) {
        if (row[i] == aj) gram(i, j) += 1.0;
      }
    }
  }
  const double inv = 1.0 / clusterings;
  for (int j = 0; j < n_docs; ++j) {
    for (int i = 0; i <= j; ++i) {
      const double v = gram(i, j) * inv;
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  return gram;
}

namespace {

std::vector<std::uint32_t> assign_against_gram(const DenseMatrix& gram,
                                               const std::vector<std::vector<int>>& centroids,
                                               int n_docs) {
  const int m_count = static_cast<int>(centroids.size());
  std::vector<std::uint32_t> assignments(static_cast<std::size_t>(m_count) * n_docs, 0);
  for (int m = 0; m < m_count; ++m) {
    const std::vector<int>& cent = centroids[m];
    std::uint32_t* row = assignments.data() + static_cast<std::size_t>(m) * n_docs;
    for (int j = 0; j < n_docs; ++j) {
      int best = 0;
      double best_sim = gram(cent[0], j);
      for (int c = 1; c < static_cast<int>(cent.size()); ++c) {
        const double s = gram(cent[c], j);
        if (s > best_sim) {
          best_sim = s;
          best = c;
        }
      }
      row[j] = static_cast<std::uint32_t>(best);
    }
  }
  return assignments;
}

}  // namespace

LayerResult train_layer(const DenseMatrix& gram, int width, int clusterings,
                        std::uint64_t seed, int layer_index) {
  const int n_docs = gram.cols();
  if (width > n_docs) {
    throw ValidationError("layer width " + std::to_string(width) + " exceeds " +
                          std::to_string(n_docs) + " documents");
  }
  if (width < 1) throw ValidationError("layer width must be >= 1");
  LayerResult out;
  out.layer.width = width;
  out.layer.centroid_docs.resize(clusterings);
  for (int m = 0; m < clusterings; ++m) {
    Rng rng(derive_seed(seed, "mbn-layer", static_cast<std::uint64_t>(layer_index),
                        static_cast<std::uint64_t>(m)));
    out.layer.centroid_docs[m] = rng.sample_without_replacement(n_docs, width);
  }
  out.assignments = assign_against_gram(gram, out.layer.centroid_docs, n_docs);
  return out;
}

SparseMatrix layer_output_matrix(const LayerResult& layer, int n_docs) {
  const int m_count = static_cast<int>(layer.layer.centroid_docs.size());
  const int k = layer.layer.width;
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(m_count) * n_docs);
  for (int m = 0; m < m_count; ++m) {
    const std::uint32_t* row =
        layer.assignments.data() + static_cast<std::size_t>(m) * n_docs;
    for (int j = 0; j < n_docs; ++j) {
      triplets.push_back({m * k + static_cast<int>(row[j]), j, 1.0});
    }
  }
  return SparseMatrix(m_count * k, n_docs, std::move(triplets));
}

MbnOutput mbn_transform(const SparseMatrix& D, const MbnConfig& cfg) {
  cfg.validate();
  const int n_docs = D.cols();
  MbnOutput out;
  out.widths = layer_widths(n_docs, cfg.topics, cfg.delta, cfg.imbalanced,
                            cfg.n_smallest, cfg.k_top);
  out.model.seed = cfg.seed;
  out.model.clusterings = cfg.clusterings_per_layer;
  out.model.n_docs = n_docs;

  DenseMatrix gram = cosine_gram(D);
  for (std::size_t l = 0; l < out.widths.size(); ++l) {
    LayerResult layer = train_layer(gram, out.widths[l], cfg.clusterings_per_layer,
                                    cfg.seed, static_cast<int>(l));
    if (l + 1 < out.widths.size()) {
      gram = agreement_gram(layer.assignments, cfg.clusterings_per_layer, n_docs);
    }
    out.model.layers.push_back(layer.layer);
    out.top = std::move(layer);
  }
  return out;
}

MbnOutput mbn_apply(const SparseMatrix& D, const MbnModel& model) {
  if (D.cols() != model.n_docs) {
    throw ValidationError("model was trained on " + std::to_string(model.n_docs) +
                          " documents, corpus has " + std::to_string(D.cols()));
  }
  MbnOutput out;
  out.model = model;
  DenseMatrix gram = cosine_gram(D);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    LayerResult layer;
    layer.layer = model.layers[l];
    layer.assignments =
        assign_against_gram(gram, layer.layer.centroid_docs, model.n_docs);
    if (l + 1 < model.layers.size()) {
      gram = agreement_gram(layer.assignments, model.clusterings, model.n_docs);
    }
    out.widths.push_back(layer.layer.width);
    out.top = std::move(layer);
  }
  return out;
}

ClusterIndicator indicator_from_labels(const std::vector<int>& labels, int topics) {
  ClusterIndicator out;
  out.labels = labels;
  out.onehot = DenseMatrix(topics, static_cast<int>(labels.size()));
  std::vector<int> counts(topics, 0);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    out.onehot(labels[j], static_cast<int>(j)) = 1.0;
    ++counts[labels[j]];
  }
  for (int k = 0; k < topics; ++k) {
    if (counts[k] == 0) out.empty_rows.push_back(k);
  }
  return out;
}

namespace {

struct KmeansResult {
  std::vector<int> labels;
  double within_ss = std::numeric_limits<double>::infinity();
  bool has_empty = true;
};

// Points are rows of `points`. Greedy farthest-point init from a seeded
// starting row, then Lloyd iterations.
KmeansResult kmeans_once(const DenseMatrix& points, int k, std::uint64_t seed) {
  const int n = points.rows();
  const int dim = points.cols();
  Rng rng(seed);

  std::vector<std::vector<double>> centers(k, std::vector<double>(dim, 0.0));
  const auto dist_sq_to = [&](int row, const std::vector<double>& center) {
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff = points(row, d) - center[d];
      acc += diff * diff;
    }
    return acc;
  };

  const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  for (int d = 0; d < dim; ++d) centers[0][d] = points(first, d);
  std::vector<double> min_dist(n);
  for (int i = 0; i < n; ++i) min_dist[i] = dist_sq_to(i, centers[0]);
  for (int c = 1; c < k; ++c) {
    int farthest = 0;
    for (int i = 1; i < n; ++i) {
      if (min_dist[i] > min_dist[farthest]) farthest = i;
    }
    for (int d = 0; d < dim; ++d) centers[c][d] = points(farthest, d);
    for (int i = 0; i < n; ++i) min_dist[i] = std::min(min_dist[i], dist_sq_to(i, centers[c]));
  }

  std::vector<int> labels(n, -1);
  std::vector<int> counts(k, 0);
  for (int pass = 0; pass < 100; ++pass) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist_sq_to(i, centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = dist_sq_to(i, centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < k; ++c) {
      std::fill(centers[c].begin(), centers[c].end(), 0.0);
      counts[c] = 0;
    }
    for (int i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (int d = 0; d < dim; ++d) centers[labels[i]][d] += points(i, d);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster: keep the stale center
      for (int d = 0; d < dim; ++d) centers[c][d] /= counts[c];
    }
  }

  KmeansResult out;
  out.labels = labels;
  out.within_ss = 0.0;
  for (int i = 0; i < n; ++i) out.within_ss += dist_sq_to(i, centers[labels[i]]);
  std::fill(counts.begin(), counts.end(), 0);
  for (int lab : labels) ++counts[lab];
  out.has_empty = std::any_of(counts.begin(), counts.end(), [](int c) { return c == 0; });
  return out;
}

}  // namespace

ClusterIndicator spectral_cluster_gram(const DenseMatrix& affinity, int topics,
                                       std::uint64_t seed) {
  const int n = affinity.cols();
  if (affinity.rows() != n) {
    throw ValidationError("affinity must be square, got " + affinity.shape_str());
  }
  if (topics > n) {
    throw ValidationError("topics=" + std::to_string(topics) + " exceeds " +
                          std::to_string(n) + " documents");
  }
  if (topics < 1) throw ValidationError("topics must be >= 1");

  // Symmetric normalized Laplacian embedding: top eigenvectors of
  // Deg^{-1/2} A Deg^{-1/2}.
  Eigen::MatrixXd b(n, n);
  std::vector<double> inv_sqrt_deg(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) deg += affinity(i, j);
    inv_sqrt_deg[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      b(i, j) = affinity(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) {
    throw ComputeError("eigendecomposition failed in spectral clustering");
  }

  DenseMatrix embedding(n, topics);  // rows are documents
  for (int c = 0; c < topics; ++c) {
    const auto col = solver.eigenvectors().col(n - 1 - c);
    for (int i = 0; i < n; ++i) embedding(i, c) = col(i);
  }
  for (int i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    for (int c = 0; c < topics; ++c) norm_sq += embedding(i, c) * embedding(i, c);
    if (norm_sq <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int c = 0; c < topics; ++c) embedding(i, c) *= inv;
  }

  for (int attempt = 0; attempt < 5; ++attempt) {
    KmeansResult best;
    for (int restart = 0; restart < 10; ++restart) {
      KmeansResult run = kmeans_once(
          embedding, topics,
          derive_seed(seed, "kmeans", static_cast<std::uint64_t>(attempt),
                      static_cast<std::uint64_t>(restart)));
      const bool better = (!run.has_empty && best.has_empty) ||
                          (run.has_empty == best.has_empty && run.within_ss < best.within_ss);
      if (better) best = run;
    }
    if (!best.has_empty) return indicator_from_labels(best.labels, topics);
  }
  throw ComputeError("k-means produced an empty cluster in every attempt");
}

ClusterIndicator spectral_cluster(const DenseMatrix& x, int topics, std::uint64_t seed) {
  return spectral_cluster_gram(cosine_gram(x), topics, seed);
}

ClusterIndicator spectral_cluster(const SparseMatrix& x, int topics, std::uint64_t seed) {
  return spectral_cluster_gram(cosine_gram(x), topics, seed);
}

ClusterIndicator mbn_cluster(const SparseMatrix& D, const MbnConfig& cfg,
                             MbnOutput* out_model) {
  MbnOutput output = mbn_transform(D, cfg);
  const DenseMatrix gram =
      agreement_gram(output.top.assignments, cfg.clusterings_per_layer, D.cols());
  ClusterIndicator indicator =
      spectral_cluster_gram(gram, cfg.topics, derive_seed(cfg.seed, "spectral"));
  if (out_model != nullptr) *out_model = std::move(output);
  return indicator;
}

void save_mbn_model(const std::filesystem::path& path, const MbnModel& model) {
  json j;
  j["format"] = "mbn-model";
  j["version"] = 1;
  j["seed"] = model.seed;
  j["clusterings"] = model.clusterings;
  j["n_docs"] = model.n_docs;
  j["layers"] = json::array();
  for (const MbnLayer& layer : model.layers) {
    json jl;
    jl["width"] = layer.width;
    jl["centroid_docs"] = layer.centroid_docs;
    j["layers"].push_back(std::move(jl));
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

MbnModel load_mbn_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed model file " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "mbn-model" || j.value("version", 0) != 1) {
    throw ValidationError("unrecognized model format in " + path.string());
  }
  MbnModel model;
  model.seed = j.at("seed").get<std::uint64_t>();
  model.clusterings = j.at("clusterings").get<int>();
  model.n_docs = j.at("n_docs").get<int>();
  for (const json& jl : j.at("layers")) {
    MbnLayer layer;
    layer.width = jl.at("width").get<int>();
    layer.centroid_docs = jl.at("centroid_docs").get<std::vector<std::vector<int>>>();
    model.layers.push_back(std::move(layer));
  }
  return model;
}

}  // namespace dnmf
