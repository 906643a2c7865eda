#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <set>

#include "dnmf/error.hpp"
#include "dnmf/matrix.hpp"
#include "dnmf/mbn.hpp"
#include "dnmf/rng.hpp"

using namespace dnmf;

namespace {

SparseMatrix two_class_corpus(int docs_per_class, int words_per_class,
                              std::uint64_t seed, double density = 0.9) {
  // Orthogonal word supports: class c draws only from its own word block.
  Rng rng(seed);
  std::vector<Triplet> triplets;
  const int n = 2 * docs_per_class;
  const int v = 2 * words_per_class;
  for (int j = 0; j < n; ++j) {
    const int cls = j < docs_per_class ? 0 : 1;
    for (int w = 0; w < words_per_class; ++w) {
      if (rng.uniform() < density) {
        triplets.push_back({cls * words_per_class + w, j, rng.uniform(0.2, 2.0)});
      }
    }
  }
  return SparseMatrix(v, n, triplets);
}

}  // namespace

TEST_CASE("layer_widths follows the halving schedule down to the terminal width") {
  CHECK(layer_widths(1000, 20, 0.5, false, std::nullopt) ==
        std::vector<int>{500, 250, 125, 62, 31});
  CHECK(layer_widths(100, 3, 0.5, false, std::nullopt) == std::vector<int>{50, 25, 12, 6});
  CHECK(layer_widths(1000, 20, 0.0, false, std::nullopt) == std::vector<int>{500});
  CHECK_THROWS_AS(layer_widths(40, 20, 0.5, false, std::nullopt), ValidationError);
}

TEST_CASE("layer_widths imbalanced branches") {
  // known smallest class: terminal width 30 * ceil(N / n_smallest) = 300,
  // and the schedule stops before decaying below it
  CHECK(layer_widths(1000, 5, 0.5, true, 100) == std::vector<int>{500});
  CHECK(layer_widths(1000, 5, 0.7, true, 100) == std::vector<int>{500, 350});
  // unknown smallest class: 300 capped at floor(N/2)
  CHECK(layer_widths(400, 5, 0.5, true, std::nullopt) == std::vector<int>{200});
  CHECK(layer_widths(2000, 5, 0.5, true, std::nullopt) == std::vector<int>{1000, 500});
  // k_top override wins
  CHECK(layer_widths(100, 3, 0.5, false, std::nullopt, 10) == std::vector<int>{50, 25, 12});
}

TEST_CASE("layer_widths recursion property on random inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int topics = 2 + static_cast<int>(rng.below(10));
    const int n = 2 * topics + 1 + static_cast<int>(rng.below(3000));
    const double delta = rng.uniform(0.0, 0.95);
    const auto widths = layer_widths(n, topics, delta, false, std::nullopt);
    REQUIRE(!widths.empty());
    CHECK(widths[0] == n / 2);
    const int terminal =
        std::min(static_cast<int>(std::ceil(1.5 * topics)), n / 2);
    for (std::size_t l = 1; l < widths.size(); ++l) {
      CHECK(widths[l] == static_cast<int>(std::floor(delta * widths[l - 1])));
      CHECK(widths[l] < widths[l - 1]);
    }
    for (int w : widths) CHECK(w >= terminal);
    // maximal: one more decay step would cross the terminal width
    if (widths.back() != terminal) {
      CHECK(static_cast<int>(std::floor(delta * widths.back())) < terminal);
    }
  }
}

TEST_CASE("train_layer: identical columns collapse onto the first centroid") {
  // All-equal gram: every similarity ties, lowest centroid slot wins.
  const DenseMatrix gram = DenseMatrix::constant(6, 6, 1.0);
  const LayerResult layer = train_layer(gram, 3, 4, 99, 0);
  for (int m = 0; m < 4; ++m)
    for (int j = 0; j < 6; ++j)
      CHECK(layer.assignments[static_cast<std::size_t>(m) * 6 + j] == 0);
}

TEST_CASE("train_layer: k = N with distinct directions is a permutation") {
  // distinct orthogonal-ish columns: self-similarity strictly maximal
  const int n = 8;
  std::vector<Triplet> triplets;
  for (int j = 0; j < n; ++j) triplets.push_back({j, j, 1.0});
  const SparseMatrix x(n, n, triplets);
  const DenseMatrix gram = cosine_gram(x);
  const LayerResult layer = train_layer(gram, n, 1, 5, 0);
  const SparseMatrix out = layer_output_matrix(layer, n);
  // each document hits its own centroid: exactly one 1 per column and the
  // mapped rows form a permutation of the centroid slots
  std::set<int> used;
  for (int j = 0; j < n; ++j) used.insert(static_cast<int>(layer.assignments[j]));
  CHECK(used.size() == static_cast<std::size_t>(n));
}

TEST_CASE("layer output columns have exactly M ones") {
  const SparseMatrix d = two_class_corpus(12, 10, 123);
  const DenseMatrix gram = cosine_gram(d);
  const int m_count = 7;
  const LayerResult layer = train_layer(gram, 5, m_count, 42, 0);
  const SparseMatrix out = layer_output_matrix(layer, d.cols());
  CHECK(out.rows() == 5 * m_count);
  std::vector<int> per_column(d.cols(), 0);
  for (const Triplet& t : out.triplets()) {
    CHECK(t.value == 1.0);
    ++per_column[t.col];
  }
  for (int count : per_column) CHECK(count == m_count);
  CHECK_THROWS_AS(train_layer(gram, d.cols() + 1, 2, 0, 0), ValidationError);
}

TEST_CASE("mbn_transform: deterministic, separates orthogonal classes") {
  const SparseMatrix d = two_class_corpus(20, 12, 321);
  MbnConfig cfg;
  cfg.clusterings_per_layer = 100;
  cfg.delta = 0.5;
  cfg.topics = 2;
  cfg.seed = 7;
  const MbnOutput a = mbn_transform(d, cfg);
  const MbnOutput b = mbn_transform(d, cfg);
  CHECK(a.widths == b.widths);
  CHECK(a.top.assignments == b.top.assignments);

  // within-class cosine of the top representation exceeds between-class
  const DenseMatrix gram =
      agreement_gram(a.top.assignments, cfg.clusterings_per_layer, d.cols());
  double min_within = 1.0, max_between = 0.0;
  for (int i = 0; i < d.cols(); ++i) {
    for (int j = i + 1; j < d.cols(); ++j) {
      const bool same = (i < 20) == (j < 20);
      if (same) min_within = std::min(min_within, gram(i, j));
      else max_between = std::max(max_between, gram(i, j));
    }
  }
  CHECK(min_within > max_between);
}

TEST_CASE("single-layer config has output dimension M * floor(N/2)") {
  const SparseMatrix d = two_class_corpus(10, 8, 55);
  MbnConfig cfg;
  cfg.clusterings_per_layer = 9;
  cfg.delta = 0.0;
  cfg.topics = 2;
  cfg.seed = 1;
  const MbnOutput out = mbn_transform(d, cfg);
  REQUIRE(out.widths.size() == 1);
  const SparseMatrix top = layer_output_matrix(out.top, d.cols());
  CHECK(top.rows() == 9 * (d.cols() / 2));
}

TEST_CASE("spectral_cluster recovers well-separated blocks exactly") {
  // Three blocks with high internal affinity and none across.
  const int sizes[3] = {5, 7, 6};
  const int n = 18;
  DenseMatrix x(3, n);
  Rng rng(88);
  int col = 0;
  std::vector<int> truth(n);
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < sizes[b]; ++i, ++col) {
      truth[col] = b;
      x(b, col) = rng.uniform(0.5, 1.0);  // one-dimensional block support
    }
  }
  const ClusterIndicator ind = spectral_cluster(x, 3, 77);
  REQUIRE(static_cast<int>(ind.labels.size()) == n);
  // same block <=> same label
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK((truth[i] == truth[j]) == (ind.labels[i] == ind.labels[j]));
  // one-hot columns
  for (int j = 0; j < n; ++j) {
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) sum += ind.onehot(k, j);
    CHECK(sum == 1.0);
    CHECK(ind.onehot(ind.labels[j], j) == 1.0);
  }
  CHECK(ind.empty_rows.empty());
}

TEST_CASE("spectral_cluster rejects more clusters than documents") {
  const DenseMatrix x = DenseMatrix::constant(2, 3, 1.0);
  CHECK_THROWS_AS(spectral_cluster(x, 4, 0), ValidationError);
}

TEST_CASE("spectral_cluster: K=1 and duplicate documents") {
  DenseMatrix x(2, 5);
  for (int j = 0; j < 5; ++j) {
    x(0, j) = 1.0;
    x(1, j) = 0.5;
  }
  const ClusterIndicator all_one = spectral_cluster(x, 1, 3);
  for (int lab : all_one.labels) CHECK(lab == 0);

  DenseMatrix y(2, 6);
  y(0, 0) = 1.0; y(0, 1) = 1.0;          // duplicates
  y(1, 2) = 1.0; y(1, 3) = 1.0;          // duplicates
  y(0, 4) = 1.0; y(1, 4) = 0.02;
  y(0, 5) = 0.02; y(1, 5) = 1.0;
  const ClusterIndicator ind = spectral_cluster(y, 2, 4);
  CHECK(ind.labels[0] == ind.labels[1]);
  CHECK(ind.labels[2] == ind.labels[3]);
}

TEST_CASE("spectral_cluster labels follow column permutations on separated data") {
  const SparseMatrix d = two_class_corpus(10, 8, 99);
  const ClusterIndicator base = spectral_cluster(d, 2, 11);
  // reverse the column order
  std::vector<Triplet> reversed;
  for (const Triplet& t : d.triplets()) {
    reversed.push_back({t.row, d.cols() - 1 - t.col, t.value});
  }
  const ClusterIndicator flipped =
      spectral_cluster(SparseMatrix(d.rows(), d.cols(), reversed), 2, 11);
  // the partition must match under the same permutation, up to label names
  const int n = d.cols();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK((base.labels[i] == base.labels[j]) ==
            (flipped.labels[n - 1 - i] == flipped.labels[n - 1 - j]));
}

TEST_CASE("mbn model round-trips through JSON and reproduces f(D)") {
  const SparseMatrix d = two_class_corpus(15, 10, 141);
  MbnConfig cfg;
  cfg.clusterings_per_layer = 20;
  cfg.topics = 2;
  cfg.seed = 9;
  MbnOutput model_out;
  const ClusterIndicator ind = mbn_cluster(d, cfg, &model_out);

  const auto dir = std::filesystem::temp_directory_path() / "dnmf_mbn_model";
  std::filesystem::create_directories(dir);
  save_mbn_model(dir / "model.json", model_out.model);
  const MbnModel loaded = load_mbn_model(dir / "model.json");
  CHECK(loaded.seed == model_out.model.seed);
  REQUIRE(loaded.layers.size() == model_out.model.layers.size());

  const MbnOutput replay = mbn_apply(d, loaded);
  CHECK(replay.top.assignments == model_out.top.assignments);
}

TEST_CASE("mbn_cluster on orthogonal classes is a perfect two-class split") {
  const SparseMatrix d = two_class_corpus(16, 12, 151);
  MbnConfig cfg;
  cfg.clusterings_per_layer = 25;
  cfg.topics = 2;
  cfg.seed = 13;
  const ClusterIndicator ind = mbn_cluster(d, cfg);
  for (int j = 1; j < 16; ++j) CHECK(ind.labels[j] == ind.labels[0]);
  for (int j = 17; j < 32; ++j) CHECK(ind.labels[j] == ind.labels[16]);
  CHECK(ind.labels[0] != ind.labels[16]);
}
