#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "dnmf/corpus.hpp"
#include "dnmf/error.hpp"
#include "dnmf/harness.hpp"
#include "dnmf/matrix.hpp"
#include "dnmf/mbn.hpp"
#include "dnmf/metrics.hpp"
#include "dnmf/solvers.hpp"

namespace py = pybind11;

namespace {

dnmf::DenseMatrix dense_from_numpy(const py::array_t<double>& array) {
  const auto buf = array.request();
  if (buf.ndim != 2) throw dnmf::ValidationError("expected a 2-D array");
  dnmf::DenseMatrix m(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]));
  const auto view = array.unchecked<2>();
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) m(i, j) = view(i, j);
  return m;
}

dnmf::SparseMatrix sparse_from_numpy(const py::array_t<double>& array) {
  const auto buf = array.request();
  if (buf.ndim != 2) throw dnmf::ValidationError("expected a 2-D array");
  const auto view = array.unchecked<2>();
  std::vector<dnmf::Triplet> triplets;
  for (int j = 0; j < static_cast<int>(buf.shape[1]); ++j)
    for (int i = 0; i < static_cast<int>(buf.shape[0]); ++i)
      if (view(i, j) != 0.0) triplets.push_back({i, j, view(i, j)});
  return dnmf::SparseMatrix(static_cast<int>(buf.shape[0]),
                            static_cast<int>(buf.shape[1]), std::move(triplets));
}

py::array_t<double> to_numpy(const dnmf::DenseMatrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  auto view = out.mutable_unchecked<2>();
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) view(i, j) = m(i, j);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "deep-model-constrained NMF topic modeling core";

  py::register_exception<dnmf::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<dnmf::ComputeError>(m, "ComputeError", PyExc_RuntimeError);

  m.def(
      "layer_widths",
      [](int n_docs, int topics, double delta, bool imbalanced,
         std::optional<int> n_smallest, std::optional<int> k_top) {
        return dnmf::layer_widths(n_docs, topics, delta, imbalanced, n_smallest, k_top);
      },
      py::arg("n_docs"), py::arg("topics"), py::arg("delta") = 0.5,
      py::arg("imbalanced") = false, py::arg("n_smallest") = py::none(),
      py::arg("k_top") = py::none(),
      "Geometric layer-width schedule of the bootstrap network.");

  m.def(
      "solve",
      [](const std::string& algo, const py::array_t<double>& d,
         const std::optional<py::array_t<double>>& f, int topics, double lambda1,
         double lambda2, int max_iter, double rel_tol, std::uint64_t seed) {
        dnmf::SolverConfig cfg;
        cfg.algo = dnmf::parse_algo(algo);
        cfg.topics = topics;
        cfg.lambda1 = lambda1;
        cfg.lambda2 = lambda2;
        cfg.max_iter = max_iter;
        cfg.rel_tol = rel_tol;
        cfg.seed = seed;
        const dnmf::SparseMatrix sparse_d = sparse_from_numpy(d);
        std::optional<dnmf::DenseMatrix> dense_f;
        if (f) dense_f = dense_from_numpy(*f);
        dnmf::SolveOptions opts;
        opts.kkt_per_iteration = false;
        const dnmf::SolveResult result =
            dnmf::solve(cfg, sparse_d, dense_f ? &*dense_f : nullptr, opts);

        py::dict out;
        out["C"] = to_numpy(result.state.C);
        out["W"] = to_numpy(dnmf::effective_w(cfg.algo, result.state,
                                              dense_f ? *dense_f : dnmf::DenseMatrix()));
        if (result.state.T.size() > 0) out["T"] = to_numpy(result.state.T);
        out["objective_trace"] = result.state.objective_trace;
        out["iterations"] = result.state.iteration;
        out["converged"] = result.converged;
        const dnmf::KktResiduals kkt = result.trace.back().kkt;
        py::dict kdict;
        kdict["C"] = kkt.c;
        kdict["W"] = kkt.w;
        kdict["T"] = kkt.t;
        out["kkt"] = kdict;
        return out;
      },
      py::arg("algo"), py::arg("D"), py::arg("F") = py::none(), py::arg("topics") = 2,
      py::arg("lambda1") = 1.0, py::arg("lambda2") = 1.0, py::arg("max_iter") = 500,
      py::arg("rel_tol") = 1e-6, py::arg("seed") = 0,
      "Run one factorization (nmf | bdnmf | sdnmf | cdnmf) on a dense array.");

  m.def(
      "mbn_cluster",
      [](const py::array_t<double>& d, int topics, int clusterings, double delta,
         std::uint64_t seed, bool imbalanced, std::optional<int> n_smallest,
         std::optional<int> k_top) {
        dnmf::MbnConfig cfg;
        cfg.clusterings_per_layer = clusterings;
        cfg.delta = delta;
        cfg.topics = topics;
        cfg.seed = seed;
        cfg.imbalanced = imbalanced;
        cfg.n_smallest = n_smallest;
        cfg.k_top = k_top;
        const dnmf::ClusterIndicator ind =
            dnmf::mbn_cluster(sparse_from_numpy(d), cfg);
        py::dict out;
        out["labels"] = ind.labels;
        out["indicator"] = to_numpy(ind.onehot);
        out["empty_rows"] = ind.empty_rows;
        return out;
      },
      py::arg("D"), py::arg("topics"), py::arg("clusterings") = 400,
      py::arg("delta") = 0.5, py::arg("seed") = 0, py::arg("imbalanced") = false,
      py::arg("n_smallest") = py::none(), py::arg("k_top") = py::none(),
      "Bootstrap-network document clustering to a one-hot indicator.");

  m.def(
      "spectral_cluster",
      [](const py::array_t<double>& x, int topics, std::uint64_t seed) {
        const dnmf::ClusterIndicator ind =
            dnmf::spectral_cluster(dense_from_numpy(x), topics, seed);
        py::dict out;
        out["labels"] = ind.labels;
        out["indicator"] = to_numpy(ind.onehot);
        return out;
      },
      py::arg("X"), py::arg("topics"), py::arg("seed") = 0);

  m.def(
      "clustering_accuracy",
      [](const std::vector<int>& pred, const std::vector<int>& gold) {
        return dnmf::clustering_accuracy(pred, gold);
      },
      py::arg("pred"), py::arg("gold"));

  m.def(
      "top_words",
      [](const py::array_t<double>& c, int n_words) {
        const dnmf::TopicWords tops = dnmf::top_words(dense_from_numpy(c), n_words);
        return tops.topics;
      },
      py::arg("C"), py::arg("n_words") = 20);

  m.def(
      "similarity_count",
      [](const py::array_t<double>& c, int n_words) {
        const dnmf::TopicWords tops = dnmf::top_words(dense_from_numpy(c), n_words);
        return dnmf::similarity_count(tops, n_words).total;
      },
      py::arg("C"), py::arg("n_words") = 20);

  m.def(
      "coherence",
      [](const py::array_t<double>& binary, const std::vector<int>& topic_words,
         double eps, const std::string& mode) {
        const dnmf::SparseMatrix bin = sparse_from_numpy(binary);
        const dnmf::CoocTable table = dnmf::cooccurrence_stats(bin, topic_words);
        std::vector<std::pair<int, double>> ranked;
        for (std::size_t r = 0; r < topic_words.size(); ++r) {
          ranked.emplace_back(topic_words[r],
                              static_cast<double>(topic_words.size() - r));
        }
        return dnmf::coherence(ranked, table, eps,
                               mode == "all"
                                   ? dnmf::CoherencePairMode::kAllOrderedDistinct
                                   : dnmf::CoherencePairMode::kRankedPairs);
      },
      py::arg("binary"), py::arg("topic_words"), py::arg("eps") = 0.01,
      py::arg("mode") = "ranked",
      "Coherence of a ranked word list against a binary occurrence matrix.");

  m.def(
      "fit",
      [](const py::kwargs& kwargs) {
        dnmf::RunSpec spec;
        for (const auto& item : kwargs) {
          const std::string key = py::cast<std::string>(item.first);
          if (key == "corpus") spec.corpus_path = py::cast<std::string>(item.second);
          else if (key == "format") spec.format = py::cast<std::string>(item.second);
          else if (key == "algo") spec.algos = {py::cast<std::string>(item.second)};
          else if (key == "topics") spec.topics = py::cast<int>(item.second);
          else if (key == "out") spec.out_dir = py::cast<std::string>(item.second);
          else if (key == "seed") spec.seed = py::cast<std::uint64_t>(item.second);
          else if (key == "max_iter") spec.max_iter = py::cast<int>(item.second);
          else if (key == "clusterings") spec.clusterings_per_layer = py::cast<int>(item.second);
          else if (key == "delta") spec.delta = py::cast<double>(item.second);
          else if (key == "lambda1") spec.lambda1 = py::cast<double>(item.second);
          else if (key == "lambda2") spec.lambda2 = py::cast<double>(item.second);
          else if (key == "n_words") spec.n_words = py::cast<int>(item.second);
          else if (key == "min_df") spec.min_df = py::cast<int>(item.second);
          else throw dnmf::ValidationError("unknown fit argument: " + key);
        }
        const dnmf::FitResult result = dnmf::run_fit(spec);
        py::dict out;
        out["out_dir"] = result.out_dir.string();
        out["acc"] = result.metrics.acc ? py::object(py::float_(*result.metrics.acc))
                                        : py::object(py::none());
        out["coherence_mean"] = result.metrics.coherence_mean;
        out["simcount_total"] = result.metrics.simcount_total;
        out["iterations"] = result.iterations;
        return out;
      },
      "Full pipeline: corpus -> deep clustering -> factorization -> artifacts.");

  m.attr("__version__") = dnmf::kToolVersion;
}
