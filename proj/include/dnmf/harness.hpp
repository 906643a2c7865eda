#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dnmf/corpus.hpp"
#include "dnmf/matrix.hpp"
#include "dnmf/mbn.hpp"
#include "dnmf/metrics.hpp"
#include "dnmf/solvers.hpp"

namespace dnmf {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything a run needs; one seed fans out to every stage through labeled
/// streams so a single flag reproduces the whole pipeline.
struct RunSpec {
  // corpus
  std::string corpus_path;
  std::string format = "jsonl";
  int min_df = 1;
  std::string stopwords_path;

  // solver
  std::vector<std::string> algos = {"bdnmf"};
  int topics = 0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  int max_iter = 500;
  double tol = 1e-6;

  // deep model
  int clusterings_per_layer = 400;
  double delta = 0.5;
  std::optional<int> k_top;
  bool imbalanced = false;
  std::optional<int> n_smallest;
  std::string indicator_path;  // external one-hot f(D), bypasses MBN

  // metrics
  int n_words = 20;
  std::string coherence_pairs = "ranked";  // ranked | all

  // harness
  std::uint64_t seed = 0;
  std::string out_dir;
  int runs = 1;
  std::vector<int> sizes;

  // synthetic corpus generation
  int classes = 3;
  int docs_per_class = 50;
  int vocab_per_class = 40;
  double overlap = 0.0;
  int doc_length = 80;
};

/// Loads RunSpec fields from a JSON config file; CLI flags override after.
void apply_config_file(RunSpec& spec, const std::filesystem::path& path);

struct MetricsSummary {
  std::optional<double> acc;
  double coherence_mean = 0.0;
  std::vector<double> coherence_per_topic;
  long simcount_total = 0;
  std::vector<std::tuple<int, int, int>> simcount_pairs;
};

MetricsSummary compute_metrics(const TermStats& stats, const Corpus& corpus, Algo algo,
                               const FactorState& state, const DenseMatrix& f,
                               const RunSpec& spec);

struct FitResult {
  std::filesystem::path out_dir;
  MetricsSummary metrics;
  int iterations = 0;
};

FitResult run_fit(const RunSpec& spec);
std::filesystem::path run_bench(const RunSpec& spec);  // returns the CSV path
std::filesystem::path run_synth(const RunSpec& spec);  // returns the corpus path
MetricsSummary run_eval(const RunSpec& spec);

/// One-hot K x N indicator from a MatrixMarket file; rejects anything that
/// is not exactly one-hot per column.
ClusterIndicator read_indicator(const std::filesystem::path& path);

std::string metrics_to_json(const MetricsSummary& metrics, int n_words);

}  // namespace dnmf
