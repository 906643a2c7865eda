#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "dnmf/error.hpp"
#include "dnmf/harness.hpp"

namespace {

using dnmf::RunSpec;

void print_error(const char* kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"]["kind"] = kind;
  j["error"]["message"] = message;
  std::cout << j.dump(2) << "\n";
}

void add_corpus_options(CLI::App* cmd, RunSpec& spec) {
  cmd->add_option("--corpus", spec.corpus_path, "corpus path");
  cmd->add_option("--format", spec.format, "jsonl | dir-per-class | matrixmarket");
  cmd->add_option("--min-df", spec.min_df, "drop words in fewer documents than this");
  cmd->add_option("--stopwords", spec.stopwords_path, "optional stopword list, one per line");
}

void add_model_options(CLI::App* cmd, RunSpec& spec, int& k_top, int& n_smallest) {
  cmd->add_option("--topics", spec.topics, "number of topics K");
  cmd->add_option("--lambda1", spec.lambda1, "regression regularizer weight");
  cmd->add_option("--lambda2", spec.lambda2, "word-word affinity regularizer weight");
  cmd->add_option("--max-iter", spec.max_iter, "iteration cap");
  cmd->add_option("--tol", spec.tol, "relative objective-change stop");
  cmd->add_option("--clusterings-per-layer", spec.clusterings_per_layer,
                  "clusterings per network layer (M)");
  cmd->add_option("--delta", spec.delta, "layer width decay in [0,1)");
  cmd->add_option("--k-top", k_top, "override the smallest layer width");
  cmd->add_flag("--imbalanced", spec.imbalanced, "widen the terminal layer for rare classes");
  cmd->add_option("--n-smallest", n_smallest, "size of the smallest class, if known");
  cmd->add_option("--indicator", spec.indicator_path,
                  "external one-hot indicator (MatrixMarket), bypasses the deep model");
  cmd->add_option("--n-words", spec.n_words, "leading words per topic for the metrics");
  cmd->add_option("--coherence-pairs", spec.coherence_pairs,
                  "coherence pair set: ranked | all");
}

std::string config_path_from_argv(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dnmf: deep-model-constrained NMF topic modeling"};
  app.require_subcommand(1);

  RunSpec spec;
  int k_top = 0;
  int n_smallest = 0;
  std::string algo = "bdnmf";
  std::string config_ignored;

  const std::string config_path = config_path_from_argv(argc, argv);
  if (!config_path.empty()) {
    try {
      dnmf::apply_config_file(spec, config_path);
      if (!spec.algos.empty()) algo = spec.algos[0];
    } catch (const dnmf::ValidationError& e) {
      print_error("validation", e.what());
      return 2;
    }
  }

  CLI::App* fit = app.add_subcommand("fit", "ingest, cluster, factorize, score");
  fit->add_option("--config", config_ignored, "JSON config file; flags override");
  add_corpus_options(fit, spec);
  add_model_options(fit, spec, k_top, n_smallest);
  fit->add_option("--algo", algo, "nmf | bdnmf | sdnmf | cdnmf");
  fit->add_option("--seed", spec.seed, "run seed");
  fit->add_option("--out", spec.out_dir, "artifact directory");

  CLI::App* bench = app.add_subcommand("bench", "Monte-Carlo topic-subset benchmark");
  bench->add_option("--config", config_ignored, "JSON config file; flags override");
  add_corpus_options(bench, spec);
  add_model_options(bench, spec, k_top, n_smallest);
  bench->add_option("--algo", spec.algos, "algorithms to compare")->delimiter(',');
  bench->add_option("--runs", spec.runs, "Monte-Carlo repetitions per subset size");
  bench->add_option("--sizes", spec.sizes, "topic subset sizes")->delimiter(',');
  bench->add_option("--seed", spec.seed, "run seed");
  bench->add_option("--out", spec.out_dir, "artifact directory");

  CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic corpus");
  synth->add_option("--config", config_ignored, "JSON config file; flags override");
  synth->add_option("--classes", spec.classes, "number of classes");
  synth->add_option("--docs-per-class", spec.docs_per_class, "documents per class");
  synth->add_option("--vocab-per-class", spec.vocab_per_class, "class vocabulary size");
  synth->add_option("--overlap", spec.overlap, "shared-pool fraction in [0,1)");
  synth->add_option("--doc-length", spec.doc_length, "tokens per document");
  synth->add_option("--seed", spec.seed, "run seed");
  synth->add_option("--out", spec.out_dir, "artifact directory");

  CLI::App* eval = app.add_subcommand("eval", "metrics on precomputed factors");
  eval->add_option("--config", config_ignored, "JSON config file; flags override");
  add_corpus_options(eval, spec);
  eval->add_option("--factors", spec.out_dir, "fit artifact directory holding C.mtx/W.mtx");
  eval->add_option("--n-words", spec.n_words, "leading words per topic for the metrics");
  eval->add_option("--coherence-pairs", spec.coherence_pairs, "ranked | all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  if (k_top > 0) spec.k_top = k_top;
  if (n_smallest > 0) spec.n_smallest = n_smallest;

  try {
    if (fit->parsed()) {
      spec.algos = {algo};
      const dnmf::FitResult result = dnmf::run_fit(spec);
      std::cout << dnmf::metrics_to_json(result.metrics, spec.n_words);
    } else if (bench->parsed()) {
      const auto csv = dnmf::run_bench(spec);
      std::cout << csv.string() << "\n";
    } else if (synth->parsed()) {
      const auto corpus = dnmf::run_synth(spec);
      std::cout << corpus.string() << "\n";
    } else if (eval->parsed()) {
      const dnmf::MetricsSummary metrics = dnmf::run_eval(spec);
      std::cout << dnmf::metrics_to_json(metrics, spec.n_words);
    }
  } catch (const dnmf::ValidationError& e) {
    print_error("validation", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
