#include "dnmf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dnmf/error.hpp"
#include "dnmf/rng.hpp"

namespace dnmf {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CoherencePairMode parse_pair_mode(const std::string& name) {
  if (name == "ranked") return CoherencePairMode::kRankedPairs;
  if (name == "all") return CoherencePairMode::kAllOrderedDistinct;
  throw ValidationError("unknown coherence pair mode '" + name + "' (expected ranked|all)");
}

std::vector<std::string> load_stopwords(const std::string& path) {
  std::vector<std::string> words;
  if (path.empty()) return words;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open stopword list: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return words;
}

json spec_to_json(const RunSpec& s) {
  json j;
  j["corpus"] = s.corpus_path;
  j["format"] = s.format;
  j["min_df"] = s.min_df;
  j["stopwords"] = s.stopwords_path;
  j["algos"] = s.algos;
  j["topics"] = s.topics;
  j["lambda1"] = s.lambda1;
  j["lambda2"] = s.lambda2;
  j["max_iter"] = s.max_iter;
  j["tol"] = s.tol;
  j["clusterings_per_layer"] = s.clusterings_per_layer;
  j["delta"] = s.delta;
  if (s.k_top) j["k_top"] = *s.k_top;
  j["imbalanced"] = s.imbalanced;
  if (s.n_smallest) j["n_smallest"] = *s.n_smallest;
  j["indicator"] = s.indicator_path;
  j["n_words"] = s.n_words;
  j["coherence_pairs"] = s.coherence_pairs;
  j["seed"] = s.seed;
  j["out"] = s.out_dir;
  j["runs"] = s.runs;
  j["sizes"] = s.sizes;
  j["classes"] = s.classes;
  j["docs_per_class"] = s.docs_per_class;
  j["vocab_per_class"] = s.vocab_per_class;
  j["overlap"] = s.overlap;
  j["doc_length"] = s.doc_length;
  return j;
}

void write_manifest(const std::filesystem::path& dir, const char* command,
                    const RunSpec& spec) {
  json j;
  j["tool"] = "dnmf";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["seed"] = spec.seed;
  j["config"] = spec_to_json(spec);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ValidationError("cannot write manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<IterationRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << "iteration,objective,kkt_C,kkt_W,kkt_T\n";
  const auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt_double(v); };
  for (const IterationRecord& rec : trace) {
    out << rec.iteration << "," << fmt_double(rec.objective) << "," << cell(rec.kkt.c)
        << "," << cell(rec.kkt.w) << "," << cell(rec.kkt.t) << "\n";
  }
}

void write_topics_tsv(const std::filesystem::path& path, const TopicWords& topics,
                      const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  for (std::size_t k = 0; k < topics.topics.size(); ++k) {
    for (std::size_t r = 0; r < topics.topics[k].size(); ++r) {
      const auto& [word, weight] = topics.topics[k][r];
      out << k << "\t" << (r + 1) << "\t" << vocab.words[word] << "\t"
          << fmt_double(weight) << "\n";
    }
  }
}

struct PipelineRun {
  FactorState state;
  std::vector<IterationRecord> trace;
  DenseMatrix f;  // empty for plain nmf
  MetricsSummary metrics;
};

PipelineRun run_pipeline(const RunSpec& spec, const Corpus& corpus, const TermStats& stats,
                         Algo algo, const DenseMatrix* indicator, std::uint64_t solver_seed,
                         bool kkt_per_iteration) {
  PipelineRun run;
  const bool needs_f = algo != Algo::kNmf;
  if (needs_f) {
    if (indicator == nullptr) throw ComputeError("pipeline needs an indicator here");
    run.f = *indicator;
  }
  SolverConfig cfg;
  cfg.algo = algo;
  cfg.topics = spec.topics;
  cfg.lambda1 = spec.lambda1;
  cfg.lambda2 = spec.lambda2;
  cfg.max_iter = spec.max_iter;
  cfg.rel_tol = spec.tol;
  cfg.seed = solver_seed;
  SolveOptions opts;
  opts.kkt_per_iteration = kkt_per_iteration;
  SolveResult result = solve(cfg, stats.tfidf, needs_f ? &run.f : nullptr, opts);
  run.state = std::move(result.state);
  run.trace = std::move(result.trace);
  run.metrics = compute_metrics(stats, corpus, algo, run.state, run.f, spec);
  return run;
}

DenseMatrix build_indicator(const RunSpec& spec, const TermStats& stats,
                            MbnOutput* model_out) {
  if (!spec.indicator_path.empty()) {
    ClusterIndicator ind = read_indicator(spec.indicator_path);
    if (ind.onehot.rows() != spec.topics || ind.onehot.cols() != stats.tfidf.cols()) {
      throw ValidationError("indicator shape " + ind.onehot.shape_str() +
                            " does not match topics=" + std::to_string(spec.topics) +
                            ", docs=" + std::to_string(stats.tfidf.cols()));
    }
    return ind.onehot;
  }
  MbnConfig cfg;
  cfg.clusterings_per_layer = spec.clusterings_per_layer;
  cfg.delta = spec.delta;
  cfg.k_top = spec.k_top;
  cfg.topics = spec.topics;
  cfg.seed = derive_seed(spec.seed, "mbn");
  cfg.imbalanced = spec.imbalanced;
  cfg.n_smallest = spec.n_smallest;
  ClusterIndicator ind = mbn_cluster(stats.tfidf, cfg, model_out);
  return ind.onehot;
}

}  // namespace

void apply_config_file(RunSpec& spec, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed config " + path.string() + ": " + e.what());
  }
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("corpus", spec.corpus_path);
  get("format", spec.format);
  get("min_df", spec.min_df);
  get("stopwords", spec.stopwords_path);
  get("algos", spec.algos);
  if (j.contains("algo")) spec.algos = {j.at("algo").get<std::string>()};
  get("topics", spec.topics);
  get("lambda1", spec.lambda1);
  get("lambda2", spec.lambda2);
  get("max_iter", spec.max_iter);
  get("tol", spec.tol);
  get("clusterings_per_layer", spec.clusterings_per_layer);
  get("delta", spec.delta);
  if (j.contains("k_top")) spec.k_top = j.at("k_top").get<int>();
  get("imbalanced", spec.imbalanced);
  if (j.contains("n_smallest")) spec.n_smallest = j.at("n_smallest").get<int>();
  get("indicator", spec.indicator_path);
  get("n_words", spec.n_words);
  get("coherence_pairs", spec.coherence_pairs);
  get("seed", spec.seed);
  get("out", spec.out_dir);
  get("runs", spec.runs);
  get("sizes", spec.sizes);
  get("classes", spec.classes);
  get("docs_per_class", spec.docs_per_class);
  get("vocab_per_class", spec.vocab_per_class);
  get("overlap", spec.overlap);
  get("doc_length", spec.doc_length);
}

ClusterIndicator read_indicator(const std::filesystem::path& path) {
  const SparseMatrix m = read_matrix_market(path);
  ClusterIndicator out;
  out.onehot = m.to_dense();
  out.labels.assign(m.cols(), -1);
  std::vector<int> hits(m.cols(), 0);
  for (const Triplet& t : m.triplets()) {
    if (t.value != 1.0) {
      throw ValidationError("indicator entries must be exactly 1, found " +
                            std::to_string(t.value));
    }
    ++hits[t.col];
    out.labels[t.col] = t.row;
  }
  for (int j = 0; j < m.cols(); ++j) {
    if (hits[j] != 1) {
      throw ValidationError("indicator column " + std::to_string(j + 1) +
                            " is not one-hot");
    }
  }
  std::vector<int> counts(m.rows(), 0);
  for (int lab : out.labels) ++counts[lab];
  for (int k = 0; k < m.rows(); ++k) {
    if (counts[k] == 0) out.empty_rows.push_back(k);
  }
  return out;
}

MetricsSummary compute_metrics(const TermStats& stats, const Corpus& corpus, Algo algo,
                               const FactorState& state, const DenseMatrix& f,
                               const RunSpec& spec) {
  MetricsSummary out;
  const DenseMatrix w_eff = effective_w(algo, state, f);
  if (corpus.has_labels()) {
    out.acc = clustering_accuracy(predicted_labels(w_eff), corpus.gold_labels());
  }
  const int depth = std::min(spec.n_words, state.C.rows());
  const TopicWords topics = top_words(columns_sum_normalized(state.C), depth);

  std::set<int> word_set;
  for (const auto& topic : topics.topics)
    for (const auto& [w, weight] : topic) word_set.insert(w);
  const CoocTable cooc(stats.binary, std::vector<int>(word_set.begin(), word_set.end()));
  const CoherencePairMode mode = parse_pair_mode(spec.coherence_pairs);
  for (const auto& topic : topics.topics) {
    out.coherence_per_topic.push_back(coherence(topic, cooc, 0.01, mode));
  }
  out.coherence_mean =
      std::accumulate(out.coherence_per_topic.begin(), out.coherence_per_topic.end(), 0.0) /
      static_cast<double>(out.coherence_per_topic.size());

  const SimilarityCount sim = similarity_count(topics, depth);
  out.simcount_total = sim.total;
  out.simcount_pairs = sim.pairs;
  return out;
}

std::string metrics_to_json(const MetricsSummary& metrics, int n_words) {
  json j;
  if (metrics.acc) {
    j["acc"] = *metrics.acc;
  } else {
    j["acc"] = nullptr;
  }
  j["coherence"]["mean"] = metrics.coherence_mean;
  j["coherence"]["per_topic"] = metrics.coherence_per_topic;
  j["simcount"]["total"] = metrics.simcount_total;
  j["simcount"]["pairs"] = json::array();
  for (const auto& [a, b, shared] : metrics.simcount_pairs) {
    j["simcount"]["pairs"].push_back({a, b, shared});
  }
  j["n_words"] = n_words;
  return j.dump(2) + "\n";
}

FitResult run_fit(const RunSpec& spec) {
  if (spec.algos.size() != 1) {
    throw ValidationError("fit takes exactly one --algo");
  }
  if (spec.topics < 2) throw ValidationError("fit requires --topics >= 2");
  if (spec.out_dir.empty()) throw ValidationError("fit requires --out");
  const Algo algo = parse_algo(spec.algos[0]);

  const Corpus corpus = load_corpus(spec.corpus_path, parse_format(spec.format));
  const std::vector<std::string> stopwords = load_stopwords(spec.stopwords_path);
  const TermStats stats =
      build_term_stats(corpus, spec.min_df, stopwords.empty() ? nullptr : &stopwords);

  MbnOutput mbn_model;
  DenseMatrix indicator;
  const bool needs_f = algo != Algo::kNmf;
  const bool ran_mbn = needs_f && spec.indicator_path.empty();
  if (needs_f) indicator = build_indicator(spec, stats, ran_mbn ? &mbn_model : nullptr);

  PipelineRun run = run_pipeline(spec, corpus, stats, algo, needs_f ? &indicator : nullptr,
                                 derive_seed(spec.seed, "solver"), true);

  const std::filesystem::path dir(spec.out_dir);
  std::filesystem::create_directories(dir);
  write_manifest(dir, "fit", spec);
  if (needs_f) write_matrix_market(dir / "fD.mtx", run.f);
  write_matrix_market(dir / "C.mtx", run.state.C);
  write_matrix_market(dir / "W.mtx", effective_w(algo, run.state, run.f));
  {
    // row/column key sidecars: line k names row k of C / column k of W
    std::ofstream vocab_out(dir / "vocab.txt");
    for (const std::string& word : stats.vocab.words) vocab_out << word << "\n";
    std::ofstream docs_out(dir / "docs.txt");
    for (const Document& doc : corpus.documents) docs_out << doc.id << "\n";
  }
  write_trace_csv(dir / "trace.csv", run.trace);
  const int depth = std::min(spec.n_words, run.state.C.rows());
  write_topics_tsv(dir / "topics.tsv",
                   top_words(columns_sum_normalized(run.state.C), depth), stats.vocab);
  {
    std::ofstream out(dir / "metrics.json");
    if (!out) throw ValidationError("cannot write metrics.json in " + dir.string());
    out << metrics_to_json(run.metrics, depth);
  }
  if (ran_mbn) save_mbn_model(dir / "mbn_model.json", mbn_model.model);

  FitResult result;
  result.out_dir = dir;
  result.metrics = run.metrics;
  result.iterations = run.state.iteration;
  return result;
}

std::filesystem::path run_bench(const RunSpec& spec) {
  if (spec.out_dir.empty()) throw ValidationError("bench requires --out");
  if (spec.sizes.empty()) throw ValidationError("bench requires --sizes");
  if (spec.runs < 1) throw ValidationError("bench requires runs >= 1");

  const Corpus corpus = load_corpus(spec.corpus_path, parse_format(spec.format));
  if (!corpus.has_labels()) {
    throw ValidationError("bench requires gold labels on every document");
  }
  const std::vector<std::string> stopwords = load_stopwords(spec.stopwords_path);
  const std::vector<std::string> classes = corpus.label_names();
  for (int size : spec.sizes) {
    if (size < 2 || size > static_cast<int>(classes.size())) {
      throw ValidationError("subset size " + std::to_string(size) +
                            " out of range for " + std::to_string(classes.size()) +
                            " classes");
    }
  }
  std::vector<Algo> algos;
  for (const std::string& name : spec.algos) algos.push_back(parse_algo(name));
  if (algos.empty()) throw ValidationError("bench requires at least one algorithm");

  const std::filesystem::path dir(spec.out_dir);
  std::filesystem::create_directories(dir);
  write_manifest(dir, "bench", spec);
  const std::filesystem::path csv_path = dir / "bench.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw ValidationError("cannot open for writing: " + csv_path.string());
  csv << "algo,size,run,seed,acc,coherence,simcount\n";

  struct Accum {
    double acc = 0.0, coherence = 0.0, simcount = 0.0;
  };
  std::map<std::pair<std::string, int>, Accum> totals;

  for (int size : spec.sizes) {
    for (int run_idx = 0; run_idx < spec.runs; ++run_idx) {
      const std::uint64_t run_seed = derive_seed(
          spec.seed, "bench-run", static_cast<std::uint64_t>(size),
          static_cast<std::uint64_t>(run_idx));
      Rng subset_rng(derive_seed(run_seed, "subset"));
      const std::vector<int> chosen =
          subset_rng.sample_without_replacement(static_cast<int>(classes.size()), size);
      std::set<std::string> subset;
      for (int c : chosen) subset.insert(classes[c]);

      Corpus sub;
      for (const Document& doc : corpus.documents) {
        if (subset.count(*doc.label)) sub.documents.push_back(doc);
      }
      const TermStats stats =
          build_term_stats(sub, spec.min_df, stopwords.empty() ? nullptr : &stopwords);

      RunSpec sub_spec = spec;
      sub_spec.topics = size;

      const bool any_needs_f = std::any_of(algos.begin(), algos.end(),
                                           [](Algo a) { return a != Algo::kNmf; });
      DenseMatrix indicator;
      if (any_needs_f) {
        MbnConfig cfg;
        cfg.clusterings_per_layer = spec.clusterings_per_layer;
        cfg.delta = spec.delta;
        cfg.k_top = spec.k_top;
        cfg.topics = size;
        cfg.seed = derive_seed(run_seed, "mbn");
        cfg.imbalanced = spec.imbalanced;
        cfg.n_smallest = spec.n_smallest;
        indicator = mbn_cluster(stats.tfidf, cfg).onehot;
      }

      for (Algo algo : algos) {
        PipelineRun run =
            run_pipeline(sub_spec, sub, stats, algo,
                         algo != Algo::kNmf ? &indicator : nullptr,
                         derive_seed(run_seed, "solver"), false);
        const double acc = run.metrics.acc.value();
        csv << to_string(algo) << "," << size << "," << run_idx << "," << run_seed << ","
            << fmt_double(acc) << "," << fmt_double(run.metrics.coherence_mean) << ","
            << run.metrics.simcount_total << "\n";
        Accum& acc_row = totals[{to_string(algo), size}];
        acc_row.acc += acc;
        acc_row.coherence += run.metrics.coherence_mean;
        acc_row.simcount += static_cast<double>(run.metrics.simcount_total);
      }
    }
  }
  for (const auto& [key, total] : totals) {
    csv << key.first << "," << key.second << ",mean,," << fmt_double(total.acc / spec.runs)
        << "," << fmt_double(total.coherence / spec.runs) << ","
        << fmt_double(total.simcount / spec.runs) << "\n";
  }
  return csv_path;
}

std::filesystem::path run_synth(const RunSpec& spec) {
  if (spec.out_dir.empty()) throw ValidationError("synth requires --out");
  if (!(spec.overlap >= 0.0 && spec.overlap < 1.0)) {
    throw ValidationError("overlap fraction must be in [0, 1)");
  }
  if (spec.classes < 1 || spec.docs_per_class < 1 || spec.vocab_per_class < 1 ||
      spec.doc_length < 1) {
    throw ValidationError("synth counts must be >= 1");
  }
  const std::filesystem::path dir(spec.out_dir);
  std::filesystem::create_directories(dir);
  write_manifest(dir, "synth", spec);
  const std::filesystem::path corpus_path = dir / "corpus.jsonl";
  std::ofstream out(corpus_path);
  if (!out) throw ValidationError("cannot open for writing: " + corpus_path.string());

  // ceil with a guard against 0.1 * 120 = 12.000000000000002-style noise
  const int pool_size = static_cast<int>(
      std::ceil(spec.overlap * spec.classes * spec.vocab_per_class - 1e-9));
  Rng rng(derive_seed(spec.seed, "synth"));
  char buf[64];
  for (int c = 0; c < spec.classes; ++c) {
    for (int d = 0; d < spec.docs_per_class; ++d) {
      std::string text;
      for (int t = 0; t < spec.doc_length; ++t) {
        if (t > 0) text.push_back(' ');
        if (pool_size > 0 && rng.uniform() < spec.overlap) {
          std::snprintf(buf, sizeof(buf), "shared%04d",
                        static_cast<int>(rng.below(pool_size)));
        } else {
          std::snprintf(buf, sizeof(buf), "c%02dw%04d", c,
                        static_cast<int>(rng.below(spec.vocab_per_class)));
        }
        text += buf;
      }
      json line;
      std::snprintf(buf, sizeof(buf), "c%02dd%05d", c, d);
      line["id"] = buf;
      std::snprintf(buf, sizeof(buf), "class%02d", c);
      line["label"] = buf;
      line["text"] = text;
      out << line.dump() << "\n";
    }
  }
  return corpus_path;
}

MetricsSummary run_eval(const RunSpec& spec) {
  if (spec.corpus_path.empty()) throw ValidationError("eval requires --corpus");
  if (spec.out_dir.empty()) {
    throw ValidationError("eval requires --factors (a fit artifact directory)");
  }
  const std::filesystem::path dir(spec.out_dir);
  const Corpus corpus = load_corpus(spec.corpus_path, parse_format(spec.format));
  const std::vector<std::string> stopwords = load_stopwords(spec.stopwords_path);
  const TermStats stats =
      build_term_stats(corpus, spec.min_df, stopwords.empty() ? nullptr : &stopwords);

  FactorState state;
  state.C = read_matrix_market(dir / "C.mtx").to_dense();
  if (state.C.rows() != stats.vocab.size()) {
    throw ValidationError("C has " + std::to_string(state.C.rows()) +
                          " rows but the corpus vocabulary has " +
                          std::to_string(stats.vocab.size()) +
                          " words (check --min-df and the corpus)");
  }
  state.W = read_matrix_market(dir / "W.mtx").to_dense();
  RunSpec local = spec;
  local.topics = state.C.cols();
  // W is the effective topic-document matrix on disk, so metric-wise this is
  // the plain factorization view regardless of which solver produced it.
  return compute_metrics(stats, corpus, Algo::kNmf, state, DenseMatrix(), local);
}

}  // namespace dnmf
