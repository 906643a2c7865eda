#include "dnmf/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dnmf/error.hpp"

namespace dnmf {

namespace {
using json = nlohmann::json;

std::vector<std::pair<std::string, double>> count_tokens(const std::vector<std::string>& tokens) {
  std::map<std::string, double> counts;
  for (const std::string& t : tokens) counts[t] += 1.0;
  return {counts.begin(), counts.end()};
}

void sort_and_check_ids(Corpus& corpus, const std::string& source) {
  std::sort(corpus.documents.begin(), corpus.documents.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < corpus.documents.size(); ++i) {
    if (corpus.documents[i].id == corpus.documents[i - 1].id) {
      throw ValidationError("duplicate document id '" + corpus.documents[i].id + "' in " +
                            source);
    }
  }
  if (corpus.documents.empty()) throw ValidationError("empty corpus: " + source);
}

Corpus load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus: " + path.string());
  Corpus corpus;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed JSON line: " + e.what());
    }
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
        !j["text"].is_string()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected string fields 'id' and 'text'");
    }
    Document doc;
    doc.id = j["id"].get<std::string>();
    if (j.contains("label")) {
      if (!j["label"].is_string()) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": 'label' must be a string");
      }
      doc.label = j["label"].get<std::string>();
    }
    doc.term_counts = count_tokens(tokenize(j["text"].get<std::string>()));
    corpus.documents.push_back(std::move(doc));
  }
  sort_and_check_ids(corpus, path.string());
  return corpus;
}

Corpus load_dir_per_class(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw ValidationError("not a directory: " + root.string());
  }
  Corpus corpus;
  for (const auto& class_entry : std::filesystem::directory_iterator(root)) {
    if (!class_entry.is_directory()) continue;
    const std::string label = class_entry.path().filename().string();
    for (const auto& file_entry : std::filesystem::directory_iterator(class_entry.path())) {
      if (!file_entry.is_regular_file()) continue;
      std::ifstream in(file_entry.path());
      if (!in) throw ValidationError("cannot open document: " + file_entry.path().string());
      std::stringstream buffer;
      buffer << in.rdbuf();
      Document doc;
      doc.id = label + "/" + file_entry.path().stem().string();
      doc.label = label;
      doc.term_counts = count_tokens(tokenize(buffer.str()));
      corpus.documents.push_back(std::move(doc));
    }
  }
  sort_and_check_ids(corpus, root.string());
  return corpus;
}

Corpus load_matrix_market(const std::filesystem::path& path) {
  const SparseMatrix counts = read_matrix_market(path);
  const auto dir = path.parent_path();
  const auto vocab_path = dir / "vocab.txt";
  std::ifstream vin(vocab_path);
  if (!vin) {
    throw ValidationError("matrixmarket corpus requires sidecar vocabulary: " +
                          vocab_path.string());
  }
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(vin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) vocab.push_back(line);
  }
  if (static_cast<int>(vocab.size()) != counts.rows()) {
    throw ValidationError("vocabulary has " + std::to_string(vocab.size()) +
                          " words but matrix has " + std::to_string(counts.rows()) +
                          " rows");
  }
  std::vector<std::string> labels;
  const auto labels_path = dir / "labels.txt";
  if (std::filesystem::exists(labels_path)) {
    std::ifstream lin(labels_path);
    while (std::getline(lin, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      labels.push_back(line);
    }
    if (static_cast<int>(labels.size()) != counts.cols()) {
      throw ValidationError("labels file has " + std::to_string(labels.size()) +
                            " lines but matrix has " + std::to_string(counts.cols()) +
                            " columns");
    }
  }

  Corpus corpus;
  corpus.fixed_vocab = vocab;
  corpus.documents.resize(counts.cols());
  char id_buf[24];
  for (int j = 0; j < counts.cols(); ++j) {
    std::snprintf(id_buf, sizeof(id_buf), "doc%08d", j);
    corpus.documents[j].id = id_buf;
    if (!labels.empty()) corpus.documents[j].label = labels[j];
  }
  for (const Triplet& t : counts.triplets()) {
    corpus.documents[t.col].term_counts.emplace_back(vocab[t.row], t.value);
  }
  sort_and_check_ids(corpus, path.string());
  return corpus;
}

}  // namespace

CorpusFormat parse_format(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "dir-per-class") return CorpusFormat::kDirPerClass;
  if (name == "matrixmarket") return CorpusFormat::kMatrixMarket;
  throw ValidationError("unknown corpus format '" + name +
                        "' (expected jsonl|dir-per-class|matrixmarket)");
}

std::string to_string(CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kJsonl: return "jsonl";
    case CorpusFormat::kDirPerClass: return "dir-per-class";
    case CorpusFormat::kMatrixMarket: return "matrixmarket";
  }
  return "?";
}

bool Corpus::has_labels() const {
  return !documents.empty() &&
         std::all_of(documents.begin(), documents.end(),
                     [](const Document& d) { return d.label.has_value(); });
}

std::vector<std::string> Corpus::label_names() const {
  std::set<std::string> names;
  for (const Document& d : documents) {
    if (d.label) names.insert(*d.label);
  }
  return {names.begin(), names.end()};
}

std::vector<int> Corpus::gold_labels() const {
  if (!has_labels()) {
    throw ValidationError("corpus has unlabeled documents; gold labels unavailable");
  }
  const std::vector<std::string> names = label_names();
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = static_cast<int>(i);
  std::vector<int> labels(documents.size());
  for (std::size_t j = 0; j < documents.size(); ++j) labels[j] = index[*documents[j].label];
  return labels;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                       (c >= 'A' && c <= 'Z');
    if (alnum) {
      current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!current.empty()) {
      if (current.size() >= 2) tokens.push_back(current);
      current.clear();
    }
  }
  if (current.size() >= 2) tokens.push_back(current);
  return tokens;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("corpus path does not exist: " + path.string());
  }
  switch (format) {
    case CorpusFormat::kJsonl: return load_jsonl(path);
    case CorpusFormat::kDirPerClass: return load_dir_per_class(path);
    case CorpusFormat::kMatrixMarket: return load_matrix_market(path);
  }
  throw ValidationError("unknown corpus format");
}

TermStats build_term_stats(const Corpus& corpus, int min_df,
                           const std::vector<std::string>* stopwords) {
  if (min_df < 1) throw ValidationError("min_df must be >= 1");
  const int n = corpus.size();
  if (n == 0) throw ValidationError("empty corpus");

  std::set<std::string> stop;
  if (stopwords != nullptr) stop.insert(stopwords->begin(), stopwords->end());

  std::map<std::string, int> df;
  for (const Document& doc : corpus.documents) {
    for (const auto& [word, count] : doc.term_counts) {
      if (count > 0.0 && stop.find(word) == stop.end()) ++df[word];
    }
  }

  TermStats stats;
  // Keep words with min_df <= df < N; df == N means idf = ln(N/N) = 0 and the
  // whole row would be zero weight.
  const auto retained = [&](const std::string& word) {
    const auto it = df.find(word);
    return it != df.end() && it->second >= min_df && it->second < n;
  };
  if (corpus.fixed_vocab) {
    for (const std::string& word : *corpus.fixed_vocab) {
      if (retained(word) && stats.vocab.index.find(word) == stats.vocab.index.end()) {
        stats.vocab.index[word] = static_cast<int>(stats.vocab.words.size());
        stats.vocab.words.push_back(word);
      }
    }
  } else {
    for (const auto& [word, freq] : df) {  // std::map: lexicographic order
      if (retained(word)) {
        stats.vocab.index[word] = static_cast<int>(stats.vocab.words.size());
        stats.vocab.words.push_back(word);
      }
    }
  }
  if (stats.vocab.words.empty()) {
    throw ValidationError("all words filtered out (min_df=" + std::to_string(min_df) +
                          ", zero-idf words dropped)");
  }
  stats.vocab.doc_freq.resize(stats.vocab.words.size());
  for (std::size_t i = 0; i < stats.vocab.words.size(); ++i) {
    stats.vocab.doc_freq[i] = df[stats.vocab.words[i]];
  }

  std::vector<Triplet> count_entries, tfidf_entries, binary_entries;
  for (int j = 0; j < n; ++j) {
    for (const auto& [word, count] : corpus.documents[j].term_counts) {
      const auto it = stats.vocab.index.find(word);
      if (it == stats.vocab.index.end() || count <= 0.0) continue;
      const int row = it->second;
      const double idf = std::log(static_cast<double>(n) / stats.vocab.doc_freq[row]);
      count_entries.push_back({row, j, count});
      tfidf_entries.push_back({row, j, count * idf});
      binary_entries.push_back({row, j, 1.0});
    }
  }
  const int v = stats.vocab.size();
  stats.counts = SparseMatrix(v, n, std::move(count_entries));
  stats.tfidf = SparseMatrix(v, n, std::move(tfidf_entries));
  stats.binary = SparseMatrix(v, n, std::move(binary_entries));
  return stats;
}

SparseMatrix build_tfidf(const Corpus& corpus, int min_df) {
  return build_term_stats(corpus, min_df).tfidf;
}

CoocTable::CoocTable(const SparseMatrix& binary, const std::vector<int>& words) {
  count_ = static_cast<int>(words.size());
  for (int i = 0; i < count_; ++i) {
    const int w = words[i];
    if (w < 0 || w >= binary.rows()) {
      throw ValidationError("word index " + std::to_string(w) + " out of range for " +
                            std::to_string(binary.rows()) + " words");
    }
    local_.emplace(w, i);
  }
  single_.assign(count_, 0.0);
  pair_.assign(static_cast<std::size_t>(count_) * count_, 0.0);

  const auto& ptr = binary.col_ptr();
  const auto& rows = binary.row_index();
  std::vector<int> present;
  for (int j = 0; j < binary.cols(); ++j) {
    present.clear();
    for (std::size_t p = ptr[j]; p < ptr[j + 1]; ++p) {
      const auto it = local_.find(rows[p]);
      if (it != local_.end()) present.push_back(it->second);
    }
    for (std::size_t a = 0; a < present.size(); ++a) {
      single_[present[a]] += 1.0;
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        pair_[static_cast<std::size_t>(present[a]) * count_ + present[b]] += 1.0;
        pair_[static_cast<std::size_t>(present[b]) * count_ + present[a]] += 1.0;
      }
    }
  }
}

double CoocTable::freq(int word) const {
  const auto it = local_.find(word);
  if (it == local_.end()) throw ValidationError("word not in co-occurrence table");
  return single_[it->second];
}

double CoocTable::pair_freq(int w1, int w2) const {
  const auto a = local_.find(w1);
  const auto b = local_.find(w2);
  if (a == local_.end() || b == local_.end()) {
    throw ValidationError("word not in co-occurrence table");
  }
  if (a->second == b->second) return single_[a->second];  // freq(v, v) = freq(v)
  return pair_[static_cast<std::size_t>(a->second) * count_ + b->second];
}

CoocTable cooccurrence_stats(const SparseMatrix& binary, const std::vector<int>& words) {
  return CoocTable(binary, words);
}

}  // namespace dnmf
