#include "dnmf/matrix.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dnmf/error.hpp"
#include "dnmf/rng.hpp"

namespace dnmf {

namespace {

using EigenMap = Eigen::Map<Eigen::MatrixXd>;
using EigenConstMap = Eigen::Map<const Eigen::MatrixXd>;

EigenConstMap as_eigen(const DenseMatrix& m) {
  return EigenConstMap(m.data(), m.rows(), m.cols());
}

EigenMap as_eigen(DenseMatrix& m) { return EigenMap(m.data(), m.rows(), m.cols()); }

[[noreturn]] void throw_shape(const char* op, const std::string& a, const std::string& b) {
  throw ValidationError(std::string(op) + ": incompatible shapes " + a + " and " + b);
}

}  // namespace

DenseMatrix::DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) {
    throw ValidationError("matrix dimensions must be positive, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  values_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::constant(int rows, int cols, double value) {
  DenseMatrix m(rows, cols);
  std::fill(m.values_.begin(), m.values_.end(), value);
  return m;
}

double DenseMatrix::min_coeff() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : values_) m = std::min(m, v);
  return m;
}

double DenseMatrix::max_coeff() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values_) m = std::max(m, v);
  return m;
}

std::string DenseMatrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

SparseMatrix::SparseMatrix(int rows, int cols, std::vector<Triplet> triplets)
    : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) {
    throw ValidationError("matrix dimensions must be positive, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::vector<Triplet> kept;
  kept.reserve(triplets.size());
  for (const Triplet& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw ValidationError("sparse entry (" + std::to_string(t.row) + "," +
                            std::to_string(t.col) + ") out of bounds for " + shape_str());
    }
    if (t.value < 0.0 || !std::isfinite(t.value)) {
      throw ValidationError("sparse entry (" + std::to_string(t.row) + "," +
                            std::to_string(t.col) + ") must be a finite nonnegative value");
    }
    if (t.value > 0.0) kept.push_back(t);
  }
  std::sort(kept.begin(), kept.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  for (std::size_t i = 1; i < kept.size(); ++i) {
    if (kept[i].row == kept[i - 1].row && kept[i].col == kept[i - 1].col) {
      throw ValidationError("duplicate sparse coordinate (" + std::to_string(kept[i].row) +
                            "," + std::to_string(kept[i].col) + ")");
    }
  }
  triplets_ = std::move(kept);
  col_ptr_.assign(static_cast<std::size_t>(cols) + 1, 0);
  row_index_.resize(triplets_.size());
  values_.resize(triplets_.size());
  for (std::size_t i = 0; i < triplets_.size(); ++i) {
    ++col_ptr_[static_cast<std::size_t>(triplets_[i].col) + 1];
    row_index_[i] = triplets_[i].row;
    values_[i] = triplets_[i].value;
  }
  for (int j = 0; j < cols; ++j) col_ptr_[j + 1] += col_ptr_[j];
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix out(rows_, cols_);
  for (const Triplet& t : triplets_) out(t.row, t.col) = t.value;
  return out;
}

std::string SparseMatrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw_shape("matmul", a.shape_str(), b.shape_str());
  DenseMatrix out(a.rows(), b.cols());
  as_eigen(out).noalias() = as_eigen(a) * as_eigen(b);
  return out;
}

DenseMatrix matmul(const SparseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw_shape("matmul", a.shape_str(), b.shape_str());
  DenseMatrix out(a.rows(), b.cols());
  const auto& ptr = a.col_ptr();
  const auto& rows = a.row_index();
  const auto& vals = a.values();
  for (int j = 0; j < b.cols(); ++j) {
    for (int k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj == 0.0) continue;
      for (std::size_t p = ptr[k]; p < ptr[k + 1]; ++p) {
        out(rows[p], j) += vals[p] * bkj;
      }
    }
  }
  return out;
}

DenseMatrix matmul_at_b(const SparseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw_shape("matmul_at_b", a.shape_str(), b.shape_str());
  DenseMatrix out(a.cols(), b.cols());
  const auto& ptr = a.col_ptr();
  const auto& rows = a.row_index();
  const auto& vals = a.values();
  for (int j = 0; j < b.cols(); ++j) {
    for (int k = 0; k < a.cols(); ++k) {
      double acc = 0.0;
      for (std::size_t p = ptr[k]; p < ptr[k + 1]; ++p) {
        acc += vals[p] * b(rows[p], j);
      }
      out(k, j) = acc;
    }
  }
  return out;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw_shape("matmul_at_b", a.shape_str(), b.shape_str());
  DenseMatrix out(a.cols(), b.cols());
  as_eigen(out).noalias() = as_eigen(a).transpose() * as_eigen(b);
  return out;
}

DenseMatrix matmul_a_bt(const SparseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw_shape("matmul_a_bt", a.shape_str(), b.shape_str());
  DenseMatrix out(a.rows(), b.rows());
  const auto& ptr = a.col_ptr();
  const auto& rows = a.row_index();
  const auto& vals = a.values();
  for (int n = 0; n < a.cols(); ++n) {
    for (std::size_t p = ptr[n]; p < ptr[n + 1]; ++p) {
      const double v = vals[p];
      const int r = rows[p];
      for (int k = 0; k < b.rows(); ++k) {
        out(r, k) += v * b(k, n);
      }
    }
  }
  return out;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw_shape("matmul_a_bt", a.shape_str(), b.shape_str());
  DenseMatrix out(a.rows(), b.rows());
  as_eigen(out).noalias() = as_eigen(a) * as_eigen(b).transpose();
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw_shape("hadamard", a.shape_str(), b.shape_str());
  DenseMatrix out = a;
  double* o = out.data();
  const double* bb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] *= bb[i];
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i) out(j, i) = a(i, j);
  return out;
}

DenseMatrix add_scaled(const DenseMatrix& a, double scale, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw_shape("add_scaled", a.shape_str(), b.shape_str());
  DenseMatrix out = a;
  double* o = out.data();
  const double* bb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] += scale * bb[i];
  return out;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw_shape("subtract", a.shape_str(), b.shape_str());
  DenseMatrix out = a;
  double* o = out.data();
  const double* bb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] -= bb[i];
  return out;
}

double frobenius_sq(const DenseMatrix& a) {
  double acc = 0.0;
  const double* p = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) acc += p[i] * p[i];
  return acc;
}

double frobenius_sq(const SparseMatrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return acc;
}

double trace(const DenseMatrix& a) {
  const int n = std::min(a.rows(), a.cols());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a(i, i);
  return acc;
}

double residual_frobenius_sq(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.rows() != d.rows() || s.cols() != d.cols()) {
    throw_shape("residual_frobenius_sq", s.shape_str(), d.shape_str());
  }
  DenseMatrix r = d;
  for (const Triplet& t : s.triplets()) r(t.row, t.col) -= t.value;
  return frobenius_sq(r);
}

DenseMatrix columns_l2_normalized(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (int j = 0; j < a.cols(); ++j) {
    double norm_sq = 0.0;
    for (int i = 0; i < a.rows(); ++i) norm_sq += a(i, j) * a(i, j);
    if (norm_sq <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int i = 0; i < a.rows(); ++i) out(i, j) *= inv;
  }
  return out;
}

DenseMatrix columns_sum_normalized(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (int j = 0; j < a.cols(); ++j) {
    double sum = 0.0;
    for (int i = 0; i < a.rows(); ++i) sum += a(i, j);
    if (sum == 0.0) continue;
    const double inv = 1.0 / sum;
    for (int i = 0; i < a.rows(); ++i) out(i, j) *= inv;
  }
  return out;
}

DenseMatrix seeded_uniform_fill(int rows, int cols, std::uint64_t seed,
                                double low, double high) {
  if (low <= 0.0) {
    throw ValidationError("seeded_uniform_fill: low must be > 0, got " +
                          std::to_string(low));
  }
  if (high <= low) {
    throw ValidationError("seeded_uniform_fill: need high > low");
  }
  DenseMatrix out(rows, cols);
  Rng rng(seed);
  double* p = out.data();
  // high - u*(high-low) with u in [0,1) lands in (low, high].
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = high - rng.uniform() * (high - low);
  return out;
}

// ---- MatrixMarket -------------------------------------------------------

namespace {
constexpr const char* kMmHeader = "%%MatrixMarket matrix coordinate real general";

void write_mm_entries(std::ofstream& out, int rows, int cols,
                      const std::vector<Triplet>& entries) {
  out << kMmHeader << "\n";
  out << rows << " " << cols << " " << entries.size() << "\n";
  char buf[64];
  for (const Triplet& t : entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", t.value);
    out << (t.row + 1) << " " << (t.col + 1) << " " << buf << "\n";
  }
}
}  // namespace

void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  write_mm_entries(out, m.rows(), m.cols(), m.triplets());
}

void write_matrix_market(const std::filesystem::path& path, const DenseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  std::vector<Triplet> entries;
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) entries.push_back({i, j, m(i, j)});
  write_mm_entries(out, m.rows(), m.cols(), entries);
}

SparseMatrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open matrix file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty matrix file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMmHeader) {
    throw ValidationError("unsupported MatrixMarket header in " + path.string() +
                          " (expected '" + kMmHeader + "')");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);
  long rows = 0, cols = 0, nnz = 0;
  if (!(dims >> rows >> cols >> nnz) || rows <= 0 || cols <= 0 || nnz < 0) {
    throw ValidationError("malformed MatrixMarket size line in " + path.string());
  }
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (long e = 0; e < nnz; ++e) {
    long i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) {
      throw ValidationError("truncated MatrixMarket entries in " + path.string());
    }
    triplets.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1), v});
  }
  return SparseMatrix(static_cast<int>(rows), static_cast<int>(cols), std::move(triplets));
}

}  // namespace dnmf
