#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dnmf {

/// Denominator floor used inside every multiplicative-update quotient.
/// The update rules divide by matrix entries that can reach exact zero.
inline constexpr double kEpsDiv = 1e-12;

/// Column-major dense matrix of doubles. Values are immutable by convention
/// once an operation has produced them; all operations below are pure.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols);
  static DenseMatrix zeros(int rows, int cols) { return DenseMatrix(rows, cols); }
  static DenseMatrix identity(int n);
  static DenseMatrix constant(int rows, int cols, double value);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int i, int j) { return values_[static_cast<std::size_t>(j) * rows_ + i]; }
  double operator()(int i, int j) const { return values_[static_cast<std::size_t>(j) * rows_ + i]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double min_coeff() const;
  double max_coeff() const;
  bool same_shape(const DenseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Nonnegative sparse matrix: coordinate triplets plus a compiled
/// column-compressed form for products. Explicit zeros are dropped;
/// negative values and duplicate coordinates are rejected.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols, std::vector<Triplet> triplets);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<Triplet>& triplets() const { return triplets_; }

  // CSC access: column j holds entries [col_ptr[j], col_ptr[j+1]).
  const std::vector<std::size_t>& col_ptr() const { return col_ptr_; }
  const std::vector<int>& row_index() const { return row_index_; }
  const std::vector<double>& values() const { return values_; }

  DenseMatrix to_dense() const;
  std::string shape_str() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Triplet> triplets_;       // sorted by (col, row)
  std::vector<std::size_t> col_ptr_;
  std::vector<int> row_index_;
  std::vector<double> values_;
};

// ---- products ----------------------------------------------------------

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul(const SparseMatrix& a, const DenseMatrix& b);
/// aᵀ · b for sparse a: the access pattern matches the CSC layout.
DenseMatrix matmul_at_b(const SparseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);
/// a · bᵀ.
DenseMatrix matmul_a_bt(const SparseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b);

// ---- elementwise and reductions ----------------------------------------

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
/// a + scale * b, elementwise.
DenseMatrix add_scaled(const DenseMatrix& a, double scale, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);

double frobenius_sq(const DenseMatrix& a);
double frobenius_sq(const SparseMatrix& a);
double trace(const DenseMatrix& a);

/// ‖s − d‖²_F for sparse s against a dense matrix of the same shape,
/// accumulated from the explicit residual (stable near perfect fits).
double residual_frobenius_sq(const SparseMatrix& s, const DenseMatrix& d);

/// Columns scaled to unit L2 norm; zero columns stay zero.
DenseMatrix columns_l2_normalized(const DenseMatrix& a);
/// Columns scaled to sum 1; zero columns stay zero. Used at reporting time.
DenseMatrix columns_sum_normalized(const DenseMatrix& a);

/// Deterministic uniform fill with entries in (low, high].
/// low must be strictly positive.
DenseMatrix seeded_uniform_fill(int rows, int cols, std::uint64_t seed,
                                double low, double high);

// ---- MatrixMarket coordinate IO ----------------------------------------

void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& m);
void write_matrix_market(const std::filesystem::path& path, const DenseMatrix& m);
SparseMatrix read_matrix_market(const std::filesystem::path& path);

}  // namespace dnmf
