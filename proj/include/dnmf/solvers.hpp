#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dnmf/matrix.hpp"

namespace dnmf {

enum class Algo { kNmf, kBdnmf, kSdnmf, kCdnmf };

Algo parse_algo(const std::string& name);
std::string to_string(Algo algo);

struct SolverConfig {
  Algo algo = Algo::kNmf;
  int topics = 2;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  int max_iter = 500;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-factor stationarity measure: max over entries of |min(X_ij, grad_ij)|.
/// A field is NaN when the algorithm has no such factor.
struct KktResiduals {
  double c = std::numeric_limits<double>::quiet_NaN();
  double w = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  KktResiduals kkt;
};

/// Factor iterate. W is empty for bdnmf (the topic-document matrix is the
/// cluster indicator itself); T is the mask weight (sdnmf, topics x docs)
/// or the square transform (cdnmf, topics x topics).
struct FactorState {
  DenseMatrix C;
  DenseMatrix W;
  DenseMatrix T;
  int iteration = 0;
  std::vector<double> objective_trace;
};

struct SolveResult {
  FactorState state;
  std::vector<IterationRecord> trace;
  bool converged = false;
};

struct SolveOptions {
  /// Record KKT residuals on every trace row (final row always gets them).
  bool kkt_per_iteration = true;
};

// ---- objective and updates ----------------------------------------------
// F is the fixed cluster indicator; pass an empty DenseMatrix where an
// algorithm does not use it (plain nmf).

double objective(Algo algo, const SparseMatrix& D, const DenseMatrix& F,
                 const DenseMatrix& C, const DenseMatrix& W, const DenseMatrix& T,
                 double lambda1, double lambda2);

/// One multiplicative sweep; factors updated in the fixed order the
/// coordinate-descent analysis requires (W before C before T).
void nmf_step(const SparseMatrix& D, DenseMatrix& C, DenseMatrix& W);
void bdnmf_step(const SparseMatrix& D, const DenseMatrix& F, DenseMatrix& C);
void sdnmf_step(const SparseMatrix& D, const DenseMatrix& F, DenseMatrix& C,
                DenseMatrix& T);
void cdnmf_step(const SparseMatrix& D, const DenseMatrix& F, DenseMatrix& C,
                DenseMatrix& W, DenseMatrix& T, double lambda1, double lambda2);

KktResiduals kkt_residual(Algo algo, const SparseMatrix& D, const DenseMatrix& F,
                          const DenseMatrix& C, const DenseMatrix& W,
                          const DenseMatrix& T, double lambda1, double lambda2);

SolveResult solve(const SolverConfig& cfg, const SparseMatrix& D,
                  const DenseMatrix* F, const SolveOptions& opts = {});

/// The topic-document matrix the algorithm effectively factorizes with:
/// W for nmf/cdnmf, F for bdnmf, F .* T for sdnmf.
DenseMatrix effective_w(Algo algo, const FactorState& state, const DenseMatrix& F);

/// Per-column argmax of the effective W, ties to the lowest topic index.
std::vector<int> predicted_labels(const DenseMatrix& w_effective);

}  // namespace dnmf
