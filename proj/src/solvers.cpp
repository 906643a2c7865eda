#include "dnmf/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dnmf/error.hpp"
#include "dnmf/rng.hpp"

namespace dnmf {

namespace {

// X <- X .* num ./ (den + eps), the common multiplicative-update shape.
void mu_apply(DenseMatrix& x, const DenseMatrix& num, const DenseMatrix& den) {
  double* xp = x.data();
  const double* np = num.data();
  const double* dp = den.data();
  for (std::size_t i = 0; i < x.size(); ++i) xp[i] *= np[i] / (dp[i] + kEpsDiv);
}

// Damped variant for the quartic affinity term: X <- X .* sqrt(num ./ (den + eps)).
// The plain ratio overshoots on fourth-order objectives and breaks descent;
// the square root keeps the same fixed points.
void mu_apply_sqrt(DenseMatrix& x, const DenseMatrix& num, const DenseMatrix& den) {
  double* xp = x.data();
  const double* np = num.data();
  const double* dp = den.data();
  for (std::size_t i = 0; i < x.size(); ++i) xp[i] *= std::sqrt(np[i] / (dp[i] + kEpsDiv));
}

void require_nonnegative(const DenseMatrix& m, const char* name) {
  if (m.size() > 0 && m.min_coeff() < 0.0) {
    throw ComputeError(std::string("negative entry detected in ") + name +
                       " (nonnegativity contract violated)");
  }
}

void require_shape(bool ok, const std::string& detail) {
  if (!ok) throw ValidationError("shape mismatch: " + detail);
}

double max_abs_min(const DenseMatrix& x, const DenseMatrix& grad) {
  double worst = 0.0;
  const double* xp = x.data();
  const double* gp = grad.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::abs(std::min(xp[i], gp[i])));
  }
  return worst;
}

DenseMatrix scaled(const DenseMatrix& a, double s) {
  DenseMatrix out = a;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] *= s;
  return out;
}

// K x N product Cᵀ D computed through the CSC-friendly path.
DenseMatrix ct_d(const SparseMatrix& d, const DenseMatrix& c) {
  return transpose(matmul_at_b(d, c));
}

double squared_norm_dtd(const SparseMatrix& d) {
  return frobenius_sq(matmul_at_b(d, d.to_dense()));
}

double objective_cdnmf(const SparseMatrix& d, const DenseMatrix& f,
                       const DenseMatrix& c, const DenseMatrix& w,
                       const DenseMatrix& t, double l1, double l2,
                       double norm_dtd_sq) {
  const double fit = residual_frobenius_sq(d, matmul(c, w));
  const double regression = frobenius_sq(subtract(f, matmul(t, w)));
  const double affinity = frobenius_sq(matmul_at_b(c, c)) -
                          2.0 * frobenius_sq(matmul_at_b(d, c)) + norm_dtd_sq;
  return fit + l1 * regression + l2 * affinity;
}

struct MonotonicityGuard {
  double obj0 = 0.0;
  double prev = 0.0;

  void start(double obj) { obj0 = prev = obj; }

  void check(double obj, int iteration) {
    // Relative slack 1e-10; the absolute floor keeps round-off jitter at
    // near-perfect fits (objective ~1e-24) from counting as an increase.
    const double slack = 1e-10 * std::max(prev, 1e-14 * (1.0 + obj0));
    if (obj - prev > slack) {
      throw ComputeError("monotonicity violated at iteration " +
                         std::to_string(iteration) + ": objective rose from " +
                         std::to_string(prev) + " to " + std::to_string(obj));
    }
    prev = obj;
  }
};

}  // namespace

Algo parse_algo(const std::string& name) {
  if (name == "nmf") return Algo::kNmf;
  if (name == "bdnmf") return Algo::kBdnmf;
  if (name == "sdnmf") return Algo::kSdnmf;
  if (name == "cdnmf") return Algo::kCdnmf;
  throw ValidationError("unknown algorithm '" + name +
                        "' (expected nmf|bdnmf|sdnmf|cdnmf)");
}

std::string to_string(Algo algo) {
  switch (algo) {
    case Algo::kNmf: return "nmf";
    case Algo::kBdnmf: return "bdnmf";
    case Algo::kSdnmf: return "sdnmf";
    case Algo::kCdnmf: return "cdnmf";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (topics < 2) throw ValidationError("topics must be >= 2");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ValidationError("lambda1/lambda2 must be >= 0");
  if (!(rel_tol > 0.0)) throw ValidationError("rel_tol must be > 0");
  if (max_iter < 0) throw ValidationError("max_iter must be >= 0");
}

double objective(Algo algo, const SparseMatrix& D, const DenseMatrix& F,
                 const DenseMatrix& C, const DenseMatrix& W, const DenseMatrix& T,
                 double lambda1, double lambda2) {
  require_nonnegative(C, "C");
  require_nonnegative(W, "W");
  require_nonnegative(T, "T");
  require_nonnegative(F, "f(D)");
  switch (algo) {
    case Algo::kNmf:
      require_shape(C.cols() == W.rows() && C.rows() == D.rows() && W.cols() == D.cols(),
                    "nmf objective with D " + D.shape_str() + ", C " + C.shape_str() +
                        ", W " + W.shape_str());
      return residual_frobenius_sq(D, matmul(C, W));
    case Algo::kBdnmf:
      require_shape(C.cols() == F.rows() && C.rows() == D.rows() && F.cols() == D.cols(),
                    "bdnmf objective with D " + D.shape_str() + ", C " + C.shape_str() +
                        ", f(D) " + F.shape_str());
      return residual_frobenius_sq(D, matmul(C, F));
    case Algo::kSdnmf:
      require_shape(F.same_shape(T) && C.cols() == F.rows() && C.rows() == D.rows() &&
                        F.cols() == D.cols(),
                    "sdnmf objective with D " + D.shape_str() + ", C " + C.shape_str() +
                        ", T " + T.shape_str() + ", f(D) " + F.shape_str());
      return residual_frobenius_sq(D, matmul(C, hadamard(F, T)));
    case Algo::kCdnmf:
      require_shape(C.cols() == W.rows() && C.rows() == D.rows() && W.cols() == D.cols() &&
                        T.rows() == F.rows() && T.cols() == W.rows() &&
                        F.cols() == W.cols(),
                    "cdnmf objective with D " + D.shape_str() + ", C " + C.shape_str() +
                        ", W " + W.shape_str() + ", T " + T.shape_str() + ", f(D) " +
                        F.shape_str());
      return objective_cdnmf(D, F, C, W, T, lambda1, lambda2, squared_norm_dtd(D));
  }
  throw ComputeError("unreachable algo");
}

void nmf_step(const SparseMatrix& D, DenseMatrix& C, DenseMatrix& W) {
  require_shape(C.rows() == D.rows() && C.cols() == W.rows() && W.cols() == D.cols(),
                "nmf_step with D " + D.shape_str() + ", C " + C.shape_str() + ", W " +
                    W.shape_str());
  const DenseMatrix ctd = ct_d(D, C);
  const DenseMatrix gram_c = matmul_at_b(C, C);
  mu_apply(W, ctd, matmul(gram_c, W));
  const DenseMatrix dwt = matmul_a_bt(D, W);
  const DenseMatrix gram_w = matmul_a_bt(W, W);
  mu_apply(C, dwt, matmul(C, gram_w));
}

void bdnmf_step(const SparseMatrix& D, const DenseMatrix& F, DenseMatrix& C) {
  require_shape(C.rows() == D.rows() && C.cols() == F.rows() && F.cols() == D.cols(),
                "bdnmf_step with D " + D.shape_str() + ", C " + C.shape_str() +
                    ", f(D) " + F.shape_str());
  const DenseMatrix dft = matmul_a_bt(D, F);
  const DenseMatrix gram_f = matmul_a_bt(F, F);
  mu_apply(C, dft, matmul(C, gram_f));
}

void sdnmf_step(const SparseMatrix& D, const DenseMatrix& F, DenseMatrix& C,
                DenseMatrix& T) {
  require_shape(C.rows() == D.rows() && C.cols() == F.rows() && F.cols() == D.cols() &&
                    F.same_shape(T),
                "sdnmf_step with D " + D.shape_str() + ", C " + C.shape_str() + ", T " +
                    T.shape_str() + ", f(D) " + F.shape_str());
  const DenseMatrix ctd = ct_d(D, C);
  const DenseMatrix gram_c = matmul_at_b(C, C);
  DenseMatrix masked = hadamard(F, T);
  mu_apply(T, hadamard(ctd, F), hadamard(matmul(gram_c, masked), F));
  masked = hadamard(F, T);
  const DenseMatrix dst = matmul_a_bt(D, masked);
  const DenseMatrix gram_s = matmul_a_bt(masked, masked);
  mu_apply(C, dst, matmul(C, gram_s));
}

void cdnmf_step(const SparseMatrix& D, const DenseMatrix& F, DenseMatrix& C,
                DenseMatrix& W, DenseMatrix& T, double lambda1, double lambda2) {
  require_shape(C.rows() == D.rows() && C.cols() == W.rows() && W.cols() == D.cols() &&
                    T.rows() == F.rows() && T.cols() == W.rows() && F.cols() == D.cols(),
                "cdnmf_step with D " + D.shape_str() + ", C " + C.shape_str() + ", W " +
                    W.shape_str() + ", T " + T.shape_str() + ", f(D) " + F.shape_str());
  const DenseMatrix ctd = ct_d(D, C);
  const DenseMatrix gram_c = matmul_at_b(C, C);
  const DenseMatrix gram_t = matmul_at_b(T, T);
  mu_apply(W, add_scaled(ctd, lambda1, matmul_at_b(T, F)),
           add_scaled(matmul(gram_c, W), lambda1, matmul(gram_t, W)));

  const DenseMatrix dwt = matmul_a_bt(D, W);
  const DenseMatrix gram_w = matmul_a_bt(W, W);
  const DenseMatrix num_c = add_scaled(dwt, 2.0 * lambda2, matmul(D, matmul_at_b(D, C)));
  const DenseMatrix den_c =
      add_scaled(matmul(C, gram_w), 2.0 * lambda2, matmul(C, gram_c));
  if (lambda2 > 0.0) {
    mu_apply_sqrt(C, num_c, den_c);
  } else {
    mu_apply(C, num_c, den_c);
  }

  mu_apply(T, matmul_a_bt(F, W), matmul(T, gram_w));
}

KktResiduals kkt_residual(Algo algo, const SparseMatrix& D, const DenseMatrix& F,
                          const DenseMatrix& C, const DenseMatrix& W,
                          const DenseMatrix& T, double lambda1, double lambda2) {
  KktResiduals out;
  switch (algo) {
    case Algo::kNmf: {
      const DenseMatrix gram_w = matmul_a_bt(W, W);
      out.c = max_abs_min(C, scaled(subtract(matmul(C, gram_w), matmul_a_bt(D, W)), 2.0));
      const DenseMatrix gram_c = matmul_at_b(C, C);
      out.w = max_abs_min(W, scaled(subtract(matmul(gram_c, W), ct_d(D, C)), 2.0));
      return out;
    }
    case Algo::kBdnmf: {
      const DenseMatrix gram_f = matmul_a_bt(F, F);
      out.c = max_abs_min(C, scaled(subtract(matmul(C, gram_f), matmul_a_bt(D, F)), 2.0));
      return out;
    }
    case Algo::kSdnmf: {
      const DenseMatrix masked = hadamard(F, T);
      const DenseMatrix gram_s = matmul_a_bt(masked, masked);
      out.c =
          max_abs_min(C, scaled(subtract(matmul(C, gram_s), matmul_a_bt(D, masked)), 2.0));
      const DenseMatrix gram_c = matmul_at_b(C, C);
      out.t = max_abs_min(
          T, hadamard(scaled(subtract(matmul(gram_c, masked), ct_d(D, C)), 2.0), F));
      return out;
    }
    case Algo::kCdnmf: {
      const DenseMatrix gram_w = matmul_a_bt(W, W);
      const DenseMatrix gram_c = matmul_at_b(C, C);
      DenseMatrix grad_c = scaled(subtract(matmul(C, gram_w), matmul_a_bt(D, W)), 2.0);
      grad_c = add_scaled(grad_c, 4.0 * lambda2,
                          subtract(matmul(C, gram_c), matmul(D, matmul_at_b(D, C))));
      out.c = max_abs_min(C, grad_c);
      const DenseMatrix gram_t = matmul_at_b(T, T);
      DenseMatrix grad_w = scaled(subtract(matmul(gram_c, W), ct_d(D, C)), 2.0);
      grad_w = add_scaled(grad_w, 2.0 * lambda1,
                          subtract(matmul(gram_t, W), matmul_at_b(T, F)));
      out.w = max_abs_min(W, grad_w);
      out.t = max_abs_min(
          T, scaled(subtract(matmul(T, gram_w), matmul_a_bt(F, W)), 2.0 * lambda1));
      return out;
    }
  }
  throw ComputeError("unreachable algo");
}

DenseMatrix effective_w(Algo algo, const FactorState& state, const DenseMatrix& F) {
  switch (algo) {
    case Algo::kNmf:
    case Algo::kCdnmf: return state.W;
    case Algo::kBdnmf: return F;
    case Algo::kSdnmf: return hadamard(F, state.T);
  }
  throw ComputeError("unreachable algo");
}

std::vector<int> predicted_labels(const DenseMatrix& w_effective) {
  std::vector<int> labels(w_effective.cols(), 0);
  for (int j = 0; j < w_effective.cols(); ++j) {
    int best = 0;
    for (int k = 1; k < w_effective.rows(); ++k) {
      if (w_effective(k, j) > w_effective(best, j)) best = k;
    }
    labels[j] = best;
  }
  return labels;
}

SolveResult solve(const SolverConfig& cfg, const SparseMatrix& D, const DenseMatrix* F,
                  const SolveOptions& opts) {
  cfg.validate();
  const int v = D.rows();
  const int n = D.cols();
  const int k = cfg.topics;

  const bool needs_f = cfg.algo != Algo::kNmf;
  if (needs_f) {
    if (F == nullptr) {
      throw ValidationError(to_string(cfg.algo) + " requires a cluster indicator f(D)");
    }
    require_shape(F->rows() == k && F->cols() == n,
                  "f(D) " + F->shape_str() + " does not match topics=" + std::to_string(k) +
                      ", docs=" + std::to_string(n));
    require_nonnegative(*F, "f(D)");
  }
  static const DenseMatrix kEmpty;
  const DenseMatrix& f = needs_f ? *F : kEmpty;

  // Positional init streams so algorithms sharing a factor role start from
  // identical matrices under one seed. Entries are uniform in (0, 1].
  const auto unit_fill = [&](int rows, int cols, std::uint64_t stream) {
    DenseMatrix m(rows, cols);
    Rng rng(derive_seed(cfg.seed, "factor", stream));
    double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) p[i] = 1.0 - rng.uniform();
    return m;
  };

  FactorState state;
  state.C = unit_fill(v, k, 0);
  if (cfg.algo == Algo::kNmf || cfg.algo == Algo::kCdnmf) state.W = unit_fill(k, n, 1);
  if (cfg.algo == Algo::kSdnmf) state.T = unit_fill(k, n, 1);
  if (cfg.algo == Algo::kCdnmf) state.T = unit_fill(k, k, 2);

  // bdnmf per-iteration products are constant; hoist them.
  DenseMatrix bd_dft, bd_gram_f;
  if (cfg.algo == Algo::kBdnmf) {
    bd_dft = matmul_a_bt(D, f);
    bd_gram_f = matmul_a_bt(f, f);
  }
  double norm_dtd_sq = 0.0;
  if (cfg.algo == Algo::kCdnmf) norm_dtd_sq = squared_norm_dtd(D);

  const auto eval_objective = [&]() {
    switch (cfg.algo) {
      case Algo::kNmf: return residual_frobenius_sq(D, matmul(state.C, state.W));
      case Algo::kBdnmf: return residual_frobenius_sq(D, matmul(state.C, f));
      case Algo::kSdnmf:
        return residual_frobenius_sq(D, matmul(state.C, hadamard(f, state.T)));
      case Algo::kCdnmf:
        return objective_cdnmf(D, f, state.C, state.W, state.T, cfg.lambda1, cfg.lambda2,
                               norm_dtd_sq);
    }
    throw ComputeError("unreachable algo");
  };
  const auto eval_kkt = [&]() {
    return kkt_residual(cfg.algo, D, f, state.C, state.W, state.T, cfg.lambda1,
                        cfg.lambda2);
  };

  SolveResult result;
  MonotonicityGuard guard;
  double obj = eval_objective();
  guard.start(obj);
  state.objective_trace.push_back(obj);
  result.trace.push_back({0, obj, opts.kkt_per_iteration ? eval_kkt() : KktResiduals{}});

  int iter = 0;
  for (iter = 1; iter <= cfg.max_iter; ++iter) {
    switch (cfg.algo) {
      case Algo::kNmf: nmf_step(D, state.C, state.W); break;
      case Algo::kBdnmf: mu_apply(state.C, bd_dft, matmul(state.C, bd_gram_f)); break;
      case Algo::kSdnmf: sdnmf_step(D, f, state.C, state.T); break;
      case Algo::kCdnmf:
        cdnmf_step(D, f, state.C, state.W, state.T, cfg.lambda1, cfg.lambda2);
        break;
    }
    const double prev = obj;
    obj = eval_objective();
    guard.check(obj, iter);
    state.objective_trace.push_back(obj);
    result.trace.push_back(
        {iter, obj, opts.kkt_per_iteration ? eval_kkt() : KktResiduals{}});
    if (std::abs(obj - prev) / std::max(prev, 1e-30) < cfg.rel_tol) {
      result.converged = true;
      break;
    }
  }
  state.iteration = std::min(iter, cfg.max_iter);
  if (!opts.kkt_per_iteration) result.trace.back().kkt = eval_kkt();
  result.state = std::move(state);
  return result;
}

}  // namespace dnmf
