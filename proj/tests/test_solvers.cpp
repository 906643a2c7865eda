#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "dnmf/error.hpp"
#include "dnmf/matrix.hpp"
#include "dnmf/rng.hpp"
#include "dnmf/solvers.hpp"

using namespace dnmf;

namespace {

DenseMatrix random_dense(int rows, int cols, std::uint64_t seed, double low = 0.05,
                         double high = 1.0) {
  DenseMatrix m(rows, cols);
  Rng rng(seed);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(low, high);
  return m;
}

SparseMatrix random_sparse(int rows, int cols, std::uint64_t seed, double density = 0.6) {
  Rng rng(seed);
  std::vector<Triplet> triplets;
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i)
      if (rng.uniform() < density) triplets.push_back({i, j, rng.uniform(0.05, 1.0)});
  if (triplets.empty()) triplets.push_back({0, 0, 0.5});
  return SparseMatrix(rows, cols, triplets);
}

DenseMatrix random_onehot(int k, int n, std::uint64_t seed) {
  DenseMatrix f(k, n);
  Rng rng(seed);
  for (int j = 0; j < n; ++j) f(static_cast<int>(rng.below(k)), j) = 1.0;
  return f;
}

bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Central finite differences of the objective with respect to one factor.
// This is the independent oracle for the analytic gradients.
template <typename ObjFn>
DenseMatrix fd_gradient(const DenseMatrix& x, ObjFn obj, double h = 1e-6) {
  DenseMatrix grad(x.rows(), x.cols());
  DenseMatrix probe = x;
  for (int j = 0; j < x.cols(); ++j) {
    for (int i = 0; i < x.rows(); ++i) {
      const double saved = probe(i, j);
      probe(i, j) = saved + h;
      const double plus = obj(probe);
      probe(i, j) = saved - h;
      const double minus = obj(probe);
      probe(i, j) = saved;
      grad(i, j) = (plus - minus) / (2.0 * h);
    }
  }
  return grad;
}

struct GradPack {
  DenseMatrix c, w, t;
};

// Analytic gradients mirrored from the KKT system, exposed for the FD check.
GradPack analytic_gradients(Algo algo, const SparseMatrix& d, const DenseMatrix& f,
                            const DenseMatrix& c, const DenseMatrix& w,
                            const DenseMatrix& t, double l1, double l2) {
  GradPack g;
  const auto scaled2 = [](DenseMatrix m, double s) {
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] *= s;
    return m;
  };
  switch (algo) {
    case Algo::kBdnmf: {
      g.c = scaled2(subtract(matmul(c, matmul_a_bt(f, f)), matmul_a_bt(d, f)), 2.0);
      return g;
    }
    case Algo::kSdnmf: {
      const DenseMatrix s = hadamard(f, t);
      g.c = scaled2(subtract(matmul(c, matmul_a_bt(s, s)), matmul_a_bt(d, s)), 2.0);
      g.t = hadamard(
          scaled2(subtract(matmul(matmul_at_b(c, c), s), transpose(matmul_at_b(d, c))), 2.0),
          f);
      return g;
    }
    case Algo::kCdnmf: {
      const DenseMatrix gram_w = matmul_a_bt(w, w);
      const DenseMatrix gram_c = matmul_at_b(c, c);
      g.c = add_scaled(
          scaled2(subtract(matmul(c, gram_w), matmul_a_bt(d, w)), 2.0), 4.0 * l2,
          subtract(matmul(c, gram_c), matmul(d, matmul_at_b(d, c))));
      g.w = add_scaled(
          scaled2(subtract(matmul(gram_c, w), transpose(matmul_at_b(d, c))), 2.0),
          2.0 * l1, subtract(matmul(matmul_at_b(t, t), w), matmul_at_b(t, f)));
      g.t = scaled2(subtract(matmul(t, gram_w), matmul_a_bt(f, w)), 2.0 * l1);
      return g;
    }
    default: throw ComputeError("not used here");
  }
}

}  // namespace

TEST_CASE("objective examples: perfect reconstruction, vanishing regularizers") {
  // D = C f(D) exactly -> bdnmf objective 0
  const DenseMatrix c = random_dense(6, 3, 11);
  const DenseMatrix f = random_onehot(3, 8, 12);
  const DenseMatrix cf = matmul(c, f);
  std::vector<Triplet> triplets;
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 6; ++i)
      if (cf(i, j) > 0.0) triplets.push_back({i, j, cf(i, j)});
  const SparseMatrix d(6, 8, triplets);
  CHECK(objective(Algo::kBdnmf, d, f, c, {}, {}, 1, 1) ==
        doctest::Approx(0.0).epsilon(1e-12));

  // lambda1 = lambda2 = 0 -> cdnmf equals the plain Frobenius objective
  const SparseMatrix d2 = random_sparse(5, 7, 21);
  const DenseMatrix c2 = random_dense(5, 3, 22);
  const DenseMatrix w2 = random_dense(3, 7, 23);
  const DenseMatrix t2 = random_dense(3, 3, 24);
  const DenseMatrix f2 = random_onehot(3, 7, 25);
  CHECK(objective(Algo::kCdnmf, d2, f2, c2, w2, t2, 0.0, 0.0) ==
        doctest::Approx(objective(Algo::kNmf, d2, f2, c2, w2, t2, 0, 0)).epsilon(1e-12));

  // 2x2 identity fixture: every term evaluates to zero
  const SparseMatrix eye(2, 2, {{0, 0, 1.0}, {1, 1, 1.0}});
  const DenseMatrix i2 = DenseMatrix::identity(2);
  CHECK(objective(Algo::kCdnmf, eye, i2, i2, i2, i2, 1.0, 1.0) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("objective rejects negative factor entries") {
  const SparseMatrix d = random_sparse(4, 5, 31);
  DenseMatrix c = random_dense(4, 2, 32);
  DenseMatrix w = random_dense(2, 5, 33);
  c(1, 1) = -0.25;
  CHECK_THROWS_AS(objective(Algo::kNmf, d, {}, c, w, {}, 1, 1), ComputeError);
}

TEST_CASE("bdnmf fixed point and one-step identity fixture") {
  // D = I2, F = I2, C0 = 0.5 everywhere -> one step lands on I within eps effects
  const SparseMatrix d(2, 2, {{0, 0, 1.0}, {1, 1, 1.0}});
  const DenseMatrix f = DenseMatrix::identity(2);
  DenseMatrix c = DenseMatrix::constant(2, 2, 0.5);
  bdnmf_step(d, f, c);
  CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(c(1, 1) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(c(0, 1) == 0.0);
  CHECK(c(1, 0) == 0.0);

  // ratio-1 fixed point: C already optimal stays put (up to the eps floor)
  DenseMatrix c2 = c;
  bdnmf_step(d, f, c2);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i)
      CHECK(c2(i, j) == doctest::Approx(c(i, j)).epsilon(1e-9));
}

TEST_CASE("bdnmf zero row of D is absorbing") {
  // row 1 of D empty -> numerator row is zero -> C row goes to zero
  const SparseMatrix d(3, 4, {{0, 0, 1.0}, {0, 2, 0.5}, {2, 1, 2.0}, {2, 3, 1.0}});
  const DenseMatrix f = random_onehot(2, 4, 41);
  DenseMatrix c = random_dense(3, 2, 42);
  bdnmf_step(d, f, c);
  CHECK(c(1, 0) == 0.0);
  CHECK(c(1, 1) == 0.0);
}

TEST_CASE("sdnmf with all-ones mask matches plain nmf bitwise") {
  const SparseMatrix d = random_sparse(6, 8, 51);
  const DenseMatrix f = DenseMatrix::constant(3, 8, 1.0);
  DenseMatrix c1 = random_dense(6, 3, 52);
  DenseMatrix w1 = random_dense(3, 8, 53);
  DenseMatrix c2 = c1;
  DenseMatrix t2 = w1;
  for (int iter = 0; iter < 25; ++iter) {
    nmf_step(d, c1, w1);
    sdnmf_step(d, f, c2, t2);
    REQUIRE(bitwise_equal(c1, c2));
    REQUIRE(bitwise_equal(w1, t2));
  }
}

TEST_CASE("sdnmf masked entries stay dark") {
  const SparseMatrix d = random_sparse(6, 8, 61);
  DenseMatrix f = random_onehot(3, 8, 62);
  DenseMatrix c = random_dense(6, 3, 63);
  DenseMatrix t = random_dense(3, 8, 64);
  for (int iter = 0; iter < 10; ++iter) {
    sdnmf_step(d, f, c, t);
    const DenseMatrix w_eff = hadamard(f, t);
    for (int j = 0; j < 8; ++j)
      for (int k = 0; k < 3; ++k)
        if (f(k, j) == 0.0) CHECK(w_eff(k, j) == 0.0);
  }
}

TEST_CASE("cdnmf with zero regularizers matches plain nmf bitwise") {
  for (int trial = 0; trial < 5; ++trial) {
    const SparseMatrix d = random_sparse(6, 8, 71 + trial);
    const DenseMatrix f = random_onehot(3, 8, 81 + trial);
    DenseMatrix c1 = random_dense(6, 3, 91 + trial);
    DenseMatrix w1 = random_dense(3, 8, 101 + trial);
    DenseMatrix c2 = c1;
    DenseMatrix w2 = w1;
    DenseMatrix t2 = random_dense(3, 3, 111 + trial);
    for (int iter = 0; iter < 20; ++iter) {
      nmf_step(d, c1, w1);
      cdnmf_step(d, f, c2, w2, t2, 0.0, 0.0);
      REQUIRE(bitwise_equal(c1, c2));
      REQUIRE(bitwise_equal(w1, w2));
    }
  }
}

TEST_CASE("cdnmf fixed point: ratio-one state is stationary") {
  // At a state where every update ratio is 1 the sqrt damping changes nothing.
  const DenseMatrix c_true = random_dense(5, 2, 121);
  const DenseMatrix w_true = random_dense(2, 6, 122);
  const DenseMatrix cw = matmul(c_true, w_true);
  std::vector<Triplet> triplets;
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 5; ++i) triplets.push_back({i, j, cw(i, j)});
  const SparseMatrix d(5, 6, triplets);
  // lambda = 0 and W at the least-squares stationary pair: one nmf sweep from
  // the true factors keeps them (numerically) in place.
  DenseMatrix c = c_true, w = w_true;
  DenseMatrix t = DenseMatrix::identity(2);
  const DenseMatrix f = matmul(t, w);  // so the regression term is exactly met
  DenseMatrix c2 = c, w2 = w, t2 = t;
  cdnmf_step(d, f, c2, w2, t2, 1.0, 0.0);
  for (int j = 0; j < 6; ++j)
    for (int k = 0; k < 2; ++k) CHECK(w2(k, j) == doctest::Approx(w(k, j)).epsilon(1e-8));
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 2; ++k) CHECK(c2(i, k) == doctest::Approx(c(i, k)).epsilon(1e-8));
}

TEST_CASE("cdnmf with a large regression weight pins TW to the indicator") {
  // Separable fixture: disjoint word support per topic.
  const int v = 12, n = 18, k = 3;
  Rng rng(131);
  DenseMatrix c_true(v, k);
  for (int topic = 0; topic < k; ++topic)
    for (int i = 0; i < 4; ++i) c_true(topic * 4 + i, topic) = rng.uniform(0.5, 1.0);
  const DenseMatrix f = random_onehot(k, n, 132);
  const DenseMatrix cw = matmul(c_true, f);
  std::vector<Triplet> triplets;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < v; ++i)
      if (cw(i, j) > 0.0) triplets.push_back({i, j, cw(i, j)});
  const SparseMatrix d(v, n, triplets);

  SolverConfig cfg;
  cfg.algo = Algo::kCdnmf;
  cfg.topics = k;
  cfg.lambda1 = 1e6;
  cfg.lambda2 = 1.0;
  cfg.max_iter = 2000;
  cfg.rel_tol = 1e-12;
  cfg.seed = 133;
  const SolveResult result = solve(cfg, d, &f);
  const double gap = frobenius_sq(subtract(f, matmul(result.state.T, result.state.W))) /
                     frobenius_sq(f);
  CHECK(gap < 0.05);
}

TEST_CASE("nmf drives an exactly factorizable fixture to near zero") {
  const DenseMatrix c_true = random_dense(10, 2, 141);
  const DenseMatrix w_true = random_dense(2, 10, 142);
  const DenseMatrix cw = matmul(c_true, w_true);
  std::vector<Triplet> triplets;
  for (int j = 0; j < 10; ++j)
    for (int i = 0; i < 10; ++i) triplets.push_back({i, j, cw(i, j)});
  const SparseMatrix d(10, 10, triplets);
  SolverConfig cfg;
  cfg.algo = Algo::kNmf;
  cfg.topics = 2;
  cfg.max_iter = 500;
  cfg.rel_tol = 1e-30;
  cfg.seed = 143;
  const SolveResult result = solve(cfg, d, nullptr);
  const double initial = result.state.objective_trace.front();
  const double final_obj = result.state.objective_trace.back();
  CHECK(final_obj <= 1e-6 * initial);
}

TEST_CASE("nmf zero data collapses C after one step") {
  // numerators vanish when D has no mass in a row/column pair
  const SparseMatrix d(4, 4, {{0, 0, 1e-300}});  // effectively zero
  DenseMatrix c = random_dense(4, 2, 151);
  DenseMatrix w = random_dense(2, 4, 152);
  nmf_step(d, c, w);
  CHECK(c.max_coeff() <= 1e-250);
}

TEST_CASE("nmf ratio-one fixed point holds within the eps floor") {
  const DenseMatrix c = random_dense(6, 2, 155);
  const DenseMatrix w = random_dense(2, 7, 156);
  const DenseMatrix cw = matmul(c, w);
  std::vector<Triplet> triplets;
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 6; ++i) triplets.push_back({i, j, cw(i, j)});
  const SparseMatrix d(6, 7, triplets);
  DenseMatrix c2 = c, w2 = w;
  nmf_step(d, c2, w2);
  for (int j = 0; j < 7; ++j)
    for (int k = 0; k < 2; ++k) CHECK(w2(k, j) == doctest::Approx(w(k, j)).epsilon(1e-9));
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 2; ++k) CHECK(c2(i, k) == doctest::Approx(c(i, k)).epsilon(1e-9));
}

TEST_CASE("sdnmf fixed point: exact masked factorization is stationary") {
  const DenseMatrix c = random_dense(6, 3, 157);
  const DenseMatrix f = random_onehot(3, 9, 158);
  DenseMatrix t = random_dense(3, 9, 159);
  // make the masked product exact: D = C (F .* T)
  const DenseMatrix masked = hadamard(f, t);
  const DenseMatrix cw = matmul(c, masked);
  std::vector<Triplet> triplets;
  for (int j = 0; j < 9; ++j)
    for (int i = 0; i < 6; ++i)
      if (cw(i, j) > 0.0) triplets.push_back({i, j, cw(i, j)});
  const SparseMatrix d(6, 9, triplets);
  DenseMatrix c2 = c, t2 = t;
  sdnmf_step(d, f, c2, t2);
  const DenseMatrix masked2 = hadamard(f, t2);
  for (int j = 0; j < 9; ++j)
    for (int k = 0; k < 3; ++k)
      CHECK(masked2(k, j) == doctest::Approx(masked(k, j)).epsilon(1e-8));
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 3; ++k) CHECK(c2(i, k) == doctest::Approx(c(i, k)).epsilon(1e-8));
}

TEST_CASE("solve trajectory equals manual stepping from the same initial state") {
  const SparseMatrix d = random_sparse(6, 8, 165);
  const DenseMatrix f = random_onehot(3, 8, 166);
  SolverConfig cfg;
  cfg.algo = Algo::kBdnmf;
  cfg.topics = 3;
  cfg.seed = 167;
  cfg.rel_tol = 1e-30;
  cfg.max_iter = 0;
  const SolveResult initial = solve(cfg, d, &f);
  DenseMatrix c = initial.state.C;
  for (int i = 0; i < 5; ++i) bdnmf_step(d, f, c);
  cfg.max_iter = 5;
  const SolveResult solved = solve(cfg, d, &f);
  CHECK(bitwise_equal(solved.state.C, c));
}

TEST_CASE("solve: max_iter 0 returns the initial state with trace length 1") {
  const SparseMatrix d = random_sparse(5, 6, 161);
  SolverConfig cfg;
  cfg.algo = Algo::kNmf;
  cfg.topics = 2;
  cfg.max_iter = 0;
  cfg.seed = 162;
  const SolveResult result = solve(cfg, d, nullptr);
  CHECK(result.state.objective_trace.size() == 1);
  CHECK(result.state.iteration == 0);
  CHECK(result.trace.size() == 1);
}

TEST_CASE("solve: identical seeds give bit-identical runs") {
  const SparseMatrix d = random_sparse(7, 9, 171);
  const DenseMatrix f = random_onehot(3, 9, 172);
  SolverConfig cfg;
  cfg.algo = Algo::kSdnmf;
  cfg.topics = 3;
  cfg.max_iter = 40;
  cfg.seed = 173;
  const SolveResult a = solve(cfg, d, &f);
  const SolveResult b = solve(cfg, d, &f);
  CHECK(bitwise_equal(a.state.C, b.state.C));
  CHECK(bitwise_equal(a.state.T, b.state.T));
  REQUIRE(a.state.objective_trace.size() == b.state.objective_trace.size());
  CHECK(std::memcmp(a.state.objective_trace.data(), b.state.objective_trace.data(),
                    a.state.objective_trace.size() * sizeof(double)) == 0);
}

TEST_CASE("solve: planted separable corpus recovers topic words with true indicator") {
  // 3 topics with disjoint 4-word supports; documents are convex blends of a
  // topic column. The top words per recovered topic must be the planted ones.
  const int v = 12, n = 24, k = 3;
  Rng rng(181);
  DenseMatrix c_true(v, k);
  for (int topic = 0; topic < k; ++topic)
    for (int i = 0; i < 4; ++i) c_true(topic * 4 + i, topic) = rng.uniform(0.4, 1.0);
  DenseMatrix f(k, n);
  for (int j = 0; j < n; ++j) f(j % k, j) = 1.0;
  const DenseMatrix cw = matmul(c_true, f);
  std::vector<Triplet> triplets;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < v; ++i)
      if (cw(i, j) > 0.0) triplets.push_back({i, j, cw(i, j)});
  const SparseMatrix d(v, n, triplets);

  SolverConfig cfg;
  cfg.algo = Algo::kBdnmf;
  cfg.topics = k;
  cfg.max_iter = 500;
  cfg.seed = 182;
  const SolveResult result = solve(cfg, d, &f);
  for (int topic = 0; topic < k; ++topic) {
    // top-4 words of column `topic` must be exactly the planted support
    std::vector<int> order(v);
    for (int i = 0; i < v; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return result.state.C(a, topic) != result.state.C(b, topic)
                 ? result.state.C(a, topic) > result.state.C(b, topic)
                 : a < b;
    });
    for (int r = 0; r < 4; ++r) {
      CHECK(order[r] / 4 == topic);
    }
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const double h = 1e-6;
  const double tol = 1e-4;
  for (int trial = 0; trial < 6; ++trial) {
    const SparseMatrix d = random_sparse(4, 5, 191 + trial, 0.7);
    const DenseMatrix f = random_onehot(2, 5, 201 + trial);
    const DenseMatrix c = random_dense(4, 2, 211 + trial);
    const DenseMatrix w = random_dense(2, 5, 221 + trial);
    const DenseMatrix t_mask = random_dense(2, 5, 231 + trial);
    const DenseMatrix t_square = random_dense(2, 2, 241 + trial);
    const double l1 = 0.7, l2 = 1.3;

    const auto check_close = [&](const DenseMatrix& analytic, const DenseMatrix& fd) {
      for (int j = 0; j < analytic.cols(); ++j)
        for (int i = 0; i < analytic.rows(); ++i)
          CHECK(std::abs(analytic(i, j) - fd(i, j)) < tol);
    };

    {
      const GradPack g = analytic_gradients(Algo::kBdnmf, d, f, c, {}, {}, l1, l2);
      check_close(g.c, fd_gradient(c, [&](const DenseMatrix& x) {
        return objective(Algo::kBdnmf, d, f, x, {}, {}, l1, l2);
      }, h));
    }
    {
      const GradPack g = analytic_gradients(Algo::kSdnmf, d, f, c, {}, t_mask, l1, l2);
      check_close(g.c, fd_gradient(c, [&](const DenseMatrix& x) {
        return objective(Algo::kSdnmf, d, f, x, {}, t_mask, l1, l2);
      }, h));
      check_close(g.t, fd_gradient(t_mask, [&](const DenseMatrix& x) {
        return objective(Algo::kSdnmf, d, f, c, {}, x, l1, l2);
      }, h));
    }
    {
      const GradPack g = analytic_gradients(Algo::kCdnmf, d, f, c, w, t_square, l1, l2);
      check_close(g.c, fd_gradient(c, [&](const DenseMatrix& x) {
        return objective(Algo::kCdnmf, d, f, x, w, t_square, l1, l2);
      }, h));
      check_close(g.w, fd_gradient(w, [&](const DenseMatrix& x) {
        return objective(Algo::kCdnmf, d, f, c, x, t_square, l1, l2);
      }, h));
      check_close(g.t, fd_gradient(t_square, [&](const DenseMatrix& x) {
        return objective(Algo::kCdnmf, d, f, c, w, x, l1, l2);
      }, h));
    }
  }
}

TEST_CASE("kkt residual: positive away from stationarity, small at convergence") {
  const DenseMatrix c_true = random_dense(8, 2, 251);
  const DenseMatrix f = random_onehot(2, 12, 252);
  const DenseMatrix cf = matmul(c_true, f);
  std::vector<Triplet> triplets;
  for (int j = 0; j < 12; ++j)
    for (int i = 0; i < 8; ++i)
      if (cf(i, j) > 0.0) triplets.push_back({i, j, cf(i, j)});
  const SparseMatrix d(8, 12, triplets);

  SolverConfig cfg;
  cfg.algo = Algo::kBdnmf;
  cfg.topics = 2;
  cfg.max_iter = 0;
  cfg.seed = 253;
  const SolveResult initial = solve(cfg, d, &f);
  CHECK(initial.trace.front().kkt.c > 1e-3);

  cfg.max_iter = 4000;
  cfg.rel_tol = 1e-15;
  const SolveResult converged = solve(cfg, d, &f);
  CHECK(converged.trace.back().kkt.c < 1e-4);
}

TEST_CASE("every step preserves nonnegativity on random instances") {
  Rng shape_rng(261);
  for (int trial = 0; trial < 1000; ++trial) {
    const int v = 2 + static_cast<int>(shape_rng.below(6));
    const int n = 2 + static_cast<int>(shape_rng.below(6));
    const int k = 2 + static_cast<int>(shape_rng.below(3));
    const SparseMatrix d = random_sparse(v, n, 1000 + trial);
    const DenseMatrix f = random_onehot(k, n, 2000 + trial);
    DenseMatrix c = random_dense(v, k, 3000 + trial);
    DenseMatrix w = random_dense(k, n, 4000 + trial);
    DenseMatrix t_mask = random_dense(k, n, 5000 + trial);
    DenseMatrix t_square = random_dense(k, k, 6000 + trial);

    nmf_step(d, c, w);
    CHECK(c.min_coeff() >= 0.0);
    CHECK(w.min_coeff() >= 0.0);
    bdnmf_step(d, f, c);
    CHECK(c.min_coeff() >= 0.0);
    sdnmf_step(d, f, c, t_mask);
    CHECK(c.min_coeff() >= 0.0);
    CHECK(t_mask.min_coeff() >= 0.0);
    cdnmf_step(d, f, c, w, t_square, 1.0, 1.0);
    CHECK(c.min_coeff() >= 0.0);
    CHECK(w.min_coeff() >= 0.0);
    CHECK(t_square.min_coeff() >= 0.0);
  }
}

TEST_CASE("per-factor descent for the cdnmf updates") {
  // Each coordinate update must not increase the objective on its own.
  for (int trial = 0; trial < 40; ++trial) {
    const SparseMatrix d = random_sparse(6, 7, 7000 + trial);
    const DenseMatrix f = random_onehot(3, 7, 7100 + trial);
    DenseMatrix c = random_dense(6, 3, 7200 + trial);
    DenseMatrix w = random_dense(3, 7, 7300 + trial);
    DenseMatrix t = random_dense(3, 3, 7400 + trial);
    const double l1 = 0.8, l2 = 1.2;

    const double before = objective(Algo::kCdnmf, d, f, c, w, t, l1, l2);
    const double slack = 1e-10 * std::max(before, 1.0);
    // W update alone
    {
      DenseMatrix w2 = w;
      const DenseMatrix gram_c = matmul_at_b(c, c);
      const DenseMatrix gram_t = matmul_at_b(t, t);
      DenseMatrix num = add_scaled(transpose(matmul_at_b(d, c)), l1, matmul_at_b(t, f));
      DenseMatrix den = add_scaled(matmul(gram_c, w2), l1, matmul(gram_t, w2));
      for (std::size_t i = 0; i < w2.size(); ++i)
        w2.data()[i] *= num.data()[i] / (den.data()[i] + kEpsDiv);
      CHECK(objective(Algo::kCdnmf, d, f, c, w2, t, l1, l2) <= before + slack);
    }
    // C update alone (damped ratio)
    {
      DenseMatrix c2 = c;
      const DenseMatrix gram_w = matmul_a_bt(w, w);
      const DenseMatrix gram_c = matmul_at_b(c2, c2);
      DenseMatrix num =
          add_scaled(matmul_a_bt(d, w), 2.0 * l2, matmul(d, matmul_at_b(d, c2)));
      DenseMatrix den =
          add_scaled(matmul(c2, gram_w), 2.0 * l2, matmul(c2, gram_c));
      for (std::size_t i = 0; i < c2.size(); ++i)
        c2.data()[i] *= std::sqrt(num.data()[i] / (den.data()[i] + kEpsDiv));
      CHECK(objective(Algo::kCdnmf, d, f, c2, w, t, l1, l2) <= before + slack);
    }
    // T update alone
    {
      DenseMatrix t2 = t;
      const DenseMatrix gram_w = matmul_a_bt(w, w);
      const DenseMatrix num = matmul_a_bt(f, w);
      const DenseMatrix den = matmul(t2, gram_w);
      for (std::size_t i = 0; i < t2.size(); ++i)
        t2.data()[i] *= num.data()[i] / (den.data()[i] + kEpsDiv);
      CHECK(objective(Algo::kCdnmf, d, f, c, w, t2, l1, l2) <= before + slack);
    }
    // full sweep is non-increasing too
    {
      DenseMatrix c2 = c, w2 = w, t2 = t;
      cdnmf_step(d, f, c2, w2, t2, l1, l2);
      CHECK(objective(Algo::kCdnmf, d, f, c2, w2, t2, l1, l2) <= before + slack);
    }
  }
}

TEST_CASE("scale consistency: scaling D scales the bdnmf objective by s^2") {
  const int v = 9, n = 12, k = 3;
  const DenseMatrix f = random_onehot(k, n, 281);
  const DenseMatrix base = random_dense(v, n, 282, 0.1, 1.0);
  const double s = 3.5;
  std::vector<Triplet> t1, t2;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < v; ++i) {
      t1.push_back({i, j, base(i, j)});
      t2.push_back({i, j, s * base(i, j)});
    }
  const SparseMatrix d1(v, n, t1), d2(v, n, t2);

  SolverConfig cfg;
  cfg.algo = Algo::kBdnmf;
  cfg.topics = k;
  cfg.max_iter = 300;
  cfg.rel_tol = 1e-14;
  cfg.seed = 283;
  const SolveResult r1 = solve(cfg, d1, &f);
  const SolveResult r2 = solve(cfg, d2, &f);
  CHECK(r2.state.objective_trace.back() ==
        doctest::Approx(s * s * r1.state.objective_trace.back()).epsilon(1e-6));
  // argmax word per topic is scale invariant
  for (int topic = 0; topic < k; ++topic) {
    int best1 = 0, best2 = 0;
    for (int i = 1; i < v; ++i) {
      if (r1.state.C(i, topic) > r1.state.C(best1, topic)) best1 = i;
      if (r2.state.C(i, topic) > r2.state.C(best2, topic)) best2 = i;
    }
    CHECK(best1 == best2);
  }
}

TEST_CASE("solve validates configuration and indicator presence") {
  const SparseMatrix d = random_sparse(5, 6, 291);
  SolverConfig cfg;
  cfg.algo = Algo::kBdnmf;
  cfg.topics = 2;
  CHECK_THROWS_AS(solve(cfg, d, nullptr), ValidationError);
  cfg.topics = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.topics = 2;
  cfg.rel_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK_THROWS_AS(parse_algo("lda"), ValidationError);
}
