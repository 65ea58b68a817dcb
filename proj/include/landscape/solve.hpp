#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cfloat>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "landscape/banded.hpp"
#include "landscape/error.hpp"
#include "landscape/operator.hpp"
#include "landscape/tridiagonal.hpp"

namespace landscape {

enum class EigenMethod { Auto, SturmBisection, ShiftInvert, Dense };

struct SolverOptions {
  double eig_tol = 1e-10;  // absolute accuracy target on eigenvalues
  int max_iter = 2000;     // subspace iterations
  Index k = 1;
  EigenMethod method = EigenMethod::Auto;
  bool want_vectors = false;
  // Optional bracket [lo, hi] known to contain the ground eigenvalue.
  std::optional<std::pair<double, double>> ground_bracket;
};

struct LandscapeOptions {
  bool local_maxima = true;
  double cg_tol = 1e-12;
  bool cg_fallback = true;  // factorize when CG misses its iteration cap
};

struct LocalMax {
  double value = 0.0;
  Index index = 0;
};

struct LandscapeResult {
  std::vector<double> u;
  double max_value = 0.0;
  Index argmax = 0;
  std::vector<LocalMax> local_maxima;  // descending by value
  double residual = 0.0;               // ||Hu - 1||_inf
  std::string method;
};

struct SpectralResult {
  std::vector<double> eigenvalues;        // ascending
  std::optional<Eigen::MatrixXd> vectors;  // unit 2-norm columns
  // ||H phi - lambda phi||_inf per pair when vectors exist, otherwise the
  // half-width of the bisection bracket.
  std::vector<double> residuals;
  std::string method;
};

// Direct solver for a positive definite operator in any storage.
class Factorization {
 public:
  explicit Factorization(const AssembledOperator& op) : impl_(make(op)) {}

  void solve_in_place(std::span<double> x) const {
    if (const auto* t = std::get_if<TridiagonalLDLT>(&impl_)) {
      t->solve_in_place(x);
    } else if (const auto* b = std::get_if<BandedLDLT>(&impl_)) {
      b->solve_in_place(x);
    } else {
      const auto& s = std::get<Sparse>(impl_);
      Eigen::Map<Eigen::VectorXd> xm(x.data(), static_cast<Index>(x.size()));
      Eigen::VectorXd r = s->solve(xm);
      xm = r;
    }
  }

  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
  }

 private:
  using Sparse = std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>;
  using Impl = std::variant<TridiagonalLDLT, BandedLDLT, Sparse>;

  static Impl make(const AssembledOperator& op) {
    if (const auto* t = op.tridiagonal()) return TridiagonalLDLT(*t);
    if (const auto* b = op.banded()) return BandedLDLT(*b);
    auto ldlt = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(to_sparse(op));
    if (ldlt->info() != Eigen::Success) throw DefinitenessError("sparse LDL^T failed");
    if (ldlt->vectorD().size() > 0 && !(ldlt->vectorD().minCoeff() > 0.0))
      throw DefinitenessError("sparse LDL^T met a non-positive pivot");
    return ldlt;
  }

  Impl impl_;
};

// Plateau maxima of a sequence: maximal constant runs strictly above both
// outside neighbours, represented by their leftmost index.
inline std::vector<LocalMax> plateau_maxima(std::span<const double> u) {
  std::vector<LocalMax> out;
  const Index n = static_cast<Index>(u.size());
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && u[j + 1] == u[i]) ++j;
    bool left = i == 0 || u[i] > u[i - 1];
    bool right = j == n - 1 || u[i] > u[j + 1];
    if (left && right) out.push_back({u[i], i});
    i = j + 1;
  }
  std::stable_sort(out.begin(), out.end(), [](const LocalMax& a, const LocalMax& b) { return a.value > b.value; });
  return out;
}

// Plateau maxima on the sparsity graph of a sparse operator.
inline std::vector<LocalMax> plateau_maxima(std::span<const double> u, const SparseMatrix& pattern) {
  const Index n = static_cast<Index>(u.size());
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<LocalMax> out;
  for (Index s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<Index> comp{s}, stack{s};
    seen[s] = 1;
    bool strict = true;
    while (!stack.empty()) {
      Index x = stack.back();
      stack.pop_back();
      for (SparseMatrix::InnerIterator it(pattern, x); it; ++it) {
        Index y = it.col();
        if (y == x) continue;
        if (u[y] == u[s]) {
          if (!seen[y]) {
            seen[y] = 1;
            comp.push_back(y);
            stack.push_back(y);
          }
        } else if (u[y] > u[s]) {
          strict = false;
        }
      }
    }
    if (strict) out.push_back({u[s], *std::min_element(comp.begin(), comp.end())});
  }
  std::stable_sort(out.begin(), out.end(), [](const LocalMax& a, const LocalMax& b) {
    return a.value != b.value ? a.value > b.value : a.index < b.index;
  });
  return out;
}

// Solves H u = 1. Thomas elimination for tridiagonal storage, banded LDL^T for
// banded storage, Jacobi-preconditioned CG for sparse storage.
inline LandscapeResult solve_landscape(const AssembledOperator& op, const LandscapeOptions& opts = {}) {
  const Index n = op.dimension();
  LandscapeResult r;
  std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
  if (op.sparse()) {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(opts.cg_tol);
    cg.setMaxIterations(std::max<Index>(1, static_cast<Index>(20.0 * std::sqrt(static_cast<double>(n)))));
    cg.compute(*op.sparse());
    Eigen::VectorXd x = cg.solve(Eigen::VectorXd::Ones(n));
    if (cg.info() == Eigen::Success) {
      r.u.assign(x.data(), x.data() + n);
      r.method = "cg";
    } else if (opts.cg_fallback) {
      r.u = Factorization(op).solve(ones);
      r.method = "cg-then-ldlt";
    } else {
      throw IterationError("CG did not converge", cg.error());
    }
  } else {
    r.u = Factorization(op).solve(ones);
    r.method = op.tridiagonal() ? "thomas" : "banded-ldlt";
  }
  auto hu = apply_operator(op, r.u);
  for (Index i = 0; i < n; ++i) r.residual = std::max(r.residual, std::abs(hu[i] - 1.0));
  r.argmax = std::max_element(r.u.begin(), r.u.end()) - r.u.begin();
  r.max_value = r.u[r.argmax];
  if (r.residual > 1e-9 * (1.0 + r.max_value)) {
    // One step of iterative refinement with the direct factorization.
    Factorization f(op);
    std::vector<double> res(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) res[i] = 1.0 - hu[i];
    f.solve_in_place(res);
    for (Index i = 0; i < n; ++i) r.u[i] += res[i];
    hu = apply_operator(op, r.u);
    r.residual = 0.0;
    for (Index i = 0; i < n; ++i) r.residual = std::max(r.residual, std::abs(hu[i] - 1.0));
    r.argmax = std::max_element(r.u.begin(), r.u.end()) - r.u.begin();
    r.max_value = r.u[r.argmax];
    r.method += "+refine";
  }
  if (opts.local_maxima) r.local_maxima = op.sparse() ? plateau_maxima(r.u, *op.sparse()) : plateau_maxima(r.u);
  return r;
}

struct Bracket {
  double lo = 0.0, hi = 0.0;
  double mid() const { return lo + 0.5 * (hi - lo); }
};

// Brackets the k lowest eigenvalues given a count function
// count(sigma) = #{eigenvalues < sigma}, refining to full double precision.
template <class Count>
std::vector<Bracket> bisect_lowest(Count&& count, Index k, double lo, double hi, Index clo, Index chi) {
  struct Node {
    double lo, hi;
    Index clo, chi;
    int depth;
  };
  std::vector<Bracket> out(static_cast<std::size_t>(k), Bracket{lo, hi});
  std::vector<Node> stack{{lo, hi, clo, chi, 0}};
  while (!stack.empty()) {
    Node nd = stack.back();
    stack.pop_back();
    if (nd.clo >= k || nd.chi <= nd.clo) continue;
    double mid = nd.lo + 0.5 * (nd.hi - nd.lo);
    bool done = nd.hi - nd.lo <= std::max(4.0 * DBL_EPSILON * std::max(std::abs(nd.lo), std::abs(nd.hi)), DBL_MIN) ||
                mid <= nd.lo || mid >= nd.hi || nd.depth > 400;
    if (done) {
      for (Index j = nd.clo; j < std::min(nd.chi, k); ++j) out[j] = {nd.lo, nd.hi};
      continue;
    }
    Index cm = count(mid);
    stack.push_back({mid, nd.hi, cm, nd.chi, nd.depth + 1});
    stack.push_back({nd.lo, mid, nd.clo, cm, nd.depth + 1});
  }
  return out;
}

namespace detail {

inline std::vector<double> start_vector(Index n, std::uint64_t salt) {
  std::mt19937_64 rng(0x5eed0000ULL + salt);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = 1.0 + 0.25 * (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
  return v;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double residual_inf(const AssembledOperator& op, std::span<const double> v, double lambda) {
  auto hv = apply_operator(op, v);
  double r = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) r = std::max(r, std::abs(hv[i] - lambda * v[i]));
  return r;
}

inline std::function<Index(double)> count_function(const AssembledOperator& op) {
  if (const auto* t = op.tridiagonal()) {
    double pivmin = sturm_pivmin(*t);
    return [t, pivmin](double s) { return sturm_count(*t, s, pivmin); };
  }
  if (const auto* b = op.banded()) return [b](double s) { return band_inertia(*b, s); };
  throw InvalidParameter("bisection needs tridiagonal or banded storage");
}

// Inverse iteration for eigenvectors at known eigenvalues.
inline Eigen::MatrixXd inverse_iteration(const AssembledOperator& op, const std::vector<double>& lambdas,
                                         const std::vector<Bracket>& brackets) {
  const Index n = op.dimension();
  const Index k = static_cast<Index>(lambdas.size());
  Eigen::MatrixXd V(n, k);
  const double scale = std::max(1.0, norm_inf(op));
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu;
  Eigen::SparseMatrix<double> A;
  if (!op.tridiagonal()) A = to_sparse(op);
  for (Index j = 0; j < k; ++j) {
    std::vector<double> x = start_vector(n, static_cast<std::uint64_t>(j));
    auto solve = [&](std::vector<double>& v) {
      if (const auto* t = op.tridiagonal()) {
        v = tridiagonal_shifted_solve(*t, lambdas[j], v);
        return;
      }
      if (j == 0 && op.banded()) {
        // Below the ground eigenvalue the shifted band matrix is positive definite.
        double sigma = brackets[0].lo - (brackets[0].hi - brackets[0].lo);
        try {
          v = BandedLDLT(*op.banded(), sigma).solve(v);
          return;
        } catch (const DefinitenessError&) {
        }
      }
      if (!lu) {
        Eigen::SparseMatrix<double> I(n, n);
        I.setIdentity();
        lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        Eigen::SparseMatrix<double> shifted = A - (lambdas[j] * (1.0 + 1e-14) + 1e-300) * I;
        lu->compute(shifted);
      }
      Eigen::Map<Eigen::VectorXd> vm(v.data(), n);
      Eigen::VectorXd r = lu->solve(vm);
      if (!r.allFinite()) r = Eigen::VectorXd::Map(start_vector(n, 99 + j).data(), n);
      vm = r;
    };
    for (int it = 0; it < 3; ++it) {
      solve(x);
      // Orthogonalize against earlier vectors of the same cluster.
      for (Index i = 0; i < j; ++i) {
        if (std::abs(lambdas[i] - lambdas[j]) > 1e-8 * scale) continue;
        double dot = 0.0;
        for (Index r = 0; r < n; ++r) dot += V(r, i) * x[r];
        for (Index r = 0; r < n; ++r) x[r] -= dot * V(r, i);
      }
      double nv = norm2(x);
      if (!(nv > 0.0) || !std::isfinite(nv)) throw IterationError("inverse iteration broke down", nv);
      for (auto& v : x) v /= nv;
    }
    lu.reset();
    V.col(j) = Eigen::VectorXd::Map(x.data(), n);
  }
  return V;
}

inline void orient_ground(Eigen::MatrixXd& V) {
  if (V.cols() > 0 && V.col(0).sum() < 0.0) V.col(0) *= -1.0;
}

inline SpectralResult lowest_bisection(const AssembledOperator& op, const SolverOptions& opts) {
  const Index n = op.dimension();
  const Index k = opts.k;
  auto count = count_function(op);
  if (count(0.0) != 0) throw DefinitenessError("operator has a non-positive eigenvalue");
  double lo = 0.0, hi;
  Index clo = 0, chi;
  if (k == 1 && opts.ground_bracket && count(opts.ground_bracket->first) == 0 &&
      count(opts.ground_bracket->second) >= 1) {
    lo = opts.ground_bracket->first;
    hi = opts.ground_bracket->second;
    chi = count(hi);
  } else if (k == 1) {
    // Rayleigh quotient of the all-ones vector bounds the ground eigenvalue.
    std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    hi = quadratic_form(op, ones).plain / static_cast<double>(n);
    hi = hi * (1.0 + 1e-12) + DBL_MIN;
    chi = count(hi);
    while (chi < 1) {
      hi *= 2.0;
      chi = count(hi);
    }
  } else {
    hi = gershgorin(op).second;
    hi = std::abs(hi) * (1.0 + 1e-12) + 1e-300;
    chi = count(hi);
    if (chi < k) throw IterationError("count at the Gershgorin bound is below k", static_cast<double>(chi));
  }
  auto br = bisect_lowest(count, k, lo, hi, clo, chi);
  SpectralResult r;
  r.method = op.tridiagonal() ? "sturm-bisection" : "inertia-bisection";
  for (const auto& b : br) {
    r.eigenvalues.push_back(b.mid());
    r.residuals.push_back(0.5 * (b.hi - b.lo));
  }
  if (opts.want_vectors) {
    Eigen::MatrixXd V = inverse_iteration(op, r.eigenvalues, br);
    orient_ground(V);
    for (Index j = 0; j < k; ++j) {
      std::vector<double> v(V.col(j).data(), V.col(j).data() + n);
      r.residuals[j] = residual_inf(op, v, r.eigenvalues[j]);
    }
    r.vectors = std::move(V);
  }
  return r;
}

inline SpectralResult lowest_dense(const AssembledOperator& op, const SolverOptions& opts) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_dense(op));
  if (es.info() != Eigen::Success) throw IterationError("dense eigensolver failed", 0.0);
  SpectralResult r;
  r.method = "dense";
  const Index k = opts.k;
  if (!(es.eigenvalues()(0) > 0.0)) throw DefinitenessError("operator has a non-positive eigenvalue");
  Eigen::MatrixXd V = es.eigenvectors().leftCols(k);
  orient_ground(V);
  for (Index j = 0; j < k; ++j) {
    r.eigenvalues.push_back(es.eigenvalues()(j));
    std::vector<double> v(V.col(j).data(), V.col(j).data() + V.rows());
    r.residuals.push_back(residual_inf(op, v, r.eigenvalues.back()));
  }
  if (opts.want_vectors) r.vectors = std::move(V);
  return r;
}

// Block inverse (shift-invert at zero) subspace iteration with Rayleigh-Ritz.
inline SpectralResult lowest_shift_invert(const AssembledOperator& op, const SolverOptions& opts) {
  const Index n = op.dimension();
  const Index k = opts.k;
  const Index m = std::min(n, std::max(2 * k, k + 8));
  Factorization f(op);
  Eigen::MatrixXd X(n, m);
  for (Index c = 0; c < m; ++c) {
    auto v = start_vector(n, static_cast<std::uint64_t>(1000 + c));
    X.col(c) = Eigen::VectorXd::Map(v.data(), n);
  }
  Eigen::VectorXd theta, prev;
  Eigen::MatrixXd HX;
  std::vector<double> res(static_cast<std::size_t>(k), 0.0);
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    for (Index c = 0; c < m; ++c) {
      std::vector<double> col(X.col(c).data(), X.col(c).data() + n);
      f.solve_in_place(col);
      X.col(c) = Eigen::VectorXd::Map(col.data(), n);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
    Eigen::MatrixXd HQ(n, m);
    for (Index c = 0; c < m; ++c) {
      std::vector<double> col(Q.col(c).data(), Q.col(c).data() + n);
      auto hc = apply_operator(op, col);
      HQ.col(c) = Eigen::VectorXd::Map(hc.data(), n);
    }
    Eigen::MatrixXd T = Q.transpose() * HQ;
    T = 0.5 * (T + T.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    theta = es.eigenvalues();
    X = Q * es.eigenvectors();
    HX = HQ * es.eigenvectors();
    double worst = 0.0;
    for (Index j = 0; j < k; ++j) {
      res[j] = (HX.col(j) - theta(j) * X.col(j)).lpNorm<Eigen::Infinity>();
      worst = std::max(worst, (HX.col(j) - theta(j) * X.col(j)).norm());
    }
    bool stalled = prev.size() == theta.size() &&
                   ((theta.head(k) - prev.head(k)).cwiseAbs().array() <=
                    4.0 * DBL_EPSILON * theta.head(k).cwiseAbs().array())
                       .all();
    if (worst <= opts.eig_tol || (stalled && worst <= 1e-6 * std::max(1.0, norm_inf(op)))) break;
    prev = theta;
  }
  if (it == opts.max_iter) throw IterationError("shift-invert subspace iteration hit max_iter", res.empty() ? 0 : res[0]);
  SpectralResult r;
  r.method = "shift-invert";
  Eigen::MatrixXd V = X.leftCols(k);
  orient_ground(V);
  for (Index j = 0; j < k; ++j) {
    r.eigenvalues.push_back(theta(j));
    r.residuals.push_back(res[j]);
  }
  if (!(r.eigenvalues.front() > 0.0)) throw DefinitenessError("operator has a non-positive eigenvalue");
  if (opts.want_vectors) r.vectors = std::move(V);
  return r;
}

}  // namespace detail

// k smallest eigenvalues, ascending.
inline SpectralResult lowest_k(const AssembledOperator& op, const SolverOptions& opts) {
  const Index n = op.dimension();
  if (opts.k < 1 || opts.k > n) throw InvalidParameter("k must lie in [1, dimension]");
  if (!(opts.eig_tol > 0.0)) throw InvalidParameter("eig_tol must be positive");
  EigenMethod m = opts.method;
  if (m == EigenMethod::Auto) {
    if (!op.sparse()) {
      m = EigenMethod::SturmBisection;
    } else {
      m = (n <= 200 || 3 * opts.k > n) ? EigenMethod::Dense : EigenMethod::ShiftInvert;
    }
  }
  switch (m) {
    case EigenMethod::SturmBisection:
      return detail::lowest_bisection(op, opts);
    case EigenMethod::Dense:
      return detail::lowest_dense(op, opts);
    case EigenMethod::ShiftInvert:
      return detail::lowest_shift_invert(op, opts);
    case EigenMethod::Auto:
      break;
  }
  throw InvalidParameter("unknown eigen method");
}

inline SpectralResult ground_state(const AssembledOperator& op, SolverOptions opts = {}) {
  opts.k = 1;
  return lowest_k(op, opts);
}

struct GreensColumn {
  std::vector<double> values;
  Index clamped = 0;  // entries in [-1e-12, 0) set to zero
};

// Column y of H^{-1}.
inline GreensColumn greens_column(const AssembledOperator& op, Index y) {
  const Index n = op.dimension();
  if (y < 0 || y >= n) throw InvalidParameter("Green's column index out of range");
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  e[y] = 1.0;
  GreensColumn g;
  g.values = Factorization(op).solve(e);
  for (auto& v : g.values) {
    if (v < 0.0 && v >= -1e-12) {
      v = 0.0;
      ++g.clamped;
    }
  }
  return g;
}

// exp(-tH) by Pade scaling and squaring on the dense matrix.
inline Eigen::MatrixXd semigroup_matrix(const AssembledOperator& op, double t) {
  if (!(t >= 0.0)) throw InvalidParameter("semigroup time must be non-negative");
  Eigen::MatrixXd H = to_dense(op);
  if (t == 0.0) return Eigen::MatrixXd::Identity(H.rows(), H.cols());
  Eigen::MatrixXd M = -t * H;
  return M.exp();
}

inline double semigroup_entry(const AssembledOperator& op, double t, Index x, Index y) {
  if (x < 0 || y < 0 || x >= op.dimension() || y >= op.dimension())
    throw InvalidParameter("semigroup entry index out of range");
  return semigroup_matrix(op, t)(x, y);
}

}  // namespace landscape
