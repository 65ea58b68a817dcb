#pragma once

#include <cfloat>
#include <cmath>
#include <span>
#include <vector>

#include "landscape/error.hpp"
#include "landscape/operator.hpp"

namespace landscape {

// Symmetric LDL^T of a positive definite tridiagonal matrix (Thomas elimination).
class TridiagonalLDLT {
 public:
  explicit TridiagonalLDLT(const TridiagonalMatrix& t) : d_(t.diag.size()), l_(t.off.size()) {
    const std::size_t n = t.diag.size();
    d_[0] = t.diag[0];
    if (!(d_[0] > 0.0)) throw DefinitenessError("non-positive pivot at row 0");
    for (std::size_t i = 1; i < n; ++i) {
      l_[i - 1] = t.off[i - 1] / d_[i - 1];
      d_[i] = t.diag[i] - l_[i - 1] * t.off[i - 1];
      if (!(d_[i] > 0.0)) throw DefinitenessError("non-positive pivot at row " + std::to_string(i));
    }
  }

  void solve_in_place(std::span<double> x) const {
    const std::size_t n = d_.size();
    for (std::size_t i = 1; i < n; ++i) x[i] -= l_[i - 1] * x[i - 1];
    for (std::size_t i = 0; i < n; ++i) x[i] /= d_[i];
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= l_[i] * x[i + 1];
  }

  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
  }

 private:
  std::vector<double> d_, l_;
};

// Number of eigenvalues strictly below sigma (Sturm sign count).
inline Index sturm_count(const TridiagonalMatrix& t, double sigma, double pivmin) {
  const std::size_t n = t.diag.size();
  Index count = 0;
  double q = t.diag[0] - sigma;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    const double e = t.off[i - 1];
    q = (t.diag[i] - sigma) - e * e / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0.0) ++count;
  }
  return count;
}

inline double sturm_pivmin(const TridiagonalMatrix& t) {
  double emax = 1.0;
  for (double e : t.off) emax = std::max(emax, e * e);
  return DBL_MIN * emax;
}

// Solves (T - sigma I) x = b by Gaussian elimination with partial pivoting.
// Used for inverse iteration, where the shifted matrix is nearly singular.
inline std::vector<double> tridiagonal_shifted_solve(const TridiagonalMatrix& t, double sigma,
                                                     std::span<const double> b) {
  const std::size_t n = t.diag.size();
  std::vector<double> dl(t.off), d(n), du(t.off), du2(n, 0.0), x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) d[i] = t.diag[i] - sigma;
  const double tiny = DBL_EPSILON * (1.0 + std::abs(sigma));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      if (d[i] == 0.0) d[i] = tiny;
      double f = dl[i] / d[i];
      d[i + 1] -= f * du[i];
      x[i + 1] -= f * x[i];
      dl[i] = f;
    } else {
      double f = d[i] / dl[i];
      d[i] = dl[i];
      double tmp = d[i + 1];
      d[i + 1] = du[i] - f * tmp;
      if (i + 2 < n) {
        du2[i] = du[i + 1];
        du[i + 1] = -f * du2[i];
      }
      du[i] = tmp;
      std::swap(x[i], x[i + 1]);
      x[i + 1] -= f * x[i];
      dl[i] = f;
    }
  }
  if (d[n - 1] == 0.0) d[n - 1] = tiny;
  x[n - 1] /= d[n - 1];
  if (n > 1) x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
  for (std::size_t i = n >= 2 ? n - 2 : 0; i-- > 0;) x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
  return x;
}

}  // namespace landscape
