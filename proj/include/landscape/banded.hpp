#pragma once

#include <cfloat>
#include <cmath>
#include <span>
#include <vector>

#include "landscape/error.hpp"
#include "landscape/operator.hpp"

namespace landscape {

// Unpivoted LDL^T of a symmetric band matrix shifted by -sigma.
//
// With require_pd the factorization throws on a non-positive pivot and can
// be used for solves. Without it, tiny pivots are replaced by -pivmin and the
// number of negative pivots equals the number of eigenvalues below sigma
// (Sylvester's law of inertia), which drives banded bisection.
class BandedLDLT {
 public:
  explicit BandedLDLT(const BandedMatrix& a, double sigma = 0.0, bool require_pd = true)
      : n_(a.n), w_(a.w), L_(static_cast<std::size_t>(a.n * a.w), 0.0), d_(static_cast<std::size_t>(a.n)) {
    double amax = 1.0;
    for (double v : a.data) amax = std::max(amax, std::abs(v));
    const double pivmin = DBL_MIN * amax * amax;
    std::vector<double> lw(static_cast<std::size_t>(w_ > 0 ? w_ : 1));
    for (Index i = 0; i < n_; ++i) {
      const Index k0 = std::max<Index>(0, i - w_);
      double* Li = row(i);
      for (Index j = k0; j < i; ++j) {
        double s = a.band(static_cast<int>(i - j), j);
        const double* Lj = row(j);
        for (Index k = std::max(k0, j - w_); k < j; ++k) s -= lw[k - k0] * Lj[slot(j, k)];
        lw[j - k0] = s;
        Li[slot(i, j)] = s / d_[j];
      }
      double di = a.band(0, i) - sigma;
      for (Index k = k0; k < i; ++k) di -= lw[k - k0] * Li[slot(i, k)];
      if (require_pd) {
        if (!(di > 0.0)) throw DefinitenessError("non-positive pivot at row " + std::to_string(i));
      } else if (std::abs(di) < pivmin) {
        di = -pivmin;
      }
      if (di < 0.0) ++neg_;
      d_[i] = di;
    }
  }

  Index negative_count() const noexcept { return neg_; }

  void solve_in_place(std::span<double> x) const {
    for (Index i = 0; i < n_; ++i) {
      const double* Li = row(i);
      double s = x[i];
      for (Index k = std::max<Index>(0, i - w_); k < i; ++k) s -= Li[slot(i, k)] * x[k];
      x[i] = s;
    }
    for (Index i = 0; i < n_; ++i) x[i] /= d_[i];
    for (Index i = n_ - 1; i >= 0; --i) {
      double s = x[i];
      for (Index r = i + 1; r <= std::min(n_ - 1, i + w_); ++r) s -= row(r)[slot(r, i)] * x[r];
      x[i] = s;
    }
  }

  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
  }

 private:
  // Row i keeps L(i, i-W .. i-1) contiguously.
  double* row(Index i) { return L_.data() + i * w_; }
  const double* row(Index i) const { return L_.data() + i * w_; }
  Index slot(Index i, Index k) const { return k - (i - w_); }

  Index n_;
  int w_;
  std::vector<double> L_, d_;
  Index neg_ = 0;
};

inline Index band_inertia(const BandedMatrix& a, double sigma) {
  return BandedLDLT(a, sigma, false).negative_count();
}

}  // namespace landscape
