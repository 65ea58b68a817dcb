#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "landscape/disorder.hpp"
#include "landscape/error.hpp"
#include "landscape/graph.hpp"
#include "landscape/operator.hpp"
#include "landscape/solve.hpp"

namespace landscape {

inline constexpr double kPiSquaredOver8 = std::numbers::pi * std::numbers::pi / 8.0;

struct ProductRecord {
  double lambda = 0.0;
  double u_max = 0.0;
  double product = 0.0;
  // |product(3H) - product(H)| / product(H); NaN when the recheck was skipped.
  double scale_invariance_residual = std::numeric_limits<double>::quiet_NaN();
  Index argmax = 0;
  std::string eig_method, landscape_method;
};

struct ProductOptions {
  bool scale_recheck = true;
  double recheck_scale = 3.0;
  SolverOptions solver;
};

namespace detail {

inline ProductRecord product_once(const AssembledOperator& op, const SolverOptions& base) {
  LandscapeOptions lo;
  lo.local_maxima = false;
  auto land = solve_landscape(op, lo);
  // lambda lies between 1/||u|| and the Rayleigh quotient of u.
  double su = 0.0, su2 = 0.0;
  for (double v : land.u) {
    su += v;
    su2 += v * v;
  }
  SolverOptions so = base;
  so.k = 1;
  if (!so.ground_bracket) so.ground_bracket = std::pair{0.5 / land.max_value, 2.0 * su / su2};
  auto spec = lowest_k(op, so);
  ProductRecord r;
  r.lambda = spec.eigenvalues[0];
  r.u_max = land.max_value;
  r.argmax = land.argmax;
  r.product = r.lambda * r.u_max;
  r.eig_method = spec.method;
  r.landscape_method = land.method;
  return r;
}

}  // namespace detail

// lambda * ||u||_inf, with an optional recomputation on c*H.
inline ProductRecord landscape_product(const AssembledOperator& op, const ProductOptions& opts = {}) {
  auto r = detail::product_once(op, opts.solver);
  if (opts.scale_recheck) {
    auto s = detail::product_once(scale(op, opts.recheck_scale), opts.solver);
    r.scale_invariance_residual = std::abs(s.product - r.product) / r.product;
  }
  return r;
}

struct PairEntry {
  Index j = 0;  // 1-based rank
  double lambda = 0.0;
  double inv_max = 0.0;
  double ratio = 0.0;  // lambda * max
};

struct PairingReport {
  std::vector<PairEntry> pairs;
  double fitted_slope = 0.0;  // least squares through the origin of lambda on 1/max
  bool truncated = false;     // fewer maxima or eigenvalues than requested
};

// Pairs the j-th smallest eigenvalue with the j-th largest plateau maximum.
inline PairingReport pair_excited(const SpectralResult& spec, const LandscapeResult& land, Index k) {
  if (k < 1) throw InvalidParameter("k must be positive");
  PairingReport r;
  const Index avail = std::min<Index>({k, static_cast<Index>(spec.eigenvalues.size()),
                                       static_cast<Index>(land.local_maxima.size())});
  r.truncated = avail < k;
  double sxy = 0.0, sxx = 0.0;
  for (Index j = 0; j < avail; ++j) {
    const double lam = spec.eigenvalues[j], mx = land.local_maxima[j].value;
    PairEntry e{j + 1, lam, 1.0 / mx, lam * mx};
    sxy += e.inv_max * lam;
    sxx += e.inv_max * e.inv_max;
    r.pairs.push_back(e);
  }
  r.fitted_slope = sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
  return r;
}

struct DeterminantPoly {
  Index n = 0;
  double constant = 0.0;
  std::vector<double> linear;  // coefficient of z_k = 1 - a_k^2 for k = 2..n
  double min_higher = std::numeric_limits<double>::infinity();  // +inf when n < 3
  double eval_residual = 0.0;  // |poly(z(a)) - det H(a)|
};

inline constexpr Index kDeterminantOracleCap = 16;

// det of tridiag(-a, 2, -a) by the continuant recurrence, in terms of the
// squared couplings.
inline double continuant_det(std::span<const double> a_sq) {
  double p0 = 1.0, p1 = 2.0;
  for (double s : a_sq) {
    double p2 = 2.0 * p1 - s * p0;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

// Expands det H(a_2..a_n) as a multilinear polynomial in z_k = 1 - a_k^2 by
// evaluating every corner z in {0,1}^{n-1} and applying Moebius inversion.
inline DeterminantPoly determinant_poly_oracle(std::span<const double> a) {
  const Index m = static_cast<Index>(a.size());
  const Index n = m + 1;
  if (n > kDeterminantOracleCap) throw CapacityError("determinant oracle supports n <= 16");
  const std::size_t corners = std::size_t{1} << m;
  std::vector<double> coef(corners);
  std::vector<double> sq(static_cast<std::size_t>(m));
  for (std::size_t mask = 0; mask < corners; ++mask) {
    for (Index k = 0; k < m; ++k) sq[k] = (mask >> k & 1) ? 0.0 : 1.0;  // z = 1 means a^2 = 0
    coef[mask] = continuant_det(sq);
  }
  for (Index k = 0; k < m; ++k)
    for (std::size_t mask = 0; mask < corners; ++mask)
      if (mask >> k & 1) coef[mask] -= coef[mask ^ (std::size_t{1} << k)];
  DeterminantPoly r;
  r.n = n;
  r.constant = coef[0];
  for (Index k = 0; k < m; ++k) r.linear.push_back(coef[std::size_t{1} << k]);
  for (std::size_t mask = 0; mask < corners; ++mask)
    if (std::popcount(mask) >= 2) r.min_higher = std::min(r.min_higher, coef[mask]);
  // Check the expansion against the determinant at the given couplings.
  double poly = 0.0;
  for (std::size_t mask = 0; mask < corners; ++mask) {
    double term = coef[mask];
    for (Index k = 0; k < m; ++k)
      if (mask >> k & 1) term *= 1.0 - a[k] * a[k];
    poly += term;
  }
  for (Index k = 0; k < m; ++k) sq[k] = a[k] * a[k];
  r.eval_residual = std::abs(poly - continuant_det(sq));
  return r;
}

struct GreenDecayReport {
  Index n = 0;
  Index violations = 0;
  double max_excess = -std::numeric_limits<double>::infinity();  // max of G - bound
};

// Checks the end-to-site decay of the Green's function of tridiag(-a, 2, -a)
// on sites 0..n-1, couplings[m] joining m and m+1:
//   G(0,y)   <= 1 / (1 + sum_{m<y} (m+1)(1 - a_m^2))
//   G(y,n-1) <= 1 / (1 + sum_{m>=y} (n-1-m)(1 - a_m^2))
inline GreenDecayReport verify_green_decay(std::span<const double> couplings, double tol = 1e-9) {
  const Index n = static_cast<Index>(couplings.size()) + 1;
  if (n > 10000) throw CapacityError("green decay check supports n <= 1e4");
  auto op = hopping_chain(couplings);
  auto left = greens_column(op, 0).values;       // G(y,0) = G(0,y)
  auto right = greens_column(op, n - 1).values;  // G(y,n-1)
  GreenDecayReport r;
  r.n = n;
  std::vector<double> lsum(static_cast<std::size_t>(n), 0.0), rsum(static_cast<std::size_t>(n), 0.0);
  for (Index y = 1; y < n; ++y)
    lsum[y] = lsum[y - 1] + static_cast<double>(y) * (1.0 - couplings[y - 1] * couplings[y - 1]);
  for (Index y = n - 2; y >= 0; --y)
    rsum[y] = rsum[y + 1] + static_cast<double>(n - 1 - y) * (1.0 - couplings[y] * couplings[y]);
  for (Index y = 0; y < n; ++y) {
    for (double excess : {left[y] - 1.0 / (1.0 + lsum[y]), right[y] - 1.0 / (1.0 + rsum[y])}) {
      r.max_excess = std::max(r.max_excess, excess);
      if (excess > tol) ++r.violations;
    }
  }
  return r;
}

struct MonotonicityReport {
  double max_green_excess = 0.0;  // max of G_lo - G_hi
  double max_u_excess = 0.0;      // max of u_lo - u_hi
  bool ok(double tol = 1e-9) const { return max_green_excess <= tol && max_u_excess <= tol; }
};

inline Eigen::MatrixXd dense_inverse(const AssembledOperator& op) {
  Eigen::MatrixXd H = to_dense(op);
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw DefinitenessError("dense Cholesky failed");
  return llt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
}

// Entrywise comparison of Green's functions and landscapes for hopping_lo <= hopping_hi.
inline MonotonicityReport verify_monotonicity(const OperatorSpec& lo, const OperatorSpec& hi) {
  if (lo.graph != hi.graph) throw ValidationError("monotonicity pair must share the graph");
  if (lo.mask.member_flags != hi.mask.member_flags) throw ValidationError("monotonicity pair must share the mask");
  if (lo.normalization != hi.normalization) throw ValidationError("monotonicity pair must share the normalization");
  if (lo.potential != hi.potential) throw ValidationError("monotonicity pair must share the potential");
  const auto m = static_cast<std::size_t>(lo.graph->edge_count());
  for (std::size_t e = 0; e < m; ++e) {
    const double a = lo.hopping.empty() ? 1.0 : lo.hopping[e], b = hi.hopping.empty() ? 1.0 : hi.hopping[e];
    if (a > b) throw ValidationError("hopping_lo must not exceed hopping_hi");
  }
  Eigen::MatrixXd Glo = dense_inverse(assemble(lo)), Ghi = dense_inverse(assemble(hi));
  MonotonicityReport r;
  r.max_green_excess = (Glo - Ghi).maxCoeff();
  r.max_u_excess = (Glo.rowwise().sum() - Ghi.rowwise().sum()).maxCoeff();
  return r;
}

struct ResolventReport {
  double max_residual = 0.0;
  double umax_I = 0.0, umax_J = 0.0;
  bool domain_monotone = true;  // max u_J >= max u_I
};

// Geometric resolvent identity for tridiag(-a, 2, -a) on J = 0..n-1 and
// I = first..last:
//   G_J(p,m) = G_I(p,m) + a_i G_I(p,i) G_J(i-1,m) + a_{j+1} G_I(p,j) G_J(j+1,m)
// for p, m in I, where a_i joins i-1 and i. Terms pointing outside J drop out.
inline ResolventReport verify_resolvent_identity(std::span<const double> couplings, Index first, Index last) {
  const Index n = static_cast<Index>(couplings.size()) + 1;
  if (first < 0 || last >= n || first > last) throw InvalidParameter("I must be a subinterval of J");
  Eigen::MatrixXd GJ = dense_inverse(hopping_chain(couplings));
  const Index len = last - first + 1;
  Eigen::MatrixXd GI = len == 1 ? Eigen::MatrixXd::Constant(1, 1, 0.5)
                                : dense_inverse(hopping_chain(couplings.subspan(first, len - 1)));
  ResolventReport r;
  for (Index p = 0; p < len; ++p)
    for (Index m = 0; m < len; ++m) {
      double rhs = GI(p, m);
      if (first > 0) rhs += couplings[first - 1] * GI(p, 0) * GJ(first - 1, first + m);
      if (last < n - 1) rhs += couplings[last] * GI(p, len - 1) * GJ(last + 1, first + m);
      r.max_residual = std::max(r.max_residual, std::abs(GJ(first + p, first + m) - rhs));
    }
  r.umax_J = GJ.rowwise().sum().maxCoeff();
  r.umax_I = GI.rowwise().sum().maxCoeff();
  r.domain_monotone = r.umax_J >= r.umax_I - 1e-12 * (1.0 + r.umax_J);
  return r;
}

enum class SubsolutionConstant {
  // c = (a l/2 + 1) / (2(1-a))
  HalfLength,
  // c = (a l + 1) / (2 - 2a), large enough for adjacent wells
  FullLength,
};

struct SubsolutionReport {
  double min_Hu = 0.0;  // min over sites of (H u~)(n)
  Index argmin = 0;
  Index ell = 0;  // longest well
  double c = 0.0;
  double u_max = 0.0;
  double upper_bound = 0.0;  // l^2/8 + l + (a l + 1)/(2 - 2a)
  bool bound_holds = false;  // u_max <= upper_bound
  bool passes(double tol = 1e-9) const { return min_Hu >= 1.0 - tol; }
};

// Builds u~ = (free landscape on each well) + c, with c on every other site,
// and evaluates H u~ for the chain with couplings in {a_value, 1}.
inline SubsolutionReport subsolution_check(std::span<const double> couplings, double a_value,
                                           SubsolutionConstant constant = SubsolutionConstant::HalfLength,
                                           WellConvention conv = WellConvention::OneWell) {
  if (!(a_value > 0.0 && a_value < 1.0)) throw InvalidParameter("a_value must lie in (0,1)");
  for (double v : couplings)
    if (v != 1.0 && v != a_value) throw ValidationError("couplings must take values in {a, 1}");
  const Index n = static_cast<Index>(couplings.size()) + 1;
  auto part = island_wall_partition(couplings, conv);
  SubsolutionReport r;
  for (const auto& w : part.islands) r.ell = std::max(r.ell, w.length());
  const double a = a_value, l = static_cast<double>(r.ell);
  r.c = constant == SubsolutionConstant::HalfLength ? (a * l / 2.0 + 1.0) / (2.0 * (1.0 - a))
                                                    : (a * l + 1.0) / (2.0 - 2.0 * a);
  std::vector<double> u(static_cast<std::size_t>(n), r.c);
  for (const auto& w : part.islands) {
    const double m = static_cast<double>(w.length());
    for (Index s = w.first; s <= w.last; ++s) {
      const double k = static_cast<double>(s - w.first + 1);
      u[s] += k * (m + 1.0 - k) / 2.0;
    }
  }
  auto hu = apply_operator(hopping_chain(couplings), u);
  auto it = std::min_element(hu.begin(), hu.end());
  r.min_Hu = *it;
  r.argmin = it - hu.begin();
  r.upper_bound = l * l / 8.0 + l + (a * l + 1.0) / (2.0 - 2.0 * a);
  LandscapeOptions lo;
  lo.local_maxima = false;
  r.u_max = solve_landscape(hopping_chain(couplings), lo).max_value;
  r.bound_holds = r.u_max <= r.upper_bound;
  return r;
}

struct BandAsymptotics {
  double sigma = 0.0;
  double lambda_pred = 0.0;
  double umax_pred = 0.0;
};

inline BandAsymptotics band_asymptotics(Index N, int W) {
  if (W < 1 || N <= W) throw InvalidParameter("band asymptotics need 1 <= W < N");
  const double w = W, nn = static_cast<double>(N);
  BandAsymptotics b;
  b.sigma = w * (w + 1.0) * (2.0 * w + 1.0) / (6.0 * nn * nn);
  b.lambda_pred = std::numbers::pi * std::numbers::pi * b.sigma;
  b.umax_pred = 1.0 / (8.0 * b.sigma);
  return b;
}

struct BandFreeCheck {
  BandAsymptotics pred;
  ProductRecord record;
  double lambda_ratio = 0.0;  // lambda / (pi^2 sigma)
  double umax_ratio = 0.0;    // 8 sigma ||u||
};

// Solves the free combinatorial band operator on Chain(N, W) against the predictions.
inline BandFreeCheck band_free_check(Index N, int W) {
  BandFreeCheck c;
  c.pred = band_asymptotics(N, W);
  auto g = std::make_shared<const GraphTopology>(build_chain(N, W));
  ProductOptions po;
  po.scale_recheck = false;
  c.record = landscape_product(assemble({g, {}, {}, {}, Normalization::Combinatorial}), po);
  c.lambda_ratio = c.record.lambda / c.pred.lambda_pred;
  c.umax_ratio = c.record.u_max / c.pred.umax_pred;
  return c;
}

struct LowerBoundCheck {
  Index ell = 0;  // longest block of sites joined by unit couplings
  double lambda = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  bool skipped = false;  // bound nonpositive, nothing to check
  bool passes(double tol = 1e-9) const { return skipped || margin >= -tol; }
};

// lambda - pi^2/l^2 (1 - 2 / ((1-a)^{1/4} l^{1/4})) for a two-point chain.
inline LowerBoundCheck lower_bound_check_bernoulli(std::span<const double> couplings, double a_value) {
  if (!(a_value >= 0.0 && a_value < 1.0)) throw InvalidParameter("a_value must lie in [0,1)");
  LowerBoundCheck r;
  r.ell = longest_block(couplings);
  const double l = static_cast<double>(r.ell);
  r.bound = std::numbers::pi * std::numbers::pi / (l * l) *
            (1.0 - 2.0 / (std::pow(1.0 - a_value, 0.25) * std::pow(l, 0.25)));
  if (!(r.bound > 0.0)) {
    r.skipped = true;
    return r;
  }
  r.lambda = ground_state(hopping_chain(couplings)).eigenvalues[0];
  r.margin = r.lambda - r.bound;
  return r;
}

struct HardyRatios {
  Index inradius = 0;
  double u_ratio = 0.0;       // ||u|| / rho^2
  double lambda_ratio = 0.0;  // lambda rho^2
};

// Free combinatorial Laplacian on (g, A) against the inradius.
inline HardyRatios hardy_inradius_check(std::shared_ptr<const GraphTopology> g, const DomainMask& A) {
  auto ms = metric_summary(*g, A);
  ProductOptions po;
  po.scale_recheck = false;
  auto rec = landscape_product(assemble({g, A, {}, {}, Normalization::Combinatorial}), po);
  HardyRatios h;
  h.inradius = ms.inradius;
  const double rho2 = static_cast<double>(ms.inradius) * static_cast<double>(ms.inradius);
  h.u_ratio = rec.u_max / rho2;
  h.lambda_ratio = rec.lambda * rho2;
  return h;
}

// max over sites of Z_delta^- + Z_delta^+, skipping sites whose window runs out.
inline std::optional<Index> max_ell_delta(std::span<const double> couplings, double delta) {
  std::optional<Index> best;
  for (Index x = 0; x < static_cast<Index>(couplings.size()); ++x) {
    auto z = z_delta(couplings, x, delta);
    if (z.ell) best = best ? std::max(*best, *z.ell) : *z.ell;
  }
  return best;
}

}  // namespace landscape
