#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "landscape/analysis.hpp"
#include "landscape/disorder.hpp"
#include "landscape/graph.hpp"
#include "landscape/operator.hpp"
#include "landscape/solve.hpp"
#include "landscape/walk.hpp"

namespace landscape {

// Outcome of one verifier sweep.
struct CheckResult {
  std::string name;
  bool passed = true;
  Index checked = 0;
  Index violations = 0;
  Index skipped = 0;
  double worst = 0.0;  // the statistic compared against the tolerance
  std::string note;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"name", name},     {"passed", passed},   {"checked", checked}, {"violations", violations},
            {"skipped", skipped}, {"worst", worst},   {"note", note},       {"details", details}};
  }
};

namespace detail {

class InstanceRng {
 public:
  InstanceRng(std::uint64_t seed, std::uint64_t index) : rng_(mix_seed(seed, index)) {}
  double uniform() { return uniform53(rng_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  Index integer(Index lo, Index hi) {  // inclusive
    return lo + static_cast<Index>(uniform() * static_cast<double>(hi - lo + 1));
  }
  std::vector<double> uniform_vector(std::size_t n, double lo = 0.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

 private:
  std::mt19937_64 rng_;
};

inline std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

}  // namespace detail

// Free chain against its closed forms. Landscape errors are measured relative
// to max(1, ||u||), since the entries reach 1e7 at l = 1e4.
inline CheckResult validate_free_chain(const std::vector<Index>& lengths, double eig_tol = 1e-10,
                                       double u_tol = 1e-9) {
  CheckResult c;
  c.name = "free-chain";
  double worst_eig = 0.0, worst_u = 0.0, worst_u_abs = 0.0;
  for (Index l : lengths) {
    auto op = free_laplacian(l);
    const double exact = 4.0 * std::pow(std::sin(std::numbers::pi / (2.0 * static_cast<double>(l + 1))), 2);
    const double eig_err = std::abs(ground_state(op).eigenvalues[0] - exact);
    LandscapeOptions lo;
    lo.local_maxima = false;
    auto u = solve_landscape(op, lo).u;
    double err = 0.0, umax = 0.0;
    for (Index n = 1; n <= l; ++n) {
      const double ex = static_cast<double>(n) * static_cast<double>(l + 1 - n) / 2.0;
      err = std::max(err, std::abs(u[n - 1] - ex));
      umax = std::max(umax, ex);
    }
    const double rel = err / std::max(1.0, umax);
    worst_eig = std::max(worst_eig, eig_err);
    worst_u = std::max(worst_u, rel);
    worst_u_abs = std::max(worst_u_abs, err);
    ++c.checked;
    if (eig_err > eig_tol || rel > u_tol) ++c.violations;
    c.details["l=" + std::to_string(l)] = {{"eig_err", eig_err}, {"u_err_abs", err}, {"u_err_rel", rel}};
  }
  c.worst = std::max(worst_eig / eig_tol, worst_u / u_tol);
  c.passed = c.violations == 0;
  c.note = "max |lambda err| " + detail::fmt(worst_eig, 3) + ", max u err " + detail::fmt(worst_u_abs, 3) +
           " abs / " + detail::fmt(worst_u, 3) + " rel";
  return c;
}

// lambda ||u|| >= 1 and scale invariance on random chains with W in {1,2,3}.
inline CheckResult validate_product_lower_bound(Index instances, Index max_n, std::uint64_t seed) {
  CheckResult c;
  c.name = "product-lower-bound";
  double min_product = std::numeric_limits<double>::infinity(), worst_scale = 0.0;
  for (Index i = 0; i < instances; ++i) {
    detail::InstanceRng rng(seed, static_cast<std::uint64_t>(i));
    const int W = static_cast<int>(1 + i % 3);
    const Index N = rng.integer(W + 1, max_n);
    DisorderSpec d = (i / 3) % 2 == 0 ? DisorderSpec::bernoulli(rng.uniform(0.0, 0.95), rng.uniform(0.05, 0.95), seed)
                                      : DisorderSpec::uniform(rng.uniform(0.0, 0.95), seed);
    auto g = std::make_shared<const GraphTopology>(build_chain(N, W));
    auto op = assemble({g, {}, sample_hopping(d, *g, static_cast<std::uint64_t>(i)), {}, Normalization::Combinatorial});
    auto rec = landscape_product(op);
    ++c.checked;
    min_product = std::min(min_product, rec.product);
    worst_scale = std::max(worst_scale, rec.scale_invariance_residual);
    if (!(rec.product >= 1.0 - 1e-9) || !(rec.scale_invariance_residual <= 1e-9)) ++c.violations;
  }
  c.passed = c.violations == 0;
  c.worst = min_product;
  c.details = {{"min_product", min_product}, {"max_scale_residual", worst_scale}};
  c.note = "min product " + detail::fmt(min_product, 8) + ", max scale residual " + detail::fmt(worst_scale, 3);
  return c;
}

// End-to-site Green's function decay on Uniform(0,1) chains.
inline CheckResult validate_green_decay(Index n, Index instances, std::uint64_t seed) {
  CheckResult c;
  c.name = "green-decay";
  double worst = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < instances; ++i) {
    detail::InstanceRng rng(seed, static_cast<std::uint64_t>(i));
    auto a = rng.uniform_vector(static_cast<std::size_t>(n - 1));
    auto r = verify_green_decay(a);
    ++c.checked;
    worst = std::max(worst, r.max_excess);
    if (r.violations > 0) ++c.violations;
  }
  c.passed = c.violations == 0;
  c.worst = worst;
  c.note = std::to_string(c.violations) + " violating instances, max G - bound " + detail::fmt(worst, 3);
  return c;
}

// G and u increase with the couplings, on random chains and band graphs.
inline CheckResult validate_monotonicity(Index instances, Index max_n, std::uint64_t seed) {
  CheckResult c;
  c.name = "monotonicity";
  double worst = 0.0;
  for (Index i = 0; i < instances; ++i) {
    detail::InstanceRng rng(seed, static_cast<std::uint64_t>(i));
    const int W = static_cast<int>(1 + i % 2);
    const Index N = rng.integer(W + 1, max_n);
    auto g = std::make_shared<const GraphTopology>(build_chain(N, W));
    auto hi = rng.uniform_vector(static_cast<std::size_t>(g->edge_count()));
    std::vector<double> lo(hi.size());
    for (std::size_t e = 0; e < hi.size(); ++e) lo[e] = hi[e] * rng.uniform();
    auto norm = i % 4 == 3 ? Normalization::Probabilistic : Normalization::Combinatorial;
    auto r = verify_monotonicity({g, {}, lo, {}, norm}, {g, {}, hi, {}, norm});
    ++c.checked;
    worst = std::max({worst, r.max_green_excess, r.max_u_excess});
    if (!r.ok()) ++c.violations;
  }
  c.passed = c.violations == 0;
  c.worst = worst;
  c.note = "max excess " + detail::fmt(worst, 3);
  return c;
}

// Resolvent identity and domain monotonicity on random tridiagonal chains.
inline CheckResult validate_resolvent(Index instances, Index max_n, std::uint64_t seed, double tol = 1e-9) {
  CheckResult c;
  c.name = "resolvent";
  double worst = 0.0;
  Index non_monotone = 0;
  for (Index i = 0; i < instances; ++i) {
    detail::InstanceRng rng(seed, static_cast<std::uint64_t>(i));
    const Index n = rng.integer(3, max_n);
    auto a = rng.uniform_vector(static_cast<std::size_t>(n - 1));
    const Index first = rng.integer(1, n - 2), last = rng.integer(first, n - 2);
    auto r = verify_resolvent_identity(a, first, last);
    ++c.checked;
    worst = std::max(worst, r.max_residual);
    if (!r.domain_monotone) ++non_monotone;
    if (r.max_residual > tol || !r.domain_monotone) ++c.violations;
  }
  c.passed = c.violations == 0;
  c.worst = worst;
  c.details = {{"non_monotone", non_monotone}};
  c.note = "max residual " + detail::fmt(worst, 3) + ", domain-monotonicity failures " + std::to_string(non_monotone);
  return c;
}

// min (H u~) >= 1 on random two-point chains.
inline CheckResult validate_subsolution(Index instances, Index N, double a, double p, std::uint64_t seed,
                                        SubsolutionConstant constant = SubsolutionConstant::HalfLength,
                                        WellConvention conv = WellConvention::OneWell) {
  CheckResult c;
  c.name = constant == SubsolutionConstant::HalfLength ? "subsolution" : "subsolution-full-length";
  double worst = std::numeric_limits<double>::infinity();
  Index bound_fail = 0;
  const DisorderSpec d = DisorderSpec::bernoulli(a, p, seed);
  for (Index i = 0; i < instances; ++i) {
    auto cpl = sample_couplings(d, static_cast<std::size_t>(N - 1), static_cast<std::uint64_t>(i));
    auto r = subsolution_check(cpl, a, constant, conv);
    ++c.checked;
    worst = std::min(worst, r.min_Hu);
    if (!r.bound_holds) ++bound_fail;
    if (!r.passes() || !r.bound_holds) ++c.violations;
  }
  c.passed = c.violations == 0;
  c.worst = worst;
  c.details = {{"upper_bound_failures", bound_fail}};
  c.note = std::to_string(c.violations) + "/" + std::to_string(c.checked) + " instances below 1, min(H u~) " +
           detail::fmt(worst, 8);
  return c;
}

// Bernoulli eigenvalue lower bound; instances whose bound is nonpositive are skipped.
inline CheckResult validate_bernoulli_lower_bound(Index instances, Index N, double a, double p, std::uint64_t seed) {
  CheckResult c;
  c.name = "bernoulli-lower-bound";
  double worst = std::numeric_limits<double>::infinity();
  Index ell_max = 0, ell_min = std::numeric_limits<Index>::max();
  const DisorderSpec d = DisorderSpec::bernoulli(a, p, seed);
  for (Index i = 0; i < instances; ++i) {
    auto cpl = sample_couplings(d, static_cast<std::size_t>(N - 1), static_cast<std::uint64_t>(i));
    auto r = lower_bound_check_bernoulli(cpl, a);
    ell_max = std::max(ell_max, r.ell);
    ell_min = std::min(ell_min, r.ell);
    if (r.skipped) {
      ++c.skipped;
      continue;
    }
    ++c.checked;
    worst = std::min(worst, r.margin);
    if (!r.passes()) ++c.violations;
  }
  c.passed = c.violations == 0;
  c.worst = c.checked > 0 ? worst : std::numeric_limits<double>::quiet_NaN();
  c.details = {{"ell_min", ell_min}, {"ell_max", ell_max}};
  c.note = std::to_string(c.checked) + " evaluated, " + std::to_string(c.skipped) + " skipped (bound <= 0), l in [" +
           std::to_string(ell_min) + "," + std::to_string(ell_max) + "]";
  if (c.checked > 0) c.note += ", min margin " + detail::fmt(worst, 3);
  return c;
}

// Multilinear expansion of det H in z_k = 1 - a_k^2.
inline CheckResult validate_determinant(Index max_n, Index per_n, std::uint64_t seed, double tol = 1e-6) {
  CheckResult c;
  c.name = "determinant";
  double worst_coef = 0.0, min_higher = std::numeric_limits<double>::infinity(), worst_eval = 0.0;
  for (Index n = 2; n <= max_n; ++n)
    for (Index i = 0; i < per_n; ++i) {
      detail::InstanceRng rng(seed, static_cast<std::uint64_t>(n * 1000 + i));
      auto a = rng.uniform_vector(static_cast<std::size_t>(n - 1));
      auto r = determinant_poly_oracle(a);
      double err = std::abs(r.constant - static_cast<double>(n + 1));
      for (Index k = 2; k <= n; ++k)
        err = std::max(err, std::abs(r.linear[k - 2] - static_cast<double>((k - 1) * (n - k + 1))));
      ++c.checked;
      worst_coef = std::max(worst_coef, err);
      worst_eval = std::max(worst_eval, r.eval_residual);
      if (n >= 3) min_higher = std::min(min_higher, r.min_higher);
      if (err > tol || (n >= 3 && r.min_higher < -tol) || r.eval_residual > tol) ++c.violations;
    }
  c.passed = c.violations == 0;
  c.worst = worst_coef;
  c.details = {{"max_coefficient_error", worst_coef}, {"min_higher", min_higher}, {"max_eval_residual", worst_eval}};
  c.note = "max coefficient error " + detail::fmt(worst_coef, 3) + ", min higher coefficient " +
           detail::fmt(min_higher, 6) + ", max eval residual " + detail::fmt(worst_eval, 3);
  return c;
}

// exp(-tH) <= exp(-tH_free) entrywise for random hopping and Anderson
// restrictions to random 50-vertex masks.
inline CheckResult validate_feynman_kac(Index instances, Index members, const std::vector<double>& times,
                                        std::uint64_t seed, double tol = 1e-12) {
  CheckResult c;
  c.name = "feynman-kac";
  double worst = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < instances; ++i) {
    detail::InstanceRng rng(seed, static_cast<std::uint64_t>(i));
    const int W = static_cast<int>(1 + i % 2);
    const Index N = members + members / 2;
    auto g = std::make_shared<const GraphTopology>(build_chain(N, W));
    std::vector<Index> idx(static_cast<std::size_t>(N));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index k = N - 1; k > 0; --k) std::swap(idx[k], idx[rng.integer(0, k)]);
    idx.resize(static_cast<std::size_t>(members));
    auto mask = DomainMask::from_members(N, idx);
    OperatorSpec rough{g, mask, {}, {}, Normalization::Probabilistic};
    if (i % 2 == 0)
      rough.hopping = rng.uniform_vector(static_cast<std::size_t>(g->edge_count()));
    else
      rough.potential = rng.uniform_vector(static_cast<std::size_t>(N), 0.0, 2.0);
    auto op = assemble(rough);
    auto free_op = assemble({g, mask, {}, {}, Normalization::Probabilistic});
    for (double t : times) {
      Eigen::MatrixXd diff = semigroup_matrix(op, t) - semigroup_matrix(free_op, t);
      const double m = diff.maxCoeff();
      ++c.checked;
      worst = std::max(worst, m);
      if (m > tol) ++c.violations;
    }
  }
  c.passed = c.violations == 0;
  c.worst = worst;
  c.note = "max entry excess " + detail::fmt(worst, 3) + " over " + std::to_string(c.checked) + " (instance, t) pairs";
  return c;
}

// Per-site SRW exit times on Chain(N,1) against the probabilistic landscape.
inline CheckResult validate_exit_times(Index N, std::int64_t walkers, std::uint64_t seed, int threads = 1,
                                       double nse = 3.0) {
  CheckResult c;
  c.name = "exit-times";
  auto g = std::make_shared<const GraphTopology>(build_chain(N, 1));
  LandscapeOptions lo;
  lo.local_maxima = false;
  auto u = solve_landscape(assemble({g, {}, {}, {}, Normalization::Probabilistic}), lo).u;
  WalkConfig cfg;
  cfg.n_walkers = walkers;
  cfg.seed = seed;
  cfg.threads = threads;
  double worst = 0.0;
  auto A = DomainMask::all(N);
  nlohmann::json sites = nlohmann::json::array();
  for (Index x = 0; x < N; ++x) {
    auto e = exit_time_mean(*g, A, x, cfg);
    const double z = std::abs(e.mean - u[x]) / e.se;
    ++c.checked;
    worst = std::max(worst, z);
    if (z > nse || e.censored > 0) ++c.violations;
    sites.push_back({{"site", x}, {"mean", e.mean}, {"se", e.se}, {"exact", u[x]}, {"z", z}});
  }
  c.details = {{"sites", sites}};
  c.passed = c.violations == 0;
  c.worst = worst;
  c.note = std::to_string(c.violations) + "/" + std::to_string(c.checked) + " sites beyond " + detail::fmt(nse, 2) +
           " se, max |z| " + detail::fmt(worst, 3);
  return c;
}

// On-diagonal continuous-time kernel on a Z window against e^{-t} I_0(t).
inline CheckResult validate_heat_kernel(double t, std::int64_t walkers, std::uint64_t seed, int threads = 1,
                                        double nse = 4.0) {
  CheckResult c;
  c.name = "heat-kernel";
  const Index half = 64 + static_cast<Index>(8.0 * t + 8.0 * std::sqrt(t));
  auto g = build_chain(2 * half + 1, 1);
  WalkConfig cfg;
  cfg.time_model = TimeModel::ContinuousExponentialClock;
  cfg.n_walkers = walkers;
  cfg.seed = seed;
  cfg.threads = threads;
  auto e = heat_kernel_estimate(g, DomainMask::all(g.vertex_count()), half, half, t, cfg);
  const double exact = bessel_i0_scaled(t);
  const double z = std::abs(e.mean - exact) / e.se;
  c.checked = 1;
  c.violations = z > nse ? 1 : 0;
  c.passed = c.violations == 0;
  c.worst = z;
  c.details = {{"estimate", e.mean}, {"se", e.se}, {"exact", exact}};
  c.note = "p_hat " + detail::fmt(e.mean, 6) + " +- " + detail::fmt(e.se, 2) + " vs " + detail::fmt(exact, 6) +
           ", |z| " + detail::fmt(z, 3);
  return c;
}

// Free band operator against the sigma_{N,W} predictions.
inline CheckResult validate_band_free(Index N, const std::vector<int>& Ws, double ratio_tol = 0.01,
                                      double product_tol = 0.02) {
  CheckResult c;
  c.name = "band-free";
  double worst = 0.0;
  for (int W : Ws) {
    auto r = band_free_check(N, W);
    const double pdev = std::abs(r.record.product / kPiSquaredOver8 - 1.0);
    const double dev = std::max({std::abs(r.lambda_ratio - 1.0), std::abs(r.umax_ratio - 1.0)});
    ++c.checked;
    worst = std::max(worst, dev);
    if (dev > ratio_tol || pdev > product_tol) ++c.violations;
    c.details["W=" + std::to_string(W)] = {{"lambda_ratio", r.lambda_ratio},
                                           {"umax_ratio", r.umax_ratio},
                                           {"product", r.record.product}};
    c.note += (c.note.empty() ? "" : "; ") + std::string("W=") + std::to_string(W) + " " +
              detail::fmt(r.lambda_ratio, 5) + "/" + detail::fmt(r.umax_ratio, 5) + "/" +
              detail::fmt(r.record.product, 5);
  }
  c.passed = c.violations == 0;
  c.worst = worst;
  return c;
}

// Products of the free and Uniform(0,1) gasket operators over a range of levels.
inline CheckResult validate_sierpinski(const std::vector<int>& levels, Index realizations, std::uint64_t seed,
                                       double lo = 1.0, double hi = 50.0, double max_jump = 0.5) {
  CheckResult c;
  c.name = "sierpinski";
  std::vector<double> free_products;
  double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0, worst_jump = 0.0;
  ProductOptions po;
  po.scale_recheck = false;
  for (int level : levels) {
    auto g = std::make_shared<const GraphTopology>(build_sierpinski(level));
    auto rec = landscape_product(assemble({g, {}, {}, {}, Normalization::Combinatorial}), po);
    free_products.push_back(rec.product);
    std::vector<double> rnd;
    auto d = DisorderSpec::uniform(0.0, seed);
    for (Index r = 0; r < realizations; ++r) {
      auto h = sample_hopping(d, *g, static_cast<std::uint64_t>(level * 1000 + r));
      rnd.push_back(landscape_product(assemble({g, {}, std::move(h), {}, Normalization::Combinatorial}), po).product);
    }
    for (double p : rnd) {
      ++c.checked;
      pmin = std::min(pmin, p);
      pmax = std::max(pmax, p);
      if (p < lo || p > hi) ++c.violations;
    }
    ++c.checked;
    pmin = std::min(pmin, rec.product);
    pmax = std::max(pmax, rec.product);
    if (rec.product < lo || rec.product > hi) ++c.violations;
    c.details["level=" + std::to_string(level)] = {{"free_product", rec.product},
                                                   {"uniform_min", *std::min_element(rnd.begin(), rnd.end())},
                                                   {"uniform_max", *std::max_element(rnd.begin(), rnd.end())}};
  }
  for (std::size_t i = 1; i < free_products.size(); ++i) {
    const double jump = std::abs(free_products[i] - free_products[i - 1]) / free_products[i - 1];
    worst_jump = std::max(worst_jump, jump);
    if (jump >= max_jump) ++c.violations;
  }
  c.passed = c.violations == 0;
  c.worst = worst_jump;
  std::string fp;
  for (double p : free_products) fp += (fp.empty() ? "" : ",") + detail::fmt(p, 5);
  c.note = "products in [" + detail::fmt(pmin, 5) + ", " + detail::fmt(pmax, 5) + "], free by level " + fp +
           ", max consecutive change " + detail::fmt(worst_jump, 3);
  return c;
}

// Free Laplacian on a full chain against its inradius.
inline CheckResult validate_hardy(Index N) {
  CheckResult c;
  c.name = "hardy";
  auto g = std::make_shared<const GraphTopology>(build_chain(N, 1));
  auto h = hardy_inradius_check(g, DomainMask::all(N));
  c.checked = 1;
  const double du = std::abs(h.u_ratio - 0.5), dl = std::abs(h.lambda_ratio / (std::numbers::pi * std::numbers::pi / 4.0) - 1.0);
  c.worst = std::max(du / 0.5, dl);
  c.violations = c.worst > 0.01 ? 1 : 0;
  c.passed = c.violations == 0;
  c.note = "u/rho^2 " + detail::fmt(h.u_ratio, 6) + ", lambda rho^2 " + detail::fmt(h.lambda_ratio, 6);
  return c;
}

}  // namespace landscape
