#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "landscape/analysis.hpp"
#include "landscape/disorder.hpp"

using namespace landscape;

namespace {

std::shared_ptr<const GraphTopology> share(GraphTopology g) { return std::make_shared<const GraphTopology>(std::move(g)); }

std::vector<double> uniform_couplings(std::size_t n, std::uint64_t seed, double lo = 0.0) {
  return sample_couplings(DisorderSpec::uniform(lo, seed), n, 0);
}

}  // namespace

TEST(Product, FreeChainValue) {
  // 4 sin^2(pi / (2 (N+1))) * max_x x (N+1-x) / 2 at N = 1e4. lambda is
  // near 1e-7 here, so roundoff of order 1e-16 costs about 1e-9 relative.
  auto rec = landscape_product(free_laplacian(10000));
  EXPECT_NEAR(rec.product, 1.23370052765688, 5e-9);
  EXPECT_LT(rec.scale_invariance_residual, 1e-8);
  EXPECT_TRUE(rec.argmax == 4999 || rec.argmax == 5000);
}

TEST(Product, AtLeastOneOnRandomBands) {
  for (int W : {1, 2, 3}) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto g = share(build_chain(150, W));
      auto hop = sample_hopping(DisorderSpec::bernoulli(0.1, 0.5, 77), *g, s + 100 * W);
      auto rec = landscape_product(assemble({g, {}, hop, {}, Normalization::Combinatorial}));
      EXPECT_GE(rec.product, 1.0 - 1e-9);
      EXPECT_LE(rec.scale_invariance_residual, 1e-9);
    }
  }
}

TEST(Product, SkipRecheck) {
  ProductOptions po;
  po.scale_recheck = false;
  EXPECT_TRUE(std::isnan(landscape_product(free_laplacian(20), po).scale_invariance_residual));
}

TEST(Pairing, SlopeThroughOrigin) {
  SpectralResult spec;
  spec.eigenvalues = {1.0, 2.0, 3.0};
  LandscapeResult land;
  land.local_maxima = {{4.0, 0}, {2.0, 5}, {1.0, 9}};
  auto r = pair_excited(spec, land, 3);
  ASSERT_EQ(r.pairs.size(), 3u);
  EXPECT_EQ(r.pairs[1].j, 2);
  EXPECT_DOUBLE_EQ(r.pairs[1].inv_max, 0.5);
  EXPECT_DOUBLE_EQ(r.pairs[2].ratio, 3.0);
  // sum(x y) / sum(x^2) with x = (1/4, 1/2, 1), y = (1, 2, 3).
  EXPECT_DOUBLE_EQ(r.fitted_slope, (0.25 + 1.0 + 3.0) / (0.0625 + 0.25 + 1.0));
  EXPECT_FALSE(r.truncated);
  EXPECT_TRUE(pair_excited(spec, land, 5).truncated);
}

TEST(Determinant, ContinuantMatchesDense) {
  // numpy.linalg.det of the hopping-chain matrices.
  std::vector<double> a{0.5, 0.8}, b{0.3, 0.9, 0.6, 0.2};
  auto sq = [](std::vector<double> v) {
    for (auto& x : v) x *= x;
    return v;
  };
  EXPECT_NEAR(continuant_det(sq(a)), 6.22, 1e-13);
  EXPECT_NEAR(continuant_det(sq(b)), 21.736800000000006, 1e-12);
}

TEST(Determinant, ThreeSiteExpansion) {
  // det = 8 - 2 a1^2 - 2 a2^2 = 4 + 2 z1 + 2 z2.
  std::vector<double> a{0.4, 0.7};
  auto p = determinant_poly_oracle(a);
  EXPECT_EQ(p.n, 3);
  EXPECT_DOUBLE_EQ(p.constant, 4.0);
  ASSERT_EQ(p.linear.size(), 2u);
  EXPECT_DOUBLE_EQ(p.linear[0], 2.0);
  EXPECT_DOUBLE_EQ(p.linear[1], 2.0);
  EXPECT_LT(p.eval_residual, 1e-14);
}

TEST(Determinant, CoefficientPattern) {
  for (Index n = 2; n <= 12; ++n) {
    auto a = uniform_couplings(static_cast<std::size_t>(n - 1), 31, 0.0);
    auto p = determinant_poly_oracle(a);
    EXPECT_DOUBLE_EQ(p.constant, static_cast<double>(n + 1));
    for (Index k = 2; k <= n; ++k) EXPECT_DOUBLE_EQ(p.linear[k - 2], static_cast<double>((k - 1) * (n - k + 1)));
    if (n >= 3) EXPECT_GE(p.min_higher, 0.0);
    EXPECT_LT(p.eval_residual, 1e-9);
  }
  std::vector<double> big(16, 0.5);
  EXPECT_THROW(determinant_poly_oracle(big), CapacityError);
}

TEST(GreenDecay, RandomChains) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto r = verify_green_decay(uniform_couplings(199, s));
    EXPECT_EQ(r.n, 200);
    EXPECT_EQ(r.violations, 0);
    EXPECT_LE(r.max_excess, 1e-9);
  }
}

TEST(GreenDecay, FreeChainIsBelowOne) {
  // With every coupling 1 the bound is 1 and G(y,0) = (n - y) / (n + 1).
  auto r = verify_green_decay(std::vector<double>(49, 1.0));
  EXPECT_EQ(r.violations, 0);
  EXPECT_NEAR(r.max_excess, 50.0 / 51.0 - 1.0, 1e-12);
}

TEST(Monotonicity, LargerHoppingDominates) {
  auto g = share(build_chain(60, 2));
  auto hi = uniform_couplings(static_cast<std::size_t>(g->edge_count()), 4);
  auto lo = hi;
  for (auto& v : lo) v *= 0.5;
  auto r = verify_monotonicity({g, {}, lo, {}, Normalization::Combinatorial}, {g, {}, hi, {}, Normalization::Combinatorial});
  EXPECT_TRUE(r.ok());
  EXPECT_LE(r.max_green_excess, 0.0);
  EXPECT_THROW(verify_monotonicity({g, {}, hi, {}, Normalization::Combinatorial},
                                   {g, {}, lo, {}, Normalization::Combinatorial}),
               ValidationError);
}

TEST(Resolvent, IdentityHolds) {
  auto c = uniform_couplings(79, 12);
  auto r = verify_resolvent_identity(c, 20, 50);
  EXPECT_LT(r.max_residual, 1e-12);
  EXPECT_TRUE(r.domain_monotone);
  EXPECT_GE(r.umax_J, r.umax_I);
  EXPECT_THROW(verify_resolvent_identity(c, 50, 20), InvalidParameter);
}

TEST(Subsolution, LiteralConstantFailsOnAdjacentWells) {
  // Two wells of 5 and 2 sites separated by one weak coupling.
  const std::vector<double> c{1, 1, 1, 1, 0.5, 1};
  auto half = subsolution_check(c, 0.5, SubsolutionConstant::HalfLength);
  EXPECT_EQ(half.ell, 5);
  EXPECT_DOUBLE_EQ(half.c, 2.25);
  EXPECT_NEAR(half.min_Hu, 0.875, 1e-14);
  EXPECT_EQ(half.argmin, 5);
  EXPECT_FALSE(half.passes());
  auto full = subsolution_check(c, 0.5, SubsolutionConstant::FullLength);
  EXPECT_DOUBLE_EQ(full.c, 3.5);
  EXPECT_NEAR(full.min_Hu, 1.0, 1e-14);
  EXPECT_TRUE(full.passes());
  EXPECT_TRUE(full.bound_holds);
}

TEST(Subsolution, RejectsOtherValues) {
  const std::vector<double> c{1, 0.3, 1};
  EXPECT_THROW(subsolution_check(c, 0.5), ValidationError);
  EXPECT_THROW(subsolution_check(c, 0.0), InvalidParameter);
}

TEST(Band, AsymptoticFormulas) {
  auto b = band_asymptotics(100, 2);
  EXPECT_DOUBLE_EQ(b.sigma, 2.0 * 3.0 * 5.0 / (6.0 * 1e4));
  EXPECT_DOUBLE_EQ(b.lambda_pred, std::numbers::pi * std::numbers::pi * b.sigma);
  EXPECT_DOUBLE_EQ(b.umax_pred, 1.0 / (8.0 * b.sigma));
  EXPECT_THROW(band_asymptotics(3, 3), InvalidParameter);
}

TEST(Band, FreeBandRatiosNearOne) {
  for (int W : {1, 2, 4}) {
    auto c = band_free_check(2000, W);
    EXPECT_NEAR(c.lambda_ratio, 1.0, 0.01) << W;
    EXPECT_NEAR(c.umax_ratio, 1.0, 0.01) << W;
  }
}

TEST(LowerBound, SkipsShortWells) {
  std::vector<double> c(30, 1.0);
  c[10] = 0.5;
  auto r = lower_bound_check_bernoulli(c, 0.5);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.ell, 20);
}

TEST(LowerBound, HoldsOnLongWell) {
  std::vector<double> c(300, 1.0);
  c[40] = 0.5;
  auto r = lower_bound_check_bernoulli(c, 0.5);
  EXPECT_FALSE(r.skipped);
  EXPECT_EQ(r.ell, 260);
  const double l = 260.0;
  EXPECT_DOUBLE_EQ(r.bound, std::numbers::pi * std::numbers::pi / (l * l) *
                               (1.0 - 2.0 / (std::pow(0.5, 0.25) * std::pow(l, 0.25))));
  EXPECT_TRUE(r.passes());
}

TEST(Hardy, ChainInradius) {
  auto h = hardy_inradius_check(share(build_chain(1000, 1)), DomainMask::all(1000));
  EXPECT_EQ(h.inradius, 500);
  EXPECT_NEAR(h.u_ratio, 0.5, 0.01);
  EXPECT_NEAR(h.lambda_ratio, std::numbers::pi * std::numbers::pi / 4.0, 0.02);
}
