#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "landscape/walk.hpp"

using namespace landscape;

TEST(Bessel, ScaledI0Reference) {
  // scipy.special.i0e
  EXPECT_DOUBLE_EQ(bessel_i0_scaled(0.0), 1.0);
  EXPECT_NEAR(bessel_i0_scaled(1.0), 0.46575960759364043, 1e-15);
  EXPECT_NEAR(bessel_i0_scaled(10.0), 0.1278333371634286, 1e-14);
  EXPECT_NEAR(bessel_i0_scaled(100.0), 0.03994437929909668, 1e-13);
  EXPECT_THROW(bessel_i0_scaled(-1.0), InvalidParameter);
}

TEST(StepSampler, UniformDirections) {
  for (std::uint64_t deg : {2u, 3u, 4u, 6u}) {
    detail::StepSampler s(7 + deg);
    std::vector<double> counts(deg, 0.0);
    const int n = 120000;
    for (int i = 0; i < n; ++i) counts[s.below(deg)] += 1.0;
    double chi2 = 0.0;
    const double e = static_cast<double>(n) / deg;
    for (double c : counts) chi2 += (c - e) * (c - e) / e;
    // 99.9% quantile of chi^2 with at most 5 degrees of freedom.
    EXPECT_LT(chi2, 20.5) << "degree " << deg;
  }
}

TEST(StepSampler, PoissonMoments) {
  detail::StepSampler s(3);
  for (double mean : {0.5, 7.0, 75.0}) {
    double sum = 0.0, sq = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(s.poisson(mean));
      sum += k;
      sq += k * k;
    }
    const double m = sum / n, var = sq / n - m * m;
    EXPECT_NEAR(m, mean, 5.0 * std::sqrt(mean / n));
    EXPECT_NEAR(var / mean, 1.0, 0.05);
  }
}

TEST(ExitTime, ShortChainExact) {
  // Expected exit time of the SRW on {1..5} from x is x (6 - x).
  auto g = build_chain(5, 1);
  WalkConfig cfg;
  cfg.n_walkers = 40000;
  cfg.seed = 11;
  auto prof = exit_time_profile(g, DomainMask::all(5), cfg);
  ASSERT_EQ(prof.size(), 5u);
  for (const auto& [x, e] : prof) {
    const double want = static_cast<double>((x + 1) * (5 - x));
    EXPECT_NEAR(e.mean, want, 4.0 * e.se) << "site " << x;
    EXPECT_EQ(e.samples, 40000);
    EXPECT_EQ(e.censored, 0);
  }
}

TEST(ExitTime, ThreadCountInvariant) {
  auto g = build_chain(20, 2);
  WalkConfig cfg;
  cfg.n_walkers = 5000;
  cfg.batch_size = 700;
  cfg.seed = 5;
  auto a = exit_time_mean(g, DomainMask::all(20), 9, cfg);
  cfg.threads = 3;
  auto b = exit_time_mean(g, DomainMask::all(20), 9, cfg);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.se, b.se);
}

TEST(ExitTime, Censoring) {
  auto g = build_chain(200, 1);
  WalkConfig cfg;
  cfg.n_walkers = 100;
  cfg.max_steps = 10;
  auto e = exit_time_mean(g, DomainMask::all(200), 100, cfg);
  EXPECT_EQ(e.censored, 100);
  EXPECT_TRUE(e.censor_flag);
  EXPECT_DOUBLE_EQ(e.mean, 10.0);
}

TEST(ExitTime, RejectsBadInput) {
  auto g = build_chain(5, 1);
  WalkConfig cfg;
  EXPECT_THROW(exit_time_mean(g, DomainMask::interval(5, 0, 2), 4, cfg), InvalidParameter);
  cfg.n_walkers = 0;
  EXPECT_THROW(exit_time_mean(g, DomainMask::all(5), 1, cfg), InvalidParameter);
}

TEST(HeatKernel, IntegersOnDiagonal) {
  auto g = build_chain(101, 1);
  WalkConfig cfg;
  cfg.time_model = TimeModel::ContinuousExponentialClock;
  cfg.n_walkers = 200000;
  cfg.seed = 9;
  auto e = heat_kernel_estimate(g, DomainMask::all(101), 50, 50, 1.0, cfg);
  EXPECT_NEAR(e.mean, bessel_i0_scaled(1.0), 4.0 * e.se);
  auto zero = heat_kernel_estimate(g, DomainMask::all(101), 50, 51, 0.0, cfg);
  EXPECT_EQ(zero.mean, 0.0);
}

TEST(KernelBound, ZdExplicitValues) {
  auto b = KernelBoundSpec::zd_explicit(1);
  EXPECT_NEAR(b.c1, 5.43656365691809, 1e-13);
  KernelSample gauss{2, 1.0, 0.0, 0.0};
  EXPECT_EQ(classify(gauss, b), KernelRegime::Gaussian);
  EXPECT_NEAR(kernel_bound(gauss, b), 5.1675384296644244, 1e-13);
  KernelSample pois{100, 1.0, 0.0, 0.0};
  EXPECT_EQ(classify(pois, b), KernelRegime::Poisson);
  EXPECT_NEAR(kernel_bound(pois, b) / 1.4562580356643287e-32, 1.0, 1e-12);
  KernelSample diag{0, 4.0, 0.0, 0.0};
  EXPECT_EQ(classify(diag, b), KernelRegime::OnDiagonal);
  EXPECT_NEAR(kernel_bound(diag, b), b.c5 / 2.0, 1e-13);
}

TEST(KernelBound, GasketExponents) {
  auto b = KernelBoundSpec::sierpinski_subgaussian();
  EXPECT_NEAR(b.z, std::log2(3.0), 1e-15);
  EXPECT_NEAR(b.beta, std::log2(5.0), 1e-15);
  KernelSample s{2, 3.0, 0.0, 0.0};
  ASSERT_EQ(classify(s, b), KernelRegime::Gaussian);
  const double want =
      std::pow(3.0, -b.z / b.beta) * std::exp(-std::pow(std::pow(2.0, b.beta) / 3.0, 1.0 / (b.beta - 1.0)));
  EXPECT_NEAR(kernel_shape(s, b), want, 1e-15);
  KernelSample far{3, 2.0, 0.0, 0.0};
  EXPECT_NEAR(kernel_shape(far, b), std::exp(-3.0), 1e-15);
}

TEST(KernelBound, RegimeCheckAndFit) {
  auto b = KernelBoundSpec::gaussian(1.0, 1.0, 0.5, 1.0, 1.0, 1.0);
  std::vector<KernelSample> samples{{0, 1.0, 0.4, 0.01}, {1, 2.0, 0.2, 0.01}, {5, 1.0, 0.5, 0.01}};
  auto rep = kernel_regime_check(samples, b);
  EXPECT_EQ(rep.checked, 3u);
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].sample, 2u);
  EXPECT_EQ(rep.violations[0].regime, KernelRegime::Poisson);

  auto fit = kernel_fit(samples, b);
  ASSERT_TRUE(fit.c1 && fit.c3 && fit.c5);
  EXPECT_NEAR(*fit.c5, 0.36, 1e-15);
  EXPECT_NEAR(*fit.c3, 0.46 * std::exp(5.0), 1e-12);
  auto fitted = b;
  fitted.c1 = *fit.c1;
  fitted.c3 = *fit.c3;
  fitted.c5 = *fit.c5;
  EXPECT_TRUE(kernel_regime_check(samples, fitted).ok());
}

TEST(KernelBound, Validation) {
  auto b = KernelBoundSpec::gaussian(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
  b.beta = 1.5;
  std::vector<KernelSample> s{{0, 1.0, 0.1, 0.0}};
  EXPECT_THROW(kernel_regime_check(s, b), InvalidParameter);
  EXPECT_THROW(KernelBoundSpec::zd_explicit(0), InvalidParameter);
}
