#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "landscape/disorder.hpp"
#include "landscape/error.hpp"
#include "landscape/graph.hpp"

namespace landscape {

enum class TimeModel { DiscreteStep, ContinuousExponentialClock };

struct WalkConfig {
  TimeModel time_model = TimeModel::DiscreteStep;
  std::int64_t n_walkers = 100000;
  std::int64_t max_steps = 100000000;
  std::uint64_t seed = 0;
  std::int64_t batch_size = 8192;  // walkers per derived seed
  int threads = 1;

  void validate() const {
    if (n_walkers < 1) throw InvalidParameter("n_walkers must be at least 1");
    if (max_steps < 1) throw InvalidParameter("max_steps must be at least 1");
    if (batch_size < 1) throw InvalidParameter("batch_size must be at least 1");
  }
};

struct WalkEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::int64_t samples = 0;
  std::int64_t censored = 0;  // walkers stopped at max_steps
  bool censor_flag = false;   // censored fraction above 0.1%
};

namespace detail {

// Uniform integer draws in [0, n) with a buffered bit stream when n is a power of two.
class StepSampler {
 public:
  explicit StepSampler(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t below(std::uint64_t n) {
    if (std::has_single_bit(n)) {
      const int b = std::countr_zero(n);
      if (b == 0) return 0;
      if (bits_left_ < b) {
        buf_ = rng_();
        bits_left_ = 64;
      }
      std::uint64_t r = buf_ & (n - 1);
      buf_ >>= b;
      bits_left_ -= b;
      return r;
    }
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(rng_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t thresh = (0 - n) % n;
      while (low < thresh) {
        m = static_cast<unsigned __int128>(rng_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double uniform() { return uniform53(rng_); }

  // Poisson(mean) by inversion, split into pieces of mean at most 30 so that
  // exp(-mean) never underflows.
  std::int64_t poisson(double mean) {
    std::int64_t total = 0;
    while (mean > 0.0) {
      const double mu = std::min(mean, 30.0);
      mean -= mu;
      double p = std::exp(-mu), cdf = p, u = uniform();
      std::int64_t k = 0;
      while (u > cdf && k < 1000) {
        ++k;
        p *= mu / static_cast<double>(k);
        cdf += p;
      }
      total += k;
    }
    return total;
  }

 private:
  std::mt19937_64 rng_;
  std::uint64_t buf_ = 0;
  int bits_left_ = 0;
};

// One SRW step from x. Returns -1 when the walk leaves A (or the finite graph).
inline Index srw_step(const GraphTopology& g, const DomainMask& A, Index x, StepSampler& s) {
  const auto r = static_cast<Index>(s.below(static_cast<std::uint64_t>(g.ambient_degree(x))));
  if (r >= g.degree(x)) return -1;
  const Index y = g.neighbor(x, r);
  return A.contains(y) ? y : -1;
}

struct BatchSums {
  unsigned __int128 sum = 0, sum_sq = 0;
  std::int64_t count = 0, censored = 0;
};

// Runs `batches` batch jobs on cfg.threads workers; each job fills its own slot.
template <class Job>
void run_batches(std::int64_t batches, int threads, Job&& job) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<std::int64_t>(batches, 1 << 16))));
  if (threads == 1) {
    for (std::int64_t b = 0; b < batches; ++b) job(b);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::int64_t b; (b = next.fetch_add(1)) < batches;) job(b);
    });
  for (auto& th : pool) th.join();
}

inline WalkEstimate finish(const std::vector<BatchSums>& parts) {
  BatchSums tot;
  for (const auto& p : parts) {
    tot.sum += p.sum;
    tot.sum_sq += p.sum_sq;
    tot.count += p.count;
    tot.censored += p.censored;
  }
  WalkEstimate e;
  e.samples = tot.count;
  e.censored = tot.censored;
  const double n = static_cast<double>(tot.count);
  e.mean = static_cast<double>(tot.sum) / n;
  if (tot.count > 1) {
    // Exact integer sums keep the variance free of cancellation.
    const long double s = static_cast<long double>(tot.sum), s2 = static_cast<long double>(tot.sum_sq);
    const long double var = (s2 - s * s / n) / (n - 1.0L);
    e.se = std::sqrt(static_cast<double>(std::max<long double>(var, 0.0L)) / n);
  }
  e.censor_flag = static_cast<double>(e.censored) > 1e-3 * n;
  return e;
}

}  // namespace detail

// Mean exit time of discrete-time SRW from x out of A. Steps are uniform over
// the ambient_degree(x) directions; directions leaving the finite graph or A
// absorb the walker, and the absorbing step is counted.
inline WalkEstimate exit_time_mean(const GraphTopology& g, const DomainMask& A, Index x, const WalkConfig& cfg) {
  cfg.validate();
  if (A.size() != g.vertex_count()) throw ValidationError("mask size does not match the graph");
  if (x < 0 || x >= g.vertex_count() || !A.contains(x)) throw InvalidParameter("start vertex must lie in A");
  const std::int64_t batches = (cfg.n_walkers + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<detail::BatchSums> parts(static_cast<std::size_t>(batches));
  const std::uint64_t site_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(x));
  detail::run_batches(batches, cfg.threads, [&](std::int64_t b) {
    detail::StepSampler s(mix_seed(site_seed, static_cast<std::uint64_t>(b)));
    auto& p = parts[static_cast<std::size_t>(b)];
    const std::int64_t n = std::min(cfg.batch_size, cfg.n_walkers - b * cfg.batch_size);
    for (std::int64_t w = 0; w < n; ++w) {
      Index v = x;
      std::int64_t steps = 0;
      while (steps < cfg.max_steps) {
        ++steps;
        v = detail::srw_step(g, A, v, s);
        if (v < 0) break;
      }
      if (v >= 0) ++p.censored;
      const auto st = static_cast<unsigned __int128>(steps);
      p.sum += st;
      p.sum_sq += st * st;
      ++p.count;
    }
  });
  return detail::finish(parts);
}

// Exit-time estimate at every member of A, in vertex order.
inline std::vector<std::pair<Index, WalkEstimate>> exit_time_profile(const GraphTopology& g, const DomainMask& A,
                                                                     const WalkConfig& cfg) {
  std::vector<std::pair<Index, WalkEstimate>> out;
  for (Index x : A.members()) out.emplace_back(x, exit_time_mean(g, A, x, cfg));
  return out;
}

// Estimate of p_t(x,y) for the continuous-time SRW killed on leaving A: the
// walker makes Poisson(t) jumps, each one a discrete SRW step.
inline WalkEstimate heat_kernel_estimate(const GraphTopology& g, const DomainMask& A, Index x, Index y, double t,
                                         const WalkConfig& cfg) {
  cfg.validate();
  if (!(t >= 0.0)) throw InvalidParameter("time must be non-negative");
  if (A.size() != g.vertex_count()) throw ValidationError("mask size does not match the graph");
  if (x < 0 || y < 0 || x >= g.vertex_count() || y >= g.vertex_count() || !A.contains(x) || !A.contains(y))
    throw InvalidParameter("x and y must lie in A");
  if (t == 0.0) return {x == y ? 1.0 : 0.0, 0.0, cfg.n_walkers, 0, false};
  const std::int64_t batches = (cfg.n_walkers + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<detail::BatchSums> parts(static_cast<std::size_t>(batches));
  const std::uint64_t pair_seed =
      mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(x)), static_cast<std::uint64_t>(y));
  detail::run_batches(batches, cfg.threads, [&](std::int64_t b) {
    detail::StepSampler s(mix_seed(pair_seed, static_cast<std::uint64_t>(b)));
    auto& p = parts[static_cast<std::size_t>(b)];
    const std::int64_t n = std::min(cfg.batch_size, cfg.n_walkers - b * cfg.batch_size);
    for (std::int64_t w = 0; w < n; ++w) {
      std::int64_t jumps = s.poisson(t);
      if (jumps > cfg.max_steps) {
        ++p.censored;
        jumps = cfg.max_steps;
      }
      Index v = x;
      for (std::int64_t j = 0; j < jumps && v >= 0; ++j) v = detail::srw_step(g, A, v, s);
      if (v == y) {
        p.sum += 1;
        p.sum_sq += 1;
      }
      ++p.count;
    }
  });
  return detail::finish(parts);
}

// e^{-t} I_0(t) by its power series; the continuous-time SRW return
// probability on Z.
inline double bessel_i0_scaled(double t) {
  if (!(t >= 0.0)) throw InvalidParameter("time must be non-negative");
  if (t > 50.0) {
    // Asymptotic expansion; the series loses accuracy to cancellation here.
    double s = 1.0, term = 1.0;
    for (int k = 1; k < 30; ++k) {
      double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * t);
      if (std::abs(next) > std::abs(term)) break;
      term = next;
      s += term;
    }
    return s / std::sqrt(2.0 * std::numbers::pi * t);
  }
  const double q = t * t / 4.0;
  double term = std::exp(-t), s = term;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * k);
    s += term;
    if (term < 1e-18 * s) break;
  }
  return s;
}

// Kernel upper bound of the form
//   c1 t^{-z/beta} exp(-c2 (d^beta/t)^{1/(beta-1)})   d >= 1, regime_scale*t >= d
//   c3 exp(-c4 d)                                      d >= 1, regime_scale*t < d
//   c5 t^{-z/beta}                                     d = 0
// regime_scale = 1 is the plain t >= d split.
struct KernelBoundSpec {
  std::string name = "custom";
  double z = 1.0;
  double beta = 2.0;
  double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0, c5 = 1.0;
  double regime_scale = 1.0;
  // Multiply the t < d branch by t^{-z/beta} as well.
  bool poisson_prefactor = false;

  void validate() const {
    if (!(z >= 1.0)) throw InvalidParameter("kernel bound needs z >= 1");
    if (!(beta >= 2.0)) throw InvalidParameter("kernel bound needs beta >= 2");
    for (double c : {c1, c2, c3, c4, c5, regime_scale})
      if (!(c > 0.0)) throw InvalidParameter("kernel bound constants must be positive");
  }

  static KernelBoundSpec gaussian(double z, double c1, double c2, double c3, double c4, double c5) {
    KernelBoundSpec s;
    s.name = "gaussian";
    s.z = z;
    s.c1 = c1;
    s.c2 = c2;
    s.c3 = c3;
    s.c4 = c4;
    s.c5 = c5;
    return s;
  }

  // Explicit bound for Z^d in the l1 metric, with C2 = d^{d/2} e^d (2d).
  static KernelBoundSpec zd_explicit(int d) {
    if (d < 1) throw InvalidParameter("dimension must be positive");
    const double e = std::numbers::e, dd = d;
    const double C2 = std::pow(dd, dd / 2.0) * std::exp(dd) * 2.0 * dd;
    KernelBoundSpec s;
    s.name = "zd_explicit";
    s.z = dd;
    s.beta = 2.0;
    s.c1 = s.c3 = s.c5 = C2;
    s.c2 = 3.0 / (32.0 * e * e * dd);
    s.c4 = 0.75;
    s.regime_scale = 8.0 * e * e * dd;
    s.poisson_prefactor = true;
    return s;
  }

  // Gasket exponents; the constants are placeholders meant to be fitted.
  static KernelBoundSpec sierpinski_subgaussian() {
    KernelBoundSpec s;
    s.name = "sierpinski_subgaussian";
    s.z = std::log(3.0) / std::log(2.0);
    s.beta = std::log(5.0) / std::log(2.0);
    return s;
  }
};

enum class KernelRegime { OnDiagonal, Gaussian, Poisson };

inline std::string to_string(KernelRegime r) {
  switch (r) {
    case KernelRegime::OnDiagonal:
      return "on-diagonal";
    case KernelRegime::Gaussian:
      return "gaussian";
    case KernelRegime::Poisson:
      return "poisson";
  }
  return "unknown";
}

struct KernelSample {
  Index dist = 0;  // graph distance d(x,y)
  double t = 0.0;
  double p_hat = 0.0;
  double se = 0.0;
};

inline KernelRegime classify(const KernelSample& s, const KernelBoundSpec& b) {
  if (s.dist == 0) return KernelRegime::OnDiagonal;
  return b.regime_scale * s.t >= static_cast<double>(s.dist) ? KernelRegime::Gaussian : KernelRegime::Poisson;
}

// Bound divided by its leading constant (c1, c3 or c5).
inline double kernel_shape(const KernelSample& s, const KernelBoundSpec& b) {
  const double d = static_cast<double>(s.dist);
  const double onsite = std::pow(s.t, -b.z / b.beta);
  switch (classify(s, b)) {
    case KernelRegime::OnDiagonal:
      return onsite;
    case KernelRegime::Gaussian:
      return onsite * std::exp(-b.c2 * std::pow(std::pow(d, b.beta) / s.t, 1.0 / (b.beta - 1.0)));
    case KernelRegime::Poisson:
      return (b.poisson_prefactor ? onsite : 1.0) * std::exp(-b.c4 * d);
  }
  return 0.0;
}

inline double kernel_bound(const KernelSample& s, const KernelBoundSpec& b) {
  switch (classify(s, b)) {
    case KernelRegime::OnDiagonal:
      return b.c5 * kernel_shape(s, b);
    case KernelRegime::Gaussian:
      return b.c1 * kernel_shape(s, b);
    case KernelRegime::Poisson:
      return b.c3 * kernel_shape(s, b);
  }
  return 0.0;
}

struct KernelViolation {
  std::size_t sample = 0;
  KernelRegime regime = KernelRegime::OnDiagonal;
  double lower = 0.0;  // p_hat - 4 se
  double bound = 0.0;
};

struct KernelCheckReport {
  std::size_t checked = 0;
  std::vector<KernelViolation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

// A sample violates the bound when p_hat - 4 se exceeds it.
inline KernelCheckReport kernel_regime_check(std::span<const KernelSample> samples, const KernelBoundSpec& b) {
  b.validate();
  KernelCheckReport r;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!(s.t > 0.0)) throw InvalidParameter("kernel samples need t > 0");
    ++r.checked;
    const double lower = s.p_hat - 4.0 * s.se, bound = kernel_bound(s, b);
    if (lower > bound) r.violations.push_back({i, classify(s, b), lower, bound});
  }
  return r;
}

struct KernelFit {
  // Smallest constants making every sample of the regime pass; empty when the
  // regime has no samples.
  std::optional<double> c1, c3, c5;
};

// Fit mode: holds z, beta, c2, c4 and the regime split fixed.
inline KernelFit kernel_fit(std::span<const KernelSample> samples, const KernelBoundSpec& b) {
  b.validate();
  KernelFit f;
  auto raise = [](std::optional<double>& c, double v) { c = c ? std::max(*c, v) : v; };
  for (const auto& s : samples) {
    if (!(s.t > 0.0)) throw InvalidParameter("kernel samples need t > 0");
    const double need = (s.p_hat - 4.0 * s.se) / kernel_shape(s, b);
    switch (classify(s, b)) {
      case KernelRegime::OnDiagonal:
        raise(f.c5, need);
        break;
      case KernelRegime::Gaussian:
        raise(f.c1, need);
        break;
      case KernelRegime::Poisson:
        raise(f.c3, need);
        break;
    }
  }
  return f;
}

}  // namespace landscape
