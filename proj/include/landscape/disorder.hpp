#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "landscape/error.hpp"
#include "landscape/graph.hpp"

namespace landscape {

enum class DisorderKind { Constant, Bernoulli, Uniform };

// Distribution of the couplings a(x,y).
//   Constant(value): every coupling equals value.
//   Bernoulli(a, p): 1 with probability p, a otherwise.
//   Uniform(a): uniform on [a, 1].
struct DisorderSpec {
  DisorderKind kind = DisorderKind::Constant;
  double value = 1.0;
  double a = 0.0;
  double p = 0.5;
  std::uint64_t base_seed = 0;

  static DisorderSpec constant(double v, std::uint64_t seed = 0) {
    return {DisorderKind::Constant, v, 0.0, 0.5, seed};
  }
  static DisorderSpec bernoulli(double a, double p, std::uint64_t seed = 0) {
    return {DisorderKind::Bernoulli, 1.0, a, p, seed};
  }
  static DisorderSpec uniform(double a, std::uint64_t seed = 0) { return {DisorderKind::Uniform, 1.0, a, 0.5, seed}; }

  void validate() const {
    switch (kind) {
      case DisorderKind::Constant:
        if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("constant coupling must lie in [0,1]");
        break;
      case DisorderKind::Bernoulli:
        if (!(p > 0.0 && p < 1.0)) throw ValidationError("Bernoulli p must lie in (0,1)");
        [[fallthrough]];
      case DisorderKind::Uniform:
        if (!(a >= 0.0 && a < 1.0)) throw ValidationError("lower coupling a must lie in [0,1)");
        break;
    }
  }

  std::string name() const {
    switch (kind) {
      case DisorderKind::Constant:
        return "constant";
      case DisorderKind::Bernoulli:
        return "bernoulli";
      case DisorderKind::Uniform:
        return "uniform";
    }
    return "unknown";
  }
};

inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream seed of realization `index` under `base_seed`.
inline std::uint64_t mix_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64_finalize(splitmix64_finalize(base_seed) + 0x9E3779B97F4A7C15ULL * (index + 1));
}

// Uniform double in [0,1) from the top 53 bits.
inline double uniform53(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class CouplingSampler {
 public:
  CouplingSampler(const DisorderSpec& spec, std::uint64_t stream_seed) : spec_(spec), rng_(stream_seed) {
    spec_.validate();
  }

  double next() {
    switch (spec_.kind) {
      case DisorderKind::Constant:
        return spec_.value;
      case DisorderKind::Bernoulli:
        return uniform53(rng_) < spec_.p ? 1.0 : spec_.a;
      case DisorderKind::Uniform:
        return spec_.a + (1.0 - spec_.a) * uniform53(rng_);
    }
    return spec_.value;
  }

  std::vector<double> draw(std::size_t count) {
    std::vector<double> out(count);
    for (auto& v : out) v = next();
    return out;
  }

 private:
  DisorderSpec spec_;
  std::mt19937_64 rng_;
};

// i.i.d. couplings for `count` slots of realization `index`.
inline std::vector<double> sample_couplings(const DisorderSpec& spec, std::size_t count, std::uint64_t index) {
  return CouplingSampler(spec, mix_seed(spec.base_seed, index)).draw(count);
}

// One coupling per undirected edge in canonical (sorted endpoint) order.
inline std::vector<double> sample_hopping(const DisorderSpec& spec, const GraphTopology& g, std::uint64_t index) {
  return sample_couplings(spec, static_cast<std::size_t>(g.edge_count()), index);
}

struct RunResult {
  Index length = 0;
  Index first = -1;  // positions in the input sequence, inclusive
  Index last = -1;
};

// Longest maximal run of consecutive entries with a[k] >= threshold; leftmost on ties.
inline RunResult longest_run(std::span<const double> a, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidParameter("run threshold must lie in (0,1]");
  RunResult best;
  Index start = -1;
  const Index n = static_cast<Index>(a.size());
  for (Index k = 0; k <= n; ++k) {
    bool pass = k < n && a[k] >= threshold;
    if (pass && start < 0) start = k;
    if (!pass && start >= 0) {
      if (k - start > best.length) best = {k - start, start, k - 1};
      start = -1;
    }
  }
  return best;
}

struct ScaleReport {
  Index N = 0;
  std::optional<double> S_N;    // log N / log(1/p), Bernoulli only
  std::optional<double> T_N;    // log N / (2 log log N), Uniform only
  std::optional<double> eps_N;  // (log N)^-2, Uniform only
};

inline ScaleReport scales(Index N, const DisorderSpec& spec) {
  if (N < 16) throw ValidationError("scales need N >= 16");
  ScaleReport r;
  r.N = N;
  const double L = std::log(static_cast<double>(N));
  if (spec.kind == DisorderKind::Bernoulli) r.S_N = L / std::log(1.0 / spec.p);
  if (spec.kind == DisorderKind::Uniform) {
    r.eps_N = 1.0 / (L * L);
    r.T_N = L / (2.0 * std::log(L));
  }
  return r;
}

struct ZDelta {
  std::optional<Index> minus, plus, ell;
};

// Z-(x) = min n with sum_{j=x-1..x-n} (x-j)(1-a_j) >= 1/delta, Z+ symmetric
// on the right, ell = Z- + Z+. a[j] is the coupling attached to window site j;
// a[x] itself never enters. A side that runs out of window stays empty.
inline ZDelta z_delta(std::span<const double> a, Index x, double delta) {
  if (!(delta > 0.0)) throw InvalidParameter("delta must be positive");
  const Index n = static_cast<Index>(a.size());
  if (x < 0 || x >= n) throw InvalidParameter("site outside the coupling window");
  const double target = 1.0 / delta;
  ZDelta z;
  double s = 0.0;
  for (Index m = 1; x - m >= 0; ++m) {
    s += static_cast<double>(m) * (1.0 - a[x - m]);
    if (s >= target) {
      z.minus = m;
      break;
    }
  }
  s = 0.0;
  for (Index m = 1; x + m < n; ++m) {
    s += static_cast<double>(m) * (1.0 - a[x + m]);
    if (s >= target) {
      z.plus = m;
      break;
    }
  }
  if (z.minus && z.plus) z.ell = *z.minus + *z.plus;
  return z;
}

struct Interval {
  Index first = 0, last = 0;  // inclusive
  Index length() const noexcept { return last - first + 1; }
  bool operator==(const Interval&) const = default;
};

enum class WellConvention {
  // Site k >= 1 is island-type when the coupling to its left neighbour is 1;
  // site 0 always is. Islands are maximal island-type runs, walls the rest.
  ShrunkenIsland,
  // Wells are the maximal site intervals joined by unit couplings; every site
  // belongs to exactly one well and there are no walls.
  OneWell,
};

struct Partition {
  std::vector<Interval> islands, walls;
};

// couplings[k] joins sites k and k+1; N = couplings.size() + 1 sites.
inline Partition island_wall_partition(std::span<const double> couplings,
                                       WellConvention conv = WellConvention::ShrunkenIsland) {
  const Index n = static_cast<Index>(couplings.size()) + 1;
  Partition out;
  if (conv == WellConvention::OneWell) {
    Index start = 0;
    for (Index k = 0; k + 1 < n; ++k)
      if (couplings[k] != 1.0) {
        out.islands.push_back({start, k});
        start = k + 1;
      }
    out.islands.push_back({start, n - 1});
    return out;
  }
  auto island_type = [&](Index s) { return s == 0 || couplings[s - 1] == 1.0; };
  Index start = 0;
  for (Index s = 1; s <= n; ++s) {
    if (s == n || island_type(s) != island_type(start)) {
      (island_type(start) ? out.islands : out.walls).push_back({start, s - 1});
      start = s;
    }
  }
  return out;
}

// Length of the largest block of sites joined by unit couplings.
inline Index longest_block(std::span<const double> couplings) {
  return longest_run(couplings, 1.0).length + 1;
}

}  // namespace landscape
