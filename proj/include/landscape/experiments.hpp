#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <atomic>
#include <condition_variable>
#include <cstring>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "landscape/analysis.hpp"
#include "landscape/disorder.hpp"
#include "landscape/error.hpp"
#include "landscape/graph.hpp"
#include "landscape/operator.hpp"
#include "landscape/solve.hpp"

namespace landscape {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kConfigSchemaVersion = 1;

inline std::string version_string() {
  return std::string(kVersion) + " (config schema " + std::to_string(kConfigSchemaVersion) + ")";
}

// What each realization computes beyond the product.
enum class AnalysisMode { Product, Pairing, Scales };

inline std::string to_string(AnalysisMode m) {
  switch (m) {
    case AnalysisMode::Product:
      return "product";
    case AnalysisMode::Pairing:
      return "pairing";
    case AnalysisMode::Scales:
      return "scales";
  }
  return "product";
}

struct ExperimentConfig {
  std::string name;
  GraphLabel graph{GraphKind::Chain, 1, 10000, 1, 0};
  DisorderSpec disorder = DisorderSpec::bernoulli(0.0, 0.5);
  Normalization normalization = Normalization::Combinatorial;
  Index realizations = 1;
  // Sweeps, expanded in the order disorder, N, W, level; each empty sweep
  // falls back to the single value above.
  std::vector<DisorderSpec> dist_sweep;
  std::vector<Index> N_sweep;
  std::vector<int> W_sweep;
  std::vector<int> level_sweep;
  std::optional<Index> k_eigs;
  AnalysisMode mode = AnalysisMode::Product;
  bool scale_recheck = false;
  double delta = 0.1;  // z_delta parameter in scales mode
  std::string outputs = "results";
  std::optional<std::string> preset;

  void validate() const {
    if (name.empty()) throw ValidationError("experiment name must be nonempty");
    if (realizations < 1) throw ValidationError("realizations must be at least 1");
    if (graph.kind == GraphKind::Custom) throw ValidationError("custom graphs cannot be described by a config");
    disorder.validate();
    for (const auto& d : dist_sweep) d.validate();
    for (Index n : N_sweep)
      if (n < 1) throw ValidationError("N_sweep entries must be positive");
    for (int w : W_sweep)
      if (w < 1) throw ValidationError("W_sweep entries must be positive");
    for (int l : level_sweep)
      if (l < 0) throw ValidationError("level_sweep entries must be non-negative");
    if (mode == AnalysisMode::Pairing && (!k_eigs || *k_eigs < 1))
      throw ValidationError("pairing mode needs k_eigs >= 1");
    if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  }
};

// One point of the expanded sweep.
struct SweepPoint {
  DisorderSpec disorder;
  GraphLabel graph;
};

inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg) {
  std::vector<DisorderSpec> ds = cfg.dist_sweep.empty() ? std::vector{cfg.disorder} : cfg.dist_sweep;
  std::vector<Index> ns = cfg.N_sweep.empty() ? std::vector{cfg.graph.N} : cfg.N_sweep;
  std::vector<int> ws = cfg.W_sweep.empty() ? std::vector{cfg.graph.W} : cfg.W_sweep;
  std::vector<int> ls = cfg.level_sweep.empty() ? std::vector{cfg.graph.level} : cfg.level_sweep;
  if (cfg.graph.kind == GraphKind::Sierpinski) {
    ns = {0};
    ws = {0};
  } else {
    ls = {0};
  }
  std::vector<SweepPoint> out;
  for (const auto& d : ds)
    for (Index n : ns)
      for (int w : ws)
        for (int l : ls) {
          SweepPoint p{d, cfg.graph};
          p.disorder.base_seed = cfg.disorder.base_seed;
          p.graph.N = n;
          p.graph.W = w;
          p.graph.level = l;
          out.push_back(p);
        }
  return out;
}

inline std::shared_ptr<const GraphTopology> build_graph(const GraphLabel& l) {
  switch (l.kind) {
    case GraphKind::Chain:
      return std::make_shared<const GraphTopology>(build_chain(l.N, l.W));
    case GraphKind::Lattice:
      return std::make_shared<const GraphTopology>(build_lattice(l.d, l.N, l.W));
    case GraphKind::Sierpinski:
      return std::make_shared<const GraphTopology>(build_sierpinski(l.level));
    case GraphKind::Custom:
      break;
  }
  throw ValidationError("cannot build a custom graph from its label");
}

struct ResultRow {
  Index realization_index = 0;
  std::uint64_t seed = 0;
  Index N = 0;  // vertex count for the gasket
  int W = 0;
  int d = 0;
  std::string dist;
  double param_a = 0.0;
  std::optional<double> param_p;
  double lambda = 0.0;
  double u_max = 0.0;
  double product = 0.0;
  std::optional<Index> ell_N;
  std::optional<double> S_or_T;
  double runtime_ms = 0.0;
  std::string graph;
  std::string status = "ok";
  bool ok() const { return status == "ok"; }
};

struct PairingRow {
  Index realization_index = 0;
  Index N = 0;
  int W = 0;
  PairEntry entry;
};

struct ScalesRow {
  Index realization_index = 0;
  Index N = 0;
  std::string dist;
  std::optional<Index> ell_N;
  std::optional<double> S_or_T;
  std::optional<Index> ell_delta;
  double u_ratio = 0.0;       // 8 ||u|| / scale^2
  double lambda_ratio = 0.0;  // lambda scale^2 / pi^2
};

// IEEE round-trip decimal.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string format_opt(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>)
    return format_double(*v);
  else
    return std::to_string(*v);
}

inline constexpr const char* kCsvHeader =
    "realization_index,seed,N,W,d,dist,param_a,param_p,lambda,u_max,product,ell_N,S_or_T,runtime_ms,graph,status";

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string to_csv(const ResultRow& r) {
  std::ostringstream os;
  os << r.realization_index << ',' << r.seed << ',' << r.N << ',' << r.W << ',' << r.d << ',' << r.dist << ','
     << format_double(r.param_a) << ',' << format_opt(r.param_p) << ',' << format_double(r.lambda) << ','
     << format_double(r.u_max) << ',' << format_double(r.product) << ',' << format_opt(r.ell_N) << ','
     << format_opt(r.S_or_T) << ',' << format_double(r.runtime_ms) << ',' << csv_escape(r.graph) << ','
     << csv_escape(r.status);
  return os.str();
}

// Everything one realization produces.
struct TaskResult {
  ResultRow row;
  std::vector<PairingRow> pairing;
  std::optional<ScalesRow> scales;
};

namespace detail {

// Longest-run statistic and its scale for 1-D chains.
inline void chain_scales(const DisorderSpec& dist, std::span<const double> couplings, Index N,
                         std::optional<Index>& ell, std::optional<double>& scale) {
  if (N < 16) return;
  auto sc = scales(N, dist);
  if (dist.kind == DisorderKind::Bernoulli) {
    ell = longest_run(couplings, 1.0).length;
    scale = sc.S_N;
  } else if (dist.kind == DisorderKind::Uniform) {
    ell = longest_run(couplings, 1.0 - *sc.eps_N).length;
    scale = sc.T_N;
  }
}

inline TaskResult run_task(const ExperimentConfig& cfg, const SweepPoint& pt,
                           const std::shared_ptr<const GraphTopology>& g, Index realization, std::uint64_t stream) {
  TaskResult tr;
  ResultRow& row = tr.row;
  row.realization_index = realization;
  row.seed = mix_seed(pt.disorder.base_seed, stream);
  row.graph = pt.graph.to_string();
  row.dist = pt.disorder.name();
  row.param_a = pt.disorder.kind == DisorderKind::Constant ? pt.disorder.value : pt.disorder.a;
  if (pt.disorder.kind == DisorderKind::Bernoulli) row.param_p = pt.disorder.p;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (!g) throw ValidationError("graph construction failed");
    row.N = g->vertex_count();
    row.W = pt.graph.kind == GraphKind::Sierpinski ? 0 : pt.graph.W;
    row.d = pt.graph.kind == GraphKind::Sierpinski ? 2 : pt.graph.d;
    auto hopping = sample_hopping(pt.disorder, *g, stream);
    const bool one_d = g->is_band() && g->band_width() == 1;
    if (one_d) chain_scales(pt.disorder, hopping, row.N, row.ell_N, row.S_or_T);
    auto op = assemble({g, {}, std::move(hopping), {}, cfg.normalization});
    if (cfg.mode == AnalysisMode::Pairing) {
      SolverOptions so;
      so.k = std::min(*cfg.k_eigs, op.dimension());
      auto spec = lowest_k(op, so);
      auto land = solve_landscape(op);
      row.lambda = spec.eigenvalues[0];
      row.u_max = land.max_value;
      auto rep = pair_excited(spec, land, *cfg.k_eigs);
      for (const auto& e : rep.pairs) tr.pairing.push_back({realization, row.N, row.W, e});
      if (rep.truncated) row.status = "truncated-pairing";
    } else {
      ProductOptions po;
      po.scale_recheck = cfg.scale_recheck;
      auto rec = landscape_product(op, po);
      row.lambda = rec.lambda;
      row.u_max = rec.u_max;
      if (cfg.scale_recheck && !(rec.scale_invariance_residual <= 1e-9)) row.status = "scale-recheck-failed";
    }
    row.product = row.lambda * row.u_max;
    if (cfg.mode == AnalysisMode::Scales && one_d) {
      ScalesRow s;
      s.realization_index = realization;
      s.N = row.N;
      s.dist = row.dist;
      s.ell_N = row.ell_N;
      s.S_or_T = row.S_or_T;
      if (pt.disorder.kind == DisorderKind::Uniform) {
        auto again = sample_hopping(pt.disorder, *g, stream);
        s.ell_delta = max_ell_delta(again, cfg.delta);
      }
      if (row.S_or_T) {
        const double sc = *row.S_or_T;
        s.u_ratio = 8.0 * row.u_max / (sc * sc);
        s.lambda_ratio = row.lambda * sc * sc / (std::numbers::pi * std::numbers::pi);
      }
      tr.scales = s;
    }
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return tr;
}

}  // namespace detail

struct EnsembleStats {
  Index count = 0;
  double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;  // of product - pi^2/8
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
  double product_mean = 0.0;
};

inline double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

// Statistics of product - pi^2/8 over the successful rows.
inline EnsembleStats summarize(std::span<const ResultRow> rows) {
  std::vector<double> dev;
  for (const auto& r : rows)
    if (r.ok()) dev.push_back(r.product - kPiSquaredOver8);
  if (dev.size() < 2) throw ValidationError("summarize needs at least two successful rows");
  EnsembleStats s;
  double m = 0.0, m2 = 0.0;
  for (double x : dev) {
    ++s.count;
    const double delta = x - m;
    m += delta / static_cast<double>(s.count);
    m2 += delta * (x - m);
  }
  s.mean = m;
  s.std = std::sqrt(m2 / static_cast<double>(s.count - 1));
  s.product_mean = m + kPiSquaredOver8;
  std::sort(dev.begin(), dev.end());
  s.min = dev.front();
  s.max = dev.back();
  s.q05 = quantile_sorted(dev, 0.05);
  s.q25 = quantile_sorted(dev, 0.25);
  s.q50 = quantile_sorted(dev, 0.50);
  s.q75 = quantile_sorted(dev, 0.75);
  s.q95 = quantile_sorted(dev, 0.95);
  return s;
}

// ---- JSON ----

inline std::string to_string(GraphKind k) {
  switch (k) {
    case GraphKind::Chain:
      return "chain";
    case GraphKind::Lattice:
      return "lattice";
    case GraphKind::Sierpinski:
      return "sierpinski";
    case GraphKind::Custom:
      return "custom";
  }
  return "custom";
}

inline GraphKind graph_kind_from(const std::string& s) {
  if (s == "chain") return GraphKind::Chain;
  if (s == "lattice") return GraphKind::Lattice;
  if (s == "sierpinski") return GraphKind::Sierpinski;
  throw ValidationError("unknown graph kind '" + s + "'");
}

inline DisorderKind disorder_kind_from(const std::string& s) {
  if (s == "constant") return DisorderKind::Constant;
  if (s == "bernoulli") return DisorderKind::Bernoulli;
  if (s == "uniform") return DisorderKind::Uniform;
  throw ValidationError("unknown disorder kind '" + s + "'");
}

inline Normalization normalization_from(const std::string& s) {
  if (s == "probabilistic") return Normalization::Probabilistic;
  if (s == "combinatorial") return Normalization::Combinatorial;
  throw ValidationError("unknown normalization '" + s + "'");
}

inline AnalysisMode mode_from(const std::string& s) {
  if (s == "product") return AnalysisMode::Product;
  if (s == "pairing") return AnalysisMode::Pairing;
  if (s == "scales") return AnalysisMode::Scales;
  throw ValidationError("unknown analysis mode '" + s + "'");
}

inline nlohmann::json to_json(const DisorderSpec& d) {
  nlohmann::json j{{"kind", d.name()}, {"base_seed", d.base_seed}};
  switch (d.kind) {
    case DisorderKind::Constant:
      j["value"] = d.value;
      break;
    case DisorderKind::Bernoulli:
      j["a"] = d.a;
      j["p"] = d.p;
      break;
    case DisorderKind::Uniform:
      j["a"] = d.a;
      break;
  }
  return j;
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ValidationError("unknown field '" + it.key() + "' in " + where);
  }
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline DisorderSpec disorder_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"kind", "value", "a", "p", "base_seed"}, "disorder");
  DisorderSpec d;
  d.kind = disorder_kind_from(j.at("kind").get<std::string>());
  d.value = detail::get_or(j, "value", 1.0);
  d.a = detail::get_or(j, "a", 0.0);
  d.p = detail::get_or(j, "p", 0.5);
  d.base_seed = detail::get_or<std::uint64_t>(j, "base_seed", 0);
  d.validate();
  return d;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json g{{"kind", to_string(c.graph.kind)}};
  if (c.graph.kind == GraphKind::Sierpinski) {
    g["level"] = c.graph.level;
  } else {
    g["N"] = c.graph.N;
    g["W"] = c.graph.W;
    if (c.graph.kind == GraphKind::Lattice) g["d"] = c.graph.d;
  }
  nlohmann::json j{{"name", c.name},
                   {"graph", g},
                   {"disorder", to_json(c.disorder)},
                   {"normalization", to_string(c.normalization)},
                   {"realizations", c.realizations},
                   {"mode", to_string(c.mode)},
                   {"scale_recheck", c.scale_recheck},
                   {"delta", c.delta},
                   {"outputs", c.outputs}};
  if (!c.dist_sweep.empty()) {
    j["dist_sweep"] = nlohmann::json::array();
    for (const auto& d : c.dist_sweep) j["dist_sweep"].push_back(to_json(d));
  }
  if (!c.N_sweep.empty()) j["N_sweep"] = c.N_sweep;
  if (!c.W_sweep.empty()) j["W_sweep"] = c.W_sweep;
  if (!c.level_sweep.empty()) j["level_sweep"] = c.level_sweep;
  if (c.k_eigs) j["k_eigs"] = *c.k_eigs;
  if (c.preset) j["preset"] = *c.preset;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"name", "graph", "disorder", "normalization", "realizations", "dist_sweep", "N_sweep",
                          "W_sweep", "level_sweep", "k_eigs", "mode", "scale_recheck", "delta", "outputs", "preset"},
                         "config");
  try {
    ExperimentConfig c;
    c.name = j.at("name").get<std::string>();
    const auto& g = j.at("graph");
    detail::reject_unknown(g, {"kind", "N", "W", "d", "level"}, "graph");
    c.graph.kind = graph_kind_from(g.at("kind").get<std::string>());
    c.graph.N = detail::get_or<Index>(g, "N", 0);
    c.graph.W = detail::get_or(g, "W", 1);
    c.graph.d = detail::get_or(g, "d", 1);
    c.graph.level = detail::get_or(g, "level", 0);
    c.disorder = disorder_from_json(j.at("disorder"));
    c.normalization = normalization_from(detail::get_or<std::string>(j, "normalization", "combinatorial"));
    c.realizations = detail::get_or<Index>(j, "realizations", 1);
    if (j.contains("dist_sweep"))
      for (const auto& d : j.at("dist_sweep")) c.dist_sweep.push_back(disorder_from_json(d));
    c.N_sweep = detail::get_or(j, "N_sweep", std::vector<Index>{});
    c.W_sweep = detail::get_or(j, "W_sweep", std::vector<int>{});
    c.level_sweep = detail::get_or(j, "level_sweep", std::vector<int>{});
    if (j.contains("k_eigs")) c.k_eigs = j.at("k_eigs").get<Index>();
    c.mode = mode_from(detail::get_or<std::string>(j, "mode", "product"));
    c.scale_recheck = detail::get_or(j, "scale_recheck", false);
    c.delta = detail::get_or(j, "delta", 0.1);
    c.outputs = detail::get_or<std::string>(j, "outputs", "results");
    if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config: ") + e.what());
  }
}

inline std::uint64_t config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("outputs");  // where results go does not change them
  Fnv1a h;
  h.text(j.dump());
  return h.digest();
}

inline std::string format_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Replaces base_seed by LANDSCAPE_SEED when it is set.
inline void apply_seed_env(ExperimentConfig& c) {
  const char* s = std::getenv("LANDSCAPE_SEED");
  if (!s || !*s) return;
  std::uint64_t v = 0;
  auto res = std::from_chars(s, s + std::strlen(s), v);
  if (res.ec != std::errc() || *res.ptr != '\0') throw ValidationError("LANDSCAPE_SEED must be an unsigned integer");
  c.disorder.base_seed = v;
}

// ---- presets ----

inline std::vector<ExperimentConfig> presets() {
  std::vector<ExperimentConfig> out;
  auto base = [](std::string name) {
    ExperimentConfig c;
    c.name = name;
    c.preset = name;
    c.outputs = "results";
    return c;
  };
  {
    auto c = base("bernoulli_ensemble");
    c.graph = {GraphKind::Chain, 1, 10000, 1, 0};
    c.disorder = DisorderSpec::bernoulli(0.0, 0.5, 20240101);
    c.realizations = 100;
    out.push_back(c);
  }
  {
    auto c = base("convergence_sweep");
    c.graph = {GraphKind::Chain, 1, 32, 1, 0};
    c.disorder = DisorderSpec::bernoulli(0.0, 0.5, 20240102);
    for (int e = 5; e <= 24; ++e) c.N_sweep.push_back(Index{1} << e);
    out.push_back(c);
  }
  {
    auto c = base("uniform_ensemble");
    c.graph = {GraphKind::Chain, 1, 10000, 1, 0};
    c.disorder = DisorderSpec::uniform(0.0, 20240103);
    c.realizations = 500;
    out.push_back(c);
  }
  {
    auto c = base("free_band");
    c.graph = {GraphKind::Chain, 1, 10000, 1, 0};
    c.disorder = DisorderSpec::constant(1.0, 20240104);
    c.W_sweep = {1, 2, 3, 8, 32};
    out.push_back(c);
  }
  {
    auto c = base("histogram_w2");
    c.graph = {GraphKind::Chain, 1, 10000, 2, 0};
    c.disorder = DisorderSpec::bernoulli(0.0, 0.3, 20240105);
    c.N_sweep = {1000, 10000};
    c.realizations = 2000;
    out.push_back(c);
  }
  {
    auto c = base("excited_pairing");
    c.graph = {GraphKind::Chain, 1, 10000, 2, 0};
    c.disorder = DisorderSpec::bernoulli(0.0, 0.3, 20240106);
    c.W_sweep = {2, 3};
    c.k_eigs = 100;
    c.mode = AnalysisMode::Pairing;
    out.push_back(c);
  }
  {
    auto c = base("sierpinski_product");
    c.graph = {GraphKind::Sierpinski, 2, 0, 0, 3};
    c.disorder = DisorderSpec::uniform(0.0, 20240107);
    c.level_sweep = {3, 4, 5, 6, 7};
    c.realizations = 10;
    out.push_back(c);
  }
  {
    auto c = base("scales_diagnostic");
    c.graph = {GraphKind::Chain, 1, 1024, 1, 0};
    c.disorder = DisorderSpec::bernoulli(0.0, 0.5, 20240108);
    c.dist_sweep = {DisorderSpec::bernoulli(0.0, 0.5), DisorderSpec::uniform(0.0)};
    for (int e = 10; e <= 20; ++e) c.N_sweep.push_back(Index{1} << e);
    c.mode = AnalysisMode::Scales;
    out.push_back(c);
  }
  return out;
}

inline ExperimentConfig preset(const std::string& name) {
  for (auto& p : presets())
    if (p.name == name) return p;
  throw ValidationError("unknown preset '" + name + "'");
}

// ---- running ----

struct RunOptions {
  int jobs = 1;
  bool write_files = true;
  std::function<void(const TaskResult&)> on_row;  // called in realization order
};

struct RunManifest {
  std::filesystem::path csv, manifest, stats;
  std::optional<std::filesystem::path> pairing, scales;
  std::vector<ResultRow> rows;
  std::vector<PairingRow> pairing_rows;
  std::vector<ScalesRow> scales_rows;
  Index failed = 0;
  double wall_time_s = 0.0;
};

namespace detail {

inline std::string group_key(const ResultRow& r) {
  return r.dist + "|" + r.graph + "|a=" + format_double(r.param_a) + "|p=" + format_opt(r.param_p);
}

inline nlohmann::json stats_json(const RunManifest& m) {
  std::map<std::string, std::vector<ResultRow>> groups;
  std::vector<std::string> order;
  for (const auto& r : m.rows) {
    auto key = group_key(r);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(r);
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& key : order) {
    const auto& rows = groups[key];
    nlohmann::json g{{"dist", rows[0].dist},      {"graph", rows[0].graph}, {"N", rows[0].N},
                     {"W", rows[0].W},            {"param_a", rows[0].param_a},
                     {"rows", rows.size()},       {"reference", kPiSquaredOver8}};
    Index ok = 0;
    double pmin = std::numeric_limits<double>::infinity(), pmax = -pmin;
    for (const auto& r : rows)
      if (r.ok()) {
        ++ok;
        pmin = std::min(pmin, r.product);
        pmax = std::max(pmax, r.product);
      }
    g["ok_rows"] = ok;
    if (ok > 0) {
      g["product_min"] = pmin;
      g["product_max"] = pmax;
    }
    if (ok >= 2) {
      auto s = summarize(rows);
      g["deviation"] = {{"mean", s.mean}, {"std", s.std},  {"min", s.min},  {"max", s.max},  {"q05", s.q05},
                        {"q25", s.q25},   {"q50", s.q50}, {"q75", s.q75}, {"q95", s.q95}};
      g["product_mean"] = s.product_mean;
    }
    std::vector<double> slopes;
    for (const auto& r : rows) {
      double sxy = 0.0, sxx = 0.0;
      for (const auto& p : m.pairing_rows)
        if (p.realization_index == r.realization_index && p.N == r.N && p.W == r.W) {
          sxy += p.entry.inv_max * p.entry.lambda;
          sxx += p.entry.inv_max * p.entry.inv_max;
        }
      if (sxx > 0.0) slopes.push_back(sxy / sxx);
    }
    if (!slopes.empty()) g["pairing_slopes"] = slopes;
    out.push_back(g);
  }
  return out;
}

}  // namespace detail

// Runs every realization of every sweep point. Rows are emitted in
// (sweep point, realization) order whatever the pool size, so the output does
// not depend on scheduling.
inline RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto points = expand_sweep(cfg);
  const Index R = cfg.realizations;
  const Index total = static_cast<Index>(points.size()) * R;

  std::vector<std::shared_ptr<const GraphTopology>> graphs(points.size());
  std::vector<std::string> graph_errors(points.size());
  for (std::size_t s = 0; s < points.size(); ++s) {
    try {
      graphs[s] = build_graph(points[s].graph);
    } catch (const std::exception& e) {
      graph_errors[s] = e.what();
    }
  }

  RunManifest m;
  std::ofstream csv, pcsv, scsv;
  const std::filesystem::path dir(cfg.outputs);
  if (opts.write_files) {
    std::filesystem::create_directories(dir);
    m.csv = dir / (cfg.name + ".csv");
    m.manifest = dir / (cfg.name + ".manifest.json");
    m.stats = dir / (cfg.name + ".stats.json");
    csv.open(m.csv);
    if (!csv) throw ValidationError("cannot write " + m.csv.string());
    csv << kCsvHeader << '\n';
    if (cfg.mode == AnalysisMode::Pairing) {
      m.pairing = dir / (cfg.name + ".pairing.csv");
      pcsv.open(*m.pairing);
      pcsv << "realization_index,N,W,j,lambda,inv_max,ratio\n";
    }
    if (cfg.mode == AnalysisMode::Scales) {
      m.scales = dir / (cfg.name + ".scales.csv");
      scsv.open(*m.scales);
      scsv << "realization_index,N,dist,ell_N,S_or_T,ell_ratio,ell_delta,ell_delta_ratio,u_ratio,lambda_ratio\n";
    }
  }

  std::vector<std::optional<TaskResult>> slots(static_cast<std::size_t>(total));
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<Index> next{0};

  auto work = [&] {
    for (Index t; (t = next.fetch_add(1)) < total;) {
      const auto s = static_cast<std::size_t>(t / R);
      TaskResult tr;
      if (!graph_errors[s].empty()) {
        tr.row.realization_index = t % R;
        tr.row.graph = points[s].graph.to_string();
        tr.row.dist = points[s].disorder.name();
        tr.row.status = "error: " + graph_errors[s];
      } else {
        tr = detail::run_task(cfg, points[s], graphs[s], t % R, static_cast<std::uint64_t>(t));
      }
      {
        std::lock_guard lk(mu);
        slots[static_cast<std::size_t>(t)] = std::move(tr);
      }
      cv.notify_all();
    }
  };

  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(std::min<Index>(total, 1024))));
  std::vector<std::thread> pool;
  for (int i = 0; i < jobs; ++i) pool.emplace_back(work);

  // Reorder buffer: write slot t as soon as it and all earlier slots are done.
  for (Index t = 0; t < total; ++t) {
    TaskResult tr;
    {
      std::unique_lock lk(mu);
      cv.wait(lk, [&] { return slots[static_cast<std::size_t>(t)].has_value(); });
      tr = std::move(*slots[static_cast<std::size_t>(t)]);
      slots[static_cast<std::size_t>(t)].reset();
    }
    if (!tr.row.ok() && tr.row.status.rfind("error", 0) == 0) ++m.failed;
    if (opts.write_files) {
      csv << to_csv(tr.row) << '\n';
      for (const auto& p : tr.pairing)
        pcsv << p.realization_index << ',' << p.N << ',' << p.W << ',' << p.entry.j << ','
             << format_double(p.entry.lambda) << ',' << format_double(p.entry.inv_max) << ','
             << format_double(p.entry.ratio) << '\n';
      if (tr.scales) {
        const auto& s = *tr.scales;
        std::string ell_ratio, ld_ratio;
        if (s.ell_N && s.S_or_T) ell_ratio = format_double(static_cast<double>(*s.ell_N) / *s.S_or_T);
        if (s.ell_delta && s.S_or_T) ld_ratio = format_double(static_cast<double>(*s.ell_delta) / *s.S_or_T);
        scsv << s.realization_index << ',' << s.N << ',' << s.dist << ',' << format_opt(s.ell_N) << ','
             << format_opt(s.S_or_T) << ',' << ell_ratio << ',' << format_opt(s.ell_delta) << ',' << ld_ratio << ','
             << format_double(s.u_ratio) << ',' << format_double(s.lambda_ratio) << '\n';
      }
    }
    if (opts.on_row) opts.on_row(tr);
    for (auto& p : tr.pairing) m.pairing_rows.push_back(p);
    if (tr.scales) m.scales_rows.push_back(*tr.scales);
    m.rows.push_back(std::move(tr.row));
  }
  for (auto& th : pool) th.join();
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (opts.write_files) {
    csv.close();
    std::ofstream st(m.stats);
    st << detail::stats_json(m).dump(2) << '\n';
    nlohmann::json man{{"name", cfg.name},
                       {"version", version_string()},
                       {"config", to_json(cfg)},
                       {"config_hash", format_hash(config_hash(cfg))},
                       {"rows", m.rows.size()},
                       {"failed_rows", m.failed},
                       {"jobs", jobs},
                       {"wall_time_s", m.wall_time_s},
                       {"outputs", {{"csv", m.csv.filename().string()}, {"stats", m.stats.filename().string()}}}};
    if (m.pairing) man["outputs"]["pairing"] = m.pairing->filename().string();
    if (m.scales) man["outputs"]["scales"] = m.scales->filename().string();
    std::ofstream mf(m.manifest);
    mf << man.dump(2) << '\n';
  }
  return m;
}

}  // namespace landscape
