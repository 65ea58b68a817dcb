#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "landscape/analysis.hpp"
#include "landscape/experiments.hpp"
#include "landscape/validate.hpp"
#include "landscape/walk.hpp"

namespace landscape::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kViolation = 2 };

inline const std::map<std::string, std::string>& preset_descriptions() {
  static const std::map<std::string, std::string> d{
      {"bernoulli_ensemble", "N=1e4 chain, Bernoulli(a=0, p=1/2), 100 realizations"},
      {"convergence_sweep", "Bernoulli(a=0, p=1/2) chain, N = 2^5..2^24, one realization each"},
      {"uniform_ensemble", "N=1e4 chain, Uniform(0,1), 500 realizations"},
      {"free_band", "free band Laplacian, N=1e4, W in {1,2,3,8,32}"},
      {"histogram_w2", "W=2 band, Bernoulli p(1)=0.3, N in {1e3,1e4}, 2000 realizations"},
      {"excited_pairing", "W in {2,3} band, Bernoulli p(1)=0.3, N=1e4, 100 eigenvalues against landscape maxima"},
      {"sierpinski_product", "Sierpinski levels 3..7, Uniform(0,1), 10 realizations"},
      {"scales_diagnostic", "longest-run and Z_delta trajectories, N = 2^10..2^20"},
  };
  return d;
}

// Flags that mirror ExperimentConfig fields. Unset flags leave the config alone.
struct ConfigFlags {
  std::optional<std::string> name, graph, dist, mode, normalization, out;
  std::optional<Index> N, realizations, k;
  std::optional<int> W, d, level;
  std::optional<double> a, p, value, delta;
  std::optional<std::uint64_t> seed;
  std::vector<Index> N_sweep;
  std::vector<int> W_sweep, level_sweep;
  bool scale_recheck = false;

  void add_graph(CLI::App* app) {
    app->add_option("--graph", graph, "graph kind: chain, lattice or sierpinski");
    app->add_option("--N", N, "side length (chain or lattice)");
    app->add_option("--W", W, "band width");
    app->add_option("--d", d, "lattice dimension");
    app->add_option("--level", level, "gasket level");
  }
  void add_disorder(CLI::App* app) {
    app->add_option("--dist", dist, "coupling distribution: constant, bernoulli or uniform");
    app->add_option("--a", a, "lower coupling value");
    app->add_option("--p", p, "Bernoulli probability of coupling 1");
    app->add_option("--value", value, "constant coupling value");
    app->add_option("--seed", seed, "base seed (overrides LANDSCAPE_SEED)");
    app->add_option("--normalization", normalization, "probabilistic or combinatorial");
  }
  void add_all(CLI::App* app) {
    add_graph(app);
    add_disorder(app);
    app->add_option("--name", name, "experiment name");
    app->add_option("--realizations", realizations, "realizations per sweep point");
    app->add_option("--N-sweep", N_sweep, "list of N values")->delimiter(',');
    app->add_option("--W-sweep", W_sweep, "list of W values")->delimiter(',');
    app->add_option("--level-sweep", level_sweep, "list of gasket levels")->delimiter(',');
    app->add_option("--k", k, "eigenvalues per realization (pairing mode)");
    app->add_option("--mode", mode, "product, pairing or scales");
    app->add_option("--delta", delta, "Z_delta parameter for scales mode");
    app->add_flag("--scale-recheck", scale_recheck, "recompute each product on 3H");
    app->add_option("--out", out, "output directory");
  }

  void apply(ExperimentConfig& c) const {
    if (name) c.name = *name;
    if (graph) c.graph.kind = graph_kind_from(*graph);
    if (N) c.graph.N = *N;
    if (W) c.graph.W = *W;
    if (d) c.graph.d = *d;
    if (level) c.graph.level = *level;
    if (dist) {
      const auto kind = disorder_kind_from(*dist);
      if (kind != c.disorder.kind) {
        const auto seed_keep = c.disorder.base_seed;
        c.disorder = DisorderSpec{};
        c.disorder.kind = kind;
        c.disorder.base_seed = seed_keep;
      }
      c.dist_sweep.clear();
    }
    if (a) c.disorder.a = *a;
    if (p) c.disorder.p = *p;
    if (value) c.disorder.value = *value;
    if (seed) c.disorder.base_seed = *seed;
    if (normalization) c.normalization = normalization_from(*normalization);
    if (realizations) c.realizations = *realizations;
    if (!N_sweep.empty()) c.N_sweep = N_sweep;
    if (!W_sweep.empty()) c.W_sweep = W_sweep;
    if (!level_sweep.empty()) c.level_sweep = level_sweep;
    if (k) c.k_eigs = *k;
    if (mode) c.mode = mode_from(*mode);
    if (delta) c.delta = *delta;
    if (scale_recheck) c.scale_recheck = true;
    if (out) c.outputs = *out;
  }
};

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool json = false;
};

inline int cmd_run(Context& ctx, const std::optional<std::string>& preset_name,
                   const std::optional<std::string>& config_path, const ConfigFlags& flags, int jobs,
                   bool require_sweep) {
  ExperimentConfig cfg;
  if (preset_name) {
    cfg = preset(*preset_name);
  } else if (config_path) {
    cfg = load_config_file(*config_path);
  } else {
    cfg.name = "experiment";
  }
  apply_seed_env(cfg);
  flags.apply(cfg);
  cfg.validate();
  if (require_sweep && cfg.N_sweep.empty() && cfg.W_sweep.empty() && cfg.level_sweep.empty() &&
      cfg.dist_sweep.empty())
    throw ValidationError("sweep needs at least one of --N-sweep, --W-sweep, --level-sweep");
  RunOptions ro;
  ro.jobs = jobs;
  auto m = run_experiment(cfg, ro);
  Index below_one = 0;
  for (const auto& r : m.rows)
    if (r.ok() && r.product < 1.0 - 1e-9) ++below_one;
  if (ctx.json) {
    std::ifstream mf(m.manifest);
    nlohmann::json man;
    mf >> man;
    man["product_below_one"] = below_one;
    ctx.out << man.dump(2) << '\n';
  } else {
    ctx.out << cfg.name << ": " << m.rows.size() << " rows, " << m.failed << " failed, "
            << format_double(m.wall_time_s) << " s\n"
            << "  " << m.csv.string() << "\n  " << m.manifest.string() << "\n  " << m.stats.string() << '\n';
    if (m.pairing) ctx.out << "  " << m.pairing->string() << '\n';
    if (m.scales) ctx.out << "  " << m.scales->string() << '\n';
  }
  if (below_one > 0) {
    ctx.err << below_one << " rows have lambda*||u|| below 1\n";
    return kViolation;
  }
  return kOk;
}

inline int cmd_spectrum(Context& ctx, const ConfigFlags& f, Index k, Index realization) {
  ExperimentConfig cfg;
  cfg.name = "spectrum";
  cfg.graph = {GraphKind::Chain, 1, 10000, 2, 0};
  cfg.disorder = DisorderSpec::bernoulli(0.0, 0.3);
  apply_seed_env(cfg);
  f.apply(cfg);
  cfg.disorder.validate();
  auto g = build_graph(cfg.graph);
  auto op = assemble({g, {}, sample_hopping(cfg.disorder, *g, static_cast<std::uint64_t>(realization)), {},
                      cfg.normalization});
  SolverOptions so;
  so.k = std::min(k, op.dimension());
  auto spec = lowest_k(op, so);
  auto land = solve_landscape(op);
  auto rep = pair_excited(spec, land, k);
  if (ctx.json) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& e : rep.pairs)
      pairs.push_back({{"j", e.j}, {"lambda", e.lambda}, {"inv_max", e.inv_max}, {"ratio", e.ratio}});
    ctx.out << nlohmann::json{{"pairs", pairs},
                              {"fitted_slope", rep.fitted_slope},
                              {"reference_slope", kPiSquaredOver8},
                              {"truncated", rep.truncated}}
                   .dump(2)
            << '\n';
  } else {
    ctx.out << "j,lambda_j,inv_max_j\n";
    for (const auto& e : rep.pairs)
      ctx.out << e.j << ',' << format_double(e.lambda) << ',' << format_double(e.inv_max) << '\n';
    ctx.err << "slope " << format_double(rep.fitted_slope) << " (pi^2/8 = " << format_double(kPiSquaredOver8)
            << ")\n";
  }
  return kOk;
}

struct ValidateFlags {
  std::string name;
  std::optional<Index> n, instances, N, max_n, realizations, walkers;
  std::optional<double> a, p, t;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> constant;
  int jobs = 1;
};

inline const std::vector<std::string>& validator_names() {
  static const std::vector<std::string> v{"free-chain",  "product-lower-bound", "green-decay",  "monotonicity",
                                          "resolvent",   "subsolution",         "bernoulli-lower-bound",
                                          "determinant", "feynman-kac",         "exit-times",   "heat-kernel",
                                          "band-free",   "sierpinski",          "hardy"};
  return v;
}

inline CheckResult run_validator(const ValidateFlags& v) {
  const std::uint64_t seed = v.seed.value_or(1);
  const std::string& n = v.name;
  if (n == "free-chain") return validate_free_chain({1, 2, 3, 5, 10, 100, 10000});
  if (n == "product-lower-bound")
    return validate_product_lower_bound(v.instances.value_or(1000), v.max_n.value_or(1000), seed);
  if (n == "green-decay") return validate_green_decay(v.n.value_or(200), v.instances.value_or(1000), seed);
  if (n == "monotonicity") return validate_monotonicity(v.instances.value_or(200), v.max_n.value_or(100), seed);
  if (n == "resolvent") return validate_resolvent(v.instances.value_or(100), v.max_n.value_or(100), seed);
  if (n == "subsolution") {
    auto c = v.constant.value_or("half");
    if (c != "half" && c != "full") throw ValidationError("--constant must be half or full");
    return validate_subsolution(v.instances.value_or(500), v.N.value_or(2000), v.a.value_or(0.5), v.p.value_or(0.5),
                                seed, c == "half" ? SubsolutionConstant::HalfLength : SubsolutionConstant::FullLength);
  }
  if (n == "bernoulli-lower-bound")
    return validate_bernoulli_lower_bound(v.instances.value_or(200), v.N.value_or(100000), v.a.value_or(0.5),
                                          v.p.value_or(0.5), seed);
  if (n == "determinant") return validate_determinant(v.max_n.value_or(12), v.instances.value_or(50), seed);
  if (n == "feynman-kac") return validate_feynman_kac(v.instances.value_or(50), v.n.value_or(50), {0.1, 1, 10, 100}, seed);
  if (n == "exit-times") return validate_exit_times(v.N.value_or(50), v.walkers.value_or(100000), seed, v.jobs);
  if (n == "heat-kernel") return validate_heat_kernel(v.t.value_or(1.0), v.walkers.value_or(1000000), seed, v.jobs);
  if (n == "band-free") return validate_band_free(v.N.value_or(10000), {1, 2, 3, 8, 32});
  if (n == "sierpinski") return validate_sierpinski({3, 4, 5, 6, 7}, v.realizations.value_or(10), seed);
  if (n == "hardy") return validate_hardy(v.N.value_or(1000));
  throw ValidationError("unknown verifier '" + n + "'");
}

inline int cmd_validate(Context& ctx, const ValidateFlags& v) {
  auto r = run_validator(v);
  if (ctx.json)
    ctx.out << r.to_json().dump(2) << '\n';
  else
    ctx.out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.note << '\n';
  return r.passed ? kOk : kViolation;
}

struct WalkFlags {
  Index N = 50;
  int W = 1;
  std::string mode = "exit";
  std::int64_t walkers = 100000, max_steps = 100000000;
  std::uint64_t seed = 1;
  Index x = 0, y = 0;
  double t = 1.0;
};

inline int cmd_walk(Context& ctx, const WalkFlags& w, int jobs) {
  auto g = build_chain(w.N, w.W);
  auto A = DomainMask::all(g.vertex_count());
  WalkConfig cfg;
  cfg.n_walkers = w.walkers;
  cfg.max_steps = w.max_steps;
  cfg.seed = w.seed;
  cfg.threads = jobs;
  if (w.mode == "exit") {
    auto prof = exit_time_profile(g, A, cfg);
    if (ctx.json) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& [x, e] : prof)
        arr.push_back({{"site", x}, {"mean", e.mean}, {"se", e.se}, {"censored", e.censored}});
      ctx.out << arr.dump(2) << '\n';
    } else {
      ctx.out << "site,mean,se,censored\n";
      for (const auto& [x, e] : prof)
        ctx.out << x << ',' << format_double(e.mean) << ',' << format_double(e.se) << ',' << e.censored << '\n';
    }
    for (const auto& [x, e] : prof)
      if (e.censor_flag) ctx.err << "site " << x << ": " << e.censored << " censored walkers\n";
    return kOk;
  }
  if (w.mode == "kernel") {
    cfg.time_model = TimeModel::ContinuousExponentialClock;
    auto e = heat_kernel_estimate(g, A, w.x, w.y, w.t, cfg);
    if (ctx.json)
      ctx.out << nlohmann::json{{"x", w.x}, {"y", w.y}, {"t", w.t}, {"p_hat", e.mean}, {"se", e.se}}.dump(2) << '\n';
    else
      ctx.out << "x,y,t,p_hat,se\n"
              << w.x << ',' << w.y << ',' << format_double(w.t) << ',' << format_double(e.mean) << ','
              << format_double(e.se) << '\n';
    return kOk;
  }
  throw ValidationError("--mode must be exit or kernel");
}

inline GraphLabel label_from_flags(const ConfigFlags& f) {
  GraphLabel l{GraphKind::Chain, 1, 10, 1, 0};
  if (f.graph) l.kind = graph_kind_from(*f.graph);
  if (f.N) l.N = *f.N;
  if (f.W) l.W = *f.W;
  if (f.d) l.d = *f.d;
  if (f.level) l.level = *f.level;
  return l;
}

inline int cmd_graph_dump(Context& ctx, const ConfigFlags& f) {
  auto g = build_graph(label_from_flags(f));
  ctx.out << "u,v\n";
  g->for_each_edge([&](Index, Index u, Index v) { ctx.out << u << ',' << v << '\n'; });
  return kOk;
}

inline constexpr Index kOperatorDumpCap = 10000;

inline int cmd_operator_dump(Context& ctx, const ConfigFlags& f, Index realization) {
  ExperimentConfig cfg;
  cfg.name = "operator";
  cfg.graph = label_from_flags(f);
  cfg.disorder = DisorderSpec::constant(1.0);
  apply_seed_env(cfg);
  f.apply(cfg);
  cfg.disorder.validate();
  auto g = build_graph(cfg.graph);
  if (g->vertex_count() > kOperatorDumpCap) throw CapacityError("operator dump supports dimension <= 1e4");
  auto op = assemble({g, {}, sample_hopping(cfg.disorder, *g, static_cast<std::uint64_t>(realization)), {},
                      cfg.normalization});
  auto s = to_sparse(op);
  ctx.out << "row,col,value\n";
  for (int c = 0; c < s.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(s, c); it; ++it)
      ctx.out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
  return kOk;
}

inline int cmd_presets(Context& ctx) {
  if (ctx.json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : presets()) arr.push_back(to_json(p));
    ctx.out << arr.dump(2) << '\n';
    return kOk;
  }
  for (const auto& p : presets()) ctx.out << p.name << "  " << preset_descriptions().at(p.name) << '\n';
  return kOk;
}

inline std::string presets_footer() {
  std::string s = "Presets:";
  for (const auto& p : presets()) s += "\n  " + p.name + "  " + preset_descriptions().at(p.name);
  s += "\nVerifiers (landscape validate <name>):\n ";
  for (const auto& v : validator_names()) s += " " + v;
  return s;
}

// Parses argv and runs the subcommand. Exit status 0 on success, 1 on bad
// input or failed runs, 2 when a numerical verifier reports a violation.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Localization landscape and low-lying spectra of disordered hopping operators", "landscape"};
  app.footer(presets_footer());
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  Context ctx{out, err};
  app.add_flag("--json", ctx.json, "machine-readable JSON on stdout");
  int jobs = default_jobs();
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  std::optional<std::string> preset_name, config_path;
  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "run a preset, a JSON config, or a flag-described experiment");
  auto* sweep = app.add_subcommand("sweep", "like run, but at least one sweep list must be set");
  for (auto* sc : {run, sweep}) {
    auto* po = sc->add_option("--preset", preset_name, "named preset");
    auto* co = sc->add_option("--config", config_path, "experiment config JSON")->check(CLI::ExistingFile);
    po->excludes(co);
    run_flags.add_all(sc);
    sc->add_flag("--json", ctx.json, "machine-readable JSON on stdout");
    sc->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  ConfigFlags spec_flags;
  Index spec_k = 100, spec_real = 0;
  auto* spectrum = app.add_subcommand("spectrum", "lowest eigenvalues paired with landscape maxima (CSV)");
  spec_flags.add_graph(spectrum);
  spec_flags.add_disorder(spectrum);
  spectrum->add_option("--k", spec_k, "number of eigenvalues")->check(CLI::PositiveNumber);
  spectrum->add_option("--realization", spec_real, "realization index");
  spectrum->add_flag("--json", ctx.json, "machine-readable JSON on stdout");

  ValidateFlags vf;
  auto* validate = app.add_subcommand("validate", "run a numerical verifier sweep");
  validate->add_option("name", vf.name, "verifier name")->required()->check(CLI::IsMember(validator_names()));
  validate->add_option("--n", vf.n, "matrix size or mask size");
  validate->add_option("--instances", vf.instances, "random instances");
  validate->add_option("--N", vf.N, "chain length");
  validate->add_option("--max-n", vf.max_n, "largest instance size");
  validate->add_option("--realizations", vf.realizations, "realizations per level");
  validate->add_option("--walkers", vf.walkers, "Monte Carlo walkers");
  validate->add_option("--a", vf.a, "lower coupling value");
  validate->add_option("--p", vf.p, "Bernoulli probability");
  validate->add_option("--t", vf.t, "time");
  validate->add_option("--seed", vf.seed, "seed");
  validate->add_option("--constant", vf.constant, "subsolution constant: half or full");
  validate->add_flag("--json", ctx.json, "machine-readable JSON on stdout");

  WalkFlags wf;
  auto* walk = app.add_subcommand("walk", "Monte Carlo exit times (per-site CSV) or heat-kernel entries on a chain");
  walk->add_option("--N", wf.N, "chain length");
  walk->add_option("--W", wf.W, "band width");
  walk->add_option("--mode", wf.mode, "exit or kernel")->check(CLI::IsMember({"exit", "kernel"}));
  walk->add_option("--walkers", wf.walkers, "walkers per site")->check(CLI::PositiveNumber);
  walk->add_option("--max-steps", wf.max_steps, "censoring cap")->check(CLI::PositiveNumber);
  walk->add_option("--seed", wf.seed, "seed");
  walk->add_option("--x", wf.x, "start vertex (kernel mode)");
  walk->add_option("--y", wf.y, "end vertex (kernel mode)");
  walk->add_option("--t", wf.t, "time (kernel mode)");
  walk->add_flag("--json", ctx.json, "machine-readable JSON on stdout");

  ConfigFlags gflags;
  auto* graph = app.add_subcommand("graph", "graph utilities");
  graph->require_subcommand(1);
  auto* gdump = graph->add_subcommand("dump", "edge list as CSV (u,v)");
  gflags.add_graph(gdump);

  ConfigFlags oflags;
  Index op_real = 0;
  auto* oper = app.add_subcommand("operator", "operator utilities");
  oper->require_subcommand(1);
  auto* odump = oper->add_subcommand("dump", "matrix entries as CSV (row,col,value), dimension <= 1e4");
  oflags.add_graph(odump);
  oflags.add_disorder(odump);
  odump->add_option("--realization", op_real, "realization index");

  auto* pres = app.add_subcommand("presets", "list the shipped presets");
  pres->add_flag("--json", ctx.json, "machine-readable JSON on stdout");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(ctx, preset_name, config_path, run_flags, jobs, false);
    if (*sweep) return cmd_run(ctx, preset_name, config_path, run_flags, jobs, true);
    if (*spectrum) return cmd_spectrum(ctx, spec_flags, spec_k, spec_real);
    if (*validate) {
      vf.jobs = jobs;
      return cmd_validate(ctx, vf);
    }
    if (*walk) return cmd_walk(ctx, wf, jobs);
    if (*gdump) return cmd_graph_dump(ctx, gflags);
    if (*odump) return cmd_operator_dump(ctx, oflags, op_real);
    if (*pres) return cmd_presets(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kValidation;
}

inline int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace landscape::cli
