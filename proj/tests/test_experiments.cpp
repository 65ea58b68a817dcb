#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "landscape/experiments.hpp"

using namespace landscape;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

ExperimentConfig small_config(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.graph = {GraphKind::Chain, 1, 300, 1, 0};
  c.disorder = DisorderSpec::bernoulli(0.0, 0.5, 123);
  c.realizations = 4;
  c.N_sweep = {200, 400};
  c.W_sweep = {1, 2};
  return c;
}

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("landscape_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Format, RoundTripDecimal) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(format_double(1e-7), "1e-07");
  EXPECT_EQ(format_double(1e300), "1e+300");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  for (double v : {1.2337005501361697, 6.02214076e23, 1.2345678901234568e+20, -0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Format, CsvEscape) {
  EXPECT_EQ(csv_escape("ok"), "ok");
  EXPECT_EQ(csv_escape("chain(10,2)"), "\"chain(10,2)\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Format, HeaderColumns) {
  EXPECT_EQ(std::string(kCsvHeader),
            "realization_index,seed,N,W,d,dist,param_a,param_p,lambda,u_max,product,ell_N,S_or_T,runtime_ms,graph,"
            "status");
  ResultRow r;
  r.graph = "chain(5,1)";
  EXPECT_EQ(split_csv_line(to_csv(r)).size(), split_csv_line(kCsvHeader).size());
}

TEST(Sweep, ExpansionOrder) {
  auto c = small_config("x");
  c.dist_sweep = {DisorderSpec::bernoulli(0.0, 0.5), DisorderSpec::uniform(0.0)};
  auto pts = expand_sweep(c);
  ASSERT_EQ(pts.size(), 8u);
  EXPECT_EQ(pts[0].disorder.kind, DisorderKind::Bernoulli);
  EXPECT_EQ(pts[4].disorder.kind, DisorderKind::Uniform);
  EXPECT_EQ(pts[1].graph.N, 200);
  EXPECT_EQ(pts[1].graph.W, 2);
  EXPECT_EQ(pts[2].graph.N, 400);
  for (const auto& p : pts) EXPECT_EQ(p.disorder.base_seed, 123u);
}

TEST(Sweep, GasketIgnoresChainSweeps) {
  ExperimentConfig c;
  c.name = "g";
  c.graph = {GraphKind::Sierpinski, 2, 0, 0, 3};
  c.level_sweep = {2, 3};
  c.N_sweep = {10, 20};
  EXPECT_EQ(expand_sweep(c).size(), 2u);
}

TEST(Config, JsonRoundTrip) {
  auto c = small_config("rt");
  c.mode = AnalysisMode::Pairing;
  c.k_eigs = 5;
  auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, HashIgnoresOutputDirectory) {
  auto a = small_config("h");
  auto b = a;
  b.outputs = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.realizations = 5;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(format_hash(0xabcULL), "0000000000000abc");
}

TEST(Config, RejectsUnknownAndInvalid) {
  auto j = to_json(small_config("bad"));
  j["typo"] = 1;
  EXPECT_THROW(config_from_json(j), ValidationError);
  j = to_json(small_config("bad"));
  j["graph"]["kind"] = "torus";
  EXPECT_THROW(config_from_json(j), ValidationError);
  j = to_json(small_config("bad"));
  j["realizations"] = 0;
  EXPECT_THROW(config_from_json(j), ValidationError);
  j = to_json(small_config("bad"));
  j["disorder"]["p"] = 1.5;
  EXPECT_THROW(config_from_json(j), Error);
  j = to_json(small_config("bad"));
  j["mode"] = "pairing";
  EXPECT_THROW(config_from_json(j), ValidationError);
}

TEST(Config, SeedFromEnvironment) {
  auto c = small_config("env");
  ::setenv("LANDSCAPE_SEED", "987", 1);
  apply_seed_env(c);
  EXPECT_EQ(c.disorder.base_seed, 987u);
  ::setenv("LANDSCAPE_SEED", "12x", 1);
  EXPECT_THROW(apply_seed_env(c), ValidationError);
  ::unsetenv("LANDSCAPE_SEED");
  apply_seed_env(c);
  EXPECT_EQ(c.disorder.base_seed, 987u);
}

TEST(Presets, AllValid) {
  std::set<std::string> names;
  for (const auto& p : presets()) {
    EXPECT_NO_THROW(p.validate()) << p.name;
    names.insert(p.name);
    EXPECT_EQ(preset(p.name).name, p.name);
  }
  const std::set<std::string> want{"bernoulli_ensemble", "convergence_sweep", "uniform_ensemble",
                                   "free_band",          "histogram_w2",      "excited_pairing",
                                   "sierpinski_product", "scales_diagnostic"};
  EXPECT_EQ(names, want);
  EXPECT_THROW(preset("nope"), ValidationError);
  EXPECT_EQ(preset("convergence_sweep").N_sweep.back(), Index{1} << 24);
}

TEST(Stats, SummarizeByHand) {
  std::vector<ResultRow> rows(4);
  const double p[] = {1.0, 1.2, 1.4, 0.0};
  for (int i = 0; i < 4; ++i) rows[i].product = p[i];
  rows[3].status = "error: x";
  auto s = summarize(rows);
  EXPECT_EQ(s.count, 3);
  EXPECT_NEAR(s.mean, 1.2 - kPiSquaredOver8, 1e-15);
  EXPECT_NEAR(s.std, 0.2, 1e-15);
  EXPECT_NEAR(s.product_mean, 1.2, 1e-15);
  EXPECT_NEAR(s.min, 1.0 - kPiSquaredOver8, 1e-15);
  rows.resize(1);
  EXPECT_THROW(summarize(rows), ValidationError);
  EXPECT_DOUBLE_EQ(quantile_sorted({1, 2, 3, 4}, 0.25), 1.75);
}

TEST(Run, DeterministicAcrossJobCounts) {
  auto c = small_config("det");
  RunOptions one, three;
  one.write_files = three.write_files = false;
  three.jobs = 3;
  auto a = run_experiment(c, one);
  auto b = run_experiment(c, three);
  ASSERT_EQ(a.rows.size(), 16u);
  ASSERT_EQ(b.rows.size(), 16u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].seed, b.rows[i].seed);
    EXPECT_EQ(a.rows[i].product, b.rows[i].product);
    EXPECT_EQ(a.rows[i].realization_index, static_cast<Index>(i % 4));
    EXPECT_GE(a.rows[i].product, 1.0 - 1e-9);
  }
  EXPECT_EQ(a.rows[0].seed, mix_seed(123, 0));
  EXPECT_EQ(a.rows[5].seed, mix_seed(123, 5));
}

TEST(Run, WritesCsvManifestAndStats) {
  auto dir = temp_dir("files");
  auto c = small_config("files");
  c.outputs = dir.string();
  auto m = run_experiment(c);
  ASSERT_TRUE(fs::exists(m.csv));
  std::ifstream in(m.csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kCsvHeader);
  std::size_t n = 0;
  while (std::getline(in, line)) {
    auto f = split_csv_line(line);
    ASSERT_EQ(f.size(), 16u);
    // Values parse back bit-exactly.
    EXPECT_EQ(std::stod(f[10]), m.rows[n].product);
    EXPECT_EQ(std::stoull(f[1]), m.rows[n].seed);
    EXPECT_EQ(f[15], "ok");
    ++n;
  }
  EXPECT_EQ(n, 16u);

  nlohmann::json man;
  std::ifstream(m.manifest) >> man;
  EXPECT_EQ(man["name"], "files");
  EXPECT_EQ(man["rows"], 16);
  EXPECT_EQ(man["config_hash"], format_hash(config_hash(c)));
  EXPECT_EQ(man["outputs"]["csv"], "files.csv");
  EXPECT_EQ(config_from_json(man["config"]).realizations, 4);

  nlohmann::json st;
  std::ifstream(m.stats) >> st;
  ASSERT_EQ(st.size(), 4u);
  EXPECT_EQ(st[0]["ok_rows"], 4);
  EXPECT_TRUE(st[0].contains("deviation"));
  fs::remove_all(dir);
}

TEST(Run, PairingAndScalesFiles) {
  auto dir = temp_dir("modes");
  ExperimentConfig c;
  c.name = "pair";
  c.graph = {GraphKind::Chain, 1, 500, 2, 0};
  c.disorder = DisorderSpec::bernoulli(0.0, 0.3, 5);
  c.mode = AnalysisMode::Pairing;
  c.k_eigs = 10;
  c.outputs = dir.string();
  auto m = run_experiment(c);
  ASSERT_TRUE(m.pairing.has_value());
  EXPECT_TRUE(fs::exists(*m.pairing));
  EXPECT_EQ(m.pairing_rows.size(), 10u);

  c.name = "scales";
  c.mode = AnalysisMode::Scales;
  c.graph.W = 1;
  c.k_eigs.reset();
  c.N_sweep = {1024, 4096};
  auto s = run_experiment(c);
  ASSERT_TRUE(s.scales.has_value());
  ASSERT_EQ(s.scales_rows.size(), 2u);
  const auto& r = s.scales_rows[1];
  ASSERT_TRUE(r.S_or_T.has_value());
  EXPECT_NEAR(*r.S_or_T, std::log(4096.0) / std::log(1.0 / 0.3), 1e-12);
  EXPECT_NEAR(r.u_ratio, 8.0 * s.rows[1].u_max / (*r.S_or_T * *r.S_or_T), 1e-12);
  fs::remove_all(dir);
}

TEST(Run, BadGraphBecomesRowStatus) {
  ExperimentConfig c;
  c.name = "bad";
  c.graph = {GraphKind::Chain, 1, 5, 8, 0};
  RunOptions ro;
  ro.write_files = false;
  auto m = run_experiment(c, ro);
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_FALSE(m.rows[0].ok());
  EXPECT_EQ(m.failed, 1);
}
