#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "agld/experiment.hpp"
#include "agld/metrics.hpp"
#include "agld/model.hpp"

using namespace agld;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
  const fs::path p = fs::path(AGLD_TEST_TMP) / "experiment" / name;
  fs::remove_all(p);
  return p.string();
}

std::vector<MetricRow> read_rows(const std::string& path) {
  std::ifstream in(path);
  EXPECT_TRUE(in.good()) << path;
  return read_metric_csv(in);
}

ExperimentConfig small(const std::string& experiment, const std::string& dir) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.out_dir = tmp_dir(dir);
  return c;
}

}  // namespace

TEST(Experiment, ResolveDefaults) {
  ExperimentConfig c;
  c.experiment = "convex-sim";
  const auto r = resolve(c);
  EXPECT_EQ(*r.n_components, 500);
  EXPECT_EQ(*r.dim, 10);
  EXPECT_EQ(r.methods, (std::vector<std::string>{"TMU-RA", "PPU-RA", "PTU-RA", "SGLD", "LMC"}));
  c.methods = {"SAGA-LD", "PPU-RA"};
  EXPECT_THROW(resolve(c), InvalidArgument);
  c.methods = {"NOPE-RA"};
  EXPECT_THROW(resolve(c), InvalidArgument);
  c.methods = {};
  c.experiment = "bogus";
  EXPECT_THROW(resolve(c), InvalidArgument);
}

TEST(Experiment, ConfigJsonRoundTrip) {
  ExperimentConfig c;
  c.experiment = "ridge";
  c.eta = 0.1 + 0.2;
  c.x0 = {1.5};
  c.methods = {"TMU-CA"};
  const auto r = resolve(c);
  const std::string text = config_to_json(r);
  EXPECT_EQ(config_to_json(config_from_json(text)), text);
  EXPECT_EQ(*config_from_json(text).eta, 0.1 + 0.2);
  EXPECT_THROW(config_from_json(R"({"experiment":"ridge","etaa":1})"), InvalidArgument);
  EXPECT_THROW(config_from_json("{not json"), ParseError);
  EXPECT_THROW(config_from_json(R"({"experiment":"ridge","batch":"ten"})"), Error);
}

TEST(Experiment, ConvexSimSchema) {
  auto c = small("convex-sim", "convex");
  c.n_components = 20;
  c.dim = 2;
  c.chains = 16;
  c.epochs = 4.0;
  c.batch = 2;
  const auto res = run_experiment(c, 2);
  const auto r = resolve(c);
  std::vector<double> grid;
  for (const auto& name : r.methods) {
    const auto rows = read_rows(c.out_dir + "/" + name + ".csv");
    std::vector<double> epochs;
    for (const auto& row : rows) {
      EXPECT_EQ(row.metric, "w2");
      EXPECT_EQ(row.method, name);
      EXPECT_GE(row.value, 0.0);
      epochs.push_back(row.epoch);
    }
    EXPECT_EQ(epochs.size(), 5u) << name;
    if (grid.empty()) grid = epochs;
    EXPECT_EQ(epochs, grid) << name;
  }
  EXPECT_TRUE(fs::exists(res.manifest_path));
  const auto manifest = nlohmann::json::parse(res.manifest_json);
  EXPECT_EQ(manifest["files"].size(), r.methods.size());
  EXPECT_GT(manifest["eta"].get<double>(), 0.0);
}

TEST(Experiment, MethodColumns) {
  auto c = small("convex-sim", "columns");
  c.n_components = 10;
  c.dim = 2;
  c.chains = 4;
  c.epochs = 2.0;
  c.methods = {"LMC", "SGLD", "TMU-CA"};
  run_experiment(c, 1);
  const auto lmc = read_rows(c.out_dir + "/LMC.csv");
  EXPECT_EQ(lmc[0].access, "-");
  EXPECT_EQ(lmc[0].updater, "NONE");
  const auto sgld = read_rows(c.out_dir + "/SGLD.csv");
  EXPECT_EQ(sgld[0].access, "RA");
  EXPECT_EQ(sgld[0].updater, "NONE");
  const auto tmu = read_rows(c.out_dir + "/TMU-CA.csv");
  EXPECT_EQ(tmu[0].access, "CA");
  EXPECT_EQ(tmu[0].updater, "TMU");
}

TEST(Experiment, ReplayReproducesFiles) {
  auto c = small("convex-sim", "replay");
  c.n_components = 20;
  c.dim = 2;
  c.chains = 8;
  c.epochs = 3.0;
  c.methods = {"TMU-RA", "SGLD"};
  c.trajectory_chains = 2;
  const auto res = run_experiment(c, 3);
  const auto rep = replay_manifest(res.manifest_path, "", 1);
  EXPECT_TRUE(rep.match);
  EXPECT_TRUE(rep.mismatched.empty());
  EXPECT_TRUE(fs::exists(fs::path(c.out_dir) / "replay" / "TMU-RA_traj.csv"));

  // a doctored hash is reported
  auto manifest = nlohmann::json::parse(res.manifest_json);
  manifest["files"][0]["fnv1a64"] = "0000000000000000";
  const std::string doctored = c.out_dir + "/doctored.json";
  std::ofstream(doctored) << manifest.dump();
  const auto bad = replay_manifest(doctored, c.out_dir + "/replay2", 2);
  EXPECT_FALSE(bad.match);
  ASSERT_EQ(bad.mismatched.size(), 1u);
  EXPECT_THROW(replay_manifest(c.out_dir + "/missing.json"), IoError);
}

TEST(Experiment, GmmSimWritesClouds) {
  auto c = small("gmm-sim", "gmm");
  c.n_components = 20;
  c.dim = 2;
  c.chains = 4;
  c.epochs = 6.0;
  c.reference_samples = 20000;
  c.methods = {"TMU-RA", "SGLD"};
  run_experiment(c, 2);
  for (const char* name : {"TMU-RA", "SGLD"}) {
    const auto rows = read_rows(c.out_dir + "/" + std::string(name) + ".csv");
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows.back().metric, "sliced_w2");
    EXPECT_TRUE(fs::exists(c.out_dir + "/" + std::string(name) + "_cloud.csv"));
  }
  EXPECT_TRUE(fs::exists(c.out_dir + "/anchors.csv"));
}

TEST(Experiment, RidgeReportsOracle) {
  auto c = small("ridge", "ridge");
  c.n_components = 500;
  c.dim = 5;
  c.chains = 2;
  c.epochs = 5.0;
  c.methods = {"TMU-RA"};
  run_experiment(c, 2);
  const auto rows = read_rows(c.out_dir + "/TMU-RA.csv");
  std::set<std::string> metrics;
  for (const auto& r : rows) metrics.insert(r.metric);
  EXPECT_TRUE(metrics.count("test_mse"));
  EXPECT_TRUE(metrics.count("oracle_test_mse"));
}

TEST(Experiment, LogisticReportsTime) {
  auto c = small("logistic", "logistic");
  c.n_components = 400;
  c.dim = 8;
  c.chains = 2;
  c.epochs = 3.0;
  c.methods = {"TMU-CA", "SGLD"};
  run_experiment(c, 2);
  const auto rows = read_rows(c.out_dir + "/TMU-CA.csv");
  std::set<std::string> metrics;
  for (const auto& r : rows) {
    metrics.insert(r.metric);
    if (r.metric == "test_loglik") EXPECT_LT(r.value, 0.0);
  }
  EXPECT_TRUE(metrics.count("test_loglik"));
  EXPECT_TRUE(metrics.count("sim_time"));
}

TEST(Experiment, IoSimTable) {
  auto c = small("iosim", "iosim");
  c.n_components = 200;
  c.passes = 3;
  run_experiment(c, 1);
  std::ifstream in(c.out_dir + "/iosim.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "strategy,pass,faults,hit_ratio");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 9);
}

TEST(Experiment, DatasetFileInput) {
  const std::string dir = tmp_dir("datafile");
  fs::create_directories(dir);
  const auto syn = synth_linear(200, 3, 0.3, 4);
  {
    std::ofstream f(dir + "/data.csv");
    write_csv(syn.data, f);
  }
  ExperimentConfig c;
  c.experiment = "ridge";
  c.data = dir + "/data.csv";
  c.out_dir = dir + "/out";
  c.chains = 1;
  c.epochs = 2.0;
  c.methods = {"SGLD"};
  run_experiment(c, 1);
  EXPECT_TRUE(fs::exists(dir + "/out/SGLD.csv"));
  c.data = dir + "/absent.csv";
  EXPECT_THROW(run_experiment(c, 1), IoError);
}

TEST(Experiment, GridReferenceMatchesGaussianTarget) {
  const auto m = make_quadratic(QuadraticSpec::generate(3, 2, 8, 0.5, 4.0));
  const Matrix draws = grid_reference_samples(*m, 200000, 5);
  const auto g = empirical_moments(draws);
  const Matrix cov = m->target_covariance();
  const Vector sd = cov.diagonal().cwiseSqrt();
  for (Index j = 0; j < 2; ++j) EXPECT_NEAR(g.mean[j], m->target_mean()[j], 5.0 * sd[j] / std::sqrt(2e5));
  EXPECT_LT((g.cov - cov).norm(), 0.02 * cov.norm());
  EXPECT_TRUE(draws == grid_reference_samples(*m, 200000, 5));
  EXPECT_THROW(grid_reference_samples(*make_quadratic(QuadraticSpec::generate(3, 3, 8)), 10, 1),
               InvalidArgument);
}

TEST(Experiment, GridReferenceOneDimensionalMixture) {
  GmmSpec spec;
  spec.anchors = Matrix::Constant(1, 1, 3.0);
  const auto m = make_gmm(spec);
  const Matrix draws = grid_reference_samples(*m, 100000, 2);
  // equal mixture of N(3, 1) and N(-3, 1): mean 0, variance 10
  const auto g = empirical_moments(draws);
  EXPECT_NEAR(g.mean[0], 0.0, 5.0 * std::sqrt(10.0 / 1e5));
  EXPECT_NEAR(g.cov(0, 0), 10.0, 0.15);
  Index positive = 0;
  for (Index i = 0; i < draws.cols(); ++i) positive += draws(0, i) > 0.0;
  EXPECT_NEAR(static_cast<double>(positive) / 1e5, 0.5, 0.01);
}
