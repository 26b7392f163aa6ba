#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "agld/metrics.hpp"
#include "agld/sampler.hpp"
#include "test_util.hpp"

using namespace agld;
using agld::testing::max_ulp;
using agld::testing::random_vector;

namespace {

std::shared_ptr<const QuadraticModel> quad(Index n, Index d, std::uint64_t seed = 3,
                                           double eig_min = 0.5, double eig_max = 4.0) {
  return make_quadratic(QuadraticSpec::generate(n, d, seed, eig_min, eig_max));
}

SamplerConfig config(const std::string& method, double eta, Index batch, Index iterations,
                     std::uint64_t seed = 1) {
  SamplerConfig c;
  c.method = parse_method(method);
  c.eta = eta;
  c.batch = batch;
  c.iterations = iterations;
  c.seed = seed;
  return c;
}

void step(ChainState& s, const GradientModel& m, const SamplerConfig& c) {
  const Updater u{c.method.updater, c.epoch_length, c.periodic_rebuild};
  switch (c.method.kind) {
    case MethodKind::kLMC: lmc_step(s, m, c.eta); break;
    case MethodKind::kSGLD: sgld_step(s, m, c.eta); break;
    case MethodKind::kAGLD: agld_step(s, m, u, c.eta); break;
  }
}

double skewness(const Eigen::Ref<const Vector>& v) {
  const double mean = v.mean();
  const double m2 = (v.array() - mean).square().mean();
  const double m3 = (v.array() - mean).cube().mean();
  return m3 / std::pow(m2, 1.5);
}

}  // namespace

TEST(Method, Names) {
  EXPECT_EQ(name_method(UpdaterKind::kTMU, AccessKind::kRA), "TMU-RA");
  EXPECT_EQ(name_method(UpdaterKind::kPPU, AccessKind::kCA), "PPU-CA");
  EXPECT_EQ(name_method(UpdaterKind::kNone, AccessKind::kRA), "SGLD");
  EXPECT_EQ(name_method(UpdaterKind::kNone, AccessKind::kRR), "SGLD-RR");
  EXPECT_EQ(parse_method("SAGA-LD"), parse_method("PPU-RA"));
  EXPECT_EQ(parse_method("SVRG-LD"), parse_method("PTU-RA"));
  EXPECT_EQ(name_method(parse_method("LMC")), "LMC");
  for (const char* name : {"TMU-RR", "PTU-CA", "SGLD-CA", "SGLD"})
    EXPECT_EQ(name_method(parse_method(name)), name);
  EXPECT_THROW(parse_method("FOO-RA"), InvalidArgument);
  EXPECT_THROW(parse_method("TMU-XX"), InvalidArgument);
  EXPECT_THROW(parse_method("NONE-RA"), InvalidArgument);
}

TEST(Sampler, ZeroStepLeavesIterate) {
  const auto m = quad(10, 3);
  for (const char* name : {"LMC", "SGLD", "TMU-RA", "PTU-CA", "PPU-RR"}) {
    auto c = config(name, 0.1, 2, 1);
    c.x0 = random_vector(3, 4);
    ChainState s = init_chain(c, m, 0);
    s.suppress_noise = true;
    c.eta = 0.0;
    for (int k = 0; k < 5; ++k) step(s, *m, c);
    EXPECT_EQ(max_ulp(s.x, *c.x0), 0u) << name;
    EXPECT_EQ(s.k, 5);
  }
}

TEST(Sampler, NoiselessFreshSnapshotsConvergeLinearly) {
  const auto m = quad(8, 3, 5, 0.5, 4.0);
  const Vector mean = m->target_mean();
  const double lmax = 4.0 * 8.0, lmin = 0.5 * 8.0;
  const double eta = 1.0 / lmax;
  auto c = config("TMU-CA", eta, 8, 1);
  c.epoch_length = 1;
  c.x0 = mean + Vector::Constant(3, 5.0);
  ChainState s = init_chain(c, m, 0);
  s.suppress_noise = true;
  // x_{k+1} - mean = (I - eta N Sigma)(x_k - mean); contraction 1 - eta * lmin
  const double rho = 1.0 - eta * lmin;
  const double e0 = (s.x - mean).norm();
  for (int k = 1; k <= 60; ++k) {
    step(s, *m, c);
    ASSERT_LE((s.x - mean).norm(), std::pow(rho, k) * e0 * (1.0 + 1e-9) + 1e-12);
  }
  EXPECT_LT((s.x - mean).norm(), 1e-2 * e0);
}

TEST(Sampler, NoiselessLangevinIsGradientDescent) {
  const auto m = quad(5, 2);
  auto c = config("LMC", 0.01, 1, 1);
  c.x0 = random_vector(2, 1);
  ChainState s = init_chain(c, m, 0);
  s.suppress_noise = true;
  Vector x = *c.x0;
  for (int k = 0; k < 20; ++k) {
    x = x - 0.01 * full_grad(*m, x);
    step(s, *m, c);
  }
  EXPECT_LT((s.x - x).norm(), 1e-13);
}

TEST(Sampler, RunChainBitwiseReproducible) {
  const auto m = quad(20, 3);
  for (const char* name : {"LMC", "SGLD", "TMU-RA", "PTU-RR", "PPU-CA"}) {
    auto c = config(name, 0.005, 4, 150);
    c.record_every = 1;
    const auto a = run_chain(c, m, 3);
    const auto b = run_chain(c, m, 3);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    EXPECT_TRUE(a.samples.x == b.samples.x) << name;
    EXPECT_EQ(a.grad_evals, b.grad_evals);
  }
}

TEST(Sampler, SeedContract) {
  const auto m = quad(20, 2);
  auto c = config("TMU-RA", 0.005, 2, 50);
  const auto e1 = run_ensemble(c, m, 2, 1);
  const auto e2 = run_ensemble(c, m, 2, 2);
  EXPECT_TRUE(e1[0].final_x == e2[0].final_x);
  EXPECT_TRUE(e1[1].final_x == e2[1].final_x);
  EXPECT_FALSE(e1[0].final_x == e1[1].final_x);
  EXPECT_TRUE(run_chain(c, m, 1).final_x == e1[1].final_x);
  c.seed = 2;
  EXPECT_FALSE(run_chain(c, m, 0).final_x == e1[0].final_x);
}

TEST(Sampler, LmcScalarStationaryVariance) {
  // precision a = 1, eta = 0.1: variance 2 eta / (1 - (1 - eta a)^2) = 2 / 1.9
  const auto m = make_quadratic(QuadraticSpec::generate(1, 1, 2, 1.0, 1.0));
  auto c = config("LMC", 0.1, 1, 1);
  c.x0 = m->target_mean();
  ChainState s = init_chain(c, m, 0);
  const int n = 400000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    lmc_step(s, *m, 0.1);
    const double v = s.x[0] - m->target_mean()[0];
    sum += v;
    sq += v * v;
  }
  const double var = sq / n - (sum / n) * (sum / n);
  EXPECT_NEAR(var, 2.0 / 1.9, 0.03 * 2.0 / 1.9);
  EXPECT_NEAR(lyapunov_stationary_cov(Matrix::Ones(1, 1), 0.1)(0, 0), 2.0 / 1.9, 1e-12);
}

TEST(Sampler, FullBatchCyclicSgldIsLmc) {
  const auto m = quad(6, 2);
  auto lc = config("LMC", 0.01, 1, 1);
  auto sc = config("SGLD-CA", 0.01, 6, 1);
  ChainState a = init_chain(lc, m, 0);
  ChainState b = init_chain(sc, m, 0);
  for (int k = 0; k < 50; ++k) {
    step(a, *m, lc);
    step(b, *m, sc);
    ASSERT_EQ(max_ulp(a.x, b.x), 0u) << k;
  }
  EXPECT_EQ(a.grad_evals, b.grad_evals);
}

TEST(Sampler, FullBatchFreshSnapshotsReproduceLmc) {
  const auto m = quad(6, 2);
  auto lc = config("LMC", 0.01, 1, 1);
  auto tc = config("TMU-CA", 0.01, 6, 1);
  tc.epoch_length = 1;
  ChainState a = init_chain(lc, m, 0);
  ChainState b = init_chain(tc, m, 0);
  for (int k = 0; k < 50; ++k) {
    step(a, *m, lc);
    step(b, *m, tc);
    ASSERT_EQ(max_ulp(a.x, b.x), 0u) << k;
  }
}

TEST(Sampler, ZeroSnapshotsWithoutUpdatesReproduceSgld) {
  const auto m = quad(12, 3);
  auto sc = config("SGLD", 0.01, 3, 40);
  auto zc = sc;
  zc.method = {MethodKind::kAGLD, AccessKind::kRA, UpdaterKind::kNone};
  sc.record_every = zc.record_every = 1;
  const auto a = run_chain(sc, m, 0);
  const auto b = run_chain(zc, m, 0);
  EXPECT_TRUE(a.samples.x == b.samples.x);
  EXPECT_EQ(a.grad_evals, b.grad_evals);
}

TEST(Sampler, SgldGradientUnbiased) {
  const auto m = quad(15, 2);
  auto c = config("SGLD", 0.01, 3, 1);
  c.x0 = random_vector(2, 7, 2.0);
  const Vector truth = full_grad(*m, *c.x0);
  ChainState s = init_chain(c, m, 0);
  const int reps = 20000;
  Vector sum = Vector::Zero(2), sq = Vector::Zero(2);
  for (int r = 0; r < reps; ++r) {
    const auto batch = s.accessor->next_batch();
    Vector g = Vector::Zero(2);
    for (Index i : batch) g += component_grad(*m, i, *c.x0);
    g *= 5.0;
    sum += g;
    sq += g.cwiseProduct(g);
  }
  const Vector mean = sum / reps;
  const Vector sd = ((sq / reps - mean.cwiseProduct(mean)) / reps).cwiseSqrt();
  for (Index j = 0; j < 2; ++j) EXPECT_LE(std::abs(mean[j] - truth[j]), 3.0 * sd[j]);
}

TEST(Sampler, WarmSnapshotsReduceGradientVariance) {
  const auto m = quad(50, 2);
  // warm up a TMU chain for 5 passes, then compare estimator spreads at its iterate
  auto c = config("TMU-RA", 0.002, 5, 1);
  ChainState s = init_chain(c, m, 0);
  while (s.grad_evals < 5 * 50) step(s, *m, c);
  const Vector x = s.x;
  auto spread = [&](const SnapshotSet& snaps) {
    Accessor a(AccessKind::kRA, 50, 5, 99);
    GradientWorkspace ws;
    Vector g(2), sum = Vector::Zero(2), sq = Vector::Zero(2);
    for (int r = 0; r < 5000; ++r) {
      aggregated_gradient(snaps, x, a.next_batch(), g, ws);
      sum += g;
      sq += g.cwiseProduct(g);
    }
    const Vector mean = sum / 5000.0;
    return (sq / 5000.0 - mean.cwiseProduct(mean)).sum();
  };
  const double warm = spread(*s.snapshots);
  const double plain = spread(SnapshotSet::zeros(m));
  EXPECT_LT(warm, 0.5 * plain);
}

TEST(Sampler, RefreshCounting) {
  const auto m = quad(20, 2);
  auto c = config("TMU-RA", 0.001, 4, 0);
  c.epochs = 6.0;
  c.record_epochs = true;
  const auto t = run_chain(c, m, 0);
  // init N, then per D = N iterations: n * N + N
  const Index k = t.iterations;
  EXPECT_EQ(t.grad_evals, 20 + 4 * k + (k / 20) * 20);
  c.count_refresh = false;
  const auto u = run_chain(c, m, 0);
  EXPECT_EQ(u.grad_evals, 4 * u.iterations);
  EXPECT_EQ(u.grad_evals, 6 * 20);
}

TEST(Sampler, PassCountsPerMethod) {
  const auto m = quad(20, 2);
  // evaluations over the iterations of one data pass (N/n = 5 steps)
  auto evals = [&](const char* name, Index iters) {
    auto c = config(name, 0.001, 4, iters);
    const auto t = run_chain(c, m, 0);
    return t.grad_evals;
  };
  EXPECT_EQ(evals("SGLD-CA", 5), 20);
  EXPECT_EQ(evals("PPU-CA", 5) - 20, 20);
  EXPECT_EQ(evals("LMC", 5), 100);
  // PTU, TMU with D = N: one refresh of N every N iterations
  EXPECT_EQ(evals("PTU-CA", 20) - 20, 20 * 4 + 20);
  EXPECT_EQ(evals("TMU-CA", 20) - 20, 20 * 4 + 20);
}

TEST(Sampler, EpochRecordsAlignWithPasses) {
  const auto m = quad(20, 2);
  auto c = config("TMU-RA", 0.001, 4, 0);
  c.epochs = 3.0;
  c.record_epochs = true;
  const auto t = run_chain(c, m, 0);
  ASSERT_EQ(t.epochs.size(), 4);
  for (Index e = 0; e < 4; ++e) {
    EXPECT_GE(t.epochs.grad_evals[static_cast<std::size_t>(e)], e * 20);
    if (e > 0) EXPECT_LT(t.epochs.grad_evals[static_cast<std::size_t>(e)] - 4, e * 20 + 20);
  }
  EXPECT_GE(t.grad_evals, 60);
}

TEST(Sampler, LinearGaussianIteratesHaveNoSkew) {
  const auto m = quad(10, 2);
  for (const char* name : {"LMC", "TMU-CA", "SGLD-CA"}) {
    auto c = config(name, 0.01, 2, 30);
    c.x0 = Vector::Constant(2, 3.0);
    const auto ens = run_ensemble(c, m, 2000);
    Matrix x(2, 2000);
    for (Index i = 0; i < 2000; ++i) x.col(i) = ens[static_cast<std::size_t>(i)].final_x;
    const double sigma = std::sqrt(6.0 / 2000.0);
    for (Index j = 0; j < 2; ++j) EXPECT_LT(std::abs(skewness(x.row(j).transpose())), 3.0 * sigma) << name;
  }
}

TEST(Sampler, DivergenceIsReportedPerChain) {
  const auto m = quad(10, 2, 3, 0.5, 40.0);
  auto c = config("SGLD", 1.0, 2, 500);
  const auto t = run_chain(c, m, 0);
  ASSERT_TRUE(t.failure.has_value());
  EXPECT_GE(t.failed_at, 0);
  EXPECT_LT(t.failed_at, 500);
  const auto ens = run_ensemble(c, m, 3, 2);
  for (const auto& tr : ens) EXPECT_TRUE(tr.failure.has_value());
  auto ok = config("SGLD", 1e-4, 2, 50);
  EXPECT_FALSE(run_chain(ok, m, 0).failure.has_value());
}

TEST(Sampler, ConfigValidation) {
  const auto m = quad(10, 2);
  auto c = config("TMU-RA", 0.01, 2, 10);
  c.eta = 0.0;
  EXPECT_THROW(run_chain(c, m, 0), InvalidArgument);
  c = config("TMU-RA", 0.01, 11, 10);
  EXPECT_THROW(run_chain(c, m, 0), InvalidArgument);
  c = config("TMU-CA", 0.01, 3, 10);
  EXPECT_THROW(run_chain(c, m, 0), InvalidArgument);
  c = config("TMU-RA", 0.01, 2, 0);
  EXPECT_THROW(run_chain(c, m, 0), InvalidArgument);
  c = config("TMU-RA", 0.01, 2, 10);
  c.x0 = Vector::Zero(3);
  EXPECT_THROW(run_chain(c, m, 0), DimensionMismatch);
}

TEST(Sampler, TrajectoryCsv) {
  const auto m = quad(10, 2);
  auto c = config("SGLD", 0.01, 2, 4);
  c.record_every = 2;
  const auto ens = run_ensemble(c, m, 2, 1);
  std::ostringstream out;
  write_trajectory_csv(ens, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "chain,k,grad_evals,x_0,x_1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6);
}
