// agld: command-line driver over the C interface.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agld/agld.h"

using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMismatch = 3;

struct Flags {
  std::string config_path;
  std::optional<double> eta, eta_scale, epochs, lambda, burn_in, noise_sd, density, init_sd,
      fault_cost, grad_cost;
  std::optional<int64_t> batch, chains, D, n, d, record_every, n_proj, reference_samples,
      records_per_page, cache_pages, passes, trajectory_chains;
  std::optional<uint64_t> seed;
  std::vector<std::string> methods;
  std::optional<std::string> out, data, label_column;
  std::vector<double> x0;
  std::vector<int64_t> plane;
  bool scale_by_n = false;
  bool no_count_refresh = false;
  bool no_symmetrize = false;
  bool print_config = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON config file (flags override it)");
  sub->add_option("--eta", f.eta, "stepsize (default: eta-scale / L)");
  sub->add_option("--eta-scale", f.eta_scale, "c in the default stepsize c / L");
  sub->add_option("--batch", f.batch, "batch size n");
  sub->add_option("--epochs", f.epochs, "data passes per chain");
  sub->add_option("--chains", f.chains, "independent chains per method");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--method", f.methods, "method name (repeatable)");
  sub->add_option("--D", f.D, "snapshot epoch length (0 = N)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--data", f.data, "dataset path (libsvm or .csv, gzip accepted)");
  sub->add_option("--label-column", f.label_column, "CSV label column");
  sub->add_option("--N", f.n, "number of components / synthetic rows");
  sub->add_option("--d", f.d, "dimension");
  sub->add_option("--lambda", f.lambda, "prior / noise variance");
  sub->add_option("--x0", f.x0, "initial point (one value broadcasts)");
  sub->add_option("--init-sd", f.init_sd, "per-chain Gaussian jitter of x0");
  sub->add_option("--burn-in", f.burn_in, "discarded fraction of the pass budget");
  sub->add_option("--record-every", f.record_every, "sample stride (0 = automatic)");
  sub->add_option("--trajectory-chains", f.trajectory_chains, "chains dumped to <method>_traj.csv");
  sub->add_flag("--no-count-refresh", f.no_count_refresh,
                "leave snapshot initialization and refreshes out of the pass count");
  sub->add_flag("--print-config", f.print_config, "print the resolved config and exit");
}

json build_config(const std::string& experiment, const Flags& f) {
  json cfg = json::object();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw std::runtime_error("cannot open config " + f.config_path);
    cfg = json::parse(in);
    if (!cfg.is_object()) throw std::runtime_error("config must be a JSON object");
    if (cfg.contains("experiment") && cfg["experiment"] != experiment)
      throw std::runtime_error("config is for experiment " + cfg["experiment"].get<std::string>());
  }
  cfg["experiment"] = experiment;
  auto set = [&](const char* key, const auto& v) {
    if (v) cfg[key] = *v;
  };
  set("eta", f.eta);
  set("eta_scale", f.eta_scale);
  set("batch", f.batch);
  set("epochs", f.epochs);
  set("chains", f.chains);
  set("seed", f.seed);
  set("D", f.D);
  set("out", f.out);
  set("data", f.data);
  set("label_column", f.label_column);
  set("N", f.n);
  set("d", f.d);
  set("lambda", f.lambda);
  set("init_sd", f.init_sd);
  set("burn_in", f.burn_in);
  set("record_every", f.record_every);
  set("trajectory_chains", f.trajectory_chains);
  set("noise_sd", f.noise_sd);
  set("density", f.density);
  set("n_proj", f.n_proj);
  set("reference_samples", f.reference_samples);
  set("records_per_page", f.records_per_page);
  set("cache_pages", f.cache_pages);
  set("passes", f.passes);
  set("fault_cost", f.fault_cost);
  set("grad_cost", f.grad_cost);
  if (!f.methods.empty()) cfg["methods"] = f.methods;
  if (!f.x0.empty()) cfg["x0"] = f.x0;
  if (!f.plane.empty()) cfg["plane"] = f.plane;
  if (f.scale_by_n) cfg["scale_by_n"] = true;
  if (f.no_count_refresh) cfg["count_refresh"] = false;
  if (f.no_symmetrize) cfg["symmetrize"] = false;
  return cfg;
}

int report_failure(agld_status st) {
  std::fprintf(stderr, "agld: %s: %s\n", agld_status_name(st), agld_last_error());
  return st == AGLD_ERR_INVALID_ARGUMENT || st == AGLD_ERR_PARSE ? kExitUsage : kExitError;
}

int run(const std::string& experiment, const Flags& f, unsigned threads) {
  json cfg;
  try {
    cfg = build_config(experiment, f);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "agld: %s\n", e.what());
    return kExitUsage;
  }
  const std::string text = cfg.dump();
  char* out = nullptr;
  if (f.print_config) {
    const agld_status st = agld_config_resolve(text.c_str(), &out);
    if (st != AGLD_OK) return report_failure(st);
    std::printf("%s\n", out);
    agld_string_free(out);
    return 0;
  }
  const agld_status st = agld_experiment_run(text.c_str(), threads, &out);
  if (st != AGLD_OK) return report_failure(st);
  const json manifest = json::parse(out);
  agld_string_free(out);
  const std::string dir = manifest["config"]["out"].get<std::string>();
  for (const auto& file : manifest["files"])
    std::printf("%s/%s\n", dir.c_str(), file["name"].get<std::string>().c_str());
  std::printf("%s/manifest.json\n", dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregated-gradient Langevin sampling experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(agld_version()));
  unsigned threads = 0;
  app.add_option("--threads", threads, "chain worker threads (default: AGLD_THREADS or all cores)");

  Flags f;
  const char* names[] = {"convex-sim", "gmm-sim", "ridge", "logistic", "iosim"};
  const char* help[] = {
      "quadratic target, W2 of the chain ensemble to the Gaussian target per pass",
      "symmetric Gaussian-mixture target, sliced W2 of post-burn-in clouds",
      "Bayesian ridge regression, posterior-predictive test MSE per pass",
      "Bayesian logistic regression, test log-likelihood and simulated time per pass",
      "LRU page-cache replay of access strategies",
  };
  std::vector<CLI::App*> subs;
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    add_common(sub, f);
    subs.push_back(sub);
  }
  subs[1]->add_flag("--scale-by-n", f.scale_by_n, "divide every component by N");
  subs[1]->add_option("--n-proj", f.n_proj, "sliced-W2 projections");
  subs[1]->add_option("--reference-samples", f.reference_samples, "reference draws (d <= 2)");
  subs[1]->add_option("--plane", f.plane, "projected coordinates (default 0 1)");
  subs[1]->add_flag("--no-symmetrize", f.no_symmetrize, "do not reflect clouds through the origin");
  subs[2]->add_option("--noise-sd", f.noise_sd, "synthetic label noise");
  subs[3]->add_option("--density", f.density, "synthetic feature density");
  for (int i : {3, 4}) {
    subs[static_cast<std::size_t>(i)]->add_option("--records-per-page", f.records_per_page, "records per page P");
    subs[static_cast<std::size_t>(i)]->add_option("--cache-pages", f.cache_pages, "cache capacity C in pages");
    subs[static_cast<std::size_t>(i)]->add_option("--fault-cost", f.fault_cost, "cost per page fault");
  }
  subs[3]->add_option("--grad-cost", f.grad_cost, "cost per component gradient");
  subs[4]->add_option("--passes", f.passes, "data passes to simulate");

  std::string manifest, replay_out;
  CLI::App* replay = app.add_subcommand("replay", "rerun a manifest and verify every file hash");
  replay->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  replay->add_option("--out", replay_out, "output directory (default: replay/ next to the manifest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  if (replay->parsed()) {
    int match = 0;
    char* report = nullptr;
    const agld_status st = agld_replay_manifest(manifest.c_str(),
                                                replay_out.empty() ? nullptr : replay_out.c_str(),
                                                threads, &match, &report);
    if (st != AGLD_OK) return report_failure(st);
    std::printf("%s\n", report);
    agld_string_free(report);
    return match ? 0 : kExitMismatch;
  }
  for (int i = 0; i < 5; ++i)
    if (subs[static_cast<std::size_t>(i)]->parsed()) return run(names[i], f, threads);
  return kExitUsage;
}
