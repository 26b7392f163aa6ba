#ifndef AGLD_EXPERIMENT_HPP
#define AGLD_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agld/types.hpp"

namespace agld {

/// Everything a run depends on. Unset optionals are filled per experiment by
/// resolve(); the resolved form is what the manifest stores.
struct ExperimentConfig {
  std::string experiment;            // convex-sim, gmm-sim, ridge, logistic, iosim
  std::vector<std::string> methods;  // empty: the experiment's default grid
  std::optional<double> eta;         // default eta_scale / L
  double eta_scale = 0.1;
  std::optional<Index> batch;
  Index epoch_length = 0;  // D, 0 = N
  std::optional<double> epochs;
  std::optional<Index> chains;
  std::uint64_t seed = 1;
  std::string out_dir = "agld-out";

  // model / data
  std::optional<Index> n_components;  // N (synthetic data: rows before the split)
  std::optional<Index> dim;
  std::string data;  // dataset path for ridge / logistic
  std::string label_column = "label";
  double lambda = 1.0;
  bool scale_by_n = false;
  double eig_min = 0.5;
  double eig_max = 40.0;
  double noise_sd = 0.5;
  double density = 0.2;
  double train_ratio = 0.8;

  // sampler
  std::vector<double> x0;  // empty: origin; one value: broadcast
  double init_sd = 0.0;
  bool count_refresh = true;
  Index record_every = 0;  // 0: chosen per experiment
  double burn_in = 0.5;    // fraction of the pass budget

  // gmm-sim
  Index n_proj = 50;
  Index reference_samples = 1000000;
  bool symmetrize = true;
  std::vector<Index> plane{0, 1};

  // iosim / simulated time
  Index records_per_page = 10;
  Index cache_pages = 50;
  Index passes = 5;
  double fault_cost = 1e-3;
  double grad_cost = 1e-6;

  Index trajectory_chains = 0;  // chains dumped to <method>_traj.csv
};

ExperimentConfig config_from_json(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);

/// Fills experiment defaults and checks the result. The returned config
/// still leaves eta unset when it depends on the model.
ExperimentConfig resolve(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::string manifest_path;
  std::vector<std::string> files;  // relative to out_dir
  std::string manifest_json;
};

/// Runs the experiment, writes its CSVs and manifest.json into out_dir.
/// `threads` (0: default) caps chain parallelism and is not recorded.
ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned threads = 0);

struct ReplayResult {
  bool match = false;
  std::string out_dir;
  std::vector<std::string> mismatched;
};

/// Reruns the config stored in a manifest into `out_dir` (default: a
/// "replay" directory next to the manifest) and compares file hashes.
ReplayResult replay_manifest(const std::string& manifest_path, const std::string& out_dir = "",
                             unsigned threads = 0);

/// Deterministic reference draws from a 1-D or 2-D target known up to a
/// constant, by inverse-CDF sampling on an adaptive grid. Columns are draws.
class GradientModel;
Matrix grid_reference_samples(const GradientModel& model, Index count, std::uint64_t seed);

}  // namespace agld

#endif  // AGLD_EXPERIMENT_HPP
