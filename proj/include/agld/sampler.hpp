#ifndef AGLD_SAMPLER_HPP
#define AGLD_SAMPLER_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agld/access.hpp"
#include "agld/model.hpp"
#include "agld/random.hpp"
#include "agld/snapshot.hpp"
#include "agld/types.hpp"

namespace agld {

enum class MethodKind { kLMC, kSGLD, kAGLD };

struct Method {
  MethodKind kind = MethodKind::kAGLD;
  AccessKind access = AccessKind::kRA;
  UpdaterKind updater = UpdaterKind::kTMU;

  friend bool operator==(const Method&, const Method&) = default;
};

/// "TMU-RA", "PPU-CA", ...; (NONE, RA) is "SGLD", (NONE, RR) is "SGLD-RR".
std::string name_method(UpdaterKind updater, AccessKind access);
std::string name_method(const Method& method);
/// Accepts the canonical names plus "SAGA-LD" (PPU-RA), "SVRG-LD" (PTU-RA)
/// and "LMC". Throws InvalidArgument on anything else.
Method parse_method(std::string_view name);

struct SamplerConfig {
  Method method;
  double eta = 1e-3;
  Index batch = 1;
  /// D; 0 means N.
  Index epoch_length = 0;
  /// Stop after K iterations (0: no iteration limit).
  Index iterations = 0;
  /// Stop once grad_evals >= epochs * N (0: no pass limit).
  double epochs = 0.0;
  std::uint64_t seed = 0;
  /// Keep every record_every-th iterate with k >= burn_in (0: none).
  Index record_every = 0;
  Index burn_in = 0;
  /// Keep the iterate at every data-pass boundary.
  bool record_epochs = false;
  /// Count snapshot initialization and full refreshes in grad_evals.
  bool count_refresh = true;
  bool periodic_rebuild = true;
  std::optional<SnapshotStorage> storage;
  /// Defaults to the origin.
  std::optional<Vector> x0;
  /// Adds init_sd * N(0, I) (chain-specific stream) to x0.
  double init_sd = 0.0;
};

void validate(const SamplerConfig& config, const GradientModel& model);

struct ChainState {
  Vector x;
  Index k = 0;
  Index grad_evals = 0;
  std::optional<Accessor> accessor;
  std::optional<SnapshotSet> snapshots;
  RandomStream noise;
  /// Test hook: skips the Gaussian term of the update.
  bool suppress_noise = false;
  bool count_refresh = true;

  GradientWorkspace ws;
  Vector g;
  Vector xi;
  Vector x_next;
  Vector scratch;
};

/// State after sampler initialization for chain `chain`: noise and
/// access streams derived from (seed, chain), snapshots set at x0.
ChainState init_chain(const SamplerConfig& config, const ModelPtr& model, Index chain);

void lmc_step(ChainState& state, const GradientModel& model, double eta);
void sgld_step(ChainState& state, const GradientModel& model, double eta);
void agld_step(ChainState& state, const GradientModel& model, const Updater& updater,
               double eta);

/// Recorded iterates. Column j of `x` belongs to iteration k[j].
struct Records {
  std::vector<Index> k;
  std::vector<Index> grad_evals;
  Matrix x;

  Index size() const noexcept { return static_cast<Index>(k.size()); }
};

struct Trajectory {
  Index chain = 0;
  Records samples;
  /// Entry e is the first iterate with grad_evals >= e * N.
  Records epochs;
  Vector final_x;
  Index iterations = 0;
  Index grad_evals = 0;
  /// Set when the chain diverged; the records stop there.
  std::optional<std::string> failure;
  Index failed_at = -1;
};

Trajectory run_chain(const SamplerConfig& config, const ModelPtr& model, Index chain = 0);

/// Chains run concurrently (at most `threads`, 0: AGLD_THREADS or the
/// hardware count) and are returned in chain order. A diverging chain is
/// reported in its Trajectory and does not stop the others.
std::vector<Trajectory> run_ensemble(const SamplerConfig& config, const ModelPtr& model,
                                     Index chains, unsigned threads = 0);

unsigned default_threads();

/// CSV `chain,k,grad_evals,x_0,...,x_{d-1}` from the sample records.
void write_trajectory_csv(const std::vector<Trajectory>& chains, std::ostream& out);

}  // namespace agld

#endif  // AGLD_SAMPLER_HPP
