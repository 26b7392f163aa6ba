#ifndef AGLD_SNAPSHOT_HPP
#define AGLD_SNAPSHOT_HPP

#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "agld/model.hpp"
#include "agld/types.hpp"

namespace agld {

enum class UpdaterKind { kNone, kPPU, kPTU, kTMU };

std::string_view to_string(UpdaterKind kind) noexcept;
std::optional<UpdaterKind> parse_updater_kind(std::string_view name) noexcept;

/// Snapshot-updating strategy.
///
///   PPU  alpha_i <- grad f_i(x_k) for i in S_k
///   PTU  every D iterations all alpha_i <- grad f_i(x_{k+1}), else nothing
///   TMU  PTU's full refresh every D iterations, PPU's partial update otherwise
///   NONE snapshots never change
struct Updater {
  UpdaterKind kind = UpdaterKind::kNone;
  /// D. Zero means "use N".
  Index epoch_length = 0;
  /// Rebuild the cached sum from the entries after every N entry writes.
  bool periodic_rebuild = true;
};

/// How entries are held in memory.
///   kDense    d x N matrix of gradients
///   kCompact  N scalars s_i with alpha_i = s_i z_i (needs a CompactForm)
///   kAnchor   only the anchor x~ and sum_i grad f_i(x~); entries are
///             recomputed on demand (PTU only)
enum class SnapshotStorage { kDense, kCompact, kAnchor };

std::string_view to_string(SnapshotStorage storage) noexcept;

/// Storage picked when none is requested: the anchor form for PTU, the
/// compact form whenever the model declares one, dense otherwise.
SnapshotStorage default_storage(const GradientModel& model, UpdaterKind kind) noexcept;

/// Fresh component gradients at the current iterate for the current batch,
/// produced while forming the aggregated gradient and reused by the updater.
struct BatchGradients {
  Matrix dense;    // d x n, column j belongs to batch position j
  Vector scalars;  // n, compact storage only
  Index count = 0;
};

struct GradientWorkspace {
  Vector grad;
  Vector alpha;
  Vector correction;
  BatchGradients fresh;

  void reserve(Index dim, Index batch);
};

/// The snapshot set: N stored gradient records, their running sum and the
/// iteration at which each record was last evaluated.
class SnapshotSet {
 public:
  /// alpha_i = grad f_i(x0) for every i.
  static SnapshotSet init(ModelPtr model, ConstVectorRef x0,
                          std::optional<SnapshotStorage> storage = std::nullopt,
                          UpdaterKind for_updater = UpdaterKind::kPPU);
  /// Every alpha_i = 0 (dense). Combined with the NONE updater this turns
  /// the aggregated gradient into the plain minibatch estimator.
  static SnapshotSet zeros(ModelPtr model);

  Index size() const noexcept { return static_cast<Index>(last_update_.size()); }
  Index dim() const noexcept { return sum_.size(); }
  SnapshotStorage storage() const noexcept { return storage_; }
  const GradientModel& model() const noexcept { return *model_; }
  const ModelPtr& model_ptr() const noexcept { return model_; }

  Vector entry(Index i) const;
  void entry_into(Index i, VectorRef out) const;
  const Vector& running_sum() const noexcept { return sum_; }
  std::span<const Index> last_update() const noexcept { return last_update_; }
  Index max_staleness(Index current_iteration) const noexcept;
  /// Anchor iterate (kAnchor storage only).
  const Vector& anchor() const noexcept { return anchor_; }
  /// Compact scalars (kCompact storage only).
  const Vector& scalars() const noexcept { return scalars_; }

  /// Recomputes the sum from the entries, replaces the cache, and returns
  /// |cached - fresh| / |fresh| (absolute when fresh is zero).
  double rebuild_running_sum();
  /// Test hook: adds `delta` to the cached sum without touching entries.
  void perturb_running_sum(ConstVectorRef delta);

  /// Every alpha_i <- grad f_i(x), stamped with `iteration`.
  void refresh_all(ConstVectorRef x, Index iteration);
  /// Partial update of the batch entries from `fresh` (or from x when
  /// `fresh` is null). Returns the number of gradient evaluations made.
  Index update_entries(std::span<const Index> batch, ConstVectorRef x,
                       const BatchGradients* fresh, Index iteration,
                       bool periodic_rebuild);

  void save(std::ostream& out) const;
  static SnapshotSet load(std::istream& in, ModelPtr model);

 private:
  SnapshotSet(ModelPtr model, SnapshotStorage storage);
  void recompute_sum();

  ModelPtr model_;
  SnapshotStorage storage_;
  Matrix dense_;
  Vector scalars_;
  Vector anchor_;
  Vector sum_;
  Vector scratch_;
  std::vector<Index> last_update_;
  Index writes_since_rebuild_ = 0;
};

/// g = (N/n) sum_{i in S}(grad f_i(x) - alpha_i) + sum_i alpha_i [+ prior(x)].
/// Costs |S| component gradient evaluations (2|S| in anchor storage). The
/// fresh gradients are left in `ws.fresh` for the updater.
void aggregated_gradient(const SnapshotSet& snapshots, ConstVectorRef x,
                         std::span<const Index> batch, VectorRef out,
                         GradientWorkspace& ws);
/// Checked convenience form.
Vector aggregated_gradient(const SnapshotSet& snapshots, const Vector& x,
                           std::span<const Index> batch);

/// Applies the strategy after iteration k (x_k -> x_{k+1}). Returns the
/// number of component gradient evaluations it performed.
Index apply_update(const Updater& updater, SnapshotSet& snapshots,
                   ConstVectorRef x_k, ConstVectorRef x_k1, Index k,
                   std::span<const Index> batch,
                   const BatchGradients* fresh = nullptr);

/// Sliding window of the most recent iterates, indexed by iteration.
class IterateHistory {
 public:
  IterateHistory(Index dim, Index capacity);
  void push(ConstVectorRef x);
  Index latest() const noexcept { return count_ - 1; }
  Index oldest() const noexcept { return count_ - stored(); }
  Index stored() const noexcept { return std::min(count_, capacity_); }
  bool contains(Index j) const noexcept { return j >= oldest() && j <= latest(); }
  ConstVectorRef at(Index j) const;

 private:
  Matrix ring_;
  Index capacity_;
  Index count_ = 0;
};

/// Which iterates count as fresh enough at iteration k.
enum class StalenessWindow {
  kInclusive,  // j in [k - D, k]
  kExclusive,  // j in [k - D + 1, k]
};

/// True iff every alpha_i equals grad f_i(x_j) bitwise for some j in the
/// window ending at history.latest(). Meaningful when the snapshot holds
/// full per-component gradients (see fold_prior).
bool verify_staleness(const SnapshotSet& snapshots, const IterateHistory& history,
                      Index max_lag, StalenessWindow window = StalenessWindow::kInclusive);

}  // namespace agld

#endif  // AGLD_SNAPSHOT_HPP
