#include "agld/snapshot.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace agld {

std::string_view to_string(UpdaterKind kind) noexcept {
  switch (kind) {
    case UpdaterKind::kNone: return "NONE";
    case UpdaterKind::kPPU: return "PPU";
    case UpdaterKind::kPTU: return "PTU";
    case UpdaterKind::kTMU: return "TMU";
  }
  return "?";
}

std::optional<UpdaterKind> parse_updater_kind(std::string_view name) noexcept {
  if (name == "NONE") return UpdaterKind::kNone;
  if (name == "PPU") return UpdaterKind::kPPU;
  if (name == "PTU") return UpdaterKind::kPTU;
  if (name == "TMU") return UpdaterKind::kTMU;
  return std::nullopt;
}

std::string_view to_string(SnapshotStorage storage) noexcept {
  switch (storage) {
    case SnapshotStorage::kDense: return "dense";
    case SnapshotStorage::kCompact: return "compact";
    case SnapshotStorage::kAnchor: return "anchor";
  }
  return "?";
}

SnapshotStorage default_storage(const GradientModel& model, UpdaterKind kind) noexcept {
  if (kind == UpdaterKind::kPTU) return SnapshotStorage::kAnchor;
  if (model.compact() != nullptr) return SnapshotStorage::kCompact;
  return SnapshotStorage::kDense;
}

void GradientWorkspace::reserve(Index dim, Index batch) {
  if (grad.size() != dim) grad.resize(dim);
  if (alpha.size() != dim) alpha.resize(dim);
  if (correction.size() != dim) correction.resize(dim);
  if (fresh.dense.rows() != dim || fresh.dense.cols() < batch) fresh.dense.resize(dim, batch);
  if (fresh.scalars.size() < batch) fresh.scalars.resize(batch);
}

// ------------------------------------------------------------ SnapshotSet

SnapshotSet::SnapshotSet(ModelPtr model, SnapshotStorage storage)
    : model_(std::move(model)), storage_(storage) {
  if (!model_) throw InvalidArgument("SnapshotSet: null model");
  const Index n = model_->size();
  const Index d = model_->dim();
  if (storage_ == SnapshotStorage::kCompact && model_->compact() == nullptr)
    throw InvalidArgument("SnapshotSet: compact storage needs a model with a compact form");
  switch (storage_) {
    case SnapshotStorage::kDense: dense_.setZero(d, n); break;
    case SnapshotStorage::kCompact: scalars_.setZero(n); break;
    case SnapshotStorage::kAnchor: anchor_.setZero(d); break;
  }
  sum_.setZero(d);
  scratch_.setZero(d);
  last_update_.assign(static_cast<std::size_t>(n), 0);
}

SnapshotSet SnapshotSet::init(ModelPtr model, ConstVectorRef x0,
                              std::optional<SnapshotStorage> storage,
                              UpdaterKind for_updater) {
  if (!model) throw InvalidArgument("init_snapshots: null model");
  check_dim("init_snapshots", model->dim(), x0.size());
  const SnapshotStorage chosen = storage.value_or(default_storage(*model, for_updater));
  SnapshotSet s(std::move(model), chosen);
  s.refresh_all(x0, 0);
  return s;
}

SnapshotSet SnapshotSet::zeros(ModelPtr model) {
  return SnapshotSet(std::move(model), SnapshotStorage::kDense);
}

void SnapshotSet::entry_into(Index i, VectorRef out) const {
  switch (storage_) {
    case SnapshotStorage::kDense:
      out = dense_.col(i);
      return;
    case SnapshotStorage::kCompact: {
      out.setZero();
      const SparseRow row = model_->compact()->data_row(i);
      const double s = scalars_[i];
      for (std::size_t k = 0; k < row.indices.size(); ++k) out[row.indices[k]] = s * row.values[k];
      return;
    }
    case SnapshotStorage::kAnchor:
      model_->component_grad(i, anchor_, out);
      return;
  }
}

Vector SnapshotSet::entry(Index i) const {
  if (i < 0 || i >= size()) throw OutOfRange("snapshot entry index out of range");
  Vector out(dim());
  entry_into(i, out);
  return out;
}

Index SnapshotSet::max_staleness(Index current_iteration) const noexcept {
  Index oldest = current_iteration;
  for (Index j : last_update_) oldest = std::min(oldest, j);
  return current_iteration - oldest;
}

void SnapshotSet::recompute_sum() {
  sum_.setZero();
  switch (storage_) {
    case SnapshotStorage::kDense:
      for (Index i = 0; i < size(); ++i) sum_ += dense_.col(i);
      break;
    case SnapshotStorage::kCompact: {
      const CompactForm& cf = *model_->compact();
      for (Index i = 0; i < size(); ++i) cf.data_row(i).axpy(scalars_[i], sum_);
      break;
    }
    case SnapshotStorage::kAnchor:
      for (Index i = 0; i < size(); ++i) {
        model_->component_grad(i, anchor_, scratch_);
        sum_ += scratch_;
      }
      break;
  }
  writes_since_rebuild_ = 0;
}

double SnapshotSet::rebuild_running_sum() {
  const Vector cached = sum_;
  recompute_sum();
  const double fresh_norm = sum_.norm();
  const double diff = (cached - sum_).norm();
  return fresh_norm > 0.0 ? diff / fresh_norm : diff;
}

void SnapshotSet::perturb_running_sum(ConstVectorRef delta) {
  check_dim("perturb_running_sum", dim(), delta.size());
  sum_ += delta;
}

void SnapshotSet::refresh_all(ConstVectorRef x, Index iteration) {
  check_dim("refresh_all", dim(), x.size());
  switch (storage_) {
    case SnapshotStorage::kDense:
      for (Index i = 0; i < size(); ++i) model_->component_grad(i, x, dense_.col(i));
      break;
    case SnapshotStorage::kCompact: {
      const CompactForm& cf = *model_->compact();
      for (Index i = 0; i < size(); ++i) scalars_[i] = cf.scalar(i, x);
      break;
    }
    case SnapshotStorage::kAnchor:
      anchor_ = x;
      break;
  }
  recompute_sum();
  std::fill(last_update_.begin(), last_update_.end(), iteration);
}

Index SnapshotSet::update_entries(std::span<const Index> batch, ConstVectorRef x,
                                  const BatchGradients* fresh, Index iteration,
                                  bool periodic_rebuild) {
  if (storage_ == SnapshotStorage::kAnchor)
    throw InvalidArgument("partial snapshot updates need dense or compact storage");
  if (fresh && fresh->count != static_cast<Index>(batch.size())) fresh = nullptr;
  Index evaluations = 0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Index i = batch[j];
    if (storage_ == SnapshotStorage::kDense) {
      if (fresh) {
        scratch_ = fresh->dense.col(static_cast<Index>(j));
      } else {
        model_->component_grad(i, x, scratch_);
        ++evaluations;
      }
      sum_ += scratch_ - dense_.col(i);
      dense_.col(i) = scratch_;
    } else {
      double s;
      if (fresh) {
        s = fresh->scalars[static_cast<Index>(j)];
      } else {
        s = model_->compact()->scalar(i, x);
        ++evaluations;
      }
      model_->compact()->data_row(i).axpy(s - scalars_[i], sum_);
      scalars_[i] = s;
    }
    last_update_[static_cast<std::size_t>(i)] = iteration;
  }
  writes_since_rebuild_ += static_cast<Index>(batch.size());
  if (periodic_rebuild && writes_since_rebuild_ >= size()) recompute_sum();
  return evaluations;
}

// --------------------------------------------------------- checkpointing

namespace {
constexpr std::array<char, 8> kMagic = {'A', 'G', 'L', 'D', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 4);
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("snapshot checkpoint: truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("snapshot checkpoint: truncated");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
  return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }
}  // namespace

void SnapshotSet::save(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(storage_));
  put_u64(out, static_cast<std::uint64_t>(size()));
  put_u64(out, static_cast<std::uint64_t>(dim()));
  put_u64(out, static_cast<std::uint64_t>(writes_since_rebuild_));
  for (Index j : last_update_) put_u64(out, static_cast<std::uint64_t>(j));
  switch (storage_) {
    case SnapshotStorage::kDense:
      for (Index k = 0; k < dense_.size(); ++k) put_f64(out, dense_.data()[k]);
      break;
    case SnapshotStorage::kCompact:
      for (Index k = 0; k < scalars_.size(); ++k) put_f64(out, scalars_[k]);
      break;
    case SnapshotStorage::kAnchor:
      for (Index k = 0; k < anchor_.size(); ++k) put_f64(out, anchor_[k]);
      break;
  }
  for (Index k = 0; k < sum_.size(); ++k) put_f64(out, sum_[k]);
  if (!out) throw IoError("snapshot checkpoint: write failed");
}

SnapshotSet SnapshotSet::load(std::istream& in, ModelPtr model) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw IoError("snapshot checkpoint: bad magic");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw IoError("snapshot checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t storage = get_u32(in);
  if (storage > 2) throw IoError("snapshot checkpoint: unknown storage kind");
  SnapshotSet s(std::move(model), static_cast<SnapshotStorage>(storage));
  const auto n = static_cast<Index>(get_u64(in));
  const auto d = static_cast<Index>(get_u64(in));
  if (n != s.size() || d != s.dim())
    throw DimensionMismatch("snapshot checkpoint", s.size() * s.dim(), n * d);
  s.writes_since_rebuild_ = static_cast<Index>(get_u64(in));
  for (auto& j : s.last_update_) j = static_cast<Index>(get_u64(in));
  switch (s.storage_) {
    case SnapshotStorage::kDense:
      for (Index k = 0; k < s.dense_.size(); ++k) s.dense_.data()[k] = get_f64(in);
      break;
    case SnapshotStorage::kCompact:
      for (Index k = 0; k < s.scalars_.size(); ++k) s.scalars_[k] = get_f64(in);
      break;
    case SnapshotStorage::kAnchor:
      for (Index k = 0; k < s.anchor_.size(); ++k) s.anchor_[k] = get_f64(in);
      break;
  }
  for (Index k = 0; k < s.sum_.size(); ++k) s.sum_[k] = get_f64(in);
  return s;
}

// ---------------------------------------------------- aggregated gradient

void aggregated_gradient(const SnapshotSet& snapshots, ConstVectorRef x,
                         std::span<const Index> batch, VectorRef out,
                         GradientWorkspace& ws) {
  const GradientModel& model = snapshots.model();
  const auto n = static_cast<Index>(batch.size());
  ws.reserve(model.dim(), n);
  ws.correction.setZero();
  switch (snapshots.storage()) {
    case SnapshotStorage::kDense:
    case SnapshotStorage::kAnchor:
      for (Index j = 0; j < n; ++j) {
        const Index i = batch[static_cast<std::size_t>(j)];
        auto fresh = ws.fresh.dense.col(j);
        model.component_grad(i, x, fresh);
        snapshots.entry_into(i, ws.alpha);
        ws.correction += fresh - ws.alpha;
      }
      break;
    case SnapshotStorage::kCompact: {
      const CompactForm& cf = *model.compact();
      const Vector& stored = snapshots.scalars();
      for (Index j = 0; j < n; ++j) {
        const Index i = batch[static_cast<std::size_t>(j)];
        const double s = cf.scalar(i, x);
        ws.fresh.scalars[j] = s;
        cf.data_row(i).axpy(s - stored[i], ws.correction);
      }
      break;
    }
  }
  ws.fresh.count = n;
  const double scale = static_cast<double>(model.size()) / static_cast<double>(n);
  out = snapshots.running_sum() + scale * ws.correction;
  if (model.has_prior()) model.add_prior_grad(x, out);
}

Vector aggregated_gradient(const SnapshotSet& snapshots, const Vector& x,
                           std::span<const Index> batch) {
  check_dim("aggregated_gradient", snapshots.dim(), x.size());
  if (batch.empty()) throw InvalidArgument("aggregated_gradient: empty batch");
  for (Index i : batch)
    if (i < 0 || i >= snapshots.size())
      throw OutOfRange("aggregated_gradient: batch index " + std::to_string(i) + " out of range");
  GradientWorkspace ws;
  Vector out(snapshots.dim());
  aggregated_gradient(snapshots, x, batch, out, ws);
  return out;
}

Index apply_update(const Updater& updater, SnapshotSet& snapshots, ConstVectorRef x_k,
                   ConstVectorRef x_k1, Index k, std::span<const Index> batch,
                   const BatchGradients* fresh) {
  const Index n_total = snapshots.size();
  const Index period = updater.epoch_length > 0 ? updater.epoch_length : n_total;
  const bool epoch_end = (k + 1) % period == 0;
  switch (updater.kind) {
    case UpdaterKind::kNone:
      return 0;
    case UpdaterKind::kPPU:
      return snapshots.update_entries(batch, x_k, fresh, k, updater.periodic_rebuild);
    case UpdaterKind::kPTU:
      if (!epoch_end) return 0;
      snapshots.refresh_all(x_k1, k + 1);
      return n_total;
    case UpdaterKind::kTMU:
      if (epoch_end) {
        snapshots.refresh_all(x_k1, k + 1);
        return n_total;
      }
      return snapshots.update_entries(batch, x_k, fresh, k, updater.periodic_rebuild);
  }
  return 0;
}

// ------------------------------------------------------------ staleness

IterateHistory::IterateHistory(Index dim, Index capacity) : ring_(dim, capacity), capacity_(capacity) {
  if (capacity < 1) throw InvalidArgument("IterateHistory: capacity must be positive");
}

void IterateHistory::push(ConstVectorRef x) {
  check_dim("IterateHistory::push", ring_.rows(), x.size());
  ring_.col(count_ % capacity_) = x;
  ++count_;
}

ConstVectorRef IterateHistory::at(Index j) const {
  if (!contains(j)) throw OutOfRange("IterateHistory: iteration " + std::to_string(j) + " not held");
  return ring_.col(j % capacity_);
}

bool verify_staleness(const SnapshotSet& snapshots, const IterateHistory& history,
                      Index max_lag, StalenessWindow window) {
  if (max_lag < 0) throw InvalidArgument("verify_staleness: D must be non-negative");
  const Index k = history.latest();
  if (k < 0) throw InvalidArgument("verify_staleness: empty iterate history");
  check_dim("verify_staleness", snapshots.dim(), history.at(k).size());
  const Index lo = std::max<Index>(0, window == StalenessWindow::kInclusive ? k - max_lag
                                                                             : k - max_lag + 1);
  if (lo > k) return false;
  if (!history.contains(lo))
    throw InvalidArgument("verify_staleness: iterate history shorter than the window (need x^(" +
                          std::to_string(lo) + ") .. x^(" + std::to_string(k) + "))");
  const GradientModel& model = snapshots.model();
  Vector alpha(snapshots.dim());
  Vector grad(snapshots.dim());
  auto matches = [&](Index i, Index j) {
    model.component_grad(i, history.at(j), grad);
    return grad == alpha;
  };
  for (Index i = 0; i < snapshots.size(); ++i) {
    snapshots.entry_into(i, alpha);
    // Try the recorded stamp first; fall back to scanning the whole window.
    const Index hint = snapshots.last_update()[static_cast<std::size_t>(i)];
    if (hint >= lo && hint <= k && matches(i, hint)) continue;
    bool found = false;
    for (Index j = k; j >= lo && !found; --j) found = j != hint && matches(i, j);
    if (!found) return false;
  }
  return true;
}

}  // namespace agld
