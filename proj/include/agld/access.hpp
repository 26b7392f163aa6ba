#ifndef AGLD_ACCESS_HPP
#define AGLD_ACCESS_HPP

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agld/random.hpp"
#include "agld/types.hpp"

namespace agld {

enum class AccessKind { kRA, kRR, kCA };

std::string_view to_string(AccessKind kind) noexcept;
std::optional<AccessKind> parse_access_kind(std::string_view name) noexcept;

/// Stateful generator of index batches.
///
///   RA  n i.i.d. uniform draws with replacement (a multiset)
///   RR  consecutive slices of a permutation reshuffled at every pass start
///   CA  consecutive slices of 0..N-1, wrapping around
///
/// RR and CA require n | N so that every pass splits into whole batches.
class Accessor {
 public:
  Accessor(AccessKind kind, Index n_total, Index batch, std::uint64_t seed);

  /// The returned view stays valid until the next call.
  std::span<const Index> next_batch();

  AccessKind kind() const noexcept { return kind_; }
  Index size() const noexcept { return n_total_; }
  Index batch_size() const noexcept { return batch_; }
  Index batches_emitted() const noexcept { return emitted_; }

 private:
  AccessKind kind_;
  Index n_total_;
  Index batch_;
  Index cursor_ = 0;
  Index emitted_ = 0;
  RandomStream rng_;
  std::vector<Index> permutation_;
  std::vector<Index> batch_buf_;
};

/// Append-only record of emitted batches. Iteration stamps are implicit:
/// entry k is the batch of iteration first_iteration + k.
class AccessTrace {
 public:
  AccessTrace() = default;
  explicit AccessTrace(Index n_total) : n_total_(n_total) {}

  void append(std::span<const Index> batch);
  Index iterations() const noexcept { return static_cast<Index>(offsets_.size()) - 1; }
  Index size() const noexcept { return n_total_; }
  std::span<const Index> batch(Index k) const noexcept {
    const auto b = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(k)]);
    const auto e = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(k) + 1]);
    return std::span<const Index>(indices_).subspan(b, e - b);
  }
  /// All accesses in order, batches concatenated.
  std::span<const Index> flat() const noexcept { return indices_; }
  Index first_iteration() const noexcept { return first_iteration_; }
  void set_first_iteration(Index k) noexcept { first_iteration_ = k; }

 private:
  Index n_total_ = 0;
  Index first_iteration_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> indices_;
};

AccessTrace record_trace(Accessor& accessor, Index iterations);

/// True iff for every iteration t >= window - 1 each index in [0, N) occurs
/// in batches t - window + 1 .. t.
bool verify_coverage(const AccessTrace& trace, Index window);

/// Smallest window for which verify_coverage holds, or nullopt when some
/// index never occurs.
std::optional<Index> coverage_window(const AccessTrace& trace);

/// One line per iteration: `k<TAB>i1,i2,...,in`.
void write_trace(const AccessTrace& trace, std::ostream& out);
AccessTrace read_trace(std::istream& in, Index n_total);

}  // namespace agld

#endif  // AGLD_ACCESS_HPP
