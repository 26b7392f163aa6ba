#ifndef AGLD_RANDOM_HPP
#define AGLD_RANDOM_HPP

#include <cstdint>
#include <span>

#include "agld/types.hpp"

namespace agld {

/// Identifiers for the independent random streams a run consumes. Each
/// (master seed, chain, stream) triple maps to its own key, so access order
/// and injected noise can be reproduced independently of one another.
enum class Stream : std::uint64_t {
  kNoise = 1,
  kAccess = 2,
  kAnchors = 3,
  kRotation = 4,
  kData = 5,
  kSplit = 6,
  kProjection = 7,
  kReference = 8,
  kInit = 9,
};

std::uint64_t mix64(std::uint64_t z) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t chain,
                          Stream stream) noexcept;

/// Counter-based generator: the j-th output is a keyed hash of j. Outputs
/// depend only on integer arithmetic, so sequences are identical on every
/// platform; the normal deviates use the polar method (sqrt and log only).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key = 0) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1), 53 bits.
  double next_uniform() noexcept;
  /// Uniform integer in [0, n). Unbiased.
  Index next_index(Index n) noexcept;
  double next_normal() noexcept;
  void fill_normal(VectorRef out) noexcept;
  void shuffle(std::span<Index> values) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace agld

#endif  // AGLD_RANDOM_HPP
