#ifndef AGLD_IOSIM_HPP
#define AGLD_IOSIM_HPP

#include <cstdint>
#include <iosfwd>
#include <list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "agld/access.hpp"
#include "agld/snapshot.hpp"
#include "agld/types.hpp"

namespace agld {

struct PageCacheConfig {
  Index records_per_page = 1;  // P
  Index cache_pages = 1;       // C
  Index total_records = 0;     // N
  /// Cost units (e.g. seconds) charged per fault.
  double fault_cost = 1.0;
};

struct FaultReport {
  Index total_accesses = 0;
  Index faults = 0;
  double hit_ratio = 0.0;
  /// Accesses grouped into consecutive chunks of N (one data pass each).
  std::vector<Index> faults_per_pass;
  std::vector<double> hit_ratio_per_pass;
  /// Hit ratio over the accesses made after the cache first became full
  /// (after the first pass when it never fills).
  double steady_hit_ratio = 0.0;
  double cost = 0.0;
};

/// Fixed-capacity LRU set of page ids.
class LruCache {
 public:
  explicit LruCache(Index capacity);
  /// Marks `page` most recently used. Returns true on a hit; on a miss the
  /// page is loaded, evicting the least recently used one when full.
  bool touch(Index page);
  Index size() const noexcept { return static_cast<Index>(where_.size()); }
  Index capacity() const noexcept { return capacity_; }
  bool full() const noexcept { return size() == capacity_; }

 private:
  Index capacity_;
  std::list<Index> order_;  // front = most recent
  std::unordered_map<Index, std::list<Index>::iterator> where_;
};

void validate(const PageCacheConfig& cfg);

FaultReport replay(std::span<const Index> accesses, const PageCacheConfig& cfg);
FaultReport replay(const AccessTrace& trace, const PageCacheConfig& cfg);

/// Records read by `iterations` steps of a sampler using the given access
/// and snapshot strategies. A PTU/TMU full refresh appears as one sequential
/// pass over 0..N-1 after the batch of the refreshing iteration.
std::vector<Index> method_accesses(AccessKind access, UpdaterKind updater, Index n_total,
                                   Index batch, Index epoch_length, Index iterations,
                                   std::uint64_t seed);

struct StrategyReport {
  std::string strategy;
  FaultReport report;
};

/// RA, RR and CA traces of `passes` data passes, replayed under `cfg`.
std::vector<StrategyReport> compare_strategies(Index n_total, Index batch,
                                               const PageCacheConfig& cfg, Index passes,
                                               std::uint64_t seed);

/// CSV `strategy,pass,faults,hit_ratio`.
void write_fault_csv(const std::vector<StrategyReport>& reports, std::ostream& out);

}  // namespace agld

#endif  // AGLD_IOSIM_HPP
