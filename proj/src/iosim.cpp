#include "agld/iosim.hpp"

#include <ostream>

#include "agld/random.hpp"
#include "text.hpp"

namespace agld {

LruCache::LruCache(Index capacity) : capacity_(capacity) {
  if (capacity < 1) throw InvalidArgument("LruCache: capacity must be positive");
  where_.reserve(static_cast<std::size_t>(capacity) * 2);
}

bool LruCache::touch(Index page) {
  auto it = where_.find(page);
  if (it != where_.end()) {
    order_.splice(order_.begin(), order_, it->second);
    return true;
  }
  if (full()) {
    where_.erase(order_.back());
    order_.pop_back();
  }
  order_.push_front(page);
  where_.emplace(page, order_.begin());
  return false;
}

void validate(const PageCacheConfig& cfg) {
  if (cfg.records_per_page < 1) throw InvalidArgument("page cache: records per page must be >= 1");
  if (cfg.cache_pages < 1) throw InvalidArgument("page cache: cache size must be >= 1 page");
  if (cfg.total_records < 1) throw InvalidArgument("page cache: N must be positive");
  if (!(cfg.fault_cost >= 0.0)) throw InvalidArgument("page cache: fault cost must be non-negative");
}

FaultReport replay(std::span<const Index> accesses, const PageCacheConfig& cfg) {
  validate(cfg);
  const Index n_total = cfg.total_records;
  LruCache cache(cfg.cache_pages);
  FaultReport r;
  Index pass_faults = 0;
  Index pass_accesses = 0;
  Index warm_start = -1;
  Index warm_faults = 0;
  for (Index i : accesses) {
    if (i < 0 || i >= n_total)
      throw OutOfRange("replay: index " + std::to_string(i) + " outside [0, " +
                       std::to_string(n_total) + ")");
    const bool hit = cache.touch(i / cfg.records_per_page);
    ++r.total_accesses;
    ++pass_accesses;
    if (!hit) {
      ++r.faults;
      ++pass_faults;
      if (warm_start >= 0) ++warm_faults;
    }
    if (warm_start < 0 && (cache.full() || r.total_accesses == n_total)) warm_start = r.total_accesses;
    if (pass_accesses == n_total) {
      r.faults_per_pass.push_back(pass_faults);
      r.hit_ratio_per_pass.push_back(1.0 - static_cast<double>(pass_faults) / static_cast<double>(n_total));
      pass_faults = 0;
      pass_accesses = 0;
    }
  }
  if (pass_accesses > 0) {
    r.faults_per_pass.push_back(pass_faults);
    r.hit_ratio_per_pass.push_back(1.0 - static_cast<double>(pass_faults) / static_cast<double>(pass_accesses));
  }
  if (r.total_accesses > 0)
    r.hit_ratio = 1.0 - static_cast<double>(r.faults) / static_cast<double>(r.total_accesses);
  const Index warm_accesses = warm_start < 0 ? 0 : r.total_accesses - warm_start;
  r.steady_hit_ratio = warm_accesses > 0
                           ? 1.0 - static_cast<double>(warm_faults) / static_cast<double>(warm_accesses)
                           : r.hit_ratio;
  r.cost = static_cast<double>(r.faults) * cfg.fault_cost;
  return r;
}

FaultReport replay(const AccessTrace& trace, const PageCacheConfig& cfg) {
  return replay(trace.flat(), cfg);
}

std::vector<Index> method_accesses(AccessKind access, UpdaterKind updater, Index n_total,
                                   Index batch, Index epoch_length, Index iterations,
                                   std::uint64_t seed) {
  if (iterations < 0) throw InvalidArgument("method_accesses: negative iteration count");
  Accessor acc(access, n_total, batch, seed);
  const Index period = epoch_length > 0 ? epoch_length : n_total;
  const bool refreshes = updater == UpdaterKind::kPTU || updater == UpdaterKind::kTMU;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(iterations * batch));
  for (Index k = 0; k < iterations; ++k) {
    const auto b = acc.next_batch();
    out.insert(out.end(), b.begin(), b.end());
    if (refreshes && (k + 1) % period == 0)
      for (Index i = 0; i < n_total; ++i) out.push_back(i);
  }
  return out;
}

std::vector<StrategyReport> compare_strategies(Index n_total, Index batch,
                                               const PageCacheConfig& cfg, Index passes,
                                               std::uint64_t seed) {
  if (passes < 1) throw InvalidArgument("compare_strategies: passes must be positive");
  PageCacheConfig c = cfg;
  c.total_records = n_total;
  validate(c);
  const Index iterations = passes * n_total / batch;
  std::vector<StrategyReport> out;
  for (AccessKind kind : {AccessKind::kRA, AccessKind::kRR, AccessKind::kCA}) {
    const auto trace = method_accesses(kind, UpdaterKind::kNone, n_total, batch, 0, iterations,
                                       derive_seed(seed, 0, Stream::kAccess));
    out.push_back({std::string(to_string(kind)), replay(trace, c)});
  }
  return out;
}

void write_fault_csv(const std::vector<StrategyReport>& reports, std::ostream& out) {
  std::string line = "strategy,pass,faults,hit_ratio\n";
  out << line;
  for (const auto& s : reports) {
    for (std::size_t p = 0; p < s.report.faults_per_pass.size(); ++p) {
      line.clear();
      line += s.strategy;
      line += ',';
      text::append_int(line, static_cast<Index>(p));
      line += ',';
      text::append_int(line, s.report.faults_per_pass[p]);
      line += ',';
      text::append_double(line, s.report.hit_ratio_per_pass[p]);
      line += '\n';
      out << line;
    }
  }
}

}  // namespace agld
