#include "agld/access.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>

#include "text.hpp"

namespace agld {

std::string_view to_string(AccessKind kind) noexcept {
  switch (kind) {
    case AccessKind::kRA: return "RA";
    case AccessKind::kRR: return "RR";
    case AccessKind::kCA: return "CA";
  }
  return "?";
}

std::optional<AccessKind> parse_access_kind(std::string_view name) noexcept {
  if (name == "RA") return AccessKind::kRA;
  if (name == "RR") return AccessKind::kRR;
  if (name == "CA") return AccessKind::kCA;
  return std::nullopt;
}

Accessor::Accessor(AccessKind kind, Index n_total, Index batch, std::uint64_t seed)
    : kind_(kind), n_total_(n_total), batch_(batch), rng_(seed) {
  if (n_total < 1) throw InvalidArgument("make_accessor: N must be positive");
  if (batch < 1) throw InvalidArgument("make_accessor: batch size must be positive");
  if (batch > n_total)
    throw InvalidArgument("make_accessor: batch size " + std::to_string(batch) +
                          " exceeds N=" + std::to_string(n_total));
  if (kind != AccessKind::kRA && n_total % batch != 0)
    throw InvalidArgument("make_accessor: " + std::string(to_string(kind)) +
                          " requires the batch size to divide N (N=" +
                          std::to_string(n_total) + ", n=" + std::to_string(batch) + ")");
  batch_buf_.resize(static_cast<std::size_t>(batch));
  if (kind == AccessKind::kRR) {
    permutation_.resize(static_cast<std::size_t>(n_total));
    std::iota(permutation_.begin(), permutation_.end(), Index{0});
  }
}

std::span<const Index> Accessor::next_batch() {
  switch (kind_) {
    case AccessKind::kRA:
      for (auto& i : batch_buf_) i = rng_.next_index(n_total_);
      break;
    case AccessKind::kRR:
      if (cursor_ == 0) rng_.shuffle(permutation_);
      std::copy_n(permutation_.begin() + cursor_, batch_, batch_buf_.begin());
      cursor_ = (cursor_ + batch_) % n_total_;
      break;
    case AccessKind::kCA:
      for (Index j = 0; j < batch_; ++j) batch_buf_[static_cast<std::size_t>(j)] = cursor_ + j;
      cursor_ = (cursor_ + batch_) % n_total_;
      break;
  }
  ++emitted_;
  return batch_buf_;
}

void AccessTrace::append(std::span<const Index> batch) {
  for (Index i : batch)
    if (i < 0 || i >= n_total_)
      throw OutOfRange("AccessTrace: index " + std::to_string(i) + " outside [0, " +
                       std::to_string(n_total_) + ")");
  indices_.insert(indices_.end(), batch.begin(), batch.end());
  offsets_.push_back(static_cast<Index>(indices_.size()));
}

AccessTrace record_trace(Accessor& accessor, Index iterations) {
  AccessTrace trace(accessor.size());
  for (Index k = 0; k < iterations; ++k) trace.append(accessor.next_batch());
  return trace;
}

std::optional<Index> coverage_window(const AccessTrace& trace) {
  const Index t_end = trace.iterations();
  if (t_end == 0) throw InvalidArgument("coverage: empty trace");
  // Coverage at t needs a visit in [t - w + 1, t] for all t in [w - 1, T - 1]:
  // first visit <= w - 1, consecutive gaps <= w, T - 1 - last visit <= w - 1.
  std::vector<Index> last(static_cast<std::size_t>(trace.size()), -1);
  Index needed = 1;
  for (Index t = 0; t < t_end; ++t) {
    for (Index i : trace.batch(t)) {
      Index& prev = last[static_cast<std::size_t>(i)];
      if (prev == t) continue;
      needed = std::max(needed, prev < 0 ? t + 1 : t - prev);
      prev = t;
    }
  }
  for (Index prev : last) {
    if (prev < 0) return std::nullopt;
    needed = std::max(needed, t_end - prev);
  }
  return needed;
}

bool verify_coverage(const AccessTrace& trace, Index window) {
  if (window < 1) throw InvalidArgument("verify_coverage: window must be >= 1");
  if (trace.iterations() == 0) throw InvalidArgument("verify_coverage: empty trace");
  // No iteration t >= window - 1 exists: nothing to check.
  if (window > trace.iterations()) return true;
  const auto needed = coverage_window(trace);
  return needed && *needed <= window;
}

void write_trace(const AccessTrace& trace, std::ostream& out) {
  std::string line;
  for (Index k = 0; k < trace.iterations(); ++k) {
    line.clear();
    text::append_int(line, trace.first_iteration() + k);
    line.push_back('\t');
    bool first = true;
    for (Index i : trace.batch(k)) {
      if (!first) line.push_back(',');
      first = false;
      text::append_int(line, i);
    }
    line.push_back('\n');
    out << line;
  }
}

AccessTrace read_trace(std::istream& in, Index n_total) {
  AccessTrace trace(n_total);
  std::string line;
  std::vector<Index> batch;
  Index lineno = 0;
  std::optional<Index> expected;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = text::trim(line);
    if (s.empty()) continue;
    const auto tab = s.find('\t');
    if (tab == std::string_view::npos) throw ParseError(lineno, 1, "missing TAB after iteration");
    std::int64_t k = 0;
    if (!text::parse_int(s.substr(0, tab), k)) throw ParseError(lineno, 1, "invalid iteration");
    if (!expected) {
      trace.set_first_iteration(k);
    } else if (k != *expected) {
      throw ParseError(lineno, 1, "iterations must be consecutive");
    }
    expected = k + 1;
    batch.clear();
    std::string_view rest = s.substr(tab + 1);
    std::size_t col = tab + 2;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto tok = rest.substr(0, comma);
      std::int64_t idx = 0;
      if (!text::parse_int(tok, idx)) throw ParseError(lineno, static_cast<Index>(col), "invalid index");
      if (idx < 0 || idx >= n_total)
        throw ParseError(lineno, static_cast<Index>(col), "index " + std::to_string(idx) + " out of range");
      batch.push_back(idx);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
      col += comma + 1;
    }
    trace.append(batch);
  }
  return trace;
}

}  // namespace agld
