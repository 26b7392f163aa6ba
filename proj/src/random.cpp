#include "agld/random.hpp"

#include <cmath>
#include <utility>

namespace agld {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t chain,
                          Stream stream) noexcept {
  std::uint64_t h = mix64(master + kGolden);
  h = mix64(h ^ (chain * kGolden + 0x632BE59BD9B4E019ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL));
  return h;
}

std::uint64_t RandomStream::next_u64() noexcept {
  const std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c * kGolden + kGolden));
}

double RandomStream::next_uniform() noexcept {
  // (k + 0.5) / 2^53 never hits either endpoint.
  const std::uint64_t k = next_u64() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

Index RandomStream::next_index(Index n) noexcept {
  const auto range = static_cast<std::uint64_t>(n);
  unsigned __int128 m =
      static_cast<unsigned __int128>(next_u64()) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<Index>(m >> 64);
}

double RandomStream::next_normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_uniform() - 1.0;
    v = 2.0 * next_uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

void RandomStream::fill_normal(VectorRef out) noexcept {
  for (Index j = 0; j < out.size(); ++j) out[j] = next_normal();
}

void RandomStream::shuffle(std::span<Index> values) noexcept {
  for (auto i = static_cast<Index>(values.size()) - 1; i > 0; --i) {
    const Index j = next_index(i + 1);
    std::swap(values[static_cast<std::size_t>(i)],
              values[static_cast<std::size_t>(j)]);
  }
}

}  // namespace agld
