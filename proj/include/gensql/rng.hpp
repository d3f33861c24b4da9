#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace gensql {

namespace detail {

// splitmix64 finalizer; good avalanche, cheap, portable.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Counter-based pseudorandom stream. Streams are identified by a 64-bit key;
// child streams are derived by hashing the parent key with a tag, so the draws
// of one call site never depend on how many draws a sibling consumed. This is
// what makes cached and uncached runs (and any evaluation order) agree.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key = 0) : key_(key), counter_(0) {}

  static std::uint64_t derive(std::uint64_t key, std::uint64_t tag) {
    return detail::mix64(key ^ detail::mix64(tag + 0x632be59bd9b4e019ULL));
  }

  RngStream split(std::uint64_t tag) const { return RngStream(derive(key_, tag)); }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return detail::mix64(key_ ^ detail::mix64(++counter_)); }

  // Uniform on (0, 1]; never returns 0 so log(u) is finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Box-Muller. One normal per call keeps the stream stateless apart from the
  // draw counter.
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Index into a weight vector proportional to the (non-negative) weights.
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u <= acc) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace gensql
