#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace tcnn {

/// Deterministic random stream derived from (seed, stream-name).
///
/// Every pipeline stage draws from its own named stream, so enabling or
/// reordering one stage never shifts the draws of another. The generator is
/// self-contained (no std distributions), which keeps sequences identical
/// across standard libraries and platforms.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::string_view stream);

  /// Independent child stream; depends only on the parent key, not on how
  /// many values the parent has produced.
  StreamRng substream(std::string_view name) const;
  StreamRng substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  double uniform01();                       // [0, 1)
  double uniform(double lo, double hi);     // [lo, hi)
  std::uint64_t below(std::uint64_t n);     // unbiased [0, n)
  double normal();                          // N(0, 1), Box-Muller
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  StreamRng(std::uint64_t key) : key_(key), state_(key) {}
  std::uint64_t key_;
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t basis);

}  // namespace tcnn
