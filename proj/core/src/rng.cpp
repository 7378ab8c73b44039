#include "tcnn/rng.hpp"

#include <cmath>

namespace tcnn {

namespace {

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x00000100000001b3ull;

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t x = seed ^ (tag * 0x9e3779b97f4a7c15ull);
  // A couple of mixing rounds so nearby seeds and tags decorrelate.
  splitmix64(x);
  return splitmix64(x);
}

}  // namespace

std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t basis) {
  const unsigned char* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size(), kFnvBasis); }

StreamRng::StreamRng(std::uint64_t seed, std::string_view stream)
    : StreamRng(derive_key(seed, fnv1a64(stream))) {}

StreamRng StreamRng::substream(std::string_view name) const {
  return StreamRng(derive_key(key_, fnv1a64(name)));
}

StreamRng StreamRng::substream(std::uint64_t index) const {
  return StreamRng(derive_key(key_, index ^ 0xa5a5a5a5a5a5a5a5ull));
}

std::uint64_t StreamRng::next_u64() { return splitmix64(state_); }

double StreamRng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double StreamRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t StreamRng::below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = ~0ull - ~0ull % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double StreamRng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 shifted away from zero so log() stays finite.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

}  // namespace tcnn
