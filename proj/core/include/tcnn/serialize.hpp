#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tcnn/tensor.hpp"

namespace tcnn {

/// Self-describing versioned container: named tensors, integers, doubles and
/// strings. On disk everything is little-endian; tensors store rank, extents
/// and row-major 64-bit float data. Readers reject unknown format versions.
class Container {
 public:
  static constexpr std::uint32_t kMagic = 0x46434354;  // "TCCF"
  static constexpr std::uint32_t kVersion = 1;

  void put_tensor(const std::string& name, Tensor t);
  void put_i64(const std::string& name, std::int64_t v);
  void put_f64(const std::string& name, double v);
  void put_string(const std::string& name, std::string v);

  bool has(const std::string& name) const;
  const Tensor& get_tensor(const std::string& name) const;
  std::int64_t get_i64(const std::string& name) const;
  double get_f64(const std::string& name) const;
  const std::string& get_string(const std::string& name) const;
  std::vector<std::string> names() const;

  void save(const std::string& path) const;
  static Container load(const std::string& path);

  /// Serialized bytes; save() writes exactly these. Useful for checksums and
  /// byte-identical comparisons.
  std::string to_bytes() const;
  static Container from_bytes(const std::string& bytes);

 private:
  enum class Kind : std::uint8_t { tensor = 0, i64 = 1, f64 = 2, string = 3 };
  struct Entry {
    Kind kind;
    Tensor t;
    std::int64_t i = 0;
    double d = 0.0;
    std::string s;
  };
  const Entry& need(const std::string& name, Kind kind) const;
  std::map<std::string, Entry> entries_;
};

}  // namespace tcnn
