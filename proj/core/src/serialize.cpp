#include "tcnn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tcnn/errors.hpp"

namespace tcnn {

namespace {

void enc_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void enc_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void enc_f64(std::string& out, double v) { enc_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Cursor {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw data_error("container: truncated data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void Container::put_tensor(const std::string& name, Tensor t) {
  Entry e;
  e.kind = Kind::tensor;
  e.t = std::move(t);
  entries_[name] = std::move(e);
}

void Container::put_i64(const std::string& name, std::int64_t v) {
  Entry e;
  e.kind = Kind::i64;
  e.i = v;
  entries_[name] = std::move(e);
}

void Container::put_f64(const std::string& name, double v) {
  Entry e;
  e.kind = Kind::f64;
  e.d = v;
  entries_[name] = std::move(e);
}

void Container::put_string(const std::string& name, std::string v) {
  Entry e;
  e.kind = Kind::string;
  e.s = std::move(v);
  entries_[name] = std::move(e);
}

bool Container::has(const std::string& name) const { return entries_.count(name) != 0; }

const Container::Entry& Container::need(const std::string& name, Kind kind) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw data_error("container: missing entry '" + name + "'");
  if (it->second.kind != kind) throw data_error("container: entry '" + name + "' has wrong type");
  return it->second;
}

const Tensor& Container::get_tensor(const std::string& name) const {
  return need(name, Kind::tensor).t;
}
std::int64_t Container::get_i64(const std::string& name) const { return need(name, Kind::i64).i; }
double Container::get_f64(const std::string& name) const { return need(name, Kind::f64).d; }
const std::string& Container::get_string(const std::string& name) const {
  return need(name, Kind::string).s;
}

std::vector<std::string> Container::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

std::string Container::to_bytes() const {
  std::string out;
  enc_u32(out, kMagic);
  enc_u32(out, kVersion);
  enc_u64(out, entries_.size());
  for (const auto& [name, e] : entries_) {
    enc_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(e.kind));
    switch (e.kind) {
      case Kind::tensor: {
        enc_u32(out, static_cast<std::uint32_t>(e.t.rank()));
        for (std::size_t d : e.t.shape) enc_u64(out, d);
        for (double x : e.t.data) enc_f64(out, x);
        break;
      }
      case Kind::i64:
        enc_u64(out, static_cast<std::uint64_t>(e.i));
        break;
      case Kind::f64:
        enc_f64(out, e.d);
        break;
      case Kind::string:
        enc_u64(out, e.s.size());
        out += e.s;
        break;
    }
  }
  return out;
}

Container Container::from_bytes(const std::string& bytes) {
  Cursor c{bytes};
  if (c.u32() != kMagic) throw data_error("container: bad magic (not a model container)");
  std::uint32_t version = c.u32();
  if (version != kVersion) {
    throw data_error("container: unsupported format version " + std::to_string(version) +
                     " (this build reads version " + std::to_string(kVersion) + ")");
  }
  std::uint64_t count = c.u64();
  Container out;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t name_len = c.u32();
    std::string name = c.str(name_len);
    c.need(1);
    auto kind = static_cast<Kind>(static_cast<unsigned char>(bytes[c.pos]));
    ++c.pos;
    switch (kind) {
      case Kind::tensor: {
        std::uint32_t rank = c.u32();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(c.u64());
        std::size_t n = shape_numel(shape);
        std::vector<double> data(n);
        for (auto& x : data) x = c.f64();
        out.put_tensor(name, Tensor(std::move(shape), std::move(data)));
        break;
      }
      case Kind::i64:
        out.put_i64(name, static_cast<std::int64_t>(c.u64()));
        break;
      case Kind::f64:
        out.put_f64(name, c.f64());
        break;
      case Kind::string: {
        std::uint64_t len = c.u64();
        out.put_string(name, c.str(len));
        break;
      }
      default:
        throw data_error("container: unknown entry kind in '" + name + "'");
    }
  }
  return out;
}

void Container::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot open for writing: " + path);
  std::string bytes = to_bytes();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw data_error("write failed: " + path);
}

Container Container::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

}  // namespace tcnn
