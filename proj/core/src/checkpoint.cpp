#include "hnmt/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hnmt {
namespace {

constexpr char kMagic[8] = {'H', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put_le<std::uint64_t>(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  std::string str() {
    auto n = get<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void expect_magic() {
    need(sizeof(kMagic));
    if (std::memcmp(bytes_.data(), kMagic, sizeof(kMagic)) != 0) throw DataError("checkpoint: bad magic");
    pos_ += sizeof(kMagic);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint: truncated file");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::put_parameters(const ParameterSet& params, const std::string& prefix) {
  for (const auto& p : params) tensors[prefix + p->name] = p->value;
}

void Container::get_parameters(ParameterSet& params, const std::string& prefix) const {
  for (auto& p : params) {
    auto it = tensors.find(prefix + p->name);
    if (it == tensors.end()) throw DataError("checkpoint: missing tensor '" + prefix + p->name + "'");
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw DataError("checkpoint: tensor '" + prefix + p->name + "' has shape " + shape_str(it->second) +
                      ", expected " + shape_str(p->value));
    }
    p->value = it->second;
  }
}

const std::string& Container::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint: missing meta key '" + key + "'");
  return it->second;
}

const std::string& Container::blob_at(const std::string& key) const {
  auto it = blobs.find(key);
  if (it == blobs.end()) throw DataError("checkpoint: missing blob '" + key + "'");
  return it->second;
}

std::string serialize(const Container& c) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kContainerVersion);
  put_le<std::uint64_t>(out, c.meta.size());
  for (const auto& [k, v] : c.meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_le<std::uint64_t>(out, c.tensors.size());
  for (const auto& [name, m] : c.tensors) {
    put_str(out, name);
    put_le<std::uint32_t>(out, 2);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) put_le<double>(out, m.data()[i]);
  }
  put_le<std::uint64_t>(out, c.blobs.size());
  for (const auto& [k, v] : c.blobs) {
    put_str(out, k);
    put_str(out, v);
  }
  return out;
}

Container deserialize(const std::string& bytes) {
  Reader r(bytes);
  r.expect_magic();
  auto version = r.get<std::uint32_t>();
  if (version != kContainerVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Container c;
  for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
    std::string k = r.str();
    c.meta[k] = r.str();
  }
  for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
    std::string name = r.str();
    auto rank = r.get<std::uint32_t>();
    if (rank < 1 || rank > 2) throw DataError("checkpoint: tensor '" + name + "' has unsupported rank");
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t d = 0; d < rank; ++d) dims[d] = r.get<std::uint64_t>();
    if (rank == 1) std::swap(dims[0], dims[1]);
    Matrix m(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.get<double>();
    c.tensors.emplace(std::move(name), std::move(m));
  }
  for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
    std::string k = r.str();
    c.blobs[k] = r.str();
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string bytes = serialize(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace hnmt
