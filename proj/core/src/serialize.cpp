#include "emt/serialize.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "emt/error.hpp"

namespace emt {
namespace {

constexpr std::array<char, 8> kMagic{'E', 'M', 'T', 'N', 'E', 'T', '\0', '\0'};

enum class NetKind : std::uint32_t { Residual = 1, Classifier = 2 };

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
  }
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& file) : out_(file, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + file.string() + " for writing");
  }
  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish(const std::filesystem::path& file) {
    out_.flush();
    if (!out_) throw IoError("write failed: " + file.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& file) : in_(file, std::ios::binary), name_(file.string()) {
    if (!in_) throw IoError("cannot open " + name_);
  }
  template <class T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw IoError("truncated network file " + name_);
    return to_little(v);
  }
  void raw(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_) throw IoError("truncated network file " + name_);
  }
  const std::string& name() const { return name_; }

 private:
  std::ifstream in_;
  std::string name_;
};

void write_file(const std::filesystem::path& file, NetKind kind, const std::vector<std::uint64_t>& header,
                const std::vector<const Param*>& params) {
  Writer w(file);
  w.raw(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kNetFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kind));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
  for (auto h : header) w.put<std::uint64_t>(h);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.rank()));
    for (auto e : p->value.shape()) w.put<std::uint64_t>(e);
  }
  for (const Param* p : params)
    for (double v : p->value.values()) w.put<double>(v);
  w.finish(file);
}

std::vector<std::uint64_t> read_header(Reader& r, NetKind expected) {
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  if (magic != kMagic) throw IoError("not a network file: " + r.name());
  if (r.get<std::uint32_t>() != kNetFormatVersion) throw IoError("unsupported network format version: " + r.name());
  if (r.get<std::uint32_t>() != static_cast<std::uint32_t>(expected)) throw IoError("wrong network kind: " + r.name());
  std::vector<std::uint64_t> header(r.get<std::uint32_t>());
  for (auto& h : header) h = r.get<std::uint64_t>();
  return header;
}

void read_params(Reader& r, const std::vector<Param*>& params) {
  if (r.get<std::uint32_t>() != params.size()) throw IoError("tensor count mismatch: " + r.name());
  for (Param* p : params) {
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (shape != p->value.shape()) throw IoError("tensor shape mismatch: " + r.name());
  }
  for (Param* p : params)
    for (double& v : p->value.values()) v = r.get<double>();
}

}  // namespace

void save_network(const ResidualNet& net, const std::filesystem::path& file) {
  write_file(file, NetKind::Residual, {net.dim(), net.depth(), net.hidden_channels(), net.trained() ? 1u : 0u},
             net.params());
}

void save_network(const SkillClassifier& net, const std::filesystem::path& file) {
  write_file(file, NetKind::Classifier,
             {net.dim(), net.num_tasks(), net.num_blocks(), net.channels(), net.trained() ? 1u : 0u}, net.params());
}

ResidualNet load_residual_net(const std::filesystem::path& file) {
  Reader r(file);
  const auto h = read_header(r, NetKind::Residual);
  if (h.size() != 4) throw IoError("bad residual net header: " + file.string());
  ResidualNet net(h[0], h[1], h[2]);
  read_params(r, net.params());
  net.set_trained(h[3] != 0);
  return net;
}

SkillClassifier load_skill_classifier(const std::filesystem::path& file) {
  Reader r(file);
  const auto h = read_header(r, NetKind::Classifier);
  if (h.size() != 5) throw IoError("bad classifier header: " + file.string());
  SkillClassifier net(h[0], h[1], h[2], h[3]);
  read_params(r, net.params());
  net.set_trained(h[4] != 0);
  return net;
}

}  // namespace emt
