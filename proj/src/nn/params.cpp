#include "ami/nn/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ami::nn {

ParamBlock& ParameterSet::add(const std::string& name,
                              std::vector<std::size_t> shape) {
  if (has(name)) throw ConfigError("duplicate parameter block: " + name);
  if (shape.empty()) throw ConfigError("empty shape for block: " + name);
  ParamBlock b;
  b.name = name;
  b.shape = std::move(shape);
  b.values.assign(b.size(), 0.0);
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

bool ParameterSet::has(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return true;
  }
  return false;
}

ParamBlock& ParameterSet::block(const std::string& name) {
  for (auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw ConfigError("unknown parameter block: " + name);
}

const ParamBlock& ParameterSet::block(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw ConfigError("unknown parameter block: " + name);
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.values.size();
  return n;
}

bool ParameterSet::finite() const { return first_non_finite_block().empty(); }

std::string ParameterSet::first_non_finite_block() const {
  for (const auto& b : blocks_) {
    if (!all_finite(b.values)) return b.name;
  }
  return "";
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& b : blocks_) out.add(b.name, b.shape);
  return out;
}

void ParameterSet::adopt(const ParameterSet& other, const std::string& prefix) {
  for (const auto& b : other.blocks_) {
    ParamBlock& nb = add(prefix + b.name, b.shape);
    nb.values = b.values;
  }
}

ParameterSet ParameterSet::extract(const std::string& prefix) const {
  ParameterSet out;
  for (const auto& b : blocks_) {
    if (b.name.rfind(prefix, 0) == 0) {
      ParamBlock& nb = out.add(b.name.substr(prefix.size()), b.shape);
      nb.values = b.values;
    }
  }
  return out;
}

std::uint64_t ParameterSet::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& b : blocks_) {
    mix_bytes(b.name.data(), b.name.size());
    for (std::size_t d : b.shape) {
      std::uint64_t v = d;
      mix_bytes(&v, sizeof(v));
    }
    mix_bytes(b.values.data(), b.values.size() * sizeof(double));
  }
  return h;
}

void ParameterSet::scale(double factor) {
  for (auto& b : blocks_) {
    for (double& v : b.values) v *= factor;
  }
}

void ParameterSet::axpy(double factor, const ParameterSet& other) {
  if (other.blocks_.size() != blocks_.size())
    throw ConfigError("axpy: mismatched block count");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& dst = blocks_[i].values;
    const auto& src = other.blocks_[i].values;
    if (src.size() != dst.size())
      throw ConfigError("axpy: mismatched block " + blocks_[i].name);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += factor * src[j];
  }
}

namespace {

constexpr char kMagic[4] = {'A', 'M', 'I', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw IntegrityError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

double get_f64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw IntegrityError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void write_checkpoint(const ParameterSet& params, std::ostream& out) {
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  for (const auto& b : params.blocks()) {
    put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
    for (std::size_t d : b.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : b.values) put_f64(out, v);
  }
}

ParameterSet read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IntegrityError("not a checkpoint file (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion)
    throw IntegrityError("unsupported checkpoint version " +
                      std::to_string(version));
  ParameterSet params;
  while (true) {
    in.peek();
    if (in.eof()) break;
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = get_u32(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = get_u32(in);
    ParamBlock& b = params.add(name, std::move(shape));
    for (double& v : b.values) v = get_f64(in);
  }
  return params;
}

void save_checkpoint(const ParameterSet& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  write_checkpoint(params, out);
  if (!out) throw ConfigError("checkpoint write failed: " + path);
}

ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint not found: " + path);
  return read_checkpoint(in);
}

}  // namespace ami::nn
