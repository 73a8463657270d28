#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ami/common.hpp"

namespace ami::nn {

/// One named tensor block in a flat 64-bit parameter store.
struct ParamBlock {
  std::string name;
  std::vector<std::size_t> shape;
  Vec values;

  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }
};

/// Flat parameter store for every learned component (actors, critics,
/// opponent model, target oracle, detector). Block names are unique; layout
/// is the contract between forward/backward, the optimizer and checkpoints.
class ParameterSet {
 public:
  ParameterSet() = default;

  /// Adds a zero-initialized block. Throws ConfigError on duplicate names.
  ParamBlock& add(const std::string& name, std::vector<std::size_t> shape);

  bool has(const std::string& name) const;
  ParamBlock& block(const std::string& name);
  const ParamBlock& block(const std::string& name) const;

  std::vector<ParamBlock>& blocks() { return blocks_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  std::size_t total_size() const;

  /// True when every value in every block is finite.
  bool finite() const;

  /// Name of the first block containing a non-finite value, or "" if none.
  std::string first_non_finite_block() const;

  /// Same block names and shapes, all values zero. Gradient scratch.
  ParameterSet zeros_like() const;

  /// Merge blocks of `other` under `prefix` (e.g. "opp/"). Names must stay
  /// unique after prefixing.
  void adopt(const ParameterSet& other, const std::string& prefix);

  /// Split out the blocks whose names start with `prefix`, stripping it.
  ParameterSet extract(const std::string& prefix) const;

  /// Stable content hash of names, shapes and exact value bytes.
  std::uint64_t content_hash() const;

  void scale(double factor);
  void axpy(double factor, const ParameterSet& other);  // this += factor*other

 private:
  std::vector<ParamBlock> blocks_;
};

// Checkpoint container: magic "AMI1", format version (u32), then per block:
// name length (u32), name bytes, rank (u32), dims (u32 each), values as
// little-endian 64-bit floats. Blocks run until end of file. Round-trips are
// bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterSet& params, const std::string& path);
ParameterSet load_checkpoint(const std::string& path);

void write_checkpoint(const ParameterSet& params, std::ostream& out);
ParameterSet read_checkpoint(std::istream& in);

}  // namespace ami::nn
