#pragma once

#include <random>
#include <string>
#include <vector>

#include "ami/common.hpp"
#include "ami/nn/mlp.hpp"
#include "ami/nn/params.hpp"

namespace ami::nn {

/// Shared trunk with one linear head per victim. The trunk applies the
/// activation after every layer (heads read a post-activation feature
/// vector); heads are plain linear maps.
struct MultiHeadSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> trunk_dims;  // at least one layer
  std::vector<std::size_t> head_dims;   // output width per head
  Activation activation = Activation::kRelu;

  void validate() const;
  std::size_t feature_dim() const { return trunk_dims.back(); }
};

/// Blocks: "trunk/W0","trunk/b0",... then "head<i>/W","head<i>/b".
ParameterSet init_multihead_params(const MultiHeadSpec& spec,
                                   std::mt19937_64& rng,
                                   double head_gain = 0.01);

struct MultiHeadCache {
  Vec input;
  std::vector<Vec> pre;   // trunk pre-activations
  std::vector<Vec> post;  // trunk post-activations
};

/// Evaluate every head; returns one output vector per head.
std::vector<Vec> multihead_forward(const MultiHeadSpec& spec,
                                   const ParameterSet& params,
                                   const Vec& input, MultiHeadCache* cache);

/// Reverse accumulation from per-head output gradients (empty vector =>
/// zero gradient for that head). Adds into `grads`.
void multihead_backward(const MultiHeadSpec& spec, const ParameterSet& params,
                        const MultiHeadCache& cache,
                        const std::vector<Vec>& head_grads, ParameterSet& grads,
                        Vec* input_grad = nullptr);

}  // namespace ami::nn
