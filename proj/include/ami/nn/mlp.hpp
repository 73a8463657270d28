#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ami/common.hpp"
#include "ami/nn/params.hpp"

namespace ami::nn {

enum class Activation { kRelu, kTanh };

/// Shape of a fully-connected network: input -> hidden... -> output, with
/// the activation applied after every layer except the last.
struct MLPSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  Activation activation = Activation::kRelu;

  std::size_t num_layers() const { return hidden_dims.size() + 1; }
  std::size_t layer_in(std::size_t l) const {
    return l == 0 ? input_dim : hidden_dims[l - 1];
  }
  std::size_t layer_out(std::size_t l) const {
    return l == hidden_dims.size() ? output_dim : hidden_dims[l];
  }
  /// Throws ConfigError unless all dims >= 1 and hidden_dims is non-empty.
  void validate() const;
};

/// Block names are "W0","b0","W1","b1",... with W stored row-major (out, in).
std::string weight_name(std::size_t layer);
std::string bias_name(std::size_t layer);

/// Orthogonal-style initialization: Gaussian draw orthonormalized per layer,
/// hidden layers with unit gain, the output layer scaled by `output_gain`.
/// Biases start at zero.
ParameterSet init_mlp_params(const MLPSpec& spec, std::mt19937_64& rng,
                             double output_gain = 0.01);

/// Fill an out x in matrix with an orthogonal-style draw scaled by gain.
void orthogonal_fill(Vec& w, std::size_t rows, std::size_t cols, double gain,
                     std::mt19937_64& rng);

/// Per-layer activations kept by the cached forward pass so backward can
/// run without recomputation.
struct MlpCache {
  Vec input;
  std::vector<Vec> pre;   // pre-activation per layer
  std::vector<Vec> post;  // post-activation per layer (last == pre of output)
};

Vec mlp_forward(const MLPSpec& spec, const ParameterSet& params,
                const Vec& input);

Vec mlp_forward_cached(const MLPSpec& spec, const ParameterSet& params,
                       const Vec& input, MlpCache& cache);

/// Reverse accumulation from d(loss)/d(output). Adds parameter gradients
/// into `grads` (same layout as params) and, when `input_grad` is non-null,
/// writes d(loss)/d(input) there. Throws NumericError naming the first
/// non-finite block.
void mlp_backward_cached(const MLPSpec& spec, const ParameterSet& params,
                         const MlpCache& cache, const Vec& output_grad,
                         ParameterSet& grads, Vec* input_grad = nullptr);

/// One-shot backward: runs forward internally, returns a fresh gradient set.
ParameterSet mlp_backward(const MLPSpec& spec, const ParameterSet& params,
                          const Vec& input, const Vec& output_grad);

}  // namespace ami::nn
