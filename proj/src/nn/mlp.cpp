#include "ami/nn/mlp.hpp"

#include <algorithm>
#include <cmath>

namespace ami::nn {

void MLPSpec::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw ConfigError("mlp spec: dims must be >= 1");
  if (hidden_dims.empty())
    throw ConfigError("mlp spec: hidden_dims must be non-empty");
  for (std::size_t d : hidden_dims) {
    if (d < 1) throw ConfigError("mlp spec: hidden dim must be >= 1");
  }
}

std::string weight_name(std::size_t layer) {
  return "W" + std::to_string(layer);
}
std::string bias_name(std::size_t layer) { return "b" + std::to_string(layer); }

namespace {

double normal01(std::mt19937_64& rng) {
  // Box-Muller without the cached second value, so the engine is the only
  // state that matters for reproducibility.
  double u1, u2;
  do {
    u1 = (rng() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  u2 = (rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void apply_activation(Activation act, const Vec& pre, Vec& post) {
  post.resize(pre.size());
  if (act == Activation::kRelu) {
    for (std::size_t i = 0; i < pre.size(); ++i)
      post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < pre.size(); ++i) post[i] = std::tanh(pre[i]);
  }
}

}  // namespace

void orthogonal_fill(Vec& w, std::size_t rows, std::size_t cols, double gain,
                     std::mt19937_64& rng) {
  w.assign(rows * cols, 0.0);
  // Orthonormalize along the shorter side with modified Gram-Schmidt; a
  // Gaussian draw is full rank with probability one at these sizes.
  const bool by_rows = rows <= cols;
  const std::size_t nvec = by_rows ? rows : cols;
  const std::size_t dim = by_rows ? cols : rows;
  std::vector<Vec> basis(nvec, Vec(dim));
  for (auto& v : basis) {
    for (double& x : v) x = normal01(rng);
  }
  for (std::size_t i = 0; i < nvec; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double proj = dot(basis[i], basis[j]);
      for (std::size_t k = 0; k < dim; ++k) basis[i][k] -= proj * basis[j][k];
    }
    const double nrm = l2_norm(basis[i]);
    if (nrm < 1e-12) throw NumericError("orthogonal init: degenerate draw");
    for (double& x : basis[i]) x /= nrm;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      w[r * cols + c] = gain * (by_rows ? basis[r][c] : basis[c][r]);
    }
  }
}

ParameterSet init_mlp_params(const MLPSpec& spec, std::mt19937_64& rng,
                             double output_gain) {
  spec.validate();
  ParameterSet params;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_in(l);
    const std::size_t out = spec.layer_out(l);
    ParamBlock& w = params.add(weight_name(l), {out, in});
    const double gain = (l + 1 == spec.num_layers()) ? output_gain : 1.0;
    orthogonal_fill(w.values, out, in, gain, rng);
    params.add(bias_name(l), {out});
  }
  return params;
}

Vec mlp_forward(const MLPSpec& spec, const ParameterSet& params,
                const Vec& input) {
  MlpCache cache;
  return mlp_forward_cached(spec, params, input, cache);
}

Vec mlp_forward_cached(const MLPSpec& spec, const ParameterSet& params,
                       const Vec& input, MlpCache& cache) {
  spec.validate();
  if (input.size() != spec.input_dim)
    throw ConfigError("mlp forward: input length " +
                      std::to_string(input.size()) + " != input_dim " +
                      std::to_string(spec.input_dim));
  cache.input = input;
  cache.pre.assign(spec.num_layers(), {});
  cache.post.assign(spec.num_layers(), {});
  const Vec* x = &cache.input;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_in(l);
    const std::size_t out = spec.layer_out(l);
    const ParamBlock& w = params.block(weight_name(l));
    const ParamBlock& b = params.block(bias_name(l));
    if (w.values.size() != in * out || b.values.size() != out)
      throw ConfigError("mlp forward: params layout does not match spec at " +
                        weight_name(l));
    Vec& pre = cache.pre[l];
    pre.assign(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double s = b.values[r];
      const double* wr = &w.values[r * in];
      for (std::size_t c = 0; c < in; ++c) s += wr[c] * (*x)[c];
      pre[r] = s;
    }
    if (l + 1 == spec.num_layers()) {
      cache.post[l] = pre;  // no activation on the output layer
    } else {
      apply_activation(spec.activation, pre, cache.post[l]);
    }
    x = &cache.post[l];
  }
  return cache.post.back();
}

void mlp_backward_cached(const MLPSpec& spec, const ParameterSet& params,
                         const MlpCache& cache, const Vec& output_grad,
                         ParameterSet& grads, Vec* input_grad) {
  if (output_grad.size() != spec.output_dim)
    throw ConfigError("mlp backward: output_grad length mismatch");
  Vec g = output_grad;  // gradient w.r.t. current layer's pre-activation
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const std::size_t in = spec.layer_in(l);
    const std::size_t out = spec.layer_out(l);
    if (l + 1 != spec.num_layers()) {
      // fold in the activation derivative
      if (spec.activation == Activation::kRelu) {
        for (std::size_t r = 0; r < out; ++r)
          if (cache.pre[l][r] <= 0.0) g[r] = 0.0;
      } else {
        for (std::size_t r = 0; r < out; ++r) {
          const double t = cache.post[l][r];
          g[r] *= 1.0 - t * t;
        }
      }
    }
    const Vec& x = (l == 0) ? cache.input : cache.post[l - 1];
    ParamBlock& gw = grads.block(weight_name(l));
    ParamBlock& gb = grads.block(bias_name(l));
    for (std::size_t r = 0; r < out; ++r) {
      gb.values[r] += g[r];
      double* gwr = &gw.values[r * in];
      for (std::size_t c = 0; c < in; ++c) gwr[c] += g[r] * x[c];
    }
    if (l > 0 || input_grad != nullptr) {
      const ParamBlock& w = params.block(weight_name(l));
      Vec gx(in, 0.0);
      for (std::size_t r = 0; r < out; ++r) {
        const double* wr = &w.values[r * in];
        for (std::size_t c = 0; c < in; ++c) gx[c] += wr[c] * g[r];
      }
      if (l == 0) {
        *input_grad = std::move(gx);
      } else {
        g = std::move(gx);
      }
    }
  }
  const std::string bad = grads.first_non_finite_block();
  if (!bad.empty())
    throw NumericError("mlp backward: non-finite gradient in block " + bad);
}

ParameterSet mlp_backward(const MLPSpec& spec, const ParameterSet& params,
                          const Vec& input, const Vec& output_grad) {
  MlpCache cache;
  mlp_forward_cached(spec, params, input, cache);
  ParameterSet grads = params.zeros_like();
  mlp_backward_cached(spec, params, cache, output_grad, grads);
  return grads;
}

}  // namespace ami::nn
