#include "ami/nn/multihead.hpp"

#include <cmath>

namespace ami::nn {

void MultiHeadSpec::validate() const {
  if (input_dim < 1) throw ConfigError("multihead spec: input_dim must be >= 1");
  if (trunk_dims.empty()) throw ConfigError("multihead spec: empty trunk");
  if (head_dims.empty()) throw ConfigError("multihead spec: no heads");
  for (std::size_t d : trunk_dims) {
    if (d < 1) throw ConfigError("multihead spec: trunk dim must be >= 1");
  }
  for (std::size_t d : head_dims) {
    if (d < 1) throw ConfigError("multihead spec: head dim must be >= 1");
  }
}

namespace {
std::string trunk_w(std::size_t l) { return "trunk/W" + std::to_string(l); }
std::string trunk_b(std::size_t l) { return "trunk/b" + std::to_string(l); }
std::string head_w(std::size_t i) { return "head" + std::to_string(i) + "/W"; }
std::string head_b(std::size_t i) { return "head" + std::to_string(i) + "/b"; }
}  // namespace

ParameterSet init_multihead_params(const MultiHeadSpec& spec,
                                   std::mt19937_64& rng, double head_gain) {
  spec.validate();
  ParameterSet params;
  std::size_t in = spec.input_dim;
  for (std::size_t l = 0; l < spec.trunk_dims.size(); ++l) {
    const std::size_t out = spec.trunk_dims[l];
    ParamBlock& w = params.add(trunk_w(l), {out, in});
    orthogonal_fill(w.values, out, in, 1.0, rng);
    params.add(trunk_b(l), {out});
    in = out;
  }
  for (std::size_t i = 0; i < spec.head_dims.size(); ++i) {
    const std::size_t out = spec.head_dims[i];
    ParamBlock& w = params.add(head_w(i), {out, in});
    orthogonal_fill(w.values, out, in, head_gain, rng);
    params.add(head_b(i), {out});
  }
  return params;
}

std::vector<Vec> multihead_forward(const MultiHeadSpec& spec,
                                   const ParameterSet& params, const Vec& input,
                                   MultiHeadCache* cache) {
  spec.validate();
  if (input.size() != spec.input_dim)
    throw ConfigError("multihead forward: input length mismatch");
  MultiHeadCache local;
  MultiHeadCache& c = cache ? *cache : local;
  c.input = input;
  c.pre.assign(spec.trunk_dims.size(), {});
  c.post.assign(spec.trunk_dims.size(), {});
  const Vec* x = &c.input;
  for (std::size_t l = 0; l < spec.trunk_dims.size(); ++l) {
    const std::size_t in = x->size();
    const std::size_t out = spec.trunk_dims[l];
    const ParamBlock& w = params.block(trunk_w(l));
    const ParamBlock& b = params.block(trunk_b(l));
    Vec& pre = c.pre[l];
    pre.assign(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double s = b.values[r];
      const double* wr = &w.values[r * in];
      for (std::size_t k = 0; k < in; ++k) s += wr[k] * (*x)[k];
      pre[r] = s;
    }
    Vec& post = c.post[l];
    post.resize(out);
    if (spec.activation == Activation::kRelu) {
      for (std::size_t r = 0; r < out; ++r) post[r] = pre[r] > 0.0 ? pre[r] : 0.0;
    } else {
      for (std::size_t r = 0; r < out; ++r) post[r] = std::tanh(pre[r]);
    }
    x = &post;
  }
  const Vec& feat = c.post.back();
  std::vector<Vec> outs(spec.head_dims.size());
  for (std::size_t i = 0; i < spec.head_dims.size(); ++i) {
    const std::size_t out = spec.head_dims[i];
    const ParamBlock& w = params.block(head_w(i));
    const ParamBlock& b = params.block(head_b(i));
    outs[i].assign(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double s = b.values[r];
      const double* wr = &w.values[r * feat.size()];
      for (std::size_t k = 0; k < feat.size(); ++k) s += wr[k] * feat[k];
      outs[i][r] = s;
    }
  }
  return outs;
}

void multihead_backward(const MultiHeadSpec& spec, const ParameterSet& params,
                        const MultiHeadCache& cache,
                        const std::vector<Vec>& head_grads, ParameterSet& grads,
                        Vec* input_grad) {
  if (head_grads.size() != spec.head_dims.size())
    throw ConfigError("multihead backward: head grad count mismatch");
  const Vec& feat = cache.post.back();
  Vec dfeat(feat.size(), 0.0);
  for (std::size_t i = 0; i < spec.head_dims.size(); ++i) {
    if (head_grads[i].empty()) continue;
    if (head_grads[i].size() != spec.head_dims[i])
      throw ConfigError("multihead backward: head grad length mismatch");
    const ParamBlock& w = params.block(head_w(i));
    ParamBlock& gw = grads.block(head_w(i));
    ParamBlock& gb = grads.block(head_b(i));
    for (std::size_t r = 0; r < spec.head_dims[i]; ++r) {
      const double g = head_grads[i][r];
      gb.values[r] += g;
      const double* wr = &w.values[r * feat.size()];
      double* gwr = &gw.values[r * feat.size()];
      for (std::size_t k = 0; k < feat.size(); ++k) {
        gwr[k] += g * feat[k];
        dfeat[k] += wr[k] * g;
      }
    }
  }
  // Backprop the trunk, activation derivative first at each layer.
  Vec g = std::move(dfeat);
  for (std::size_t l = spec.trunk_dims.size(); l-- > 0;) {
    const std::size_t out = spec.trunk_dims[l];
    if (spec.activation == Activation::kRelu) {
      for (std::size_t r = 0; r < out; ++r)
        if (cache.pre[l][r] <= 0.0) g[r] = 0.0;
    } else {
      for (std::size_t r = 0; r < out; ++r) {
        const double t = cache.post[l][r];
        g[r] *= 1.0 - t * t;
      }
    }
    const Vec& x = (l == 0) ? cache.input : cache.post[l - 1];
    const ParamBlock& w = params.block(trunk_w(l));
    ParamBlock& gw = grads.block(trunk_w(l));
    ParamBlock& gb = grads.block(trunk_b(l));
    Vec gx(x.size(), 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      gb.values[r] += g[r];
      const double* wr = &w.values[r * x.size()];
      double* gwr = &gw.values[r * x.size()];
      for (std::size_t k = 0; k < x.size(); ++k) {
        gwr[k] += g[r] * x[k];
        gx[k] += wr[k] * g[r];
      }
    }
    if (l == 0) {
      if (input_grad) *input_grad = std::move(gx);
    } else {
      g = std::move(gx);
    }
  }
  const std::string bad = grads.first_non_finite_block();
  if (!bad.empty())
    throw NumericError("multihead backward: non-finite gradient in block " +
                       bad);
}

}  // namespace ami::nn
