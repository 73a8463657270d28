#include "ami/rl/actor.hpp"

#include <algorithm>

#include <cmath>
#include <stdexcept>

namespace ami::rl {

void ActorSpec::validate() const {
  net.validate();
  if (std_y_coef <= 0.0 || std_x_coef <= 0.0) {
    throw ConfigError("actor std coefficients must be positive");
  }
}

double ActorSpec::init_log_std() const {
  return std::log(std_y_coef / std_x_coef);
}

nn::ParameterSet init_actor_params(const ActorSpec& spec, std::mt19937_64& rng,
                               double output_gain) {
  spec.validate();
  nn::ParameterSet params = nn::init_mlp_params(spec.net, rng, output_gain);
  if (!spec.discrete) {
    auto& blk = params.add("log_std", {spec.net.output_dim});
    std::fill(blk.values.begin(), blk.values.end(), spec.init_log_std());
  }
  return params;
}

nn::ActionDistribution actor_forward(const ActorSpec& spec,
                                     const nn::ParameterSet& params,
                                     const Vec& input, nn::MlpCache* cache) {
  Vec out = cache ? nn::mlp_forward_cached(spec.net, params, input, *cache)
                  : nn::mlp_forward(spec.net, params, input);
  if (spec.discrete) {
    return nn::ActionDistribution::discrete(nn::softmax(out));
  }
  return nn::ActionDistribution::gaussian(std::move(out),
                                          params.block("log_std").values);
}

void actor_backward(const ActorSpec& spec, const nn::ParameterSet& params,
                    const nn::MlpCache& cache, const DistGrad& dgrad,
                    nn::ParameterSet& grads) {
  if (spec.discrete) {
    if (dgrad.d_logits.size() != spec.net.output_dim) {
      throw ConfigError("actor_backward: d_logits size mismatch");
    }
    nn::mlp_backward_cached(spec.net, params, cache, dgrad.d_logits, grads);
    return;
  }
  if (!dgrad.d_mean.empty()) {
    if (dgrad.d_mean.size() != spec.net.output_dim) {
      throw ConfigError("actor_backward: d_mean size mismatch");
    }
    nn::mlp_backward_cached(spec.net, params, cache, dgrad.d_mean, grads);
  }
  if (!dgrad.d_log_std.empty()) {
    Vec& g = grads.block("log_std").values;
    if (dgrad.d_log_std.size() != g.size()) {
      throw ConfigError("actor_backward: d_log_std size mismatch");
    }
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += dgrad.d_log_std[k];
  }
}

Vec grad_log_prob_logits(const nn::ActionDistribution& dist,
                         std::size_t action) {
  if (dist.kind != nn::ActionDistribution::Kind::kDiscrete) {
    throw ConfigError("grad_log_prob_logits needs a discrete distribution");
  }
  if (action >= dist.probs.size()) {
    throw ProtocolError("action id out of range");
  }
  Vec g(dist.probs.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = -dist.probs[k];
  g[action] += 1.0;
  return g;
}

Vec grad_entropy_logits(const nn::ActionDistribution& dist) {
  if (dist.kind != nn::ActionDistribution::Kind::kDiscrete) {
    throw ConfigError("grad_entropy_logits needs a discrete distribution");
  }
  const double h = nn::head_entropy(dist);
  Vec g(dist.probs.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double p = dist.probs[k];
    if (p > 0.0) g[k] = -p * (std::log(p) + h);
  }
  return g;
}

void grad_log_prob_gaussian(const nn::ActionDistribution& dist,
                            const Vec& action, Vec& d_mean, Vec& d_log_std) {
  if (dist.kind != nn::ActionDistribution::Kind::kContinuous) {
    throw ConfigError("grad_log_prob_gaussian needs a Gaussian distribution");
  }
  if (action.size() != dist.mean.size()) {
    throw ConfigError("grad_log_prob_gaussian: action dim mismatch");
  }
  d_mean.assign(dist.mean.size(), 0.0);
  d_log_std.assign(dist.mean.size(), 0.0);
  for (std::size_t k = 0; k < dist.mean.size(); ++k) {
    const double sigma = std::exp(dist.log_std[k]);
    const double z = (action[k] - dist.mean[k]) / sigma;
    d_mean[k] = z / sigma;
    d_log_std[k] = z * z - 1.0;
  }
}

}  // namespace ami::rl
