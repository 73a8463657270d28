#include "ami/attack/oppmodel.hpp"

#include <algorithm>
#include <cmath>

#include "ami/rl/ppo.hpp"
#include "ami/rng.hpp"

namespace ami::attack {
namespace {

constexpr double kLogStdLo = -6.0;
constexpr double kLogStdHi = 3.0;

/// Split a continuous head output into a clamped Gaussian. Gradients are
/// masked at the clamp rails by the caller.
nn::ActionDistribution gaussian_from_head(const Vec& out, std::size_t dim) {
  Vec mean(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(dim));
  Vec log_std(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    log_std[k] = std::clamp(out[dim + k], kLogStdLo, kLogStdHi);
  }
  return nn::ActionDistribution::gaussian(std::move(mean), std::move(log_std));
}

}  // namespace

OppModelConfig OppModelConfig::for_env(const env::PosgSpec& spec) {
  OppModelConfig cfg;
  cfg.state_dim = spec.state_dim;
  cfg.n_agents = spec.n_agents();
  cfg.n_victims = spec.n_victims;
  cfg.discrete = spec.discrete;
  cfg.num_actions = spec.num_actions;
  cfg.action_dim = spec.action_dim;
  return cfg;
}

void OppModelConfig::validate() const {
  if (state_dim == 0) throw ConfigError("opponent model needs a state dim");
  if (n_agents < 2 || n_victims == 0 || n_victims >= n_agents) {
    throw ConfigError("opponent model agent counts are inconsistent");
  }
  if (discrete ? num_actions < 2 : action_dim == 0) {
    throw ConfigError("opponent model action space is unspecified");
  }
  if (trunk_dims.empty()) throw ConfigError("opponent model needs a trunk");
  if (lr <= 0.0 || epochs == 0 || minibatch_num == 0 || max_grad_norm <= 0) {
    throw ConfigError("opponent model fit schedule is invalid");
  }
}

OpponentModel::OpponentModel(const OppModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  spec_.input_dim = cfg_.input_dim();
  spec_.trunk_dims = cfg_.trunk_dims;
  spec_.head_dims.assign(cfg_.n_victims, cfg_.head_out_dim());
  spec_.activation = cfg_.activation;
  auto eng = make_engine(seed, "oppmodel-init", 0);
  params_ = nn::init_multihead_params(spec_, eng, cfg_.head_gain);
  nn::AdamConfig acfg;
  acfg.lr = cfg_.lr;
  adam_ = nn::make_adam(params_, acfg);
}

Vec encode_state_actions(const Vec& state, const env::JointAction& actions,
                         bool discrete, std::size_t n_agents,
                         std::size_t num_actions, std::size_t action_dim) {
  Vec input = state;
  if (discrete) {
    if (actions.discrete.size() != n_agents) {
      throw ConfigError("joint action arity mismatch");
    }
    input.reserve(state.size() + n_agents * num_actions);
    for (std::size_t a = 0; a < n_agents; ++a) {
      if (actions.discrete[a] >= num_actions) {
        throw ProtocolError("action id out of range");
      }
      Vec onehot(num_actions, 0.0);
      onehot[actions.discrete[a]] = 1.0;
      input.insert(input.end(), onehot.begin(), onehot.end());
    }
  } else {
    if (actions.continuous.size() != n_agents) {
      throw ConfigError("joint action arity mismatch");
    }
    input.reserve(state.size() + n_agents * action_dim);
    for (std::size_t a = 0; a < n_agents; ++a) {
      if (actions.continuous[a].size() != action_dim) {
        throw ConfigError("continuous action dim mismatch");
      }
      input.insert(input.end(), actions.continuous[a].begin(),
                   actions.continuous[a].end());
    }
  }
  return input;
}

Vec OpponentModel::encode(const Vec& state,
                          const env::JointAction& actions) const {
  if (state.size() != cfg_.state_dim) {
    throw ConfigError("opponent model state dim mismatch");
  }
  return encode_state_actions(state, actions, cfg_.discrete, cfg_.n_agents,
                              cfg_.num_actions, cfg_.action_dim);
}

std::vector<nn::ActionDistribution> OpponentModel::predict_all(
    const Vec& input) const {
  const auto outs = nn::multihead_forward(spec_, params_, input, nullptr);
  std::vector<nn::ActionDistribution> dists;
  dists.reserve(outs.size());
  for (const auto& out : outs) {
    if (cfg_.discrete) {
      dists.push_back(nn::ActionDistribution::discrete(nn::softmax(out)));
    } else {
      dists.push_back(gaussian_from_head(out, cfg_.action_dim));
    }
  }
  return dists;
}

nn::ActionDistribution OpponentModel::predict(const Vec& input,
                                              std::size_t victim) const {
  if (victim >= cfg_.n_victims) throw ProtocolError("victim index out of range");
  return predict_all(input)[victim];
}

double OpponentModel::nll(const std::vector<OppSample>& data) const {
  if (data.empty()) throw ConfigError("opponent model NLL on empty data");
  double total = 0.0;
  for (const auto& s : data) {
    const auto dists = predict_all(s.input);
    for (std::size_t i = 0; i < cfg_.n_victims; ++i) {
      total -= cfg_.discrete
                   ? nn::head_log_prob(dists[i], s.next_discrete.at(i))
                   : nn::head_log_prob(dists[i], s.next_continuous.at(i));
    }
  }
  return total / (static_cast<double>(data.size()) *
                  static_cast<double>(cfg_.n_victims));
}

double OpponentModel::fit(const std::vector<OppSample>& data,
                          std::mt19937_64& rng) {
  if (data.empty()) throw ConfigError("opponent model fit on empty data");
  const double inv_heads = 1.0 / static_cast<double>(cfg_.n_victims);
  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const auto chunks =
        rl::minibatch_indices(data.size(), cfg_.minibatch_num, rng);
    for (const auto& idx : chunks) {
      nn::ParameterSet grads = params_.zeros_like();
      const double inv_n = 1.0 / static_cast<double>(idx.size());
      for (const std::size_t si : idx) {
        const OppSample& s = data[si];
        nn::MultiHeadCache cache;
        const auto outs = nn::multihead_forward(spec_, params_, s.input,
                                                &cache);
        std::vector<Vec> head_grads(cfg_.n_victims);
        for (std::size_t i = 0; i < cfg_.n_victims; ++i) {
          const double coef = inv_n * inv_heads;
          if (cfg_.discrete) {
            // d(-log p[a]) / d logits = probs - onehot(a)
            Vec g = nn::softmax(outs[i]);
            g[s.next_discrete.at(i)] -= 1.0;
            for (double& v : g) v *= coef;
            head_grads[i] = std::move(g);
          } else {
            const auto dist = gaussian_from_head(outs[i], cfg_.action_dim);
            const Vec& a = s.next_continuous.at(i);
            if (a.size() != cfg_.action_dim) {
              throw ConfigError("opponent model target dim mismatch");
            }
            Vec g(2 * cfg_.action_dim, 0.0);
            for (std::size_t k = 0; k < cfg_.action_dim; ++k) {
              const double sigma = std::exp(dist.log_std[k]);
              const double z = (a[k] - dist.mean[k]) / sigma;
              g[k] = coef * (-z / sigma);
              // Clamped log-stds sit on a flat rail: no gradient there.
              const double raw = outs[i][cfg_.action_dim + k];
              g[cfg_.action_dim + k] =
                  (raw > kLogStdLo && raw < kLogStdHi) ? coef * (1.0 - z * z)
                                                       : 0.0;
            }
            head_grads[i] = std::move(g);
          }
        }
        nn::multihead_backward(spec_, params_, cache, head_grads, grads);
      }
      nn::gradient_clip(grads, cfg_.max_grad_norm);
      nn::adam_step(params_, grads, adam_);
    }
  }
  return nll(data);
}

std::vector<nn::ActionDistribution> counterfactual_expectation(
    const OpponentModel& model, const Vec& state,
    const env::JointAction& actions, std::size_t adversary_index,
    const nn::ActionDistribution& adv_policy, std::size_t mc_samples,
    std::mt19937_64* rng) {
  const auto& cfg = model.config();
  if (adversary_index >= cfg.n_agents) {
    throw ProtocolError("adversary index out of range");
  }
  const std::size_t n_victims = cfg.n_victims;

  if (adv_policy.kind == nn::ActionDistribution::Kind::kDiscrete) {
    // Exact marginalization over the adversary's action set.
    std::vector<nn::ActionDistribution> mix(n_victims);
    for (std::size_t i = 0; i < n_victims; ++i) {
      mix[i].kind = nn::ActionDistribution::Kind::kDiscrete;
      mix[i].probs.assign(cfg.num_actions, 0.0);
    }
    env::JointAction cf = actions;
    for (std::size_t k = 0; k < adv_policy.probs.size(); ++k) {
      const double q = adv_policy.probs[k];
      if (q <= 0.0) continue;
      cf.discrete[adversary_index] = k;
      const auto preds = model.predict_all(model.encode(state, cf));
      for (std::size_t i = 0; i < n_victims; ++i) {
        for (std::size_t a = 0; a < cfg.num_actions; ++a) {
          mix[i].probs[a] += q * preds[i].probs[a];
        }
      }
    }
    return mix;
  }

  if (rng == nullptr) {
    throw ProtocolError(
        "continuous counterfactual needs an engine for policy draws");
  }
  if (mc_samples == 0) throw ConfigError("mc_samples must be at least 1");
  // Monte Carlo over policy draws; Gaussian heads are moment-matched via the
  // law of total variance, discrete heads averaged directly.
  std::vector<Vec> mean_sum(n_victims), sq_sum(n_victims), prob_sum(n_victims);
  for (std::size_t m = 0; m < mc_samples; ++m) {
    env::JointAction cf = actions;
    cf.continuous[adversary_index] = nn::sample_gaussian(adv_policy, *rng);
    const auto preds = model.predict_all(model.encode(state, cf));
    for (std::size_t i = 0; i < n_victims; ++i) {
      if (preds[i].kind == nn::ActionDistribution::Kind::kDiscrete) {
        if (prob_sum[i].empty()) prob_sum[i].assign(preds[i].probs.size(), 0.0);
        for (std::size_t a = 0; a < preds[i].probs.size(); ++a) {
          prob_sum[i][a] += preds[i].probs[a];
        }
        continue;
      }
      const std::size_t dim = preds[i].mean.size();
      if (mean_sum[i].empty()) {
        mean_sum[i].assign(dim, 0.0);
        sq_sum[i].assign(dim, 0.0);
      }
      for (std::size_t k = 0; k < dim; ++k) {
        const double mu = preds[i].mean[k];
        const double var = std::exp(2.0 * preds[i].log_std[k]);
        mean_sum[i][k] += mu;
        sq_sum[i][k] += var + mu * mu;
      }
    }
  }
  const double inv_m = 1.0 / static_cast<double>(mc_samples);
  std::vector<nn::ActionDistribution> mix(n_victims);
  for (std::size_t i = 0; i < n_victims; ++i) {
    if (!prob_sum[i].empty()) {
      for (double& p : prob_sum[i]) p *= inv_m;
      mix[i] = nn::ActionDistribution::discrete(std::move(prob_sum[i]));
      continue;
    }
    Vec mean(mean_sum[i].size()), log_std(mean_sum[i].size());
    for (std::size_t k = 0; k < mean.size(); ++k) {
      mean[k] = mean_sum[i][k] * inv_m;
      const double var =
          std::max(sq_sum[i][k] * inv_m - mean[k] * mean[k], 1e-12);
      log_std[k] = 0.5 * std::log(var);
    }
    mix[i] = nn::ActionDistribution::gaussian(std::move(mean),
                                              std::move(log_std));
  }
  return mix;
}

}  // namespace ami::attack
