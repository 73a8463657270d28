#include "ami/attack/tao.hpp"

#include <algorithm>
#include <cmath>

#include "ami/rl/ppo.hpp"
#include "ami/rng.hpp"

namespace ami::attack {
namespace {

Vec normalized(const std::vector<TaoSample>& samples,
               const std::vector<std::size_t>& idx) {
  Vec adv(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    adv[k] = samples[idx[k]].advantage;
  }
  const double mu = mean_of(adv);
  const double sd = adv.size() > 1 ? stddev_of(adv) : 0.0;
  for (double& a : adv) a = sd > 1e-12 ? (a - mu) / sd : (a - mu);
  return adv;
}

}  // namespace

TaoConfig TaoConfig::for_env(const env::PosgSpec& spec) {
  TaoConfig cfg;
  cfg.state_dim = spec.state_dim;
  cfg.n_agents = spec.n_agents();
  cfg.n_victims = spec.n_victims;
  cfg.discrete = spec.discrete;
  cfg.num_actions = spec.num_actions;
  cfg.action_dim = spec.action_dim;
  cfg.action_low = spec.action_low;
  cfg.action_high = spec.action_high;
  return cfg;
}

void TaoConfig::validate() const {
  if (state_dim == 0) throw ConfigError("oracle needs a state dim");
  if (n_agents < 2 || n_victims == 0 || n_victims >= n_agents) {
    throw ConfigError("oracle agent counts are inconsistent");
  }
  if (discrete) {
    if (num_actions < 2) throw ConfigError("oracle needs >= 2 actions");
  } else {
    if (action_dim == 0) throw ConfigError("oracle needs an action dim");
    if (!(action_high > action_low)) {
      throw ConfigError("oracle action box is empty");
    }
    if (init_std <= 0.0) throw ConfigError("oracle init std must be positive");
  }
  if (trunk_dims.empty()) throw ConfigError("oracle needs a trunk");
  if (lr <= 0.0 || critic_lr <= 0.0 || clip <= 0.0 || ppo_epochs == 0 ||
      minibatch_num == 0 || max_grad_norm <= 0.0) {
    throw ConfigError("oracle update schedule is invalid");
  }
}

TargetedOracle::TargetedOracle(const TaoConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  actor_spec_.input_dim = cfg_.input_dim();
  actor_spec_.trunk_dims = cfg_.trunk_dims;
  actor_spec_.head_dims.assign(cfg_.n_victims,
                               cfg_.discrete ? cfg_.num_actions
                                             : cfg_.action_dim);
  actor_spec_.activation = cfg_.activation;
  auto eng = make_engine(seed, "tao-actor-init", 0);
  actor_ = nn::init_multihead_params(actor_spec_, eng, cfg_.head_gain);
  if (!cfg_.discrete) {
    auto& blk = actor_.add("log_std", {cfg_.n_victims, cfg_.action_dim});
    std::fill(blk.values.begin(), blk.values.end(), std::log(cfg_.init_std));
  }

  critic_spec_.input_dim = cfg_.input_dim();
  critic_spec_.hidden_dims = cfg_.trunk_dims;
  critic_spec_.output_dim = 1;
  critic_spec_.activation = cfg_.activation;
  auto ceng = make_engine(seed, "tao-critic-init", 0);
  critic_ = nn::init_mlp_params(critic_spec_, ceng, 1.0);

  nn::AdamConfig acfg;
  acfg.lr = cfg_.lr;
  actor_adam_ = nn::make_adam(actor_, acfg);
  nn::AdamConfig ccfg;
  ccfg.lr = cfg_.critic_lr;
  critic_adam_ = nn::make_adam(critic_, ccfg);
}

nn::ActionDistribution TargetedOracle::head_dist(const std::vector<Vec>& outs,
                                                 std::size_t victim) const {
  if (cfg_.discrete) {
    return nn::ActionDistribution::discrete(nn::softmax(outs[victim]));
  }
  const auto& ls = actor_.block("log_std").values;
  Vec log_std(ls.begin() + static_cast<std::ptrdiff_t>(victim * cfg_.action_dim),
              ls.begin() +
                  static_cast<std::ptrdiff_t>((victim + 1) * cfg_.action_dim));
  return nn::ActionDistribution::gaussian(outs[victim], std::move(log_std));
}

std::vector<nn::ActionDistribution> TargetedOracle::target_dists(
    const Vec& input) const {
  const auto outs = nn::multihead_forward(actor_spec_, actor_, input, nullptr);
  std::vector<nn::ActionDistribution> dists;
  dists.reserve(cfg_.n_victims);
  for (std::size_t i = 0; i < cfg_.n_victims; ++i) {
    dists.push_back(head_dist(outs, i));
  }
  return dists;
}

TaoTargets TargetedOracle::sample_targets(const Vec& input,
                                          std::mt19937_64& rng) const {
  const auto dists = target_dists(input);
  TaoTargets out;
  out.log_probs.reserve(cfg_.n_victims);
  for (std::size_t i = 0; i < cfg_.n_victims; ++i) {
    if (cfg_.discrete) {
      const std::size_t a = nn::sample_discrete(dists[i], rng);
      out.discrete.push_back(a);
      out.log_probs.push_back(nn::head_log_prob(dists[i], a));
    } else {
      Vec a = nn::sample_gaussian(dists[i], rng);
      for (double& v : a) v = std::clamp(v, cfg_.action_low, cfg_.action_high);
      out.log_probs.push_back(nn::head_log_prob(dists[i], a));
      out.continuous.push_back(std::move(a));
    }
  }
  return out;
}

double TargetedOracle::value(const Vec& input) const {
  return nn::mlp_forward(critic_spec_, critic_, input)[0];
}

TaoStats TargetedOracle::update(const std::vector<TaoSample>& samples,
                                std::mt19937_64& rng) {
  if (samples.empty()) throw ConfigError("oracle update on empty batch");
  TaoStats stats;
  const std::size_t n_victims = cfg_.n_victims;
  const double inv_heads = 1.0 / static_cast<double>(n_victims);
  for (std::size_t epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
    const auto chunks =
        rl::minibatch_indices(samples.size(), cfg_.minibatch_num, rng);
    double epoch_policy = 0.0, epoch_entropy = 0.0;
    std::size_t epoch_count = 0;
    for (const auto& idx : chunks) {
      const Vec adv = normalized(samples, idx);
      nn::ParameterSet grads = actor_.zeros_like();
      const double inv_n = 1.0 / static_cast<double>(idx.size());
      double mb_policy = 0.0, mb_entropy = 0.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const TaoSample& s = samples[idx[k]];
        const double a_norm = adv[k];
        nn::MultiHeadCache cache;
        const auto outs =
            nn::multihead_forward(actor_spec_, actor_, s.input, &cache);
        Vec ratios(n_victims);
        double rbar = 0.0;
        bool bad = false;
        std::vector<nn::ActionDistribution> dists(n_victims);
        for (std::size_t i = 0; i < n_victims; ++i) {
          dists[i] = head_dist(outs, i);
          const double logp =
              cfg_.discrete
                  ? nn::head_log_prob(dists[i], s.targets.discrete.at(i))
                  : nn::head_log_prob(dists[i], s.targets.continuous.at(i));
          ratios[i] = std::exp(logp - s.targets.log_probs.at(i));
          if (!std::isfinite(ratios[i])) bad = true;
          rbar += ratios[i] * inv_heads;
        }
        if (bad) {
          ++stats.skipped_ratios;
          continue;
        }
        // Probability ratio averaged over the victim heads: one oracle,
        // one trust region for the whole team.
        const double clipped = std::clamp(rbar, 1.0 - cfg_.clip,
                                          1.0 + cfg_.clip);
        const double surr1 = rbar * a_norm;
        const double surr2 = clipped * a_norm;
        mb_policy += -std::min(surr1, surr2);
        const double dobj_drbar = surr1 <= surr2 ? a_norm : 0.0;
        std::vector<Vec> head_grads(n_victims);
        auto* log_std_grad =
            cfg_.discrete ? nullptr : &grads.block("log_std").values;
        for (std::size_t i = 0; i < n_victims; ++i) {
          const double h = nn::head_entropy(dists[i]);
          mb_entropy += h * inv_heads;
          // d rbar / d logp_i = ratio_i / n
          const double dloss_dlogp =
              -dobj_drbar * ratios[i] * inv_heads * inv_n;
          const double ent_coef = cfg_.entropy_coef * inv_heads * inv_n;
          if (cfg_.discrete) {
            const auto& p = dists[i].probs;
            Vec g(p.size());
            const std::size_t tgt = s.targets.discrete[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
              const double dlogp = (j == tgt ? 1.0 : 0.0) - p[j];
              const double dh =
                  p[j] > 0.0 ? -p[j] * (std::log(p[j]) + h) : 0.0;
              g[j] = dloss_dlogp * dlogp - ent_coef * dh;
            }
            head_grads[i] = std::move(g);
          } else {
            Vec g(cfg_.action_dim);
            for (std::size_t d = 0; d < cfg_.action_dim; ++d) {
              const double sigma = std::exp(dists[i].log_std[d]);
              const double z =
                  (s.targets.continuous[i][d] - dists[i].mean[d]) / sigma;
              g[d] = dloss_dlogp * (z / sigma);
              (*log_std_grad)[i * cfg_.action_dim + d] +=
                  dloss_dlogp * (z * z - 1.0) - ent_coef;
            }
            head_grads[i] = std::move(g);
          }
        }
        nn::multihead_backward(actor_spec_, actor_, cache, head_grads, grads);
      }
      nn::gradient_clip(grads, cfg_.max_grad_norm);
      nn::adam_step(actor_, grads, actor_adam_);
      epoch_policy += mb_policy * inv_n;
      epoch_entropy += mb_entropy * inv_n;
      ++epoch_count;
    }
    if (epoch_count > 0 && epoch + 1 == cfg_.ppo_epochs) {
      stats.policy_loss = epoch_policy / static_cast<double>(epoch_count);
      stats.entropy = epoch_entropy / static_cast<double>(epoch_count);
    }
  }

  rl::PpoConfig vcfg;
  vcfg.ppo_epochs = cfg_.ppo_epochs;
  vcfg.minibatch_num = cfg_.minibatch_num;
  vcfg.max_grad_norm = cfg_.max_grad_norm;
  vcfg.use_huber = cfg_.use_huber;
  vcfg.huber_delta = cfg_.huber_delta;
  std::vector<rl::PpoSample> vsamples;
  vsamples.reserve(samples.size());
  for (const auto& s : samples) {
    rl::PpoSample v;
    v.critic_input = s.input;
    v.ret = s.ret;
    vsamples.push_back(std::move(v));
  }
  stats.value_loss = rl::ppo_critic_update(critic_spec_, critic_, critic_adam_,
                                           vcfg, vsamples, rng);
  return stats;
}

}  // namespace ami::attack
