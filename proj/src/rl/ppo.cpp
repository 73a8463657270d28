#include "ami/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ami/nn/heads.hpp"

namespace ami::rl {
namespace {

/// Centers and rescales advantages so each minibatch sees mean 0, std 1.
/// A near-constant batch is only centered; dividing by a vanishing std
/// would blow the surrogate up.
Vec normalized_advantages(const std::vector<PpoSample>& samples,
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

double huber_loss(double err, double delta) {
  const double a = std::abs(err);
  return a <= delta ? 0.5 * err * err : delta * (a - 0.5 * delta);
}

double huber_grad(double err, double delta) {
  return std::clamp(err, -delta, delta);
}

}  // namespace

void PpoConfig::validate() const {
  if (clip <= 0.0) throw ConfigError("ppo clip must be positive");
  if (ppo_epochs == 0) throw ConfigError("ppo_epochs must be at least 1");
  if (minibatch_num == 0) throw ConfigError("minibatch_num must be at least 1");
  if (max_grad_norm <= 0.0) throw ConfigError("max_grad_norm must be positive");
  if (use_huber && huber_delta <= 0.0) {
    throw ConfigError("huber_delta must be positive");
  }
}

std::vector<std::vector<std::size_t>> minibatch_indices(
    std::size_t n, std::size_t minibatch_num, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> chunks;
  for (std::size_t b = 0; b < minibatch_num; ++b) {
    const std::size_t lo = b * n / minibatch_num;
    const std::size_t hi = (b + 1) * n / minibatch_num;
    if (hi > lo) {
      chunks.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                          perm.begin() + static_cast<std::ptrdiff_t>(hi));
    }
  }
  return chunks;
}

PpoStats ppo_actor_update(const ActorSpec& spec, nn::ParameterSet& params,
                          nn::AdamState& adam, const PpoConfig& cfg,
                          const std::vector<PpoSample>& samples,
                          std::mt19937_64& rng) {
  cfg.validate();
  spec.validate();
  if (samples.empty()) throw ConfigError("ppo_actor_update on empty batch");
  PpoStats stats;
  for (std::size_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    const auto chunks = minibatch_indices(samples.size(), cfg.minibatch_num,
                                          rng);
    double epoch_policy = 0.0, epoch_entropy = 0.0, epoch_clip = 0.0;
    std::size_t epoch_count = 0;
    for (const auto& idx : chunks) {
      const Vec adv = cfg.normalize_advantages
                          ? normalized_advantages(samples, idx)
                          : Vec{};
      nn::ParameterSet grads = params.zeros_like();
      const double inv_n = 1.0 / static_cast<double>(idx.size());
      double mb_policy = 0.0, mb_entropy = 0.0;
      std::size_t mb_clipped = 0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const PpoSample& s = samples[idx[k]];
        const double a = cfg.normalize_advantages ? adv[k] : s.advantage;
        nn::MlpCache cache;
        const auto dist = actor_forward(spec, params, s.input, &cache);
        const double logp = spec.discrete
                                ? nn::head_log_prob(dist, s.action_d)
                                : nn::head_log_prob(dist, s.action_c);
        const double ratio = std::exp(logp - s.old_log_prob);
        if (!std::isfinite(ratio)) {
          ++stats.skipped_ratios;
          continue;
        }
        const double clipped =
            std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
        const double surr1 = ratio * a;
        const double surr2 = clipped * a;
        mb_policy += -std::min(surr1, surr2);
        if (std::abs(ratio - 1.0) > cfg.clip) ++mb_clipped;
        // d min(surr1, surr2) / d logp: the clipped branch is flat in logp,
        // so the gradient vanishes whenever the clip is binding and tighter.
        const double dobj_dlogp = surr1 <= surr2 ? ratio * a : 0.0;
        const double dloss_dlogp = -dobj_dlogp * inv_n;
        const double h = nn::head_entropy(dist);
        mb_entropy += h;
        DistGrad dg;
        if (spec.discrete) {
          dg.d_logits = grad_log_prob_logits(dist, s.action_d);
          const Vec dh = grad_entropy_logits(dist);
          for (std::size_t j = 0; j < dg.d_logits.size(); ++j) {
            dg.d_logits[j] = dloss_dlogp * dg.d_logits[j] -
                             cfg.entropy_coef * inv_n * dh[j];
          }
        } else {
          grad_log_prob_gaussian(dist, s.action_c, dg.d_mean, dg.d_log_std);
          for (double& v : dg.d_mean) v *= dloss_dlogp;
          // dH/dlog_std_k = 1 for a diagonal Gaussian; the mean plays no
          // part in the entropy.
          for (double& v : dg.d_log_std) {
            v = dloss_dlogp * v - cfg.entropy_coef * inv_n;
          }
        }
        actor_backward(spec, params, cache, dg, grads);
      }
      stats.grad_norm = nn::gradient_clip(grads, cfg.max_grad_norm);
      nn::adam_step(params, grads, adam);
      ++stats.minibatch_updates;
      epoch_policy += mb_policy * inv_n;
      epoch_entropy += mb_entropy * inv_n;
      epoch_clip += static_cast<double>(mb_clipped) * inv_n;
      ++epoch_count;
    }
    if (epoch_count > 0 && epoch + 1 == cfg.ppo_epochs) {
      stats.policy_loss = epoch_policy / static_cast<double>(epoch_count);
      stats.entropy = epoch_entropy / static_cast<double>(epoch_count);
      stats.clip_fraction = epoch_clip / static_cast<double>(epoch_count);
    }
  }
  return stats;
}

double ppo_critic_update(const nn::MLPSpec& spec, nn::ParameterSet& params,
                         nn::AdamState& adam, const PpoConfig& cfg,
                         const std::vector<PpoSample>& samples,
                         std::mt19937_64& rng, PpoStats* stats) {
  cfg.validate();
  spec.validate();
  if (spec.output_dim != 1) {
    throw ConfigError("critic network must have a scalar output");
  }
  if (samples.empty()) throw ConfigError("ppo_critic_update on empty batch");
  double last_epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    const auto chunks = minibatch_indices(samples.size(), cfg.minibatch_num,
                                          rng);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (const auto& idx : chunks) {
      nn::ParameterSet grads = params.zeros_like();
      const double inv_n = 1.0 / static_cast<double>(idx.size());
      double mb_loss = 0.0;
      for (const std::size_t i : idx) {
        const PpoSample& s = samples[i];
        nn::MlpCache cache;
        const Vec out = nn::mlp_forward_cached(spec, params, s.critic_input,
                                               cache);
        const double err = out[0] - s.ret;
        mb_loss += cfg.use_huber ? huber_loss(err, cfg.huber_delta)
                                 : 0.5 * err * err;
        const double derr = cfg.use_huber ? huber_grad(err, cfg.huber_delta)
                                          : err;
        nn::mlp_backward_cached(spec, params, cache, {derr * inv_n}, grads);
      }
      nn::gradient_clip(grads, cfg.max_grad_norm);
      nn::adam_step(params, grads, adam);
      epoch_loss += mb_loss * inv_n;
      ++epoch_count;
    }
    if (epoch_count > 0) {
      last_epoch_loss = epoch_loss / static_cast<double>(epoch_count);
    }
  }
  if (stats != nullptr) stats->value_loss = last_epoch_loss;
  return last_epoch_loss;
}

}  // namespace ami::rl
