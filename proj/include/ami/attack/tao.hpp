#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ami/common.hpp"
#include "ami/env/posg.hpp"
#include "ami/nn/adam.hpp"
#include "ami/nn/heads.hpp"
#include "ami/nn/mlp.hpp"
#include "ami/nn/multihead.hpp"

namespace ami::attack {

struct TaoConfig {
  std::size_t state_dim = 0;
  std::size_t n_agents = 0;
  std::size_t n_victims = 0;
  bool discrete = true;
  std::size_t num_actions = 0;
  std::size_t action_dim = 0;
  double action_low = 0.0;
  double action_high = 0.0;
  std::vector<std::size_t> trunk_dims{64};
  nn::Activation activation = nn::Activation::kRelu;
  double head_gain = 0.01;
  double init_std = 0.5;  // continuous target heads
  // Update schedule (persistent Adam across update() calls).
  double lr = 1e-3;
  double critic_lr = 1e-3;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double max_grad_norm = 10.0;
  std::size_t ppo_epochs = 4;
  std::size_t minibatch_num = 1;
  bool use_huber = true;
  double huber_delta = 10.0;

  static TaoConfig for_env(const env::PosgSpec& spec);
  std::size_t input_dim() const {
    return state_dim + n_agents * (discrete ? num_actions : action_dim);
  }
  void validate() const;
};

/// One proposed next action per victim plus its log density.
struct TaoTargets {
  std::vector<std::size_t> discrete;
  std::vector<Vec> continuous;
  Vec log_probs;
};

struct TaoSample {
  Vec input;  // encoded (state, joint action)
  TaoTargets targets;
  double advantage = 0.0;
  double ret = 0.0;
};

struct TaoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  std::uint64_t skipped_ratios = 0;
};

/// Targeted adversarial oracle: proposes the victim actions the adversary
/// would most like to induce, conditioned on (state, joint action). Trained
/// PPO-style on the adversary's environmental return, with the probability
/// ratio averaged over victims so one oracle serves the whole team.
class TargetedOracle {
 public:
  TargetedOracle(const TaoConfig& cfg, std::uint64_t seed);

  const TaoConfig& config() const { return cfg_; }

  std::vector<nn::ActionDistribution> target_dists(const Vec& input) const;
  /// Samples a target per victim; continuous draws are clamped to the action
  /// box and scored at the clamped point so stored densities stay coherent.
  TaoTargets sample_targets(const Vec& input, std::mt19937_64& rng) const;
  double value(const Vec& input) const;

  TaoStats update(const std::vector<TaoSample>& samples,
                  std::mt19937_64& rng);

  nn::ParameterSet& actor_params() { return actor_; }
  const nn::ParameterSet& actor_params() const { return actor_; }
  nn::ParameterSet& critic_params() { return critic_; }
  const nn::ParameterSet& critic_params() const { return critic_; }
  const nn::MLPSpec& critic_spec() const { return critic_spec_; }

 private:
  nn::ActionDistribution head_dist(const std::vector<Vec>& outs,
                                   std::size_t victim) const;

  TaoConfig cfg_;
  nn::MultiHeadSpec actor_spec_;
  nn::MLPSpec critic_spec_;
  nn::ParameterSet actor_;  // multihead blocks plus "log_std" when continuous
  nn::ParameterSet critic_;
  nn::AdamState actor_adam_;
  nn::AdamState critic_adam_;
};

}  // namespace ami::attack
