#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ami/common.hpp"
#include "ami/env/posg.hpp"
#include "ami/nn/adam.hpp"
#include "ami/nn/heads.hpp"
#include "ami/nn/multihead.hpp"
#include "ami/nn/params.hpp"

namespace ami::attack {

struct OppModelConfig {
  std::size_t state_dim = 0;
  std::size_t n_agents = 0;   // all action slots enter the input
  std::size_t n_victims = 0;  // predicted heads
  bool discrete = true;
  std::size_t num_actions = 0;
  std::size_t action_dim = 0;
  std::vector<std::size_t> trunk_dims{64};
  nn::Activation activation = nn::Activation::kRelu;
  double head_gain = 0.01;
  // Fitting schedule; the Adam state persists across fit() calls.
  double lr = 1e-3;
  std::size_t epochs = 4;
  std::size_t minibatch_num = 4;
  double max_grad_norm = 10.0;

  static OppModelConfig for_env(const env::PosgSpec& spec);
  std::size_t action_enc_dim() const {
    return discrete ? num_actions : action_dim;
  }
  std::size_t input_dim() const {
    return state_dim + n_agents * action_enc_dim();
  }
  // Continuous heads emit a mean and a log-std per action dim.
  std::size_t head_out_dim() const {
    return discrete ? num_actions : 2 * action_dim;
  }
  void validate() const;
};

/// state ++ one-hot (discrete) or raw (continuous) action per agent, the
/// shared conditioning vector of the opponent model and the target oracle.
Vec encode_state_actions(const Vec& state, const env::JointAction& actions,
                         bool discrete, std::size_t n_agents,
                         std::size_t num_actions, std::size_t action_dim);

/// One supervised pair: the encoded (state, joint action) at time t and each
/// victim's executed action at t+1.
struct OppSample {
  Vec input;
  std::vector<std::size_t> next_discrete;
  std::vector<Vec> next_continuous;
};

/// Learned victim model p(next victim action | state, joint action), one
/// head per victim over a shared trunk. Everything it consumes is observable
/// behavior, so it respects the black-box boundary by construction.
class OpponentModel {
 public:
  OpponentModel(const OppModelConfig& cfg, std::uint64_t seed);

  const OppModelConfig& config() const { return cfg_; }

  /// state ++ one-hot (discrete) or raw (continuous) action per agent.
  Vec encode(const Vec& state, const env::JointAction& actions) const;

  std::vector<nn::ActionDistribution> predict_all(const Vec& input) const;
  nn::ActionDistribution predict(const Vec& input, std::size_t victim) const;

  /// Minimizes the mean per-victim negative log likelihood over shuffled
  /// minibatches; returns the post-fit NLL on the same data.
  double fit(const std::vector<OppSample>& data, std::mt19937_64& rng);

  /// Mean per-victim NLL without touching the parameters.
  double nll(const std::vector<OppSample>& data) const;

  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

 private:
  OppModelConfig cfg_;
  nn::MultiHeadSpec spec_;
  nn::ParameterSet params_;
  nn::AdamState adam_;
};

/// Unilateral counterfactual filter: replaces the adversary's executed
/// action with its policy distribution and averages the model's victim
/// predictions. Discrete adversaries are marginalized exactly; continuous
/// ones by `mc_samples` policy draws (moment-matched for Gaussian heads),
/// which requires an engine.
std::vector<nn::ActionDistribution> counterfactual_expectation(
    const OpponentModel& model, const Vec& state,
    const env::JointAction& actions, std::size_t adversary_index,
    const nn::ActionDistribution& adv_policy, std::size_t mc_samples,
    std::mt19937_64* rng);

}  // namespace ami::attack
