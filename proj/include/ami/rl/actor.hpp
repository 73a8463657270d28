#pragma once

#include <random>

#include "ami/common.hpp"
#include "ami/nn/heads.hpp"
#include "ami/nn/mlp.hpp"
#include "ami/nn/params.hpp"

namespace ami::rl {

/// Stochastic policy head on top of an MLP trunk: categorical logits for
/// discrete control, a state-independent log-std Gaussian for continuous
/// control (block "log_std"; stds start at std_y_coef / std_x_coef).
struct ActorSpec {
  nn::MLPSpec net;
  bool discrete = true;
  double std_y_coef = 0.5;
  double std_x_coef = 1.0;

  void validate() const;
  double init_log_std() const;
};

nn::ParameterSet init_actor_params(const ActorSpec& spec, std::mt19937_64& rng,
                               double output_gain = 0.01);

nn::ActionDistribution actor_forward(const ActorSpec& spec,
                                     const nn::ParameterSet& params,
                                     const Vec& input,
                                     nn::MlpCache* cache = nullptr);

/// Gradient contributions in distribution space for one sample. For discrete
/// actors fill d_logits; for continuous fill d_mean and d_log_std. Missing
/// (empty) vectors mean zero.
struct DistGrad {
  Vec d_logits;
  Vec d_mean;
  Vec d_log_std;
};

/// Accumulates d(loss)/d(params) into `grads` given the distribution-space
/// gradient of the loss for the cached forward pass.
void actor_backward(const ActorSpec& spec, const nn::ParameterSet& params,
                    const nn::MlpCache& cache, const DistGrad& dgrad,
                    nn::ParameterSet& grads);

/// d log pi(a) / d logits = onehot(a) - probs.
Vec grad_log_prob_logits(const nn::ActionDistribution& dist,
                         std::size_t action);
/// d H / d logits_k = -p_k (log p_k + H).
Vec grad_entropy_logits(const nn::ActionDistribution& dist);
/// d log pi(a) / d mean and d log pi(a) / d log_std for a diagonal Gaussian.
void grad_log_prob_gaussian(const nn::ActionDistribution& dist,
                            const Vec& action, Vec& d_mean, Vec& d_log_std);

}  // namespace ami::rl
