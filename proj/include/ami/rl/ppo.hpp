#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ami/common.hpp"
#include "ami/nn/adam.hpp"
#include "ami/nn/mlp.hpp"
#include "ami/rl/actor.hpp"
#include "ami/rl/rollout.hpp"

namespace ami::rl {

struct PpoConfig {
  double clip = 0.2;
  double entropy_coef = 0.01;
  double max_grad_norm = 10.0;
  std::size_t ppo_epochs = 4;
  std::size_t minibatch_num = 1;
  bool use_huber = false;
  double huber_delta = 10.0;
  bool normalize_advantages = true;

  void validate() const;
};

struct PpoStats {
  double policy_loss = 0.0;    // -E[min(surr1, surr2)], last epoch average
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;  // share of samples with |ratio - 1| > clip
  double grad_norm = 0.0;      // pre-clip norm, last minibatch
  std::uint64_t skipped_ratios = 0;
  std::uint64_t minibatch_updates = 0;
};

/// Clipped-surrogate policy update with entropy bonus. Minimizes
/// -E[min(r A, clip(r) A)] - beta H over `ppo_epochs` passes of shuffled
/// minibatches. Advantages are normalized per minibatch. Samples whose
/// probability ratio is non-finite are skipped and counted, never trained on.
PpoStats ppo_actor_update(const ActorSpec& spec, nn::ParameterSet& params,
                          nn::AdamState& adam, const PpoConfig& cfg,
                          const std::vector<PpoSample>& samples,
                          std::mt19937_64& rng);

/// Value regression toward the stored returns, squared error or Huber.
/// Returns the average loss of the final epoch; stats accumulates value_loss.
double ppo_critic_update(const nn::MLPSpec& spec, nn::ParameterSet& params,
                         nn::AdamState& adam, const PpoConfig& cfg,
                         const std::vector<PpoSample>& samples,
                         std::mt19937_64& rng, PpoStats* stats = nullptr);

/// Shuffled minibatch index partition: `minibatch_num` chunks whose sizes
/// differ by at most one.
std::vector<std::vector<std::size_t>> minibatch_indices(
    std::size_t n, std::size_t minibatch_num, std::mt19937_64& rng);

}  // namespace ami::rl
