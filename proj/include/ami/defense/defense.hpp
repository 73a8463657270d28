#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ami/attack/attack.hpp"
#include "ami/common.hpp"
#include "ami/env/posg.hpp"
#include "ami/rl/actor.hpp"
#include "ami/rl/mappo.hpp"
#include "ami/rl/victim.hpp"

namespace ami::defense {

/// A frozen attacker policy detached from its runner: the actor shape plus
/// a parameter snapshot. Defense code only ever executes it.
struct AdversaryHandle {
  rl::ActorSpec spec;
  nn::ParameterSet params;

  /// Throws ConfigError unless the actor fits the environment's adversary
  /// slot (observation size, action space).
  void check(const env::PosgSpec& env_spec) const;

  /// Fills `ja` at `slot`: mode action without an engine, sampled with one.
  void act(const Vec& obs, std::mt19937_64* eng, env::JointAction& ja,
           std::size_t slot) const;
};

struct DualTrainConfig {
  /// Probability that an episode's adversary slot is taken over by the
  /// frozen attacker instead of the learning team. 0 disables takeovers
  /// entirely and reduces to plain cooperative training, transcript
  /// included; 1 means every episode is played under attack.
  double mix = 0.5;
  rl::TrainConfig train;

  void validate() const;
};

struct DualTrainResult {
  rl::TrainResult train;
  std::size_t adversarial_episodes = 0;
  std::size_t total_episodes = 0;
};

/// Adversarial training: cooperative MAPPO in which a `mix` fraction of
/// episodes (chosen per episode from a dedicated stream) host the frozen
/// attacker in the adversary slot. Takeover episodes contribute no actor
/// samples for that slot but still train the centralized critic. The
/// attacker may be null only when mix is 0.
DualTrainResult dual_train(env::Environment& env,
                           rl::VictimPolicySet& victims,
                           const AdversaryHandle* adversary,
                           const DualTrainConfig& cfg, std::uint64_t seed);

/// Deterministic evaluation with the frozen attacker occupying its slot;
/// victims act in mode. Reports both reward channels per episode.
attack::EvalReport evaluate_under_adversary(env::Environment& env,
                                            const rl::VictimPolicySet& victims,
                                            const AdversaryHandle& adversary,
                                            std::size_t episodes,
                                            std::uint64_t seed);

/// Presents the inner environment with victim slot `slot` and the standard
/// adversary slot exchanged, so attack code that always occupies the last
/// index can take over any position. State, rewards and termination pass
/// through unchanged; only per-agent indexing is permuted. Requires the
/// homogeneous agent spaces the project's environments declare.
class SlotSwapEnv : public env::Environment {
 public:
  SlotSwapEnv(env::Environment& inner, std::size_t slot);

  const env::PosgSpec& spec() const override { return inner_.spec(); }
  void reset(std::uint64_t seed) override { inner_.reset(seed); }
  env::StepRecord step(const env::JointAction& actions) override;
  Vec state() const override { return inner_.state(); }
  Vec observe(std::size_t agent) const override;
  bool done() const override { return inner_.done(); }
  std::size_t timestep() const override { return inner_.timestep(); }

 private:
  std::size_t map(std::size_t agent) const;

  env::Environment& inner_;
  std::size_t slot_;
};

/// One row per protocol evaluation: which position the attacker held, the
/// attack seed and the deterministic post-attack reward means.
struct ProtocolRow {
  std::string protocol;
  std::size_t slot = 0;
  std::uint64_t seed = 0;
  double adv_reward = 0.0;
  double team_reward = 0.0;
  bool attack_aborted = false;
};

/// re-ami: a fresh attacker (derived seed) is trained from scratch against
/// the frozen victims on the standard slot, then evaluated.
ProtocolRow run_re_ami(env::Environment& env,
                       const rl::VictimPolicySet& victims,
                       const attack::AttackConfig& cfg, std::uint64_t seed);

/// pos-ami: one fresh attacker per victim position via SlotSwapEnv.
std::vector<ProtocolRow> run_pos_ami(env::Environment& env,
                                     const rl::VictimPolicySet& victims,
                                     const attack::AttackConfig& cfg,
                                     std::uint64_t seed);

/// Header: protocol,slot,seed,adv_reward,team_reward,attack_aborted.
void write_protocol_csv(const std::vector<ProtocolRow>& rows,
                        std::ostream& out);

}  // namespace ami::defense
