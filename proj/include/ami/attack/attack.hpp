#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ami/attack/oppmodel.hpp"
#include "ami/attack/tao.hpp"
#include "ami/common.hpp"
#include "ami/env/posg.hpp"
#include "ami/influence/influence.hpp"
#include "ami/rl/actor.hpp"
#include "ami/rl/ppo.hpp"
#include "ami/rl/victim.hpp"
#include "ami/stats.hpp"

namespace ami::attack {

/// Attack variants. adv_policy is the pure adversarial-policy baseline and
/// is executed as ami with lambda forced to zero, which makes the reduction
/// exact by construction. bilateral adds the majority influence channel on
/// top of ami; untargeted drops the oracle and rewards victim-policy
/// uncertainty; mi_baseline uses the full sampled mutual information.
enum class AttackMethod {
  kAmi,
  kAdvPolicy,
  kBilateral,
  kUntargeted,
  kMiBaseline,
};

AttackMethod parse_method(std::string_view name);
std::string method_name(AttackMethod method);

/// Per-step influence quantities, all summed over victims. Entries are NaN
/// until filled; variant_influence rejects a variant whose required piece
/// is missing.
struct InfluencePieces {
  double distance_sum = nan_marker();    // d(filtered mixture, oracle target)
  double majority_sum = nan_marker();    // -H(prediction | executed actions)
  double minority_kl_sum = nan_marker(); // -KL(filtered mixture || uniform)
  double mi_sum = nan_marker();          // sampled mutual information

  static double nan_marker();
};

/// Selects the influence term a variant mixes into the reward; adv_policy
/// always yields 0. Throws IntegrityError when the required piece is NaN.
double variant_influence(AttackMethod method, const InfluencePieces& pieces);

struct AttackConfig {
  AttackMethod method = AttackMethod::kAmi;
  double lambda = 0.05;
  influence::DistanceMetric metric = influence::DistanceMetric::kL1;
  bool normalize_influence = true;
  std::size_t mc_samples = 8;  // counterfactual draws, continuous only
  std::size_t iterations = 50;
  std::size_t episodes_per_iter = 32;
  std::size_t eval_episodes = 20;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double divergence_limit = 1e8;
  // Adversary networks and update schedule.
  std::vector<std::size_t> hidden_dims{64};
  nn::Activation activation = nn::Activation::kRelu;
  double gain = 0.01;
  double std_y_coef = 0.5;
  double std_x_coef = 1.0;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  rl::PpoConfig ppo;
  // Learned attack components.
  OppModelConfig opp;
  TaoConfig tao;

  /// Published defaults per environment family: l1 metric, lambda 0.05 and
  /// 4 PPO epochs for discrete control; prob metric, lambda 0.003, 5 PPO
  /// epochs, Huber value loss and lr 5e-5/5e-3 for continuous control.
  static AttackConfig for_env(const env::PosgSpec& spec);
  void validate() const;
};

/// One metrics row per iteration. wallclock_s is reported separately from
/// the deterministic columns so metric files stay byte-reproducible.
struct AttackIterationRow {
  std::size_t iteration = 0;
  std::size_t env_steps = 0;
  double adv_reward_mean = 0.0;
  double adv_reward_ci95 = 0.0;
  double influence_mean = 0.0;
  double nll_opp_model = 0.0;
  double wallclock_s = 0.0;
};

/// Per-step reward composition trace kept for audit: the logged shaped
/// reward always satisfies r_ami = r_alpha + lambda * influence_used.
struct StepLog {
  std::size_t iteration = 0;
  double r_alpha = 0.0;
  double r_team = 0.0;
  Vec distances;  // per victim, in the configured metric
  double influence_raw = 0.0;
  double influence_used = 0.0;
  double r_ami = 0.0;
};

struct AttackResult {
  std::vector<AttackIterationRow> metrics;
  std::uint64_t env_steps = 0;
  bool aborted = false;
  std::string abort_reason;
};

struct EvalReport {
  stats::SummaryStats adv_reward;
  stats::SummaryStats team_reward;
  Vec adv_episode_rewards;
  Vec team_episode_rewards;
};

/// Adversary-slot controls for comparison runs: the cooperatively trained
/// policy (no attack) or a uniform-random agent.
enum class ControlSlot { kCooperative, kRandom };

/// Streaming mean/std tracker for influence normalization. Observation and
/// normalization are separate passes so a whole batch shares one statistic.
class RunningNorm {
 public:
  void observe(double x);
  double normalize(double x) const;
  std::size_t count() const { return n_; }
  double mean() const;
  double stddev() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// The attack training loop: rollout with frozen victims, fit the opponent
/// model, update the oracle, shape the adversary reward with the variant's
/// influence term, update the adversary. Victim access inside run() is
/// behavioral only, which AttackScope verifies at the end of every run.
class AttackRunner {
 public:
  /// Victims must be frozen. All learned components initialize from labeled
  /// streams of `seed`.
  AttackRunner(const AttackConfig& cfg, const env::PosgSpec& spec,
               const rl::VictimPolicySet& victims, std::uint64_t seed);

  AttackResult run(env::Environment& env);

  /// Deterministic-adversary evaluation over seeded episodes.
  EvalReport evaluate(env::Environment& env, std::size_t episodes,
                      std::uint64_t seed) const;

  const AttackConfig& config() const { return cfg_; }
  const rl::ActorSpec& adversary_spec() const { return adv_spec_; }
  const std::vector<std::string>& events() const { return events_; }
  const std::vector<StepLog>& step_logs() const { return step_logs_; }
  const nn::ParameterSet& adversary_actor() const { return adv_actor_; }
  const nn::ParameterSet& adversary_critic() const { return adv_critic_; }
  const OpponentModel& opponent_model() const { return opp_; }
  const TargetedOracle& oracle() const { return tao_; }
  const RunningNorm& influence_norm() const { return norm_; }

  /// Checkpoint of all five parameter sets under the prefixes adv-actor/,
  /// adv-critic/, opp/, tao-actor/, tao-critic/.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  struct Step;
  struct Episode;

  Episode collect_episode(env::Environment& env, std::uint64_t reset_seed,
                          std::mt19937_64& act_eng, std::mt19937_64& tgt_eng);
  void check_env(const env::Environment& env) const;

  AttackConfig cfg_;
  env::PosgSpec spec_;
  const rl::VictimPolicySet& victims_;
  std::uint64_t seed_;
  double lambda_;  // 0 when the method is adv_policy
  AttackMethod variant_;  // kAmi when the method is adv_policy
  rl::ActorSpec adv_spec_;
  nn::MLPSpec adv_critic_spec_;
  nn::ParameterSet adv_actor_;
  nn::ParameterSet adv_critic_;
  nn::AdamState adv_actor_adam_;
  nn::AdamState adv_critic_adam_;
  OpponentModel opp_;
  TargetedOracle tao_;
  RunningNorm norm_;
  std::vector<std::string> events_;
  std::vector<StepLog> step_logs_;
  std::uint64_t env_steps_ = 0;
  std::uint64_t iters_done_ = 0;  // keeps streams unique across run() calls
};

/// Evaluates an adversary-slot control: the cooperative team itself or a
/// uniform-random adversary, victims deterministic throughout.
EvalReport evaluate_control(env::Environment& env,
                            const rl::VictimPolicySet& victims,
                            ControlSlot slot, std::size_t episodes,
                            std::uint64_t seed);

/// Deterministic metrics columns:
/// iteration,env_steps,adv_reward_mean,adv_reward_ci95,influence_mean,
/// nll_opp_model.
void write_attack_csv(const std::vector<AttackIterationRow>& rows,
                      std::ostream& out);
/// Wallclock sidecar: iteration,wallclock_s.
void write_timing_csv(const std::vector<AttackIterationRow>& rows,
                      std::ostream& out);

}  // namespace ami::attack
