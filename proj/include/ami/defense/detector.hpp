#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ami/common.hpp"
#include "ami/defense/defense.hpp"
#include "ami/env/posg.hpp"
#include "ami/nn/gru.hpp"
#include "ami/rl/victim.hpp"

namespace ami::defense {

/// Which per-timestep observable the detector watches. All three are
/// available to the operator of the team, none require attacker internals.
enum class DetectorSignal { kObs, kState, kAction };

DetectorSignal parse_signal(std::string_view name);  // obs | state | action
std::string signal_name(DetectorSignal signal);
std::size_t signal_dim(const env::PosgSpec& spec, DetectorSignal signal);

/// Raw material for detector datasets: everything observable about one
/// episode, before any signal is selected.
struct RecordedEpisode {
  std::vector<Vec> states;  // pre-step global state
  std::vector<std::vector<Vec>> joint_obs;
  std::vector<env::JointAction> actions;
  double adv_reward = 0.0;
  double team_reward = 0.0;
};

/// Plays `episodes` deterministic episodes: the cooperative team when
/// `adversary` is null, otherwise the attacker in its slot. Reset seeds
/// derive from (`seed`, label, index).
std::vector<RecordedEpisode> record_episodes(
    env::Environment& env, const rl::VictimPolicySet& victims,
    const AdversaryHandle* adversary, std::size_t episodes,
    std::uint64_t seed);

/// One detector sample: the selected signal per timestep plus the episode
/// label (1 = attacked).
struct SignalEpisode {
  std::vector<Vec> features;
  unsigned char label = 0;
};

std::vector<SignalEpisode> extract_signal(
    const std::vector<RecordedEpisode>& episodes, const env::PosgSpec& spec,
    DetectorSignal signal, unsigned char label);

/// Permutes labels across episodes; the control that should destroy any
/// real signal and pull the AUC to chance.
void shuffle_labels(std::vector<SignalEpisode>& data, std::mt19937_64& rng);

struct DetectorConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 64;
  double lr = 1e-3;
  std::size_t epochs = 8;
  std::size_t minibatch_num = 8;  // episode minibatches per epoch
  double max_grad_norm = 10.0;

  static DetectorConfig for_signal(const env::PosgSpec& spec,
                                   DetectorSignal signal);
  void validate() const;
};

struct DetectorTrainStats {
  Vec epoch_loss;  // mean per-episode BCE, one entry per epoch
  double train_accuracy = 0.0;  // episode level, final-step score > 0.5
  std::vector<std::string> warnings;
};

/// Recurrent attack detector: a GRU over the chosen signal with a logistic
/// head per timestep. Scores are probabilities of "under attack so far".
class Detector {
 public:
  Detector(const DetectorConfig& cfg, std::uint64_t seed);

  const DetectorConfig& config() const { return cfg_; }

  /// Per-timestep attack probability over one episode's features.
  Vec score(const std::vector<Vec>& features) const;

  /// Minimizes per-timestep binary cross-entropy over shuffled episode
  /// minibatches. Warns on class imbalance (minority below 20%).
  DetectorTrainStats train(const std::vector<SignalEpisode>& data,
                           std::mt19937_64& rng);

  const nn::ParameterSet& params() const { return params_; }
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  DetectorConfig cfg_;
  nn::GruSpec gru_;
  nn::ParameterSet params_;  // GRU blocks plus head/W, head/b
  nn::AdamState adam_;
};

/// Detection quality as the episode unfolds: at each timestep, episode
/// accuracy (threshold 0.5) and ROC AUC over the episodes still running.
/// Timesteps where only one class is alive are skipped.
struct AccuracyPoint {
  std::size_t t = 0;
  double accuracy = 0.0;
  double auc = 0.0;
};

std::vector<AccuracyPoint> accuracy_curve(
    const Detector& detector, const std::vector<SignalEpisode>& eval);

/// ROC AUC of final-timestep scores over a labeled evaluation set.
double episode_auc(const Detector& detector,
                   const std::vector<SignalEpisode>& eval);

/// Header: t,accuracy,auc.
void write_accuracy_csv(const std::vector<AccuracyPoint>& curve,
                        std::ostream& out);

}  // namespace ami::defense
