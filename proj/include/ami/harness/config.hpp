#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "ami/attack/attack.hpp"
#include "ami/common.hpp"
#include "ami/env/gathergrid.hpp"
#include "ami/env/posg.hpp"
#include "ami/env/rendezvous.hpp"
#include "ami/rl/mappo.hpp"
#include "ami/rl/victim.hpp"

namespace ami::harness {

using Json = nlohmann::json;

/// Environment selection plus the per-environment parameters. Exactly one of
/// the two config structs is active, chosen by `name`.
struct EnvSection {
  std::string name = "gathergrid";  // gathergrid | rendezvous
  env::GatherGridConfig gathergrid;
  env::RendezvousConfig rendezvous;

  bool discrete() const { return name == "gathergrid"; }
  std::unique_ptr<env::Environment> make() const;
  env::PosgSpec spec() const;
};

struct DefenseSection {
  double mix = 0.5;            // takeover probability during dual training
  std::size_t loop_count = 1;  // optional iterative refinement rounds
};

struct DetectorSection {
  std::size_t hidden_dim = 64;
  double lr = 1e-3;
  std::size_t epochs = 8;
  std::size_t minibatch_num = 8;
  double max_grad_norm = 10.0;
  std::size_t episodes_per_class = 100;
};

/// Published parameters of the perturbation-style baseline attackers. No
/// implemented subcommand consumes them; they are kept as named keys so
/// sweep configs written against the full published parameter set parse
/// here unchanged.
struct BaselineSection {
  double epsilon_state = 0.1;
  double epsilon_action = 0.1;
  double lr_state = 1e-4;        // defaults to the victim actor lr
  double lr_action = 1e-4;       // defaults to the victim actor lr
  double victim_critic_lr = 1e-4;  // defaults to the victim critic lr
};

/// Fully resolved experiment configuration. Defaults follow the published
/// per-family tables: the discrete family (gathergrid) uses the discrete
/// control column, the continuous family (rendezvous) the swarm column.
/// parse_config applies JSON overrides on top; config_to_json writes every
/// key back out so a manifest snapshot never depends on compiled defaults.
struct HarnessConfig {
  int schema_version = 1;
  EnvSection env;

  // Victim team: architecture plus the cooperative training schedule.
  std::size_t victim_hidden_dim = 64;
  std::size_t victim_hidden_layers = 1;
  bool share_actor = true;
  double victim_gain = 0.01;
  double victim_std_y = 0.5;
  double victim_std_x = 1.0;
  rl::TrainConfig train;
  std::size_t victim_eval_episodes = 20;

  attack::AttackConfig attack;
  std::vector<double> lambda_grid{0.03, 0.05, 0.1};

  DefenseSection defense;
  DetectorSection detector;
  BaselineSection baselines;

  /// Victim architecture resolved against the environment dimensions.
  rl::VictimConfig victim_config() const;
  void validate() const;
};

/// Family defaults for the named environment; throws ConfigError on an
/// unknown name.
HarnessConfig default_config(const std::string& env_name);

/// Defaults plus overrides from a schema-version-1 JSON object. Unknown keys
/// anywhere raise ConfigError listing the valid keys of that section.
HarnessConfig parse_config(const Json& j);
HarnessConfig load_config_file(const std::string& path);

/// Fully resolved snapshot; parse_config(config_to_json(c)) reproduces c.
Json config_to_json(const HarnessConfig& c);

}  // namespace ami::harness
