#include "ami/rl/victim.hpp"

#include <algorithm>
#include <cmath>

#include "ami/rng.hpp"

namespace ami::rl {

VictimConfig VictimConfig::for_env(const env::PosgSpec& spec) {
  VictimConfig cfg;
  cfg.n_agents = spec.n_agents();
  cfg.obs_dim = spec.obs_dim;
  cfg.state_dim = spec.state_dim;
  cfg.discrete = spec.discrete;
  cfg.num_actions = spec.num_actions;
  cfg.action_dim = spec.action_dim;
  return cfg;
}

void VictimConfig::validate() const {
  if (n_agents < 2) throw ConfigError("victim team needs at least 2 agents");
  if (obs_dim == 0 || state_dim == 0) {
    throw ConfigError("victim obs/state dims must be positive");
  }
  if (discrete) {
    if (num_actions < 2) throw ConfigError("discrete space needs >= 2 actions");
  } else if (action_dim == 0) {
    throw ConfigError("continuous space needs a positive action dim");
  }
  if (hidden_dims.empty()) throw ConfigError("victim actor needs hidden layers");
}

VictimPolicySet::VictimPolicySet(const VictimConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  actor_spec_.net.input_dim = cfg_.obs_dim + (cfg_.share_actor ? cfg_.n_agents : 0);
  actor_spec_.net.hidden_dims = cfg_.hidden_dims;
  actor_spec_.net.output_dim = cfg_.discrete ? cfg_.num_actions : cfg_.action_dim;
  actor_spec_.net.activation = cfg_.activation;
  actor_spec_.discrete = cfg_.discrete;
  actor_spec_.std_y_coef = cfg_.std_y_coef;
  actor_spec_.std_x_coef = cfg_.std_x_coef;

  critic_spec_.input_dim = cfg_.state_dim;
  critic_spec_.hidden_dims = cfg_.hidden_dims;
  critic_spec_.output_dim = 1;
  critic_spec_.activation = cfg_.activation;

  const std::size_t n_actors = cfg_.share_actor ? 1 : cfg_.n_agents;
  for (std::size_t i = 0; i < n_actors; ++i) {
    auto eng = make_engine(seed, "victim-actor-init", i);
    actors_.push_back(init_actor_params(actor_spec_, eng, cfg_.gain));
  }
  auto eng = make_engine(seed, "victim-critic-init", 0);
  critic_ = nn::init_mlp_params(critic_spec_, eng, 1.0);
}

Vec VictimPolicySet::actor_input(std::size_t agent, const Vec& obs) const {
  if (agent >= cfg_.n_agents) throw ProtocolError("agent index out of range");
  if (obs.size() != cfg_.obs_dim) {
    throw ConfigError("observation dim mismatch");
  }
  if (!cfg_.share_actor) return obs;
  Vec input = obs;
  input.resize(cfg_.obs_dim + cfg_.n_agents, 0.0);
  input[cfg_.obs_dim + agent] = 1.0;
  return input;
}

const nn::ParameterSet& VictimPolicySet::actor_of(std::size_t agent) const {
  if (agent >= cfg_.n_agents) throw ProtocolError("agent index out of range");
  return actors_[cfg_.share_actor ? 0 : agent];
}

nn::ActionDistribution VictimPolicySet::dist_of(std::size_t agent,
                                                const Vec& obs) const {
  return actor_forward(actor_spec_, actor_of(agent), actor_input(agent, obs));
}

VictimAction VictimPolicySet::act(std::size_t agent, const Vec& obs,
                                  std::mt19937_64* rng) const {
  const auto dist = dist_of(agent, obs);
  VictimAction out;
  const bool stochastic = rng != nullptr && !frozen_;
  if (cfg_.discrete) {
    if (stochastic) {
      out.discrete = nn::sample_discrete(dist, *rng);
    } else {
      out.discrete = static_cast<std::size_t>(
          std::max_element(dist.probs.begin(), dist.probs.end()) -
          dist.probs.begin());
    }
    out.log_prob = nn::head_log_prob(dist, out.discrete);
  } else {
    out.continuous = stochastic ? nn::sample_gaussian(dist, *rng) : dist.mean;
    out.log_prob = nn::head_log_prob(dist, out.continuous);
  }
  return out;
}

nn::ActionDistribution VictimPolicySet::policy(std::size_t agent,
                                               const Vec& obs) const {
  ++policy_queries_;
  return dist_of(agent, obs);
}

double VictimPolicySet::value(const Vec& state) const {
  ++policy_queries_;
  if (state.size() != cfg_.state_dim) throw ConfigError("state dim mismatch");
  return nn::mlp_forward(critic_spec_, critic_, state)[0];
}

nn::ParameterSet& VictimPolicySet::actor_params(std::size_t agent) {
  if (frozen_) throw IntegrityError("victim policies are frozen");
  if (agent >= cfg_.n_agents) throw ProtocolError("agent index out of range");
  return actors_[cfg_.share_actor ? 0 : agent];
}

nn::ParameterSet& VictimPolicySet::critic_params() {
  if (frozen_) throw IntegrityError("victim policies are frozen");
  return critic_;
}

const nn::ParameterSet& VictimPolicySet::actor_params_view(
    std::size_t agent) const {
  ++param_reads_;
  return actor_of(agent);
}

const nn::ParameterSet& VictimPolicySet::critic_params_view() const {
  ++param_reads_;
  return critic_;
}

std::uint64_t VictimPolicySet::checksum() const {
  std::uint64_t h = 0;
  for (const auto& a : actors_) {
    h = h * 1000003 + a.content_hash();
  }
  return h * 1000003 + critic_.content_hash();
}

void VictimPolicySet::freeze() {
  frozen_ = true;
  checksum_ = checksum();
}

void VictimPolicySet::verify_integrity() const {
  if (!frozen_) return;
  if (checksum() != checksum_) {
    throw IntegrityError("frozen victim parameters drifted from checksum");
  }
}

void VictimPolicySet::save(const std::string& path) const {
  ++param_reads_;
  nn::ParameterSet all;
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    all.adopt(actors_[i], "actor" + std::to_string(i) + "/");
  }
  all.adopt(critic_, "critic/");
  nn::save_checkpoint(all, path);
}

void VictimPolicySet::load(const std::string& path) {
  if (frozen_) throw IntegrityError("victim policies are frozen");
  const auto all = nn::load_checkpoint(path);
  std::vector<nn::ParameterSet> actors;
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    auto part = all.extract("actor" + std::to_string(i) + "/");
    if (part.total_size() != actors_[i].total_size()) {
      throw ConfigError("checkpoint does not match the actor layout");
    }
    actors.push_back(std::move(part));
  }
  auto critic = all.extract("critic/");
  if (critic.total_size() != critic_.total_size()) {
    throw ConfigError("checkpoint does not match the critic layout");
  }
  actors_ = std::move(actors);
  critic_ = std::move(critic);
}

AttackScope::AttackScope(const VictimPolicySet& victims)
    : victims_(victims),
      reads0_(victims.param_reads()),
      queries0_(victims.policy_queries()) {}

std::uint64_t AttackScope::param_reads() const {
  return victims_.param_reads() - reads0_;
}

std::uint64_t AttackScope::policy_queries() const {
  return victims_.policy_queries() - queries0_;
}

void AttackScope::verify() const {
  if (param_reads() != 0) {
    throw ProtocolError("attack read victim parameters inside the scope");
  }
  if (policy_queries() != 0) {
    throw ProtocolError("attack queried victim internals inside the scope");
  }
}

}  // namespace ami::rl
