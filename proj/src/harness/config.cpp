#include "ami/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "ami/influence/influence.hpp"

namespace ami::harness {
namespace {

[[noreturn]] void fail_key(const std::string& section, const std::string& key,
                           const std::string& what) {
  throw ConfigError("config key " + section + "." + key + " " + what);
}

void check_keys(const Json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw ConfigError("config section " + section + " must be a JSON object");
  }
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) != allowed.end()) {
      continue;
    }
    std::ostringstream msg;
    msg << "unknown key \"" << key << "\" in " << section
        << "; valid keys: ";
    bool first = true;
    for (const char* a : allowed) {
      if (!first) msg << ", ";
      msg << a;
      first = false;
    }
    throw ConfigError(msg.str());
  }
}

template <typename T>
void take(const Json& obj, const std::string& section, const char* key,
          T& into) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    into = it->get<T>();
  } catch (const Json::exception&) {
    fail_key(section, key, "has the wrong type");
  }
}

void take_size(const Json& obj, const std::string& section, const char* key,
               std::size_t& into) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_unsigned()) {
    fail_key(section, key, "must be a non-negative integer");
  }
  into = it->get<std::size_t>();
}

void require_fixed(const Json& obj, const std::string& section,
                   const char* key, const std::string& expected) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  std::string got;
  try {
    got = it->get<std::string>();
  } catch (const Json::exception&) {
    fail_key(section, key, "has the wrong type");
  }
  if (got != expected) {
    fail_key(section, key,
             "only supports \"" + expected + "\", got \"" + got + "\"");
  }
}

void apply_family_defaults(HarnessConfig& c) {
  const env::PosgSpec spec = c.env.spec();
  c.attack = attack::AttackConfig::for_env(spec);
  if (spec.discrete) {
    c.lambda_grid = {0.03, 0.05, 0.1};
    c.train.actor_adam.lr = 1e-4;
    c.train.critic_adam.lr = 1e-4;
    c.train.ppo.ppo_epochs = 4;
    c.train.ppo.minibatch_num = 1;
    c.train.ppo.use_huber = false;
    c.victim_eval_episodes = 20;
  } else {
    c.lambda_grid = {0.003};
    c.train.actor_adam.lr = 5e-5;
    c.train.critic_adam.lr = 5e-3;
    c.train.ppo.ppo_epochs = 5;
    c.train.ppo.minibatch_num = 40;
    c.train.ppo.use_huber = true;
    c.train.ppo.huber_delta = 10.0;
    c.victim_eval_episodes = 32;
  }
  c.train.episodes_per_iter = 32;
}

void parse_env(const Json& j, HarnessConfig& c) {
  if (c.env.name == "gathergrid") {
    check_keys(j, "env",
               {"name", "n_victims", "max_episode_len", "discount", "grid"});
    auto& e = c.env.gathergrid;
    take_size(j, "env", "n_victims", e.n_victims);
    take_size(j, "env", "max_episode_len", e.max_episode_len);
    take(j, "env", "discount", e.discount);
    take_size(j, "env", "grid", e.grid);
  } else {
    check_keys(j, "env",
               {"name", "n_victims", "max_episode_len", "discount", "arena",
                "wheel_radius", "axle_length", "dt", "wheel_speed_max"});
    auto& e = c.env.rendezvous;
    take_size(j, "env", "n_victims", e.n_victims);
    take_size(j, "env", "max_episode_len", e.max_episode_len);
    take(j, "env", "discount", e.discount);
    take(j, "env", "arena", e.arena);
    take(j, "env", "wheel_radius", e.wheel_radius);
    take(j, "env", "axle_length", e.axle_length);
    take(j, "env", "dt", e.dt);
    take(j, "env", "wheel_speed_max", e.wheel_speed_max);
  }
}

void parse_victim(const Json& j, HarnessConfig& c) {
  const std::string s = "victim";
  check_keys(j, s,
             {"actor_network", "activation", "optimizer", "hidden_dim",
              "hidden_layers", "share_actor", "gain", "std_y_coef",
              "std_x_coef", "lr", "actor_lr", "critic_lr", "iterations",
              "episodes_per_iter", "gamma", "gae_lambda", "ppo_epochs",
              "ppo_clip", "entropy_coef", "minibatch_num", "max_grad_norm",
              "use_huber", "huber_delta", "normalize_advantages",
              "eval_episodes", "divergence_limit"});
  require_fixed(j, s, "actor_network", "mlp");
  require_fixed(j, s, "activation", "relu");
  require_fixed(j, s, "optimizer", "adam");
  take_size(j, s, "hidden_dim", c.victim_hidden_dim);
  take_size(j, s, "hidden_layers", c.victim_hidden_layers);
  take(j, s, "share_actor", c.share_actor);
  take(j, s, "gain", c.victim_gain);
  take(j, s, "std_y_coef", c.victim_std_y);
  take(j, s, "std_x_coef", c.victim_std_x);
  // "lr" is the shared-base fallback: it backs any of the specific rates
  // that the file does not pin itself.
  if (j.contains("lr")) {
    double lr = 0.0;
    take(j, s, "lr", lr);
    c.train.actor_adam.lr = lr;
    c.train.critic_adam.lr = lr;
  }
  take(j, s, "actor_lr", c.train.actor_adam.lr);
  take(j, s, "critic_lr", c.train.critic_adam.lr);
  take_size(j, s, "iterations", c.train.iterations);
  take_size(j, s, "episodes_per_iter", c.train.episodes_per_iter);
  take(j, s, "gamma", c.train.gamma);
  take(j, s, "gae_lambda", c.train.gae_lambda);
  take_size(j, s, "ppo_epochs", c.train.ppo.ppo_epochs);
  take(j, s, "ppo_clip", c.train.ppo.clip);
  take(j, s, "entropy_coef", c.train.ppo.entropy_coef);
  take_size(j, s, "minibatch_num", c.train.ppo.minibatch_num);
  take(j, s, "max_grad_norm", c.train.ppo.max_grad_norm);
  take(j, s, "use_huber", c.train.ppo.use_huber);
  take(j, s, "huber_delta", c.train.ppo.huber_delta);
  take(j, s, "normalize_advantages", c.train.ppo.normalize_advantages);
  take_size(j, s, "eval_episodes", c.victim_eval_episodes);
  take(j, s, "divergence_limit", c.train.divergence_limit);
}

void parse_attack(const Json& j, HarnessConfig& c) {
  const std::string s = "attack";
  check_keys(j, s,
             {"lambda", "lambda_grid", "metric", "normalize_influence",
              "mc_samples", "iterations", "episodes_per_iter",
              "eval_episodes", "gamma", "gae_lambda", "divergence_limit",
              "hidden_dim", "hidden_layers", "gain", "std_y_coef",
              "std_x_coef", "lr", "actor_lr", "critic_lr", "opp_lr",
              "tao_lr", "tao_critic_lr", "ppo_epochs", "ppo_clip",
              "entropy_coef", "minibatch_num", "max_grad_norm", "use_huber",
              "huber_delta", "normalize_advantages", "opp_epochs",
              "opp_minibatch_num", "tao_init_std"});
  attack::AttackConfig& a = c.attack;
  take(j, s, "lambda", a.lambda);
  take(j, s, "lambda_grid", c.lambda_grid);
  if (j.contains("metric")) {
    std::string metric;
    take(j, s, "metric", metric);
    a.metric = influence::parse_metric(metric);
  }
  take(j, s, "normalize_influence", a.normalize_influence);
  take_size(j, s, "mc_samples", a.mc_samples);
  take_size(j, s, "iterations", a.iterations);
  take_size(j, s, "episodes_per_iter", a.episodes_per_iter);
  take_size(j, s, "eval_episodes", a.eval_episodes);
  take(j, s, "gamma", a.gamma);
  take(j, s, "gae_lambda", a.gae_lambda);
  take(j, s, "divergence_limit", a.divergence_limit);
  std::size_t hidden_dim = a.hidden_dims.empty() ? 64 : a.hidden_dims[0];
  std::size_t hidden_layers = a.hidden_dims.size();
  take_size(j, s, "hidden_dim", hidden_dim);
  take_size(j, s, "hidden_layers", hidden_layers);
  a.hidden_dims.assign(hidden_layers, hidden_dim);
  a.opp.trunk_dims = a.hidden_dims;
  a.tao.trunk_dims = a.hidden_dims;
  take(j, s, "gain", a.gain);
  take(j, s, "std_y_coef", a.std_y_coef);
  take(j, s, "std_x_coef", a.std_x_coef);
  if (j.contains("lr")) {
    double lr = 0.0;
    take(j, s, "lr", lr);
    a.actor_lr = lr;
    a.critic_lr = lr;
    a.opp.lr = lr;
    a.tao.lr = lr;
    a.tao.critic_lr = lr;
  }
  take(j, s, "actor_lr", a.actor_lr);
  take(j, s, "critic_lr", a.critic_lr);
  take(j, s, "opp_lr", a.opp.lr);
  take(j, s, "tao_lr", a.tao.lr);
  take(j, s, "tao_critic_lr", a.tao.critic_lr);
  // The oracle shares the adversary's PPO schedule, one knob per table row.
  take_size(j, s, "ppo_epochs", a.ppo.ppo_epochs);
  a.tao.ppo_epochs = a.ppo.ppo_epochs;
  take(j, s, "ppo_clip", a.ppo.clip);
  a.tao.clip = a.ppo.clip;
  take(j, s, "entropy_coef", a.ppo.entropy_coef);
  a.tao.entropy_coef = a.ppo.entropy_coef;
  take_size(j, s, "minibatch_num", a.ppo.minibatch_num);
  a.tao.minibatch_num = a.ppo.minibatch_num;
  take(j, s, "max_grad_norm", a.ppo.max_grad_norm);
  a.tao.max_grad_norm = a.ppo.max_grad_norm;
  a.opp.max_grad_norm = a.ppo.max_grad_norm;
  take(j, s, "use_huber", a.ppo.use_huber);
  a.tao.use_huber = a.ppo.use_huber;
  take(j, s, "huber_delta", a.ppo.huber_delta);
  a.tao.huber_delta = a.ppo.huber_delta;
  take(j, s, "normalize_advantages", a.ppo.normalize_advantages);
  take_size(j, s, "opp_epochs", a.opp.epochs);
  take_size(j, s, "opp_minibatch_num", a.opp.minibatch_num);
  take(j, s, "tao_init_std", a.tao.init_std);
}

void parse_defense(const Json& j, HarnessConfig& c) {
  check_keys(j, "defense", {"mix", "loop_count"});
  take(j, "defense", "mix", c.defense.mix);
  take_size(j, "defense", "loop_count", c.defense.loop_count);
}

void parse_detector(const Json& j, HarnessConfig& c) {
  const std::string s = "detector";
  check_keys(j, s,
             {"hidden_dim", "lr", "epochs", "minibatch_num", "max_grad_norm",
              "episodes_per_class"});
  take_size(j, s, "hidden_dim", c.detector.hidden_dim);
  take(j, s, "lr", c.detector.lr);
  take_size(j, s, "epochs", c.detector.epochs);
  take_size(j, s, "minibatch_num", c.detector.minibatch_num);
  take(j, s, "max_grad_norm", c.detector.max_grad_norm);
  take_size(j, s, "episodes_per_class", c.detector.episodes_per_class);
}

void parse_baselines(const Json& j, HarnessConfig& c) {
  const std::string s = "baselines";
  check_keys(j, s,
             {"epsilon_state", "epsilon_action", "lr_state", "lr_action",
              "victim_critic_lr"});
  take(j, s, "epsilon_state", c.baselines.epsilon_state);
  take(j, s, "epsilon_action", c.baselines.epsilon_action);
  take(j, s, "lr_state", c.baselines.lr_state);
  take(j, s, "lr_action", c.baselines.lr_action);
  take(j, s, "victim_critic_lr", c.baselines.victim_critic_lr);
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

std::unique_ptr<env::Environment> EnvSection::make() const {
  if (name == "gathergrid") {
    return std::make_unique<env::GatherGridEnv>(gathergrid);
  }
  if (name == "rendezvous") {
    return std::make_unique<env::RendezvousEnv>(rendezvous);
  }
  throw ConfigError("unknown environment \"" + name +
                    "\"; valid names: gathergrid, rendezvous");
}

env::PosgSpec EnvSection::spec() const { return make()->spec(); }

rl::VictimConfig HarnessConfig::victim_config() const {
  rl::VictimConfig v = rl::VictimConfig::for_env(env.spec());
  v.hidden_dims.assign(victim_hidden_layers, victim_hidden_dim);
  v.share_actor = share_actor;
  v.gain = victim_gain;
  v.std_y_coef = victim_std_y;
  v.std_x_coef = victim_std_x;
  return v;
}

void HarnessConfig::validate() const {
  if (schema_version != 1) {
    throw ConfigError("unsupported config schema_version " +
                      std::to_string(schema_version) + "; this build reads 1");
  }
  env.spec().validate();
  if (victim_hidden_dim == 0 || victim_hidden_layers == 0) {
    throw ConfigError("victim hidden layout needs at least one unit");
  }
  check_positive(victim_gain, "victim.gain");
  check_positive(victim_std_y, "victim.std_y_coef");
  check_positive(victim_std_x, "victim.std_x_coef");
  if (victim_eval_episodes == 0) {
    throw ConfigError("victim.eval_episodes must be at least 1");
  }
  train.validate();
  attack.validate();
  if (lambda_grid.empty()) {
    throw ConfigError("attack.lambda_grid must not be empty");
  }
  for (double v : lambda_grid) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("attack.lambda_grid entries must be finite and >= 0");
    }
  }
  if (!(defense.mix >= 0.0 && defense.mix <= 1.0)) {
    throw ConfigError("defense.mix must lie in [0, 1]");
  }
  if (defense.loop_count == 0) {
    throw ConfigError("defense.loop_count must be at least 1");
  }
  if (detector.hidden_dim == 0 || detector.epochs == 0 ||
      detector.minibatch_num == 0 || detector.episodes_per_class == 0) {
    throw ConfigError("detector schedule values must be at least 1");
  }
  check_positive(detector.lr, "detector.lr");
  check_positive(detector.max_grad_norm, "detector.max_grad_norm");
  if (!(baselines.epsilon_state >= 0.0) || !(baselines.epsilon_action >= 0.0)) {
    throw ConfigError("baselines epsilons must be >= 0");
  }
  check_positive(baselines.lr_state, "baselines.lr_state");
  check_positive(baselines.lr_action, "baselines.lr_action");
  check_positive(baselines.victim_critic_lr, "baselines.victim_critic_lr");
}

HarnessConfig default_config(const std::string& env_name) {
  HarnessConfig c;
  if (env_name == "gathergrid") {
    c.env.name = env_name;
    c.env.gathergrid = env::GatherGridConfig{};
    c.env.gathergrid.max_episode_len = 150;  // published discrete-family value
  } else if (env_name == "rendezvous") {
    c.env.name = env_name;
    c.env.rendezvous = env::RendezvousConfig{};
    c.env.rendezvous.max_episode_len = 1000;  // published swarm-family value
  } else {
    throw ConfigError("unknown environment \"" + env_name +
                      "\"; valid names: gathergrid, rendezvous");
  }
  apply_family_defaults(c);
  c.baselines.lr_state = c.train.actor_adam.lr;
  c.baselines.lr_action = c.train.actor_adam.lr;
  c.baselines.victim_critic_lr = c.train.critic_adam.lr;
  return c;
}

HarnessConfig parse_config(const Json& j) {
  check_keys(j, "config",
             {"schema_version", "env", "victim", "attack", "defense",
              "detector", "baselines"});
  int version = 1;
  take(j, "config", "schema_version", version);
  if (version != 1) {
    throw ConfigError("unsupported config schema_version " +
                      std::to_string(version) + "; this build reads 1");
  }
  std::string env_name = "gathergrid";
  if (j.contains("env")) {
    if (!j["env"].is_object()) {
      throw ConfigError("config section env must be a JSON object");
    }
    take(j["env"], "env", "name", env_name);
  }
  HarnessConfig c = default_config(env_name);
  if (j.contains("env")) parse_env(j["env"], c);
  // Environment sizes are settled; component dimensions can derive now.
  {
    EnvSection keep = c.env;
    HarnessConfig fresh = default_config(env_name);
    fresh.env = keep;
    apply_family_defaults(fresh);
    c = fresh;
  }
  if (j.contains("victim")) parse_victim(j["victim"], c);
  if (j.contains("attack")) parse_attack(j["attack"], c);
  if (j.contains("defense")) parse_defense(j["defense"], c);
  if (j.contains("detector")) parse_detector(j["detector"], c);
  c.baselines.lr_state = c.train.actor_adam.lr;
  c.baselines.lr_action = c.train.actor_adam.lr;
  c.baselines.victim_critic_lr = c.train.critic_adam.lr;
  if (j.contains("baselines")) parse_baselines(j["baselines"], c);
  c.validate();
  return c;
}

HarnessConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config file not found: " + path);
  }
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " +
                      e.what());
  }
  try {
    return parse_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (in " + path + ")");
  }
}

Json config_to_json(const HarnessConfig& c) {
  Json j;
  j["schema_version"] = c.schema_version;
  Json e;
  e["name"] = c.env.name;
  if (c.env.name == "gathergrid") {
    e["n_victims"] = c.env.gathergrid.n_victims;
    e["max_episode_len"] = c.env.gathergrid.max_episode_len;
    e["discount"] = c.env.gathergrid.discount;
    e["grid"] = c.env.gathergrid.grid;
  } else {
    e["n_victims"] = c.env.rendezvous.n_victims;
    e["max_episode_len"] = c.env.rendezvous.max_episode_len;
    e["discount"] = c.env.rendezvous.discount;
    e["arena"] = c.env.rendezvous.arena;
    e["wheel_radius"] = c.env.rendezvous.wheel_radius;
    e["axle_length"] = c.env.rendezvous.axle_length;
    e["dt"] = c.env.rendezvous.dt;
    e["wheel_speed_max"] = c.env.rendezvous.wheel_speed_max;
  }
  j["env"] = e;
  Json v;
  v["actor_network"] = "mlp";
  v["activation"] = "relu";
  v["optimizer"] = "adam";
  v["hidden_dim"] = c.victim_hidden_dim;
  v["hidden_layers"] = c.victim_hidden_layers;
  v["share_actor"] = c.share_actor;
  v["gain"] = c.victim_gain;
  v["std_y_coef"] = c.victim_std_y;
  v["std_x_coef"] = c.victim_std_x;
  v["actor_lr"] = c.train.actor_adam.lr;
  v["critic_lr"] = c.train.critic_adam.lr;
  v["iterations"] = c.train.iterations;
  v["episodes_per_iter"] = c.train.episodes_per_iter;
  v["gamma"] = c.train.gamma;
  v["gae_lambda"] = c.train.gae_lambda;
  v["ppo_epochs"] = c.train.ppo.ppo_epochs;
  v["ppo_clip"] = c.train.ppo.clip;
  v["entropy_coef"] = c.train.ppo.entropy_coef;
  v["minibatch_num"] = c.train.ppo.minibatch_num;
  v["max_grad_norm"] = c.train.ppo.max_grad_norm;
  v["use_huber"] = c.train.ppo.use_huber;
  v["huber_delta"] = c.train.ppo.huber_delta;
  v["normalize_advantages"] = c.train.ppo.normalize_advantages;
  v["eval_episodes"] = c.victim_eval_episodes;
  v["divergence_limit"] = c.train.divergence_limit;
  j["victim"] = v;
  Json a;
  a["lambda"] = c.attack.lambda;
  a["lambda_grid"] = c.lambda_grid;
  a["metric"] = influence::metric_name(c.attack.metric);
  a["normalize_influence"] = c.attack.normalize_influence;
  a["mc_samples"] = c.attack.mc_samples;
  a["iterations"] = c.attack.iterations;
  a["episodes_per_iter"] = c.attack.episodes_per_iter;
  a["eval_episodes"] = c.attack.eval_episodes;
  a["gamma"] = c.attack.gamma;
  a["gae_lambda"] = c.attack.gae_lambda;
  a["divergence_limit"] = c.attack.divergence_limit;
  a["hidden_dim"] = c.attack.hidden_dims.empty() ? 64 : c.attack.hidden_dims[0];
  a["hidden_layers"] = c.attack.hidden_dims.size();
  a["gain"] = c.attack.gain;
  a["std_y_coef"] = c.attack.std_y_coef;
  a["std_x_coef"] = c.attack.std_x_coef;
  a["actor_lr"] = c.attack.actor_lr;
  a["critic_lr"] = c.attack.critic_lr;
  a["opp_lr"] = c.attack.opp.lr;
  a["tao_lr"] = c.attack.tao.lr;
  a["tao_critic_lr"] = c.attack.tao.critic_lr;
  a["ppo_epochs"] = c.attack.ppo.ppo_epochs;
  a["ppo_clip"] = c.attack.ppo.clip;
  a["entropy_coef"] = c.attack.ppo.entropy_coef;
  a["minibatch_num"] = c.attack.ppo.minibatch_num;
  a["max_grad_norm"] = c.attack.ppo.max_grad_norm;
  a["use_huber"] = c.attack.ppo.use_huber;
  a["huber_delta"] = c.attack.ppo.huber_delta;
  a["normalize_advantages"] = c.attack.ppo.normalize_advantages;
  a["opp_epochs"] = c.attack.opp.epochs;
  a["opp_minibatch_num"] = c.attack.opp.minibatch_num;
  a["tao_init_std"] = c.attack.tao.init_std;
  j["attack"] = a;
  Json d;
  d["mix"] = c.defense.mix;
  d["loop_count"] = c.defense.loop_count;
  j["defense"] = d;
  Json det;
  det["hidden_dim"] = c.detector.hidden_dim;
  det["lr"] = c.detector.lr;
  det["epochs"] = c.detector.epochs;
  det["minibatch_num"] = c.detector.minibatch_num;
  det["max_grad_norm"] = c.detector.max_grad_norm;
  det["episodes_per_class"] = c.detector.episodes_per_class;
  j["detector"] = det;
  Json b;
  b["epsilon_state"] = c.baselines.epsilon_state;
  b["epsilon_action"] = c.baselines.epsilon_action;
  b["lr_state"] = c.baselines.lr_state;
  b["lr_action"] = c.baselines.lr_action;
  b["victim_critic_lr"] = c.baselines.victim_critic_lr;
  j["baselines"] = b;
  return j;
}

}  // namespace ami::harness
