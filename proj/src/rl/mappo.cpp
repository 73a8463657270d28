#include "ami/rl/mappo.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "ami/rl/rollout.hpp"
#include "ami/rng.hpp"

namespace ami::rl {
namespace {

void check_compat(const env::PosgSpec& spec, const VictimConfig& cfg) {
  const bool action_ok = spec.discrete
                             ? spec.num_actions == cfg.num_actions
                             : spec.action_dim == cfg.action_dim;
  if (spec.n_agents() != cfg.n_agents || spec.obs_dim != cfg.obs_dim ||
      spec.state_dim != cfg.state_dim || spec.discrete != cfg.discrete ||
      !action_ok) {
    throw ConfigError("environment and victim configuration disagree");
  }
}

/// Runs one episode with every agent driven by the victim set. Fills the
/// buffer with per-agent samples and returns the episode team reward.
double collect_episode(env::Environment& env, const VictimPolicySet& victims,
                       std::uint64_t reset_seed, std::mt19937_64& act_eng,
                       RolloutBuffer& buf) {
  const auto& spec = env.spec();
  env.reset(reset_seed);
  std::vector<TimeStep> ep;
  double ep_reward = 0.0;
  while (!env.done()) {
    TimeStep ts;
    ts.critic_input = env.state();
    ts.value = victims.value(ts.critic_input);
    env::JointAction ja;
    if (spec.discrete) {
      ja.discrete.resize(spec.n_agents());
    } else {
      ja.continuous.resize(spec.n_agents());
    }
    ts.agents.resize(spec.n_agents());
    for (std::size_t agent = 0; agent < spec.n_agents(); ++agent) {
      const Vec obs = env.observe(agent);
      const VictimAction va = victims.act(agent, obs, &act_eng);
      AgentSample& s = ts.agents[agent];
      s.input = victims.actor_input(agent, obs);
      s.log_prob = va.log_prob;
      if (spec.discrete) {
        s.action_d = va.discrete;
        ja.discrete[agent] = va.discrete;
      } else {
        s.action_c = va.continuous;
        ja.continuous[agent] = va.continuous;
      }
    }
    const auto rec = env.step(ja);
    ts.reward = rec.team_reward;
    ts.done = rec.done;
    ep_reward += rec.team_reward;
    ep.push_back(std::move(ts));
  }
  buf.episodes.push_back(std::move(ep));
  return ep_reward;
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations == 0) throw ConfigError("iterations must be at least 1");
  if (episodes_per_iter == 0) {
    throw ConfigError("episodes_per_iter must be at least 1");
  }
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0,1]");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) {
    throw ConfigError("gae_lambda must be in [0,1]");
  }
  if (divergence_limit <= 0.0) {
    throw ConfigError("divergence_limit must be positive");
  }
  ppo.validate();
}

TrainResult train_victims(env::Environment& env, VictimPolicySet& victims,
                          const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_compat(env.spec(), victims.config());
  if (victims.frozen()) {
    throw IntegrityError("cannot train frozen victim policies");
  }

  const std::size_t n_agents = victims.config().n_agents;
  const bool shared = victims.config().share_actor;
  std::vector<nn::AdamState> actor_adams;
  for (std::size_t a = 0; a < (shared ? 1u : n_agents); ++a) {
    actor_adams.push_back(nn::make_adam(victims.actor_params(a), cfg.actor_adam));
  }
  auto critic_adam = nn::make_adam(victims.critic_params(), cfg.critic_adam);

  TrainResult result;
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    RolloutBuffer buf;
    Vec episode_rewards;
    for (std::size_t e = 0; e < cfg.episodes_per_iter; ++e) {
      const std::size_t global_ep = iter * cfg.episodes_per_iter + e;
      auto act_eng = make_engine(seed, "mappo-act", global_ep);
      episode_rewards.push_back(
          collect_episode(env, victims,
                          derive_seed(seed, "mappo-episode", global_ep),
                          act_eng, buf));
      result.env_steps += buf.episodes.back().size();
    }
    buf.compute_advantages(cfg.gamma, cfg.gae_lambda);

    // One PPO sample per (timestep, agent) for the actors, one per timestep
    // for the centralized critic.
    std::vector<std::vector<PpoSample>> per_actor(shared ? 1 : n_agents);
    std::vector<PpoSample> critic_samples;
    for (std::size_t ei = 0; ei < buf.episodes.size(); ++ei) {
      const auto& ep = buf.episodes[ei];
      for (std::size_t t = 0; t < ep.size(); ++t) {
        PpoSample cs;
        cs.critic_input = ep[t].critic_input;
        cs.ret = buf.returns[ei][t];
        critic_samples.push_back(std::move(cs));
        for (std::size_t agent = 0; agent < n_agents; ++agent) {
          const AgentSample& ag = ep[t].agents[agent];
          PpoSample s;
          s.input = ag.input;
          s.action_d = ag.action_d;
          s.action_c = ag.action_c;
          s.old_log_prob = ag.log_prob;
          s.advantage = buf.advantages[ei][t];
          s.ret = buf.returns[ei][t];
          per_actor[shared ? 0 : agent].push_back(std::move(s));
        }
      }
    }

    IterationLog log;
    log.iteration = iter;
    const auto su = stats::summarize(episode_rewards);
    log.reward_mean = su.mean;
    log.reward_ci95 = su.ci95_half;

    auto update_eng = make_engine(seed, "mappo-update", iter);
    try {
      for (std::size_t a = 0; a < per_actor.size(); ++a) {
        const auto st = ppo_actor_update(victims.actor_spec(),
                                         victims.actor_params(a),
                                         actor_adams[a], cfg.ppo,
                                         per_actor[a], update_eng);
        log.policy_loss += st.policy_loss / static_cast<double>(per_actor.size());
        log.entropy += st.entropy / static_cast<double>(per_actor.size());
      }
      log.value_loss = ppo_critic_update(victims.critic_spec(),
                                         victims.critic_params(), critic_adam,
                                         cfg.ppo, critic_samples, update_eng);
    } catch (const NumericError& e) {
      result.aborted = true;
      result.abort_reason = "iteration " + std::to_string(iter) +
                            ": update diverged: " + e.what();
      break;
    }
    log.env_steps = result.env_steps;
    result.curve.push_back(log);

    if (!std::isfinite(su.mean) ||
        std::fabs(su.mean) > cfg.divergence_limit) {
      result.aborted = true;
      result.abort_reason = "iteration " + std::to_string(iter) +
                            ": episode reward diverged";
      break;
    }
    std::string bad;
    for (std::size_t a = 0; a < per_actor.size(); ++a) {
      const auto& name = victims.actor_params(a).first_non_finite_block();
      if (!name.empty()) bad = "actor block " + name;
    }
    if (bad.empty() && !victims.critic_params().finite()) {
      bad = "critic block " + victims.critic_params().first_non_finite_block();
    }
    if (!bad.empty()) {
      result.aborted = true;
      result.abort_reason =
          "iteration " + std::to_string(iter) + ": non-finite " + bad;
      break;
    }
  }
  return result;
}

stats::SummaryStats evaluate_team(env::Environment& env,
                                  const VictimPolicySet& victims,
                                  std::size_t episodes, std::uint64_t seed,
                                  bool deterministic) {
  check_compat(env.spec(), victims.config());
  if (episodes == 0) throw ConfigError("evaluation needs at least 1 episode");
  const auto& spec = env.spec();
  Vec rewards;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(derive_seed(seed, "eval-episode", e));
    auto eng = make_engine(seed, "eval-act", e);
    double total = 0.0;
    while (!env.done()) {
      env::JointAction ja;
      if (spec.discrete) {
        ja.discrete.resize(spec.n_agents());
      } else {
        ja.continuous.resize(spec.n_agents());
      }
      for (std::size_t agent = 0; agent < spec.n_agents(); ++agent) {
        const auto va = victims.act(agent, env.observe(agent),
                                    deterministic ? nullptr : &eng);
        if (spec.discrete) {
          ja.discrete[agent] = va.discrete;
        } else {
          ja.continuous[agent] = va.continuous;
        }
      }
      total += env.step(ja).team_reward;
    }
    rewards.push_back(total);
  }
  return stats::summarize(rewards);
}

void write_curve_csv(const std::vector<IterationLog>& curve,
                     std::ostream& out) {
  out << "iteration,env_steps,reward_mean,reward_ci95,policy_loss,"
         "value_loss,entropy\n";
  out << std::setprecision(12);
  for (const auto& row : curve) {
    out << row.iteration << ',' << row.env_steps << ',' << row.reward_mean
        << ',' << row.reward_ci95 << ',' << row.policy_loss << ','
        << row.value_loss << ',' << row.entropy << '\n';
  }
}

}  // namespace ami::rl
