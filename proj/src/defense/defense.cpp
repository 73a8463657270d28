#include "ami/defense/defense.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "ami/nn/heads.hpp"
#include "ami/rl/rollout.hpp"
#include "ami/rng.hpp"

namespace ami::defense {
namespace {

void check_compat(const env::PosgSpec& spec, const rl::VictimConfig& cfg) {
  const bool action_ok = spec.discrete
                             ? spec.num_actions == cfg.num_actions
                             : spec.action_dim == cfg.action_dim;
  if (spec.n_agents() != cfg.n_agents || spec.obs_dim != cfg.obs_dim ||
      spec.state_dim != cfg.state_dim || spec.discrete != cfg.discrete ||
      !action_ok) {
    throw ConfigError("environment and victim configuration disagree");
  }
}

/// One episode of the dual loop. Identical to plain cooperative collection
/// when `adversary` is null; otherwise the slot executes the frozen
/// attacker in mode and produces no trainable slot sample.
double collect_mixed_episode(env::Environment& env,
                             const rl::VictimPolicySet& victims,
                             const AdversaryHandle* adversary,
                             std::uint64_t reset_seed,
                             std::mt19937_64& act_eng, rl::RolloutBuffer& buf) {
  const auto& spec = env.spec();
  const std::size_t slot = spec.adversary_index();
  env.reset(reset_seed);
  std::vector<rl::TimeStep> ep;
  double ep_reward = 0.0;
  while (!env.done()) {
    rl::TimeStep ts;
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
      if (adversary != nullptr && agent == slot) {
        adversary->act(obs, nullptr, ja, slot);
        continue;  // the takeover slot trains nothing this episode
      }
      const rl::VictimAction va = victims.act(agent, obs, &act_eng);
      rl::AgentSample& s = ts.agents[agent];
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

void AdversaryHandle::check(const env::PosgSpec& env_spec) const {
  spec.validate();
  if (spec.discrete != env_spec.discrete ||
      spec.net.input_dim != env_spec.obs_dim ||
      spec.net.output_dim != (env_spec.discrete ? env_spec.num_actions
                                                : env_spec.action_dim)) {
    throw ConfigError("adversary actor does not fit the environment");
  }
  if (!params.finite()) {
    throw IntegrityError("adversary parameters are not finite");
  }
}

void AdversaryHandle::act(const Vec& obs, std::mt19937_64* eng,
                          env::JointAction& ja, std::size_t slot) const {
  const auto dist = rl::actor_forward(spec, params, obs);
  if (spec.discrete) {
    if (eng != nullptr) {
      ja.discrete[slot] = nn::sample_discrete(dist, *eng);
    } else {
      std::size_t best = 0;
      for (std::size_t a = 1; a < dist.probs.size(); ++a) {
        if (dist.probs[a] > dist.probs[best]) best = a;
      }
      ja.discrete[slot] = best;
    }
  } else {
    ja.continuous[slot] =
        eng != nullptr ? nn::sample_gaussian(dist, *eng) : dist.mean;
  }
}

void DualTrainConfig::validate() const {
  if (mix < 0.0 || mix > 1.0) throw ConfigError("mix must be in [0,1]");
  train.validate();
}

DualTrainResult dual_train(env::Environment& env,
                           rl::VictimPolicySet& victims,
                           const AdversaryHandle* adversary,
                           const DualTrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_compat(env.spec(), victims.config());
  if (victims.frozen()) {
    throw IntegrityError("cannot train frozen victim policies");
  }
  if (cfg.mix > 0.0 && adversary == nullptr) {
    throw ConfigError("a positive mix needs an adversary");
  }
  if (adversary != nullptr) adversary->check(env.spec());

  const std::size_t n_agents = victims.config().n_agents;
  const std::size_t slot = env.spec().adversary_index();
  const bool shared = victims.config().share_actor;
  std::vector<nn::AdamState> actor_adams;
  for (std::size_t a = 0; a < (shared ? 1u : n_agents); ++a) {
    actor_adams.push_back(
        nn::make_adam(victims.actor_params(a), cfg.train.actor_adam));
  }
  auto critic_adam = nn::make_adam(victims.critic_params(),
                                   cfg.train.critic_adam);

  DualTrainResult result;
  rl::TrainResult& tr = result.train;
  for (std::size_t iter = 0; iter < cfg.train.iterations; ++iter) {
    rl::RolloutBuffer buf;
    std::vector<unsigned char> taken_over;
    Vec episode_rewards;
    for (std::size_t e = 0; e < cfg.train.episodes_per_iter; ++e) {
      const std::size_t global_ep = iter * cfg.train.episodes_per_iter + e;
      bool attacked = false;
      if (cfg.mix > 0.0) {
        // Dedicated stream: the takeover coin never perturbs the episode
        // or action streams, so mix = 0 stays transcript-identical to
        // plain training.
        auto mix_eng = make_engine(seed, "defense-mix", global_ep);
        attacked = nn::uniform01(mix_eng) < cfg.mix;
      }
      taken_over.push_back(attacked ? 1 : 0);
      ++result.total_episodes;
      if (attacked) ++result.adversarial_episodes;
      auto act_eng = make_engine(seed, "mappo-act", global_ep);
      episode_rewards.push_back(collect_mixed_episode(
          env, victims, attacked ? adversary : nullptr,
          derive_seed(seed, "mappo-episode", global_ep), act_eng, buf));
      tr.env_steps += buf.episodes.back().size();
    }
    buf.compute_advantages(cfg.train.gamma, cfg.train.gae_lambda);

    std::vector<std::vector<rl::PpoSample>> per_actor(shared ? 1 : n_agents);
    std::vector<rl::PpoSample> critic_samples;
    for (std::size_t ei = 0; ei < buf.episodes.size(); ++ei) {
      const auto& ep = buf.episodes[ei];
      for (std::size_t t = 0; t < ep.size(); ++t) {
        rl::PpoSample cs;
        cs.critic_input = ep[t].critic_input;
        cs.ret = buf.returns[ei][t];
        critic_samples.push_back(std::move(cs));
        for (std::size_t agent = 0; agent < n_agents; ++agent) {
          if (taken_over[ei] && agent == slot) continue;
          const rl::AgentSample& ag = ep[t].agents[agent];
          rl::PpoSample s;
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

    rl::IterationLog log;
    log.iteration = iter;
    const auto su = stats::summarize(episode_rewards);
    log.reward_mean = su.mean;
    log.reward_ci95 = su.ci95_half;

    auto update_eng = make_engine(seed, "mappo-update", iter);
    try {
      for (std::size_t a = 0; a < per_actor.size(); ++a) {
        if (per_actor[a].empty()) continue;  // slot fully taken over
        const auto st = rl::ppo_actor_update(victims.actor_spec(),
                                             victims.actor_params(a),
                                             actor_adams[a], cfg.train.ppo,
                                             per_actor[a], update_eng);
        log.policy_loss +=
            st.policy_loss / static_cast<double>(per_actor.size());
        log.entropy += st.entropy / static_cast<double>(per_actor.size());
      }
      log.value_loss = rl::ppo_critic_update(victims.critic_spec(),
                                             victims.critic_params(),
                                             critic_adam, cfg.train.ppo,
                                             critic_samples, update_eng);
    } catch (const NumericError& e) {
      tr.aborted = true;
      tr.abort_reason = "iteration " + std::to_string(iter) +
                        ": update diverged: " + e.what();
      break;
    }
    log.env_steps = tr.env_steps;
    tr.curve.push_back(log);

    if (!std::isfinite(su.mean) ||
        std::fabs(su.mean) > cfg.train.divergence_limit) {
      tr.aborted = true;
      tr.abort_reason =
          "iteration " + std::to_string(iter) + ": episode reward diverged";
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
      tr.aborted = true;
      tr.abort_reason =
          "iteration " + std::to_string(iter) + ": non-finite " + bad;
      break;
    }
  }
  return result;
}

attack::EvalReport evaluate_under_adversary(env::Environment& env,
                                            const rl::VictimPolicySet& victims,
                                            const AdversaryHandle& adversary,
                                            std::size_t episodes,
                                            std::uint64_t seed) {
  if (episodes == 0) throw ConfigError("evaluation needs at least 1 episode");
  check_compat(env.spec(), victims.config());
  adversary.check(env.spec());
  const auto& spec = env.spec();
  const std::size_t slot = spec.adversary_index();
  attack::EvalReport report;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(derive_seed(seed, "defense-eval-episode", e));
    double adv_ret = 0.0, team_ret = 0.0;
    while (!env.done()) {
      env::JointAction ja;
      if (spec.discrete) {
        ja.discrete.resize(spec.n_agents());
      } else {
        ja.continuous.resize(spec.n_agents());
      }
      for (std::size_t agent = 0; agent < spec.n_victims; ++agent) {
        const auto va = victims.act(agent, env.observe(agent), nullptr);
        if (spec.discrete) {
          ja.discrete[agent] = va.discrete;
        } else {
          ja.continuous[agent] = va.continuous;
        }
      }
      adversary.act(env.observe(slot), nullptr, ja, slot);
      const auto rec = env.step(ja);
      adv_ret += rec.adversary_reward;
      team_ret += rec.team_reward;
    }
    report.adv_episode_rewards.push_back(adv_ret);
    report.team_episode_rewards.push_back(team_ret);
  }
  report.adv_reward = stats::summarize(report.adv_episode_rewards);
  report.team_reward = stats::summarize(report.team_episode_rewards);
  return report;
}

SlotSwapEnv::SlotSwapEnv(env::Environment& inner, std::size_t slot)
    : inner_(inner), slot_(slot) {
  if (slot > inner.spec().adversary_index()) {
    throw ConfigError("swap slot out of range");
  }
}

std::size_t SlotSwapEnv::map(std::size_t agent) const {
  const std::size_t adv = inner_.spec().adversary_index();
  if (agent == slot_) return adv;
  if (agent == adv) return slot_;
  return agent;
}

Vec SlotSwapEnv::observe(std::size_t agent) const {
  return inner_.observe(map(agent));
}

env::StepRecord SlotSwapEnv::step(const env::JointAction& actions) {
  const auto& spec = inner_.spec();
  env::JointAction inner_ja;
  if (spec.discrete) {
    if (actions.discrete.size() != spec.n_agents()) {
      throw ProtocolError("joint action has the wrong number of agents");
    }
    inner_ja.discrete.resize(spec.n_agents());
    for (std::size_t i = 0; i < spec.n_agents(); ++i) {
      inner_ja.discrete[map(i)] = actions.discrete[i];
    }
  } else {
    if (actions.continuous.size() != spec.n_agents()) {
      throw ProtocolError("joint action has the wrong number of agents");
    }
    inner_ja.continuous.resize(spec.n_agents());
    for (std::size_t i = 0; i < spec.n_agents(); ++i) {
      inner_ja.continuous[map(i)] = actions.continuous[i];
    }
  }
  env::StepRecord rec = inner_.step(inner_ja);
  env::StepRecord out = rec;
  for (std::size_t i = 0; i < spec.n_agents(); ++i) {
    if (!rec.obs.empty()) out.obs[i] = rec.obs[map(i)];
    if (!rec.actions_discrete.empty()) {
      out.actions_discrete[i] = rec.actions_discrete[map(i)];
    }
    if (!rec.actions_continuous.empty()) {
      out.actions_continuous[i] = rec.actions_continuous[map(i)];
    }
  }
  return out;
}

ProtocolRow run_re_ami(env::Environment& env,
                       const rl::VictimPolicySet& victims,
                       const attack::AttackConfig& cfg, std::uint64_t seed) {
  attack::AttackRunner runner(cfg, env.spec(), victims,
                              derive_seed(seed, "re-ami", 0));
  const auto res = runner.run(env);
  const auto eval = runner.evaluate(env, cfg.eval_episodes,
                                    derive_seed(seed, "re-ami-eval", 0));
  ProtocolRow row;
  row.protocol = "re-ami";
  row.slot = env.spec().adversary_index();
  row.seed = seed;
  row.adv_reward = eval.adv_reward.mean;
  row.team_reward = eval.team_reward.mean;
  row.attack_aborted = res.aborted;
  return row;
}

std::vector<ProtocolRow> run_pos_ami(env::Environment& env,
                                     const rl::VictimPolicySet& victims,
                                     const attack::AttackConfig& cfg,
                                     std::uint64_t seed) {
  std::vector<ProtocolRow> rows;
  for (std::size_t slot = 0; slot < env.spec().n_victims; ++slot) {
    SlotSwapEnv swapped(env, slot);
    attack::AttackRunner runner(cfg, swapped.spec(), victims,
                                derive_seed(seed, "pos-ami", slot));
    const auto res = runner.run(swapped);
    const auto eval = runner.evaluate(swapped, cfg.eval_episodes,
                                      derive_seed(seed, "pos-ami-eval", slot));
    ProtocolRow row;
    row.protocol = "pos-ami";
    row.slot = slot;
    row.seed = seed;
    row.adv_reward = eval.adv_reward.mean;
    row.team_reward = eval.team_reward.mean;
    row.attack_aborted = res.aborted;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_protocol_csv(const std::vector<ProtocolRow>& rows,
                        std::ostream& out) {
  out << "protocol,slot,seed,adv_reward,team_reward,attack_aborted\n";
  out << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.protocol << ',' << r.slot << ',' << r.seed << ',' << r.adv_reward
        << ',' << r.team_reward << ',' << (r.attack_aborted ? 1 : 0) << '\n';
  }
}

}  // namespace ami::defense
