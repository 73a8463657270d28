#include "ami/attack/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>

#include "ami/rl/gae.hpp"
#include "ami/rng.hpp"

namespace ami::attack {
namespace {

void check_victim_compat(const env::PosgSpec& spec,
                         const rl::VictimConfig& cfg) {
  const bool action_ok = spec.discrete
                             ? spec.num_actions == cfg.num_actions
                             : spec.action_dim == cfg.action_dim;
  if (spec.n_agents() != cfg.n_agents || spec.obs_dim != cfg.obs_dim ||
      spec.state_dim != cfg.state_dim || spec.discrete != cfg.discrete ||
      !action_ok) {
    throw ConfigError("environment and victim configuration disagree");
  }
}

void check_component_dims(const env::PosgSpec& spec, const OppModelConfig& opp,
                          const TaoConfig& tao) {
  if (opp.state_dim != spec.state_dim || opp.n_agents != spec.n_agents() ||
      opp.n_victims != spec.n_victims || opp.discrete != spec.discrete ||
      opp.num_actions != spec.num_actions ||
      opp.action_dim != spec.action_dim) {
    throw ConfigError("opponent model dimensions disagree with environment");
  }
  if (tao.state_dim != spec.state_dim || tao.n_agents != spec.n_agents() ||
      tao.n_victims != spec.n_victims || tao.discrete != spec.discrete ||
      tao.num_actions != spec.num_actions ||
      tao.action_dim != spec.action_dim ||
      (!spec.discrete && (tao.action_low != spec.action_low ||
                          tao.action_high != spec.action_high))) {
    throw ConfigError("oracle dimensions disagree with environment");
  }
}

/// Density of the uniform reference measure in log space: ln|A| for
/// discrete actions, the log box volume for continuous ones.
double log_uniform_measure(const env::PosgSpec& spec) {
  if (spec.discrete) return std::log(static_cast<double>(spec.num_actions));
  return static_cast<double>(spec.action_dim) *
         std::log(spec.action_high - spec.action_low);
}

using AdvActFn = std::function<void(const Vec& obs, std::mt19937_64& eng,
                                    env::JointAction& ja, std::size_t slot)>;

EvalReport run_eval_episodes(env::Environment& env,
                             const rl::VictimPolicySet& victims,
                             const AdvActFn& adv_act, std::size_t episodes,
                             std::uint64_t seed, std::string_view ep_label,
                             std::string_view act_label) {
  if (episodes == 0) throw ConfigError("evaluation needs at least 1 episode");
  const auto& spec = env.spec();
  EvalReport report;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(derive_seed(seed, ep_label, e));
    auto eng = make_engine(seed, act_label, e);
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
      adv_act(env.observe(spec.adversary_index()), eng, ja,
              spec.adversary_index());
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

}  // namespace

double InfluencePieces::nan_marker() {
  return std::numeric_limits<double>::quiet_NaN();
}

AttackMethod parse_method(std::string_view name) {
  if (name == "ami") return AttackMethod::kAmi;
  if (name == "adv-policy" || name == "adv_policy") {
    return AttackMethod::kAdvPolicy;
  }
  if (name == "bilateral") return AttackMethod::kBilateral;
  if (name == "untargeted") return AttackMethod::kUntargeted;
  if (name == "mi") return AttackMethod::kMiBaseline;
  throw ConfigError("unknown attack method: " + std::string(name) +
                    " (expected ami, adv-policy, bilateral, untargeted, mi)");
}

std::string method_name(AttackMethod method) {
  switch (method) {
    case AttackMethod::kAmi: return "ami";
    case AttackMethod::kAdvPolicy: return "adv-policy";
    case AttackMethod::kBilateral: return "bilateral";
    case AttackMethod::kUntargeted: return "untargeted";
    case AttackMethod::kMiBaseline: return "mi";
  }
  throw ConfigError("unknown attack method enum value");
}

double variant_influence(AttackMethod method, const InfluencePieces& pieces) {
  // NaN marks an unfilled piece; +-inf is a legitimate metric value (ce).
  const auto need = [](double v, const char* what) {
    if (std::isnan(v)) {
      throw IntegrityError(std::string("influence piece missing: ") + what);
    }
    return v;
  };
  switch (method) {
    case AttackMethod::kAdvPolicy:
      return 0.0;
    case AttackMethod::kAmi:
      return need(pieces.distance_sum, "distance");
    case AttackMethod::kBilateral:
      return need(pieces.distance_sum, "distance") +
             need(pieces.majority_sum, "majority");
    case AttackMethod::kUntargeted:
      return need(pieces.minority_kl_sum, "minority");
    case AttackMethod::kMiBaseline:
      return need(pieces.mi_sum, "mutual information");
  }
  throw ConfigError("unknown attack method enum value");
}

AttackConfig AttackConfig::for_env(const env::PosgSpec& spec) {
  AttackConfig cfg;
  cfg.opp = OppModelConfig::for_env(spec);
  cfg.tao = TaoConfig::for_env(spec);
  if (spec.discrete) {
    cfg.metric = influence::DistanceMetric::kL1;
    cfg.lambda = 0.05;
    cfg.actor_lr = 1e-4;
    cfg.critic_lr = 1e-4;
    cfg.opp.lr = 1e-4;
    cfg.tao.lr = 1e-4;
    cfg.tao.critic_lr = 1e-4;
    cfg.ppo.ppo_epochs = 4;
    cfg.ppo.minibatch_num = 1;
    cfg.ppo.use_huber = false;
    cfg.tao.ppo_epochs = 4;
    cfg.tao.minibatch_num = 1;
    cfg.tao.use_huber = false;
    cfg.eval_episodes = 20;
  } else {
    cfg.metric = influence::DistanceMetric::kProb;
    cfg.lambda = 0.003;
    cfg.actor_lr = 5e-5;
    cfg.critic_lr = 5e-3;
    cfg.opp.lr = 5e-5;
    cfg.tao.lr = 5e-5;
    cfg.tao.critic_lr = 5e-5;
    cfg.ppo.ppo_epochs = 5;
    cfg.ppo.minibatch_num = 40;
    cfg.ppo.use_huber = true;
    cfg.ppo.huber_delta = 10.0;
    cfg.tao.ppo_epochs = 5;
    cfg.tao.minibatch_num = 40;
    cfg.tao.use_huber = true;
    cfg.eval_episodes = 32;
  }
  return cfg;
}

void AttackConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (mc_samples == 0) throw ConfigError("mc_samples must be at least 1");
  if (iterations == 0 || episodes_per_iter == 0 || eval_episodes == 0) {
    throw ConfigError("attack schedule counts must be at least 1");
  }
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0,1]");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) {
    throw ConfigError("gae_lambda must be in [0,1]");
  }
  if (divergence_limit <= 0.0) {
    throw ConfigError("divergence_limit must be positive");
  }
  if (hidden_dims.empty()) throw ConfigError("adversary needs hidden layers");
  if (actor_lr <= 0.0 || critic_lr <= 0.0 || gain <= 0.0) {
    throw ConfigError("adversary learning rates and gain must be positive");
  }
  if (std_y_coef <= 0.0 || std_x_coef <= 0.0) {
    throw ConfigError("std coefficients must be positive");
  }
  ppo.validate();
  opp.validate();
  tao.validate();
}

void RunningNorm::observe(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

double RunningNorm::mean() const { return mean_; }

double RunningNorm::stddev() const {
  return n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0;
}

double RunningNorm::normalize(double x) const {
  if (n_ == 0) return 0.0;
  const double sd = stddev();
  return sd > 1e-8 ? (x - mean_) / sd : x - mean_;
}

struct AttackRunner::Step {
  Vec state;
  env::JointAction joint;
  Vec adv_input;
  nn::ActionDistribution adv_dist;  // rollout-time policy, for the filter
  std::size_t action_d = 0;
  Vec action_c;
  double log_prob = 0.0;
  double value = 0.0;
  double r_alpha = 0.0;
  double r_team = 0.0;
  unsigned char done = 0;
  Vec encoded;  // (state, joint action), shared by opp model and oracle
  TaoTargets targets;
  double tao_value = 0.0;
};

struct AttackRunner::Episode {
  std::vector<Step> steps;
  double adv_return = 0.0;
  double team_return = 0.0;
};

AttackRunner::AttackRunner(const AttackConfig& cfg, const env::PosgSpec& spec,
                           const rl::VictimPolicySet& victims,
                           std::uint64_t seed)
    : cfg_(cfg),
      spec_(spec),
      victims_(victims),
      seed_(seed),
      lambda_(cfg.method == AttackMethod::kAdvPolicy ? 0.0 : cfg.lambda),
      variant_(cfg.method == AttackMethod::kAdvPolicy ? AttackMethod::kAmi
                                                      : cfg.method),
      opp_(cfg.opp, derive_seed(seed, "attack-opp", 0)),
      tao_(cfg.tao, derive_seed(seed, "attack-tao", 0)) {
  cfg_.validate();
  spec_.validate();
  if (!victims_.frozen()) {
    throw IntegrityError("attack requires frozen victim policies");
  }
  check_victim_compat(spec_, victims_.config());
  check_component_dims(spec_, cfg_.opp, cfg_.tao);
  const auto kind = spec_.discrete ? nn::ActionDistribution::Kind::kDiscrete
                                   : nn::ActionDistribution::Kind::kContinuous;
  if (!influence::metric_supports(cfg_.metric, kind)) {
    throw ConfigError("distance metric does not apply to this action space");
  }

  adv_spec_.net.input_dim = spec_.obs_dim;
  adv_spec_.net.hidden_dims = cfg_.hidden_dims;
  adv_spec_.net.output_dim =
      spec_.discrete ? spec_.num_actions : spec_.action_dim;
  adv_spec_.net.activation = cfg_.activation;
  adv_spec_.discrete = spec_.discrete;
  adv_spec_.std_y_coef = cfg_.std_y_coef;
  adv_spec_.std_x_coef = cfg_.std_x_coef;
  adv_spec_.validate();
  auto aeng = make_engine(seed_, "attack-adv-actor-init", 0);
  adv_actor_ = rl::init_actor_params(adv_spec_, aeng, cfg_.gain);

  adv_critic_spec_.input_dim = spec_.state_dim;
  adv_critic_spec_.hidden_dims = cfg_.hidden_dims;
  adv_critic_spec_.output_dim = 1;
  adv_critic_spec_.activation = cfg_.activation;
  auto ceng = make_engine(seed_, "attack-adv-critic-init", 0);
  adv_critic_ = nn::init_mlp_params(adv_critic_spec_, ceng, 1.0);

  nn::AdamConfig acfg;
  acfg.lr = cfg_.actor_lr;
  adv_actor_adam_ = nn::make_adam(adv_actor_, acfg);
  nn::AdamConfig ccfg;
  ccfg.lr = cfg_.critic_lr;
  adv_critic_adam_ = nn::make_adam(adv_critic_, ccfg);
}

void AttackRunner::check_env(const env::Environment& env) const {
  const auto& s = env.spec();
  if (s.n_victims != spec_.n_victims ||
      s.n_adversaries != spec_.n_adversaries ||
      s.state_dim != spec_.state_dim || s.obs_dim != spec_.obs_dim ||
      s.discrete != spec_.discrete || s.num_actions != spec_.num_actions ||
      s.action_dim != spec_.action_dim || s.action_low != spec_.action_low ||
      s.action_high != spec_.action_high) {
    throw ConfigError("environment does not match the attack setup");
  }
}

AttackRunner::Episode AttackRunner::collect_episode(env::Environment& env,
                                                    std::uint64_t reset_seed,
                                                    std::mt19937_64& act_eng,
                                                    std::mt19937_64& tgt_eng) {
  env.reset(reset_seed);
  Episode ep;
  const std::size_t adv_idx = spec_.adversary_index();
  while (!env.done()) {
    Step st;
    st.state = env.state();
    if (spec_.discrete) {
      st.joint.discrete.resize(spec_.n_agents());
    } else {
      st.joint.continuous.resize(spec_.n_agents());
    }
    for (std::size_t agent = 0; agent < spec_.n_victims; ++agent) {
      const auto va = victims_.act(agent, env.observe(agent), nullptr);
      if (spec_.discrete) {
        st.joint.discrete[agent] = va.discrete;
      } else {
        st.joint.continuous[agent] = va.continuous;
      }
    }
    st.adv_input = env.observe(adv_idx);
    st.adv_dist = rl::actor_forward(adv_spec_, adv_actor_, st.adv_input);
    if (spec_.discrete) {
      st.action_d = nn::sample_discrete(st.adv_dist, act_eng);
      st.log_prob = nn::head_log_prob(st.adv_dist, st.action_d);
      st.joint.discrete[adv_idx] = st.action_d;
    } else {
      st.action_c = nn::sample_gaussian(st.adv_dist, act_eng);
      st.log_prob = nn::head_log_prob(st.adv_dist, st.action_c);
      st.joint.continuous[adv_idx] = st.action_c;
    }
    st.value = nn::mlp_forward(adv_critic_spec_, adv_critic_, st.state)[0];

    const auto rec = env.step(st.joint);
    st.r_alpha = rec.adversary_reward;
    st.r_team = rec.team_reward;
    st.done = rec.done ? 1 : 0;

    st.encoded = opp_.encode(st.state, st.joint);
    st.targets = tao_.sample_targets(st.encoded, tgt_eng);
    st.tao_value = tao_.value(st.encoded);

    ep.adv_return += st.r_alpha;
    ep.team_return += st.r_team;
    ep.steps.push_back(std::move(st));
  }
  return ep;
}

AttackResult AttackRunner::run(env::Environment& env) {
  check_env(env);
  victims_.verify_integrity();
  rl::AttackScope scope(victims_);
  AttackResult result;
  const std::size_t adv_idx = spec_.adversary_index();
  const double log_u = log_uniform_measure(spec_);
  const std::uint64_t base_iter = iters_done_;

  for (std::size_t it = 0; it < cfg_.iterations; ++it) {
    const std::size_t iter = base_iter + it;
    const std::string tag = "iter" + std::to_string(iter);
    const auto t0 = std::chrono::steady_clock::now();

    // Rollback checkpoint: every learned component plus its optimizer
    // state, the normalizer and the log high-water marks.
    const auto snap_actor = adv_actor_;
    const auto snap_critic = adv_critic_;
    const auto snap_actor_adam = adv_actor_adam_;
    const auto snap_critic_adam = adv_critic_adam_;
    const auto snap_opp = opp_;
    const auto snap_tao = tao_;
    const auto snap_norm = norm_;
    const auto snap_env_steps = env_steps_;
    const auto snap_events = events_.size();
    const auto snap_logs = step_logs_.size();

    try {
      events_.push_back(tag + "/rollout");
      std::vector<Episode> batch;
      Vec ep_rewards;
      for (std::size_t e = 0; e < cfg_.episodes_per_iter; ++e) {
        const std::size_t global_ep = iter * cfg_.episodes_per_iter + e;
        auto act_eng = make_engine(seed_, "attack-act", global_ep);
        auto tgt_eng = make_engine(seed_, "attack-targets", global_ep);
        batch.push_back(collect_episode(
            env, derive_seed(seed_, "attack-episode", global_ep), act_eng,
            tgt_eng));
        env_steps_ += batch.back().steps.size();
        ep_rewards.push_back(batch.back().adv_return);
      }

      events_.push_back(tag + "/opp-fit");
      std::vector<OppSample> opp_data;
      for (const auto& ep : batch) {
        for (std::size_t t = 0; t + 1 < ep.steps.size(); ++t) {
          OppSample smp;
          smp.input = ep.steps[t].encoded;
          const auto& next = ep.steps[t + 1].joint;
          for (std::size_t i = 0; i < spec_.n_victims; ++i) {
            if (spec_.discrete) {
              smp.next_discrete.push_back(next.discrete[i]);
            } else {
              smp.next_continuous.push_back(next.continuous[i]);
            }
          }
          opp_data.push_back(std::move(smp));
        }
      }
      if (opp_data.empty()) {
        throw ProtocolError("opponent model needs two-step episodes");
      }
      auto opp_eng = make_engine(seed_, "attack-opp-fit", iter);
      const double nll = opp_.fit(opp_data, opp_eng);

      events_.push_back(tag + "/tao-update");
      std::vector<TaoSample> tao_data;
      for (const auto& ep : batch) {
        Vec rewards, values;
        std::vector<unsigned char> dones;
        for (const auto& st : ep.steps) {
          rewards.push_back(st.r_alpha);
          values.push_back(st.tao_value);
          dones.push_back(st.done);
        }
        const auto gae =
            rl::compute_gae(rewards, values, dones, 0.0, cfg_.gamma,
                            cfg_.gae_lambda);
        for (std::size_t t = 0; t < ep.steps.size(); ++t) {
          TaoSample smp;
          smp.input = ep.steps[t].encoded;
          smp.targets = ep.steps[t].targets;
          smp.advantage = gae.advantages[t];
          smp.ret = gae.returns[t];
          tao_data.push_back(std::move(smp));
        }
      }
      auto tao_eng = make_engine(seed_, "attack-tao-update", iter);
      tao_.update(tao_data, tao_eng);

      events_.push_back(tag + "/influence");
      auto inf_eng = make_engine(seed_, "attack-influence", iter);
      std::vector<StepLog> logs;
      Vec raw_values;
      for (const auto& ep : batch) {
        for (const auto& st : ep.steps) {
          const auto mixture = counterfactual_expectation(
              opp_, st.state, st.joint, adv_idx, st.adv_dist, cfg_.mc_samples,
              spec_.discrete ? nullptr : &inf_eng);
          const auto exec_preds = opp_.predict_all(st.encoded);
          StepLog log;
          log.iteration = iter;
          log.r_alpha = st.r_alpha;
          log.r_team = st.r_team;
          InfluencePieces pieces;
          pieces.distance_sum = 0.0;
          pieces.majority_sum = 0.0;
          pieces.minority_kl_sum = 0.0;
          pieces.mi_sum = 0.0;
          for (std::size_t i = 0; i < spec_.n_victims; ++i) {
            const double d =
                spec_.discrete
                    ? influence::distance(mixture[i], st.targets.discrete[i],
                                          cfg_.metric)
                    : influence::distance(mixture[i], st.targets.continuous[i],
                                          cfg_.metric);
            log.distances.push_back(d);
            pieces.distance_sum += d;
            const double mix_h = nn::head_entropy(mixture[i]);
            const double exec_h = nn::head_entropy(exec_preds[i]);
            pieces.majority_sum += -exec_h;
            pieces.minority_kl_sum += mix_h - log_u;
            pieces.mi_sum += mix_h - exec_h;
          }
          log.influence_raw = variant_influence(variant_, pieces);
          raw_values.push_back(log.influence_raw);
          logs.push_back(std::move(log));
        }
      }
      if (cfg_.normalize_influence) {
        for (double x : raw_values) norm_.observe(x);
        for (auto& log : logs) {
          log.influence_used = norm_.normalize(log.influence_raw);
        }
      } else {
        for (auto& log : logs) log.influence_used = log.influence_raw;
      }
      // Shaped reward; composition stays exact in the log. lambda == 0
      // adds nothing, keeping the adv-policy reduction bitwise.
      std::size_t li = 0;
      for (auto& ep : batch) {
        for (auto& st : ep.steps) {
          StepLog& log = logs[li++];
          const double r_ami =
              lambda_ == 0.0 ? st.r_alpha
                             : st.r_alpha + lambda_ * log.influence_used;
          log.r_ami = r_ami;
          st.r_alpha = r_ami;  // reuse the field as the shaped reward below
        }
      }
      for (auto& log : logs) step_logs_.push_back(std::move(log));

      events_.push_back(tag + "/adv-update");
      std::vector<rl::PpoSample> samples;
      for (const auto& ep : batch) {
        Vec rewards, values;
        std::vector<unsigned char> dones;
        for (const auto& st : ep.steps) {
          rewards.push_back(st.r_alpha);
          values.push_back(st.value);
          dones.push_back(st.done);
        }
        const auto gae =
            rl::compute_gae(rewards, values, dones, 0.0, cfg_.gamma,
                            cfg_.gae_lambda);
        for (std::size_t t = 0; t < ep.steps.size(); ++t) {
          rl::PpoSample smp;
          smp.input = ep.steps[t].adv_input;
          smp.action_d = ep.steps[t].action_d;
          smp.action_c = ep.steps[t].action_c;
          smp.old_log_prob = ep.steps[t].log_prob;
          smp.advantage = gae.advantages[t];
          smp.ret = gae.returns[t];
          smp.critic_input = ep.steps[t].state;
          samples.push_back(std::move(smp));
        }
      }
      auto upd_eng = make_engine(seed_, "attack-adv-update", iter);
      rl::ppo_actor_update(adv_spec_, adv_actor_, adv_actor_adam_, cfg_.ppo,
                           samples, upd_eng);
      rl::ppo_critic_update(adv_critic_spec_, adv_critic_, adv_critic_adam_,
                            cfg_.ppo, samples, upd_eng);

      for (const auto* params :
           {&adv_actor_, &adv_critic_, &opp_.params(), &tao_.actor_params(),
            &tao_.critic_params()}) {
        if (!params->finite()) {
          throw NumericError("non-finite parameters in block " +
                             params->first_non_finite_block());
        }
      }
      const auto reward_stats = stats::summarize(ep_rewards);
      if (std::fabs(reward_stats.mean) > cfg_.divergence_limit) {
        throw NumericError("adversary reward diverged");
      }

      AttackIterationRow row;
      row.iteration = iter;
      row.env_steps = env_steps_;
      row.adv_reward_mean = reward_stats.mean;
      row.adv_reward_ci95 = reward_stats.ci95_half;
      row.influence_mean = stats::summarize(raw_values).mean;
      row.nll_opp_model = nll;
      row.wallclock_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      result.metrics.push_back(row);
    } catch (const NumericError& e) {
      adv_actor_ = snap_actor;
      adv_critic_ = snap_critic;
      adv_actor_adam_ = snap_actor_adam;
      adv_critic_adam_ = snap_critic_adam;
      opp_ = snap_opp;
      tao_ = snap_tao;
      norm_ = snap_norm;
      env_steps_ = snap_env_steps;
      events_.resize(snap_events);
      step_logs_.resize(snap_logs);
      events_.push_back(tag + "/rollback");
      result.aborted = true;
      result.abort_reason =
          "iteration " + std::to_string(iter) + ": " + e.what();
      break;
    }
    ++iters_done_;
  }

  scope.verify();
  victims_.verify_integrity();
  result.env_steps = env_steps_;
  return result;
}

EvalReport AttackRunner::evaluate(env::Environment& env, std::size_t episodes,
                                  std::uint64_t seed) const {
  check_env(env);
  const AdvActFn act = [this](const Vec& obs, std::mt19937_64&,
                              env::JointAction& ja, std::size_t slot) {
    const auto dist = rl::actor_forward(adv_spec_, adv_actor_, obs);
    if (spec_.discrete) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < dist.probs.size(); ++a) {
        if (dist.probs[a] > dist.probs[best]) best = a;
      }
      ja.discrete[slot] = best;
    } else {
      ja.continuous[slot] = dist.mean;
    }
  };
  return run_eval_episodes(env, victims_, act, episodes, seed,
                           "attack-eval-episode", "attack-eval-act");
}

EvalReport evaluate_control(env::Environment& env,
                            const rl::VictimPolicySet& victims,
                            ControlSlot slot, std::size_t episodes,
                            std::uint64_t seed) {
  const auto& spec = env.spec();
  AdvActFn act;
  if (slot == ControlSlot::kCooperative) {
    act = [&victims, &spec](const Vec& obs, std::mt19937_64&,
                            env::JointAction& ja, std::size_t idx) {
      const auto va = victims.act(idx, obs, nullptr);
      if (spec.discrete) {
        ja.discrete[idx] = va.discrete;
      } else {
        ja.continuous[idx] = va.continuous;
      }
    };
  } else {
    act = [&spec](const Vec&, std::mt19937_64& eng, env::JointAction& ja,
                  std::size_t idx) {
      if (spec.discrete) {
        const double u = nn::uniform01(eng);
        ja.discrete[idx] = std::min(
            spec.num_actions - 1,
            static_cast<std::size_t>(u * static_cast<double>(
                                             spec.num_actions)));
      } else {
        Vec a(spec.action_dim);
        for (double& v : a) {
          v = spec.action_low +
              nn::uniform01(eng) * (spec.action_high - spec.action_low);
        }
        ja.continuous[idx] = std::move(a);
      }
    };
  }
  return run_eval_episodes(env, victims, act, episodes, seed,
                           "control-episode", "control-act");
}

void AttackRunner::save(const std::string& path) const {
  nn::ParameterSet all;
  all.adopt(adv_actor_, "adv-actor/");
  all.adopt(adv_critic_, "adv-critic/");
  all.adopt(opp_.params(), "opp/");
  all.adopt(tao_.actor_params(), "tao-actor/");
  all.adopt(tao_.critic_params(), "tao-critic/");
  nn::save_checkpoint(all, path);
}

void AttackRunner::load(const std::string& path) {
  const auto all = nn::load_checkpoint(path);
  const auto take = [&all](const char* prefix, nn::ParameterSet& into) {
    auto part = all.extract(prefix);
    if (part.total_size() != into.total_size()) {
      throw ConfigError(std::string("checkpoint layout mismatch under ") +
                        prefix);
    }
    into = std::move(part);
  };
  take("adv-actor/", adv_actor_);
  take("adv-critic/", adv_critic_);
  take("opp/", opp_.params());
  take("tao-actor/", tao_.actor_params());
  take("tao-critic/", tao_.critic_params());
}

void write_attack_csv(const std::vector<AttackIterationRow>& rows,
                      std::ostream& out) {
  out << "iteration,env_steps,adv_reward_mean,adv_reward_ci95,"
         "influence_mean,nll_opp_model\n";
  out << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.env_steps << ',' << r.adv_reward_mean
        << ',' << r.adv_reward_ci95 << ',' << r.influence_mean << ','
        << r.nll_opp_model << '\n';
  }
}

void write_timing_csv(const std::vector<AttackIterationRow>& rows,
                      std::ostream& out) {
  out << "iteration,wallclock_s\n";
  out << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.wallclock_s << '\n';
  }
}

}  // namespace ami::attack
