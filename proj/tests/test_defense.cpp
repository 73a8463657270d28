#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "ami/defense/defense.hpp"
#include "ami/env/gathergrid.hpp"
#include "ami/rng.hpp"

using namespace ami;
using namespace ami::defense;

namespace {

env::GatherGridConfig grid_cfg() {
  env::GatherGridConfig ec;
  ec.n_victims = 2;
  ec.grid = 5;
  ec.max_episode_len = 12;
  return ec;
}

rl::TrainConfig small_train() {
  rl::TrainConfig cfg;
  cfg.iterations = 2;
  cfg.episodes_per_iter = 4;
  return cfg;
}

AdversaryHandle make_adversary(const env::PosgSpec& spec, std::uint64_t seed) {
  AdversaryHandle adv;
  adv.spec.net.input_dim = spec.obs_dim;
  adv.spec.net.hidden_dims = {16};
  adv.spec.net.output_dim = spec.discrete ? spec.num_actions : spec.action_dim;
  adv.spec.discrete = spec.discrete;
  auto eng = make_engine(seed, "test-adv-init", 0);
  adv.params = rl::init_actor_params(adv.spec, eng);
  return adv;
}

std::string curve_csv(const std::vector<rl::IterationLog>& curve) {
  std::ostringstream out;
  rl::write_curve_csv(curve, out);
  return out.str();
}

}  // namespace

TEST_CASE("adversary handle validates its fit and acts in mode") {
  const auto spec = env::GatherGridEnv(grid_cfg()).spec();
  auto adv = make_adversary(spec, 3);
  CHECK_NOTHROW(adv.check(spec));

  auto wrong = adv;
  wrong.spec.net.input_dim += 1;
  CHECK_THROWS_AS(wrong.check(spec), ConfigError);
  auto nan = make_adversary(spec, 3);
  nan.params.blocks().front().values[0] =
      std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nan.check(spec), IntegrityError);

  env::GatherGridEnv env(grid_cfg());
  env.reset(1);
  const Vec obs = env.observe(spec.adversary_index());
  env::JointAction ja;
  ja.discrete.resize(spec.n_agents());
  adv.act(obs, nullptr, ja, spec.adversary_index());
  const auto dist = rl::actor_forward(adv.spec, adv.params, obs);
  std::size_t best = 0;
  for (std::size_t a = 1; a < dist.probs.size(); ++a) {
    if (dist.probs[a] > dist.probs[best]) best = a;
  }
  CHECK(ja.discrete[spec.adversary_index()] == best);

  auto e1 = make_engine(9, "test-act", 0);
  auto e2 = make_engine(9, "test-act", 0);
  env::JointAction s1 = ja, s2 = ja;
  adv.act(obs, &e1, s1, 0);
  adv.act(obs, &e2, s2, 0);
  CHECK(s1.discrete[0] == s2.discrete[0]);
}

TEST_CASE("dual config validates the mix") {
  DualTrainConfig cfg;
  cfg.train = small_train();
  cfg.mix = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.mix = 1.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.mix = 1.0;
  cfg.validate();
}

TEST_CASE("mix zero is transcript-identical to plain training") {
  const auto ec = grid_cfg();
  const auto spec = env::GatherGridEnv(ec).spec();
  const auto vcfg = rl::VictimConfig::for_env(spec);

  env::GatherGridEnv env_a(ec), env_b(ec);
  rl::VictimPolicySet plain(vcfg, 31);
  rl::VictimPolicySet dual(vcfg, 31);
  CHECK(plain.actor_params(0).content_hash() ==
        dual.actor_params(0).content_hash());

  const auto tcfg = small_train();
  const auto ra = rl::train_victims(env_a, plain, tcfg, 17);

  DualTrainConfig dcfg;
  dcfg.mix = 0.0;
  dcfg.train = tcfg;
  const auto rb = dual_train(env_b, dual, nullptr, dcfg, 17);

  CHECK(rb.adversarial_episodes == 0);
  CHECK(rb.total_episodes == tcfg.iterations * tcfg.episodes_per_iter);
  CHECK(curve_csv(ra.curve) == curve_csv(rb.train.curve));
  CHECK(ra.env_steps == rb.train.env_steps);
  CHECK(plain.actor_params(0).content_hash() ==
        dual.actor_params(0).content_hash());
  CHECK(plain.critic_params().content_hash() ==
        dual.critic_params().content_hash());
}

TEST_CASE("takeover episodes follow the mix and still train the team") {
  const auto ec = grid_cfg();
  const auto spec = env::GatherGridEnv(ec).spec();
  const auto adv = make_adversary(spec, 3);

  env::GatherGridEnv env(ec);
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 31);
  const auto h0 = victims.actor_params(0).content_hash();

  DualTrainConfig cfg;
  cfg.mix = 1.0;
  cfg.train = small_train();
  const auto res = dual_train(env, victims, &adv, cfg, 17);
  CHECK_FALSE(res.train.aborted);
  CHECK(res.adversarial_episodes == res.total_episodes);
  CHECK(victims.actor_params(0).content_hash() != h0);

  env::GatherGridEnv env2(ec);
  rl::VictimPolicySet mixed(rl::VictimConfig::for_env(spec), 31);
  cfg.mix = 0.5;
  const auto rm = dual_train(env2, mixed, &adv, cfg, 17);
  CHECK(rm.adversarial_episodes > 0);
  CHECK(rm.adversarial_episodes < rm.total_episodes);
}

TEST_CASE("dual training rejects bad setups and is deterministic") {
  const auto ec = grid_cfg();
  const auto spec = env::GatherGridEnv(ec).spec();
  const auto adv = make_adversary(spec, 3);
  env::GatherGridEnv env(ec);

  DualTrainConfig cfg;
  cfg.mix = 0.5;
  cfg.train = small_train();

  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 31);
  CHECK_THROWS_AS(dual_train(env, victims, nullptr, cfg, 1), ConfigError);
  rl::VictimPolicySet frozen(rl::VictimConfig::for_env(spec), 31);
  frozen.freeze();
  CHECK_THROWS_AS(dual_train(env, frozen, &adv, cfg, 1), IntegrityError);

  env::GatherGridEnv env_a(ec), env_b(ec);
  rl::VictimPolicySet va(rl::VictimConfig::for_env(spec), 31);
  rl::VictimPolicySet vb(rl::VictimConfig::for_env(spec), 31);
  const auto ra = dual_train(env_a, va, &adv, cfg, 23);
  const auto rb = dual_train(env_b, vb, &adv, cfg, 23);
  CHECK(ra.adversarial_episodes == rb.adversarial_episodes);
  CHECK(curve_csv(ra.train.curve) == curve_csv(rb.train.curve));
  CHECK(va.actor_params(0).content_hash() == vb.actor_params(0).content_hash());
}

TEST_CASE("slot swap permutes observations and actions only") {
  const auto ec = grid_cfg();
  env::GatherGridEnv raw(ec), inner(ec);
  const auto& spec = raw.spec();
  const std::size_t adv = spec.adversary_index();
  SlotSwapEnv swapped(inner, 0);

  CHECK_THROWS_AS(SlotSwapEnv(inner, adv + 1), ConfigError);

  raw.reset(11);
  swapped.reset(11);
  for (std::size_t i = 0; i < spec.n_agents(); ++i) {
    const std::size_t m = i == 0 ? adv : (i == adv ? 0 : i);
    const Vec a = swapped.observe(i);
    const Vec b = raw.observe(m);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
  const Vec s1 = swapped.state();
  const Vec s2 = raw.state();
  for (std::size_t k = 0; k < s1.size(); ++k) CHECK(s1[k] == s2[k]);

  // A distinct action per agent; the wrapper must deliver action i to
  // inner agent map(i).
  env::JointAction ja;
  for (std::size_t i = 0; i < spec.n_agents(); ++i) {
    ja.discrete.push_back(i % spec.num_actions);
  }
  env::JointAction permuted = ja;
  permuted.discrete[adv] = ja.discrete[0];
  permuted.discrete[0] = ja.discrete[adv];
  const auto rec_sw = swapped.step(ja);
  const auto rec_raw = raw.step(permuted);
  CHECK(rec_sw.team_reward == rec_raw.team_reward);
  CHECK(rec_sw.adversary_reward == rec_raw.adversary_reward);
  const Vec after_a = swapped.state();
  const Vec after_b = raw.state();
  for (std::size_t k = 0; k < after_a.size(); ++k) {
    CHECK(after_a[k] == after_b[k]);
  }
  for (std::size_t i = 0; i < spec.n_agents(); ++i) {
    const std::size_t m = i == 0 ? adv : (i == adv ? 0 : i);
    CHECK(rec_sw.actions_discrete[i] == rec_raw.actions_discrete[m]);
    const Vec& oa = rec_sw.obs[i];
    const Vec& ob = rec_raw.obs[m];
    for (std::size_t k = 0; k < oa.size(); ++k) CHECK(oa[k] == ob[k]);
  }
}

TEST_CASE("evaluation under the adversary is deterministic") {
  const auto ec = grid_cfg();
  env::GatherGridEnv env(ec);
  const auto spec = env.spec();
  const auto adv = make_adversary(spec, 3);
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 31);
  victims.freeze();

  const auto a = evaluate_under_adversary(env, victims, adv, 4, 7);
  const auto b = evaluate_under_adversary(env, victims, adv, 4, 7);
  REQUIRE(a.team_episode_rewards.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.team_episode_rewards[i] == b.team_episode_rewards[i]);
    CHECK(a.adv_episode_rewards[i] == b.adv_episode_rewards[i]);
  }
  CHECK(std::isfinite(a.adv_reward.mean));
  CHECK_THROWS_AS(evaluate_under_adversary(env, victims, adv, 0, 7),
                  ConfigError);
}

TEST_CASE("re-ami and pos-ami protocols produce one row per position") {
  const auto ec = grid_cfg();
  env::GatherGridEnv env(ec);
  const auto spec = env.spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 31);
  victims.freeze();

  auto acfg = attack::AttackConfig::for_env(spec);
  acfg.iterations = 1;
  acfg.episodes_per_iter = 2;
  acfg.eval_episodes = 2;
  acfg.hidden_dims = {16};
  acfg.opp.trunk_dims = {16};
  acfg.tao.trunk_dims = {16};
  acfg.mc_samples = 2;

  const auto re = run_re_ami(env, victims, acfg, 41);
  CHECK(re.protocol == "re-ami");
  CHECK(re.slot == spec.adversary_index());
  CHECK(re.seed == 41);
  CHECK(std::isfinite(re.adv_reward));
  CHECK(std::isfinite(re.team_reward));

  const auto pos = run_pos_ami(env, victims, acfg, 41);
  REQUIRE(pos.size() == spec.n_victims);
  for (std::size_t k = 0; k < pos.size(); ++k) {
    CHECK(pos[k].protocol == "pos-ami");
    CHECK(pos[k].slot == k);
    CHECK(std::isfinite(pos[k].team_reward));
  }

  std::ostringstream out;
  write_protocol_csv({re}, out);
  const std::string text = out.str();
  CHECK(text.find("protocol,slot,seed,adv_reward,team_reward,attack_aborted") ==
        0);
  CHECK(text.find("re-ami,") != std::string::npos);
}
