#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "ami/attack/attack.hpp"
#include "ami/env/gathergrid.hpp"
#include "ami/env/rendezvous.hpp"
#include "ami/rng.hpp"

using namespace ami;
using namespace ami::attack;

namespace {

env::GatherGridConfig grid_cfg() {
  env::GatherGridConfig ec;
  ec.n_victims = 2;
  ec.grid = 5;
  ec.max_episode_len = 12;
  return ec;
}

env::RendezvousConfig swarm_cfg() {
  env::RendezvousConfig ec;
  ec.n_victims = 2;
  ec.max_episode_len = 10;
  return ec;
}

AttackConfig small_attack(const env::PosgSpec& spec) {
  AttackConfig cfg = AttackConfig::for_env(spec);
  cfg.iterations = 2;
  cfg.episodes_per_iter = 3;
  cfg.mc_samples = 4;
  cfg.hidden_dims = {16};
  cfg.opp.trunk_dims = {16};
  cfg.tao.trunk_dims = {16};
  return cfg;
}

std::string attack_csv(const std::vector<AttackIterationRow>& rows) {
  std::ostringstream out;
  write_attack_csv(rows, out);
  return out.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("method names round trip and reject unknowns") {
  for (auto m : {AttackMethod::kAmi, AttackMethod::kAdvPolicy,
                 AttackMethod::kBilateral, AttackMethod::kUntargeted,
                 AttackMethod::kMiBaseline}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK(parse_method("adv_policy") == AttackMethod::kAdvPolicy);
  CHECK_THROWS_AS(parse_method("gcu"), ConfigError);
  CHECK_THROWS_AS(parse_method(""), ConfigError);
}

TEST_CASE("variant influence selects its piece and rejects missing ones") {
  InfluencePieces p;
  p.distance_sum = -0.5;
  p.majority_sum = -1.25;
  p.minority_kl_sum = -0.75;
  p.mi_sum = 0.3;
  CHECK(variant_influence(AttackMethod::kAmi, p) == -0.5);
  CHECK(variant_influence(AttackMethod::kBilateral, p) == -0.5 + -1.25);
  CHECK(variant_influence(AttackMethod::kUntargeted, p) == -0.75);
  CHECK(variant_influence(AttackMethod::kMiBaseline, p) == 0.3);
  CHECK(variant_influence(AttackMethod::kAdvPolicy, p) == 0.0);

  InfluencePieces empty;
  CHECK(variant_influence(AttackMethod::kAdvPolicy, empty) == 0.0);
  CHECK_THROWS_AS(variant_influence(AttackMethod::kAmi, empty),
                  IntegrityError);
  CHECK_THROWS_AS(variant_influence(AttackMethod::kUntargeted, empty),
                  IntegrityError);
  CHECK_THROWS_AS(variant_influence(AttackMethod::kMiBaseline, empty),
                  IntegrityError);
  InfluencePieces partial;
  partial.distance_sum = -0.5;
  CHECK_THROWS_AS(variant_influence(AttackMethod::kBilateral, partial),
                  IntegrityError);

  // The ce metric can legitimately produce -inf; only NaN means missing.
  InfluencePieces sentinel;
  sentinel.distance_sum = -std::numeric_limits<double>::infinity();
  CHECK(variant_influence(AttackMethod::kAmi, sentinel) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("family defaults follow the published tables") {
  const auto gspec = env::GatherGridEnv(grid_cfg()).spec();
  const auto g = AttackConfig::for_env(gspec);
  CHECK(g.metric == influence::DistanceMetric::kL1);
  CHECK(g.lambda == 0.05);
  CHECK(g.actor_lr == 1e-4);
  CHECK(g.critic_lr == 1e-4);
  CHECK(g.opp.lr == 1e-4);
  CHECK(g.tao.lr == 1e-4);
  CHECK(g.tao.critic_lr == 1e-4);
  CHECK(g.ppo.ppo_epochs == 4);
  CHECK(g.ppo.minibatch_num == 1);
  CHECK_FALSE(g.ppo.use_huber);
  CHECK(g.eval_episodes == 20);
  CHECK(g.ppo.clip == 0.2);
  CHECK(g.ppo.entropy_coef == 0.01);
  CHECK(g.ppo.max_grad_norm == 10.0);
  CHECK(g.gamma == 0.99);
  CHECK(g.gae_lambda == 0.95);
  g.validate();

  const auto sspec = env::RendezvousEnv(swarm_cfg()).spec();
  const auto s = AttackConfig::for_env(sspec);
  CHECK(s.metric == influence::DistanceMetric::kProb);
  CHECK(s.lambda == 0.003);
  CHECK(s.actor_lr == 5e-5);
  CHECK(s.critic_lr == 5e-3);
  CHECK(s.opp.lr == 5e-5);
  CHECK(s.tao.lr == 5e-5);
  CHECK(s.tao.critic_lr == 5e-5);
  CHECK(s.ppo.ppo_epochs == 5);
  CHECK(s.ppo.minibatch_num == 40);
  CHECK(s.ppo.use_huber);
  CHECK(s.ppo.huber_delta == 10.0);
  CHECK(s.tao.use_huber);
  CHECK(s.eval_episodes == 32);
  CHECK(s.std_y_coef == 0.5);
  CHECK(s.std_x_coef == 1.0);
  s.validate();
}

TEST_CASE("config validation rejects bad schedules") {
  const auto spec = env::GatherGridEnv(grid_cfg()).spec();
  auto cfg = AttackConfig::for_env(spec);
  cfg.lambda = -0.01;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AttackConfig::for_env(spec);
  cfg.mc_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AttackConfig::for_env(spec);
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AttackConfig::for_env(spec);
  cfg.hidden_dims.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AttackConfig::for_env(spec);
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("running normalizer matches direct statistics") {
  RunningNorm norm;
  CHECK(norm.normalize(7.0) == 0.0);
  for (double x : {1.0, 2.0, 3.0, 4.0}) norm.observe(x);
  CHECK(norm.count() == 4);
  CHECK(norm.mean() == doctest::Approx(2.5).epsilon(1e-12));
  const double sd = std::sqrt(5.0 / 3.0);
  CHECK(norm.stddev() == doctest::Approx(sd).epsilon(1e-12));
  CHECK(norm.normalize(4.0) == doctest::Approx(1.5 / sd).epsilon(1e-12));

  RunningNorm flat;
  for (int i = 0; i < 3; ++i) flat.observe(2.0);
  // Zero spread: center only instead of dividing by the floor.
  CHECK(flat.normalize(5.0) == 3.0);
}

TEST_CASE("runner rejects unfrozen victims, bad dims and wrong metrics") {
  env::GatherGridEnv env(grid_cfg());
  const auto spec = env.spec();
  const auto cfg = small_attack(spec);

  rl::VictimPolicySet unfrozen(rl::VictimConfig::for_env(spec), 7);
  CHECK_THROWS_AS(AttackRunner(cfg, spec, unfrozen, 1), IntegrityError);

  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 7);
  victims.freeze();

  auto bad = cfg;
  bad.opp.state_dim += 1;
  CHECK_THROWS_AS(AttackRunner(bad, spec, victims, 1), ConfigError);
  bad = cfg;
  bad.tao.num_actions += 1;
  CHECK_THROWS_AS(AttackRunner(bad, spec, victims, 1), ConfigError);
  bad = cfg;
  bad.metric = influence::DistanceMetric::kL1Mean;  // continuous only
  CHECK_THROWS_AS(AttackRunner(bad, spec, victims, 1), ConfigError);

  AttackRunner runner(cfg, spec, victims, 1);
  auto other_cfg = grid_cfg();
  other_cfg.n_victims = 3;
  env::GatherGridEnv other(other_cfg);
  CHECK_THROWS_AS(runner.run(other), ConfigError);
  CHECK_THROWS_AS(runner.evaluate(other, 2, 0), ConfigError);
}

TEST_CASE("attack loop orders phases and keeps the reward composition exact") {
  env::GatherGridEnv env(grid_cfg());
  const auto spec = env.spec();
  const auto cfg = small_attack(spec);
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 7);
  victims.freeze();

  AttackRunner runner(cfg, spec, victims, 11);
  rl::AttackScope scope(victims);
  const auto result = runner.run(env);
  CHECK_NOTHROW(scope.verify());  // black box: no policy or value reads

  REQUIRE_FALSE(result.aborted);
  REQUIRE(result.metrics.size() == 2);
  const std::vector<std::string> want = {
      "iter0/rollout", "iter0/opp-fit", "iter0/tao-update", "iter0/influence",
      "iter0/adv-update", "iter1/rollout", "iter1/opp-fit",
      "iter1/tao-update", "iter1/influence", "iter1/adv-update"};
  REQUIRE(runner.events().size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(runner.events()[i] == want[i]);
  }

  CHECK(result.env_steps > 0);
  CHECK(result.metrics.back().env_steps == result.env_steps);
  CHECK(result.metrics[0].env_steps < result.metrics[1].env_steps);
  for (const auto& row : result.metrics) {
    CHECK(std::isfinite(row.adv_reward_mean));
    CHECK(std::isfinite(row.influence_mean));
    CHECK(std::isfinite(row.nll_opp_model));
    CHECK(row.nll_opp_model >= 0.0);  // discrete NLL is a positive entropy
    CHECK(row.wallclock_s >= 0.0);
  }

  REQUIRE(runner.step_logs().size() == result.env_steps);
  for (const auto& log : runner.step_logs()) {
    REQUIRE(log.distances.size() == spec.n_victims);
    for (double d : log.distances) {
      CHECK(d <= 0.0);  // l1 metric bounds
      CHECK(d >= -2.0);
    }
    // Exact composition, not approximate: the shaped reward is built from
    // these fields and logged unchanged.
    CHECK(log.r_ami == log.r_alpha + cfg.lambda * log.influence_used);
  }
  CHECK(runner.influence_norm().count() == result.env_steps);
}

TEST_CASE("adv-policy reduces to ami with lambda zero bitwise") {
  const auto ec = grid_cfg();
  const auto spec = env::GatherGridEnv(ec).spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 7);
  victims.freeze();

  auto ami_cfg = small_attack(spec);
  ami_cfg.method = AttackMethod::kAmi;
  ami_cfg.lambda = 0.0;
  auto adv_cfg = small_attack(spec);
  adv_cfg.method = AttackMethod::kAdvPolicy;
  adv_cfg.lambda = 0.05;  // ignored: adv-policy forces lambda to zero

  env::GatherGridEnv env_a(ec), env_b(ec);
  AttackRunner a(ami_cfg, spec, victims, 3);
  AttackRunner b(adv_cfg, spec, victims, 3);
  const auto ra = a.run(env_a);
  const auto rb = b.run(env_b);

  REQUIRE_FALSE(ra.aborted);
  REQUIRE_FALSE(rb.aborted);
  CHECK(attack_csv(ra.metrics) == attack_csv(rb.metrics));
  CHECK(a.adversary_actor().content_hash() == b.adversary_actor().content_hash());
  CHECK(a.adversary_critic().content_hash() ==
        b.adversary_critic().content_hash());
  CHECK(a.opponent_model().params().content_hash() ==
        b.opponent_model().params().content_hash());
  CHECK(a.oracle().actor_params().content_hash() ==
        b.oracle().actor_params().content_hash());

  REQUIRE(a.step_logs().size() == b.step_logs().size());
  for (std::size_t i = 0; i < a.step_logs().size(); ++i) {
    CHECK(a.step_logs()[i].r_ami == a.step_logs()[i].r_alpha);
    CHECK(b.step_logs()[i].r_ami == b.step_logs()[i].r_alpha);
    CHECK(a.step_logs()[i].influence_used == b.step_logs()[i].influence_used);
  }
}

TEST_CASE("runs are deterministic across identical runners") {
  const auto ec = swarm_cfg();
  const auto spec = env::RendezvousEnv(ec).spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 4);
  victims.freeze();

  auto cfg = small_attack(spec);
  cfg.iterations = 1;
  cfg.episodes_per_iter = 2;
  cfg.mc_samples = 3;

  env::RendezvousEnv env_a(ec), env_b(ec);
  AttackRunner a(cfg, spec, victims, 5);
  AttackRunner b(cfg, spec, victims, 5);
  const auto ra = a.run(env_a);
  const auto rb = b.run(env_b);

  REQUIRE_FALSE(ra.aborted);
  CHECK(attack_csv(ra.metrics) == attack_csv(rb.metrics));
  CHECK(a.adversary_actor().content_hash() == b.adversary_actor().content_hash());
  CHECK(a.oracle().actor_params().content_hash() ==
        b.oracle().actor_params().content_hash());
  REQUIRE(a.step_logs().size() == rb.env_steps);
  for (std::size_t i = 0; i < a.step_logs().size(); ++i) {
    CHECK(a.step_logs()[i].influence_raw == b.step_logs()[i].influence_raw);
    for (double d : a.step_logs()[i].distances) {
      CHECK(d >= 0.0);  // prob metric is a density, non-negative
      CHECK(std::isfinite(d));
    }
  }
}

TEST_CASE("reward divergence rolls back to the last good state") {
  const auto ec = swarm_cfg();
  env::RendezvousEnv env(ec);
  const auto spec = env.spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 4);
  victims.freeze();

  auto cfg = small_attack(spec);
  cfg.iterations = 3;
  cfg.episodes_per_iter = 2;
  // Rendezvous adversary reward is a positive spread, so this always trips.
  cfg.divergence_limit = 1e-9;

  AttackRunner runner(cfg, spec, victims, 8);
  const auto h_actor = runner.adversary_actor().content_hash();
  const auto h_opp = runner.opponent_model().params().content_hash();
  const auto h_tao = runner.oracle().actor_params().content_hash();

  const auto result = runner.run(env);
  CHECK(result.aborted);
  CHECK(result.abort_reason.find("diverged") != std::string::npos);
  CHECK(result.metrics.empty());
  CHECK(result.env_steps == 0);
  REQUIRE(runner.events().size() == 1);
  CHECK(runner.events().back() == "iter0/rollback");
  CHECK(runner.step_logs().empty());
  CHECK(runner.influence_norm().count() == 0);
  CHECK(runner.adversary_actor().content_hash() == h_actor);
  CHECK(runner.opponent_model().params().content_hash() == h_opp);
  CHECK(runner.oracle().actor_params().content_hash() == h_tao);
}

TEST_CASE("non-finite parameters trigger rollback") {
  const auto ec = grid_cfg();
  env::GatherGridEnv env(ec);
  const auto spec = env.spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 7);
  victims.freeze();

  auto cfg = small_attack(spec);
  cfg.iterations = 1;
  AttackRunner runner(cfg, spec, victims, 2);

  const std::string path = "test_attack_poison.ckpt";
  runner.save(path);
  auto all = nn::load_checkpoint(path);
  all.blocks().front().values[0] = std::numeric_limits<double>::quiet_NaN();
  nn::save_checkpoint(all, path);
  runner.load(path);

  const auto result = runner.run(env);
  CHECK(result.aborted);
  CHECK_FALSE(result.abort_reason.empty());
  CHECK(result.metrics.empty());
  CHECK(runner.events().back() == "iter0/rollback");
  std::remove(path.c_str());
}

TEST_CASE("checkpoints round trip bit for bit") {
  const auto ec = grid_cfg();
  const auto spec = env::GatherGridEnv(ec).spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 7);
  victims.freeze();

  auto cfg = small_attack(spec);
  cfg.iterations = 1;
  env::GatherGridEnv env(ec);
  AttackRunner trained(cfg, spec, victims, 13);
  REQUIRE_FALSE(trained.run(env).aborted);

  const std::string pa = "test_attack_a.ckpt";
  const std::string pb = "test_attack_b.ckpt";
  trained.save(pa);
  AttackRunner fresh(cfg, spec, victims, 99);
  CHECK(fresh.adversary_actor().content_hash() !=
        trained.adversary_actor().content_hash());
  fresh.load(pa);
  CHECK(fresh.adversary_actor().content_hash() ==
        trained.adversary_actor().content_hash());
  CHECK(fresh.adversary_critic().content_hash() ==
        trained.adversary_critic().content_hash());
  CHECK(fresh.opponent_model().params().content_hash() ==
        trained.opponent_model().params().content_hash());
  CHECK(fresh.oracle().actor_params().content_hash() ==
        trained.oracle().actor_params().content_hash());
  CHECK(fresh.oracle().critic_params().content_hash() ==
        trained.oracle().critic_params().content_hash());
  fresh.save(pb);
  CHECK(slurp(pa) == slurp(pb));

  auto wide = cfg;
  wide.hidden_dims = {24};
  AttackRunner mismatched(wide, spec, victims, 1);
  CHECK_THROWS_AS(mismatched.load(pa), ConfigError);
  std::remove(pa.c_str());
  std::remove(pb.c_str());
}

TEST_CASE("evaluation is deterministic and controls cover both slots") {
  const auto ec = grid_cfg();
  const auto spec = env::GatherGridEnv(ec).spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 7);
  victims.freeze();

  const auto cfg = small_attack(spec);
  env::GatherGridEnv env(ec);
  const AttackRunner runner(cfg, spec, victims, 21);

  const auto e1 = runner.evaluate(env, 4, 17);
  const auto e2 = runner.evaluate(env, 4, 17);
  REQUIRE(e1.adv_episode_rewards.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(e1.adv_episode_rewards[i] == e2.adv_episode_rewards[i]);
    CHECK(e1.team_episode_rewards[i] == e2.team_episode_rewards[i]);
  }
  CHECK(e1.adv_reward.n == 4);
  CHECK(std::isfinite(e1.team_reward.mean));

  const auto coop =
      evaluate_control(env, victims, ControlSlot::kCooperative, 4, 17);
  const auto coop2 =
      evaluate_control(env, victims, ControlSlot::kCooperative, 4, 17);
  const auto rnd = evaluate_control(env, victims, ControlSlot::kRandom, 4, 17);
  REQUIRE(coop.team_episode_rewards.size() == 4);
  REQUIRE(rnd.team_episode_rewards.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(coop.team_episode_rewards[i] == coop2.team_episode_rewards[i]);
  }
  CHECK(std::isfinite(rnd.adv_reward.mean));
  CHECK_THROWS_AS(
      evaluate_control(env, victims, ControlSlot::kRandom, 0, 17),
      ConfigError);
}

TEST_CASE("csv writers split deterministic metrics from timing") {
  AttackIterationRow row;
  row.iteration = 0;
  row.env_steps = 36;
  row.adv_reward_mean = 1.5;
  row.adv_reward_ci95 = 0.25;
  row.influence_mean = -0.5;
  row.nll_opp_model = 2.0;
  row.wallclock_s = 0.125;

  std::ostringstream metrics;
  write_attack_csv({row}, metrics);
  CHECK(metrics.str() ==
        "iteration,env_steps,adv_reward_mean,adv_reward_ci95,"
        "influence_mean,nll_opp_model\n0,36,1.5,0.25,-0.5,2\n");

  std::ostringstream timing;
  write_timing_csv({row}, timing);
  CHECK(timing.str() == "iteration,wallclock_s\n0,0.125\n");
}
