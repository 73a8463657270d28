#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ami/defense/detector.hpp"
#include "ami/env/gathergrid.hpp"
#include "ami/rng.hpp"

using namespace ami;
using namespace ami::defense;

namespace {

env::GatherGridConfig grid_cfg() {
  env::GatherGridConfig ec;
  ec.n_victims = 2;
  ec.grid = 5;
  ec.max_episode_len = 10;
  return ec;
}

/// Synthetic separable set: positives hover near +mu, negatives near -mu,
/// each episode drifting by its own offset so scores spread within a class.
std::vector<SignalEpisode> synthetic(std::size_t per_class, std::size_t steps,
                                     std::size_t dim, double mu,
                                     std::uint64_t seed,
                                     double jitter = 0.0) {
  auto eng = make_engine(seed, "synthetic", 0);
  std::vector<SignalEpisode> out;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t e = 0; e < per_class; ++e) {
      SignalEpisode ep;
      ep.label = static_cast<unsigned char>(c);
      const double center = (c == 1 ? mu : -mu) +
                            jitter * 2.0 * (nn::uniform01(eng) - 0.5);
      for (std::size_t t = 0; t < steps; ++t) {
        Vec f(dim);
        for (double& v : f) v = center + 0.3 * (nn::uniform01(eng) - 0.5);
        ep.features.push_back(std::move(f));
      }
      out.push_back(std::move(ep));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("signal names round trip and dims follow the spec") {
  for (auto s : {DetectorSignal::kObs, DetectorSignal::kState,
                 DetectorSignal::kAction}) {
    CHECK(parse_signal(signal_name(s)) == s);
  }
  CHECK_THROWS_AS(parse_signal("latent"), ConfigError);

  const auto spec = env::GatherGridEnv(grid_cfg()).spec();
  CHECK(signal_dim(spec, DetectorSignal::kObs) ==
        spec.n_agents() * spec.obs_dim);
  CHECK(signal_dim(spec, DetectorSignal::kState) == spec.state_dim);
  CHECK(signal_dim(spec, DetectorSignal::kAction) ==
        spec.n_agents() * spec.num_actions);
  const auto cfg = DetectorConfig::for_signal(spec, DetectorSignal::kState);
  CHECK(cfg.input_dim == spec.state_dim);
  CHECK(cfg.hidden_dim == 64);
}

TEST_CASE("detector config validation") {
  DetectorConfig cfg;
  cfg.input_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.input_dim = 4;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lr = 1e-3;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epochs = 2;
  cfg.validate();
}

TEST_CASE("recording produces labeled raw episodes deterministically") {
  const auto ec = grid_cfg();
  env::GatherGridEnv env(ec);
  const auto spec = env.spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 31);
  victims.freeze();

  AdversaryHandle adv;
  adv.spec.net.input_dim = spec.obs_dim;
  adv.spec.net.hidden_dims = {16};
  adv.spec.net.output_dim = spec.num_actions;
  adv.spec.discrete = true;
  auto eng = make_engine(5, "adv-init", 0);
  adv.params = rl::init_actor_params(adv.spec, eng);

  const auto benign = record_episodes(env, victims, nullptr, 3, 9);
  const auto benign2 = record_episodes(env, victims, nullptr, 3, 9);
  const auto attacked = record_episodes(env, victims, &adv, 3, 9);
  REQUIRE(benign.size() == 3);
  REQUIRE(attacked.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    const auto& ep = benign[e];
    REQUIRE(!ep.states.empty());
    CHECK(ep.states.size() == ep.joint_obs.size());
    CHECK(ep.states.size() == ep.actions.size());
    CHECK(ep.states.size() <= ec.max_episode_len);
    CHECK(ep.joint_obs[0].size() == spec.n_agents());
    REQUIRE(benign2[e].states.size() == ep.states.size());
    for (std::size_t t = 0; t < ep.states.size(); ++t) {
      for (std::size_t k = 0; k < ep.states[t].size(); ++k) {
        CHECK(benign2[e].states[t][k] == ep.states[t][k]);
      }
    }
    // Same reset seeds: first state agrees between arms, policies differ.
    for (std::size_t k = 0; k < ep.states[0].size(); ++k) {
      CHECK(attacked[e].states[0][k] == ep.states[0][k]);
    }
  }
  CHECK_THROWS_AS(record_episodes(env, victims, nullptr, 0, 9), ConfigError);
}

TEST_CASE("signal extraction shapes and one-hot actions") {
  const auto ec = grid_cfg();
  env::GatherGridEnv env(ec);
  const auto spec = env.spec();
  rl::VictimPolicySet victims(rl::VictimConfig::for_env(spec), 31);
  victims.freeze();
  const auto eps = record_episodes(env, victims, nullptr, 2, 9);

  for (auto sig : {DetectorSignal::kObs, DetectorSignal::kState,
                   DetectorSignal::kAction}) {
    const auto data = extract_signal(eps, spec, sig, 1);
    REQUIRE(data.size() == eps.size());
    for (const auto& ep : data) {
      CHECK(ep.label == 1);
      for (const auto& f : ep.features) {
        CHECK(f.size() == signal_dim(spec, sig));
      }
    }
  }
  const auto acts = extract_signal(eps, spec, DetectorSignal::kAction, 0);
  for (std::size_t e = 0; e < eps.size(); ++e) {
    for (std::size_t t = 0; t < eps[e].actions.size(); ++t) {
      for (std::size_t agent = 0; agent < spec.n_agents(); ++agent) {
        const std::size_t chosen = eps[e].actions[t].discrete[agent];
        for (std::size_t a = 0; a < spec.num_actions; ++a) {
          const double want = a == chosen ? 1.0 : 0.0;
          CHECK(acts[e].features[t][agent * spec.num_actions + a] == want);
        }
      }
    }
  }
  const auto st = extract_signal(eps, spec, DetectorSignal::kState, 0);
  CHECK(st[0].features[0][0] == eps[0].states[0][0]);
}

TEST_CASE("label shuffle preserves the label multiset") {
  auto data = synthetic(6, 3, 2, 1.0, 1);
  auto eng = make_engine(2, "shuffle", 0);
  shuffle_labels(data, eng);
  std::size_t ones = 0;
  for (const auto& ep : data) ones += ep.label;
  CHECK(ones == 6);
}

TEST_CASE("detector separates a synthetic signal") {
  DetectorConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_dim = 16;
  cfg.epochs = 12;
  cfg.minibatch_num = 4;

  auto train_set = synthetic(20, 6, 3, 1.0, 7);
  auto eval_set = synthetic(10, 6, 3, 1.0, 8);

  Detector det(cfg, 5);
  auto eng = make_engine(5, "det-train", 0);
  const auto stats = det.train(train_set, eng);
  CHECK(stats.warnings.empty());
  REQUIRE(stats.epoch_loss.size() == cfg.epochs);
  CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
  CHECK(stats.train_accuracy > 0.95);

  for (const auto& ep : eval_set) {
    const Vec probs = det.score(ep.features);
    REQUIRE(probs.size() == ep.features.size());
    for (double p : probs) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
  CHECK(episode_auc(det, eval_set) > 0.95);

  const auto curve = accuracy_curve(det, eval_set);
  REQUIRE(!curve.empty());
  CHECK(curve.back().accuracy >= curve.front().accuracy);
  CHECK(curve.back().auc > 0.95);

  std::ostringstream out;
  write_accuracy_csv(curve, out);
  CHECK(out.str().rfind("t,accuracy,auc\n", 0) == 0);
}

TEST_CASE("shuffled labels destroy the detector's edge") {
  DetectorConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_dim = 16;
  cfg.epochs = 6;
  cfg.minibatch_num = 4;

  // Weak class offset under strong per-episode drift, the regime recorded
  // episodes live in: after the shuffle no learnable signal remains.
  auto train_set = synthetic(40, 6, 3, 0.2, 7, 1.0);
  auto shuffle_eng = make_engine(3, "label-shuffle", 0);
  shuffle_labels(train_set, shuffle_eng);
  const auto eval_set = synthetic(20, 6, 3, 0.2, 8, 1.0);

  Detector det(cfg, 5);
  auto eng = make_engine(5, "det-train", 0);
  det.train(train_set, eng);
  const double auc = episode_auc(det, eval_set);
  CHECK(auc > 0.3);
  CHECK(auc < 0.7);
}

TEST_CASE("imbalanced classes raise a warning") {
  auto data = synthetic(20, 4, 2, 1.0, 7);
  data.resize(23);  // 20 negatives, 3 positives
  DetectorConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_dim = 8;
  cfg.epochs = 1;
  Detector det(cfg, 5);
  auto eng = make_engine(5, "det-train", 0);
  const auto stats = det.train(data, eng);
  REQUIRE(!stats.warnings.empty());
  CHECK(stats.warnings.front().find("class imbalance") != std::string::npos);
}

TEST_CASE("detector guards its inputs") {
  DetectorConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_dim = 8;
  Detector det(cfg, 5);
  CHECK_THROWS_AS(det.score({}), ConfigError);
  CHECK_THROWS_AS(det.score({{1.0, 2.0}}), ConfigError);
  auto eng = make_engine(5, "det-train", 0);
  CHECK_THROWS_AS(det.train({}, eng), ConfigError);
  std::vector<SignalEpisode> empty_ep(1);
  CHECK_THROWS_AS(det.train(empty_ep, eng), ConfigError);
}

TEST_CASE("detector training is deterministic and checkpoints round trip") {
  DetectorConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_dim = 8;
  cfg.epochs = 3;
  const auto data = synthetic(8, 4, 3, 1.0, 7);

  Detector a(cfg, 5), b(cfg, 5);
  auto ea = make_engine(5, "det-train", 0);
  auto eb = make_engine(5, "det-train", 0);
  a.train(data, ea);
  b.train(data, eb);
  CHECK(a.params().content_hash() == b.params().content_hash());

  const std::string path = "test_detector.ckpt";
  a.save(path);
  Detector fresh(cfg, 99);
  CHECK(fresh.params().content_hash() != a.params().content_hash());
  fresh.load(path);
  CHECK(fresh.params().content_hash() == a.params().content_hash());

  DetectorConfig other = cfg;
  other.hidden_dim = 16;
  Detector wrong(other, 5);
  CHECK_THROWS_AS(wrong.load(path), ConfigError);
  std::remove(path.c_str());
}
