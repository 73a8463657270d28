#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "ami/attack/oppmodel.hpp"
#include "ami/nn/heads.hpp"
#include "ami/rng.hpp"

using namespace ami;
using namespace ami::attack;

namespace {

OppModelConfig small_discrete_cfg() {
  OppModelConfig cfg;
  cfg.state_dim = 3;
  cfg.n_agents = 3;
  cfg.n_victims = 2;
  cfg.discrete = true;
  cfg.num_actions = 3;
  cfg.trunk_dims = {32};
  return cfg;
}

OppModelConfig small_continuous_cfg() {
  OppModelConfig cfg;
  cfg.state_dim = 2;
  cfg.n_agents = 3;
  cfg.n_victims = 2;
  cfg.discrete = false;
  cfg.action_dim = 2;
  cfg.trunk_dims = {32};
  return cfg;
}

}  // namespace

TEST_CASE("encode lays out state then one action block per agent") {
  env::JointAction act;
  act.discrete = {0, 2, 1};
  const Vec enc = encode_state_actions({1.0, 2.0}, act, true, 3, 3, 0);
  const Vec want = {1.0, 2.0, 1, 0, 0, 0, 0, 1, 0, 1, 0};
  REQUIRE(enc.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(enc[i] == want[i]);

  env::JointAction cact;
  cact.continuous = {{1.0, 2.0}, {3.0, 4.0}};
  const Vec cenc = encode_state_actions({0.5}, cact, false, 2, 0, 2);
  const Vec cwant = {0.5, 1.0, 2.0, 3.0, 4.0};
  REQUIRE(cenc.size() == cwant.size());
  for (std::size_t i = 0; i < cwant.size(); ++i) CHECK(cenc[i] == cwant[i]);
}

TEST_CASE("encode rejects malformed joint actions") {
  env::JointAction act;
  act.discrete = {0, 1};
  CHECK_THROWS_AS(encode_state_actions({1.0}, act, true, 3, 3, 0),
                  ConfigError);
  act.discrete = {0, 1, 5};
  CHECK_THROWS_AS(encode_state_actions({1.0}, act, true, 3, 3, 0),
                  ProtocolError);
  env::JointAction cact;
  cact.continuous = {{1.0}, {2.0, 3.0}};
  CHECK_THROWS_AS(encode_state_actions({1.0}, cact, false, 2, 0, 2),
                  ConfigError);
}

TEST_CASE("config validation rejects inconsistent setups") {
  OppModelConfig cfg = small_discrete_cfg();
  cfg.n_victims = 3;  // no adversary slot left
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_discrete_cfg();
  cfg.num_actions = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_discrete_cfg();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_continuous_cfg();
  cfg.action_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("nll agrees with a direct per-victim log-prob average") {
  const OppModelConfig cfg = small_discrete_cfg();
  OpponentModel model(cfg, 9001);
  auto eng = make_engine(9001, "nll-data", 0);
  std::vector<OppSample> data;
  for (int s = 0; s < 5; ++s) {
    OppSample smp;
    for (std::size_t i = 0; i < cfg.input_dim(); ++i) {
      smp.input.push_back(nn::normal01(eng));
    }
    smp.next_discrete = {static_cast<std::size_t>(s) % 3,
                         static_cast<std::size_t>(s + 1) % 3};
    data.push_back(std::move(smp));
  }
  double acc = 0.0;
  for (const auto& smp : data) {
    const auto preds = model.predict_all(smp.input);
    for (std::size_t i = 0; i < cfg.n_victims; ++i) {
      acc -= nn::head_log_prob(preds[i], smp.next_discrete[i]);
    }
  }
  const double want = acc / (5.0 * 2.0);
  CHECK(model.nll(data) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("learns a deterministic discrete rule from behavior") {
  // Victim i plays (phase + i) mod 3 next; the joint action is noise.
  const OppModelConfig cfg = small_discrete_cfg();
  OpponentModel model(cfg, 31);
  auto eng = make_engine(31, "opp-data", 0);
  std::vector<OppSample> data;
  for (int s = 0; s < 256; ++s) {
    const std::size_t phase = static_cast<std::size_t>(eng() % 3);
    OppSample smp;
    Vec state(3, 0.0);
    state[phase] = 1.0;
    env::JointAction act;
    for (int a = 0; a < 3; ++a) {
      act.discrete.push_back(static_cast<std::size_t>(eng() % 3));
    }
    smp.input = encode_state_actions(state, act, true, 3, 3, 0);
    smp.next_discrete = {phase % 3, (phase + 1) % 3};
    data.push_back(std::move(smp));
  }
  const double before = model.nll(data);
  auto fit_eng = make_engine(31, "opp-fit", 0);
  double after = before;
  for (int round = 0; round < 50; ++round) after = model.fit(data, fit_eng);
  CHECK(after < 0.1);
  CHECK(after < before * 0.2);
  std::size_t correct = 0;
  for (const auto& smp : data) {
    const auto preds = model.predict_all(smp.input);
    for (std::size_t i = 0; i < cfg.n_victims; ++i) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < preds[i].probs.size(); ++a) {
        if (preds[i].probs[a] > preds[i].probs[best]) best = a;
      }
      if (best == smp.next_discrete[i]) ++correct;
    }
  }
  CHECK(correct == 2 * data.size());
}

TEST_CASE("learns a linear continuous rule from behavior") {
  // Victim 0 tracks 0.5 * state, victim 1 tracks -state.
  const OppModelConfig cfg = small_continuous_cfg();
  OpponentModel model(cfg, 77);
  auto eng = make_engine(77, "opp-cdata", 0);
  std::vector<OppSample> data;
  for (int s = 0; s < 256; ++s) {
    Vec state = {2.0 * nn::uniform01(eng) - 1.0, 2.0 * nn::uniform01(eng) - 1.0};
    env::JointAction act;
    for (int a = 0; a < 3; ++a) {
      act.continuous.push_back({nn::normal01(eng), nn::normal01(eng)});
    }
    OppSample smp;
    smp.input = encode_state_actions(state, act, false, 3, 0, 2);
    smp.next_continuous = {{0.5 * state[0] + 0.02 * nn::normal01(eng),
                            0.5 * state[1] + 0.02 * nn::normal01(eng)},
                           {-state[0] + 0.02 * nn::normal01(eng),
                            -state[1] + 0.02 * nn::normal01(eng)}};
    data.push_back(std::move(smp));
  }
  const double before = model.nll(data);
  auto fit_eng = make_engine(77, "opp-cfit", 0);
  for (int round = 0; round < 80; ++round) model.fit(data, fit_eng);
  CHECK(model.nll(data) < before - 1.0);
  const Vec probe = {0.4, -0.6};
  env::JointAction zero;
  zero.continuous.assign(3, Vec(2, 0.0));
  const auto preds = model.predict_all(model.encode(probe, zero));
  CHECK(std::fabs(preds[0].mean[0] - 0.2) < 0.15);
  CHECK(std::fabs(preds[0].mean[1] - -0.3) < 0.15);
  CHECK(std::fabs(preds[1].mean[0] - -0.4) < 0.15);
  CHECK(std::fabs(preds[1].mean[1] - 0.6) < 0.15);
}

TEST_CASE("fit is deterministic under fixed seeds") {
  const OppModelConfig cfg = small_discrete_cfg();
  OpponentModel a(cfg, 5), b(cfg, 5);
  CHECK(a.params().content_hash() == b.params().content_hash());
  auto eng = make_engine(5, "det-data", 0);
  std::vector<OppSample> data;
  for (int s = 0; s < 32; ++s) {
    OppSample smp;
    for (std::size_t i = 0; i < cfg.input_dim(); ++i) {
      smp.input.push_back(nn::normal01(eng));
    }
    smp.next_discrete = {eng() % 3, eng() % 3};
    data.push_back(std::move(smp));
  }
  auto e1 = make_engine(5, "det-fit", 0);
  auto e2 = make_engine(5, "det-fit", 0);
  const double n1 = a.fit(data, e1);
  const double n2 = b.fit(data, e2);
  CHECK(n1 == n2);
  CHECK(a.params().content_hash() == b.params().content_hash());
}

TEST_CASE("discrete counterfactual equals the exact mixture") {
  const OppModelConfig cfg = small_discrete_cfg();
  OpponentModel model(cfg, 13);
  const Vec state = {0.3, -0.7, 1.1};
  env::JointAction act;
  act.discrete = {1, 0, 2};
  const auto policy = nn::ActionDistribution::discrete({0.2, 0.3, 0.5});

  const auto mix = counterfactual_expectation(model, state, act,
                                              cfg.n_victims, policy, 0,
                                              nullptr);
  // Reference: weight each adversary action by its policy probability.
  std::vector<Vec> want(cfg.n_victims, Vec(cfg.num_actions, 0.0));
  for (std::size_t k = 0; k < 3; ++k) {
    env::JointAction cf = act;
    cf.discrete[cfg.n_victims] = k;
    const auto preds = model.predict_all(model.encode(state, cf));
    for (std::size_t i = 0; i < cfg.n_victims; ++i) {
      for (std::size_t a = 0; a < cfg.num_actions; ++a) {
        want[i][a] += policy.probs[k] * preds[i].probs[a];
      }
    }
  }
  REQUIRE(mix.size() == cfg.n_victims);
  for (std::size_t i = 0; i < cfg.n_victims; ++i) {
    double total = 0.0;
    for (std::size_t a = 0; a < cfg.num_actions; ++a) {
      CHECK(mix[i].probs[a] == doctest::Approx(want[i][a]).epsilon(1e-12));
      total += mix[i].probs[a];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }

  // The executed adversary action must not influence the mixture.
  env::JointAction other = act;
  other.discrete[cfg.n_victims] = 0;
  const auto mix2 = counterfactual_expectation(model, state, other,
                                               cfg.n_victims, policy, 0,
                                               nullptr);
  for (std::size_t i = 0; i < cfg.n_victims; ++i) {
    for (std::size_t a = 0; a < cfg.num_actions; ++a) {
      CHECK(mix[i].probs[a] == mix2[i].probs[a]);
    }
  }
}

TEST_CASE("continuous counterfactual moment-matches the policy draws") {
  const OppModelConfig cfg = small_continuous_cfg();
  OpponentModel model(cfg, 21);
  const Vec state = {0.2, -0.4};
  env::JointAction act;
  act.continuous = {{0.1, 0.2}, {-0.3, 0.4}, {5.0, -5.0}};
  const auto policy = nn::ActionDistribution::gaussian({0.0, 0.5},
                                                       {-0.5, 0.0});
  const std::size_t m_draws = 6;
  auto eng = make_engine(21, "cf", 0);
  const auto mix = counterfactual_expectation(model, state, act,
                                              cfg.n_victims, policy, m_draws,
                                              &eng);

  // Replay the identical engine stream and moment-match by hand.
  auto replay = make_engine(21, "cf", 0);
  std::vector<Vec> mean_sum(cfg.n_victims, Vec(2, 0.0));
  std::vector<Vec> sq_sum(cfg.n_victims, Vec(2, 0.0));
  for (std::size_t m = 0; m < m_draws; ++m) {
    env::JointAction cf = act;
    cf.continuous[cfg.n_victims] = nn::sample_gaussian(policy, replay);
    const auto preds = model.predict_all(model.encode(state, cf));
    for (std::size_t i = 0; i < cfg.n_victims; ++i) {
      for (std::size_t k = 0; k < 2; ++k) {
        const double mu = preds[i].mean[k];
        const double var = std::exp(2.0 * preds[i].log_std[k]);
        mean_sum[i][k] += mu;
        sq_sum[i][k] += var + mu * mu;
      }
    }
  }
  for (std::size_t i = 0; i < cfg.n_victims; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      const double mu = mean_sum[i][k] / m_draws;
      const double var = std::max(sq_sum[i][k] / m_draws - mu * mu, 1e-12);
      CHECK(mix[i].mean[k] == doctest::Approx(mu).epsilon(1e-12));
      CHECK(mix[i].log_std[k] ==
            doctest::Approx(0.5 * std::log(var)).epsilon(1e-12));
    }
  }
}

TEST_CASE("continuous counterfactual demands an engine") {
  const OppModelConfig cfg = small_continuous_cfg();
  OpponentModel model(cfg, 3);
  env::JointAction act;
  act.continuous.assign(3, Vec(2, 0.0));
  const auto policy = nn::ActionDistribution::gaussian({0.0, 0.0},
                                                       {0.0, 0.0});
  CHECK_THROWS_AS(counterfactual_expectation(model, {0.0, 0.0}, act,
                                             cfg.n_victims, policy, 4,
                                             nullptr),
                  ProtocolError);
  auto eng = make_engine(3, "cf-bad", 0);
  CHECK_THROWS_AS(counterfactual_expectation(model, {0.0, 0.0}, act,
                                             cfg.n_victims, policy, 0, &eng),
                  ConfigError);
  CHECK_THROWS_AS(counterfactual_expectation(model, {0.0, 0.0}, act, 9,
                                             policy, 4, &eng),
                  ProtocolError);
}
