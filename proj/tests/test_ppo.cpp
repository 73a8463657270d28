#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "ami/nn/heads.hpp"
#include "ami/rl/ppo.hpp"
#include "ami/rng.hpp"

using namespace ami;
using namespace ami::rl;

namespace {

void check_param_grads(nn::ParameterSet& params, const nn::ParameterSet& analytic,
                       const std::function<double(const nn::ParameterSet&)>& loss) {
  const double h = 1e-6;
  for (auto& blk : params.blocks()) {
    const auto& ref = analytic.block(blk.name);
    for (std::size_t i = 0; i < blk.values.size(); ++i) {
      const double keep = blk.values[i];
      blk.values[i] = keep + h;
      const double up = loss(params);
      blk.values[i] = keep - h;
      const double dn = loss(params);
      blk.values[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = ref.values[i];
      const double scale = std::max({std::fabs(fd), std::fabs(an), 1e-6});
      INFO("block ", blk.name, " index ", i, " fd ", fd, " analytic ", an);
      CHECK(std::fabs(fd - an) / scale < 1e-4);
    }
  }
}

ActorSpec small_discrete_actor() {
  ActorSpec spec;
  spec.net.input_dim = 2;
  spec.net.hidden_dims = {5};
  spec.net.output_dim = 3;
  spec.net.activation = nn::Activation::kTanh;
  spec.discrete = true;
  return spec;
}

ActorSpec small_gaussian_actor() {
  ActorSpec spec;
  spec.net.input_dim = 2;
  spec.net.hidden_dims = {5};
  spec.net.output_dim = 2;
  spec.net.activation = nn::Activation::kTanh;
  spec.discrete = false;
  return spec;
}

double huber(double err, double delta) {
  const double a = std::fabs(err);
  return a <= delta ? 0.5 * err * err : delta * (a - 0.5 * delta);
}

}  // namespace

TEST_CASE("continuous actor carries a log-std block starting at 0.5 std") {
  const ActorSpec spec = small_gaussian_actor();
  auto eng = make_engine(3, "actor-init", 0);
  const auto params = init_actor_params(spec, eng);
  REQUIRE(params.has("log_std"));
  for (const double v : params.block("log_std").values) {
    CHECK(v == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  }
  const auto dist = actor_forward(spec, params, {0.4, -0.3});
  REQUIRE(dist.kind == nn::ActionDistribution::Kind::kContinuous);
  CHECK(std::exp(dist.log_std[0]) == doctest::Approx(0.5).epsilon(1e-12));
  // Output gain keeps the initial mean close to zero.
  CHECK(std::fabs(dist.mean[0]) < 0.1);
}

TEST_CASE("discrete log-prob gradient matches finite differences") {
  const ActorSpec spec = small_discrete_actor();
  auto eng = make_engine(4, "actor-fd", 0);
  auto params = init_actor_params(spec, eng, 0.8);
  const Vec x{0.7, -0.4};
  const std::size_t action = 2;

  nn::MlpCache cache;
  const auto dist = actor_forward(spec, params, x, &cache);
  nn::ParameterSet grads = params.zeros_like();
  DistGrad dg;
  dg.d_logits = grad_log_prob_logits(dist, action);
  actor_backward(spec, params, cache, dg, grads);

  check_param_grads(params, grads, [&](const nn::ParameterSet& p) {
    return nn::head_log_prob(actor_forward(spec, p, x), action);
  });
}

TEST_CASE("discrete entropy gradient matches finite differences") {
  const ActorSpec spec = small_discrete_actor();
  auto eng = make_engine(5, "actor-fd", 1);
  auto params = init_actor_params(spec, eng, 1.2);
  const Vec x{-0.3, 0.9};

  nn::MlpCache cache;
  const auto dist = actor_forward(spec, params, x, &cache);
  nn::ParameterSet grads = params.zeros_like();
  DistGrad dg;
  dg.d_logits = grad_entropy_logits(dist);
  actor_backward(spec, params, cache, dg, grads);

  check_param_grads(params, grads, [&](const nn::ParameterSet& p) {
    return nn::head_entropy(actor_forward(spec, p, x));
  });
}

TEST_CASE("Gaussian log-prob gradient matches finite differences") {
  const ActorSpec spec = small_gaussian_actor();
  auto eng = make_engine(6, "actor-fd", 2);
  auto params = init_actor_params(spec, eng, 0.7);
  const Vec x{0.2, 0.5};
  const Vec action{0.3, -0.8};

  nn::MlpCache cache;
  const auto dist = actor_forward(spec, params, x, &cache);
  nn::ParameterSet grads = params.zeros_like();
  DistGrad dg;
  grad_log_prob_gaussian(dist, action, dg.d_mean, dg.d_log_std);
  actor_backward(spec, params, cache, dg, grads);

  check_param_grads(params, grads, [&](const nn::ParameterSet& p) {
    return nn::head_log_prob(actor_forward(spec, p, x), action);
  });
}

TEST_CASE("Gaussian entropy responds to log-std with unit gradient") {
  const ActorSpec spec = small_gaussian_actor();
  auto eng = make_engine(7, "actor-fd", 3);
  auto params = init_actor_params(spec, eng);
  const Vec x{0.1, 0.1};

  nn::MlpCache cache;
  const auto dist = actor_forward(spec, params, x, &cache);
  nn::ParameterSet grads = params.zeros_like();
  DistGrad dg;
  dg.d_log_std.assign(2, 1.0);
  actor_backward(spec, params, cache, dg, grads);

  check_param_grads(params, grads, [&](const nn::ParameterSet& p) {
    return nn::head_entropy(actor_forward(spec, p, x));
  });
}

TEST_CASE("minibatch partition covers every index exactly once") {
  auto eng = make_engine(8, "minibatch", 0);
  for (const auto& [n, b] : {std::pair<std::size_t, std::size_t>{10, 3},
                             {10, 1},
                             {3, 8},
                             {40, 40}}) {
    const auto chunks = minibatch_indices(n, b, eng);
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (const auto& c : chunks) {
      CHECK(!c.empty());
      lo = std::min(lo, c.size());
      hi = std::max(hi, c.size());
      for (const auto i : c) {
        REQUIRE(i < n);
        ++seen[i];
      }
    }
    CHECK(hi - lo <= 1);
    CHECK(std::accumulate(seen.begin(), seen.end(), 0) ==
          static_cast<int>(n));
    for (const int s : seen) CHECK(s == 1);
  }
}

TEST_CASE("binding clip freezes the policy for positive advantages") {
  const ActorSpec spec = small_discrete_actor();
  auto eng = make_engine(9, "ppo-clip", 0);
  auto params = init_actor_params(spec, eng, 0.5);
  auto adam = nn::make_adam(params, {});

  PpoConfig cfg;
  cfg.ppo_epochs = 1;
  cfg.entropy_coef = 0.0;
  cfg.normalize_advantages = false;

  PpoSample s;
  s.input = {0.5, 0.5};
  s.action_d = 1;
  const auto dist = actor_forward(spec, params, s.input);
  // ratio = exp(logp_new - logp_old) = 10, far outside the clip range
  s.old_log_prob = nn::head_log_prob(dist, 1) - std::log(10.0);

  SUBCASE("positive advantage: min takes the flat clipped branch") {
    s.advantage = 1.0;
    const auto before = params.content_hash();
    auto run = make_engine(9, "ppo-clip-run", 0);
    const auto stats = ppo_actor_update(spec, params, adam, cfg, {s}, run);
    CHECK(params.content_hash() == before);
    CHECK(stats.clip_fraction == doctest::Approx(1.0));
    CHECK(stats.policy_loss ==
          doctest::Approx(-(1.0 + cfg.clip) * 1.0).epsilon(1e-9));
  }

  SUBCASE("negative advantage: the unclipped branch still penalizes") {
    s.advantage = -1.0;
    const auto before = params.content_hash();
    auto run = make_engine(9, "ppo-clip-run", 1);
    ppo_actor_update(spec, params, adam, cfg, {s}, run);
    CHECK(params.content_hash() != before);
  }
}

TEST_CASE("non-finite ratios are skipped and counted, not trained on") {
  const ActorSpec spec = small_discrete_actor();
  auto eng = make_engine(10, "ppo-skip", 0);
  auto params = init_actor_params(spec, eng, 0.5);
  auto adam = nn::make_adam(params, {});

  PpoConfig cfg;
  cfg.ppo_epochs = 2;
  cfg.entropy_coef = 0.0;
  cfg.normalize_advantages = false;

  PpoSample s;
  s.input = {0.1, -0.1};
  s.action_d = 0;
  s.old_log_prob = -std::numeric_limits<double>::infinity();
  s.advantage = 3.0;

  const auto before = params.content_hash();
  auto run = make_engine(10, "ppo-skip-run", 0);
  const auto stats = ppo_actor_update(spec, params, adam, cfg, {s}, run);
  CHECK(stats.skipped_ratios == 2);  // once per epoch
  CHECK(params.content_hash() == before);
}

TEST_CASE("uniform advantages normalize to zero and leave the policy alone") {
  const ActorSpec spec = small_discrete_actor();
  auto eng = make_engine(11, "ppo-norm", 0);
  auto params = init_actor_params(spec, eng, 0.5);
  auto adam = nn::make_adam(params, {});

  PpoConfig cfg;
  cfg.ppo_epochs = 3;
  cfg.entropy_coef = 0.0;

  std::vector<PpoSample> batch;
  for (int i = 0; i < 6; ++i) {
    PpoSample s;
    s.input = {0.3 * i, -0.2 * i};
    s.action_d = static_cast<std::size_t>(i % 3);
    s.old_log_prob =
        nn::head_log_prob(actor_forward(spec, params, s.input), s.action_d);
    s.advantage = 5.0;  // identical everywhere
    batch.push_back(std::move(s));
  }

  const auto before = params.content_hash();
  auto run = make_engine(11, "ppo-norm-run", 0);
  ppo_actor_update(spec, params, adam, cfg, batch, run);
  CHECK(params.content_hash() == before);
}

TEST_CASE("policy update is deterministic under a fixed engine") {
  const ActorSpec spec = small_discrete_actor();
  auto eng = make_engine(12, "ppo-det", 0);
  auto params_a = init_actor_params(spec, eng, 0.5);
  auto params_b = params_a;
  auto adam_a = nn::make_adam(params_a, {});
  auto adam_b = nn::make_adam(params_b, {});

  PpoConfig cfg;
  cfg.ppo_epochs = 4;
  cfg.minibatch_num = 2;

  std::vector<PpoSample> batch;
  auto sample_eng = make_engine(12, "ppo-det-samples", 0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 16; ++i) {
    PpoSample s;
    s.input = {u(sample_eng), u(sample_eng)};
    const auto dist = actor_forward(spec, params_a, s.input);
    s.action_d = nn::sample_discrete(dist, sample_eng);
    s.old_log_prob = nn::head_log_prob(dist, s.action_d);
    s.advantage = u(sample_eng);
    batch.push_back(std::move(s));
  }

  auto run_a = make_engine(12, "ppo-det-run", 0);
  auto run_b = make_engine(12, "ppo-det-run", 0);
  ppo_actor_update(spec, params_a, adam_a, cfg, batch, run_a);
  ppo_actor_update(spec, params_b, adam_b, cfg, batch, run_b);
  CHECK(params_a.content_hash() == params_b.content_hash());
}

TEST_CASE("repeated updates steer a discrete bandit toward the paid action") {
  const ActorSpec spec = small_discrete_actor();
  auto eng = make_engine(13, "ppo-bandit", 0);
  auto params = init_actor_params(spec, eng);
  nn::AdamConfig acfg;
  acfg.lr = 0.03;
  auto adam = nn::make_adam(params, acfg);

  PpoConfig cfg;
  const Vec x{1.0, 0.0};
  const std::size_t target = 2;

  const double p0 = actor_forward(spec, params, x).probs[target];
  auto sample_eng = make_engine(13, "ppo-bandit-samples", 0);
  for (int round = 0; round < 10; ++round) {
    std::vector<PpoSample> batch;
    for (int i = 0; i < 64; ++i) {
      PpoSample s;
      s.input = x;
      const auto dist = actor_forward(spec, params, x);
      s.action_d = nn::sample_discrete(dist, sample_eng);
      s.old_log_prob = nn::head_log_prob(dist, s.action_d);
      s.advantage = s.action_d == target ? 1.0 : -1.0;
      batch.push_back(std::move(s));
    }
    auto run = make_engine(13, "ppo-bandit-run", round);
    const auto stats = ppo_actor_update(spec, params, adam, cfg, batch, run);
    CHECK(std::isfinite(stats.policy_loss));
    CHECK(stats.entropy > 0.0);
    CHECK(stats.entropy <= std::log(3.0) + 1e-9);
  }
  const double p1 = actor_forward(spec, params, x).probs[target];
  CHECK(p0 < 0.45);
  CHECK(p1 > 0.6);
}

TEST_CASE("repeated updates shift a Gaussian bandit mean upward") {
  const ActorSpec spec = small_gaussian_actor();
  auto eng = make_engine(14, "ppo-gauss", 0);
  auto params = init_actor_params(spec, eng);
  nn::AdamConfig acfg;
  acfg.lr = 0.01;
  auto adam = nn::make_adam(params, acfg);

  PpoConfig cfg;
  const Vec x{0.5, -0.5};

  CHECK(std::fabs(actor_forward(spec, params, x).mean[0]) < 0.1);
  auto sample_eng = make_engine(14, "ppo-gauss-samples", 0);
  for (int round = 0; round < 20; ++round) {
    std::vector<PpoSample> batch;
    for (int i = 0; i < 64; ++i) {
      PpoSample s;
      s.input = x;
      const auto dist = actor_forward(spec, params, x);
      s.action_c = nn::sample_gaussian(dist, sample_eng);
      s.old_log_prob = nn::head_log_prob(dist, s.action_c);
      s.advantage = s.action_c[0];  // pay for large first coordinates
      batch.push_back(std::move(s));
    }
    auto run = make_engine(14, "ppo-gauss-run", round);
    ppo_actor_update(spec, params, adam, cfg, batch, run);
  }
  CHECK(actor_forward(spec, params, x).mean[0] > 0.2);
  CHECK(params.finite());
}

TEST_CASE("critic Huber gradient matches finite differences") {
  nn::MLPSpec spec;
  spec.input_dim = 2;
  spec.hidden_dims = {4};
  spec.output_dim = 1;
  spec.activation = nn::Activation::kTanh;
  auto eng = make_engine(15, "critic-fd", 0);
  auto params = nn::init_mlp_params(spec, eng, 1.0);
  const Vec x{0.3, -0.2};
  const double delta = 0.5;

  const double v0 = nn::mlp_forward(spec, params, x)[0];
  for (const double ret : {v0 + 2.0, v0 - 0.1}) {
    nn::MlpCache cache;
    const double v = nn::mlp_forward_cached(spec, params, x, cache)[0];
    const double err = v - ret;
    nn::ParameterSet grads = params.zeros_like();
    nn::mlp_backward_cached(spec, params, cache,
                            {std::clamp(err, -delta, delta)}, grads);
    check_param_grads(params, grads, [&](const nn::ParameterSet& p) {
      return huber(nn::mlp_forward(spec, p, x)[0] - ret, delta);
    });
  }
}

TEST_CASE("critic update regresses toward stored returns") {
  nn::MLPSpec spec;
  spec.input_dim = 1;
  spec.hidden_dims = {8};
  spec.output_dim = 1;
  spec.activation = nn::Activation::kTanh;
  auto eng = make_engine(16, "critic-fit", 0);
  auto params = nn::init_mlp_params(spec, eng, 1.0);
  nn::AdamConfig acfg;
  acfg.lr = 0.02;
  auto adam = nn::make_adam(params, acfg);

  PpoConfig cfg;
  cfg.ppo_epochs = 5;
  cfg.use_huber = true;
  cfg.huber_delta = 10.0;

  std::vector<PpoSample> batch;
  for (int i = 0; i < 8; ++i) {
    PpoSample s;
    s.critic_input = {i / 4.0 - 1.0};
    s.ret = 3.0 * s.critic_input[0];
    batch.push_back(std::move(s));
  }

  double first = 0.0, last = 0.0;
  for (int round = 0; round < 40; ++round) {
    auto run = make_engine(16, "critic-fit-run", round);
    const double loss =
        ppo_critic_update(spec, params, adam, cfg, batch, run);
    if (round == 0) first = loss;
    last = loss;
  }
  CHECK(last < first * 0.05);
  for (const auto& s : batch) {
    CHECK(nn::mlp_forward(spec, params, s.critic_input)[0] ==
          doctest::Approx(s.ret).epsilon(0.2));
  }
}

TEST_CASE("critic update insists on a scalar head") {
  nn::MLPSpec spec;
  spec.input_dim = 1;
  spec.hidden_dims = {4};
  spec.output_dim = 2;
  auto eng = make_engine(17, "critic-shape", 0);
  auto params = nn::init_mlp_params(spec, eng);
  auto adam = nn::make_adam(params, {});
  PpoSample s;
  s.critic_input = {0.0};
  s.ret = 1.0;
  auto run = make_engine(17, "critic-shape-run", 0);
  CHECK_THROWS_AS(
      ppo_critic_update(spec, params, adam, {}, {s}, run), ConfigError);
}

TEST_CASE("empty batches and bad configs are rejected") {
  const ActorSpec spec = small_discrete_actor();
  auto eng = make_engine(18, "ppo-cfg", 0);
  auto params = init_actor_params(spec, eng);
  auto adam = nn::make_adam(params, {});
  auto run = make_engine(18, "ppo-cfg-run", 0);
  CHECK_THROWS_AS(ppo_actor_update(spec, params, adam, {}, {}, run),
                  ConfigError);
  PpoConfig bad;
  bad.minibatch_num = 0;
  PpoSample s;
  s.input = {0.0, 0.0};
  CHECK_THROWS_AS(ppo_actor_update(spec, params, adam, bad, {s}, run),
                  ConfigError);
  bad = PpoConfig{};
  bad.ppo_epochs = 0;
  CHECK_THROWS_AS(ppo_actor_update(spec, params, adam, bad, {s}, run),
                  ConfigError);
}
