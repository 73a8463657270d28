#include "ami/env/rendezvous.hpp"

#include <algorithm>
#include <cmath>

#include "ami/nn/heads.hpp"
#include "ami/rng.hpp"

namespace ami::env {

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace

RendezvousEnv::RendezvousEnv(const RendezvousConfig& cfg) : cfg_(cfg) {
  if (cfg.n_victims == 0) throw ConfigError("rendezvous: need victims");
  if (cfg.arena <= 0.0 || cfg.dt <= 0.0 || cfg.wheel_radius <= 0.0 ||
      cfg.axle_length <= 0.0 || cfg.wheel_speed_max <= 0.0) {
    throw ConfigError("rendezvous: non-positive physical constant");
  }
  const std::size_t n = cfg.n_victims + 1;
  spec_.n_victims = cfg.n_victims;
  spec_.state_dim = n * (n - 1) / 2 + 2 * n * (n - 1);
  spec_.obs_dim = 5 * (n - 1);
  spec_.discrete = false;
  spec_.action_dim = 2;
  spec_.action_low = -cfg.wheel_speed_max;
  spec_.action_high = cfg.wheel_speed_max;
  spec_.max_episode_len = cfg.max_episode_len;
  spec_.discount = cfg.discount;
  spec_.validate();
}

void RendezvousEnv::reset(std::uint64_t seed) {
  const std::size_t n = spec_.n_agents();
  swarm_.x.assign(n, 0.0);
  swarm_.y.assign(n, 0.0);
  swarm_.heading.assign(n, 0.0);
  auto rng = make_engine(seed, "rendezvous-reset");
  for (std::size_t i = 0; i < n; ++i) {
    swarm_.x[i] = nn::uniform01(rng) * cfg_.arena;
    swarm_.y[i] = nn::uniform01(rng) * cfg_.arena;
    swarm_.heading[i] = nn::uniform01(rng) * 2.0 * M_PI - M_PI;
  }
  recompute_matrices();
  t_ = 0;
  done_ = false;
}

void RendezvousEnv::place(const std::vector<double>& x,
                          const std::vector<double>& y,
                          const std::vector<double>& heading) {
  const std::size_t n = spec_.n_agents();
  if (x.size() != n || y.size() != n || heading.size() != n) {
    throw ProtocolError("rendezvous: place needs one pose per agent");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] < 0.0 || x[i] > cfg_.arena || y[i] < 0.0 || y[i] > cfg_.arena) {
      throw ProtocolError("rendezvous: placed position outside arena");
    }
  }
  swarm_.x = x;
  swarm_.y = y;
  swarm_.heading = heading;
  recompute_matrices();
  t_ = 0;
  done_ = false;
}

void RendezvousEnv::recompute_matrices() {
  const std::size_t n = spec_.n_agents();
  swarm_.dist.assign(n, Vec(n, 0.0));
  swarm_.angle.assign(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = swarm_.x[j] - swarm_.x[i];
      const double dy = swarm_.y[j] - swarm_.y[i];
      swarm_.dist[i][j] = std::hypot(dx, dy);
      swarm_.angle[i][j] = wrap_angle(std::atan2(dy, dx) - swarm_.heading[i]);
    }
  }
}

StepRecord RendezvousEnv::step(const JointAction& actions) {
  if (done_) throw ProtocolError("rendezvous: step on finished episode");
  const std::size_t n = spec_.n_agents();
  if (actions.continuous.size() != n) {
    throw ProtocolError("rendezvous: need one action per agent");
  }

  StepRecord rec;
  rec.state = state();
  rec.obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rec.obs.push_back(observe(i));

  rec.actions_continuous.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& a = actions.continuous[i];
    if (a.size() != 2 || !all_finite(a)) {
      throw ProtocolError("rendezvous: wheel action must be a finite pair");
    }
    Vec clipped = a;
    for (double& w : clipped) {
      const double c = std::clamp(w, spec_.action_low, spec_.action_high);
      if (c != w) rec.action_clipped = true;
      w = c;
    }
    rec.actions_continuous[i] = std::move(clipped);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double wl = rec.actions_continuous[i][0];
    const double wr = rec.actions_continuous[i][1];
    const double v = cfg_.wheel_radius * (wl + wr) / 2.0;
    const double omega = cfg_.wheel_radius * (wr - wl) / cfg_.axle_length;
    swarm_.x[i] += v * std::cos(swarm_.heading[i]) * cfg_.dt;
    swarm_.y[i] += v * std::sin(swarm_.heading[i]) * cfg_.dt;
    swarm_.heading[i] = wrap_angle(swarm_.heading[i] + omega * cfg_.dt);
    swarm_.x[i] = std::clamp(swarm_.x[i], 0.0, cfg_.arena);
    swarm_.y[i] = std::clamp(swarm_.y[i], 0.0, cfg_.arena);
  }
  recompute_matrices();

  const double r_d = distance_reward(swarm_);
  const double r_c = control_cost(rec.actions_continuous);
  rec.team_reward = r_d - 0.001 * r_c;
  rec.adversary_reward = -r_d;

  ++t_;
  done_ = t_ >= spec_.max_episode_len;
  rec.done = done_;
  return rec;
}

double RendezvousEnv::distance_reward(const SwarmState& s) {
  double sum = 0.0;
  const std::size_t n = s.x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) sum += s.dist[i][j];
  }
  return -sum;
}

double RendezvousEnv::control_cost(const std::vector<Vec>& actions) {
  double sum = 0.0;
  for (const Vec& a : actions) sum += l2_norm(a);
  return sum;
}

Vec RendezvousEnv::state() const {
  const std::size_t n = spec_.n_agents();
  Vec s;
  s.reserve(spec_.state_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) s.push_back(swarm_.dist[i][j]);
  }
  // angles enter as sin/cos pairs so the encoding is continuous at the wrap
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      s.push_back(std::sin(swarm_.angle[i][j]));
      s.push_back(std::cos(swarm_.angle[i][j]));
    }
  }
  return s;
}

Vec RendezvousEnv::observe(std::size_t agent) const {
  const std::size_t n = spec_.n_agents();
  if (agent >= n) throw ProtocolError("rendezvous: agent index out of range");
  Vec o;
  o.reserve(spec_.obs_dim);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != agent) o.push_back(swarm_.dist[agent][j]);
  }
  // theta: where i sees j; phi: where j sees i
  for (std::size_t j = 0; j < n; ++j) {
    if (j != agent) o.push_back(std::sin(swarm_.angle[agent][j]));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j != agent) o.push_back(std::cos(swarm_.angle[agent][j]));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j != agent) o.push_back(std::sin(swarm_.angle[j][agent]));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j != agent) o.push_back(std::cos(swarm_.angle[j][agent]));
  }
  return o;
}

}  // namespace ami::env
