#include "ami/env/gathergrid.hpp"

#include <cmath>
#include <numeric>

#include "ami/rng.hpp"

namespace ami::env {

GatherGridEnv::GatherGridEnv(const GatherGridConfig& cfg) : cfg_(cfg) {
  if (cfg.grid < 2) throw ConfigError("gathergrid: grid too small");
  const std::size_t n = cfg.n_victims + 1;
  if (n > cfg.grid * cfg.grid) {
    throw ConfigError("gathergrid: more agents than cells");
  }
  spec_.n_victims = cfg.n_victims;
  spec_.state_dim = 2 * n;
  spec_.obs_dim = 2 * n;
  spec_.discrete = true;
  spec_.num_actions = 5;
  spec_.max_episode_len = cfg.max_episode_len;
  spec_.discount = cfg.discount;
  spec_.validate();
}

void GatherGridEnv::reset(std::uint64_t seed) {
  const std::size_t n = spec_.n_agents();
  const std::size_t cells = cfg_.grid * cfg_.grid;
  // distinct starting cells via partial Fisher-Yates over cell ids
  std::vector<std::size_t> ids(cells);
  std::iota(ids.begin(), ids.end(), 0);
  auto rng = make_engine(seed, "gathergrid-reset");
  x_.assign(n, 0);
  y_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pick = i + rng() % (cells - i);
    std::swap(ids[i], ids[pick]);
    x_[i] = ids[i] % cfg_.grid;
    y_[i] = ids[i] / cfg_.grid;
  }
  t_ = 0;
  done_ = false;
}

void GatherGridEnv::place(const std::vector<std::size_t>& x,
                          const std::vector<std::size_t>& y) {
  const std::size_t n = spec_.n_agents();
  if (x.size() != n || y.size() != n) {
    throw ProtocolError("gathergrid: place needs one cell per agent");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] >= cfg_.grid || y[i] >= cfg_.grid) {
      throw ProtocolError("gathergrid: placed cell outside grid");
    }
  }
  x_ = x;
  y_ = y;
  t_ = 0;
  done_ = false;
}

bool GatherGridEnv::all_gathered() const {
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (x_[i] != x_[0] || y_[i] != y_[0]) return false;
  }
  return true;
}

StepRecord GatherGridEnv::step(const JointAction& actions) {
  if (done_) throw ProtocolError("gathergrid: step on finished episode");
  const std::size_t n = spec_.n_agents();
  if (actions.discrete.size() != n) {
    throw ProtocolError("gathergrid: need one action per agent");
  }

  StepRecord rec;
  rec.state = state();
  rec.obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rec.obs.push_back(observe(i));
  rec.actions_discrete = actions.discrete;

  const std::size_t top = cfg_.grid - 1;
  for (std::size_t i = 0; i < n; ++i) {
    switch (actions.discrete[i]) {
      case kStay:
        break;
      case kNorth:
        if (y_[i] < top) ++y_[i];
        break;
      case kSouth:
        if (y_[i] > 0) --y_[i];
        break;
      case kEast:
        if (x_[i] < top) ++x_[i];
        break;
      case kWest:
        if (x_[i] > 0) --x_[i];
        break;
      default:
        throw ProtocolError("gathergrid: invalid action id " +
                            std::to_string(actions.discrete[i]));
    }
  }

  rec.team_reward = team_reward(x_, y_);
  rec.adversary_reward = scatter_reward(x_, y_, spec_.n_victims);

  ++t_;
  done_ = t_ >= spec_.max_episode_len || all_gathered();
  rec.done = done_;
  return rec;
}

double GatherGridEnv::team_reward(const std::vector<std::size_t>& x,
                                  const std::vector<std::size_t>& y) {
  const double n = static_cast<double>(x.size());
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cx += static_cast<double>(x[i]);
    cy += static_cast<double>(y[i]);
  }
  cx /= n;
  cy /= n;
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += std::fabs(static_cast<double>(x[i]) - cx) +
           std::fabs(static_cast<double>(y[i]) - cy);
  }
  return -sum;
}

double GatherGridEnv::scatter_reward(const std::vector<std::size_t>& x,
                                     const std::vector<std::size_t>& y,
                                     std::size_t n_victims) {
  const double n = static_cast<double>(n_victims);
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n_victims; ++i) {
    cx += static_cast<double>(x[i]);
    cy += static_cast<double>(y[i]);
  }
  cx /= n;
  cy /= n;
  double sum = 0.0;
  for (std::size_t i = 0; i < n_victims; ++i) {
    sum += std::fabs(static_cast<double>(x[i]) - cx) +
           std::fabs(static_cast<double>(y[i]) - cy);
  }
  return sum;
}

Vec GatherGridEnv::state() const {
  const double scale = static_cast<double>(cfg_.grid - 1);
  Vec s;
  s.reserve(spec_.state_dim);
  for (std::size_t i = 0; i < x_.size(); ++i) {
    s.push_back(static_cast<double>(x_[i]) / scale);
    s.push_back(static_cast<double>(y_[i]) / scale);
  }
  return s;
}

Vec GatherGridEnv::observe(std::size_t agent) const {
  const std::size_t n = spec_.n_agents();
  if (agent >= n) throw ProtocolError("gathergrid: agent index out of range");
  const double scale = static_cast<double>(cfg_.grid - 1);
  Vec o;
  o.reserve(spec_.obs_dim);
  o.push_back(static_cast<double>(x_[agent]) / scale);
  o.push_back(static_cast<double>(y_[agent]) / scale);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == agent) continue;
    o.push_back((static_cast<double>(x_[j]) - static_cast<double>(x_[agent])) /
                scale);
    o.push_back((static_cast<double>(y_[j]) - static_cast<double>(y_[agent])) /
                scale);
  }
  return o;
}

}  // namespace ami::env
