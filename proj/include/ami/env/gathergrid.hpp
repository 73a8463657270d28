#pragma once

#include <cstdint>
#include <vector>

#include "ami/env/posg.hpp"

namespace ami::env {

/// Discrete gathering game on a walled G x G grid. The team is rewarded for
/// clustering around its own centroid; the adversary channel pays for
/// scattering the victim agents away from theirs. Actions: stay, north,
/// south, east, west; moves into a wall are ignored.
struct GatherGridConfig {
  std::size_t n_victims = 4;  // plus one adversary slot
  std::size_t grid = 7;
  std::size_t max_episode_len = 50;
  double discount = 0.99;
};

enum GatherAction : std::size_t {
  kStay = 0,
  kNorth = 1,
  kSouth = 2,
  kEast = 3,
  kWest = 4,
};

class GatherGridEnv final : public Environment {
 public:
  explicit GatherGridEnv(const GatherGridConfig& cfg);

  const PosgSpec& spec() const override { return spec_; }
  void reset(std::uint64_t seed) override;
  StepRecord step(const JointAction& actions) override;
  Vec state() const override;
  Vec observe(std::size_t agent) const override;
  bool done() const override { return done_; }
  std::size_t timestep() const override { return t_; }

  const std::vector<std::size_t>& xs() const { return x_; }
  const std::vector<std::size_t>& ys() const { return y_; }

  /// Deterministic initializer for scripted scenarios: starts a fresh
  /// episode with the given cells instead of sampled ones.
  void place(const std::vector<std::size_t>& x,
             const std::vector<std::size_t>& y);

  /// -sum_i Manhattan(p_i, centroid of all agents); 0 iff everyone shares
  /// a cell.
  static double team_reward(const std::vector<std::size_t>& x,
                            const std::vector<std::size_t>& y);
  /// +sum over the first n_victims agents of Manhattan distance to their own
  /// centroid (adversary slot excluded from both sum and centroid).
  static double scatter_reward(const std::vector<std::size_t>& x,
                               const std::vector<std::size_t>& y,
                               std::size_t n_victims);

 private:
  bool all_gathered() const;

  GatherGridConfig cfg_;
  PosgSpec spec_;
  std::vector<std::size_t> x_, y_;
  std::size_t t_ = 0;
  bool done_ = true;
};

}  // namespace ami::env
