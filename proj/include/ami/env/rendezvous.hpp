#pragma once

#include <cstdint>
#include <vector>

#include "ami/env/posg.hpp"

namespace ami::env {

/// Continuous swarm rendezvous: differential-drive robots in a walled square
/// arena are rewarded for gathering. Per-step action per robot is the wheel
/// speed pair (omega_l, omega_r).
struct RendezvousConfig {
  std::size_t n_victims = 4;    // plus one adversary slot
  double arena = 2.0;           // side length in meters
  double wheel_radius = 0.02;   // m
  double axle_length = 0.05;    // m
  double dt = 0.1;              // s
  double wheel_speed_max = 6.0; // rad/s, box is [-max, max]
  std::size_t max_episode_len = 200;
  double discount = 0.99;
};

/// Positions, headings and the derived pairwise matrices. M_d[i][j] is the
/// Euclidean distance; M_a[i][j] is the angle of the line i->j measured
/// against robot i's heading, wrapped to (-pi, pi].
struct SwarmState {
  std::vector<double> x, y, heading;
  std::vector<Vec> dist;   // M_d
  std::vector<Vec> angle;  // M_a
};

class RendezvousEnv final : public Environment {
 public:
  explicit RendezvousEnv(const RendezvousConfig& cfg);

  const PosgSpec& spec() const override { return spec_; }
  void reset(std::uint64_t seed) override;
  StepRecord step(const JointAction& actions) override;
  Vec state() const override;
  Vec observe(std::size_t agent) const override;
  bool done() const override { return done_; }
  std::size_t timestep() const override { return t_; }

  const SwarmState& swarm() const { return swarm_; }

  /// Deterministic initializer for scripted scenarios: starts a fresh
  /// episode with the given poses instead of sampled ones.
  void place(const std::vector<double>& x, const std::vector<double>& y,
             const std::vector<double>& heading);

  /// r_d = -sum_{i<j} ||p_i - p_j||; r_c = sum_i ||a_i||; r = r_d - 0.001 r_c.
  /// The adversary channel is -r_d alone: the control penalty is a training
  /// aid, not an attack concern.
  static double distance_reward(const SwarmState& s);
  static double control_cost(const std::vector<Vec>& actions);

 private:
  void recompute_matrices();

  RendezvousConfig cfg_;
  PosgSpec spec_;
  SwarmState swarm_;
  std::size_t t_ = 0;
  bool done_ = true;
};

}  // namespace ami::env
