#include "ami/env/posg.hpp"

#include <ostream>

namespace ami::env {

void PosgSpec::validate() const {
  if (n_adversaries != 1) throw ConfigError("exactly one adversary slot");
  if (n_victims == 0) throw ConfigError("need at least one victim");
  if (max_episode_len < 1) throw ConfigError("episode length must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) {
    throw ConfigError("discount must lie in (0, 1]");
  }
  if (discrete) {
    if (num_actions < 2) throw ConfigError("discrete space needs >= 2 actions");
  } else {
    if (action_dim == 0) throw ConfigError("continuous space needs a dimension");
    if (!(action_low < action_high)) {
      throw ConfigError("action box must have positive width");
    }
  }
  if (state_dim == 0 || obs_dim == 0) {
    throw ConfigError("state and observation dims must be set");
  }
}

void write_trajectory_csv(const PosgSpec& spec,
                          const std::vector<std::vector<StepRecord>>& episodes,
                          std::ostream& out) {
  out << "episode,t,agent";
  for (std::size_t k = 0; k < spec.obs_dim; ++k) out << ",obs_" << k;
  if (spec.discrete) {
    out << ",action";
  } else {
    for (std::size_t k = 0; k < spec.action_dim; ++k) out << ",action_" << k;
  }
  out << ",r_adv,r_team,done\n";
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    for (std::size_t t = 0; t < episodes[e].size(); ++t) {
      const StepRecord& rec = episodes[e][t];
      for (std::size_t i = 0; i < rec.obs.size(); ++i) {
        out << e << ',' << t << ',' << i;
        for (double x : rec.obs[i]) out << ',' << x;
        if (spec.discrete) {
          out << ',' << rec.actions_discrete[i];
        } else {
          for (double x : rec.actions_continuous[i]) out << ',' << x;
        }
        out << ',' << rec.adversary_reward << ',' << rec.team_reward << ','
            << (rec.done ? 1 : 0) << '\n';
      }
    }
  }
}

}  // namespace ami::env
