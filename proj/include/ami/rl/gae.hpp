#pragma once

#include <vector>

#include "ami/common.hpp"

namespace ami::rl {

struct GaeResult {
  Vec advantages;
  Vec returns;  // advantage + value, the critic regression target
};

/// Generalized advantage estimation over one trajectory:
///   delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// `values` holds V(s_t) aligned with rewards; `bootstrap_value` stands in
/// for V(s_T) when the trajectory was truncated rather than terminated.
GaeResult compute_gae(const Vec& rewards, const Vec& values,
                      const std::vector<unsigned char>& dones,
                      double bootstrap_value, double gamma, double lambda);

}  // namespace ami::rl
