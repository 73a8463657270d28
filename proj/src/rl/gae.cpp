#include "ami/rl/gae.hpp"

namespace ami::rl {

GaeResult compute_gae(const Vec& rewards, const Vec& values,
                      const std::vector<unsigned char>& dones,
                      double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw ConfigError("compute_gae: misaligned inputs");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double cont = dones[k] ? 0.0 : 1.0;
    const double next_v = (k + 1 < n) ? values[k + 1] : bootstrap_value;
    const double delta = rewards[k] + gamma * next_v * cont - values[k];
    acc = delta + gamma * lambda * cont * acc;
    out.advantages[k] = acc;
    out.returns[k] = acc + values[k];
  }
  if (!all_finite(out.advantages)) {
    throw NumericError("compute_gae: non-finite advantage");
  }
  return out;
}

}  // namespace ami::rl
