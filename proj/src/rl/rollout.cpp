#include "ami/rl/rollout.hpp"

#include "ami/rl/gae.hpp"

namespace ami::rl {

std::size_t RolloutBuffer::total_steps() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.size();
  return n;
}

void RolloutBuffer::clear() {
  episodes.clear();
  advantages.clear();
  returns.clear();
}

void RolloutBuffer::compute_advantages(double gamma, double lambda,
                                       const Vec& bootstrap_values) {
  if (!bootstrap_values.empty() &&
      bootstrap_values.size() != episodes.size()) {
    throw ConfigError("bootstrap_values must match episode count");
  }
  advantages.assign(episodes.size(), {});
  returns.assign(episodes.size(), {});
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& ep = episodes[e];
    Vec rewards(ep.size()), values(ep.size());
    std::vector<unsigned char> dones(ep.size());
    for (std::size_t t = 0; t < ep.size(); ++t) {
      rewards[t] = ep[t].reward;
      values[t] = ep[t].value;
      dones[t] = ep[t].done ? 1 : 0;
    }
    const double boot = bootstrap_values.empty() ? 0.0 : bootstrap_values[e];
    GaeResult res = compute_gae(rewards, values, dones, boot, gamma, lambda);
    advantages[e] = std::move(res.advantages);
    returns[e] = std::move(res.returns);
  }
}

std::vector<PpoSample> flatten_samples(const RolloutBuffer& buffer) {
  if (buffer.advantages.size() != buffer.episodes.size()) {
    throw ProtocolError("flatten_samples called before compute_advantages");
  }
  std::vector<PpoSample> out;
  for (std::size_t e = 0; e < buffer.episodes.size(); ++e) {
    const auto& ep = buffer.episodes[e];
    for (std::size_t t = 0; t < ep.size(); ++t) {
      for (const auto& ag : ep[t].agents) {
        PpoSample s;
        s.input = ag.input;
        s.action_d = ag.action_d;
        s.action_c = ag.action_c;
        s.old_log_prob = ag.log_prob;
        s.advantage = buffer.advantages[e][t];
        s.ret = buffer.returns[e][t];
        s.critic_input = ep[t].critic_input;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

}  // namespace ami::rl
