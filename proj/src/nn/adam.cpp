#include "ami/nn/adam.hpp"

#include <cmath>

namespace ami::nn {

AdamState make_adam(const ParameterSet& params, const AdamConfig& cfg) {
  AdamState st;
  st.cfg = cfg;
  st.m = params.zeros_like();
  st.v = params.zeros_like();
  return st;
}

void adam_step(ParameterSet& params, const ParameterSet& grads,
               AdamState& state) {
  auto& pb = params.blocks();
  const auto& gb = grads.blocks();
  auto& mb = state.m.blocks();
  auto& vb = state.v.blocks();
  if (pb.size() != gb.size() || pb.size() != mb.size())
    throw ConfigError("adam_step: layout mismatch");
  state.step += 1;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < pb.size(); ++i) {
    auto& p = pb[i].values;
    const auto& g = gb[i].values;
    auto& m = mb[i].values;
    auto& v = vb[i].values;
    if (p.size() != g.size())
      throw ConfigError("adam_step: block size mismatch at " + pb[i].name);
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      const double upd = state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
      if (!std::isfinite(upd))
        throw NumericError("adam_step: non-finite update in block " +
                           pb[i].name);
      p[j] -= upd;
    }
  }
}

double gradient_clip(ParameterSet& grads, double max_norm) {
  if (max_norm <= 0.0) throw ConfigError("gradient_clip: max_norm must be > 0");
  double sq = 0.0;
  for (const auto& b : grads.blocks()) {
    for (double g : b.values) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

}  // namespace ami::nn
