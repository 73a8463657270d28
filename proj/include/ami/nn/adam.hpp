#pragma once

#include <cstdint>

#include "ami/nn/params.hpp"

namespace ami::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second-moment accumulators mirroring a ParameterSet layout.
struct AdamState {
  AdamConfig cfg;
  ParameterSet m;
  ParameterSet v;
  std::uint64_t step = 0;
};

AdamState make_adam(const ParameterSet& params, const AdamConfig& cfg);

/// Bias-corrected adaptive-moment update in place. Throws NumericError with
/// the offending block name if the update would become non-finite.
void adam_step(ParameterSet& params, const ParameterSet& grads,
               AdamState& state);

/// Scale gradients so the global L2 norm is at most max_norm; direction is
/// preserved. Returns the pre-clip norm.
double gradient_clip(ParameterSet& grads, double max_norm);

}  // namespace ami::nn
