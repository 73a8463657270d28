#pragma once

#include <random>
#include <vector>

#include "ami/common.hpp"
#include "ami/nn/params.hpp"

namespace ami::nn {

/// Single gated recurrent cell:
///   r = sigmoid(Wr x + br + Ur h + cr)
///   z = sigmoid(Wz x + bz + Uz h + cz)
///   n = tanh(Wn x + bn + r * (Un h + cn))
///   h' = (1 - z) * n + z * h
/// The one recurrent unit in the project; drives the detection encoder.
struct GruSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  void validate() const;
};

/// Blocks: Wr,Ur,br,cr, Wz,Uz,bz,cz, Wn,Un,bn,cn.
ParameterSet init_gru_params(const GruSpec& spec, std::mt19937_64& rng);

/// Per-step intermediates kept for backpropagation through time.
struct GruStepCache {
  Vec x, h_prev;
  Vec r, z, n;
  Vec hn_lin;  // Un h_prev + cn, gated by r inside n
};

/// One step; returns h'. Fills `cache` when non-null.
Vec gru_step(const GruSpec& spec, const ParameterSet& params, const Vec& x,
             const Vec& h_prev, GruStepCache* cache);

/// Backward through one step: dh is d(loss)/d(h'); accumulates parameter
/// gradients and returns gradients w.r.t. h_prev (and x if requested).
void gru_backward_step(const GruSpec& spec, const ParameterSet& params,
                       const GruStepCache& cache, const Vec& dh,
                       ParameterSet& grads, Vec& dh_prev, Vec* dx = nullptr);

}  // namespace ami::nn
