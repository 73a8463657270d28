#include "ami/nn/gru.hpp"

#include <cmath>

#include "ami/nn/mlp.hpp"

namespace ami::nn {

void GruSpec::validate() const {
  if (input_dim < 1 || hidden_dim < 1)
    throw ConfigError("gru spec: dims must be >= 1");
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += M v where M is rows x cols row-major
void matvec_acc(const Vec& m, std::size_t rows, std::size_t cols, const Vec& v,
                Vec& y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* mr = &m[r * cols];
    for (std::size_t c = 0; c < cols; ++c) s += mr[c] * v[c];
    y[r] += s;
  }
}

// grads: gm += g v^T, and optionally dv += M^T g
void rank1_acc(const Vec& g, const Vec& v, Vec& gm, const Vec* m, Vec* dv) {
  const std::size_t rows = g.size();
  const std::size_t cols = v.size();
  for (std::size_t r = 0; r < rows; ++r) {
    double* gmr = &gm[r * cols];
    for (std::size_t c = 0; c < cols; ++c) gmr[c] += g[r] * v[c];
  }
  if (m && dv) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* mr = &(*m)[r * cols];
      for (std::size_t c = 0; c < cols; ++c) (*dv)[c] += mr[c] * g[r];
    }
  }
}
}  // namespace

ParameterSet init_gru_params(const GruSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ParameterSet p;
  const std::size_t h = spec.hidden_dim;
  const std::size_t in = spec.input_dim;
  for (const char* gate : {"r", "z", "n"}) {
    ParamBlock& w = p.add(std::string("W") + gate, {h, in});
    orthogonal_fill(w.values, h, in, 1.0, rng);
    ParamBlock& u = p.add(std::string("U") + gate, {h, h});
    orthogonal_fill(u.values, h, h, 1.0, rng);
    p.add(std::string("b") + gate, {h});
    p.add(std::string("c") + gate, {h});
  }
  return p;
}

Vec gru_step(const GruSpec& spec, const ParameterSet& params, const Vec& x,
             const Vec& h_prev, GruStepCache* cache) {
  spec.validate();
  if (x.size() != spec.input_dim || h_prev.size() != spec.hidden_dim)
    throw ConfigError("gru step: dim mismatch");
  const std::size_t h = spec.hidden_dim;
  const std::size_t in = spec.input_dim;

  auto gate_pre = [&](const char* g) {
    Vec a = params.block(std::string("b") + g).values;
    matvec_acc(params.block(std::string("W") + g).values, h, in, x, a);
    for (std::size_t i = 0; i < h; ++i)
      a[i] += params.block(std::string("c") + g).values[i];
    return a;
  };

  Vec ar = gate_pre("r");
  matvec_acc(params.block("Ur").values, h, h, h_prev, ar);
  Vec az = gate_pre("z");
  matvec_acc(params.block("Uz").values, h, h, h_prev, az);

  Vec r(h), z(h);
  for (std::size_t i = 0; i < h; ++i) {
    r[i] = sigmoid(ar[i]);
    z[i] = sigmoid(az[i]);
  }

  Vec hn_lin = params.block("cn").values;
  matvec_acc(params.block("Un").values, h, h, h_prev, hn_lin);

  Vec an = params.block("bn").values;
  matvec_acc(params.block("Wn").values, h, in, x, an);
  Vec n(h);
  for (std::size_t i = 0; i < h; ++i) n[i] = std::tanh(an[i] + r[i] * hn_lin[i]);

  Vec h_new(h);
  for (std::size_t i = 0; i < h; ++i)
    h_new[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];

  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->r = std::move(r);
    cache->z = std::move(z);
    cache->n = std::move(n);
    cache->hn_lin = std::move(hn_lin);
  }
  return h_new;
}

void gru_backward_step(const GruSpec& spec, const ParameterSet& params,
                       const GruStepCache& cache, const Vec& dh,
                       ParameterSet& grads, Vec& dh_prev, Vec* dx) {
  const std::size_t h = spec.hidden_dim;
  dh_prev.assign(h, 0.0);
  if (dx) dx->assign(spec.input_dim, 0.0);

  Vec dn(h), dz(h), da_n(h), dm(h), dr(h), da_r(h), da_z(h);
  for (std::size_t i = 0; i < h; ++i) {
    dn[i] = dh[i] * (1.0 - cache.z[i]);
    dz[i] = dh[i] * (cache.h_prev[i] - cache.n[i]);
    dh_prev[i] += dh[i] * cache.z[i];
    da_n[i] = dn[i] * (1.0 - cache.n[i] * cache.n[i]);
    dr[i] = da_n[i] * cache.hn_lin[i];
    dm[i] = da_n[i] * cache.r[i];
    da_r[i] = dr[i] * cache.r[i] * (1.0 - cache.r[i]);
    da_z[i] = dz[i] * cache.z[i] * (1.0 - cache.z[i]);
  }

  // n-gate: Wn x + bn contributes da_n; Un h + cn contributes dm.
  rank1_acc(da_n, cache.x, grads.block("Wn").values,
            dx ? &params.block("Wn").values : nullptr, dx);
  for (std::size_t i = 0; i < h; ++i) grads.block("bn").values[i] += da_n[i];
  rank1_acc(dm, cache.h_prev, grads.block("Un").values,
            &params.block("Un").values, &dh_prev);
  for (std::size_t i = 0; i < h; ++i) grads.block("cn").values[i] += dm[i];

  rank1_acc(da_r, cache.x, grads.block("Wr").values,
            dx ? &params.block("Wr").values : nullptr, dx);
  for (std::size_t i = 0; i < h; ++i) grads.block("br").values[i] += da_r[i];
  rank1_acc(da_r, cache.h_prev, grads.block("Ur").values,
            &params.block("Ur").values, &dh_prev);
  for (std::size_t i = 0; i < h; ++i) grads.block("cr").values[i] += da_r[i];

  rank1_acc(da_z, cache.x, grads.block("Wz").values,
            dx ? &params.block("Wz").values : nullptr, dx);
  for (std::size_t i = 0; i < h; ++i) grads.block("bz").values[i] += da_z[i];
  rank1_acc(da_z, cache.h_prev, grads.block("Uz").values,
            &params.block("Uz").values, &dh_prev);
  for (std::size_t i = 0; i < h; ++i) grads.block("cz").values[i] += da_z[i];
}

}  // namespace ami::nn
