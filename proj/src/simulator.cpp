#include "ncrsm/simulator.hpp"

#include <sstream>

#include "ncrsm/rng.hpp"

namespace ncrsm {

SwitchingSequence draw_switching(const ModelParams& params, int T,
                                 std::uint64_t seed) {
  if (T < 1) throw ValidationError("draw_switching: T must be >= 1");
  if (!is_probability_vector(params.pi_c) ||
      !is_probability_vector(params.pi_a)) {
    throw ValidationError("draw_switching: pi_c/pi_a must be probability vectors");
  }
  Rng rng_c = Rng::stream(seed, kStreamSwitchCausal);
  Rng rng_a = Rng::stream(seed, kStreamSwitchAnticausal);
  SwitchingSequence seq;
  seq.s_c.resize(T);
  seq.s_a.resize(T);
  for (int t = 0; t < T; ++t) seq.s_c[t] = rng_c.categorical(params.pi_c);
  for (int t = 0; t < T; ++t) seq.s_a[t] = rng_a.categorical(params.pi_a);
  return seq;
}

NoiseDraw draw_noise(const ModelParams& params, const SwitchingSequence& seq,
                     std::uint64_t seed) {
  const Dims d = params.dims();
  const int T = seq.T();
  if (T < 1) throw ValidationError("draw_noise: empty switching sequence");

  std::vector<GaussianSampler> samp_c, samp_a;
  samp_c.reserve(params.Sigma_c.size());
  samp_a.reserve(params.Sigma_a.size());
  for (const auto& s : params.Sigma_c) samp_c.emplace_back(s);
  for (const auto& s : params.Sigma_a) samp_a.emplace_back(s);
  GaussianSampler samp_m(params.Sigma_m);

  Rng rng_c = Rng::stream(seed, kStreamNoiseCausal);
  Rng rng_a = Rng::stream(seed, kStreamNoiseAnticausal);
  Rng rng_m = Rng::stream(seed, kStreamNoiseMeasurement);

  NoiseDraw noise;
  noise.v_c.resize(d.n_xc, T);
  noise.v_a.resize(d.n_xa, T);
  noise.v_m.resize(d.n_y, T);
  for (int t = 0; t < T; ++t) {
    const int j = seq.s_c[t];
    const int l = seq.s_a[t];
    if (j < 0 || j >= d.m_c || l < 0 || l >= d.m_a) {
      throw ValidationError("draw_noise: switching sequence contains a mode "
                            "index outside the model's mode range");
    }
    noise.v_c.col(t) = samp_c[j].draw(rng_c);
    noise.v_a.col(t) = samp_a[l].draw(rng_a);
    noise.v_m.col(t) = samp_m.draw(rng_m);
  }
  return noise;
}

Trajectory simulate_with_noise(const ModelParams& params,
                               const SwitchingSequence& seq, const Vector& x_c0,
                               const Vector& x_aT1, const NoiseDraw& noise,
                               double norm_cap) {
  const Dims d = params.dims();
  validate_or_throw(params, d, /*require_positive_definite=*/false);
  const int T = seq.T();
  if (T < 1) throw ValidationError("simulate: empty switching sequence");
  if (static_cast<int>(seq.s_a.size()) != T) {
    throw ValidationError("simulate: s_c and s_a have different lengths");
  }
  if (x_c0.size() != d.n_xc || x_aT1.size() != d.n_xa) {
    throw ValidationError("simulate: boundary state dimensions do not match");
  }
  if (noise.v_c.cols() != T || noise.v_a.cols() != T || noise.v_m.cols() != T ||
      noise.v_c.rows() != d.n_xc || noise.v_a.rows() != d.n_xa ||
      noise.v_m.rows() != d.n_y) {
    throw ValidationError("simulate: noise draw shape does not match");
  }

  Trajectory traj;
  traj.x_c0 = x_c0;
  traj.x_aT1 = x_aT1;
  traj.seq_true = seq;
  traj.x_c_true.resize(d.n_xc, T);
  traj.x_a_true.resize(d.n_xa, T);
  traj.y.resize(d.n_y, T);

  // Causal chain, forward from x_c(0).
  double accum_sq = 0.0;
  Vector x = x_c0;
  for (int t = 0; t < T; ++t) {
    x = params.A_c[seq.s_c[t]] * x + noise.v_c.col(t);
    traj.x_c_true.col(t) = x;
    accum_sq += x.squaredNorm();
    if (!x.allFinite() || accum_sq / T > norm_cap) {
      std::ostringstream os;
      os << "simulate: causal state norm exploded by t=" << t + 1;
      throw DivergenceError(os.str(), t + 1);
    }
  }

  // Anticausal chain, backward from x_a(T+1).
  accum_sq = 0.0;
  x = x_aT1;
  for (int t = T - 1; t >= 0; --t) {
    x = params.A_a[seq.s_a[t]] * x + noise.v_a.col(t);
    traj.x_a_true.col(t) = x;
    accum_sq += x.squaredNorm();
    if (!x.allFinite() || accum_sq / T > norm_cap) {
      std::ostringstream os;
      os << "simulate: anticausal state norm exploded by t=" << t + 1;
      throw DivergenceError(os.str(), t + 1);
    }
  }

  for (int t = 0; t < T; ++t) {
    traj.y.col(t) = params.C_c[seq.s_c[t]] * traj.x_c_true.col(t) +
                    params.C_a[seq.s_a[t]] * traj.x_a_true.col(t) +
                    noise.v_m.col(t);
  }
  return traj;
}

Trajectory simulate(const ModelParams& params, const SwitchingSequence& seq,
                    const Vector& x_c0, const Vector& x_aT1, std::uint64_t seed,
                    double norm_cap) {
  return simulate_with_noise(params, seq, x_c0, x_aT1,
                             draw_noise(params, seq, seed), norm_cap);
}

}  // namespace ncrsm
