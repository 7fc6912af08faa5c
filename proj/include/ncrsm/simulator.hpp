#pragma once

// Forward/backward simulation of the switching two-subsystem model:
//
//   x_c(t) = A_c(s_c(t)) x_c(t-1) + v_c(t),   t = 1..T, from known x_c(0)
//   x_a(t) = A_a(s_a(t)) x_a(t+1) + v_a(t),   t = T..1, from known x_a(T+1)
//   y(t)   = C_c(s_c(t)) x_c(t) + C_a(s_a(t)) x_a(t) + v_m(t)
//
// with v_c ~ N(0, Sigma_c(s_c(t))), v_a ~ N(0, Sigma_a(s_a(t))),
// v_m ~ N(0, Sigma_m), and s_c, s_a drawn i.i.d. from pi_c, pi_a,
// independently of each other and of the noises.

#include <Eigen/Dense>

#include <cstdint>

#include "ncrsm/model.hpp"

namespace ncrsm {

// A simulated (or loaded) dataset. Columns index time; column j holds t=j+1.
// States/sequences are optional (absent after loading a measurement-only
// file); the boundary states are always present.
struct Trajectory {
  Matrix y;                    // n_y x T
  Matrix x_c_true;             // n_xc x T, 0x0 when unknown
  Matrix x_a_true;             // n_xa x T, 0x0 when unknown
  SwitchingSequence seq_true;  // empty when unknown
  Vector x_c0;                 // boundary state x_c(0)
  Vector x_aT1;                // boundary state x_a(T+1)

  int T() const { return static_cast<int>(y.cols()); }
  bool has_true_states() const { return x_c_true.size() > 0; }
  bool has_true_seq() const { return !seq_true.s_c.empty(); }
};

// Noise realizations with column t-1 holding the draw for time t.
struct NoiseDraw {
  Matrix v_c;  // n_xc x T
  Matrix v_a;  // n_xa x T
  Matrix v_m;  // n_y x T
};

// Substream indices under the master seed (see rng.hpp for the split rule).
enum : std::uint64_t {
  kStreamSwitchCausal = 0,
  kStreamSwitchAnticausal = 1,
  kStreamNoiseCausal = 2,
  kStreamNoiseAnticausal = 3,
  kStreamNoiseMeasurement = 4,
};

// Draws the two mode sequences i.i.d. from pi_c and pi_a on separate
// substreams, so the sequences are independent of each other and of any
// noise drawn from the same master seed.
SwitchingSequence draw_switching(const ModelParams& params, int T,
                                 std::uint64_t seed);

// Draws process and measurement noise for a fixed mode sequence.
NoiseDraw draw_noise(const ModelParams& params, const SwitchingSequence& seq,
                     std::uint64_t seed);

// Deterministic core: runs the two recursions and the output equation for
// given switching, boundaries and noise. Throws DivergenceError when the
// time-averaged squared state norm of either subsystem exceeds norm_cap.
Trajectory simulate_with_noise(const ModelParams& params,
                               const SwitchingSequence& seq, const Vector& x_c0,
                               const Vector& x_aT1, const NoiseDraw& noise,
                               double norm_cap = 1e6);

// Convenience wrapper: draw_noise + simulate_with_noise.
Trajectory simulate(const ModelParams& params, const SwitchingSequence& seq,
                    const Vector& x_c0, const Vector& x_aT1, std::uint64_t seed,
                    double norm_cap = 1e6);

}  // namespace ncrsm
