#pragma once

// Deterministic random number generation. Every draw in the library goes
// through this class: the engine is mt19937_64 (whose output sequence is
// fixed by the standard) and the real-valued transforms are written out by
// hand, because std::uniform_real_distribution / std::normal_distribution are
// implementation-defined and would break bit-for-bit reproducibility across
// standard libraries.
//
// Stream split rule: substream k of master seed s is seeded with
// splitmix64(s + k * 0x9E3779B97F4A7C15), i.e. the k-th output of a SplitMix64
// generator started at s. Consumers document which substream indices they use.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

#include "ncrsm/model.hpp"

namespace ncrsm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed + index * 0x9E3779B97F4A7C15ULL);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(substream_seed(seed, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Vector gaussian_vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

  // Index draw from a probability vector (0-based). Guards against the
  // cumulative sum falling a rounding error short of 1.
  int categorical(const Vector& probs) {
    const double u = uniform();
    double cum = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Draws from N(0, sigma) via the symmetric eigendecomposition square root,
// so positive semi-definite (including singular) covariances are handled.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Matrix& sigma) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sigma));
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    Vector evals = es.eigenvalues();
    for (int i = 0; i < evals.size(); ++i) {
      if (evals[i] < -1e-10 * scale) {
        throw ValidationError(
            "covariance passed to GaussianSampler is not positive "
            "semi-definite");
      }
      evals[i] = std::max(evals[i], 0.0);
    }
    sqrt_ = es.eigenvectors() * evals.cwiseSqrt().asDiagonal();
  }

  Vector draw(Rng& rng) const {
    return sqrt_ * rng.gaussian_vector(static_cast<int>(sqrt_.cols()));
  }

 private:
  Matrix sqrt_;
};

}  // namespace ncrsm
