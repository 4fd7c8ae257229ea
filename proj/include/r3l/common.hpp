#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace r3l {

using StateVec = Eigen::VectorXd;
using ActionVec = Eigen::VectorXd;
using Rng = std::mt19937_64;

#ifndef R3L_VERSION_STRING
#define R3L_VERSION_STRING "0.1.0-unversioned"
#endif

inline const char* version() { return R3L_VERSION_STRING; }

// splitmix64; decorrelates sequential counters into independent seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based seed derivation: one master seed, arbitrarily many streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  return splitmix64(splitmix64(master) ^ splitmix64(counter * 0xd1342543de82ef95ULL + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Maps any angle into [-pi, pi]; pi maps to itself so hanging states are fixed points.
inline double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * M_PI);
  if (w < -M_PI) w = M_PI;
  return w;
}

inline double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Axis-aligned box; the normalization contract maps it affinely onto [-1, 1]^d.
struct Box {
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : low(std::move(lo)), high(std::move(hi)) {
    if (low.size() != high.size()) throw std::invalid_argument("Box: dimension mismatch");
    for (Eigen::Index i = 0; i < low.size(); ++i) {
      if (!(low[i] <= high[i])) throw std::invalid_argument("Box: low > high");
    }
  }

  Eigen::Index dim() const { return low.size(); }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    if (x.size() != dim()) return false;
    for (Eigen::Index i = 0; i < dim(); ++i) {
      if (!(x[i] >= low[i] - tol && x[i] <= high[i] + tol)) return false;
    }
    return true;
  }

  Eigen::VectorXd clip(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out = x;
    for (Eigen::Index i = 0; i < dim(); ++i) out[i] = r3l::clip(out[i], low[i], high[i]);
    return out;
  }

  Eigen::VectorXd sample_uniform(Rng& rng) const {
    Eigen::VectorXd out(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
      std::uniform_real_distribution<double> u(low[i], high[i]);
      out[i] = u(rng);
    }
    return out;
  }

  Eigen::VectorXd midpoint() const { return 0.5 * (low + high); }

  // Degenerate dimensions (low == high) normalize to 0.
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
      const double w = high[i] - low[i];
      out[i] = w > 0.0 ? 2.0 * (x[i] - low[i]) / w - 1.0 : 0.0;
    }
    return out;
  }

  Eigen::VectorXd denormalize(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
      out[i] = low[i] + 0.5 * (z[i] + 1.0) * (high[i] - low[i]);
    }
    return out;
  }
};

}  // namespace r3l
