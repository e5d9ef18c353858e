#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace fbopt::detail {

// SplitMix64 step; used to derive independent sub-stream seeds so that the
// same run seed always produces the same sequence of auxiliary draws.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
  std::uint64_t r = splitmix64(s);
  return splitmix64(s) ^ r;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Eigen::VectorXd unit_vector(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::VectorXd v = gaussian_vector(rng, n);
  double nv = v.norm();
  while (nv < 1e-300) {
    v = gaussian_vector(rng, n);
    nv = v.norm();
  }
  return v / nv;
}

// Uniform draw from the closed Euclidean ball of the given radius.
inline Eigen::VectorXd ball_point(std::mt19937_64& rng, Eigen::Index n,
                                  double radius = 1.0) {
  Eigen::VectorXd u = unit_vector(rng, n);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double r = radius * std::pow(uni(rng), 1.0 / static_cast<double>(n));
  return r * u;
}

}  // namespace fbopt::detail
