#pragma once

#include <cstdint>
#include <random>

#include "vbridge/latent.hpp"

namespace vbridge {

using Rng = std::mt19937_64;

// Standard-normal latent, filled column by column.
template <typename Scalar>
Latent<Scalar> gaussian_latent(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Latent<Scalar> out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = static_cast<Scalar>(normal(rng));
  }
  return out;
}

// Derives an independent stream seed from a base seed and a tag.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace vbridge
