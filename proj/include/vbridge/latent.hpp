#pragma once

#include <Eigen/Dense>
#include <string>

#include "vbridge/error.hpp"

namespace vbridge {

// Channel x frame latent. Column l holds the C coefficients of frame l.
template <typename Scalar>
using Latent = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using LatentTensor = Latent<float>;

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a,
                        const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

template <typename A>
void require_finite(const Eigen::MatrixBase<A>& a, const char* what) {
  if (!a.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite values");
  }
}

template <typename A>
double rms(const Eigen::MatrixBase<A>& a) {
  if (a.size() == 0) return 0.0;
  return std::sqrt(a.template cast<double>().squaredNorm() /
                   static_cast<double>(a.size()));
}

}  // namespace vbridge
