#include <algorithm>
#include <cmath>

#include "vbridge/denoiser.hpp"
#include "vbridge/random.hpp"

namespace vbridge {

GradientCheckResult gradient_check(const DenoiserConfig& config, std::uint64_t seed, int frames,
                                   int t, double h) {
  using Mat = Latent<double>;
  DenoiserParams<double> params = init_params<double>(config, seed);
  // Non-zero biases and shifts so every parameter path is exercised.
  Rng rng(mix_seed(seed, 11));
  std::normal_distribution<double> normal(0.0, 0.1);
  for (auto& p : params.tensors()) {
    if (p.value.cols() == 1 || p.name.find("shift") != std::string::npos) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += normal(rng);
    }
  }
  const Mat z = gaussian_latent<double>(config.latent_channels, frames, rng);
  const Mat weights = gaussian_latent<double>(config.latent_channels, frames, rng);
  GuidanceRow<double> row;
  const GuidanceRow<double>* row_ptr = nullptr;
  if (config.guidance_enabled) {
    row = gaussian_latent<double>(1, frames, rng);
    row_ptr = &row;
  }
  auto loss = [&](const DenoiserParams<double>& p) {
    return forward(p, z, t, row_ptr).cwiseProduct(weights).sum();
  };

  ForwardTrace<double> trace;
  forward(params, z, t, row_ptr, &trace);
  DenoiserParams<double> grads = params.zeros_like();
  backward(params, trace, weights, grads);

  GradientCheckResult result;
  for (std::size_t k = 0; k < params.tensors().size(); ++k) {
    auto& value = params.tensors()[k].value;
    const auto& grad = grads.tensors()[k].value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + h;
      const double up = loss(params);
      value.data()[i] = saved - h;
      const double down = loss(params);
      value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      const double err = std::abs(analytic - numeric) / denom;
      if (err > result.max_relative_error || result.checked == 0) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        if (err >= result.max_relative_error) result.worst_parameter = params.tensors()[k].name;
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace vbridge
