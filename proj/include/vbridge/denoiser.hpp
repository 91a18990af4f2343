#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vbridge/latent.hpp"

namespace vbridge {

// Time-conditioned 1D U-Net over latent frames.
//
// Per level l the width is base_width * 2^l. Encoder levels run
// blocks_per_level residual TDNN blocks (SiLU -> dilated conv k -> SiLU ->
// 1x1 conv, plus identity), dilation 2^b for block b, then a stride-2
// kernel-2 conv down to the next level. Decoder stages run from the
// bottleneck upward: nearest x2 upsample and conv, channel concat with the
// encoder skip, 1x1 merge conv, FiLM from the time embedding, then
// residual blocks. The bottleneck stage skips the upsample/merge but keeps
// FiLM. A final SiLU + conv maps back to the latent channels.
struct DenoiserConfig {
  int latent_channels = 32;
  bool guidance_enabled = false;
  int base_width = 32;
  int num_levels = 3;
  int time_embed_dim = 64;
  int time_hidden = 128;
  int blocks_per_level = 2;
  int kernel_size = 3;

  int in_channels() const { return latent_channels + (guidance_enabled ? 1 : 0); }
  int width(int level) const { return base_width << level; }
  int frame_multiple() const { return 1 << (num_levels - 1); }
  void validate() const;
  bool operator==(const DenoiserConfig&) const = default;
};

template <typename Scalar>
struct Parameter {
  std::string name;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> value;
};

// Learnable tensors in a fixed enumeration order. The same type holds
// gradients.
template <typename Scalar>
class DenoiserParams {
 public:
  DenoiserParams() = default;
  explicit DenoiserParams(DenoiserConfig config);

  const DenoiserConfig& config() const { return config_; }
  std::vector<Parameter<Scalar>>& tensors() { return tensors_; }
  const std::vector<Parameter<Scalar>>& tensors() const { return tensors_; }
  const Parameter<Scalar>& at(const std::string& name) const;
  Parameter<Scalar>& at(const std::string& name);

  // Total scalar count across all tensors.
  std::size_t size() const;
  void set_zero();
  DenoiserParams zeros_like() const;

  template <typename Other>
  DenoiserParams<Other> cast() const {
    DenoiserParams<Other> out(config_);
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      out.tensors()[i].value = tensors_[i].value.template cast<Other>();
    }
    return out;
  }

 private:
  DenoiserConfig config_;
  std::vector<Parameter<Scalar>> tensors_;
};

// Analytic scalar count for a configuration.
std::size_t parameter_count(const DenoiserConfig& config);

template <typename Scalar>
DenoiserParams<Scalar> init_params(const DenoiserConfig& config,
                                   std::uint64_t seed);

// Interleaved sin/cos pairs: e[2i] = sin(t w_i), e[2i+1] = cos(t w_i),
// w_i = 10000^(-i / (dim / 2)). dim must be even.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> time_embedding(int t, int dim);

template <typename Scalar>
using GuidanceRow = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Intermediate activations kept for the reverse pass.
template <typename Scalar>
struct ForwardTrace {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  int frames = 0;
  int padded_frames = 0;
  int t = 0;
  // Every conv input column matrix and every pre-activation, in
  // execution order. Indexed by the layer walk in denoiser.cpp.
  std::vector<Mat> cols;
  std::vector<Mat> pre;
  Mat film_in;
};

// Predicts the effective noise. guidance == nullptr on a guidance-enabled
// model substitutes a zero channel. Output is latent_channels x frames.
template <typename Scalar>
Latent<Scalar> forward(const DenoiserParams<Scalar>& params,
                       const Latent<Scalar>& z_in, int t,
                       const GuidanceRow<Scalar>* guidance = nullptr,
                       ForwardTrace<Scalar>* trace = nullptr);

// Accumulates parameter gradients for the traced forward pass into grads
// and returns the gradient with respect to the network input
// (in_channels x frames, guidance row last when enabled).
template <typename Scalar>
Latent<Scalar> backward(const DenoiserParams<Scalar>& params,
                        const ForwardTrace<Scalar>& trace,
                        const Latent<Scalar>& upstream,
                        DenoiserParams<Scalar>& grads);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

// Compares backward() with central differences of step h on every scalar
// parameter, in double precision, for the loss sum(R .* forward(z, t))
// with seeded random R, z and guidance. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradientCheckResult gradient_check(const DenoiserConfig& config, std::uint64_t seed,
                                   int frames, int t, double h = 1e-5);

// Checkpoint: "VBCK", version byte, config block, then each tensor as
// name/shape header followed by little-endian float32 values, row-major.
void write_checkpoint(const std::filesystem::path& path,
                      const DenoiserParams<float>& params);
DenoiserParams<float> read_checkpoint(const std::filesystem::path& path);

}  // namespace vbridge
