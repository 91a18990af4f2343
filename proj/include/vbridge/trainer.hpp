#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "vbridge/bridge.hpp"
#include "vbridge/denoiser.hpp"
#include "vbridge/guidance.hpp"
#include "vbridge/schedule.hpp"

namespace vbridge {

// Clean latent plus protective residual eps_a = z_a - z_c. The guidance
// track, when present, is frame-aligned with the latent.
struct PairedSample {
  std::string id;
  LatentTensor z_c;
  LatentTensor eps_a;
  std::optional<GuidanceTrack> guidance;
};

struct TrainConfig {
  int batch_size = 16;
  int num_epochs = 100;
  double base_lr = 1e-3;
  double weight_decay = 1e-4;
  double grad_clip_norm = 1.0;
  double lambda_z0 = 0.01;
  std::uint64_t seed = 0;
  bool guidance_enabled = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Random crop length in frames per sample and step; 0 trains on full
  // latents. Rounded up to the denoiser's frame multiple.
  int crop_frames = 0;
  // Clean latents are shifted by a uniform draw in [-channel_shift,
  // channel_shift] channels (zero fill) per sample and step; the stored
  // perturbation is left in place. 0 disables.
  int channel_shift = 0;
  // Probability that a sample is blended with another random training pair:
  // clean latents and residuals are both combined as cos(a) x + sin(a) y
  // with a uniform in [0, pi/2]. 0 disables.
  double mix_prob = 0.0;
  // Probability that a sample's residual is replaced by a random crop of
  // another training pair's residual with a random sign. 0 disables.
  double residual_swap_prob = 0.0;
  void validate() const;
};

struct TrainReport {
  std::vector<LossBreakdown> epochs;  // per-epoch means
  std::string checkpoint_path;
  double wall_seconds = 0.0;
  long steps = 0;
};

struct TrainResult {
  DenoiserParams<float> params;
  TrainReport report;
};

struct TrainOptions {
  std::ostream* log = nullptr;       // one record per optimizer step
  std::string checkpoint_path;       // written after the final step when set
};

// Decoupled-weight-decay adaptive moment optimizer.
template <typename Scalar>
class AdamW {
 public:
  AdamW(double beta1, double beta2, double epsilon, double weight_decay)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {}

  void step(std::vector<Parameter<Scalar>>& params, const std::vector<Parameter<Scalar>>& grads,
            double lr) {
    if (params.size() != grads.size()) throw ShapeError("AdamW: gradient count mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(decltype(p.value)::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(decltype(p.value)::Zero(p.value.rows(), p.value.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& m = m_[i];
      auto& v = v_[i];
      const auto& g = grads[i].value;
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      if (lr == 0.0) continue;
      auto& w = params[i].value;
      const auto m_hat = (m.array() / static_cast<Scalar>(c1));
      const auto v_hat = (v.array() / static_cast<Scalar>(c2));
      w.array() -= static_cast<Scalar>(lr) *
                   (m_hat / (v_hat.sqrt() + static_cast<Scalar>(epsilon_)) +
                    static_cast<Scalar>(weight_decay_) * w.array());
    }
  }

  long steps_taken() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_, weight_decay_;
  long t_ = 0;
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> m_, v_;
};

template <typename Scalar>
double global_norm(const std::vector<Parameter<Scalar>>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.value.template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

// Rescales all gradients by max_norm / g when the global L2 norm g exceeds
// max_norm. Returns the norm before clipping.
template <typename Scalar>
double clip_gradients(std::vector<Parameter<Scalar>>& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw DomainError("clip_gradients: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const auto scale = static_cast<Scalar>(max_norm / norm);
    for (auto& g : grads) g.value *= scale;
  }
  return norm;
}

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)).
inline double cosine_lr(long step, long total_steps, double base_lr) {
  if (total_steps <= 0) throw DomainError("cosine_lr: total_steps must be positive");
  return base_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                         static_cast<double>(total_steps)));
}

TrainResult train(const std::vector<PairedSample>& dataset, const TrainConfig& config,
                  const DenoiserConfig& denoiser_config, const NoiseSchedule& schedule,
                  const TrainOptions& options = {});

// Mean loss over the dataset at seeded (t, eps) draws on full-length
// latents. The same seed gives the same draws for any model.
LossBreakdown evaluate_loss(const DenoiserParams<float>& params,
                            const std::vector<PairedSample>& dataset,
                            const NoiseSchedule& schedule, double lambda_z0,
                            std::uint64_t seed);

}  // namespace vbridge
