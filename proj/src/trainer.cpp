#include "vbridge/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>

#include "vbridge/random.hpp"

namespace vbridge {
namespace {

// Loss and gradient contribution of one sample at (t, eps).
LossBreakdown accumulate_sample(const DenoiserParams<float>& params, const LatentTensor& z_c,
                                const LatentTensor& eps_a, const TrackRow* guidance_values,
                                double gamma, int t, const LatentTensor& eps,
                                const NoiseSchedule& schedule, double lambda_z0,
                                DenoiserParams<float>* grads) {
  const BridgedSample<float> sample = make_bridged_sample(z_c, eps_a, t, eps, schedule);
  GuidanceRow<float> row;
  const GuidanceRow<float>* row_ptr = nullptr;
  if (guidance_values != nullptr) {
    row = rms_match(GuidanceRow<float>(*guidance_values), sample.z_t_d, gamma);
    row_ptr = &row;
  }
  ForwardTrace<float> trace;
  const LatentTensor eps_pred =
      forward(params, sample.z_t_d, t, row_ptr, grads != nullptr ? &trace : nullptr);
  const LossBreakdown loss = total_loss(eps_pred, sample, z_c, schedule, lambda_z0);
  if (grads != nullptr) {
    const LatentTensor upstream = total_loss_gradient(eps_pred, sample, z_c, schedule, lambda_z0);
    backward(params, trace, upstream, *grads);
  }
  return loss;
}

LatentTensor shift_channels(const LatentTensor& z, int shift) {
  if (shift == 0) return z;
  LatentTensor out = LatentTensor::Zero(z.rows(), z.cols());
  const Eigen::Index n = z.rows() - std::abs(shift);
  if (n <= 0) return out;
  if (shift > 0) {
    out.bottomRows(n) = z.topRows(n);
  } else {
    out.topRows(n) = z.bottomRows(n);
  }
  return out;
}

void add_into(LossBreakdown& acc, const LossBreakdown& x) {
  acc.bridge_loss += x.bridge_loss;
  acc.z0_l1 += x.z0_l1;
  acc.total += x.total;
}

LossBreakdown scaled(LossBreakdown x, double s) {
  x.bridge_loss *= s;
  x.z0_l1 *= s;
  x.total *= s;
  return x;
}

void check_dataset(const std::vector<PairedSample>& dataset, const DenoiserConfig& dc,
                   bool guidance_enabled) {
  if (dataset.empty()) throw DomainError("train: dataset is empty");
  for (const auto& s : dataset) {
    if (s.z_c.rows() != dc.latent_channels) {
      throw ShapeError("train: sample " + s.id + " has " + std::to_string(s.z_c.rows()) +
                       " channels, model expects " + std::to_string(dc.latent_channels));
    }
    require_same_shape(s.z_c, s.eps_a, "train sample");
    if (guidance_enabled && s.guidance && s.guidance->present &&
        s.guidance->values.size() != s.z_c.cols()) {
      throw ShapeError("train: guidance length differs from latent frames for " + s.id);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1 || num_epochs < 1) {
    throw DomainError("train config: batch_size and num_epochs must be positive");
  }
  if (base_lr < 0.0 || weight_decay < 0.0 || lambda_z0 < 0.0 || !(grad_clip_norm > 0.0)) {
    throw DomainError("train config: invalid optimizer settings");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_epsilon > 0.0)) {
    throw DomainError("train config: invalid moment coefficients");
  }
  if (crop_frames < 0) throw DomainError("train config: crop_frames must be >= 0");
  if (channel_shift < 0) throw DomainError("train config: channel_shift must be >= 0");
  if (!(mix_prob >= 0.0 && mix_prob <= 1.0)) {
    throw DomainError("train config: mix_prob must lie in [0, 1]");
  }
  if (!(residual_swap_prob >= 0.0 && residual_swap_prob <= 1.0)) {
    throw DomainError("train config: residual_swap_prob must lie in [0, 1]");
  }
}

TrainResult train(const std::vector<PairedSample>& dataset, const TrainConfig& config,
                  const DenoiserConfig& denoiser_config, const NoiseSchedule& schedule,
                  const TrainOptions& options) {
  config.validate();
  if (config.guidance_enabled != denoiser_config.guidance_enabled) {
    throw DomainError("train: guidance setting differs between train and model config");
  }
  check_dataset(dataset, denoiser_config, config.guidance_enabled);
  const auto started = std::chrono::steady_clock::now();

  TrainResult result{init_params<float>(denoiser_config, mix_seed(config.seed, 1)), {}};
  DenoiserParams<float>& params = result.params;
  DenoiserParams<float> grads = params.zeros_like();
  AdamW<float> optimizer(config.beta1, config.beta2, config.adam_epsilon, config.weight_decay);
  Rng rng(mix_seed(config.seed, 2));

  const int multiple = denoiser_config.frame_multiple();
  const int crop = config.crop_frames == 0
                       ? 0
                       : (config.crop_frames + multiple - 1) / multiple * multiple;
  const long n = static_cast<long>(dataset.size());
  const long batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long total_steps = batches_per_epoch * config.num_epochs;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::uniform_int_distribution<int> step_dist(1, schedule.num_steps());
  std::uniform_int_distribution<int> shift_dist(-config.channel_shift, config.channel_shift);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);

  long step = 0;
  for (int epoch = 0; epoch < config.num_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown epoch_sum;
    for (long b = 0; b < batches_per_epoch; ++b) {
      const long lo = b * config.batch_size;
      const long hi = std::min(n, lo + config.batch_size);
      grads.set_zero();
      LossBreakdown batch_sum;
      for (long i = lo; i < hi; ++i) {
        const PairedSample& s = dataset[order[static_cast<std::size_t>(i)]];
        const Eigen::Index frames = s.z_c.cols();
        const Eigen::Index width = crop == 0 ? frames : std::min<Eigen::Index>(crop, frames);
        Eigen::Index start = 0;
        if (width < frames) {
          std::uniform_int_distribution<Eigen::Index> start_dist(0, frames - width);
          start = start_dist(rng);
        }
        LatentTensor z_c = s.z_c.middleCols(start, width);
        LatentTensor eps_a = s.eps_a.middleCols(start, width);
        if (config.mix_prob > 0.0 && unit(rng) < config.mix_prob) {
          const PairedSample& other = dataset[pick(rng)];
          const Eigen::Index other_frames = std::min<Eigen::Index>(other.z_c.cols(), width);
          std::uniform_int_distribution<Eigen::Index> other_start(0, other.z_c.cols() - other_frames);
          const Eigen::Index o = other_start(rng);
          const double angle = 0.5 * std::numbers::pi * unit(rng);
          const auto a = static_cast<float>(std::cos(angle));
          const auto b = static_cast<float>(std::sin(angle));
          z_c *= a;
          eps_a *= a;
          z_c.leftCols(other_frames) += b * other.z_c.middleCols(o, other_frames);
          eps_a.leftCols(other_frames) += b * other.eps_a.middleCols(o, other_frames);
        }
        if (config.residual_swap_prob > 0.0 && unit(rng) < config.residual_swap_prob) {
          const PairedSample& other = dataset[pick(rng)];
          const Eigen::Index other_frames = std::min<Eigen::Index>(other.eps_a.cols(), width);
          std::uniform_int_distribution<Eigen::Index> other_start(0, other.eps_a.cols() - other_frames);
          const Eigen::Index o = other_start(rng);
          const float sign = unit(rng) < 0.5 ? -1.0f : 1.0f;
          eps_a.setZero();
          eps_a.leftCols(other_frames) = sign * other.eps_a.middleCols(o, other_frames);
        }
        const int shift = config.channel_shift > 0 ? shift_dist(rng) : 0;
        const int t = step_dist(rng);
        const LatentTensor eps = gaussian_latent<float>(s.z_c.rows(), width, rng);
        TrackRow guidance_row;
        const TrackRow* guidance_ptr = nullptr;
        if (config.guidance_enabled) {
          if (s.guidance && s.guidance->present) {
            guidance_row = s.guidance->values.segment(start, width);
          } else {
            guidance_row = TrackRow::Zero(width);
          }
          guidance_ptr = &guidance_row;
        }
        const double gamma = s.guidance ? s.guidance->gamma : 0.0;
        const LossBreakdown loss = accumulate_sample(
            params, shift_channels(z_c, shift), eps_a,
            guidance_ptr, gamma, t, eps, schedule, config.lambda_z0, &grads);
        if (!std::isfinite(loss.total)) {
          throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                             ", sample " + std::to_string(order[static_cast<std::size_t>(i)]) +
                             " (" + s.id + ")");
        }
        add_into(batch_sum, loss);
      }
      const double count = static_cast<double>(hi - lo);
      for (auto& g : grads.tensors()) g.value /= static_cast<float>(count);
      clip_gradients(grads.tensors(), config.grad_clip_norm);
      const double lr = cosine_lr(step, total_steps, config.base_lr);
      optimizer.step(params.tensors(), grads.tensors(), lr);
      const LossBreakdown batch_mean = scaled(batch_sum, 1.0 / count);
      if (options.log != nullptr) {
        *options.log << "step=" << step << "\tlr=" << lr << "\tbridge_loss=" << batch_mean.bridge_loss
                     << "\tz0_l1=" << batch_mean.z0_l1 << "\ttotal=" << batch_mean.total << '\n';
      }
      add_into(epoch_sum, batch_sum);
      ++step;
    }
    LossBreakdown epoch_mean = scaled(epoch_sum, 1.0 / static_cast<double>(n));
    epoch_mean.lambda_z0 = config.lambda_z0;
    result.report.epochs.push_back(epoch_mean);
  }
  for (const auto& p : params.tensors()) {
    if (!p.value.allFinite()) throw NumericError("train: non-finite parameter " + p.name);
  }
  result.report.steps = step;
  if (!options.checkpoint_path.empty()) {
    write_checkpoint(options.checkpoint_path, params);
    result.report.checkpoint_path = options.checkpoint_path;
  }
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

LossBreakdown evaluate_loss(const DenoiserParams<float>& params,
                            const std::vector<PairedSample>& dataset,
                            const NoiseSchedule& schedule, double lambda_z0,
                            std::uint64_t seed) {
  if (dataset.empty()) throw DomainError("evaluate_loss: dataset is empty");
  const bool guided = params.config().guidance_enabled;
  check_dataset(dataset, params.config(), guided);
  Rng rng(seed);
  std::uniform_int_distribution<int> step_dist(1, schedule.num_steps());
  LossBreakdown sum;
  for (const auto& s : dataset) {
    const int t = step_dist(rng);
    const LatentTensor eps = gaussian_latent<float>(s.z_c.rows(), s.z_c.cols(), rng);
    TrackRow row;
    const TrackRow* row_ptr = nullptr;
    if (guided) {
      row = (s.guidance && s.guidance->present) ? s.guidance->values
                                                : TrackRow::Zero(s.z_c.cols());
      row_ptr = &row;
    }
    const double gamma = s.guidance ? s.guidance->gamma : 0.0;
    add_into(sum, accumulate_sample(params, s.z_c, s.eps_a, row_ptr, gamma, t, eps, schedule,
                                    lambda_z0, nullptr));
  }
  LossBreakdown mean = scaled(sum, 1.0 / static_cast<double>(dataset.size()));
  mean.lambda_z0 = lambda_z0;
  return mean;
}

}  // namespace vbridge
