#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vbridge/denoiser.hpp"
#include "vbridge/guidance.hpp"
#include "vbridge/latent.hpp"
#include "vbridge/schedule.hpp"

namespace vbridge {

struct PurifyConfig {
  int num_inference_steps = 10;
  int terminal_step = 0;  // 0 selects the schedule's terminal step
  std::uint64_t seed = 0;
  bool guidance_enabled = false;
};

// Noise prediction for z_t at step t.
template <typename Scalar>
using NoisePredictor = std::function<Latent<Scalar>(const Latent<Scalar>&, int)>;

template <typename Scalar>
struct DdimStep {
  Latent<Scalar> z_prev;
  Latent<Scalar> z0_hat;
};

// K + 1 uniformly spaced steps from terminal down to 0, strictly decreasing.
std::vector<int> ddim_timesteps(int terminal_step, int num_steps);

int resolve_terminal_step(const PurifyConfig& config, const NoiseSchedule& schedule);

// sqrt(abar_T*) z_a + sqrt(1 - abar_T*) eps with eps from the seeded normal.
template <typename Scalar>
Latent<Scalar> init_terminal(const Latent<Scalar>& z_a, const NoiseSchedule& schedule,
                             std::uint64_t seed, int terminal_step = 0);

// Deterministic (eta = 0) DDIM update. t_prev == 0 returns the clean
// estimate as z_prev.
template <typename Scalar>
DdimStep<Scalar> ddim_step(const Latent<Scalar>& z_t, int t, int t_prev,
                           const NoisePredictor<Scalar>& predictor,
                           const NoiseSchedule& schedule);

template <typename Scalar>
Latent<Scalar> purify(const Latent<Scalar>& z_a, const NoisePredictor<Scalar>& predictor,
                      const PurifyConfig& config, const NoiseSchedule& schedule);

// Wraps the denoiser as a predictor. With guidance enabled the track is
// RMS-matched to the current z_t at every call; a missing or absent track
// becomes a zero channel.
template <typename Scalar>
NoisePredictor<Scalar> denoiser_predictor(const DenoiserParams<Scalar>& params,
                                          const GuidanceTrack* guidance);

template <typename Scalar>
Latent<Scalar> purify(const Latent<Scalar>& z_a, const DenoiserParams<Scalar>& params,
                      const PurifyConfig& config, const NoiseSchedule& schedule,
                      const GuidanceTrack* guidance = nullptr);

}  // namespace vbridge
