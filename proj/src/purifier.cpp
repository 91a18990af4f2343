#include "vbridge/purifier.hpp"

#include <cmath>
#include <string>

#include "vbridge/random.hpp"

namespace vbridge {
namespace {

template <typename Scalar>
void check_finite_step(const Latent<Scalar>& x, const char* what, int t, int t_prev) {
  if (!x.allFinite()) {
    throw NumericError(std::string("ddim: non-finite ") + what + " at step t=" +
                       std::to_string(t) + " -> " + std::to_string(t_prev));
  }
}

}  // namespace

std::vector<int> ddim_timesteps(int terminal_step, int num_steps) {
  if (num_steps < 1 || num_steps > terminal_step) {
    throw DomainError("ddim: need 1 <= num_inference_steps <= terminal step (" +
                      std::to_string(num_steps) + " vs " + std::to_string(terminal_step) + ")");
  }
  std::vector<int> steps(static_cast<size_t>(num_steps) + 1);
  for (int i = 0; i <= num_steps; ++i) {
    steps[static_cast<size_t>(i)] = static_cast<int>(
        static_cast<long long>(terminal_step) * (num_steps - i) / num_steps);
  }
  return steps;
}

int resolve_terminal_step(const PurifyConfig& config, const NoiseSchedule& schedule) {
  const int terminal = config.terminal_step == 0 ? schedule.num_steps() : config.terminal_step;
  if (terminal < 1 || terminal > schedule.num_steps()) {
    throw DomainError("purify: terminal step " + std::to_string(terminal) + " outside [1, " +
                      std::to_string(schedule.num_steps()) + "]");
  }
  return terminal;
}

template <typename Scalar>
Latent<Scalar> init_terminal(const Latent<Scalar>& z_a, const NoiseSchedule& schedule,
                             std::uint64_t seed, int terminal_step) {
  const int terminal = terminal_step == 0 ? schedule.num_steps() : terminal_step;
  const double a = schedule.alpha_bar(terminal);
  Rng rng(seed);
  const Latent<Scalar> eps = gaussian_latent<Scalar>(z_a.rows(), z_a.cols(), rng);
  return static_cast<Scalar>(std::sqrt(a)) * z_a + static_cast<Scalar>(std::sqrt(1.0 - a)) * eps;
}

template <typename Scalar>
DdimStep<Scalar> ddim_step(const Latent<Scalar>& z_t, int t, int t_prev,
                           const NoisePredictor<Scalar>& predictor,
                           const NoiseSchedule& schedule) {
  if (!(t > t_prev && t_prev >= 0)) {
    throw DomainError("ddim_step: need t > t_prev >= 0");
  }
  const double a_t = schedule.alpha_bar(t);
  const Latent<Scalar> eps_hat = predictor(z_t, t);
  require_same_shape(eps_hat, z_t, "ddim_step prediction");
  check_finite_step(eps_hat, "noise prediction", t, t_prev);
  DdimStep<Scalar> out;
  out.z0_hat = (z_t - static_cast<Scalar>(std::sqrt(1.0 - a_t)) * eps_hat) /
               static_cast<Scalar>(std::sqrt(a_t));
  check_finite_step(out.z0_hat, "clean estimate", t, t_prev);
  if (t_prev == 0) {
    out.z_prev = out.z0_hat;
  } else {
    const double a_prev = schedule.alpha_bar(t_prev);
    out.z_prev = static_cast<Scalar>(std::sqrt(a_prev)) * out.z0_hat +
                 static_cast<Scalar>(std::sqrt(1.0 - a_prev)) * eps_hat;
    check_finite_step(out.z_prev, "latent", t, t_prev);
  }
  return out;
}

template <typename Scalar>
Latent<Scalar> purify(const Latent<Scalar>& z_a, const NoisePredictor<Scalar>& predictor,
                      const PurifyConfig& config, const NoiseSchedule& schedule) {
  require_finite(z_a, "purify input");
  const int terminal = resolve_terminal_step(config, schedule);
  const std::vector<int> steps = ddim_timesteps(terminal, config.num_inference_steps);
  Latent<Scalar> z = init_terminal(z_a, schedule, config.seed, terminal);
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    z = ddim_step(z, steps[i], steps[i + 1], predictor, schedule).z_prev;
  }
  return z;
}

template <typename Scalar>
NoisePredictor<Scalar> denoiser_predictor(const DenoiserParams<Scalar>& params,
                                          const GuidanceTrack* guidance) {
  if (!params.config().guidance_enabled) {
    return [&params](const Latent<Scalar>& z, int t) { return forward(params, z, t); };
  }
  return [&params, guidance](const Latent<Scalar>& z, int t) {
    if (guidance == nullptr || !guidance->present) return forward(params, z, t);
    if (guidance->values.size() != z.cols()) {
      throw ShapeError("purify: guidance length differs from latent frames");
    }
    const GuidanceRow<Scalar> row =
        rms_match(GuidanceRow<Scalar>(guidance->values.template cast<Scalar>()), z,
                  guidance->gamma);
    return forward(params, z, t, &row);
  };
}

template <typename Scalar>
Latent<Scalar> purify(const Latent<Scalar>& z_a, const DenoiserParams<Scalar>& params,
                      const PurifyConfig& config, const NoiseSchedule& schedule,
                      const GuidanceTrack* guidance) {
  if (config.guidance_enabled != params.config().guidance_enabled) {
    throw DomainError("purify: guidance setting differs from the checkpoint");
  }
  return purify<Scalar>(z_a, denoiser_predictor(params, guidance), config, schedule);
}

#define VBRIDGE_INSTANTIATE(S)                                                              \
  template Latent<S> init_terminal<S>(const Latent<S>&, const NoiseSchedule&, std::uint64_t, \
                                      int);                                                 \
  template DdimStep<S> ddim_step<S>(const Latent<S>&, int, int, const NoisePredictor<S>&,   \
                                    const NoiseSchedule&);                                  \
  template Latent<S> purify<S>(const Latent<S>&, const NoisePredictor<S>&,                  \
                               const PurifyConfig&, const NoiseSchedule&);                  \
  template NoisePredictor<S> denoiser_predictor<S>(const DenoiserParams<S>&,                \
                                                   const GuidanceTrack*);                   \
  template Latent<S> purify<S>(const Latent<S>&, const DenoiserParams<S>&,                  \
                               const PurifyConfig&, const NoiseSchedule&,                   \
                               const GuidanceTrack*);

VBRIDGE_INSTANTIATE(float)
VBRIDGE_INSTANTIATE(double)
#undef VBRIDGE_INSTANTIATE

}  // namespace vbridge
