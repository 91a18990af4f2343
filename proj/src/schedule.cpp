#include "vbridge/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vbridge/error.hpp"

namespace vbridge {
namespace {

void require_bridge_step(const NoiseSchedule& schedule, int t) {
  if (t < 1 || t > schedule.num_steps()) {
    throw DomainError("bridge step " + std::to_string(t) + " outside [1, " +
                      std::to_string(schedule.num_steps()) + "]");
  }
  if (!(schedule.alpha_bar_terminal() < 1.0)) {
    throw DomainError("terminal alpha_bar is 1; bridge coefficients undefined");
  }
}

}  // namespace

NoiseSchedule NoiseSchedule::from_alpha_bar(std::vector<double> alpha_bar) {
  if (alpha_bar.size() < 2) {
    throw DomainError("schedule needs at least one step");
  }
  if (!(alpha_bar[0] > 0.999 && alpha_bar[0] <= 1.0)) {
    throw DomainError("alpha_bar[0] must lie in (0.999, 1]");
  }
  for (size_t t = 1; t < alpha_bar.size(); ++t) {
    if (!(alpha_bar[t] > 0.0 && alpha_bar[t] < 1.0)) {
      throw DomainError("alpha_bar[" + std::to_string(t) +
                        "] must lie in (0, 1)");
    }
    if (alpha_bar[t] > alpha_bar[t - 1]) {
      throw DomainError("alpha_bar must be non-increasing");
    }
  }
  NoiseSchedule schedule(std::move(alpha_bar));
  // The eps_a coefficient of the clean-latent reconstruction must vanish.
  for (int t = 1; t <= schedule.num_steps(); ++t) {
    const double in = c_in(schedule, t);
    const double residual =
        in - std::sqrt(1.0 - schedule.alpha_bar(t)) * c_tgt(schedule, t);
    if (std::abs(residual) >= 1e-10 * std::max(1.0, std::abs(in))) {
      throw NumericError("bridge coefficient cancellation failed at t=" +
                         std::to_string(t));
    }
  }
  return schedule;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > num_steps()) {
    throw DomainError("step " + std::to_string(t) + " outside [0, " +
                      std::to_string(num_steps()) + "]");
  }
  return alpha_bar_[static_cast<size_t>(t)];
}

NoiseSchedule make_cosine_schedule(int num_steps) {
  ScheduleParams params;
  params.num_steps = num_steps;
  return make_cosine_schedule(params);
}

NoiseSchedule make_cosine_schedule(const ScheduleParams& params) {
  if (params.num_steps < 1) {
    throw DomainError("num_steps must be >= 1");
  }
  if (!(params.offset >= 0.0) || !(params.max_beta > 0.0 && params.max_beta < 1.0) ||
      !(params.horizon > 0.0 && params.horizon <= 1.0)) {
    throw DomainError("invalid cosine schedule parameters");
  }
  const double s = params.offset;
  const auto f = [s](double u) {
    const double c = std::cos((u + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0.0);
  const int steps = params.num_steps;
  std::vector<double> abar(static_cast<size_t>(steps) + 1);
  abar[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double u = params.horizon * static_cast<double>(t) / steps;
    const double raw = f(u) / f0;
    const double floor = abar[static_cast<size_t>(t) - 1] * (1.0 - params.max_beta);
    abar[static_cast<size_t>(t)] = std::max(raw, floor);
  }
  return NoiseSchedule::from_alpha_bar(std::move(abar));
}

double c_in(const NoiseSchedule& schedule, int t) {
  require_bridge_step(schedule, t);
  const double a_t = schedule.alpha_bar(t);
  const double a_T = schedule.alpha_bar_terminal();
  return a_T * (1.0 - a_t) / (std::sqrt(a_t) * (1.0 - a_T));
}

double c_tgt(const NoiseSchedule& schedule, int t) {
  require_bridge_step(schedule, t);
  const double a_t = schedule.alpha_bar(t);
  const double a_T = schedule.alpha_bar_terminal();
  return a_T * std::sqrt(1.0 - a_t) / ((1.0 - a_T) * std::sqrt(a_t));
}

}  // namespace vbridge
