#pragma once

#include <Eigen/Dense>
#include <vector>

namespace vbridge {

struct ScheduleParams {
  int num_steps = 200;
  double offset = 0.008;    // s in cos^2(((u + s) / (1 + s)) * pi / 2)
  double max_beta = 0.999;  // per-step clamp on 1 - abar[t] / abar[t-1]
  // Fraction of the cosine time axis reached at t = num_steps. 1.0 is the
  // full curve; smaller values stop the bridge at a partially noised state.
  double horizon = 1.0;
};

// Cumulative signal-retention sequence abar[0..T]. Immutable after
// construction; always held in double precision.
class NoiseSchedule {
 public:
  // Validates 0 < abar[t] < 1 for t >= 1, monotone non-increasing,
  // abar[0] in (0.999, 1], and the bridge coefficient cancellation.
  static NoiseSchedule from_alpha_bar(std::vector<double> alpha_bar);

  int num_steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int t) const;
  double alpha_bar_terminal() const { return alpha_bar_.back(); }
  const std::vector<double>& values() const { return alpha_bar_; }

 private:
  explicit NoiseSchedule(std::vector<double> alpha_bar)
      : alpha_bar_(std::move(alpha_bar)) {}
  std::vector<double> alpha_bar_;
};

NoiseSchedule make_cosine_schedule(int num_steps);
NoiseSchedule make_cosine_schedule(const ScheduleParams& params);

// Bridge input coefficient abar_T (1 - abar_t) / (sqrt(abar_t) (1 - abar_T)).
double c_in(const NoiseSchedule& schedule, int t);
// Bridge target coefficient abar_T sqrt(1 - abar_t) / ((1 - abar_T) sqrt(abar_t)).
double c_tgt(const NoiseSchedule& schedule, int t);

}  // namespace vbridge
