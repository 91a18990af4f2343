#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "vbridge/latent.hpp"
#include "vbridge/schedule.hpp"

namespace vbridge {

// Training sample on the protected-to-clean bridge at step t.
template <typename Scalar>
struct BridgedSample {
  Latent<Scalar> z_t_d;    // bridged latent
  Latent<Scalar> eps_eff;  // effective noise target
  int t = 0;
  Latent<Scalar> eps;      // Gaussian draw
  Latent<Scalar> eps_a;    // protective perturbation residual
};

struct LossBreakdown {
  double bridge_loss = 0.0;
  double z0_l1 = 0.0;
  double lambda_z0 = 0.0;
  double total = 0.0;
};

namespace detail {

inline void require_step(const NoiseSchedule& schedule, int t, int lo,
                         const char* what) {
  if (t < lo || t > schedule.num_steps()) {
    throw DomainError(std::string(what) + ": step " + std::to_string(t) +
                      " outside [" + std::to_string(lo) + ", " +
                      std::to_string(schedule.num_steps()) + "]");
  }
}

}  // namespace detail

template <typename Scalar>
Latent<Scalar> adversarial_init(const Latent<Scalar>& z_c,
                                const Latent<Scalar>& eps_a) {
  require_same_shape(z_c, eps_a, "adversarial_init");
  return z_c + eps_a;
}

// sqrt(abar_t) z0 + sqrt(1 - abar_t) eps, 0 <= t <= T.
template <typename Scalar>
Latent<Scalar> forward_diffuse(const Latent<Scalar>& z0, int t,
                               const Latent<Scalar>& eps,
                               const NoiseSchedule& schedule) {
  require_same_shape(z0, eps, "forward_diffuse");
  detail::require_step(schedule, t, 0, "forward_diffuse");
  const double a = schedule.alpha_bar(t);
  return static_cast<Scalar>(std::sqrt(a)) * z0 +
         static_cast<Scalar>(std::sqrt(1.0 - a)) * eps;
}

template <typename Scalar>
BridgedSample<Scalar> make_bridged_sample(const Latent<Scalar>& z_c,
                                          const Latent<Scalar>& eps_a, int t,
                                          const Latent<Scalar>& eps,
                                          const NoiseSchedule& schedule) {
  require_same_shape(z_c, eps_a, "make_bridged_sample");
  require_same_shape(z_c, eps, "make_bridged_sample");
  detail::require_step(schedule, t, 1, "make_bridged_sample");
  const double a = schedule.alpha_bar(t);
  const auto sa = static_cast<Scalar>(std::sqrt(a));
  const auto sn = static_cast<Scalar>(std::sqrt(1.0 - a));
  const auto cin = static_cast<Scalar>(c_in(schedule, t));
  const auto ctgt = static_cast<Scalar>(c_tgt(schedule, t));
  BridgedSample<Scalar> out;
  out.z_t_d = sa * z_c + sn * eps + cin * eps_a;
  out.eps_eff = eps + ctgt * eps_a;
  out.t = t;
  out.eps = eps;
  out.eps_a = eps_a;
  return out;
}

// Clean-latent estimate from a bridged latent and a noise prediction. The
// eps_a coefficient is evaluated, not dropped; it is zero up to rounding.
template <typename Scalar>
Latent<Scalar> reconstruct_z0(const Latent<Scalar>& z_t_d,
                              const Latent<Scalar>& eps_pred,
                              const Latent<Scalar>& eps_a, int t,
                              const NoiseSchedule& schedule) {
  require_same_shape(z_t_d, eps_pred, "reconstruct_z0");
  require_same_shape(z_t_d, eps_a, "reconstruct_z0");
  detail::require_step(schedule, t, 1, "reconstruct_z0");
  const double a = schedule.alpha_bar(t);
  const double sn = std::sqrt(1.0 - a);
  const double cin = c_in(schedule, t);
  const double coef = cin - sn * c_tgt(schedule, t);
  if (std::abs(coef) >= 1e-10 * std::max(1.0, std::abs(cin))) {
    throw NumericError("reconstruct_z0: eps_a coefficient does not vanish");
  }
  const auto inv_sa = static_cast<Scalar>(1.0 / std::sqrt(a));
  return inv_sa * (z_t_d - static_cast<Scalar>(sn) * eps_pred -
                   static_cast<Scalar>(coef) * eps_a);
}

// Mean squared error over all elements.
template <typename Scalar>
double bridge_loss(const Latent<Scalar>& eps_pred,
                   const Latent<Scalar>& eps_eff) {
  require_same_shape(eps_pred, eps_eff, "bridge_loss");
  if (eps_pred.size() == 0) return 0.0;
  return (eps_pred - eps_eff).template cast<double>().squaredNorm() /
         static_cast<double>(eps_pred.size());
}

template <typename Scalar>
LossBreakdown total_loss(const Latent<Scalar>& eps_pred,
                         const BridgedSample<Scalar>& sample,
                         const Latent<Scalar>& z_c, const NoiseSchedule& schedule,
                         double lambda_z0) {
  require_same_shape(eps_pred, z_c, "total_loss");
  if (lambda_z0 < 0.0) throw DomainError("lambda_z0 must be non-negative");
  LossBreakdown out;
  out.bridge_loss = bridge_loss(eps_pred, sample.eps_eff);
  const Latent<Scalar> z0_hat =
      reconstruct_z0(sample.z_t_d, eps_pred, sample.eps_a, sample.t, schedule);
  out.z0_l1 = (z0_hat - z_c).template cast<double>().cwiseAbs().sum() /
              static_cast<double>(z_c.size());
  out.lambda_z0 = lambda_z0;
  out.total = out.bridge_loss + lambda_z0 * out.z0_l1;
  return out;
}

// d(total)/d(eps_pred). The L1 term uses sign(0) = 0.
template <typename Scalar>
Latent<Scalar> total_loss_gradient(const Latent<Scalar>& eps_pred,
                                   const BridgedSample<Scalar>& sample,
                                   const Latent<Scalar>& z_c,
                                   const NoiseSchedule& schedule,
                                   double lambda_z0) {
  require_same_shape(eps_pred, z_c, "total_loss_gradient");
  const double n = static_cast<double>(eps_pred.size());
  Latent<Scalar> grad =
      static_cast<Scalar>(2.0 / n) * (eps_pred - sample.eps_eff);
  if (lambda_z0 != 0.0) {
    const double a = schedule.alpha_bar(sample.t);
    const Latent<Scalar> z0_hat =
        reconstruct_z0(sample.z_t_d, eps_pred, sample.eps_a, sample.t, schedule);
    const auto scale =
        static_cast<Scalar>(-lambda_z0 * std::sqrt(1.0 - a) / std::sqrt(a) / n);
    grad += scale * (z0_hat - z_c).cwiseSign();
  }
  return grad;
}

}  // namespace vbridge
