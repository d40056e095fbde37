#pragma once
// Closed-form two-arm machinery: conditional error of the pre-planned
// one-arm test, the three-test closed procedure after adding a second arm
// mid-trial, the Dunnett intersection test, and a gatekeeping comparator.
#include <cmath>
#include <stdexcept>

#include "mams/normal.hpp"

namespace mams {

struct TwoArmAddition {
  double tau = 0.5;    // fraction of the original sample observed at modification
  double alpha = 0.05;
  double z1_stage1 = 0.0;  // observed interim Z for the original arm
  double xi1 = 0.0;        // Z-scale drifts, xi_k = theta_k * sqrt(n) / (2 sigma)
  double xi2 = 0.0;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("two-arm: tau outside (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("two-arm: alpha outside (0,1)");
  }
};

// Z_1 = sqrt(tau) Z_1^(1) + sqrt(1-tau) Z_1^(2): the overall Z-value of the
// original comparison reconstructed from its two phases.
inline double pooled_z(double z_stage1, double z_stage2, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("pooled_z: tau outside (0,1)");
  return std::sqrt(tau) * z_stage1 + std::sqrt(1.0 - tau) * z_stage2;
}

// Conditional error of the pre-planned test given the interim Z:
// A(z) = P_{theta=0}(reject | Z_1^(1) = z) = 1 - Phi((Phi^-1(1-alpha) - sqrt(tau) z)/sqrt(1-tau)).
inline double conditional_error_two_arm(double z1_stage1, double tau, double alpha) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("conditional_error_two_arm: tau outside (0,1)");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("conditional_error_two_arm: alpha outside (0,1)");
  const double crit = norm_quantile(1.0 - alpha);
  return 1.0 - norm_cdf((crit - std::sqrt(tau) * z1_stage1) / std::sqrt(1.0 - tau));
}

// Dunnett p-value for the intersection of both comparisons from the data
// after the amendment: P_D = P(X > Z_D or Y > Z_D), corr(X,Y) = 1/2,
// Z_D = max of the two second-phase statistics.
inline double dunnett_intersection_p(double z1_stage2, double z2) {
  const double zd = std::max(z1_stage2, z2);
  return 1.0 - bvn_cdf(zd, zd, 0.5);
}

enum class TwoArmMode { Dunnett, Gatekeeping };

struct TwoArmRejection {
  bool h1 = false;
  bool h2 = false;
};

// Closed test over {H01, H02, H012}.  The intersection is tested at the
// conditional error A(z); singletons at their pre-planned levels.
inline TwoArmRejection run_two_arm_procedure(const TwoArmAddition& state, double z1_stage2,
                                             double z2, TwoArmMode mode) {
  state.validate();
  const double crit = norm_quantile(1.0 - state.alpha);
  const double a = conditional_error_two_arm(state.z1_stage1, state.tau, state.alpha);
  const bool local1 = pooled_z(state.z1_stage1, z1_stage2, state.tau) > crit;
  const bool local2 = z2 > crit;
  bool intersection = false;
  switch (mode) {
    case TwoArmMode::Dunnett:
      intersection = dunnett_intersection_p(z1_stage2, z2) < a;
      break;
    case TwoArmMode::Gatekeeping:
      // the original comparison gates everything: the intersection test is
      // the pre-planned test itself, so H02 can only fall together with H01
      intersection = local1;
      break;
  }
  TwoArmRejection out;
  out.h1 = intersection && local1;
  out.h2 = intersection && local2;
  return out;
}

}  // namespace mams
