#pragma once
// Monte Carlo operating characteristics: rejection probabilities, expected
// sample size, rejection-count distributions, two-phase (amend-mid-trial)
// runs with per-replicate recalibration, comparator strategies, the naive
// FWER sweep, and conditional-power curves.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mams/amend.hpp"
#include "mams/design.hpp"
#include "mams/twoarm.hpp"

namespace mams {

struct OperatingCharacteristics {
  std::vector<double> reject_prob;  // per arm, global rejections
  std::vector<double> reject_se;
  std::vector<double> count_dist;   // P(exactly 0..A rejections)
  double expected_patients = 0.0;
  double expected_patients_se = 0.0;
  double p_continue = 0.0;        // first-analysis decision split
  double p_stop_efficacy = 0.0;
  double p_stop_futility = 0.0;
  int64_t nsim = 0;
  uint64_t seed = 0;
};

namespace detail {

struct OcAccumulator {
  std::vector<int64_t> rej;
  std::vector<int64_t> counts;
  double n_sum = 0.0, n_sumsq = 0.0;
  int64_t stop1_eff = 0, stop1_fut = 0, reps = 0;

  explicit OcAccumulator(int arms) : rej(arms, 0), counts(arms + 1, 0) {}

  void add(const std::vector<char>& reject_global, double patients, int stop_stage,
           bool stopped_for_efficacy) {
    ++reps;
    int c = 0;
    for (size_t k = 0; k < rej.size(); ++k)
      if (reject_global[k]) { ++rej[k]; ++c; }
    ++counts[c];
    n_sum += patients;
    n_sumsq += patients * patients;
    if (stop_stage == 1) (stopped_for_efficacy ? stop1_eff : stop1_fut) += 1;
  }

  OperatingCharacteristics finish(uint64_t seed) const {
    OperatingCharacteristics oc;
    const double n = static_cast<double>(reps);
    oc.nsim = reps;
    oc.seed = seed;
    for (int64_t r : rej) {
      const double p = r / n;
      oc.reject_prob.push_back(p);
      oc.reject_se.push_back(std::sqrt(p * (1.0 - p) / n));
    }
    for (int64_t c : counts) oc.count_dist.push_back(c / n);
    oc.expected_patients = n_sum / n;
    const double var = std::max(0.0, n_sumsq / n - oc.expected_patients * oc.expected_patients);
    oc.expected_patients_se = std::sqrt(var / n);
    oc.p_stop_efficacy = stop1_eff / n;
    oc.p_stop_futility = stop1_fut / n;
    oc.p_continue = 1.0 - oc.p_stop_efficacy - oc.p_stop_futility;
    return oc;
  }
};

}  // namespace detail

// ----------------------------------------------------- original design

inline OperatingCharacteristics simulate_design(const ClosedTest& test,
                                                const std::vector<double>& theta, int64_t nsim,
                                                uint64_t seed,
                                                StopRule stop_rule = StopRule::EfficacyStopsTrial) {
  const JointTrialLaw law = make_law(test.plan, theta);
  const int K = test.plan.arms, J = test.plan.stages;
  detail::OcAccumulator acc(K);
  std::vector<double> z;
  std::vector<std::vector<double>> path(K, std::vector<double>(J));
  for (int64_t rep = 0; rep < nsim; ++rep) {
    Rng rng(seed, static_cast<uint64_t>(rep));
    law.generate_path(rng, z);
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < J; ++j) path[k][j] = z[k * J + j];
    const TrialOutcome o = evaluate_trial(test, path, stop_rule);
    acc.add(o.reject_global, o.patients, o.stop_stage, o.stopped_for_efficacy);
  }
  return acc.finish(seed);
}

// ------------------------------------------- amended design, conditional

// Remainder of the trial given the interim in `design`; E[N] counts
// post-amendment recruitment only.
inline OperatingCharacteristics simulate_amended(const AmendedDesign& design,
                                                 const std::vector<double>& theta, int64_t nsim,
                                                 uint64_t seed) {
  const int A = design.total_arms(), K = design.base.plan.arms, R = design.plan_post.stages;
  if (static_cast<int>(theta.size()) != A)
    throw std::invalid_argument("simulate_amended: theta dimension mismatch");
  const JointTrialLaw law = post_amendment_law(design, theta);
  detail::OcAccumulator acc(A);
  std::vector<double> z;
  std::vector<std::vector<double>> s(A, std::vector<double>(R));
  for (int64_t rep = 0; rep < nsim; ++rep) {
    Rng rng(seed, static_cast<uint64_t>(rep));
    law.generate_path(rng, z);
    for (int k = 0; k < A; ++k)
      for (int j = 0; j < R; ++j) {
        double v = z[k * R + j];
        if (k < K) v = reconstruct_z(design.interim.z[k], v, design.w1[k][j], design.w2[k][j]);
        s[k][j] = v;
      }
    const AmendedOutcome o = evaluate_amended(design, s);
    acc.add(o.reject_global, o.patients, o.stop_stage, o.stopped_for_efficacy);
  }
  return acc.finish(seed);
}

// --------------------------------------------- two-phase, unconditional

// Fixed amendment rule: run the original trial to analysis J'; if it is
// still going, add `new_arms` arms under `plan_post` (recalibrating from the
// observed interim) and finish the amended trial.
struct AmendmentRule {
  int jprime = 1;
  int new_arms = 0;
  RecruitmentPlan plan_post;
  BoundaryShape shape = BoundaryShape::Triangular;
  int64_t inner_nsim = 10000;  // replicates for per-replicate recalibration
};

struct TwoPhaseResult {
  OperatingCharacteristics overall;     // unconditional, E[N] from trial start
  OperatingCharacteristics continuing;  // conditional on passing analysis J'
};

inline TwoPhaseResult simulate_two_phase(const ClosedTest& test, const AmendmentRule& rule,
                                         const std::vector<double>& theta, int64_t nsim,
                                         uint64_t seed) {
  const int K = test.plan.arms, T = rule.new_arms, A = K + T;
  const int Jp = rule.jprime, R = rule.plan_post.stages;
  if (static_cast<int>(theta.size()) != A)
    throw std::invalid_argument("simulate_two_phase: theta must cover existing and new arms");
  // law of the first J' analyses of the original trial
  RecruitmentPlan head = test.plan;
  head.stages = Jp;
  for (auto& row : head.ratios) row.resize(Jp);
  std::vector<double> theta_e(theta.begin(), theta.begin() + K);
  const JointTrialLaw head_law = make_law(head, theta_e);
  double head_patients = 0.0;
  for (int k = 0; k <= K; ++k) head_patients += head.ratios[k][Jp - 1] * head.n;

  detail::OcAccumulator overall(A), continuing(A);
  std::vector<double> z, zpost;
  std::vector<std::vector<double>> hist(K, std::vector<double>(Jp));
  std::vector<std::vector<double>> s(A, std::vector<double>(R));
  std::vector<char> rejected(A);
  for (int64_t rep = 0; rep < nsim; ++rep) {
    Rng rng(seed, static_cast<uint64_t>(rep));
    head_law.generate_path(rng, z);
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < Jp; ++j) hist[k][j] = z[k * Jp + j];
    const InterimState st = observe_interim(test, hist, Jp);
    if (st.stopped) {
      std::fill(rejected.begin(), rejected.end(), 0);
      if (st.stopped_for_efficacy) {
        // globally rejected arms at or before J' (closure over existing arms)
        for (int k = 0; k < K; ++k) {
          bool all = true;
          for (const auto& [m, rej] : st.local_rejected)
            if ((m >> k) & 1u) all = all && rej;
          if (all) rejected[k] = 1;
        }
      }
      overall.add(rejected, head_patients, 1, st.stopped_for_efficacy);
      continue;
    }
    CalibrationOptions inner;
    inner.nsim = rule.inner_nsim;
    inner.seed = mix64(seed ^ mix64(static_cast<uint64_t>(rep) + 0x77c0ffeeULL));
    const AmendedDesign ad =
        amend_design(test, st, T, rule.plan_post, rule.shape, inner);
    const JointTrialLaw post_law = post_amendment_law(ad, theta);
    Rng prng(mix64(seed) ^ 0x706f7374ULL, static_cast<uint64_t>(rep));
    post_law.generate_path(prng, zpost);
    for (int k = 0; k < A; ++k)
      for (int j = 0; j < R; ++j) {
        double v = zpost[k * R + j];
        if (k < K) v = reconstruct_z(st.z[k], v, ad.w1[k][j], ad.w2[k][j]);
        s[k][j] = v;
      }
    const AmendedOutcome o = evaluate_amended(ad, s);
    overall.add(o.reject_global, head_patients + o.patients, Jp + o.stop_stage,
                o.stopped_for_efficacy);
    continuing.add(o.reject_global, head_patients + o.patients, Jp + o.stop_stage,
                   o.stopped_for_efficacy);
  }
  TwoPhaseResult out;
  out.overall = overall.finish(seed);
  out.continuing = continuing.reps ? continuing.finish(seed) : OperatingCharacteristics{};
  // first-analysis split must come from the full replicate set
  out.overall.p_stop_efficacy =
      static_cast<double>(overall.stop1_eff) / static_cast<double>(nsim);
  out.overall.p_stop_futility =
      static_cast<double>(overall.stop1_fut) / static_cast<double>(nsim);
  out.overall.p_continue = 1.0 - out.overall.p_stop_efficacy - out.overall.p_stop_futility;
  return out;
}

// -------------------------------------------------------- comparators

struct SeparateTrialsResult {
  OperatingCharacteristics combined;  // arms 1..4: first trial then second
  double expected_patients_first = 0.0;
  double expected_patients_second = 0.0;
  std::vector<double> count_dist_first;   // rejections within the first trial
  std::vector<double> count_dist_second;  // rejections within the second trial
};

// Run the existing trial to completion and open an independent trial for
// the would-be new arms (same per-stage cohorts, one fewer analysis than
// remains unused here: the second trial is a fresh 2-analysis design).
inline SeparateTrialsResult comparator_separate_trials(const ClosedTest& first,
                                                       const ClosedTest& second,
                                                       const std::vector<double>& theta,
                                                       int64_t nsim, uint64_t seed) {
  const int K1 = first.plan.arms, K2 = second.plan.arms;
  if (static_cast<int>(theta.size()) != K1 + K2)
    throw std::invalid_argument("comparator_separate_trials: theta dimension mismatch");
  std::vector<double> th1(theta.begin(), theta.begin() + K1);
  std::vector<double> th2(theta.begin() + K1, theta.end());
  const JointTrialLaw law1 = make_law(first.plan, th1);
  const JointTrialLaw law2 = make_law(second.plan, th2);
  detail::OcAccumulator acc(K1 + K2);
  double n1 = 0.0, n2 = 0.0;
  std::vector<double> cnt1(K1 + 1, 0.0), cnt2(K2 + 1, 0.0);
  std::vector<double> z;
  std::vector<std::vector<double>> p1(K1, std::vector<double>(first.plan.stages));
  std::vector<std::vector<double>> p2(K2, std::vector<double>(second.plan.stages));
  std::vector<char> rejected(K1 + K2);
  for (int64_t rep = 0; rep < nsim; ++rep) {
    Rng rng(seed, static_cast<uint64_t>(rep));
    law1.generate_path(rng, z);
    for (int k = 0; k < K1; ++k)
      for (int j = 0; j < first.plan.stages; ++j) p1[k][j] = z[k * first.plan.stages + j];
    Rng rng2(mix64(seed) ^ 0x2ULL, static_cast<uint64_t>(rep));
    law2.generate_path(rng2, z);
    for (int k = 0; k < K2; ++k)
      for (int j = 0; j < second.plan.stages; ++j) p2[k][j] = z[k * second.plan.stages + j];
    const TrialOutcome o1 = evaluate_trial(first, p1);
    const TrialOutcome o2 = evaluate_trial(second, p2);
    for (int k = 0; k < K1; ++k) rejected[k] = o1.reject_global[k];
    for (int k = 0; k < K2; ++k) rejected[K1 + k] = o2.reject_global[k];
    acc.add(rejected, o1.patients + o2.patients, o1.stop_stage, o1.stopped_for_efficacy);
    n1 += o1.patients;
    n2 += o2.patients;
    int c1 = 0, c2 = 0;
    for (int k = 0; k < K1; ++k) c1 += o1.reject_global[k];
    for (int k = 0; k < K2; ++k) c2 += o2.reject_global[k];
    cnt1[c1] += 1.0;
    cnt2[c2] += 1.0;
  }
  SeparateTrialsResult out;
  out.combined = acc.finish(seed);
  out.expected_patients_first = n1 / static_cast<double>(nsim);
  out.expected_patients_second = n2 / static_cast<double>(nsim);
  for (double v : cnt1) out.count_dist_first.push_back(v / static_cast<double>(nsim));
  for (double v : cnt2) out.count_dist_second.push_back(v / static_cast<double>(nsim));
  return out;
}

// Abandon the running trial and restart with all arms in a fresh design;
// the discarded patients are reported by the caller, not folded into E[N].
inline OperatingCharacteristics comparator_restart(const ClosedTest& restart,
                                                   const std::vector<double>& theta, int64_t nsim,
                                                   uint64_t seed) {
  return simulate_design(restart, theta, nsim, seed);
}

// --------------------------------------------------- two-arm procedures

struct TwoArmOperatingCharacteristics {
  double p_local_h1 = 0.0;       // pre-planned pooled test of the original arm
  double p_local_h2 = 0.0;       // nominal test of the added arm
  double p_intersection = 0.0;   // intersection test at A(z)
  double p_h1 = 0.0, p_h2 = 0.0; // global rejections
  double p_h1_only = 0.0, p_h2_only = 0.0, p_both = 0.0, p_any = 0.0;
  int64_t nsim = 0;
  uint64_t seed = 0;
};

// Model of the amendment setting: Z_1^(1) ~ N(xi1 sqrt(tau), 1) independent
// of the second phase; (Z_1^(2), Z_2) have means (xi1, xi2) sqrt(1 - tau)
// and correlation 1/2 through the shared second-phase controls.
inline TwoArmOperatingCharacteristics simulate_two_arm(double tau, double alpha, double xi1,
                                                       double xi2, TwoArmMode mode, int64_t nsim,
                                                       uint64_t seed) {
  TwoArmAddition st;
  st.tau = tau;
  st.alpha = alpha;
  st.xi1 = xi1;
  st.xi2 = xi2;
  st.validate();
  const double crit = norm_quantile(1.0 - alpha);
  const double m1 = xi1 * std::sqrt(1.0 - tau), m2 = xi2 * std::sqrt(1.0 - tau);
  int64_t l1 = 0, l2 = 0, li = 0, h1 = 0, h2 = 0, only1 = 0, only2 = 0, both = 0, any = 0;
  for (int64_t rep = 0; rep < nsim; ++rep) {
    Rng rng(seed, static_cast<uint64_t>(rep));
    st.z1_stage1 = xi1 * std::sqrt(tau) + rng.normal();
    const double a = rng.normal(), b = rng.normal();
    const double z1s2 = m1 + a;
    const double z2 = m2 + 0.5 * a + std::sqrt(0.75) * b;
    const TwoArmRejection r = run_two_arm_procedure(st, z1s2, z2, mode);
    l1 += pooled_z(st.z1_stage1, z1s2, tau) > crit;
    l2 += z2 > crit;
    li += mode == TwoArmMode::Dunnett
              ? dunnett_intersection_p(z1s2, z2) < conditional_error_two_arm(st.z1_stage1, tau, alpha)
              : pooled_z(st.z1_stage1, z1s2, tau) > crit;
    h1 += r.h1;
    h2 += r.h2;
    only1 += r.h1 && !r.h2;
    only2 += r.h2 && !r.h1;
    both += r.h1 && r.h2;
    any += r.h1 || r.h2;
  }
  TwoArmOperatingCharacteristics oc;
  const double n = static_cast<double>(nsim);
  oc.p_local_h1 = l1 / n;
  oc.p_local_h2 = l2 / n;
  oc.p_intersection = li / n;
  oc.p_h1 = h1 / n;
  oc.p_h2 = h2 / n;
  oc.p_h1_only = only1 / n;
  oc.p_h2_only = only2 / n;
  oc.p_both = both / n;
  oc.p_any = any / n;
  oc.nsim = nsim;
  oc.seed = seed;
  return oc;
}

// Naive procedure (both hypotheses at nominal alpha, no closure) under the
// global null: FWER(tau) = 1 - Phi2(c, c; rho) with rho = 0.5 sqrt(1 - tau),
// the correlation induced by the shared second phase.
inline double naive_fwer(double tau, double alpha) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("naive_fwer: tau outside (0,1)");
  const double c = norm_quantile(1.0 - alpha);
  return 1.0 - bvn_cdf(c, c, 0.5 * std::sqrt(1.0 - tau));
}

struct FwerSweepPoint {
  double tau = 0.0;
  double fwer = 0.0;
};

inline std::vector<FwerSweepPoint> fwer_sweep(const std::vector<double>& taus, double alpha) {
  std::vector<FwerSweepPoint> out;
  for (double t : taus) out.push_back({t, naive_fwer(t, alpha)});
  return out;
}

// ------------------------------------------------- conditional power

struct ConditionalPowerPoint {
  double z = 0.0;        // interim Z of the original arm
  double cond_error = 0.0;   // A(z)
  double p_reject_intersection = 0.0;  // given z, under (xi1, xi2)
  double density = 0.0;  // interim density of z under xi1
};

// P(P_D < A(z) | z): the Dunnett statistic max(Z_1^(2), Z_2) must exceed the
// threshold q(A) with 1 - Phi2(q, q; 1/2) = A; evaluated by bivariate
// quadrature under the second-phase law.
inline std::vector<ConditionalPowerPoint> conditional_power_curve(double tau, double alpha,
                                                                  double xi1, double xi2,
                                                                  const std::vector<double>& zgrid) {
  std::vector<ConditionalPowerPoint> out;
  const double m1 = xi1 * std::sqrt(1.0 - tau), m2 = xi2 * std::sqrt(1.0 - tau);
  for (double z : zgrid) {
    ConditionalPowerPoint p;
    p.z = z;
    p.cond_error = conditional_error_two_arm(z, tau, alpha);
    // invert the decreasing map q -> 1 - Phi2(q, q; 1/2) at A(z)
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (1.0 - bvn_cdf(mid, mid, 0.5) > p.cond_error ? lo : hi) = mid;
    }
    const double q = 0.5 * (lo + hi);
    p.p_reject_intersection = 1.0 - bvn_cdf(q - m1, q - m2, 0.5);
    p.density = norm_pdf(z - xi1 * std::sqrt(tau));
    out.push_back(p);
  }
  return out;
}

// ------------------------------------------------------------ reporting

inline std::string format_cell(double v, int precision) {
  std::ostringstream os;
  if (precision < 0) {
    os.precision(17);
    os << v;
  } else {
    os.setf(std::ios::fixed);
    os.precision(precision);
    os << v;
  }
  return os.str();
}

// Comma-separated table with a header row; precision < 0 emits full
// precision (%.17g equivalent).
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows, int precision = -1) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
  f << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_cell(row[i], precision);
    f << "\n";
  }
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace mams
