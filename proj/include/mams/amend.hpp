#pragma once
// Adding arms mid-trial: split weights, residual boundaries, conditional
// error rates of the running closed test, and recalibration of an enlarged
// closure for the remainder of the trial.
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mams/design.hpp"

namespace mams {

// ------------------------------------------------------------- interim

struct InterimState {
  int jprime = 0;                            // analyses already performed
  std::vector<std::vector<double>> history;  // z[k][j], j = 0..jprime-1
  std::vector<double> z;                     // Z_k^(J'), convenience copy
  std::vector<char> dropped;                 // futility-dropped by J'
  bool stopped = false;                      // trial concluded at or before J'
  bool stopped_for_efficacy = false;
  // accumulated local rejections of the running closed test by J'
  std::map<HypothesisSet, char> local_rejected;
};

// Conduct the trial through the first `jprime` analyses and record the state.
inline InterimState observe_interim(const ClosedTest& test,
                                    const std::vector<std::vector<double>>& history,
                                    int jprime) {
  const int K = test.plan.arms;
  if (jprime < 1 || jprime >= test.plan.stages)
    throw std::domain_error("observe_interim: amendment analysis must satisfy 1 <= J' < J");
  if (static_cast<int>(history.size()) != K)
    throw std::invalid_argument("observe_interim: history arm count mismatch");
  for (const auto& row : history)
    if (static_cast<int>(row.size()) < jprime)
      throw std::invalid_argument("observe_interim: history shorter than J'");
  InterimState st;
  st.jprime = jprime;
  st.history.resize(K);
  for (int k = 0; k < K; ++k)
    st.history[k].assign(history[k].begin(), history[k].begin() + jprime);
  st.z.resize(K);
  for (int k = 0; k < K; ++k) st.z[k] = history[k][jprime - 1];
  st.dropped.assign(K, 0);
  std::vector<char> active(K, 1);
  for (const auto& [m, b] : test.family) st.local_rejected[m] = 0;
  for (int j = 0; j < jprime && !st.stopped; ++j) {
    for (auto& [m, rej] : st.local_rejected) {
      if (rej) continue;
      for (int k : set_members(m))
        if (active[k - 1] && history[k - 1][j] > test.family.at(m).upper[j]) { rej = 1; break; }
    }
    for (int k = 0; k < K; ++k) {
      bool all = true;
      for (const auto& [m, rej] : st.local_rejected)
        if ((m >> k) & 1u) all = all && rej;
      if (all) { st.stopped = true; st.stopped_for_efficacy = true; }
    }
    if (st.stopped) break;
    bool any = false;
    for (int k = 0; k < K; ++k) {
      if (active[k] && history[k][j] < test.futility[j]) { active[k] = 0; st.dropped[k] = 1; }
      any = any || active[k];
    }
    if (!any) st.stopped = true;
  }
  return st;
}

// ------------------------------------------------------------- weights

// Per-arm, per-remaining-analysis split of the cumulative Z into the part
// observed by J' and the part still to come: w1 = sqrt((r_k^(J')+r_0^(J'))
// / (r_k^(j)+r_0^(j))), w2 = sqrt(1 - w1^2).
struct SplitWeights {
  int jprime = 0;
  std::vector<std::vector<double>> w1;  // [k][j - J' - 1]
  std::vector<std::vector<double>> w2;
};

inline SplitWeights split_weights(const RecruitmentPlan& plan, int jprime) {
  plan.validate();
  if (jprime < 1 || jprime >= plan.stages)
    throw std::domain_error("split_weights: need 1 <= J' < J (J' = J leaves nothing to amend)");
  SplitWeights w;
  w.jprime = jprime;
  w.w1.assign(plan.arms, std::vector<double>(plan.stages - jprime));
  w.w2 = w.w1;
  for (int k = 1; k <= plan.arms; ++k)
    for (int j = jprime; j < plan.stages; ++j) {
      const double num = plan.ratios[k][jprime - 1] + plan.ratios[0][jprime - 1];
      const double den = plan.ratios[k][j] + plan.ratios[0][j];
      const double w1 = std::sqrt(num / den);
      w.w1[k - 1][j - jprime] = w1;
      w.w2[k - 1][j - jprime] = std::sqrt(1.0 - w1 * w1);
    }
  return w;
}

inline double reconstruct_z(double z_at_jprime, double z_star, double w1, double w2) {
  return w1 * z_at_jprime + w2 * z_star;
}

// ------------------------------------------------- residual boundaries

// Original-trial bounds rewritten on the scale of the post-interim
// statistics: Z_k^(j) > u_{j,m}  iff  Z_k^*(j) > (u_{j,m} - w1 Z_k^(J'))/w2.
struct ResidualBounds {
  std::map<HypothesisSet, std::vector<std::vector<double>>> upper;  // [k][j - J' - 1]
  std::vector<std::vector<double>> futility;                        // [k][j - J' - 1]
};

inline ResidualBounds residual_boundaries(const ClosedTest& test, const InterimState& interim,
                                          const SplitWeights& w) {
  if (interim.stopped)
    throw std::domain_error("residual_boundaries: trial already concluded at the interim");
  const int K = test.plan.arms, J = test.plan.stages, Jp = interim.jprime;
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J - Jp; ++j)
      if (w.w2[k][j] <= 0.0)
        throw std::domain_error("residual_boundaries: zero remaining information (w2 = 0)");
  ResidualBounds out;
  out.futility.assign(K, std::vector<double>(J - Jp));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J - Jp; ++j)
      out.futility[k][j] = (test.futility[Jp + j] - w.w1[k][j] * interim.z[k]) / w.w2[k][j];
  for (const auto& [m, b] : test.family) {
    auto& u = out.upper[m];
    u.assign(K, std::vector<double>(J - Jp));
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < J - Jp; ++j)
        u[k][j] = (b.upper[Jp + j] - w.w1[k][j] * interim.z[k]) / w.w2[k][j];
  }
  return out;
}

// --------------------------------------------------- conditional errors

namespace detail {

// Joint law of the post-interim standardized increments of the ORIGINAL
// trial (stages J'+1..J measured from the interim).
inline JointTrialLaw residual_law(const RecruitmentPlan& plan, int jprime) {
  JointTrialLaw law;
  law.stages = plan.stages - jprime;
  law.arms = plan.arms;
  law.sigma = plan.sigma;
  law.theta.assign(plan.arms, 0.0);
  law.n_control.resize(law.stages);
  for (int j = 0; j < law.stages; ++j)
    law.n_control[j] = (plan.ratios[0][jprime + j] - plan.ratios[0][jprime - 1]) * plan.n;
  law.n_arm.assign(plan.arms, std::vector<double>(law.stages));
  law.info.assign(plan.arms, std::vector<double>(law.stages));
  for (int k = 0; k < plan.arms; ++k)
    for (int j = 0; j < law.stages; ++j) {
      const double na = (plan.ratios[k + 1][jprime + j] - plan.ratios[k + 1][jprime - 1]) * plan.n;
      const double n0 = law.n_control[j];
      law.n_arm[k][j] = na;
      law.info[k][j] = na * n0 / (plan.sigma * plan.sigma * (na + n0));
    }
  return law;
}

}  // namespace detail

// Conditional error rates B_m = P0(original test of H_0m rejects | interim)
// for every nonempty m over the existing arms, from one shared set of
// continuation paths.  The running trial stops at the first analysis where
// any hypothesis is globally rejected (equivalently, where any active arm
// crosses the full-intersection efficacy bound); rejection of m must occur
// at or before that analysis.  Sets already rejected locally by J' have
// B_m = 1; sets whose arms were all dropped have B_m = 0.
inline std::map<HypothesisSet, double> conditional_errors_all(const ClosedTest& test,
                                                              const InterimState& interim,
                                                              const CalibrationOptions& opts = {}) {
  if (interim.stopped)
    throw std::domain_error("conditional_errors_all: amendment applies only to trials in progress");
  const int K = test.plan.arms, Jp = interim.jprime;
  const int R = test.plan.stages - Jp;
  const SplitWeights w = split_weights(test.plan, Jp);
  const JointTrialLaw law = detail::residual_law(test.plan, Jp);
  const HypothesisSet full = test.full_set();
  const auto& ufull = test.family.at(full).upper;

  std::map<HypothesisSet, int64_t> hits;
  for (const auto& [m, b] : test.family) hits[m] = 0;
  // flatten the family for the hot loop
  std::vector<HypothesisSet> sets;
  std::vector<const double*> uppers;
  std::vector<std::vector<int>> members;
  for (const auto& [m, b] : test.family) {
    sets.push_back(m);
    uppers.push_back(b.upper.data());
    members.push_back(set_members(m));
  }
  std::vector<double> zstar;
  std::vector<std::vector<double>> zrec(K, std::vector<double>(R));
  std::vector<char> active(K);
  std::vector<char> local(1u << K, 0);
  for (int64_t rep = 0; rep < opts.nsim; ++rep) {
    Rng rng(opts.seed ^ 0x9e3779b97f4a7c15ULL, static_cast<uint64_t>(rep));
    law.generate_path(rng, zstar);
    for (int k = 0; k < K; ++k) {
      active[k] = !interim.dropped[k];
      for (int j = 0; j < R; ++j)
        zrec[k][j] = reconstruct_z(interim.z[k], zstar[k * R + j], w.w1[k][j], w.w2[k][j]);
    }
    for (const auto& [m, pre] : interim.local_rejected) local[m] = pre;
    for (int j = 0; j < R; ++j) {
      bool stop = false;
      for (size_t i = 0; i < sets.size(); ++i) {
        if (local[sets[i]]) continue;
        for (int k : members[i])
          if (active[k - 1] && zrec[k - 1][j] > uppers[i][Jp + j]) { local[sets[i]] = 1; break; }
      }
      for (int k = 0; k < K; ++k)
        if (active[k] && zrec[k][j] > ufull[Jp + j]) stop = true;  // a global rejection
      if (stop) break;
      bool any = false;
      for (int k = 0; k < K; ++k) {
        if (active[k] && zrec[k][j] < test.futility[Jp + j]) active[k] = 0;
        any = any || active[k];
      }
      if (!any) break;
    }
    for (auto& [m, h] : hits) h += local[m];
  }
  std::map<HypothesisSet, double> out;
  for (const auto& [m, h] : hits)
    out[m] = static_cast<double>(h) / static_cast<double>(opts.nsim);
  return out;
}

inline double conditional_error_mams(const ClosedTest& test, const InterimState& interim,
                                     HypothesisSet m, const CalibrationOptions& opts = {}) {
  if (m == 0 || m >= (1u << test.plan.arms))
    throw std::domain_error("conditional_error_mams: m must be a nonempty set of existing arms");
  return conditional_errors_all(test, interim, opts).at(m);
}

// --------------------------------------------------------- amendment

struct AmendedBounds {
  std::vector<double> upper;
  std::vector<double> lower;
  double level = 0.0;
  double scale = 0.0;
  bool vacuous = false;       // level below the MC noise floor: never reject
  bool pre_rejected = false;  // already rejected locally by J': always rejected
};

struct AmendedDesign {
  ClosedTest base;
  InterimState interim;
  int new_arms = 0;           // T
  RecruitmentPlan plan_post;  // arms 0..K+T over the remaining analyses
  BoundaryShape shape = BoundaryShape::Triangular;
  uint64_t seed = 0;
  int64_t nsim = 0;
  std::vector<std::vector<double>> w1, w2;       // existing arms x remaining analyses
  std::map<HypothesisSet, double> cond_error;    // B_m over existing arms
  std::vector<double> futility_post;             // shared l' on the remaining analyses
  std::map<HypothesisSet, AmendedBounds> family_post;  // over arms 1..K+T

  int total_arms() const { return base.plan.arms + new_arms; }
  HypothesisSet full_post() const { return static_cast<HypothesisSet>((1u << total_arms()) - 1u); }
  HypothesisSet existing_mask() const { return static_cast<HypothesisSet>((1u << base.plan.arms) - 1u); }
};

// Joint law of the post-interim statistics of all K+T arms under the
// amended recruitment plan (new arms compare against concurrent controls
// only; existing arms' statistics are the post-interim increments, to be
// combined with the interim Z via the split weights).
inline JointTrialLaw post_amendment_law(const AmendedDesign& d, const std::vector<double>& theta) {
  return make_law(d.plan_post, theta);
}

inline AmendedDesign amend_design(const ClosedTest& test, const InterimState& interim, int new_arms,
                                  const RecruitmentPlan& plan_post, BoundaryShape shape,
                                  const CalibrationOptions& opts = {}) {
  if (interim.stopped)
    throw std::domain_error("amend_design: no amendment: trial concluded");
  plan_post.validate();
  const int K = test.plan.arms, T = new_arms, Jp = interim.jprime;
  if (T < 0) throw std::domain_error("amend_design: new-arm count must be >= 0");
  if (plan_post.arms != K + T)
    throw std::domain_error("amend_design: post plan must cover all existing and new arms");
  const int R = plan_post.stages;  // remaining analyses (may differ from J - J')

  AmendedDesign d;
  d.base = test;
  d.interim = interim;
  d.new_arms = T;
  d.plan_post = plan_post;
  d.shape = shape;
  d.seed = opts.seed;
  d.nsim = opts.nsim;
  d.cond_error = conditional_errors_all(test, interim, opts);

  // split weights for the amended tests from the combined patient counts
  d.w1.assign(K, std::vector<double>(R));
  d.w2 = d.w1;
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < R; ++j) {
      const double n_int =
          test.plan.n * (test.plan.ratios[k + 1][Jp - 1] + test.plan.ratios[0][Jp - 1]);
      const double n_add = plan_post.n * (plan_post.ratios[k + 1][j] + plan_post.ratios[0][j]);
      d.w1[k][j] = std::sqrt(n_int / (n_int + n_add));
      d.w2[k][j] = std::sqrt(1.0 - d.w1[k][j] * d.w1[k][j]);
    }

  // Boundary-shape anchoring.  A no-op amendment (T = 0 with the original
  // remaining recruitment) keeps the original whole-trial anchoring and
  // futility bounds, so recalibration reproduces the original residual
  // tests decision-for-decision.  A real amendment re-anchors sets that
  // involve existing arms on the remaining-analysis grid; sets of new arms
  // only get a fresh whole-trial grid over their own analyses.
  const bool noop = (T == 0 && R == test.plan.stages - Jp);
  StageGrid grid_resid, grid_whole;
  grid_resid.q = R;
  grid_whole.q = Jp + R;
  for (int j = 0; j < R; ++j) {
    grid_resid.p.push_back(j + 1);
    grid_whole.p.push_back(Jp + j + 1);
  }
  auto factors = [&](const StageGrid& g, std::vector<double>& uf, std::vector<double>& lf) {
    uf.resize(R);
    lf.resize(R);
    for (int j = 0; j < R; ++j) {
      uf[j] = upper_shape_factor(shape, g.p[j], g.q);
      lf[j] = lower_shape_factor(shape, g.p[j], g.q);
    }
  };
  std::vector<double> uf_resid, lf_resid, uf_whole, lf_whole;
  factors(grid_resid, uf_resid, lf_resid);
  factors(grid_whole, uf_whole, lf_whole);

  // calibration paths: post-interim statistics under the global null, with
  // existing arms entering through the reconstructed Z
  const JointTrialLaw law = post_amendment_law(d, std::vector<double>(K + T, 0.0));
  const int d_path = (K + T) * R;
  std::vector<float> s(static_cast<size_t>(opts.nsim) * d_path);
  {
    std::vector<double> zstar;
    for (int64_t rep = 0; rep < opts.nsim; ++rep) {
      Rng rng(opts.seed, static_cast<uint64_t>(rep));
      law.generate_path(rng, zstar);
      for (int k = 0; k < K + T; ++k)
        for (int j = 0; j < R; ++j) {
          double v = zstar[k * R + j];
          if (k < K) v = reconstruct_z(interim.z[k], v, d.w1[k][j], d.w2[k][j]);
          s[static_cast<size_t>(rep) * d_path + k * R + j] = static_cast<float>(v);
        }
    }
  }

  const double noise_floor = 16.0 / static_cast<double>(opts.nsim);
  const HypothesisSet full = d.full_post();
  const HypothesisSet emask = d.existing_mask();

  auto members_active = [&](HypothesisSet m) {
    std::vector<int> ks;  // 0-based arm indices with data in the remainder
    for (int k : set_members(m))
      if (k > K || !interim.dropped[k - 1]) ks.push_back(k - 1);
    return ks;
  };
  HypothesisSet dropmask = 0;
  for (int k = 0; k < K; ++k)
    if (interim.dropped[k]) dropmask |= (HypothesisSet{1} << k);
  auto level_of = [&](HypothesisSet m) {
    const HypothesisSet proj = m & emask;
    // a hypothesis dropped for futility is accepted and leaves the closure;
    // an intersection whose existing part was dropped entirely carries no
    // conditional budget and is tested afresh through its new members
    if (!proj || (proj & ~dropmask) == 0) return test.alpha;
    return d.cond_error.at(proj);
  };
  auto pre_rejected = [&](HypothesisSet m) {
    const HypothesisSet proj = m & emask;
    return proj && interim.local_rejected.at(proj);
  };

  // shared futility l' from the full intersection
  {
    const double lvl = level_of(full);
    if (noop) {
      d.futility_post.assign(test.futility.begin() + Jp, test.futility.end());
    } else if (pre_rejected(full) || lvl < noise_floor) {
      // degenerate: no scale to calibrate the lower bounds against; fall
      // back to the shape at the original full-trial scale
      const double c0 = test.family.at(test.full_set()).scale;
      d.futility_post.resize(R);
      for (int j = 0; j < R; ++j) d.futility_post[j] = c0 * lf_resid[j];
    } else {
      std::vector<double> crit(opts.nsim);
      const auto ks = members_active(full);
      std::vector<float> sub(ks.size() * R);
      for (int64_t rep = 0; rep < opts.nsim; ++rep) {
        const float* ps = s.data() + static_cast<size_t>(rep) * d_path;
        for (size_t a = 0; a < ks.size(); ++a)
          for (int j = 0; j < R; ++j) sub[a * R + j] = ps[ks[a] * R + j];
        crit[rep] = detail::critical_scale_scaling_lower(sub.data(), static_cast<int>(ks.size()),
                                                         R, uf_resid, lf_resid);
      }
      const double c = detail::scale_from_criticals(crit, lvl);
      d.futility_post.resize(R);
      for (int j = 0; j < R; ++j) {
        d.futility_post[j] = c * lf_resid[j];
        if (d.futility_post[j] == 0.0) d.futility_post[j] = 0.0;
      }
      AmendedBounds fb;
      fb.level = lvl;
      fb.scale = c;
      fb.upper.resize(R);
      fb.lower = d.futility_post;
      for (int j = 0; j < R; ++j) fb.upper[j] = c * uf_resid[j];
      d.family_post[full] = fb;
    }
  }

  // upper bounds for every hypothesis, futility held fixed at l'
  std::vector<double> crit(opts.nsim);
  for (HypothesisSet m = 1; m <= full; ++m) {
    if (d.family_post.count(m)) continue;  // full set already done (scaling-l case)
    AmendedBounds b;
    b.level = level_of(m);
    b.pre_rejected = pre_rejected(m);
    if (noop) {
      // nothing changed: the residual closure is the original one, bound for
      // bound, so copy rather than re-estimate (decision-identical by
      // construction instead of up to Monte Carlo error)
      const auto& ob = test.family.at(m);
      b.scale = ob.scale;
      b.upper.assign(ob.upper.begin() + Jp, ob.upper.end());
      b.lower = d.futility_post;
      b.vacuous = members_active(m).empty() && !b.pre_rejected;
      d.family_post[m] = b;
      continue;
    }
    const bool resid_grid = (m & emask & ~dropmask) != 0;
    const auto& uf = resid_grid ? uf_resid : uf_whole;
    const auto ks = members_active(m);
    if (b.pre_rejected || ks.empty() || b.level < noise_floor) {
      // pre-rejected sets need no bounds; sets with no remaining data or a
      // degenerate level can never reject in the remainder
      b.vacuous = !b.pre_rejected;
      b.upper.assign(R, std::numeric_limits<double>::infinity());
      b.lower = d.futility_post;
      d.family_post[m] = b;
      continue;
    }
    for (int64_t rep = 0; rep < opts.nsim; ++rep) {
      double c = -std::numeric_limits<double>::infinity();
      const float* ps = s.data() + static_cast<size_t>(rep) * d_path;
      for (int k : ks) {
        for (int j = 0; j < R; ++j) {
          const double v = ps[k * R + j];
          if (v > 0.0) c = std::max(c, v / uf[j]);
          if (v < d.futility_post[j]) break;
        }
      }
      crit[rep] = c;
    }
    b.scale = detail::scale_from_criticals(crit, b.level);
    b.upper.resize(R);
    b.lower = d.futility_post;
    for (int j = 0; j < R; ++j) b.upper[j] = b.scale * uf[j];
    d.family_post[m] = b;
  }
  return d;
}

// ------------------------------------------------------------- conduct

struct AmendedOutcome {
  std::vector<char> reject_global;  // arms 1..K+T
  std::vector<char> dropped;
  int stop_stage = 0;  // 1-based remaining-analysis index
  bool stopped_for_efficacy = false;
  double patients = 0.0;  // post-amendment recruitment only
};

// Apply the amended closed test to one path of post-interim statistics
// (existing arms already reconstructed; s[k][j], k = 0..K+T-1).
inline AmendedOutcome evaluate_amended(const AmendedDesign& d,
                                       const std::vector<std::vector<double>>& s,
                                       StopRule stop_rule = StopRule::EfficacyStopsTrial) {
  const int A = d.total_arms(), K = d.base.plan.arms, R = d.plan_post.stages;
  if (static_cast<int>(s.size()) != A)
    throw std::invalid_argument("evaluate_amended: path arm count mismatch");
  AmendedOutcome out;
  out.reject_global.assign(A, 0);
  out.dropped.assign(A, 0);
  std::vector<char> active(A, 1), resolved(A, 0);
  for (int k = 0; k < K; ++k)
    if (d.interim.dropped[k]) { active[k] = 0; out.dropped[k] = 1; }
  std::map<HypothesisSet, char> local;
  for (const auto& [m, b] : d.family_post) local[m] = b.pre_rejected;
  for (int j = 0; j < R; ++j) {
    double cohort = (d.plan_post.ratios[0][j] - (j ? d.plan_post.ratios[0][j - 1] : 0.0)) * d.plan_post.n;
    for (int k = 0; k < A; ++k)
      if (active[k])
        cohort += (d.plan_post.ratios[k + 1][j] - (j ? d.plan_post.ratios[k + 1][j - 1] : 0.0)) *
                  d.plan_post.n;
    out.patients += cohort;
    out.stop_stage = j + 1;
    for (auto& [m, rej] : local) {
      if (rej || d.family_post.at(m).vacuous) continue;
      for (int k : set_members(m))
        if (active[k - 1] && s[k - 1][j] > d.family_post.at(m).upper[j]) { rej = 1; break; }
    }
    bool any_global = false;
    for (int k = 0; k < A; ++k) {
      if (resolved[k]) continue;
      bool all = true;
      for (const auto& [m, rej] : local)
        if ((m >> k) & 1u) all = all && rej;
      if (all) {
        out.reject_global[k] = 1;
        resolved[k] = 1;
        any_global = true;
      }
    }
    if (any_global && stop_rule == StopRule::EfficacyStopsTrial) {
      out.stopped_for_efficacy = true;
      return out;
    }
    if (stop_rule == StopRule::ContinueRemaining)
      for (int k = 0; k < A; ++k)
        if (out.reject_global[k]) active[k] = 0;
    for (int k = 0; k < A; ++k)
      if (active[k] && s[k][j] < d.futility_post[j]) {
        active[k] = 0;
        out.dropped[k] = 1;
      }
    bool any = false;
    for (int k = 0; k < A; ++k) any = any || active[k];
    if (!any) return out;
  }
  return out;
}

// ---------------------------------------------------------- serialization

inline std::string serialize_amended_design(const AmendedDesign& d) {
  std::string base = serialize_closed_test(d.base);
  // swap the header and append the amendment sections
  std::ostringstream os;
  os << "mams-amendment-document v1\n";
  os << base.substr(base.find('\n') + 1);
  os << "[amendment]\n";
  os << "jprime = " << d.interim.jprime << "\n";
  os << "new_arms = " << d.new_arms << "\n";
  os << "shape = " << shape_name(d.shape) << "\n";
  os << "seed = " << d.seed << "\n";
  os << "nsim = " << d.nsim << "\n";
  for (int k = 0; k < d.base.plan.arms; ++k)
    os << "history.arm" << (k + 1) << " = " << detail::join_full(d.interim.history[k]) << "\n";
  {
    std::string drop;
    for (char c : d.interim.dropped) drop += (c ? "1 " : "0 ");
    if (!drop.empty()) drop.pop_back();
    os << "dropped = " << drop << "\n";
  }
  os << "futility-post = " << detail::join_full(d.futility_post) << "\n";
  for (const auto& [m, b] : d.cond_error)
    os << "B." << set_label(m) << " = " << detail::fmt_full(b) << "\n";
  os << "[plan-post]\n";
  os << "stages = " << d.plan_post.stages << "\n";
  os << "arms = " << d.plan_post.arms << "\n";
  os << "n = " << detail::fmt_full(d.plan_post.n) << "\n";
  os << "sigma = " << detail::fmt_full(d.plan_post.sigma) << "\n";
  for (int k = 0; k <= d.plan_post.arms; ++k)
    os << "ratio.arm" << k << " = " << detail::join_full(d.plan_post.ratios[k]) << "\n";
  for (const auto& [m, b] : d.family_post) {
    os << "[post " << set_label(m) << "]\n";
    os << "level = " << detail::fmt_full(b.level) << "\n";
    os << "scale = " << detail::fmt_full(b.scale) << "\n";
    os << "upper = " << detail::join_full(b.upper) << "\n";
    os << "lower = " << detail::join_full(b.lower) << "\n";
    os << "vacuous = " << (b.vacuous ? 1 : 0) << "\n";
    os << "pre_rejected = " << (b.pre_rejected ? 1 : 0) << "\n";
  }
  return os.str();
}

inline AmendedDesign parse_amended_design(const std::string& text) {
  auto sections = detail::parse_document(text, "mams-amendment-document v1");
  // the base design reuses the closed-test parser on its own sections
  std::ostringstream base;
  base << "mams-design-document v1\n";
  AmendedDesign d;
  for (const auto& sec : sections) {
    if (sec.name == "plan" || sec.name == "test" || sec.name.rfind("bounds ", 0) == 0) {
      base << "[" << sec.name << "]\n";
      for (const auto& [k, v] : sec.kv) base << k << " = " << v << "\n";
    } else if (sec.name == "amendment") {
      d.interim.jprime = std::stoi(sec.kv.at("jprime"));
      d.new_arms = std::stoi(sec.kv.at("new_arms"));
      d.shape = shape_from_name(sec.kv.at("shape"));
      d.seed = std::stoull(sec.kv.at("seed"));
      d.nsim = std::stoll(sec.kv.at("nsim"));
      d.futility_post = detail::parse_doubles(sec.kv.at("futility-post"));
      for (const auto& [k, v] : sec.kv)
        if (k.rfind("B.", 0) == 0)
          d.cond_error[detail::set_from_label(k.substr(2))] = std::stod(v);
      int arm = 1;
      while (sec.kv.count("history.arm" + std::to_string(arm))) {
        d.interim.history.push_back(
            detail::parse_doubles(sec.kv.at("history.arm" + std::to_string(arm))));
        ++arm;
      }
      for (double x : detail::parse_doubles(sec.kv.at("dropped")))
        d.interim.dropped.push_back(x != 0.0);
    } else if (sec.name == "plan-post") {
      d.plan_post.stages = std::stoi(sec.kv.at("stages"));
      d.plan_post.arms = std::stoi(sec.kv.at("arms"));
      d.plan_post.n = std::stod(sec.kv.at("n"));
      d.plan_post.sigma = std::stod(sec.kv.at("sigma"));
      d.plan_post.ratios.resize(d.plan_post.arms + 1);
      for (int k = 0; k <= d.plan_post.arms; ++k)
        d.plan_post.ratios[k] = detail::parse_doubles(sec.kv.at("ratio.arm" + std::to_string(k)));
    } else if (sec.name.rfind("post ", 0) == 0) {
      AmendedBounds b;
      b.level = std::stod(sec.kv.at("level"));
      b.scale = std::stod(sec.kv.at("scale"));
      b.upper = detail::parse_doubles(sec.kv.at("upper"));
      b.lower = detail::parse_doubles(sec.kv.at("lower"));
      b.vacuous = sec.kv.at("vacuous") == "1";
      b.pre_rejected = sec.kv.at("pre_rejected") == "1";
      d.family_post[detail::set_from_label(sec.name.substr(5))] = b;
    } else {
      throw std::runtime_error("unknown document section: " + sec.name);
    }
  }
  d.base = parse_closed_test(base.str());
  // rebuild derived interim fields from the stored history
  d.interim = observe_interim(d.base, d.interim.history, d.interim.jprime);
  // split weights for the amended tests
  const int K = d.base.plan.arms, Jp = d.interim.jprime, R = d.plan_post.stages;
  d.w1.assign(K, std::vector<double>(R));
  d.w2 = d.w1;
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < R; ++j) {
      const double n_int =
          d.base.plan.n * (d.base.plan.ratios[k + 1][Jp - 1] + d.base.plan.ratios[0][Jp - 1]);
      const double n_add = d.plan_post.n * (d.plan_post.ratios[k + 1][j] + d.plan_post.ratios[0][j]);
      d.w1[k][j] = std::sqrt(n_int / (n_int + n_add));
      d.w2[k][j] = std::sqrt(1.0 - d.w1[k][j] * d.w1[k][j]);
    }
  return d;
}

}  // namespace mams
