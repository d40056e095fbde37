#pragma once
// Original MAMS design: recruitment plans, boundary-shape families,
// per-intersection calibration under the global null, sequential
// closed-test evaluation, and design-document serialization.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mams/gaussian.hpp"

namespace mams {

// ---------------------------------------------------------------- plan

struct RecruitmentPlan {
  int stages = 0;  // J
  int arms = 0;    // K experimental arms; ratios also cover arm 0 (control)
  double n = 0.0;      // stage-1 control cohort size
  double sigma = 1.0;  // known outcome standard deviation
  // ratios[k][j] = cumulative allocation multiple of n, k = 0..K, j = 0..J-1
  std::vector<std::vector<double>> ratios;

  void validate() const {
    if (stages < 1 || arms < 1) throw std::domain_error("plan: stages and arms must be >= 1");
    if (n <= 0.0 || sigma <= 0.0) throw std::domain_error("plan: n and sigma must be > 0");
    if (static_cast<int>(ratios.size()) != arms + 1)
      throw std::domain_error("plan: need ratios for control plus every arm");
    for (int k = 0; k <= arms; ++k) {
      if (static_cast<int>(ratios[k].size()) != stages)
        throw std::domain_error("plan: ratio row length must equal stage count");
      for (int j = 0; j < stages; ++j) {
        if (ratios[k][j] <= 0.0) throw std::domain_error("plan: ratios must be positive");
        if (j > 0 && ratios[k][j] < ratios[k][j - 1] - 1e-12)
          throw std::domain_error("plan: cumulative ratios must be nondecreasing");
      }
    }
    if (std::fabs(ratios[0][0] - 1.0) > 1e-12)
      throw std::domain_error("plan: control stage-1 ratio must be 1 by construction");
    // control-to-arm ratio must be constant across stages for each arm
    for (int k = 1; k <= arms; ++k) {
      const double ref = ratios[0][0] / ratios[k][0];
      for (int j = 1; j < stages; ++j)
        if (std::fabs(ratios[0][j] / ratios[k][j] - ref) > 1e-9)
          throw std::domain_error(
              "plan: control-to-arm allocation ratio must be constant across stages");
    }
  }
};

// The canonical worked example: J analyses, K arms, n per cohort, equal
// cumulative ratios (1, 2, ..., J) for every arm and the control.
inline RecruitmentPlan equal_allocation_plan(int stages, int arms, double n, double sigma) {
  RecruitmentPlan p;
  p.stages = stages;
  p.arms = arms;
  p.n = n;
  p.sigma = sigma;
  p.ratios.assign(arms + 1, std::vector<double>(stages));
  for (int k = 0; k <= arms; ++k)
    for (int j = 0; j < stages; ++j) p.ratios[k][j] = j + 1.0;
  return p;
}

// Information for the arm-k-vs-control comparison at analysis j (1-based j).
inline double information_level(const RecruitmentPlan& plan, int arm, int stage) {
  if (arm == 0) throw std::domain_error("information_level: control arm has no treatment effect");
  if (arm < 0 || arm > plan.arms || stage < 1 || stage > plan.stages)
    throw std::domain_error("information_level: index out of range");
  const double rk = plan.ratios[arm][stage - 1], r0 = plan.ratios[0][stage - 1];
  return rk * r0 * plan.n / (plan.sigma * plan.sigma * (rk + r0));
}

inline double z_statistic(double effect_estimate, double info) {
  if (info <= 0.0) throw std::domain_error("z_statistic: information must be > 0");
  return effect_estimate * std::sqrt(info);
}

inline JointTrialLaw make_law(const RecruitmentPlan& plan, const std::vector<double>& theta) {
  if (static_cast<int>(theta.size()) != plan.arms)
    throw std::invalid_argument("make_law: theta dimension mismatch");
  JointTrialLaw law;
  law.stages = plan.stages;
  law.arms = plan.arms;
  law.sigma = plan.sigma;
  law.theta = theta;
  law.n_control.resize(plan.stages);
  for (int j = 0; j < plan.stages; ++j) law.n_control[j] = plan.ratios[0][j] * plan.n;
  law.n_arm.assign(plan.arms, std::vector<double>(plan.stages));
  law.info.assign(plan.arms, std::vector<double>(plan.stages));
  for (int k = 1; k <= plan.arms; ++k)
    for (int j = 0; j < plan.stages; ++j) {
      law.n_arm[k - 1][j] = plan.ratios[k][j] * plan.n;
      law.info[k - 1][j] = information_level(plan, k, j + 1);
    }
  return law;
}

// ---------------------------------------------------------------- shapes

enum class BoundaryShape { Triangular, Pocock, OBrienFleming };

inline std::string shape_name(BoundaryShape s) {
  switch (s) {
    case BoundaryShape::Triangular: return "triangular";
    case BoundaryShape::Pocock: return "pocock";
    case BoundaryShape::OBrienFleming: return "obrien-fleming";
  }
  return "?";
}

inline BoundaryShape shape_from_name(const std::string& s) {
  if (s == "triangular") return BoundaryShape::Triangular;
  if (s == "pocock") return BoundaryShape::Pocock;
  if (s == "obrien-fleming") return BoundaryShape::OBrienFleming;
  throw std::domain_error("unknown boundary shape: " + s);
}

// Analysis-time grid as exact rationals p_i/q so that, e.g., the triangular
// lower bound is exactly zero when q = 3 p_i.
struct StageGrid {
  std::vector<int> p;
  int q = 0;
  static StageGrid uniform(int stages) {
    StageGrid g;
    g.q = stages;
    g.p.resize(stages);
    for (int j = 0; j < stages; ++j) g.p[j] = j + 1;
    return g;
  }
};

// u_j(C) = C * upper_factor, l_j(C) = C * lower_factor.
inline double upper_shape_factor(BoundaryShape s, int p, int q) {
  switch (s) {
    case BoundaryShape::Triangular: return (q + p) / std::sqrt(static_cast<double>(p) * q);
    case BoundaryShape::Pocock: return 1.0;
    case BoundaryShape::OBrienFleming: return std::sqrt(static_cast<double>(q) / p);
  }
  return 0.0;
}

inline double lower_shape_factor(BoundaryShape s, int p, int q) {
  switch (s) {
    case BoundaryShape::Triangular: return -(q - 3.0 * p) / std::sqrt(static_cast<double>(p) * q);
    case BoundaryShape::Pocock: return -1.0;
    case BoundaryShape::OBrienFleming: return -std::sqrt(static_cast<double>(q) / p);
  }
  return 0.0;
}

// ---------------------------------------------------------------- closure

// An intersection hypothesis as a bitmask over arms 1..K (bit k-1 = arm k).
using HypothesisSet = uint32_t;

inline std::vector<int> set_members(HypothesisSet m) {
  std::vector<int> v;
  for (int k = 0; m; ++k, m >>= 1)
    if (m & 1u) v.push_back(k + 1);
  return v;
}

inline std::string set_label(HypothesisSet m) {
  std::string s = "{";
  bool first = true;
  for (int k : set_members(m)) {
    if (!first) s += ",";
    s += std::to_string(k);
    first = false;
  }
  return s + "}";
}

struct BoundarySet {
  std::vector<double> upper;
  std::vector<double> lower;
  double level = 0.0;
  double scale = 0.0;  // calibrated scale constant C
};

struct ClosedTest {
  RecruitmentPlan plan;
  BoundaryShape shape = BoundaryShape::Triangular;
  double alpha = 0.05;
  uint64_t seed = 0;
  int64_t nsim = 0;
  std::vector<double> futility;            // shared lower bounds
  std::map<HypothesisSet, BoundarySet> family;

  HypothesisSet full_set() const {
    return static_cast<HypothesisSet>((1u << plan.arms) - 1u);
  }
};

// ------------------------------------------------------- calibration core

struct CalibrationOptions {
  int64_t nsim = 1000000;
  uint64_t seed = 0x5eedULL;
};

namespace detail {

// Paths for the arms of one hypothesis set under the global null, with RNG
// streams keyed by position within the set so exchangeable sets receive
// identical draws (and hence identical calibrated bounds).
inline void null_paths_for_set(const RecruitmentPlan& plan, const std::vector<int>& members,
                               const CalibrationOptions& opts,
                               std::vector<float>& z /* [rep][arm][stage] */) {
  RecruitmentPlan sub;
  sub.stages = plan.stages;
  sub.arms = static_cast<int>(members.size());
  sub.n = plan.n;
  sub.sigma = plan.sigma;
  sub.ratios.push_back(plan.ratios[0]);
  for (int k : members) sub.ratios.push_back(plan.ratios[k]);
  const JointTrialLaw law = make_law(sub, std::vector<double>(sub.arms, 0.0));
  const int d = sub.arms * sub.stages;
  z.resize(static_cast<size_t>(opts.nsim) * d);
  std::vector<double> path;
  for (int64_t rep = 0; rep < opts.nsim; ++rep) {
    Rng rng(opts.seed, static_cast<uint64_t>(rep));
    law.generate_path(rng, path);
    for (int i = 0; i < d; ++i) z[static_cast<size_t>(rep) * d + i] = static_cast<float>(path[i]);
  }
}

// With fixed lower bounds, a path's activity pattern does not depend on C,
// so the rejection event is {max achievable z / upper_factor > C}: calibrate
// by an order statistic of that per-path critical constant.
inline double critical_scale_fixed_lower(const float* z, int arms, int stages,
                                         const std::vector<double>& lower,
                                         const std::vector<double>& ufac) {
  double crit = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < arms; ++k) {
    for (int j = 0; j < stages; ++j) {
      const double v = z[k * stages + j];
      if (v > 0.0) crit = std::max(crit, v / ufac[j]);
      if (v < lower[j]) break;  // binding futility: arm leaves
    }
  }
  return crit;
}

// With the lower bound scaling along with C the activity pattern depends on
// C; the rejection indicator is still monotone in C, so locate the per-path
// switch point by bisection on C.
inline double critical_scale_scaling_lower(const float* z, int arms, int stages,
                                           const std::vector<double>& ufac,
                                           const std::vector<double>& lfac) {
  auto rejects = [&](double c) {
    for (int k = 0; k < arms; ++k) {
      for (int j = 0; j < stages; ++j) {
        const double v = z[k * stages + j];
        if (v > c * ufac[j]) return true;
        if (v < c * lfac[j]) break;
      }
    }
    return false;
  };
  double lo = 1e-9, hi = 32.0;
  if (!rejects(lo)) return 0.0;   // never rejects, even with tiny bounds
  if (rejects(hi)) return hi;     // rejects however wide the bounds
  for (int it = 0; it < 40; ++it) {  // 32 / 2^40 < 1e-10, ample for Z-scale bounds
    const double mid = 0.5 * (lo + hi);
    (rejects(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Scale constant drawing exactly round(level * nsim) of the given per-path
// critical constants above it (midpoint of the bracketing order statistics).
inline double scale_from_criticals(std::vector<double>& crit, double level) {
  const int64_t n = static_cast<int64_t>(crit.size());
  int64_t k = std::llround(level * static_cast<double>(n));
  if (k <= 0) k = 1;
  if (k >= n) k = n - 1;
  std::nth_element(crit.begin(), crit.begin() + (k - 1), crit.end(), std::greater<double>());
  const double vk = crit[k - 1];
  std::nth_element(crit.begin() + k, crit.begin() + k, crit.end(), std::greater<double>());
  const double vk1 = crit[k];
  double c = 0.5 * (vk + vk1);
  if (!(c > 0.0) || !std::isfinite(c)) c = std::max(vk, 1e-9);
  return c;
}

}  // namespace detail

// Calibrate bounds for the intersection hypothesis `m` at `level` under the
// global null.  When `shared_futility` is given only the upper bounds are
// calibrated; otherwise the shape's own lower bounds scale with C.
inline BoundarySet calibrate_boundaries(const RecruitmentPlan& plan, HypothesisSet m,
                                        BoundaryShape shape, double level,
                                        const std::vector<double>* shared_futility = nullptr,
                                        const CalibrationOptions& opts = {},
                                        const StageGrid* grid = nullptr) {
  plan.validate();
  if (!(level > 0.0 && level < 1.0)) throw std::domain_error("calibrate_boundaries: level outside (0,1)");
  if (level * static_cast<double>(opts.nsim) < 16.0)
    throw std::domain_error("calibrate_boundaries: level below Monte Carlo noise floor; increase nsim");
  const std::vector<int> members = set_members(m);
  if (members.empty() || members.back() > plan.arms)
    throw std::domain_error("calibrate_boundaries: invalid hypothesis set");
  const StageGrid g = grid ? *grid : StageGrid::uniform(plan.stages);
  std::vector<double> ufac(plan.stages), lfac(plan.stages);
  for (int j = 0; j < plan.stages; ++j) {
    ufac[j] = upper_shape_factor(shape, g.p[j], g.q);
    lfac[j] = lower_shape_factor(shape, g.p[j], g.q);
  }

  BoundarySet out;
  out.level = level;
  if (plan.stages == 1 && members.size() == 1) {
    out.scale = norm_quantile(1.0 - level) / ufac[0];  // exact single-stage reduction
  } else {
    std::vector<float> z;
    detail::null_paths_for_set(plan, members, opts, z);
    const int a = static_cast<int>(members.size()), d = a * plan.stages;
    std::vector<double> crit(opts.nsim);
    for (int64_t rep = 0; rep < opts.nsim; ++rep) {
      const float* pz = z.data() + static_cast<size_t>(rep) * d;
      crit[rep] = shared_futility
                      ? detail::critical_scale_fixed_lower(pz, a, plan.stages, *shared_futility, ufac)
                      : detail::critical_scale_scaling_lower(pz, a, plan.stages, ufac, lfac);
    }
    out.scale = detail::scale_from_criticals(crit, level);
  }
  out.upper.resize(plan.stages);
  out.lower.resize(plan.stages);
  for (int j = 0; j < plan.stages; ++j) {
    out.upper[j] = out.scale * ufac[j];
    out.lower[j] = shared_futility ? (*shared_futility)[j] : out.scale * lfac[j];
    if (out.lower[j] == 0.0) out.lower[j] = 0.0;  // normalize -0.0
    // Shared futility bounds may exceed a smaller set's upper bounds at late
    // stages; rejection is checked before futility, so that is well defined.
    if (!shared_futility && out.lower[j] > out.upper[j])
      throw std::runtime_error("calibrate_boundaries: lower bound exceeds upper bound at stage " +
                               std::to_string(j + 1));
  }
  return out;
}

// Full closed testing family: the full intersection fixes the shared
// futility bounds; every subset's upper bounds are then calibrated at alpha
// given those bounds.
inline ClosedTest build_closed_test(const RecruitmentPlan& plan, BoundaryShape shape, double alpha,
                                    const CalibrationOptions& opts = {}) {
  plan.validate();
  ClosedTest test;
  test.plan = plan;
  test.shape = shape;
  test.alpha = alpha;
  test.seed = opts.seed;
  test.nsim = opts.nsim;
  const HypothesisSet full = test.full_set();
  BoundarySet fb = calibrate_boundaries(plan, full, shape, alpha, nullptr, opts);
  test.futility = fb.lower;
  test.family[full] = fb;
  for (HypothesisSet m = 1; m < full; ++m)
    test.family[m] = calibrate_boundaries(plan, m, shape, alpha, &test.futility, opts);
  return test;
}

// ---------------------------------------------------------------- conduct

struct TrialOutcome {
  std::vector<char> reject_global;  // per arm 1..K
  std::vector<char> dropped;        // futility-dropped arms
  int stop_stage = 0;               // 1-based analysis at which the trial ended
  bool stopped_for_efficacy = false;
  double patients = 0.0;            // total recruited, control included
};

// Apply the sequential closed test to one path of Z statistics
// (z[k-1][j-1]).  Stage order: recruit, local intersection tests (active
// arms only, accumulated across stages), global rejections, stop on any
// global rejection, then futility drops.
inline TrialOutcome evaluate_trial(const ClosedTest& test,
                                   const std::vector<std::vector<double>>& path,
                                   StopRule stop_rule = StopRule::EfficacyStopsTrial) {
  const int K = test.plan.arms, J = test.plan.stages;
  if (static_cast<int>(path.size()) != K)
    throw std::invalid_argument("evaluate_trial: path arm count mismatch");
  TrialOutcome out;
  out.reject_global.assign(K, 0);
  out.dropped.assign(K, 0);
  std::vector<char> active(K, 1), resolved(K, 0);
  std::map<HypothesisSet, char> local;
  for (const auto& [m, b] : test.family) local[m] = 0;
  for (int j = 0; j < J; ++j) {
    // recruitment for this stage: every active arm plus control
    double cohort = (test.plan.ratios[0][j] - (j ? test.plan.ratios[0][j - 1] : 0.0)) * test.plan.n;
    for (int k = 0; k < K; ++k)
      if (active[k])
        cohort += (test.plan.ratios[k + 1][j] - (j ? test.plan.ratios[k + 1][j - 1] : 0.0)) * test.plan.n;
    out.patients += cohort;
    out.stop_stage = j + 1;
    for (auto& [m, rej] : local) {
      if (rej) continue;
      for (int k : set_members(m))
        if (active[k - 1] && path[k - 1][j] > test.family.at(m).upper[j]) { rej = 1; break; }
    }
    bool any_global = false;
    for (int k = 0; k < K; ++k) {
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
      for (int k = 0; k < K; ++k)
        if (out.reject_global[k]) active[k] = 0;
    for (int k = 0; k < K; ++k)
      if (active[k] && path[k][j] < test.futility[j]) {
        active[k] = 0;
        out.dropped[k] = 1;
      }
    bool any_active = false;
    for (int k = 0; k < K; ++k) any_active = any_active || active[k];
    if (!any_active) return out;
  }
  return out;
}

// ---------------------------------------------------------- serialization

namespace detail {

inline std::string fmt_full(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string join_full(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += " ";
    s += fmt_full(v[i]);
  }
  return s;
}

inline std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> v;
  std::istringstream is(s);
  double x;
  while (is >> x) v.push_back(x);
  return v;
}

}  // namespace detail

inline std::string serialize_closed_test(const ClosedTest& t) {
  std::ostringstream os;
  os << "mams-design-document v1\n";
  os << "[plan]\n";
  os << "stages = " << t.plan.stages << "\n";
  os << "arms = " << t.plan.arms << "\n";
  os << "n = " << detail::fmt_full(t.plan.n) << "\n";
  os << "sigma = " << detail::fmt_full(t.plan.sigma) << "\n";
  for (int k = 0; k <= t.plan.arms; ++k)
    os << "ratio.arm" << k << " = " << detail::join_full(t.plan.ratios[k]) << "\n";
  os << "[test]\n";
  os << "shape = " << shape_name(t.shape) << "\n";
  os << "alpha = " << detail::fmt_full(t.alpha) << "\n";
  os << "seed = " << t.seed << "\n";
  os << "nsim = " << t.nsim << "\n";
  os << "futility = " << detail::join_full(t.futility) << "\n";
  for (const auto& [m, b] : t.family) {
    os << "[bounds " << set_label(m) << "]\n";
    os << "level = " << detail::fmt_full(b.level) << "\n";
    os << "scale = " << detail::fmt_full(b.scale) << "\n";
    os << "upper = " << detail::join_full(b.upper) << "\n";
    os << "lower = " << detail::join_full(b.lower) << "\n";
  }
  return os.str();
}

namespace detail {

struct DocSection {
  std::string name;
  std::map<std::string, std::string> kv;
};

inline std::vector<DocSection> parse_document(const std::string& text,
                                              const std::string& expect_header) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != expect_header)
    throw std::runtime_error("document header mismatch; expected '" + expect_header + "'");
  std::vector<DocSection> sections;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::runtime_error("malformed section line: " + line);
      sections.push_back({line.substr(1, line.size() - 2), {}});
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos || sections.empty())
      throw std::runtime_error("malformed document line: " + line);
    sections.back().kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return sections;
}

inline HypothesisSet set_from_label(const std::string& label) {
  HypothesisSet m = 0;
  std::string inner = label;
  if (inner.size() < 2 || inner.front() != '{' || inner.back() != '}')
    throw std::runtime_error("malformed hypothesis-set label: " + label);
  inner = inner.substr(1, inner.size() - 2);
  std::istringstream is(inner);
  std::string tok;
  while (std::getline(is, tok, ','))
    m |= 1u << (std::stoi(tok) - 1);
  return m;
}

}  // namespace detail

inline ClosedTest parse_closed_test(const std::string& text) {
  auto sections = detail::parse_document(text, "mams-design-document v1");
  ClosedTest t;
  for (const auto& sec : sections) {
    if (sec.name == "plan") {
      t.plan.stages = std::stoi(sec.kv.at("stages"));
      t.plan.arms = std::stoi(sec.kv.at("arms"));
      t.plan.n = std::stod(sec.kv.at("n"));
      t.plan.sigma = std::stod(sec.kv.at("sigma"));
      t.plan.ratios.resize(t.plan.arms + 1);
      for (int k = 0; k <= t.plan.arms; ++k)
        t.plan.ratios[k] = detail::parse_doubles(sec.kv.at("ratio.arm" + std::to_string(k)));
    } else if (sec.name == "test") {
      t.shape = shape_from_name(sec.kv.at("shape"));
      t.alpha = std::stod(sec.kv.at("alpha"));
      t.seed = std::stoull(sec.kv.at("seed"));
      t.nsim = std::stoll(sec.kv.at("nsim"));
      t.futility = detail::parse_doubles(sec.kv.at("futility"));
    } else if (sec.name.rfind("bounds ", 0) == 0) {
      BoundarySet b;
      b.level = std::stod(sec.kv.at("level"));
      b.scale = std::stod(sec.kv.at("scale"));
      b.upper = detail::parse_doubles(sec.kv.at("upper"));
      b.lower = detail::parse_doubles(sec.kv.at("lower"));
      t.family[detail::set_from_label(sec.name.substr(7))] = b;
    } else {
      throw std::runtime_error("unknown document section: " + sec.name);
    }
  }
  t.plan.validate();
  return t;
}

}  // namespace mams
