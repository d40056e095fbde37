#pragma once
// Multivariate-normal kernels for the stage-by-arm Gaussian process:
// shared-control correlation structure, orthant probabilities, and
// boundary-crossing probabilities.
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mams/normal.hpp"
#include "mams/rng.hpp"

namespace mams {

class CorrelationMatrix {
 public:
  explicit CorrelationMatrix(int dim) : dim_(dim), a_(dim * dim, 0.0) {
    if (dim < 1) throw std::domain_error("CorrelationMatrix: dim must be >= 1");
    for (int i = 0; i < dim; ++i) a_[i * dim + i] = 1.0;
  }
  int dim() const { return dim_; }
  double operator()(int i, int j) const { return a_[i * dim_ + j]; }
  void set(int i, int j, double v) {
    if (v < -1.0 || v > 1.0) throw std::domain_error("correlation outside [-1,1]");
    a_[i * dim_ + j] = v;
    a_[j * dim_ + i] = v;
  }
  // Lower Cholesky factor; verifies positive semi-definiteness.
  std::vector<double> cholesky() const {
    std::vector<double> L(dim_ * dim_, 0.0);
    for (int i = 0; i < dim_; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = a_[i * dim_ + j];
        for (int k = 0; k < j; ++k) s -= L[i * dim_ + k] * L[j * dim_ + k];
        if (i == j) {
          if (s < -1e-10) throw std::domain_error("correlation matrix not PSD");
          L[i * dim_ + i] = std::sqrt(std::max(s, 0.0));
        } else {
          L[i * dim_ + j] = L[j * dim_ + j] > 0.0 ? s / L[j * dim_ + j] : 0.0;
        }
      }
    }
    return L;
  }

 private:
  int dim_;
  std::vector<double> a_;
};

// Correlation between arm-vs-control Z statistics sharing one control group:
// entry (i,j) = sqrt( r_i/(r_i+r_0) * r_j/(r_j+r_0) ).
inline CorrelationMatrix dunnett_correlation(const std::vector<double>& alloc_ratios,
                                             double control_ratio) {
  if (control_ratio <= 0.0) throw std::domain_error("dunnett_correlation: control ratio <= 0");
  for (double r : alloc_ratios)
    if (r <= 0.0) throw std::domain_error("dunnett_correlation: arm ratio <= 0");
  const int k = static_cast<int>(alloc_ratios.size());
  CorrelationMatrix c(k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j)
      c.set(i, j, std::sqrt(alloc_ratios[i] / (alloc_ratios[i] + control_ratio) *
                            alloc_ratios[j] / (alloc_ratios[j] + control_ratio)));
  return c;
}

struct OrthantOptions {
  bool force_monte_carlo = false;
  uint64_t seed = 0x5eedULL;
  int64_t nsim = 1000000;
};

// P(exists i: X_i > c_i) for X ~ N(0, corr).
// Exact quadrature for dim <= 3, Monte Carlo otherwise.
inline double upper_orthant_prob(const std::vector<double>& thresholds,
                                 const CorrelationMatrix& corr,
                                 const OrthantOptions& opts = {}) {
  const int d = corr.dim();
  if (static_cast<int>(thresholds.size()) != d)
    throw std::invalid_argument("upper_orthant_prob: dimension mismatch");
  if (!opts.force_monte_carlo) {
    if (d == 1) return 1.0 - norm_cdf(thresholds[0]);
    if (d == 2) return 1.0 - bvn_cdf(thresholds[0], thresholds[1], corr(0, 1));
    if (d == 3)
      return 1.0 - tvn_cdf(thresholds[0], thresholds[1], thresholds[2],
                           corr(0, 1), corr(0, 2), corr(1, 2));
  }
  const std::vector<double> L = corr.cholesky();
  int64_t hits = 0;
  std::vector<double> z(d);
  for (int64_t rep = 0; rep < opts.nsim; ++rep) {
    Rng rng(opts.seed, static_cast<uint64_t>(rep));
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    for (int i = 0; i < d; ++i) {
      double x = 0.0;
      for (int j = 0; j <= i; ++j) x += L[i * d + j] * z[j];
      if (x > thresholds[i]) { ++hits; break; }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(opts.nsim);
}

// Joint law of the K x J array of Z statistics: arm k at analysis j compares
// the cumulative arm mean against the cumulative control mean.  Paths are
// generated from stagewise sufficient statistics (increment sums), which is
// the exact joint law for normal outcomes with known sigma.
struct JointTrialLaw {
  int stages = 0;                            // J
  int arms = 0;                              // K
  double sigma = 1.0;
  std::vector<std::vector<double>> n_arm;     // [k][j] cumulative sample size
  std::vector<double> n_control;              // [j]    cumulative sample size
  std::vector<double> theta;                  // per-arm effect
  std::vector<std::vector<double>> info;      // [k][j] information levels

  double mean(int k, int j) const { return theta[k] * std::sqrt(info[k][j]); }

  // Full correlation matrix over the K*J coordinates (arm-major order).
  CorrelationMatrix correlation() const {
    CorrelationMatrix c(arms * stages);
    auto cov = [&](int k, int j, int l, int i) {
      // Cov(theta_hat_k^(j), theta_hat_l^(i)); cumulative means of nested
      // samples satisfy Cov(mean_a, mean_b) = sigma^2 / n_larger.
      const double s2 = sigma * sigma;
      double v = s2 / n_control[std::max(i, j)];
      if (k == l) v += s2 / std::max(n_arm[k][j], n_arm[k][i]);
      return v;
    };
    for (int k = 0; k < arms; ++k)
      for (int j = 0; j < stages; ++j)
        for (int l = 0; l < arms; ++l)
          for (int i = 0; i < stages; ++i) {
            const int a = k * stages + j, b = l * stages + i;
            if (a < b) {
              const double rho = cov(k, j, l, i) * std::sqrt(info[k][j] * info[l][i]);
              c.set(a, b, rho);
            }
          }
    return c;
  }

  // One path of Z statistics (arm-major: z[k*J + j]) for one replicate stream.
  void generate_path(Rng& rng, std::vector<double>& z) const {
    z.assign(arms * stages, 0.0);
    std::vector<double> csum(stages);  // control increment sums
    double acc = 0.0;
    for (int j = 0; j < stages; ++j) {
      const double m = n_control[j] - (j ? n_control[j - 1] : 0.0);
      acc += (m > 0.0 ? std::sqrt(m) * sigma * rng.normal() : 0.0);
      csum[j] = acc;
    }
    for (int k = 0; k < arms; ++k) {
      double asum = 0.0;
      for (int j = 0; j < stages; ++j) {
        const double m = n_arm[k][j] - (j ? n_arm[k][j - 1] : 0.0);
        asum += theta[k] * m + (m > 0.0 ? std::sqrt(m) * sigma * rng.normal() : 0.0);
        const double est = asum / n_arm[k][j] - csum[j] / n_control[j];
        z[k * stages + j] = est * std::sqrt(info[k][j]);
      }
    }
  }
};

enum class StopRule { EfficacyStopsTrial, ContinueRemaining };

struct CrossingOptions {
  int64_t nsim = 1000000;
  uint64_t seed = 0x5eedULL;
};

// P(the sequential procedure rejects at least one arm): arm k rejects at
// stage j if active and z_k^(j) > upper[j]; an arm with z below lower[j] is
// dropped (binding futility).  The stop rule does not change this
// probability (the first crossing is the event either way) but is part of
// the interface for callers that track per-arm outcomes.
inline double crossing_probability(const JointTrialLaw& law,
                                   const std::vector<double>& upper,
                                   const std::vector<double>& lower,
                                   StopRule /*stop_rule*/ = StopRule::EfficacyStopsTrial,
                                   const CrossingOptions& opts = {}) {
  if (static_cast<int>(upper.size()) != law.stages ||
      static_cast<int>(lower.size()) != law.stages)
    throw std::invalid_argument("crossing_probability: bounds/stage mismatch");
  for (int j = 0; j < law.stages; ++j)
    if (lower[j] > upper[j])
      throw std::invalid_argument("crossing_probability: lower bound above upper bound");
  int64_t hits = 0;
  std::vector<double> z;
  std::vector<char> active(law.arms);
  for (int64_t rep = 0; rep < opts.nsim; ++rep) {
    Rng rng(opts.seed, static_cast<uint64_t>(rep));
    law.generate_path(rng, z);
    std::fill(active.begin(), active.end(), 1);
    bool rejected = false;
    for (int j = 0; j < law.stages && !rejected; ++j) {
      for (int k = 0; k < law.arms; ++k) {
        if (!active[k]) continue;
        const double v = z[k * law.stages + j];
        if (v > upper[j]) { rejected = true; break; }
        if (v < lower[j]) active[k] = 0;
      }
    }
    if (rejected) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(opts.nsim);
}

}  // namespace mams
