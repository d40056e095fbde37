#pragma once
// Univariate and low-dimensional multivariate normal kernels.
#include <cmath>
#include <stdexcept>
#include <array>
#include <vector>
#include <limits>

namespace mams {

inline double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

// Wichura's PPND16 quantile (absolute error ~1e-16).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("norm_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
      (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
            6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
          1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
        1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
      (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
            3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
          5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
        4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

// Bivariate normal P(X <= a, Y <= b) with correlation rho.
// Drezner & Wesolowsky / Genz hybrid, absolute error < 5e-16.
inline double bvn_cdf(double a, double b, double rho) {
  if (std::isinf(a) || std::isinf(b)) {
    if (a == -std::numeric_limits<double>::infinity() ||
        b == -std::numeric_limits<double>::infinity()) return 0.0;
    if (a == std::numeric_limits<double>::infinity()) return norm_cdf(b);
    return norm_cdf(a);
  }
  // Genz works with P(X > h, Y > k); convert.
  const double h = -a, k = -b;
  static const double x20[10] = {
    0.07652652113349733, 0.22778585114164507, 0.37370608871541955,
    0.51086700195082713, 0.63605368072651502, 0.74633190646015079,
    0.83911697182221882, 0.91223442825132591, 0.96397192727791379,
    0.99312859918509492};
  static const double w20[10] = {
    0.15275338713072585, 0.14917298647260374, 0.14209610931838205,
    0.13168863844917662, 0.11819453196151841, 0.10193011981724044,
    0.08327674157670475, 0.06267204833410906, 0.04060142980038694,
    0.01761400713915212};
  double bvn = 0.0;
  if (std::fabs(rho) < 0.925) {
    const double hs = (h * h + k * k) / 2.0, asr = std::asin(rho);
    for (int i = 0; i < 10; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        const double sn = std::sin(asr * (is * x20[i] + 1.0) / 2.0);
        bvn += w20[i] * std::exp((sn * h * k - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / (4.0 * M_PI) + norm_cdf(-h) * norm_cdf(-k);
  } else {
    double hh = h, kk = k;
    if (rho < 0.0) kk = -kk;
    if (std::fabs(rho) < 1.0) {
      const double as = (1.0 - rho) * (1.0 + rho);
      double aa = std::sqrt(as);
      const double bs = (hh - kk) * (hh - kk);
      const double c = (4.0 - hh * kk) / 8.0, d = (12.0 - hh * kk) / 16.0;
      const double asrr = -(bs / as + hh * kk) / 2.0;
      if (asrr > -100.0)
        bvn = aa * std::exp(asrr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
               c * d * as * as / 5.0);
      if (-hh * kk < 100.0) {
        const double bb = std::sqrt(bs);
        bvn -= std::exp(-hh * kk / 2.0) * std::sqrt(2.0 * M_PI) * norm_cdf(-bb / aa) *
               bb * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      aa = std::sqrt(as) / 2.0;
      double sum = 0.0;
      for (int i = 0; i < 10; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double x = aa * (is * x20[i] + 1.0);
          const double xs = x * x;
          const double rs = std::sqrt(1.0 - xs);
          const double asr2 = -(bs / xs + hh * kk) / 2.0;
          if (asr2 > -100.0)
            sum += aa * w20[i] * std::exp(asr2) *
                   (std::exp(-hh * kk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs * (1.0 + d * xs)));
        }
      }
      bvn += sum;
      bvn = -bvn / (2.0 * M_PI);
    }
    if (rho > 0.0) {
      bvn += norm_cdf(-std::max(hh, kk));
    } else {
      bvn = -bvn;
      if (kk > hh) bvn += norm_cdf(kk) - norm_cdf(hh);
    }
  }
  return std::min(1.0, std::max(0.0, bvn));
}

// Trivariate normal P(X1<=c1, X2<=c2, X3<=c3); conditions on X1 and
// integrates the conditional bivariate CDF with Gauss-Legendre panels.
inline double tvn_cdf(double c1, double c2, double c3,
                      double r12, double r13, double r23) {
  if (c1 == std::numeric_limits<double>::infinity()) return bvn_cdf(c2, c3, r23);
  if (c2 == std::numeric_limits<double>::infinity()) return bvn_cdf(c1, c3, r13);
  if (c3 == std::numeric_limits<double>::infinity()) return bvn_cdf(c1, c2, r12);
  if (std::isinf(c1) || std::isinf(c2) || std::isinf(c3)) return 0.0;
  const double s2 = std::sqrt(std::max(0.0, 1.0 - r12 * r12));
  const double s3 = std::sqrt(std::max(0.0, 1.0 - r13 * r13));
  const double rc = (r23 - r12 * r13) / (s2 * s3); // conditional correlation
  static const double xg[12] = {
    -0.9815606342467192, -0.9041172563704749, -0.7699026741943047,
    -0.5873179542866175, -0.3678314989981802, -0.1252334085114689,
    0.1252334085114689, 0.3678314989981802, 0.5873179542866175,
    0.7699026741943047, 0.9041172563704749, 0.9815606342467192};
  static const double wg[12] = {
    0.0471753363865118, 0.1069393259953184, 0.1600783285433462,
    0.2031674267230659, 0.2334925365383548, 0.2491470458134028,
    0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
    0.1600783285433462, 0.1069393259953184, 0.0471753363865118};
  const double lo = -8.5, hi = std::min(c1, 8.5);
  if (hi <= lo) return 0.0;
  const int panels = 24;
  const double w = (hi - lo) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * w, mid = a + w / 2.0, half = w / 2.0;
    for (int i = 0; i < 12; ++i) {
      const double x = mid + half * xg[i];
      total += half * wg[i] * norm_pdf(x) *
               bvn_cdf((c2 - r12 * x) / s2, (c3 - r13 * x) / s3, rc);
    }
  }
  return std::min(1.0, std::max(0.0, total));
}

}  // namespace mams
