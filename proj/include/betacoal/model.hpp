#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace betacoal {

// lgamma writes the global signgam in glibc; lgamma_r does not.
inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

// log Γ(x+a) − log Γ(x+b) for x ≥ 1; switches to the asymptotic series once
// the two lgamma values are too large to subtract accurately.
inline double log_gamma_ratio(double x, double a, double b) {
  if (x < 1e7) return log_gamma(x + a) - log_gamma(x + b);
  const double d = a - b;
  return d * std::log(x) + d * (a + b - 1.0) / (2.0 * x);
}

struct AlphaModel {
  double alpha;
  double gamma;               // 1/(α−1), limiting mean jump size
  double one_over_alpha;
  double fluct_exponent;      // 1 − α + 1/α
  double centering_exponent;  // 2 − α

  explicit AlphaModel(double a) {
    if (!(a > 1.0 && a < 2.0))
      throw std::invalid_argument("alpha must lie strictly between 1 and 2, got " + std::to_string(a));
    alpha = a;
    gamma = 1.0 / (a - 1.0);
    one_over_alpha = 1.0 / a;
    fluct_exponent = 1.0 - a + 1.0 / a;
    centering_exponent = 2.0 - a;
  }
};

// c_k = α(α−1)² Γ(k+α−2) / k!
inline double centering_constant(int k, const AlphaModel& model) {
  if (k < 1) throw std::invalid_argument("centering_constant: k must be >= 1");
  const double a = model.alpha;
  return a * (a - 1.0) * (a - 1.0) * std::exp(log_gamma(k + a - 2.0) - log_gamma(k + 1.0));
}

// Right-tail constant of the limit S_1 in the theorem normalization:
// lim x^α P(S_1 > x) = (α(2−α)Γ(α))^α (α−1)^{α+1} / Γ(2−α).
inline double theorem_tail_constant(const AlphaModel& model) {
  const double a = model.alpha;
  return std::pow(a * (2.0 - a) * std::tgamma(a), a) * std::pow(a - 1.0, a + 1.0) / std::tgamma(2.0 - a);
}

// Right-tail constant per unit time of the limit of the centred jump walk.
inline double walk_tail_constant(const AlphaModel& model) {
  return 1.0 / std::tgamma(2.0 - model.alpha);
}

}  // namespace betacoal
