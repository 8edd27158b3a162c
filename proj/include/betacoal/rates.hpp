#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "rng.hpp"

namespace betacoal {

inline double log_binomial(std::int64_t m, std::int64_t k) {
  return log_gamma(m + 1.0) - log_gamma(k + 1.0) - log_gamma(static_cast<double>(m - k) + 1.0);
}

// log λ_{m,k}, the rate at which one given set of k out of m blocks merges.
inline double log_merger_rate(std::int64_t m, std::int64_t k, const AlphaModel& model) {
  if (k < 2 || k > m) throw std::domain_error("merger_rate: need 2 <= k <= m");
  const double a = model.alpha;
  return log_gamma(k - a) + log_gamma(static_cast<double>(m - k) + a) - log_gamma(static_cast<double>(m)) -
         log_gamma(2.0 - a) - log_gamma(a);
}

inline double merger_rate(std::int64_t m, std::int64_t k, const AlphaModel& model) {
  return std::exp(log_merger_rate(m, k, model));
}

// Σ_k C(m,k) λ_{m,k} has the closed form Γ(m+α−1) / (α Γ(α) Γ(m−1)).
inline double log_total_rate(std::int64_t m, const AlphaModel& model) {
  if (m < 2) throw std::domain_error("total_rate: need m >= 2");
  const double a = model.alpha;
  return log_gamma_ratio(static_cast<double>(m), a - 1.0, -1.0) - std::log(a) - log_gamma(a);
}

inline double total_rate(std::int64_t m, const AlphaModel& model) {
  return std::exp(log_total_rate(m, model));
}

// Same quantity by log-sum-exp over k; O(m), kept as an independent route.
inline double total_rate_by_sum(std::int64_t m, const AlphaModel& model) {
  if (m < 2) throw std::domain_error("total_rate: need m >= 2");
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(m - 1));
  for (std::int64_t k = 2; k <= m; ++k) terms.push_back(log_binomial(m, k) + log_merger_rate(m, k, model));
  const double top = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return std::exp(top + std::log(s));
}

// P(Δ = d | m) for d = 1..m−1, stored at index d−1.
// C(m,k) λ_{m,k} = m a_k b_{m−k} with a_{k+1}/a_k = (k−α)/(k+1), a_2 = 1/2 and
// b_{j+1}/b_j = (j+α)/(j+1), b_0 = 1; products avoid large lgamma differences.
inline std::vector<double> jump_distribution(std::int64_t m, const AlphaModel& model) {
  if (m < 2) throw std::domain_error("jump_distribution: need m >= 2");
  const double a = model.alpha;
  const auto len = static_cast<std::size_t>(m - 1);
  std::vector<double> av(len), bv(len);
  av[0] = 0.5;
  for (std::size_t i = 1; i < len; ++i) {
    const double k = static_cast<double>(i + 1);
    av[i] = av[i - 1] * (k - a) / (k + 1.0);
  }
  bv[0] = 1.0;
  for (std::size_t j = 1; j < len; ++j) bv[j] = bv[j - 1] * (static_cast<double>(j) - 1.0 + a) / static_cast<double>(j);
  std::vector<double> p(len);
  double total = 0.0;
  for (std::size_t d = 1; d <= len; ++d) {
    p[d - 1] = av[d - 1] * bv[len - d];
    total += p[d - 1];
  }
  for (double& x : p) x /= total;
  return p;
}

// P(V ≥ j) = Γ(j+1−α) / (Γ(2−α) j!)
inline double limit_jump_survival(std::int64_t j, const AlphaModel& model) {
  if (j <= 1) return 1.0;
  const double a = model.alpha;
  return std::exp(log_gamma_ratio(static_cast<double>(j), 1.0 - a, 1.0) - log_gamma(2.0 - a));
}

// P(V = j) = (α/Γ(2−α)) Γ(j+1−α)/Γ(j+2) = P(V ≥ j) α/(j+1)
inline double limit_jump_law(std::int64_t j, const AlphaModel& model) {
  if (j < 1) throw std::domain_error("limit_jump_law: need j >= 1");
  return limit_jump_survival(j, model) * model.alpha / (static_cast<double>(j) + 1.0);
}

// Total variation between P(Δ=·|m) and the limit law, both restricted to {1..dmax}.
inline double tv_distance_to_limit(std::int64_t m, const AlphaModel& model, std::int64_t dmax = 50) {
  auto p = jump_distribution(m, model);
  double tv = 0.0;
  for (std::int64_t d = 1; d <= dmax; ++d) {
    const double pd = d <= m - 1 ? p[static_cast<std::size_t>(d - 1)] : 0.0;
    tv += std::abs(pd - limit_jump_law(d, model));
  }
  return 0.5 * tv;
}

// Inversion sampler for V: table lookup for moderate values, lgamma-based
// search in the far tail.
class LimitJumpSampler {
 public:
  explicit LimitJumpSampler(const AlphaModel& model, std::int64_t table_size = 4096)
      : model_(model), surv_(static_cast<std::size_t>(table_size) + 2) {
    const double a = model.alpha;
    surv_[0] = 1.0;
    surv_[1] = 1.0;
    for (std::size_t j = 1; j + 1 < surv_.size(); ++j)
      surv_[j + 1] = surv_[j] * (static_cast<double>(j) + 1.0 - a) / (static_cast<double>(j) + 1.0);
    log_g2a_ = log_gamma(2.0 - a);
  }

  const AlphaModel& model() const { return model_; }

  // max{ j ≥ 1 : P(V ≥ j) ≥ u } for u in (0, 1]
  std::int64_t invert(double u) const {
    const auto last = static_cast<std::int64_t>(surv_.size()) - 1;
    if (u > surv_[static_cast<std::size_t>(last)]) {
      auto it = std::partition_point(surv_.begin() + 1, surv_.end(), [u](double g) { return g >= u; });
      return static_cast<std::int64_t>(it - surv_.begin()) - 1;
    }
    const double a = model_.alpha;
    const double lu = std::log(u);
    double guess = std::pow(u * std::exp(log_g2a_), -1.0 / a);
    guess = std::min(guess, 1e18);
    auto j = std::max(last, static_cast<std::int64_t>(guess));
    auto log_surv = [&](std::int64_t x) { return log_gamma_ratio(static_cast<double>(x), 1.0 - a, 1.0) - log_g2a_; };
    while (j > last && log_surv(j) < lu) --j;
    while (log_surv(j + 1) >= lu) ++j;
    return j;
  }

  std::int64_t operator()(Engine& g) const { return invert(uniform_open(g)); }

 private:
  AlphaModel model_;
  std::vector<double> surv_;  // surv_[j] = P(V ≥ j)
  double log_g2a_ = 0.0;
};

class RateTable {
 public:
  RateTable(const AlphaModel& model, std::int64_t max_blocks, std::int64_t dense_cap = 1024)
      : model_(model), max_blocks_(max_blocks), dense_cap_(std::min(dense_cap, max_blocks)), limit_(model) {
    if (max_blocks < 2) throw std::invalid_argument("RateTable: max_blocks must be >= 2");
    log_lambda_m_.assign(static_cast<std::size_t>(max_blocks) + 1, -std::numeric_limits<double>::infinity());
    for (std::int64_t m = 2; m <= max_blocks; ++m) log_lambda_m_[static_cast<std::size_t>(m)] = betacoal::log_total_rate(m, model);
    row_offset_.assign(static_cast<std::size_t>(std::max<std::int64_t>(dense_cap_, 2)) + 2, 0);
    std::size_t off = 0;
    for (std::int64_t m = 2; m <= dense_cap_; ++m) {
      row_offset_[static_cast<std::size_t>(m)] = off;
      off += static_cast<std::size_t>(m - 1);
    }
    row_offset_[static_cast<std::size_t>(dense_cap_) + 1] = off;
    jump_cdf_.resize(off);
    log_lambda_mk_.resize(off);
    for (std::int64_t m = 2; m <= dense_cap_; ++m) {
      auto p = jump_distribution(m, model);
      const std::size_t o = row_offset_[static_cast<std::size_t>(m)];
      double c = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        c += p[i];
        jump_cdf_[o + i] = c;
        log_lambda_mk_[o + i] = betacoal::log_merger_rate(m, static_cast<std::int64_t>(i) + 2, model);
      }
      jump_cdf_[o + p.size() - 1] = 1.0;
    }
  }

  const AlphaModel& model() const { return model_; }
  std::int64_t max_blocks() const { return max_blocks_; }
  std::int64_t dense_cap() const { return dense_cap_; }
  const LimitJumpSampler& limit_sampler() const { return limit_; }

  double log_total_rate(std::int64_t m) const {
    if (m >= 2 && m <= max_blocks_) return log_lambda_m_[static_cast<std::size_t>(m)];
    return betacoal::log_total_rate(m, model_);
  }
  double total_rate(std::int64_t m) const { return std::exp(log_total_rate(m)); }

  double log_merger_rate(std::int64_t m, std::int64_t k) const {
    if (m >= 2 && m <= dense_cap_ && k >= 2 && k <= m)
      return log_lambda_mk_[row_offset_[static_cast<std::size_t>(m)] + static_cast<std::size_t>(k - 2)];
    return betacoal::log_merger_rate(m, k, model_);
  }

  // cumulative P(Δ ≤ d | m), index d−1; only rows m ≤ dense_cap are stored
  std::span<const double> jump_cdf(std::int64_t m) const {
    if (m < 2 || m > dense_cap_) throw std::out_of_range("jump_cdf: row not stored");
    const std::size_t o = row_offset_[static_cast<std::size_t>(m)];
    return {jump_cdf_.data() + o, static_cast<std::size_t>(m - 1)};
  }

  // Exact draw from P(Δ = · | m). Rows up to dense_cap use inversion; above it
  // V from the limit law is accepted with probability b_{m−d−1}/b_{m−2}
  // (envelope constant m/(m−2+α), so acceptance is at least 1 − 2/m).
  std::int64_t sample_jump(std::int64_t m, Engine& g) const {
    if (m == 2) return 1;
    if (m <= dense_cap_) {
      auto cdf = jump_cdf(m);
      const double u = uniform01(g);
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      return std::min<std::int64_t>(static_cast<std::int64_t>(it - cdf.begin()) + 1, m - 1);
    }
    for (;;) {
      const std::int64_t d = limit_(g);
      if (d >= m) continue;
      if (d == 1) return 1;
      if (uniform01(g) < acceptance(m, d)) return d;
    }
  }

  double acceptance(std::int64_t m, std::int64_t d) const {
    const double a = model_.alpha;
    if (d <= 16) {
      double r = 1.0;
      for (std::int64_t j = m - d - 1; j <= m - 3; ++j) r *= (static_cast<double>(j) + 1.0) / (static_cast<double>(j) + a);
      return r;
    }
    return std::exp(log_gamma_ratio(static_cast<double>(m - d - 1), a, 1.0) -
                    log_gamma_ratio(static_cast<double>(m - 2), a, 1.0));
  }

 private:
  AlphaModel model_;
  std::int64_t max_blocks_;
  std::int64_t dense_cap_;
  LimitJumpSampler limit_;
  std::vector<double> log_lambda_m_;
  std::vector<std::size_t> row_offset_;
  std::vector<double> jump_cdf_;
  std::vector<double> log_lambda_mk_;
};

}  // namespace betacoal
