#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "rates.hpp"
#include "rng.hpp"

namespace betacoal {

// Totally right-skewed, mean-zero α-stable law. `scale` is σ in the
// Samorodnitsky–Taqqu parametrization S_α(σ, 1, 0), for which
// x^α P(X > x) → σ^α (1−α) / (Γ(2−α) cos(πα/2)).
struct StableSpec {
  AlphaModel model;
  double tail_constant;
  double scale;

  static double unit_tail_constant(const AlphaModel& m) {
    const double a = m.alpha;
    return (1.0 - a) / (std::tgamma(2.0 - a) * std::cos(std::numbers::pi * a / 2.0));
  }

  static StableSpec with_tail_constant(const AlphaModel& m, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("StableSpec: tail constant must be positive");
    return {m, c, std::pow(c / unit_tail_constant(m), 1.0 / m.alpha)};
  }
  // limit law of the theorem's first coordinate
  static StableSpec theorem(const AlphaModel& m) { return with_tail_constant(m, theorem_tail_constant(m)); }
  // unit-time marginal of the limit of Σ (V_i − γ) / n^{1/α}
  static StableSpec walk(const AlphaModel& m) { return with_tail_constant(m, walk_tail_constant(m)); }
};

// Chambers–Mallows–Stuck with β = 1.
inline double sample_stable_unit(const StableSpec& spec, Engine& g) {
  const double a = spec.model.alpha;
  const double t = std::tan(std::numbers::pi * a / 2.0);
  const double b = std::atan(t) / a;
  const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * a));
  const double v = std::numbers::pi * (uniform_open(g) - 0.5);
  const double w = exponential(g);
  const double x = s * std::sin(a * (v + b)) / std::pow(std::cos(v), 1.0 / a) *
                   std::pow(std::cos(v - a * (v + b)) / w, (1.0 - a) / a);
  return spec.scale * x;
}

struct StablePathSample {
  double horizon = 0.0;  // 1/γ
  std::int64_t cells = 0;
  std::vector<double> increments;

  double dt() const { return horizon / static_cast<double>(cells); }
  double time(std::int64_t i) const { return horizon * static_cast<double>(i) / static_cast<double>(cells); }
};

inline StablePathSample sample_stable_path(const StableSpec& spec, std::int64_t cells, Engine& g) {
  if (cells < 1) throw std::invalid_argument("sample_stable_path: need at least one cell");
  StablePathSample p;
  p.horizon = spec.model.gamma > 0 ? 1.0 / spec.model.gamma : 0.0;
  p.cells = cells;
  const double step = std::pow(p.dt(), spec.model.one_over_alpha);
  p.increments.resize(static_cast<std::size_t>(cells));
  for (auto& x : p.increments) x = step * sample_stable_unit(spec, g);
  return p;
}

// Σ (1 − γ t_i)^β ΔS_i with left endpoints t_i.
inline double weighted_integral(const StablePathSample& path, double beta, double gamma) {
  if (beta < 0.0) throw std::invalid_argument("weighted_integral: beta must be >= 0");
  double s = 0.0;
  for (std::int64_t i = 0; i < path.cells; ++i)
    s += std::pow(1.0 - gamma * path.time(i), beta) * path.increments[static_cast<std::size_t>(i)];
  return s;
}

// (∫ (1−γt)^{(α−1)(r−1)} dS_t)_{r=1..s} over one shared path.
inline std::vector<double> limit_vector(const StableSpec& spec, int s, std::int64_t cells, Engine& g) {
  if (s < 1) throw std::invalid_argument("limit_vector: s must be >= 1");
  const auto p = sample_stable_path(spec, cells, g);
  std::vector<double> out(static_cast<std::size_t>(s));
  for (int r = 1; r <= s; ++r)
    out[static_cast<std::size_t>(r - 1)] = weighted_integral(p, (spec.model.alpha - 1.0) * (r - 1), spec.model.gamma);
  return out;
}

// Scale of ∫_0^{1/γ} (1−γt)^β dS_t: σ_β^α = σ^α / (γ(αβ+1)).
inline StableSpec weighted_integral_spec(const StableSpec& unit, double beta) {
  const double a = unit.model.alpha;
  return StableSpec::with_tail_constant(unit.model, unit.tail_constant / (unit.model.gamma * (a * beta + 1.0)));
}

struct FunctionalSums {
  double sumA = 0.0;  // n^{−1/α} (1/n) Σ_i f(i/n) Σ_{j≤i} V_j
  double sumB = 0.0;  // n^{−1/α} Σ_i f(i/n) V_i
};

// i runs over 1..⌊n·horizon⌋.
inline FunctionalSums functional_limit_sums(const std::function<double(double)>& f,
                                            const std::function<double(Engine&)>& v_sampler, std::int64_t n,
                                            double alpha, Engine& g, double horizon = 1.0) {
  if (n < 1) throw std::invalid_argument("functional_limit_sums: n must be >= 1");
  const double nn = static_cast<double>(n);
  const auto top = static_cast<std::int64_t>(std::floor(nn * horizon));
  double partial = 0.0;
  FunctionalSums out;
  for (std::int64_t i = 1; i <= top; ++i) {
    const double v = v_sampler(g);
    partial += v;
    const double fi = f(static_cast<double>(i) / nn);
    out.sumA += fi * partial;
    out.sumB += fi * v;
  }
  const double scale = std::pow(nn, 1.0 / alpha);
  out.sumA /= nn * scale;
  out.sumB /= scale;
  return out;
}

// V − γ with V from the limit jump law.
inline std::function<double(Engine&)> centered_limit_jumps(const LimitJumpSampler& sampler) {
  const double g = sampler.model().gamma;
  return [&sampler, g](Engine& e) { return static_cast<double>(sampler(e)) - g; };
}

}  // namespace betacoal
