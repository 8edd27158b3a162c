#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "rates.hpp"
#include "simulator.hpp"

namespace betacoal {

using Composition = std::vector<int>;

// All ordered tuples of positive integers summing to `total`; total = 0 gives
// the single empty composition.
inline std::vector<Composition> compositions(int total) {
  if (total < 0) throw std::invalid_argument("compositions: negative total");
  std::vector<Composition> out;
  Composition cur;
  std::function<void(int)> rec = [&](int left) {
    if (left == 0) {
      out.push_back(cur);
      return;
    }
    for (int f = 1; f <= left; ++f) {
      cur.push_back(f);
      rec(left - f);
      cur.pop_back();
    }
  };
  rec(total);
  return out;
}

inline int composition_order(const Composition& c) {
  int r = 1;
  for (int p : c) {
    if (p < 1) throw std::invalid_argument("composition parts must be >= 1");
    r += p;
  }
  return r;
}

struct CutoffConfig {
  double delta = 0.8;

  CutoffConfig() = default;
  CutoffConfig(double d, const AlphaModel& model) : delta(d) { validate(model); }

  void validate(const AlphaModel& model) const {
    if (!(delta > model.one_over_alpha && delta < 1.0))
      throw std::invalid_argument("cutoff delta must lie in (1/alpha, 1), got " + std::to_string(delta));
  }

  // K_n = ⌊n/γ − n^δ⌋
  std::int64_t level(std::int64_t n, const AlphaModel& model) const {
    const double nn = static_cast<double>(n);
    return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(nn / model.gamma - std::pow(nn, delta))));
  }
};

// Π_j^k(r) = ∏_{i=j+1}^k (1 − r/X_i)
inline double pi_product(const CoalescentPath& path, std::int64_t j, std::int64_t k, int r = 1) {
  if (j < 0 || j > k || k > path.tau) throw std::out_of_range("pi_product: need 0 <= j <= k <= tau");
  double log_p = 0.0;
  for (std::int64_t i = j + 1; i <= k; ++i) {
    const double x = static_cast<double>(path.blocks[static_cast<std::size_t>(i)]);
    if (r >= x) throw std::domain_error("pi_product: factor 1 - r/X_i is not positive");
    log_p += std::log1p(-r / x);
  }
  return std::exp(log_p);
}

// E[Z_{r,k} | X] by enumerating compositions of r−1 and the increasing level
// tuples whose jump sizes match the parts. `budget` bounds the work.
inline double cond_expect_Z(const CoalescentPath& path, int r, std::int64_t k, double budget = 5e7) {
  if (r < 1 || r > 6) throw std::invalid_argument("cond_expect_Z: r must be in 1..6");
  if (k < 0 || k > path.tau) throw std::out_of_range("cond_expect_Z: level outside 0..tau");
  const auto& X = path.blocks;
  auto xd = [&](std::int64_t i) { return static_cast<double>(X[static_cast<std::size_t>(i)]); };
  auto gap = [&](std::int64_t from, std::int64_t to, int R) {  // ∏_{j=from}^{to} (1 − R/X_j)
    double p = 1.0;
    for (std::int64_t j = from; j <= to; ++j) p *= 1.0 - R / xd(j);
    return p;
  };
  if (k == 0) return r == 1 ? static_cast<double>(path.n) : 0.0;

  std::vector<std::vector<std::int64_t>> levels(static_cast<std::size_t>(r));
  for (std::int64_t l = 1; l <= k; ++l) {
    const std::int64_t d = path.deltas[static_cast<std::size_t>(l - 1)];
    if (d < r) levels[static_cast<std::size_t>(d)].push_back(l);
  }
  double work = 0.0;
  double total = 0.0;
  for (const auto& comp : compositions(r - 1)) {
    const auto m = comp.size();
    std::function<void(std::size_t, std::int64_t, int, double)> dfs = [&](std::size_t p, std::int64_t prev, int R, double acc) {
      if (p == m) {
        work += static_cast<double>(k - prev);
        total += xd(k) * acc * gap(prev + 1, k, 1);
        return;
      }
      const int Rn = R - comp[p];
      for (std::int64_t l : levels[static_cast<std::size_t>(comp[p])]) {
        if (l <= prev) continue;
        work += static_cast<double>(l - prev);
        if (work > budget) throw std::runtime_error("cond_expect_Z: enumeration budget exceeded");
        dfs(p + 1, l, Rn, acc * gap(prev + 1, l - 1, R) * Rn / xd(l));
      }
    };
    dfs(0, 0, r, 1.0);
  }
  return total;
}

// E[Z_{r,k} | X] for every k = 0..τ via a recursion over the number R of
// tracked leaves still unmerged: H_R(k) = H_R(k−1)(1 − R/X_k)
// + H_{R+Δ_k}(k−1) R/X_k, H_r(0) = 1, and E[Z_{r,k}|X] = X_k H_1(k).
inline std::vector<double> cond_expect_Z_levels(const CoalescentPath& path, int r) {
  if (r < 1) throw std::invalid_argument("cond_expect_Z_levels: r must be >= 1");
  std::vector<double> H(static_cast<std::size_t>(r) + 1, 0.0), next(H.size());
  H[static_cast<std::size_t>(r)] = 1.0;
  std::vector<double> out(static_cast<std::size_t>(path.tau) + 1);
  out[0] = r == 1 ? static_cast<double>(path.n) : 0.0;
  for (std::int64_t k = 1; k <= path.tau; ++k) {
    const double x = static_cast<double>(path.blocks[static_cast<std::size_t>(k)]);
    const std::int64_t d = path.deltas[static_cast<std::size_t>(k - 1)];
    for (int R = 1; R <= r; ++R) {
      double v = H[static_cast<std::size_t>(R)] * (1.0 - R / x);
      if (R + d <= r) v += H[static_cast<std::size_t>(R + d)] * R / x;
      next[static_cast<std::size_t>(R)] = v;
    }
    std::swap(H, next);
    out[static_cast<std::size_t>(k)] = x * H[1];
  }
  return out;
}

inline double ell_tilde(const CoalescentPath& path, int r) {
  if (!path.has_spectrum() || r < 1 || r > path.s) throw std::invalid_argument("ell_tilde: spectrum row r not recorded");
  const double a = path.model.alpha;
  double s = 0.0;
  for (std::int64_t k = 0; k < path.tau; ++k)
    s += static_cast<double>(path.Z(r, k)) * std::pow(static_cast<double>(path.blocks[static_cast<std::size_t>(k)]), -a);
  return a * std::tgamma(a) * s;
}

inline double ell_bar(const CoalescentPath& path, int r) {
  const double a = path.model.alpha;
  const auto ez = cond_expect_Z_levels(path, r);
  double s = 0.0;
  for (std::int64_t k = 0; k < path.tau; ++k)
    s += ez[static_cast<std::size_t>(k)] * std::pow(static_cast<double>(path.blocks[static_cast<std::size_t>(k)]), -a);
  return a * std::tgamma(a) * s;
}

// Weight (1/m!) ∏_p (r − r_1 − … − r_p) P(V = r_p) of a composition.
inline double composition_weight(const Composition& comp, const AlphaModel& model, bool with_limit_law = true) {
  int R = composition_order(comp);
  double w = 1.0;
  for (std::size_t p = 0; p < comp.size(); ++p) {
    R -= comp[p];
    w *= R / static_cast<double>(p + 1);
    if (with_limit_law) w *= limit_jump_law(comp[p], model);
  }
  return w;
}

// log Π_0^k for k = 0..τ (−∞ at k = τ).
inline std::vector<double> log_pi_prefix(const CoalescentPath& path) {
  std::vector<double> lp(static_cast<std::size_t>(path.tau) + 1, 0.0);
  for (std::int64_t k = 1; k <= path.tau; ++k)
    lp[static_cast<std::size_t>(k)] = lp[static_cast<std::size_t>(k - 1)] + std::log1p(-1.0 / static_cast<double>(path.blocks[static_cast<std::size_t>(k)]));
  return lp;
}

enum class IndicatorMode { indicators, limit_law };
enum class Denominator { shifted, plain };  // 1/(X_{l−1}+r_p) or 1/X_{l−1}

// The symmetrized level sums
// αΓ(α) Σ_comp (1/m!) ∏_p R_p [P(V=r_p)] Σ_{k=1}^{τ−1} X_k^{1−α} Π_0^k
//   ∏_p Σ_{l=1}^{k} (Π_0^l)^{r_p} [1{Δ_l=r_p}] / (X_{l−1} [+ r_p]).
// Exact rewriting of ℓ̄_r only for r ≤ 3; see README.
inline double ell_bar_symmetrized(const CoalescentPath& path, int r, IndicatorMode ind = IndicatorMode::indicators,
                                  Denominator den = Denominator::shifted) {
  if (r < 1) throw std::invalid_argument("ell_bar_symmetrized: r must be >= 1");
  const AlphaModel& model = path.model;
  const double a = model.alpha;
  const auto lp = log_pi_prefix(path);
  double total = 0.0;
  for (const auto& comp : compositions(r - 1)) {
    const auto m = comp.size();
    const double w = composition_weight(comp, model, ind == IndicatorMode::limit_law);
    std::vector<double> q(m, 0.0);
    double s = 0.0;
    for (std::int64_t k = 1; k <= path.tau - 1; ++k) {
      const double xprev = static_cast<double>(path.blocks[static_cast<std::size_t>(k - 1)]);
      const std::int64_t d = path.deltas[static_cast<std::size_t>(k - 1)];
      for (std::size_t p = 0; p < m; ++p) {
        if (ind == IndicatorMode::indicators && d != comp[p]) continue;
        const double denom = den == Denominator::shifted ? xprev + comp[p] : xprev;
        q[p] += std::exp(comp[p] * lp[static_cast<std::size_t>(k)]) / denom;
      }
      double prod = 1.0;
      for (double v : q) prod *= v;
      const double xk = static_cast<double>(path.blocks[static_cast<std::size_t>(k)]);
      s += std::pow(xk, 1.0 - a) * std::exp(lp[static_cast<std::size_t>(k)]) * prod;
    }
    total += w * s;
  }
  return a * std::tgamma(a) * total;
}

struct SplitLengths {
  double L1 = 0.0;
  double L2 = 0.0;
};

// L1 sums k = 1..K_n and L2 sums k = K_n+1..τ−1 of
// X_k^{1−α} Π_0^k ∏_p Σ_{l=0}^{k−1} (Π_0^l)^{r_p} / X_l.
inline SplitLengths split_lengths(const CoalescentPath& path, const Composition& comp, const CutoffConfig& cutoff) {
  const AlphaModel& model = path.model;
  cutoff.validate(model);
  composition_order(comp);
  const double a = model.alpha;
  const std::int64_t K = cutoff.level(path.n, model);
  const auto lp = log_pi_prefix(path);
  const auto m = comp.size();
  std::vector<double> q(m, 0.0);
  SplitLengths out;
  for (std::int64_t k = 1; k <= path.tau - 1; ++k) {
    const double xl = static_cast<double>(path.blocks[static_cast<std::size_t>(k - 1)]);
    for (std::size_t p = 0; p < m; ++p) q[p] += std::exp(comp[p] * lp[static_cast<std::size_t>(k - 1)]) / xl;
    double prod = 1.0;
    for (double v : q) prod *= v;
    const double term = std::pow(static_cast<double>(path.blocks[static_cast<std::size_t>(k)]), 1.0 - a) *
                        std::exp(lp[static_cast<std::size_t>(k)]) * prod;
    (k <= K ? out.L1 : out.L2) += term;
  }
  return out;
}

// ---- deterministic and fluctuation parts ----

enum class FluctuationForm { displayed, corrected };

namespace detail {

inline double exponent_sum(const Composition& comp, unsigned mask, double a) {
  double e = 0.0;
  for (std::size_t p = 0; p < comp.size(); ++p)
    if (mask & (1u << p)) e += comp[p] * (a - 1.0);
  return e;
}

inline double inv_parts(const Composition& comp, int skip = -1) {
  double v = 1.0;
  for (std::size_t p = 0; p < comp.size(); ++p)
    if (static_cast<int>(p) != skip) v /= comp[p];
  return v;
}

inline int popcount(unsigned m) { return __builtin_popcount(m); }

}  // namespace detail

// c_P = (−1)^{|P|} / (Σ_{p∈P} r_p (α−1) + 1) for the parts selected by `mask`
inline double subset_coefficient(const Composition& comp, unsigned mask, const AlphaModel& model) {
  return ((detail::popcount(mask) & 1) ? -1.0 : 1.0) / (detail::exponent_sum(comp, mask, model.alpha) + 1.0);
}

// ∫_0^u ∏_p (1 − x^{r_p(α−1)}) dx
inline double composition_integral(const Composition& comp, const AlphaModel& model, double u = 1.0) {
  const unsigned full = 1u << comp.size();
  double s = 0.0;
  for (unsigned mask = 0; mask < full; ++mask) {
    const double e = detail::exponent_sum(comp, mask, model.alpha) + 1.0;
    s += ((detail::popcount(mask) & 1) ? -1.0 : 1.0) * std::pow(u, e) / e;
  }
  return s;
}

// Coefficient of n^{2−α} contributed by one composition to L1 + L2.
inline double deterministic_part(const Composition& comp, const AlphaModel& model, FluctuationForm form) {
  const double base = detail::inv_parts(comp) / model.gamma;
  return form == FluctuationForm::displayed ? base : base * composition_integral(comp, model);
}

// Riemann and increment sums over levels up to the cutoff:
// A(c) = (1/n) Σ_{l=0}^{K} (1−γl/n)^c S_{l/n},  B(c) = Σ_{j=1}^{K} (1−γj/n)^c (Δ_j−γ)/n^{1/α}.
class WalkSums {
 public:
  WalkSums(const CoalescentPath& path, std::int64_t K) : walk_(rescaled_walk(path)), path_(&path) {
    K_ = std::min<std::int64_t>(K, path.tau - 1);
  }

  double A(double c) const {
    const double n = static_cast<double>(path_->n), g = path_->model.gamma;
    double s = 0.0;
    for (std::int64_t l = 0; l <= K_; ++l) s += std::pow(1.0 - g * l / n, c) * walk_.at_level(l);
    return s / n;
  }
  double B(double c) const {
    const double n = static_cast<double>(path_->n), g = path_->model.gamma;
    double s = 0.0;
    for (std::int64_t j = 1; j <= K_; ++j)
      s += std::pow(1.0 - g * j / n, c) * (static_cast<double>(path_->deltas[static_cast<std::size_t>(j - 1)]) - g);
    return s / walk_.scale;
  }
  double S_end() const {  // S^{(n)}_{1/γ}
    return walk_.at(1.0 / path_->model.gamma);
  }
  std::int64_t level() const { return K_; }

  // last level strictly inside the deterministic horizon n/γ, capped at τ−1
  static std::int64_t horizon_level(const CoalescentPath& path) {
    const double h = static_cast<double>(path.n) / path.model.gamma;
    return std::min<std::int64_t>(static_cast<std::int64_t>(std::ceil(h)) - 1, path.tau - 1);
  }

 private:
  RescaledWalk walk_;
  const CoalescentPath* path_;
  std::int64_t K_;
};

// Fluctuation coefficient of the length sum. `displayed` is the original closed
// form, coefficients inside the subset sums, levels up to K_n.
// `corrected` is the first-order expansion of L1 + L2 around the deterministic
// profile; its sums must run over the whole horizon (see WalkSums::horizon_level)
// since the L2 window still carries first-order terms of relative size
// n^{(δ−1) r_p (α−1)}.
inline double fluctuation_functional(const WalkSums& ws, const Composition& comp, const AlphaModel& model, FluctuationForm form) {
  const double a = model.alpha, g = model.gamma;
  const auto m = comp.size();
  const unsigned full = 1u << m;
  auto sign = [](unsigned mask) { return (detail::popcount(mask) & 1) ? -1.0 : 1.0; };
  double F = 0.0;
  if (form == FluctuationForm::corrected) {
    for (std::size_t j = 0; j < m; ++j) {
      const double ej = comp[j] * (a - 1.0);
      const double pre = detail::inv_parts(comp, static_cast<int>(j));
      for (unsigned mask = 0; mask < full; ++mask) {
        if (mask & (1u << j)) continue;
        const double E = detail::exponent_sum(comp, mask, a);
        F += pre * sign(mask) * (-(ej - 1.0) / (g * (E + 1.0))) * ws.A(E + ej - 1.0);
        F += pre * sign(mask) * (ej / (g * g * (E + 1.0) * (E + ej + 1.0))) * ws.B(E + ej);
      }
    }
    const double pre = (a - 1.0) / g * detail::inv_parts(comp);
    for (unsigned mask = 0; mask < full; ++mask) {
      const double E = detail::exponent_sum(comp, mask, a);
      F += pre * sign(mask) / (E + 1.0) * ws.B(E);
    }
    return F;
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double ej = comp[j] * (a - 1.0);
    double inner = ws.A(ej);
    double incr = ej / (ej + 1.0) * ws.B(ej);
    for (unsigned mask = 1; mask < full; ++mask) {
      if (mask & (1u << j)) continue;
      const double E = detail::exponent_sum(comp, mask, a);
      const double c = subset_coefficient(comp, mask, model);
      const double d = c - sign(mask) / (E + ej + 1.0);
      inner += c * ws.A(E + ej);
      incr += d * ws.B(E + ej);
    }
    F += -(ej - 1.0) / g * inner + comp[j] * incr;
  }
  double last = ws.B(0.0);
  for (unsigned mask = 1; mask < full; ++mask) {
    const double E = detail::exponent_sum(comp, mask, a);
    last += subset_coefficient(comp, mask, model) * ws.B(E);
  }
  return F + detail::inv_parts(comp) / g * last;
}

inline double fluctuation_functional(const CoalescentPath& path, const Composition& comp, const CutoffConfig& cutoff,
                                     FluctuationForm form = FluctuationForm::corrected) {
  cutoff.validate(path.model);
  const WalkSums ws(path, form == FluctuationForm::corrected ? WalkSums::horizon_level(path) : cutoff.level(path.n, path.model));
  return fluctuation_functional(ws, comp, path.model, form);
}

// Fluctuation coefficient of L2, carried by the terminal level τ_n.
inline double endpoint_fluctuation(const WalkSums& ws, const Composition& comp, const AlphaModel& model, FluctuationForm form) {
  const double v = detail::inv_parts(comp) / model.gamma * ws.S_end();
  return form == FluctuationForm::displayed ? v : -v;
}

struct FinalFormula {
  double deterministic = 0.0;  // multiple of n^{2−α} already applied
  double fluctuation = 0.0;    // multiple of n^{1−α+1/α} already applied
  double total() const { return deterministic + fluctuation; }
};

// Two-scale prediction of ℓ̄_r from one path. The corrected form is limited
// to r ≤ 3, where the symmetrized composition weights are exact.
inline FinalFormula final_formula_prediction(const CoalescentPath& path, int r, const CutoffConfig& cutoff,
                                             FluctuationForm form = FluctuationForm::corrected) {
  const AlphaModel& model = path.model;
  cutoff.validate(model);
  if (r < 1) throw std::invalid_argument("final_formula_prediction: r must be >= 1");
  if (form == FluctuationForm::corrected && r > 3)
    throw std::invalid_argument("final_formula_prediction: corrected form supports r <= 3");
  const double a = model.alpha, n = static_cast<double>(path.n);
  const WalkSums ws(path, form == FluctuationForm::corrected ? WalkSums::horizon_level(path) : cutoff.level(path.n, model));
  FinalFormula out;
  for (const auto& comp : compositions(r - 1)) {
    const double w = a * std::tgamma(a) * composition_weight(comp, model);
    out.deterministic += w * deterministic_part(comp, model, form) * std::pow(n, model.centering_exponent);
    out.fluctuation += w * (fluctuation_functional(ws, comp, model, form) + endpoint_fluctuation(ws, comp, model, form)) *
                       std::pow(n, model.fluct_exponent);
  }
  return out;
}

}  // namespace betacoal
