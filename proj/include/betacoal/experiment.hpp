#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"
#include "lengths_approx.hpp"
#include "model.hpp"
#include "rates.hpp"
#include "simulator.hpp"
#include "stable.hpp"
#include "stats.hpp"

namespace betacoal {

struct ExperimentConfig {
  double alpha = 1.5;
  std::vector<std::int64_t> n_grid{1000};
  std::int64_t replicates = 200;
  int s = 3;
  std::uint64_t seed_root = 1;
  double delta = 0.8;
  std::int64_t grid_N = 2000;
  std::string output_path = "out";
  LengthMode mode = LengthMode::exponential;
  double hill_k_frac = 0.05;
  std::int64_t reference_draws = 100000;
  unsigned threads = 0;  // 0: all cores

  void validate() const {
    AlphaModel m(alpha);
    if (n_grid.empty()) throw std::invalid_argument("n_grid must not be empty");
    for (auto n : n_grid)
      if (n < 2) throw std::invalid_argument("every n in n_grid must be >= 2");
    if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
    if (s < 1) throw std::invalid_argument("s must be >= 1");
    for (auto n : n_grid)
      if (s > n) throw std::invalid_argument("s must not exceed n");
    if (!(delta > m.one_over_alpha && delta < 1.0)) throw std::invalid_argument("delta must lie in (1/alpha, 1)");
    if (grid_N < 1) throw std::invalid_argument("grid_N must be >= 1");
    if (!(hill_k_frac > 0.0 && hill_k_frac <= 0.1)) throw std::invalid_argument("hill_k_frac must be in (0, 0.1]");
    if (reference_draws < 2) throw std::invalid_argument("reference_draws must be >= 2");
  }
};

inline LengthMode parse_length_mode(const std::string& s) {
  if (s == "exponential") return LengthMode::exponential;
  if (s == "rao_blackwell") return LengthMode::rao_blackwell;
  throw std::invalid_argument("mode must be exponential or rao_blackwell, got " + s);
}

inline const char* length_mode_name(LengthMode m) { return m == LengthMode::exponential ? "exponential" : "rao_blackwell"; }

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  const auto kv = parse_key_values(in, path);
  ExperimentConfig c;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "alpha") c.alpha = std::stod(value);
      else if (key == "n_grid") c.n_grid = parse_int_list(value);
      else if (key == "replicates") c.replicates = std::stoll(value);
      else if (key == "s") c.s = std::stoi(value);
      else if (key == "seed_root") c.seed_root = std::stoull(value);
      else if (key == "delta") c.delta = std::stod(value);
      else if (key == "grid_N") c.grid_N = std::stoll(value);
      else if (key == "output_path") c.output_path = value;
      else if (key == "mode") c.mode = parse_length_mode(value);
      else if (key == "hill_k_frac") c.hill_k_frac = std::stod(value);
      else if (key == "reference_draws") c.reference_draws = std::stoll(value);
      else if (key == "threads") c.threads = static_cast<unsigned>(std::stoul(value));
      else throw std::invalid_argument("unknown key");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ": key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

struct SummaryRow {
  std::int64_t n = 0;
  int r = 0;
  std::int64_t replicates = 0;
  double c_r = 0.0;
  double mean_scaled = 0.0;     // mean of ℓ_r / n^{2−α}
  double mean_scaled_se = 0.0;  // batch-means SE
  double median = 0.0;          // of (c_r n^{2−α} − ℓ_r) / n^{1−α+1/α}
  double iqr = 0.0;
  double hill = std::numeric_limits<double>::quiet_NaN();
  double ks_theorem = std::numeric_limits<double>::quiet_NaN();  // r = 1 only
  double ks_fitted = std::numeric_limits<double>::quiet_NaN();
  std::int64_t upper_tail = 0;  // beyond the 99% quantile of |x − median|
  std::int64_t lower_tail = 0;
  double spearman_r1 = 0.0;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
};

struct Theorem1Result {
  SummaryTable table;
  // centered statistic per n-grid index, then per r−1, then per replicate
  std::vector<std::vector<std::vector<double>>> centered;
  std::vector<std::vector<std::vector<double>>> scaled;  // ℓ_r / n^{2−α}
};

inline std::vector<double> stable_draws(const StableSpec& spec, std::int64_t count, std::uint64_t seed, std::uint64_t replicate) {
  Engine g = make_engine(seed, replicate, Stream::stable);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& x : out) x = sample_stable_unit(spec, g);
  return out;
}

// KS distance after centring both samples at their medians, the reference
// rescaled to the sample's upper-tail constant at the k-th order statistic.
inline double ks_fitted_stable(const std::vector<double>& sample, const AlphaModel& model, double k_frac,
                               std::int64_t draws, std::uint64_t seed) {
  std::vector<double> x = sample;
  const double med = median(x);
  for (auto& v : x) v -= med;
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::ceil(k_frac * static_cast<double>(sorted.size())));
  const double u = sorted[std::min(k, sorted.size() - 1)];
  if (!(u > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  // tail-constant match at the threshold u: C ≈ (k/N) u^α
  const double c_hat = static_cast<double>(k) / static_cast<double>(sorted.size()) * std::pow(u, model.alpha);
  auto ref = stable_draws(StableSpec::with_tail_constant(model, c_hat), draws, seed, 1);
  const double rmed = median(ref);
  for (auto& v : ref) v -= rmed;
  return ks_distance(x, ref);
}

inline Theorem1Result run_theorem1_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const AlphaModel model(cfg.alpha);
  std::int64_t nmax = 0;
  for (auto n : cfg.n_grid) nmax = std::max(nmax, n);
  const RateTable table(model, nmax);
  const unsigned threads = cfg.threads ? cfg.threads : default_threads();
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  const auto s = static_cast<std::size_t>(cfg.s);

  const auto reference = stable_draws(StableSpec::theorem(model), cfg.reference_draws, cfg.seed_root, 0);

  Theorem1Result res;
  for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
    const std::int64_t n = cfg.n_grid[gi];
    std::vector<LengthVector> lengths(reps);
    parallel_for(reps, threads, [&](std::size_t i) {
      LengthAccumulator acc(table, cfg.s);
      // replicate streams are offset per grid point so n-values are independent
      simulate_streaming(table, n, cfg.s, SeedKey{cfg.seed_root, gi * 1000000007ULL + i}, acc);
      lengths[i] = acc.lengths(n, cfg.mode);
    });
    const double nn = static_cast<double>(n);
    std::vector<std::vector<double>> centered(s, std::vector<double>(reps)), scaled(s, std::vector<double>(reps));
    for (std::size_t i = 0; i < reps; ++i)
      for (std::size_t r = 0; r < s; ++r) {
        centered[r][i] = lengths[i].centered(static_cast<int>(r + 1), model);
        scaled[r][i] = lengths[i].ell[r] / std::pow(nn, model.centering_exponent);
      }
    for (std::size_t r = 0; r < s; ++r) {
      SummaryRow row;
      row.n = n;
      row.r = static_cast<int>(r + 1);
      row.replicates = cfg.replicates;
      row.c_r = centering_constant(row.r, model);
      const auto& x = centered[r];
      if (reps >= 40) {
        auto bm = batch_means(scaled[r], 20);
        row.mean_scaled = bm.mean;
        row.mean_scaled_se = bm.se;
      } else {
        row.mean_scaled = mean(scaled[r]);
        row.mean_scaled_se = reps > 1 ? standard_error(scaled[r]) : std::numeric_limits<double>::quiet_NaN();
      }
      row.median = median(x);
      row.iqr = iqr(x);
      if (reps >= 1000) {
        try {
          row.hill = hill_tail_index(x, cfg.hill_k_frac);
        } catch (const std::invalid_argument&) {
        }
        row.ks_fitted = ks_fitted_stable(x, model, cfg.hill_k_frac, cfg.reference_draws, cfg.seed_root + 17 * (gi + 1) + r);
      }
      if (r == 0) row.ks_theorem = ks_distance(x, reference);
      std::vector<double> dev(reps);
      for (std::size_t i = 0; i < reps; ++i) dev[i] = std::abs(x[i] - row.median);
      const double t = quantile(dev, 0.99);
      for (double v : x) {
        if (v - row.median > t) ++row.upper_tail;
        if (row.median - v > t) ++row.lower_tail;
      }
      row.spearman_r1 = reps >= 2 ? spearman(x, centered[0]) : std::numeric_limits<double>::quiet_NaN();
      res.table.rows.push_back(row);
    }
    res.centered.push_back(std::move(centered));
    res.scaled.push_back(std::move(scaled));
  }
  return res;
}

// Median gaps along ℓ_r → ℓ̃_r → ℓ̄_r → final formula, in units of n^{1−α+1/α}.
struct ApproxSuiteRow {
  std::int64_t n = 0;
  int r = 0;
  std::int64_t replicates = 0;
  double med_ell_tilde_gap = 0.0;  // median |ℓ_r − ℓ̃_r|
  double med_tilde_bar_gap = 0.0;  // median |ℓ̃_r − ℓ̄_r|
  double med_bar_final_gap = std::numeric_limits<double>::quiet_NaN();  // median |ℓ̄_r − prediction|, r ≤ 3
  double med_bar_final_rel = std::numeric_limits<double>::quiet_NaN();  // median of that over |ℓ̄_r − deterministic|
};

struct ApproxSample {
  std::vector<double> ell, tilde, bar, L1, L2, F;  // per r; F is NaN for r > 3
  std::vector<double> det;
};

// All chain quantities for one replicate path with spectrum rows 1..s.
inline ApproxSample approx_sample(const RateTable& table, std::int64_t n, int s, SeedKey key, const CutoffConfig& cut,
                                  LengthMode mode) {
  const AlphaModel& model = table.model();
  const auto path = simulate_path(table, n, s, key);
  const auto lengths = order_r_lengths(path, table, mode);
  const double a = model.alpha, nn = static_cast<double>(n);
  ApproxSample out;
  for (int r = 1; r <= s; ++r) {
    out.ell.push_back(lengths.ell[static_cast<std::size_t>(r - 1)]);
    out.tilde.push_back(ell_tilde(path, r));
    out.bar.push_back(ell_bar(path, r));
    double l1 = 0.0, l2 = 0.0;
    for (const auto& comp : compositions(r - 1)) {
      const double w = a * std::tgamma(a) * composition_weight(comp, model);
      const auto sp = split_lengths(path, comp, cut);
      l1 += w * sp.L1;
      l2 += w * sp.L2;
    }
    out.L1.push_back(l1);
    out.L2.push_back(l2);
    if (r <= 3) {
      const auto f = final_formula_prediction(path, r, cut);
      out.F.push_back(f.fluctuation / std::pow(nn, model.fluct_exponent));
      out.det.push_back(f.deterministic);
    } else {
      out.F.push_back(std::numeric_limits<double>::quiet_NaN());
      out.det.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

struct ApproxSuiteResult {
  std::vector<ApproxSuiteRow> rows;
  std::vector<std::vector<ApproxSample>> samples;  // per n-grid index, per replicate
};

inline ApproxSuiteResult run_approx_suite(const ExperimentConfig& cfg) {
  cfg.validate();
  const AlphaModel model(cfg.alpha);
  const CutoffConfig cut(cfg.delta, model);
  std::int64_t nmax = 0;
  for (auto n : cfg.n_grid) nmax = std::max(nmax, n);
  const RateTable table(model, nmax);
  const unsigned threads = cfg.threads ? cfg.threads : default_threads();
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  ApproxSuiteResult res;
  for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
    const std::int64_t n = cfg.n_grid[gi];
    std::vector<ApproxSample> samples(reps);
    parallel_for(reps, threads, [&](std::size_t i) {
      samples[i] = approx_sample(table, n, cfg.s, SeedKey{cfg.seed_root, gi * 1000000007ULL + i}, cut, cfg.mode);
    });
    const double scale = std::pow(static_cast<double>(n), model.fluct_exponent);
    for (int r = 1; r <= cfg.s; ++r) {
      const auto ri = static_cast<std::size_t>(r - 1);
      std::vector<double> g1(reps), g2(reps), g3(reps), g4(reps);
      for (std::size_t i = 0; i < reps; ++i) {
        const auto& x = samples[i];
        g1[i] = std::abs(x.ell[ri] - x.tilde[ri]) / scale;
        g2[i] = std::abs(x.tilde[ri] - x.bar[ri]) / scale;
        if (r <= 3) {
          const double pred = x.det[ri] + x.F[ri] * scale;
          g3[i] = std::abs(x.bar[ri] - pred) / scale;
          g4[i] = std::abs(x.bar[ri] - pred) / std::abs(x.bar[ri] - x.det[ri]);
        }
      }
      ApproxSuiteRow row;
      row.n = n;
      row.r = r;
      row.replicates = cfg.replicates;
      row.med_ell_tilde_gap = median(g1);
      row.med_tilde_bar_gap = median(g2);
      if (r <= 3) {
        row.med_bar_final_gap = median(g3);
        row.med_bar_final_rel = median(g4);
      }
      res.rows.push_back(row);
    }
    res.samples.push_back(std::move(samples));
  }
  return res;
}

inline void write_approx_suite_csv(std::ostream& os, const std::vector<ApproxSuiteRow>& rows) {
  CsvWriter w(os);
  w.row({"n", "r", "replicates", "med_ell_tilde_gap", "med_tilde_bar_gap", "med_bar_final_gap", "med_bar_final_rel"});
  for (const auto& r : rows) {
    w.field(r.n).field(r.r).field(r.replicates).field(r.med_ell_tilde_gap).field(r.med_tilde_bar_gap)
        .field(r.med_bar_final_gap).field(r.med_bar_final_rel);
    w.end_row();
  }
}

// One row per (replicate, r): n, replicate, r, ell, ell_tilde, ell_bar, L1, L2, F.
inline void write_lengths_csv(std::ostream& os, std::int64_t n, const std::vector<ApproxSample>& samples) {
  CsvWriter w(os);
  w.row({"n", "replicate", "r", "ell", "ell_tilde", "ell_bar", "L1", "L2", "F"});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& x = samples[i];
    for (std::size_t r = 0; r < x.ell.size(); ++r) {
      w.field(n).field(static_cast<std::int64_t>(i)).field(static_cast<int>(r + 1)).field(x.ell[r]).field(x.tilde[r])
          .field(x.bar[r]).field(x.L1[r]).field(x.L2[r]).field(x.F[r]);
      w.end_row();
    }
  }
}

inline std::vector<std::string> summary_header() {
  return {"n", "r", "replicates", "c_r", "mean_scaled", "mean_scaled_se", "median", "iqr", "hill",
          "ks_theorem", "ks_fitted", "upper_tail", "lower_tail", "spearman_r1"};
}

inline void write_summary_csv(std::ostream& os, const SummaryTable& t) {
  CsvWriter w(os);
  w.row(summary_header());
  for (const auto& r : t.rows) {
    w.field(r.n).field(r.r).field(r.replicates).field(r.c_r).field(r.mean_scaled).field(r.mean_scaled_se)
        .field(r.median).field(r.iqr).field(r.hill).field(r.ks_theorem).field(r.ks_fitted)
        .field(r.upper_tail).field(r.lower_tail).field(r.spearman_r1);
    w.end_row();
  }
}

}  // namespace betacoal
