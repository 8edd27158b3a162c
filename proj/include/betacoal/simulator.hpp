#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "rates.hpp"
#include "rng.hpp"

namespace betacoal {

struct SeedKey {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
};

// Successes in t draws without replacement from N items of which K are
// successes. Cost O(min(t, K, N−t, N−K)).
inline std::int64_t hypergeometric(std::int64_t N, std::int64_t K, std::int64_t t, Engine& g) {
  if (t <= 0 || K <= 0) return 0;
  if (K >= N) return t;
  if (t >= N) return K;
  if (2 * t > N) return K - hypergeometric(N, K, N - t, g);
  if (2 * K > N) return t - hypergeometric(N, N - K, t, g);
  std::int64_t draws = t, marks = K;
  if (marks < draws) std::swap(draws, marks);
  std::int64_t hits = 0, pool = N;
  for (std::int64_t i = 0; i < draws && hits < marks; ++i, --pool) {
    if (static_cast<std::int64_t>(uniform_below(g, static_cast<std::uint64_t>(pool))) < marks - hits) ++hits;
  }
  return hits;
}

struct SpectrumState {
  std::vector<std::int64_t> small_counts;  // Z_1..Z_s
  std::int64_t big_count = 0;
  std::int64_t block_count = 0;
  std::int64_t leaves_n = 0;

  SpectrumState(std::int64_t n, int s) : small_counts(static_cast<std::size_t>(s), 0), block_count(n), leaves_n(n) {
    if (s >= 1) small_counts[0] = n;
    else big_count = n;
  }
};

struct LevelView {
  std::int64_t level;
  std::int64_t blocks;
  std::span<const std::int64_t> small;  // Z_{1,k}..Z_{s,k}
  std::int64_t big;
};

// Merge t = Δ+1 uniformly chosen blocks, category by category.
inline void merge_blocks(SpectrumState& st, std::int64_t t, Engine& g) {
  const int s = static_cast<int>(st.small_counts.size());
  std::int64_t pool = st.block_count, left = t, mass = 0;
  bool big = false;
  for (int i = 0; i < s && left > 0; ++i) {
    const std::int64_t c = st.small_counts[static_cast<std::size_t>(i)];
    const std::int64_t x = hypergeometric(pool, c, left, g);
    pool -= c;
    left -= x;
    st.small_counts[static_cast<std::size_t>(i)] -= x;
    mass += x * (i + 1);
  }
  if (left > 0) {
    st.big_count -= left;
    big = true;
  }
  if (big || mass > s) ++st.big_count;
  else ++st.small_counts[static_cast<std::size_t>(mass - 1)];
  st.block_count -= t - 1;
}

struct SampledJumps {
  const RateTable* table;
  Engine engine;
  std::int64_t operator()(std::int64_t m) { return table->sample_jump(m, engine); }
};

struct FixedJumps {
  std::span<const std::int64_t> deltas;
  std::size_t next = 0;
  std::int64_t operator()(std::int64_t) { return deltas[next++]; }
};

struct NullObserver {
  void on_level(const LevelView&, double) {}
  void on_jump(std::int64_t, std::int64_t) {}
  void on_finish(const LevelView&) {}
};

// Spectrum-mode core. Observer receives on_level(view_k, W_k) for k < τ,
// on_jump(k, Δ_k) for k = 1..τ and on_finish(view_τ).
template <class Jumps, class Observer>
void run_spectrum(std::int64_t n, int s, Jumps& jumps, Engine& choices, Engine* holds, Observer& obs) {
  SpectrumState st(n, s);
  std::int64_t k = 0;
  auto view = [&] { return LevelView{k, st.block_count, st.small_counts, st.big_count}; };
  while (st.block_count > 1) {
    const double w = holds ? exponential(*holds) : 1.0;
    obs.on_level(view(), w);
    const std::int64_t d = jumps(st.block_count);
    if (d < 1 || d >= st.block_count) throw std::logic_error("jump size out of range");
    merge_blocks(st, d + 1, choices);
    ++k;
    obs.on_jump(k, d);
  }
  obs.on_finish(view());
}

struct CoalescentPath {
  AlphaModel model{1.5};
  std::int64_t n = 0;
  int s = 0;
  std::int64_t tau = 0;
  std::vector<std::int64_t> deltas;    // Δ_1..Δ_τ at index k−1
  std::vector<std::int64_t> blocks;    // X_0..X_τ
  std::vector<std::int64_t> spectrum;  // Z_{r,k} at k*s + r−1; empty unless recorded
  std::vector<double> holds;           // W_0..W_{τ−1}

  bool has_spectrum() const { return !spectrum.empty(); }

  std::int64_t Z(int r, std::int64_t k) const {
    if (r < 1 || r > s) throw std::out_of_range("Z: r outside 1..s");
    return spectrum[static_cast<std::size_t>(k) * static_cast<std::size_t>(s) + static_cast<std::size_t>(r - 1)];
  }

  // T_k = Σ_{i<k} W_i / λ_{X_i}
  std::vector<double> jump_times(const RateTable& table) const {
    std::vector<double> t(static_cast<std::size_t>(tau) + 1, 0.0);
    for (std::int64_t k = 0; k < tau; ++k)
      t[static_cast<std::size_t>(k) + 1] = t[static_cast<std::size_t>(k)] + holds[static_cast<std::size_t>(k)] / table.total_rate(blocks[static_cast<std::size_t>(k)]);
    return t;
  }
};

struct PathRecorder {
  CoalescentPath* path;
  bool record_spectrum = true;

  void push(const LevelView& v) {
    path->blocks.push_back(v.blocks);
    if (record_spectrum) path->spectrum.insert(path->spectrum.end(), v.small.begin(), v.small.end());
  }
  void on_level(const LevelView& v, double w) {
    push(v);
    path->holds.push_back(w);
  }
  void on_jump(std::int64_t, std::int64_t d) { path->deltas.push_back(d); }
  void on_finish(const LevelView& v) {
    push(v);
    path->tau = v.level;
  }
};

// Fans one simulation out to two observers.
template <class A, class B>
struct ObserverPair {
  A& a;
  B& b;
  void on_level(const LevelView& v, double w) { a.on_level(v, w); b.on_level(v, w); }
  void on_jump(std::int64_t k, std::int64_t d) { a.on_jump(k, d); b.on_jump(k, d); }
  void on_finish(const LevelView& v) { a.on_finish(v); b.on_finish(v); }
};

template <class Observer>
void simulate_streaming(const RateTable& table, std::int64_t n, int s, SeedKey key, Observer& obs) {
  if (n < 2) throw std::invalid_argument("simulate: n must be >= 2");
  if (s < 0 || s > n) throw std::invalid_argument("simulate: need 0 <= s <= n");
  SampledJumps jumps{&table, make_engine(key.seed, key.replicate, Stream::jumps)};
  Engine choices = make_engine(key.seed, key.replicate, Stream::choices);
  Engine holds = make_engine(key.seed, key.replicate, Stream::holds);
  run_spectrum(n, s, jumps, choices, &holds, obs);
}

inline CoalescentPath simulate_path(const RateTable& table, std::int64_t n, int s, SeedKey key, bool record_spectrum = true) {
  if (s < 1 && record_spectrum) throw std::invalid_argument("simulate_path: s must be >= 1");
  CoalescentPath path;
  path.model = table.model();
  path.n = n;
  path.s = s;
  PathRecorder rec{&path, record_spectrum};
  simulate_streaming(table, n, s, key, rec);
  return path;
}

// Block counts only; Δ drawn from the same stream as simulate_path.
inline CoalescentPath simulate_block_counts(const RateTable& table, std::int64_t n, SeedKey key) {
  if (n < 2) throw std::invalid_argument("simulate: n must be >= 2");
  CoalescentPath path;
  path.model = table.model();
  path.n = n;
  Engine g = make_engine(key.seed, key.replicate, Stream::jumps);
  Engine holds = make_engine(key.seed, key.replicate, Stream::holds);
  std::int64_t x = n;
  path.blocks.push_back(x);
  while (x > 1) {
    path.holds.push_back(exponential(holds));
    const std::int64_t d = table.sample_jump(x, g);
    x -= d;
    path.deltas.push_back(d);
    path.blocks.push_back(x);
  }
  path.tau = static_cast<std::int64_t>(path.deltas.size());
  return path;
}

// Spectrum rows for a frozen jump sequence; block choices drawn from `choices`.
template <class Observer>
void replay_spectrum(std::int64_t n, int s, std::span<const std::int64_t> deltas, Engine& choices, Observer& obs) {
  FixedJumps jumps{deltas};
  run_spectrum(n, s, jumps, choices, static_cast<Engine*>(nullptr), obs);
}

// ---- exact labeled mode ----

struct LabeledPartition {
  std::vector<std::vector<std::int32_t>> blocks;
};

struct PartitionChain {
  std::vector<LabeledPartition> states;  // Π after k jumps, k = 0..τ
  CoalescentPath path;                   // spectrum recorded with s = n
};

inline PartitionChain simulate_partition(const RateTable& table, std::int64_t n, SeedKey key, std::int64_t cap = 1000) {
  if (n < 2) throw std::invalid_argument("simulate_partition: n must be >= 2");
  if (n > cap) throw std::invalid_argument("simulate_partition: n exceeds the exact-mode cap");
  PartitionChain out;
  CoalescentPath& path = out.path;
  path.model = table.model();
  path.n = n;
  path.s = static_cast<int>(n);
  SampledJumps jumps{&table, make_engine(key.seed, key.replicate, Stream::jumps)};
  Engine choices = make_engine(key.seed, key.replicate, Stream::choices);
  Engine holds = make_engine(key.seed, key.replicate, Stream::holds);

  LabeledPartition cur;
  for (std::int32_t i = 1; i <= n; ++i) cur.blocks.push_back({i});
  auto record = [&] {
    path.blocks.push_back(static_cast<std::int64_t>(cur.blocks.size()));
    std::vector<std::int64_t> row(static_cast<std::size_t>(n), 0);
    for (const auto& b : cur.blocks) ++row[b.size() - 1];
    path.spectrum.insert(path.spectrum.end(), row.begin(), row.end());
    out.states.push_back(cur);
  };
  record();
  std::vector<std::size_t> idx;
  while (cur.blocks.size() > 1) {
    path.holds.push_back(exponential(holds));
    const auto m = static_cast<std::int64_t>(cur.blocks.size());
    const std::int64_t d = jumps(m);
    const auto t = static_cast<std::size_t>(d + 1);
    idx.resize(cur.blocks.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < t; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_below(choices, idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(t));
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::int32_t> merged;
    for (auto c : chosen) merged.insert(merged.end(), cur.blocks[c].begin(), cur.blocks[c].end());
    std::sort(merged.begin(), merged.end());
    for (auto it = chosen.rbegin(); it != chosen.rend(); ++it) cur.blocks.erase(cur.blocks.begin() + static_cast<std::ptrdiff_t>(*it));
    cur.blocks.push_back(std::move(merged));
    path.deltas.push_back(d);
    record();
  }
  path.tau = static_cast<std::int64_t>(path.deltas.size());
  return out;
}

// ---- lengths ----

enum class LengthMode { exponential, rao_blackwell };

struct LengthVector {
  std::int64_t n = 0;
  std::vector<double> ell;  // ℓ_1..ℓ_s at index r−1

  // (c_r n^{2−α} − ℓ_r) / n^{1−α+1/α}
  double centered(int r, const AlphaModel& model) const {
    const double nn = static_cast<double>(n);
    return (centering_constant(r, model) * std::pow(nn, model.centering_exponent) - ell[static_cast<std::size_t>(r - 1)]) /
           std::pow(nn, model.fluct_exponent);
  }
};

// Streams ℓ_r (both modes) and ℓ̃_r without storing spectrum rows.
struct LengthAccumulator {
  const RateTable* table;
  int s;
  std::vector<double> exp_sum, rb_sum, tilde_sum;
  double tilde_factor;

  LengthAccumulator(const RateTable& t, int s_)
      : table(&t), s(s_), exp_sum(static_cast<std::size_t>(s_), 0.0), rb_sum(static_cast<std::size_t>(s_), 0.0),
        tilde_sum(static_cast<std::size_t>(s_), 0.0),
        tilde_factor(t.model().alpha * std::tgamma(t.model().alpha)) {}

  void on_level(const LevelView& v, double w) {
    const double inv_rate = std::exp(-table->log_total_rate(v.blocks));
    const double inv_pow = tilde_factor * std::pow(static_cast<double>(v.blocks), -table->model().alpha);
    for (int r = 0; r < s; ++r) {
      const auto z = static_cast<double>(v.small[static_cast<std::size_t>(r)]);
      if (z == 0.0) continue;
      rb_sum[static_cast<std::size_t>(r)] += z * inv_rate;
      exp_sum[static_cast<std::size_t>(r)] += z * w * inv_rate;
      tilde_sum[static_cast<std::size_t>(r)] += z * inv_pow;
    }
  }
  void on_jump(std::int64_t, std::int64_t) {}
  void on_finish(const LevelView&) {}

  LengthVector lengths(std::int64_t n, LengthMode mode) const {
    return {n, mode == LengthMode::exponential ? exp_sum : rb_sum};
  }
};

inline LengthVector order_r_lengths(const CoalescentPath& path, const RateTable& table, LengthMode mode) {
  if (!path.has_spectrum()) throw std::invalid_argument("order_r_lengths: path has no spectrum rows");
  LengthVector out{path.n, std::vector<double>(static_cast<std::size_t>(path.s), 0.0)};
  for (std::int64_t k = 0; k < path.tau; ++k) {
    const double inv_rate = std::exp(-table.log_total_rate(path.blocks[static_cast<std::size_t>(k)]));
    const double w = mode == LengthMode::exponential ? path.holds[static_cast<std::size_t>(k)] : 1.0;
    for (int r = 1; r <= path.s; ++r) out.ell[static_cast<std::size_t>(r - 1)] += static_cast<double>(path.Z(r, k)) * w * inv_rate;
  }
  return out;
}

// S^{(n)}_{k/n} = n^{−1/α} Σ_{i≤k} (Δ_i − γ), k = 0..τ; constant after τ.
struct RescaledWalk {
  std::int64_t n = 0;
  double gamma = 0.0;
  double scale = 1.0;  // n^{1/α}
  std::vector<double> values;

  double at_level(std::int64_t k) const {
    const auto last = static_cast<std::int64_t>(values.size()) - 1;
    return values[static_cast<std::size_t>(std::clamp<std::int64_t>(k, 0, last))];
  }
  double at(double t) const { return at_level(static_cast<std::int64_t>(std::floor(static_cast<double>(n) * t))); }
};

inline RescaledWalk rescaled_walk(const CoalescentPath& path) {
  RescaledWalk w;
  w.n = path.n;
  w.gamma = path.model.gamma;
  w.scale = std::pow(static_cast<double>(path.n), path.model.one_over_alpha);
  w.values.reserve(path.deltas.size() + 1);
  w.values.push_back(0.0);
  double acc = 0.0;
  for (std::int64_t d : path.deltas) {
    acc += static_cast<double>(d) - w.gamma;
    w.values.push_back(acc / w.scale);
  }
  return w;
}

}  // namespace betacoal
