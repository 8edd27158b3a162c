#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace betacoal {

using Engine = std::mt19937_64;

// Independent streams per replicate. Jumps, block choices and holding times
// never share an engine, so two simulators that consume the same jump stream
// see the same jump sequence.
enum class Stream : std::uint64_t {
  jumps = 1,
  choices = 2,
  holds = 3,
  stable = 4,
  aux = 5,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t replicate, Stream stream) {
  std::uint64_t state = seed;
  std::uint64_t a = splitmix64(state);
  state ^= replicate * 0xd1b54a32d192ed03ULL;
  std::uint64_t b = splitmix64(state);
  state ^= static_cast<std::uint64_t>(stream) * 0x8cb92ba72f3d8dd7ULL;
  std::uint64_t c = splitmix64(state);
  std::uint64_t d = splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                    static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32)};
  return Engine(seq);
}

// The std distributions are implementation-defined; these are not, so output
// is reproducible across standard libraries.
inline double uniform01(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// (0, 1]
inline double uniform_open(Engine& g) {
  return static_cast<double>((g() >> 11) + 1) * 0x1.0p-53;
}

inline double exponential(Engine& g) { return -std::log(uniform_open(g)); }

// Lemire's nearly-divisionless bounded draw, unbiased.
inline std::uint64_t uniform_below(Engine& g, std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(g()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(g()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace betacoal
