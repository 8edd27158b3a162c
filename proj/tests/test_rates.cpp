#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <map>
#include <random>

#include "betacoal/rates.hpp"

using namespace betacoal;

namespace {

// λ_{m,k} straight from the Beta(2−α, α) integral.
double merger_rate_quadrature(std::int64_t m, std::int64_t k, double a) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto f = [&](double x, double xc) {
    // xc is the signed distance to the nearer endpoint; 1 − x is exact on the left half
    return std::pow(x, static_cast<double>(k) - 1.0 - a) * std::pow(xc > 0.0 ? xc : 1.0 - x, static_cast<double>(m - k) + a - 1.0);
  };
  const double v = integrator.integrate(f, 0.0, 1.0, 1e-14);
  return v / (std::tgamma(2.0 - a) * std::tgamma(a));
}

// Pearson statistic over cells with expected count >= 5, tail cells pooled.
double chi_square_p_value(const std::vector<double>& probs, const std::map<std::int64_t, std::int64_t>& counts,
                          std::int64_t draws) {
  double stat = 0.0, pooled_p = 0.0, pooled_obs = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto it = counts.find(static_cast<std::int64_t>(i) + 1);
    const double obs = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    const double e = probs[i] * static_cast<double>(draws);
    if (e >= 5.0) {
      stat += (obs - e) * (obs - e) / e;
      ++cells;
    } else {
      pooled_p += probs[i];
      pooled_obs += obs;
    }
  }
  double beyond = 0.0;
  for (const auto& [d, c] : counts)
    if (d > static_cast<std::int64_t>(probs.size())) beyond += static_cast<double>(c);
  pooled_obs += beyond;
  if (pooled_p * static_cast<double>(draws) >= 5.0) {
    const double e = pooled_p * static_cast<double>(draws);
    stat += (pooled_obs - e) * (pooled_obs - e) / e;
    ++cells;
  } else if (pooled_obs > 0.0) {
    return 0.0;
  }
  return boost::math::gamma_q((cells - 1) / 2.0, stat / 2.0);
}

}  // namespace

TEST(MergerRate, MatchesQuadratureOnRandomTriples) {
  std::mt19937_64 g(20240611);
  std::uniform_real_distribution<double> ua(1.05, 1.95);
  for (int i = 0; i < 100; ++i) {
    const double a = ua(g);
    const std::int64_t m = std::uniform_int_distribution<std::int64_t>(2, 50)(g);
    const std::int64_t k = std::uniform_int_distribution<std::int64_t>(2, m)(g);
    const double want = merger_rate_quadrature(m, k, a);
    const double got = merger_rate(m, k, AlphaModel(a));
    EXPECT_NEAR(got / want, 1.0, 1e-8) << "alpha=" << a << " m=" << m << " k=" << k;
  }
}

TEST(MergerRate, SmallCases) {
  for (double a : {1.2, 1.5, 1.8}) {
    const AlphaModel model(a);
    EXPECT_NEAR(merger_rate(2, 2, model), 1.0, 1e-12);
    EXPECT_NEAR(merger_rate(3, 2, model), a / 2.0, 1e-12);
    EXPECT_NEAR(merger_rate(3, 3, model), (2.0 - a) / 2.0, 1e-12);
  }
  const AlphaModel model(1.5);
  EXPECT_NEAR(merger_rate(3, 2, model), 0.75, 1e-12);
  EXPECT_NEAR(merger_rate(3, 3, model), 0.25, 1e-12);
}

TEST(MergerRate, ConsistencyRecursion) {
  // λ_{m,k} = λ_{m+1,k} + λ_{m+1,k+1}
  const AlphaModel model(1.37);
  for (std::int64_t m = 2; m <= 60; ++m)
    for (std::int64_t k = 2; k <= m; ++k)
      EXPECT_NEAR(merger_rate(m + 1, k, model) + merger_rate(m + 1, k + 1, model), merger_rate(m, k, model),
                  1e-11 * merger_rate(m, k, model));
}

TEST(MergerRate, RejectsBadIndices) {
  const AlphaModel model(1.5);
  EXPECT_THROW(merger_rate(5, 1, model), std::domain_error);
  EXPECT_THROW(merger_rate(5, 6, model), std::domain_error);
  EXPECT_THROW(AlphaModel(2.0), std::invalid_argument);
  EXPECT_THROW(AlphaModel(1.0), std::invalid_argument);
}

TEST(TotalRate, ClosedFormMatchesSum) {
  for (double a : {1.1, 1.5, 1.9}) {
    const AlphaModel model(a);
    for (std::int64_t m : {2, 3, 7, 50, 400, 3000}) EXPECT_NEAR(total_rate(m, model) / total_rate_by_sum(m, model), 1.0, 1e-10);
  }
  EXPECT_NEAR(total_rate(3, AlphaModel(1.5)), 2.5, 1e-12);
  EXPECT_NEAR(total_rate(2, AlphaModel(1.5)), 1.0, 1e-12);
}

TEST(TotalRate, PowerLawGrowth) {
  for (double a : {1.2, 1.5, 1.8}) {
    const AlphaModel model(a);
    for (std::int64_t m : {100, 1000, 10000, 1000000}) {
      const double ratio = total_rate(m, model) * a * std::tgamma(a) / std::pow(static_cast<double>(m), a);
      EXPECT_LE(std::abs(ratio - 1.0), 5.0 / static_cast<double>(m)) << "alpha=" << a << " m=" << m;
    }
    EXPECT_NEAR(total_rate(200, model) * a * std::tgamma(a) / std::pow(200.0, a), 1.0, 0.05);
  }
}

TEST(JumpLaw, ThreeBlocks) {
  const auto p = jump_distribution(3, AlphaModel(1.5));
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0], 0.9, 1e-12);
  EXPECT_NEAR(p[1], 0.1, 1e-12);
}

TEST(JumpLaw, MatchesRatesAndSumsToOne) {
  const AlphaModel model(1.3);
  for (std::int64_t m : {4, 17, 120}) {
    const auto p = jump_distribution(m, model);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto k = static_cast<std::int64_t>(i) + 2;
      const double direct = std::exp(log_binomial(m, k) + log_merger_rate(m, k, model) - log_total_rate(m, model));
      EXPECT_NEAR(p[i], direct, 1e-12 + 1e-10 * direct);
      s += p[i];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(JumpLaw, ApproachesLimitLaw) {
  const AlphaModel model(1.5);
  const auto p = jump_distribution(10000, model);
  for (std::int64_t d = 1; d <= 20; ++d)
    EXPECT_NEAR(p[static_cast<std::size_t>(d - 1)] / limit_jump_law(d, model), 1.0, 0.01) << d;
  const double t2 = tv_distance_to_limit(100, model), t3 = tv_distance_to_limit(1000, model),
               t4 = tv_distance_to_limit(10000, model);
  EXPECT_GT(t2, t3);
  EXPECT_GT(t3, t4);
}

TEST(JumpLaw, NearKingmanAtAlphaCloseToTwo) {
  // P(V = 1) = α/2, and the finite-m law is already close to it
  const AlphaModel model(1.95);
  const auto p = jump_distribution(1000, model);
  EXPECT_NEAR(p[0], 0.975, 2e-3);
  EXPECT_GT(p[0], 0.97);
}

TEST(LimitLaw, PointValues) {
  const AlphaModel model(1.5);
  EXPECT_NEAR(limit_jump_law(1, model), 0.75, 1e-12);
  EXPECT_NEAR(limit_jump_law(2, model), 1.5 * 0.5 / 6.0, 1e-12);
  EXPECT_NEAR(limit_jump_survival(2, model), 0.25, 1e-12);
  EXPECT_THROW(limit_jump_law(0, model), std::domain_error);
}

TEST(LimitLaw, NormalizedWithMeanGamma) {
  for (double a : {1.3, 1.5, 1.8}) {
    const AlphaModel model(a);
    const std::int64_t J = 1000000;
    double mass = 0.0, mean = 0.0;
    double surv = 1.0;  // P(V ≥ j) by recurrence
    for (std::int64_t j = 1; j <= J; ++j) {
      const double pj = surv * a / (static_cast<double>(j) + 1.0);
      mass += pj;
      mean += surv;
      surv *= (static_cast<double>(j) + 1.0 - a) / (static_cast<double>(j) + 1.0);
    }
    // tail of Σ_j P(V ≥ j) beyond J, from P(V ≥ j) ~ j^{−α}/Γ(2−α)
    const double tail = std::pow(static_cast<double>(J), 1.0 - a) / ((a - 1.0) * std::tgamma(2.0 - a));
    EXPECT_NEAR(mass, 1.0, 1e-3);
    EXPECT_NEAR(mean + tail, model.gamma, 1e-2) << a;
    EXPECT_NEAR(limit_jump_survival(1000, model), std::exp(std::lgamma(1001.0 - a) - std::lgamma(1001.0)) / std::tgamma(2.0 - a), 1e-12);
  }
}

TEST(CenteringConstant, Values) {
  const AlphaModel model(1.5);
  EXPECT_NEAR(centering_constant(1, model), 0.6647, 5e-5);
  // c_{k+1}/c_k = (k+α−2)/(k+1)
  for (int k = 1; k < 10; ++k)
    EXPECT_NEAR(centering_constant(k + 1, model) / centering_constant(k, model), (k + 1.5 - 2.0) / (k + 1.0), 1e-12);
  EXPECT_THROW(centering_constant(0, model), std::invalid_argument);
}

TEST(LimitSampler, InversionEdges) {
  const AlphaModel model(1.5);
  const LimitJumpSampler small(model, 8);
  EXPECT_EQ(small.invert(1.0), 1);
  EXPECT_EQ(small.invert(0.26), 1);
  EXPECT_EQ(small.invert(0.25), 2);
  // beyond the table the lgamma search takes over, and must agree with the survival
  for (double u : {1e-3, 1e-5, 1e-8, 1e-12}) {
    const auto j = small.invert(u);
    EXPECT_GE(limit_jump_survival(j, model), u * (1 - 1e-9));
    EXPECT_LT(limit_jump_survival(j + 1, model), u * (1 + 1e-9));
    EXPECT_EQ(j, LimitJumpSampler(model).invert(u));
  }
}

TEST(LimitSampler, ChiSquare) {
  const AlphaModel model(1.4);
  const LimitJumpSampler sampler(model);
  Engine g = make_engine(11, 0, Stream::aux);
  std::map<std::int64_t, std::int64_t> counts;
  const std::int64_t draws = 400000;
  for (std::int64_t i = 0; i < draws; ++i) ++counts[sampler(g)];
  std::vector<double> probs;
  for (std::int64_t j = 1; j <= 400; ++j) probs.push_back(limit_jump_law(j, model));
  EXPECT_GT(chi_square_p_value(probs, counts, draws), 1e-4);
}

TEST(RateTable, DenseRowsMatchJumpLaw) {
  const AlphaModel model(1.5);
  const RateTable table(model, 2000, 64);
  for (std::int64_t m : {2, 5, 64}) {
    const auto p = jump_distribution(m, model);
    const auto cdf = table.jump_cdf(m);
    double c = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      c += p[i];
      EXPECT_NEAR(cdf[i], c, 1e-12);
    }
  }
  EXPECT_THROW(table.jump_cdf(65), std::out_of_range);
  EXPECT_NEAR(table.log_merger_rate(40, 7), log_merger_rate(40, 7, model), 1e-12);
  EXPECT_NEAR(table.log_total_rate(1500), log_total_rate(1500, model), 1e-12);
}

TEST(RateTable, AcceptanceRatioMatchesExactLawOverEnvelope) {
  // P(Δ=d|m) = P(V=d) · acceptance(m,d) · m/(m−2+α) for every d < m
  const AlphaModel model(1.6);
  const RateTable table(model, 3000, 2);
  for (std::int64_t m : {3, 10, 300, 3000}) {
    const auto p = jump_distribution(m, model);
    const double env = static_cast<double>(m) / (static_cast<double>(m) - 2.0 + model.alpha);
    for (std::int64_t d : {1, 2, 5, 17, 40, 299, 2999}) {
      if (d >= m) continue;
      const double want = p[static_cast<std::size_t>(d - 1)];
      const double got = limit_jump_law(d, model) * table.acceptance(m, d) * env;
      EXPECT_NEAR(got / want, 1.0, 1e-9) << "m=" << m << " d=" << d;
      EXPECT_LE(table.acceptance(m, d), 1.0);
    }
  }
}

class SamplerChiSquare : public ::testing::TestWithParam<std::tuple<std::int64_t, std::int64_t>> {};

TEST_P(SamplerChiSquare, DrawsFollowJumpLaw) {
  const auto [m, cap] = GetParam();
  const AlphaModel model(1.5);
  const RateTable table(model, m, cap);
  Engine g = make_engine(7, static_cast<std::uint64_t>(m * 31 + cap), Stream::jumps);
  std::map<std::int64_t, std::int64_t> counts;
  const std::int64_t draws = 200000;
  for (std::int64_t i = 0; i < draws; ++i) {
    const auto d = table.sample_jump(m, g);
    ASSERT_GE(d, 1);
    ASSERT_LT(d, m);
    ++counts[d];
  }
  EXPECT_GT(chi_square_p_value(jump_distribution(m, model), counts, draws), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(InversionAndRejection, SamplerChiSquare,
                         ::testing::Values(std::make_tuple(3, 1024), std::make_tuple(50, 1024), std::make_tuple(50, 2),
                                           std::make_tuple(7, 2), std::make_tuple(5000, 1024)));
