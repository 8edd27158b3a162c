#include <gtest/gtest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "betacoal/experiment.hpp"
#include "betacoal/io.hpp"
#include "betacoal/stable.hpp"
#include "betacoal/stats.hpp"

using namespace betacoal;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(Hill, ParetoIndex) {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(1000000);
  for (auto& v : x) v = std::pow(1.0 - u(g), -1.0 / 1.5);
  EXPECT_NEAR(hill_tail_index(x, 0.01), 1.5, 0.05);
}

TEST(Hill, LightTailGivesLargeIndex) {
  std::mt19937_64 g(2);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x(1000000);
  for (auto& v : x) v = e(g);
  // Hill on an exponential tail grows like the log of the threshold
  EXPECT_GT(hill_tail_index(x, 0.001), 5.0);
}

TEST(Hill, Validation) {
  std::vector<double> x(999, 1.0);
  EXPECT_THROW(hill_tail_index(x, 0.05), std::invalid_argument);
  x.resize(2000, -1.0);
  EXPECT_THROW(hill_tail_index(x, 0.2), std::invalid_argument);
  EXPECT_THROW(hill_tail_index(std::vector<double>(2000, -1.0), 0.05), std::invalid_argument);
}

TEST(KS, Extremes) {
  const std::vector<double> a{1, 2, 3, 4}, b{10, 11, 12};
  EXPECT_EQ(ks_distance(a, a), 0.0);
  EXPECT_EQ(ks_distance(a, b), 1.0);
  EXPECT_NEAR(ks_distance({1, 2}, {2, 3}), 0.5, 1e-15);
  EXPECT_THROW(ks_distance({}, a), std::invalid_argument);
}

TEST(KS, SameStableLawIsClose) {
  const auto spec = StableSpec::theorem(AlphaModel(1.5));
  Engine g = make_engine(12, 0, Stream::stable), h = make_engine(12, 1, Stream::stable);
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = sample_stable_unit(spec, g);
  for (auto& v : b) v = sample_stable_unit(spec, h);
  EXPECT_LT(ks_distance(a, b), 0.03);
}

TEST(Summaries, QuantilesAndMoments) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(median(v), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(iqr(v), 1.5);
  EXPECT_DOUBLE_EQ(mean(v), 2.5);
  EXPECT_NEAR(standard_error(v), std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  std::vector<double> w(100);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i % 10);
  const auto bm = batch_means(w, 10);
  EXPECT_DOUBLE_EQ(bm.mean, 4.5);
  EXPECT_NEAR(bm.se, 0.0, 1e-15);
  EXPECT_THROW(batch_means(std::vector<double>(10, 1.0), 20), std::invalid_argument);
}

TEST(Summaries, RanksAndSpearman) {
  EXPECT_EQ(ranks({3, 1, 3, 2}), (std::vector<double>{3.5, 1, 3.5, 2}));
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {10, 20, 30, 45}), 1.0, 1e-15);
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-15);
}

TEST(Summaries, TailConstants) {
  const std::vector<double> v{-5, -1, 0, 1, 2, 8};
  EXPECT_NEAR(empirical_tail_constant(v, 1.5, 1.0), 1.5 * 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(empirical_left_tail_constant(v, 1.5, 1.0), 1.5 / 6.0, 1e-15);
}

TEST(Parallel, CoversEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(100, 3, [](std::size_t i) {
                 if (i == 57) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Csv, QuotingAndNumbers) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
  EXPECT_EQ(format_double(std::nan("")), "");
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  std::ostringstream os;
  CsvWriter w(os);
  w.field(std::int64_t{3}).field(0.5).field(std::string_view("x,y"));
  w.end_row();
  w.row({"a", "b"});
  EXPECT_EQ(os.str(), "3,0.5,\"x,y\"\r\na,b\r\n");
}

TEST(Config, ParsesKeyValues) {
  const auto p = temp_file("betacoal_cfg_ok.txt",
                           "# theorem run\nalpha = 1.4\nn_grid = 1000, 1e4\nreplicates=50\ns = 2\nseed_root = 9\n"
                           "delta = 0.8\nmode = rao_blackwell\nthreads = 1\n");
  const auto c = load_experiment_config(p.string());
  EXPECT_DOUBLE_EQ(c.alpha, 1.4);
  EXPECT_EQ(c.n_grid, (std::vector<std::int64_t>{1000, 10000}));
  EXPECT_EQ(c.replicates, 50);
  EXPECT_EQ(c.s, 2);
  EXPECT_EQ(c.seed_root, 9u);
  EXPECT_EQ(c.mode, LengthMode::rao_blackwell);
  std::filesystem::remove(p);
}

TEST(Config, RejectsBadInput) {
  const auto unknown = temp_file("betacoal_cfg_unknown.txt", "alpha = 1.5\ncolour = red\n");
  EXPECT_THROW(load_experiment_config(unknown.string()), std::invalid_argument);
  const auto delta = temp_file("betacoal_cfg_delta.txt", "alpha = 1.5\ndelta = 0.5\n");
  EXPECT_THROW(load_experiment_config(delta.string()), std::invalid_argument);
  const auto alpha = temp_file("betacoal_cfg_alpha.txt", "alpha = 2.5\n");
  EXPECT_THROW(load_experiment_config(alpha.string()), std::invalid_argument);
  const auto syntax = temp_file("betacoal_cfg_syntax.txt", "alpha 1.5\n");
  EXPECT_THROW(load_experiment_config(syntax.string()), std::invalid_argument);
  EXPECT_THROW(load_experiment_config("/nonexistent/betacoal.cfg"), std::runtime_error);
  EXPECT_THROW(parse_int_list("10,2.5"), std::invalid_argument);
  for (const auto& p : {unknown, delta, alpha, syntax}) std::filesystem::remove(p);
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
  ExperimentConfig c;
  c.n_grid = {500, 2000};
  c.replicates = 60;
  c.s = 3;
  c.seed_root = 5;
  c.reference_draws = 2000;
  c.threads = 1;
  const auto a = run_theorem1_experiment(c);
  c.threads = 3;
  const auto b = run_theorem1_experiment(c);
  EXPECT_EQ(a.centered, b.centered);
  std::ostringstream oa, ob;
  write_summary_csv(oa, a.table);
  write_summary_csv(ob, b.table);
  EXPECT_EQ(oa.str(), ob.str());
  ASSERT_EQ(a.table.rows.size(), 6u);
  EXPECT_EQ(a.table.rows[0].r, 1);
  EXPECT_EQ(a.table.rows[5].n, 2000);
  EXPECT_DOUBLE_EQ(a.table.rows[0].spearman_r1, 1.0);
}

// Finite-n bias of ℓ_1 / n^{2−α} is about 1.2 c_1 n^{1−α}, larger than 3 batch SEs here.
TEST(Experiment, FirstOrderMeanWithinThreeBatchSE) {
  ExperimentConfig c;
  c.n_grid = {100000};
  c.replicates = 2000;
  c.s = 1;
  c.seed_root = 7;
  c.mode = LengthMode::rao_blackwell;
  c.reference_draws = 2000;
  const auto row = run_theorem1_experiment(c).table.rows.front();
  EXPECT_NEAR(row.mean_scaled, row.c_r, 3.0 * row.mean_scaled_se);
}
