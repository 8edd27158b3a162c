// betacoal: rates, simulation, length approximations and stable limits for
// Beta(2−α, α) coalescents.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "betacoal/experiment.hpp"
#include "betacoal/io.hpp"
#include "betacoal/lengths_approx.hpp"
#include "betacoal/rates.hpp"
#include "betacoal/simulator.hpp"
#include "betacoal/stable.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace betacoal;

namespace {

// Precondition failures that should exit with status 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const CLI::Validator kAlpha = CLI::Validator(
    [](std::string& s) -> std::string {
      try {
        const double a = std::stod(s);
        if (a > 1.0 && a < 2.0) return "";
      } catch (const std::exception&) {
      }
      return "alpha must lie strictly between 1 and 2";
    },
    "(1,2)", "alpha");

struct Common {
  double alpha = 1.5;
  std::uint64_t seed = 1;
  std::string out;
  bool force = false;
  unsigned threads = 0;
};

void add_alpha(CLI::App* c, Common& o) {
  c->add_option("--alpha", o.alpha, "stability index α, 1 < α < 2")->default_val(1.5)->check(kAlpha);
}
void add_seed(CLI::App* c, Common& o) {
  c->add_option("--seed", o.seed, "root seed; every random stream derives from it")->default_val(1);
}
void add_output(CLI::App* c, Common& o) {
  c->add_option("--out", o.out, "output directory (created if missing); stdout when omitted");
  c->add_flag("--force", o.force, "overwrite existing output files");
}
void add_threads(CLI::App* c, Common& o) {
  c->add_option("--threads", o.threads, "worker threads, 0 = all cores")->default_val(0);
}

// Numbers stay numbers in JSON; anything else is kept verbatim.
json scalar(const std::string& s) {
  if (s.empty()) return nullptr;
  std::int64_t i = 0;
  const char* end = s.data() + s.size();
  if (auto [p, ec] = std::from_chars(s.data(), end, i); ec == std::errc() && p == end) return i;
  double d = 0.0;
  if (auto [p, ec] = std::from_chars(s.data(), end, d); ec == std::errc() && p == end) return d;
  return s;
}

// Every option of the subcommand with its effective value.
json provenance(const CLI::App* app) {
  json p = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->get_expected_max() == 0) {
      p[name] = opt->count() > 0;
      continue;
    }
    const auto res = opt->results();
    if (res.empty()) p[name] = scalar(opt->get_default_str());
    else if (res.size() == 1) p[name] = scalar(res.front());
    else {
      json a = json::array();
      for (const auto& r : res) a.push_back(scalar(r));
      p[name] = a;
    }
  }
  return p;
}

fs::path output_file(const Common& o, const std::string& name) {
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  const fs::path p = dir / name;
  if (fs::exists(p) && !o.force) throw ValidationError(p.string() + " exists; pass --force to overwrite");
  return p;
}

// Checks every target before anything is written, so a refused run leaves no partial output.
void claim_outputs(const Common& o, const std::vector<std::string>& names) {
  for (const auto& n : names) output_file(o, n);
}

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << body;
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

void emit(const Common& o, const std::string& csv_name, const std::string& csv, const json& summary) {
  if (o.out.empty()) {
    std::cout << csv;
    return;
  }
  claim_outputs(o, {csv_name, "summary.json"});
  write_text(output_file(o, csv_name), csv);
  write_text(output_file(o, "summary.json"), summary.dump(2) + "\n");
}

json header(const std::string& command, const CLI::App* app) {
  json j;
  j["command"] = command;
  j["schema_version"] = 1;
  j["provenance"] = provenance(app);
  return j;
}

std::vector<std::int64_t> grid_from(const std::string& s, const char* flag) {
  try {
    auto g = parse_int_list(s);
    if (g.empty()) throw std::invalid_argument("empty list");
    return g;
  } catch (const std::exception& e) {
    throw ValidationError(std::string(flag) + ": " + e.what());
  }
}

// ---- subcommands ----

int run_rates(const Common& o, std::int64_t m, const std::string& format, const CLI::App* app) {
  if (m < 2) throw ValidationError("--m must be >= 2");
  if (format != "text" && format != "csv") throw ValidationError("--format must be text or csv");
  const AlphaModel model(o.alpha);
  std::ostringstream csv;
  CsvWriter w(csv);
  w.row({"m", "k", "lambda_mk"});
  json rows = json::array();
  for (std::int64_t k = 2; k <= m; ++k) {
    const double l = merger_rate(m, k, model);
    w.field(m).field(k).field(l);
    w.end_row();
    rows.push_back({{"k", k}, {"lambda_mk", l}});
  }
  const double total = total_rate(m, model);
  if (!o.out.empty()) {
    json j = header("rates", app);
    j["results"] = {{"m", m}, {"lambda_m", total}, {"rates", rows}};
    emit(o, "rates.csv", csv.str(), j);
  }
  if (format == "csv") {
    if (o.out.empty()) std::cout << csv.str();
    return 0;
  }
  const auto p = jump_distribution(m, model);
  for (std::int64_t k = 2; k <= m; ++k)
    std::cout << "lambda_{" << m << "," << k << "} = " << format_double(merger_rate(m, k, model)) << "\n";
  std::cout << "lambda_" << m << " = " << format_double(total) << "\n";
  for (std::int64_t d = 1; d < m && d <= 20; ++d)
    std::cout << "P(Delta=" << d << ") = " << format_double(p[static_cast<std::size_t>(d - 1)]) << "\n";
  return 0;
}

int run_simulate(const Common& o, std::int64_t n, int s, std::uint64_t replicate, const CLI::App* app) {
  if (n < 2) throw ValidationError("--n must be >= 2");
  if (s < 1 || s > n) throw ValidationError("--s must lie in 1..n");
  const AlphaModel model(o.alpha);
  const RateTable table(model, n);
  const auto path = simulate_path(table, n, s, {o.seed, replicate});
  std::ostringstream csv;
  CsvWriter w(csv);
  std::vector<std::string> head{"k", "X_k", "Delta_k"};
  for (int r = 1; r <= s; ++r) head.push_back("Z_" + std::to_string(r));
  head.push_back("W_k");
  w.row(head);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::int64_t k = 0; k <= path.tau; ++k) {
    w.field(k).field(path.blocks[static_cast<std::size_t>(k)]);
    if (k == 0) w.field(std::string_view());
    else w.field(path.deltas[static_cast<std::size_t>(k - 1)]);
    for (int r = 1; r <= s; ++r) w.field(path.Z(r, k));
    w.field(k < path.tau ? path.holds[static_cast<std::size_t>(k)] : nan);
    w.end_row();
  }
  json j = header("simulate", app);
  const auto lengths = order_r_lengths(path, table, LengthMode::exponential);
  j["results"] = {{"tau", path.tau}, {"ell", lengths.ell}};
  emit(o, "path.csv", csv.str(), j);
  if (!o.out.empty()) std::cout << "tau_n = " << path.tau << "\n";
  return 0;
}

ExperimentConfig base_config(const Common& o, std::int64_t reps, int s, double delta, const std::string& mode) {
  ExperimentConfig c;
  c.alpha = o.alpha;
  c.replicates = reps;
  c.s = s;
  c.seed_root = o.seed;
  c.delta = delta;
  c.threads = o.threads;
  try {
    c.mode = parse_length_mode(mode);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  return c;
}

void validate_config(const ExperimentConfig& c) {
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

int run_lengths(const Common& o, std::int64_t n, std::int64_t reps, int s, double delta, const std::string& mode,
                const CLI::App* app) {
  ExperimentConfig c = base_config(o, reps, s, delta, mode);
  c.n_grid = {n};
  validate_config(c);
  if (!o.out.empty()) claim_outputs(o, {"lengths.csv", "summary.json"});
  const auto res = run_approx_suite(c);
  std::ostringstream csv;
  write_lengths_csv(csv, n, res.samples[0]);
  json j = header("lengths", app);
  json rows = json::array();
  for (const auto& r : res.rows)
    rows.push_back({{"r", r.r}, {"med_ell_tilde_gap", r.med_ell_tilde_gap}, {"med_tilde_bar_gap", r.med_tilde_bar_gap}});
  j["results"] = rows;
  emit(o, "lengths.csv", csv.str(), j);
  return 0;
}

json approx_rows_json(const std::vector<ApproxSuiteRow>& rows) {
  json out = json::array();
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  for (const auto& r : rows)
    out.push_back({{"n", r.n},
                   {"r", r.r},
                   {"replicates", r.replicates},
                   {"med_ell_tilde_gap", num(r.med_ell_tilde_gap)},
                   {"med_tilde_bar_gap", num(r.med_tilde_bar_gap)},
                   {"med_bar_final_gap", num(r.med_bar_final_gap)},
                   {"med_bar_final_rel", num(r.med_bar_final_rel)}});
  return out;
}

int run_approx_suite_cmd(const Common& o, const std::string& grid, std::int64_t reps, int s, double delta,
                         const std::string& mode, const CLI::App* app) {
  ExperimentConfig c = base_config(o, reps, s, delta, mode);
  c.n_grid = grid_from(grid, "--n");
  validate_config(c);
  if (!o.out.empty()) claim_outputs(o, {"approx_suite.csv", "summary.json"});
  const auto res = run_approx_suite(c);
  std::ostringstream csv;
  write_approx_suite_csv(csv, res.rows);
  json j = header("approx-suite", app);
  j["results"] = approx_rows_json(res.rows);
  emit(o, "approx_suite.csv", csv.str(), j);
  return 0;
}

int run_stable_sample(const Common& o, int s, std::int64_t reps, std::int64_t cells, const std::string& kind,
                      const CLI::App* app) {
  if (s < 1) throw ValidationError("--s must be >= 1");
  if (reps < 1) throw ValidationError("--reps must be >= 1");
  if (cells < 1) throw ValidationError("--cells must be >= 1");
  const AlphaModel model(o.alpha);
  StableSpec spec = kind == "theorem" ? StableSpec::theorem(model)
                    : kind == "walk"  ? StableSpec::walk(model)
                                      : throw ValidationError("--kind must be theorem or walk");
  std::ostringstream csv;
  CsvWriter w(csv);
  std::vector<std::string> head{"replicate"};
  for (int r = 1; r <= s; ++r) head.push_back("coord_" + std::to_string(r));
  w.row(head);
  Engine g = make_engine(o.seed, 0, Stream::stable);
  for (std::int64_t i = 0; i < reps; ++i) {
    const auto v = limit_vector(spec, s, cells, g);
    w.field(i);
    for (double x : v) w.field(x);
    w.end_row();
  }
  json j = header("stable-sample", app);
  j["results"] = {{"tail_constant", spec.tail_constant}, {"scale", spec.scale}, {"horizon", 1.0 / model.gamma}};
  emit(o, "stable_samples.csv", csv.str(), j);
  return 0;
}

int run_theorem1(const Common& o, ExperimentConfig c, const CLI::App* app) {
  validate_config(c);
  if (o.out.empty()) throw ValidationError("theorem1 needs --out");
  claim_outputs(o, {"theorem1_summary.csv", "theorem1_samples.csv", "summary.json"});
  const auto res = run_theorem1_experiment(c);
  std::ostringstream summary;
  write_summary_csv(summary, res.table);
  std::ostringstream samples;
  CsvWriter w(samples);
  std::vector<std::string> head{"n", "replicate"};
  for (int r = 1; r <= c.s; ++r) head.push_back("stat_" + std::to_string(r));
  w.row(head);
  for (std::size_t gi = 0; gi < c.n_grid.size(); ++gi)
    for (std::int64_t i = 0; i < c.replicates; ++i) {
      w.field(c.n_grid[gi]).field(i);
      for (int r = 0; r < c.s; ++r) w.field(res.centered[gi][static_cast<std::size_t>(r)][static_cast<std::size_t>(i)]);
      w.end_row();
    }
  json j = header("theorem1", app);
  const AlphaModel model(c.alpha);
  json rows = json::array();
  const auto names = summary_header();
  for (const auto& r : res.table.rows) {
    std::ostringstream one;
    SummaryTable t{{r}};
    write_summary_csv(one, t);
    // reuse the CSV formatting so JSON and CSV agree digit for digit
    std::string line = one.str().substr(one.str().find("\r\n") + 2);
    line = line.substr(0, line.find("\r\n"));
    json row = json::object();
    std::size_t pos = 0;
    for (const auto& name : names) {
      const auto next = line.find(',', pos);
      const std::string cell = line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      row[name] = scalar(cell);
      pos = next == std::string::npos ? line.size() : next + 1;
    }
    rows.push_back(row);
  }
  j["config"] = {{"alpha", c.alpha},     {"n_grid", c.n_grid},           {"replicates", c.replicates},
                 {"s", c.s},             {"seed_root", c.seed_root},     {"delta", c.delta},
                 {"grid_N", c.grid_N},   {"mode", length_mode_name(c.mode)}, {"hill_k_frac", c.hill_k_frac},
                 {"reference_draws", c.reference_draws}};
  j["results"] = {{"theorem_tail_constant", theorem_tail_constant(model)}, {"rows", rows}};
  write_text(output_file(o, "theorem1_summary.csv"), summary.str());
  write_text(output_file(o, "theorem1_samples.csv"), samples.str());
  write_text(output_file(o, "summary.json"), j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and numerical checks for Beta(2-alpha, alpha) coalescents"};
  app.require_subcommand(1);
  Common o;

  auto* rates = app.add_subcommand("rates", "merger rates lambda_{m,k}, total rate and jump law for one m");
  std::int64_t rates_m = 3;
  std::string rates_format = "text";
  add_alpha(rates, o);
  rates->add_option("--m", rates_m, "number of blocks m >= 2")->default_val(3);
  rates->add_option("--format", rates_format, "stdout format: text or csv")->default_val("text");
  add_output(rates, o);

  auto* sim = app.add_subcommand("simulate", "one path dump: k, X_k, Delta_k, Z_1..Z_s, W_k");
  std::int64_t sim_n = 10;
  int sim_s = 3;
  std::uint64_t sim_rep = 0;
  add_alpha(sim, o);
  sim->add_option("--n", sim_n, "sample size n >= 2")->default_val(10);
  sim->add_option("--s", sim_s, "spectrum rows Z_1..Z_s recorded")->default_val(3);
  sim->add_option("--replicate", sim_rep, "replicate index within the seed")->default_val(0);
  add_seed(sim, o);
  add_output(sim, o);

  auto* len = app.add_subcommand("lengths", "per-replicate ell, ell_tilde, ell_bar, L1, L2, F rows at one n");
  std::int64_t len_n = 1000, len_reps = 50;
  int len_s = 3;
  double len_delta = 0.8;
  std::string len_mode = "exponential";
  add_alpha(len, o);
  len->add_option("--n", len_n, "sample size")->default_val(1000);
  len->add_option("--reps", len_reps, "replicates")->default_val(50);
  len->add_option("--s", len_s, "largest order r")->default_val(3);
  len->add_option("--delta", len_delta, "cutoff exponent, 1/alpha < delta < 1")->default_val(0.8);
  len->add_option("--mode", len_mode, "ell from exponential holding times or rao_blackwell means")->default_val("exponential");
  add_seed(len, o);
  add_output(len, o);
  add_threads(len, o);

  auto* suite = app.add_subcommand("approx-suite", "median gaps of the length approximations over an n grid");
  std::string suite_grid = "1000,3000,10000";
  std::int64_t suite_reps = 50;
  int suite_s = 3;
  double suite_delta = 0.8;
  std::string suite_mode = "exponential";
  add_alpha(suite, o);
  suite->add_option("--n", suite_grid, "comma separated n grid")->default_val("1000,3000,10000");
  suite->add_option("--reps", suite_reps, "replicates per n")->default_val(50);
  suite->add_option("--s", suite_s, "largest order r")->default_val(3);
  suite->add_option("--delta", suite_delta, "cutoff exponent, 1/alpha < delta < 1")->default_val(0.8);
  suite->add_option("--mode", suite_mode, "exponential or rao_blackwell")->default_val("exponential");
  add_seed(suite, o);
  add_output(suite, o);
  add_threads(suite, o);

  auto* stab = app.add_subcommand("stable-sample", "draws of the weighted stable integrals, one row per replicate");
  int stab_s = 3;
  std::int64_t stab_reps = 1000, stab_cells = 2000;
  std::string stab_kind = "theorem";
  add_alpha(stab, o);
  stab->add_option("--s", stab_s, "coordinates r = 1..s")->default_val(3);
  stab->add_option("--reps", stab_reps, "replicates")->default_val(1000);
  stab->add_option("--cells", stab_cells, "grid cells on [0, 1/gamma]")->default_val(2000);
  stab->add_option("--kind", stab_kind, "normalization: theorem or walk")->default_val("theorem");
  add_seed(stab, o);
  add_output(stab, o);

  auto* thm = app.add_subcommand("theorem1", "centred length statistics, summary CSV and JSON");
  std::string thm_grid = "100000", thm_mode = "rao_blackwell", thm_config;
  std::int64_t thm_reps = 2000, thm_ref = 100000;
  int thm_s = 3;
  double thm_delta = 0.8, thm_hill = 0.05;
  add_alpha(thm, o);
  thm->add_option("--n", thm_grid, "comma separated n grid")->default_val("100000");
  thm->add_option("--reps", thm_reps, "replicates per n")->default_val(2000);
  thm->add_option("--s", thm_s, "orders r = 1..s")->default_val(3);
  thm->add_option("--delta", thm_delta, "cutoff exponent, 1/alpha < delta < 1")->default_val(0.8);
  thm->add_option("--mode", thm_mode, "exponential or rao_blackwell")->default_val("rao_blackwell");
  thm->add_option("--hill-k-frac", thm_hill, "fraction of order statistics used by the Hill estimator")->default_val(0.05);
  thm->add_option("--reference-draws", thm_ref, "stable reference sample size for KS")->default_val(100000);
  thm->add_option("--config", thm_config, "key = value config file; its keys override the flags");
  add_seed(thm, o);
  add_output(thm, o);
  add_threads(thm, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*rates) return run_rates(o, rates_m, rates_format, rates);
    if (*sim) return run_simulate(o, sim_n, sim_s, sim_rep, sim);
    if (*len) return run_lengths(o, len_n, len_reps, len_s, len_delta, len_mode, len);
    if (*suite) return run_approx_suite_cmd(o, suite_grid, suite_reps, suite_s, suite_delta, suite_mode, suite);
    if (*stab) return run_stable_sample(o, stab_s, stab_reps, stab_cells, stab_kind, stab);
    if (*thm) {
      ExperimentConfig c = base_config(o, thm_reps, thm_s, thm_delta, thm_mode);
      c.n_grid = grid_from(thm_grid, "--n");
      c.hill_k_frac = thm_hill;
      c.reference_draws = thm_ref;
      if (!thm_config.empty()) {
        try {
          c = load_experiment_config(thm_config);
        } catch (const std::invalid_argument& e) {
          throw ValidationError(e.what());
        }
        if (!c.output_path.empty() && o.out.empty()) o.out = c.output_path;
      }
      return run_theorem1(o, c, thm);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
