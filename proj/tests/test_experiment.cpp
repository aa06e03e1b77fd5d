#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "spt/discrete_measure.hpp"
#include "spt/experiment.hpp"
#include "spt/transport.hpp"
#include "spt/version.hpp"

namespace {

namespace fs = std::filesystem;

std::string cube_config(const std::string& out) {
  return "kind = rates_plugin\n"
         "\n"
         "[generator]\n"
         "family = uniform_cube\n"
         "dim = 2\n"
         "side = 2\n"
         "\n"
         "[run]\n"
         "p = 1\n"
         "n_list = 20, 40\n"
         "replicates = 3\n"
         "seed = 7\n"
         "out = " +
         out + "\n";
}

// Fresh per-test scratch directory under the system temp root.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("spt_exp_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int line_count(const std::string& text) {
  int n = 0;
  for (const char c : text) n += c == '\n';
  return n;
}

bool has_tmp_leftovers(const fs::path& dir) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".tmp") return true;
  }
  return false;
}

}  // namespace

TEST_CASE("config parser resolves fields and fills defaults") {
  const spt::ExperimentConfig c =
      spt::parse_experiment_config_text(cube_config("runs/x"), "mem.ini");
  CHECK(c.kind == "rates_plugin");
  CHECK(c.family == "uniform_cube");
  CHECK(c.d == 2);
  CHECK(c.side == doctest::Approx(2.0));
  CHECK(c.p == doctest::Approx(1.0));
  CHECK(c.n_list == std::vector<int>{20, 40});
  CHECK(c.replicates == 3);
  CHECK(c.seed == 7);
  CHECK(c.threads == 1);
  CHECK(c.out_dir == "runs/x");
  CHECK(c.config_path == "mem.ini");
  CHECK_FALSE(c.echo_text.empty());
}

TEST_CASE("config errors carry the offending line") {
  const auto expect_error = [](const std::string& text, int line,
                               const std::string& fragment) {
    try {
      spt::parse_experiment_config_text(text, "t.ini");
      FAIL_CHECK("expected ConfigError for: " << fragment);
    } catch (const spt::ConfigError& e) {
      CHECK(e.line() == line);
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
      CHECK(std::string(e.what()).find("t.ini:") == 0);
    }
  };

  expect_error("kind = rates_plugin\n[generator\n", 2, "unterminated");
  expect_error("kind = nonsense\n", 1, "unknown experiment kind");
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "dim = two\n[run]\np = 1\nn_list = 10\nreplicates = 1\n",
               4, "bad number");
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "dim = 2\ndim = 3\n",
               5, "appears twice");
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "[run]\np = 1\nn_list = 10\nreplicates = 1\n"
               "[mystery]\nx = 1\n",
               8, "not used by kind");
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "k = 1\n[run]\np = 1\nn_list = 10\nreplicates = 1\n",
               4, "not used by kind");
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "[run]\np = 1\nn_list = 40, 20\nreplicates = 1\n",
               6, "strictly increasing");
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "[run]\np = 1\nn_list = 20, 40\nreplicates = 0\n",
               7, "replicates must be >= 1");
  expect_error("kind = concentration\n[generator]\nfamily = uniform_cube\n"
               "[run]\np = 1\nn_list = 20\nreplicates = 50\n",
               7, "at least 200 replicates");
  expect_error("kind = rates_plugin\n[generator]\nfamily = spiked_gaussian\n"
               "[run]\np = 1\nn_list = 10\nreplicates = 1\n",
               3, "not usable by kind");
  expect_error("kind = rates_wpp\n[generator]\nfamily = spiked_gaussian\n"
               "dim = 3\ndirection = 1 0\n[run]\np = 2\nn_list = 10\n"
               "replicates = 1\n",
               5, "direction length");
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "[run]\np = 0.5\nn_list = 10\nreplicates = 1\n",
               5, "p must be >= 1");
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "[run]\np =\n", 5, "no value");
  expect_error("kind = hardness_suite\n[hardness]\neps_list = 0.3\n", 3,
               "(0, 1/6]");
  expect_error("kind = rates_wpp\n[generator]\nfamily = hard_instance\n"
               "dim = 3\n[run]\np = 2\nn_list = 10\nreplicates = 1\n",
               0, "p = 1");

  // Missing keys point at the section header that should hold them.
  expect_error("kind = rates_plugin\n[generator]\nfamily = uniform_cube\n"
               "[run]\nn_list = 10\nreplicates = 1\n",
               4, "missing key 'p'");
  expect_error("kind = solve\n[run]\np = 2\n", 0, "missing section [solve]");
}

TEST_CASE("canonical echo is a parser fixed point") {
  const spt::ExperimentConfig first =
      spt::parse_experiment_config_text(cube_config("runs/x"), "a.ini");
  const spt::ExperimentConfig second =
      spt::parse_experiment_config_text(first.echo_text, "b.ini");
  CHECK(second.echo_text == first.echo_text);
  CHECK(second.kind == first.kind);
  CHECK(second.n_list == first.n_list);
  CHECK(second.seed == first.seed);
  CHECK(second.out_dir == first.out_dir);

  // Spiked configs render the wpp block as well.
  const std::string spiked =
      "kind = rates_wpp\n[generator]\nfamily = spiked_gaussian\ndim = 3\n"
      "beta = 1\n[run]\np = 2\nn_list = 10\nreplicates = 1\n"
      "[wpp]\nrestarts = 2\nmax_iters = 30\n";
  const spt::ExperimentConfig w =
      spt::parse_experiment_config_text(spiked, "w.ini");
  CHECK(w.echo_text.find("[wpp]") != std::string::npos);
  const spt::ExperimentConfig w2 =
      spt::parse_experiment_config_text(w.echo_text, "w2.ini");
  CHECK(w2.echo_text == w.echo_text);
  CHECK(w2.wpp.restarts == 2);
  CHECK(w2.wpp.max_iters == 30);
}

TEST_CASE("overrides update the config and its echo") {
  spt::ExperimentConfig c =
      spt::parse_experiment_config_text(cube_config("runs/x"), "a.ini");
  spt::apply_overrides(c, 99, std::string("elsewhere"), 2);
  CHECK(c.seed == 99);
  CHECK(c.out_dir == "elsewhere");
  CHECK(c.threads == 2);
  CHECK(c.echo_text.find("seed = 99") != std::string::npos);
  CHECK(c.echo_text.find("out = elsewhere") != std::string::npos);
  CHECK(c.echo_text.find("threads = 2") != std::string::npos);
  CHECK_THROWS_AS(spt::apply_overrides(c, std::nullopt, std::nullopt, 0),
                  std::invalid_argument);
}

TEST_CASE("describe reports the plan without touching the filesystem") {
  const fs::path dir = scratch("describe");
  const spt::ExperimentConfig c = spt::parse_experiment_config_text(
      cube_config(dir.string()), "a.ini");
  const std::string plan = spt::describe(c);
  CHECK(plan.find("rates_plugin") != std::string::npos);
  CHECK(plan.find("n_list: 20 40") != std::string::npos);
  CHECK(plan.find("total rows 6") != std::string::npos);
  CHECK(plan.find("no files were written") != std::string::npos);
  CHECK_FALSE(fs::exists(dir));

  spt::ExperimentConfig bad = c;
  bad.replicates = 0;
  CHECK_THROWS_AS(spt::describe(bad), std::invalid_argument);
}

TEST_CASE("rates_plugin run writes a reproducible bundle") {
  const fs::path dir = scratch("plugin");
  spt::ExperimentConfig c = spt::parse_experiment_config_text(
      cube_config(dir.string()), "a.ini");
  const spt::ExperimentReport report = spt::run(c);

  CHECK(report.kind == "rates_plugin");
  CHECK(report.total_rows == 6);
  CHECK(report.flagged_rows == 0);
  CHECK(fs::exists(dir / "config.ini"));
  CHECK(fs::exists(dir / "rows.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK_FALSE(fs::exists(dir / "lock"));
  CHECK_FALSE(has_tmp_leftovers(dir));
  CHECK(slurp(dir / "config.ini") == c.echo_text);
  CHECK(slurp(dir / "rows.csv") == report.rows_csv);
  CHECK(line_count(report.rows_csv) == 7);  // header + 6 rows
  CHECK(report.rows_csv.rfind("n,replicate,seed,value,flag\n", 0) == 0);

  const auto summary = nlohmann::json::parse(report.summary_json);
  CHECK(summary.at("kind") == "rates_plugin");
  CHECK(summary.at("version") == std::string(spt::kVersion));
  CHECK(summary.at("total_rows") == 6);
  CHECK(summary.at("flagged_rows") == 0);
  CHECK(summary.at("per_n").size() == 2);
  CHECK(summary.at("per_n")[0].at("mean").get<double>() > 0.0);

  // Same config into a fresh directory: byte-identical rows.
  const fs::path dir2 = scratch("plugin2");
  spt::ExperimentConfig c2 = c;
  c2.out_dir = dir2.string();
  const spt::ExperimentReport again = spt::run(c2);
  CHECK(again.rows_csv == report.rows_csv);

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("solve run exports the optimal coupling it solved") {
  const fs::path dir = scratch("solve");
  fs::create_directories(dir);
  spt::DiscreteMeasure mu;
  mu.points.resize(3, 2);
  mu.points << 0, 0, 1, 0, 0, 1;
  mu.weights = Eigen::Vector3d(0.2, 0.3, 0.5);
  spt::DiscreteMeasure nu;
  nu.points.resize(2, 2);
  nu.points << 2, 0, 0, 2;
  nu.weights = Eigen::Vector2d(0.6, 0.4);
  spt::write_measure_csv(mu, (dir / "a.csv").string());
  spt::write_measure_csv(nu, (dir / "b.csv").string());

  spt::ExperimentConfig c;
  c.kind = "solve";
  c.p = 2.0;
  c.solve_a = (dir / "a.csv").string();
  c.solve_b = (dir / "b.csv").string();
  c.out_dir = (dir / "run").string();
  const spt::ExperimentReport report = spt::run(c);

  const spt::TransportResult direct = spt::wasserstein_discrete(mu, nu, 2.0);
  const auto summary = nlohmann::json::parse(report.summary_json);
  CHECK(summary.at("cost").get<double>() ==
        doctest::Approx(direct.cost).epsilon(1e-12));
  CHECK(report.total_rows == static_cast<int>(direct.coupling.entries.size()));
  CHECK(report.rows_csv.rfind("i,j,mass\n", 0) == 0);

  // Synthesized echo reproduces the run byte for byte.
  const spt::ExperimentConfig echoed = spt::parse_experiment_config_text(
      slurp(dir / "run" / "config.ini"), "echo.ini");
  spt::ExperimentConfig c2 = echoed;
  c2.out_dir = (dir / "run2").string();
  CHECK(spt::run(c2).rows_csv == report.rows_csv);

  fs::remove_all(dir);
}

TEST_CASE("rates_wpp run reports truth and both error curves") {
  const fs::path dir = scratch("wpp");
  spt::ExperimentConfig c;
  c.kind = "rates_wpp";
  c.family = "spiked_gaussian";
  c.d = 3;
  c.beta = 1.0;
  c.p = 2.0;
  c.k = 1;
  c.n_list = {30, 60};
  c.replicates = 2;
  c.seed = 5;
  c.wpp.restarts = 2;
  c.wpp.max_iters = 25;
  c.out_dir = dir.string();
  const spt::ExperimentReport report = spt::run(c);

  const auto summary = nlohmann::json::parse(report.summary_json);
  // Truth for beta = 1, p = 2 is sqrt(2) - 1.
  CHECK(summary.at("truth").get<double>() ==
        doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
  CHECK(summary.at("per_n").size() == 2);
  CHECK(summary.at("per_n")[0].at("wpp_mean_err").get<double>() >= 0.0);
  CHECK(summary.at("per_n")[0].at("plugin_mean_err").get<double>() >= 0.0);
  CHECK(report.rows_csv.rfind("n,replicate,seed,wpp_value,plugin_value,flag\n",
                              0) == 0);
  CHECK(report.total_rows == 4);
  CHECK(report.flagged_rows == 0);
  fs::remove_all(dir);
}

TEST_CASE("spike_recovery run emits angles in the unit interval") {
  const fs::path dir = scratch("spike");
  spt::ExperimentConfig c;
  c.kind = "spike_recovery";
  c.family = "spiked_gaussian";
  c.d = 3;
  c.beta = 4.0;
  c.p = 2.0;
  c.k = 1;
  c.n_list = {50};
  c.replicates = 2;
  c.seed = 3;
  c.wpp.restarts = 2;
  c.wpp.max_iters = 30;
  c.out_dir = dir.string();
  const spt::ExperimentReport report = spt::run(c);

  const auto summary = nlohmann::json::parse(report.summary_json);
  const double mean_angle =
      summary.at("per_n")[0].at("mean_sin_sq").get<double>();
  CHECK(mean_angle >= 0.0);
  CHECK(mean_angle <= 1.0);
  CHECK(report.rows_csv.rfind("n,replicate,seed,sin_sq,flag\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("concentration run keeps the replicate bookkeeping exact") {
  const fs::path dir = scratch("conc");
  spt::ExperimentConfig c;
  c.kind = "concentration";
  c.family = "two_point";
  c.atoms.resize(2, 1);
  c.atoms << 0.0, 1.0;
  c.atom_weights = Eigen::Vector2d(0.5, 0.5);
  c.p = 1.0;
  c.n_list = {10, 20};
  c.replicates = 200;
  c.seed = 13;
  c.out_dir = dir.string();
  const spt::ExperimentReport report = spt::run(c);

  CHECK(report.total_rows == 400);
  CHECK(report.flagged_rows == 0);
  const auto summary = nlohmann::json::parse(report.summary_json);
  for (const auto& entry : summary.at("per_n")) {
    CHECK(entry.at("exact_reference") == true);
    CHECK(entry.at("sigma_sq_hat").get<double>() > 0.0);
    CHECK(entry.at("n_sigma_sq").get<double>() > 0.0);
  }
  CHECK(summary.at("n_sigma_sq_spread").get<double>() >= 1.0);
  fs::remove_all(dir);
}

TEST_CASE("hardness_suite run covers all three construction families") {
  const fs::path dir = scratch("hard");
  spt::ExperimentConfig c;
  c.kind = "hardness_suite";
  c.moment_orders = {1, 2};
  c.eps_list = {1.0 / 6.0};
  c.nodes_list = {2};
  c.out_dir = dir.string();
  const spt::ExperimentReport report = spt::run(c);

  CHECK(report.flagged_rows == 0);
  const auto summary = nlohmann::json::parse(report.summary_json);
  CHECK(summary.at("extremal_pairs").size() == 2);
  for (const auto& pair : summary.at("extremal_pairs")) {
    CHECK(pair.at("gap_reached") == true);
    CHECK(pair.at("objective").get<double>() >= 0.5);
  }
  CHECK(summary.at("priors").size() == 2);
  for (const auto& prior : summary.at("priors")) {
    CHECK(prior.at("built") == true);
    CHECK(prior.at("mean_y").get<double>() ==
          doctest::Approx(prior.at("mean_y_prime").get<double>())
              .epsilon(1e-9));
    CHECK(prior.at("mean_y").get<double>() <= 6.0);
    CHECK(prior.at("mean_inv_y_prime").get<double>() <= 0.5 + 1e-12);
  }
  CHECK(summary.at("distribution_a").size() == 1);
  const auto& mix = summary.at("distribution_a")[0];
  CHECK(mix.at("max_rel_moment_dev").get<double>() <= 1e-8);
  CHECK(mix.at("w1_gap").get<double>() > 0.0);
  CHECK(report.rows_csv.rfind("section,moment_order,eps,m,name,value,flag\n",
                              0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("run refuses a locked or unset output directory") {
  spt::ExperimentConfig c = spt::parse_experiment_config_text(
      cube_config("placeholder"), "a.ini");
  c.out_dir.clear();
  CHECK_THROWS_AS(spt::run(c), std::invalid_argument);

  const fs::path dir = scratch("locked");
  fs::create_directories(dir);
  std::ofstream(dir / "lock") << "held\n";
  c.out_dir = dir.string();
  CHECK_THROWS_WITH_AS(spt::run(c),
                       doctest::Contains("locked by another run"),
                       std::runtime_error);
  CHECK(fs::exists(dir / "lock"));  // a failed acquire must not steal it
  fs::remove_all(dir);
}

TEST_CASE("load_experiment_config reads from disk and reports bad paths") {
  const fs::path dir = scratch("load");
  fs::create_directories(dir);
  const fs::path path = dir / "cfg.ini";
  std::ofstream(path) << cube_config((dir / "out").string());
  const spt::ExperimentConfig c = spt::load_experiment_config(path.string());
  CHECK(c.kind == "rates_plugin");
  CHECK(c.config_path == path.string());
  CHECK_THROWS_AS(spt::load_experiment_config((dir / "absent.ini").string()),
                  std::runtime_error);
  fs::remove_all(dir);
}
