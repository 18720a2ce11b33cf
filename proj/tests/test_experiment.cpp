#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "amrf/csv_io.hpp"
#include "amrf/error.hpp"
#include "amrf/experiment.hpp"
#include "doctest.h"

using namespace amrf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("amrf_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.synthetic = {32, 4, 2, 1.0, 0, 0};
  cfg.sampling_rates = {0.5};
  cfg.snr_levels_db = {20.0};
  cfg.solvers = {SolverKind::adaptive};
  cfg.trials = 1;
  cfg.output_dir = out;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AMRF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("psnr examples") {
  Vector r = Vector::Ones(4), x = Vector::Ones(4);
  CHECK(std::isinf(psnr(r, x, 1.0)));
  x[0] = 0.0;
  CHECK(psnr(r, x, 1.0) == doctest::Approx(10.0 * std::log10(4.0)));  // 6.0206
  Vector ref(2), rec(2);
  ref << 100.0, 200.0;
  rec << 101.0, 199.0;
  CHECK(psnr(ref, rec, 255.0) == doctest::Approx(48.1308).epsilon(1e-5));
  CHECK_THROWS_AS(psnr(ref, Vector::Zero(3), 1.0), InvalidDimension);
}

TEST_CASE("synthetic generator examples") {
  CHECK(gen_synthetic_structured(16, 0, 1, 1.0, 3).isZero(0.0));
  const Vector run = gen_synthetic_structured(32, 8, 1, 1.0, 5);
  Index first = -1, last = -1, nnz = 0;
  for (Index i = 0; i < 32; ++i)
    if (run[i] != 0.0) {
      if (first < 0) first = i;
      last = i;
      ++nnz;
    }
  CHECK(nnz == 8);
  CHECK(last - first == 7);
  CHECK(gen_synthetic_structured(64, 10, 3, 2.0, 9) == gen_synthetic_structured(64, 10, 3, 2.0, 9));
  CHECK(gen_synthetic_structured(64, 10, 3, 2.0, 9) != gen_synthetic_structured(64, 10, 3, 2.0, 10));
  CHECK_THROWS_AS(gen_synthetic_structured(8, 9, 1, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(gen_synthetic_structured(8, 6, 4, 1.0, 1), ConfigError);
}

TEST_CASE("synthetic generator keeps clusters apart") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Vector x = gen_synthetic_structured(100, 12, 3, 1.0, seed);
    CHECK((x.array() != 0.0).count() == 12);
    int runs = 0;
    for (Index i = 0; i < 100; ++i) runs += x[i] != 0.0 && (i == 0 || x[i - 1] == 0.0);
    CHECK(runs == 3);
  }
}

TEST_CASE("one cell gives one row") {
  const fs::path out = scratch("one");
  const auto rows = run_experiment(small_config(out));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].solver == SolverKind::adaptive);
  CHECK(rows[0].outer_iters >= 1);
  CHECK(rows[0].outer_iters <= 5);
  CHECK(read_csv(out / "results.csv").size() == 2);
  CHECK(slurp(out / "results.csv").rfind(kResultsHeader, 0) == 0);
  CHECK(fs::exists(out / "summary.json"));
  CHECK(fs::exists(out / "traces"));
}

TEST_CASE("default sweep row count") {
  const fs::path out = scratch("sweep");
  ExperimentConfig cfg = small_config(out);
  const ExperimentConfig defaults;
  cfg.sampling_rates = defaults.sampling_rates;
  cfg.snr_levels_db = defaults.snr_levels_db;
  cfg.solvers = defaults.solvers;
  cfg.trials = defaults.trials;
  cfg.write_traces = false;
  const auto rows = run_experiment(cfg);
  CHECK(rows.size() == 120);
  CHECK(read_csv(out / "results.csv").size() == 121);
  // Rows come back in cell order.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t cell = i / 2;
    CHECK(rows[i].solver == cfg.solvers[i % 2]);
    CHECK(rows[i].trial_index == static_cast<int>(cell % 3));
    CHECK(rows[i].snr_db == cfg.snr_levels_db[(cell / 3) % 4]);
    CHECK(rows[i].sampling_rate == cfg.sampling_rates[cell / 12]);
  }
}

TEST_CASE("runs are deterministic and the summary matches the rows") {
  ExperimentConfig cfg = small_config(scratch("det_a"));
  cfg.sampling_rates = {0.4, 0.6};
  cfg.snr_levels_db = {kNoiseless, 15.0};
  cfg.solvers = {SolverKind::adaptive, SolverKind::fixed, SolverKind::oracle, SolverKind::omp};
  cfg.trials = 2;
  cfg.train_count = 3;
  run_experiment(cfg);
  const fs::path a = cfg.output_dir;
  cfg.output_dir = scratch("det_b");
  run_experiment(cfg);
  const fs::path b = cfg.output_dir;

  auto strip_runtime = [](std::vector<std::vector<std::string>> rows) {
    for (auto& r : rows) r.erase(r.begin() + 5);
    return rows;
  };
  const auto rows_a = read_csv(a / "results.csv");
  CHECK(strip_runtime(rows_a) == strip_runtime(read_csv(b / "results.csv")));
  CHECK(rows_a.size() == 1 + 2 * 2 * 2 * 4);

  // Recompute the cell means from results.csv.
  std::map<std::string, std::vector<double>> groups;
  for (std::size_t i = 1; i < rows_a.size(); ++i)
    groups[rows_a[i][0] + "|" + rows_a[i][1] + "|" + rows_a[i][2]].push_back(std::stod(rows_a[i][4]));
  const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK(summary.at("rows").get<std::size_t>() == rows_a.size() - 1);
  CHECK(summary.at("cells").size() == groups.size());
  for (const auto& cell : summary.at("cells")) {
    const std::string snr = cell.at("snr_db").is_null()
                                ? "inf"
                                : csv::format_double(cell.at("snr_db").get<double>());
    const std::string key = cell.at("solver").get<std::string>() + "|" +
                            csv::format_double(cell.at("rate").get<double>()) + "|" + snr;
    REQUIRE(groups.count(key) == 1);
    const auto& g = groups[key];
    CHECK(cell.at("trials").get<std::size_t>() == g.size());
    double sum = 0.0;
    bool all_finite = true;
    for (double v : g) {
      sum += v;
      all_finite = all_finite && std::isfinite(v);
    }
    if (all_finite)
      CHECK(std::abs(cell.at("psnr_mean").get<double>() - sum / static_cast<double>(g.size())) <= 1e-12);
    else
      CHECK(cell.at("psnr_mean").is_null());
  }
}

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse_config(R"({
    "dataset": "synthetic",
    "synthetic": {"n": 64, "k": 6, "clusters": 2},
    "sampling_rates": [0.25, 0.5],
    "snr_levels_db": [10, "noiseless"],
    "solvers": ["adaptive", "fixed", "oracle", "omp"],
    "trials": 4,
    "base_seed": 77,
    "output_dir": "out",
    "inner": {"max_iters": 50, "map_mode": "loopy", "noise_rule": "mean_of_ratios"},
    "outer": {"max_outer": 3}
  })",
                                            "/base");
  CHECK(cfg.synthetic.n == 64);
  CHECK(cfg.synthetic.k == 6);
  CHECK(cfg.sampling_rates == std::vector<double>{0.25, 0.5});
  CHECK(cfg.snr_levels_db[0] == 10.0);
  CHECK(cfg.snr_levels_db[1] == kNoiseless);
  CHECK(cfg.solvers.size() == 4);
  CHECK(cfg.trials == 4);
  CHECK(cfg.base_seed == 77);
  CHECK(cfg.output_dir == fs::path("/base/out"));
  CHECK(cfg.outer.inner.max_iters == 50);
  CHECK(cfg.outer.inner.map_mode == MapMode::loopy);
  CHECK(cfg.outer.inner.noise_rule == NoiseRule::mean_of_ratios);
  CHECK(cfg.outer.max_outer == 3);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config("{}"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dataset": "synthetic", "solvers": ["lasso"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dataset": "synthetic", "transform": "wavelet"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dataset": "synthetic", "sampling_rates": [1.5]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dataset": "synthetic", "trials": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dataset": "synthetic", "inner": {"map_mode": "gibbs"}})"),
                  ConfigError);

  ExperimentConfig tiny = small_config(scratch("tiny"));
  tiny.synthetic = {8, 1, 1, 1.0, 0, 0};
  tiny.sampling_rates = {0.01};
  CHECK_THROWS_AS(run_experiment(tiny), ConfigError);
}

TEST_CASE("thread count comes from the environment") {
  setenv("AMRF_THREADS", "3", 1);
  CHECK(experiment_threads() == 3);
  setenv("AMRF_THREADS", "0", 1);
  CHECK(experiment_threads() >= 1);
  unsetenv("AMRF_THREADS");
  CHECK(experiment_threads() >= 1);
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  const fs::path dir = scratch("cli");
  CHECK(run_cli("") == 2);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("frobnicate") == 2);

  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"dataset": "synthetic", "synthetic": {"n": 32, "k": 4, "clusters": 2},
    "sampling_rates": [0.5], "snr_levels_db": [20], "solvers": ["omp"], "trials": 1,
    "output_dir": "out"})";
  CHECK(run_cli("run --config " + cfg.string()) == 0);
  CHECK(fs::exists(dir / "out" / "results.csv"));

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << R"({"dataset": "synthetic", "trials": -1})";
  CHECK(run_cli("run --config " + bad.string()) == 2);
  CHECK(run_cli("run --config " + (dir / "missing.json").string()) == 2);

  // A zero column cannot be normalized.
  Matrix a = Matrix::Ones(3, 4);
  a.col(2).setZero();
  csv::write_matrix(dir / "a.csv", a);
  csv::write_vector(dir / "y.csv", Vector::Ones(3));
  CHECK(run_cli("recover --matrix " + (dir / "a.csv").string() + " --y " + (dir / "y.csv").string() +
                " --solver omp --out " + (dir / "x.csv").string()) == 3);
}

TEST_CASE("gen, recover and psnr") {
  const fs::path dir = scratch("cli_flow");
  const std::string x = (dir / "x.csv").string();
  REQUIRE(run_cli("gen --synthetic 64,6,2,1 --seed 4 --out " + x) == 0);
  const Vector truth = csv::read_vector(x);
  CHECK(truth.size() == 64);
  CHECK((truth.array() != 0.0).count() == 6);

  const SensingMatrix a = gen_bernoulli_matrix(32, 64, 5);
  csv::write_matrix(dir / "a.csv", a.entries());
  csv::write_vector(dir / "y.csv", measure(a, truth));
  const std::string base = "recover --matrix " + (dir / "a.csv").string() + " --y " +
                           (dir / "y.csv").string();
  CHECK(run_cli(base + " --solver omp --k 6 --out " + (dir / "omp.csv").string()) == 0);
  CHECK((csv::read_vector(dir / "omp.csv") - truth).norm() < 1e-8);
  CHECK(run_cli(base + " --solver adaptive --out " + (dir / "ad.csv").string() + " --trace " +
                (dir / "trace.csv").string()) == 0);
  CHECK(csv::read_vector(dir / "ad.csv").size() == 64);
  CHECK(slurp(dir / "trace.csv").rfind("outer_iter,", 0) == 0);
  CHECK(run_cli(base + " --solver fixed --out " + (dir / "f.csv").string()) == 2);
  CHECK(run_cli("psnr --ref " + x + " --rec " + (dir / "omp.csv").string()) == 0);
}

}  // TEST_SUITE
