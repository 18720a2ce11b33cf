// amrf-cs: command-line front end for the adaptive-MRF compressive sensing toolkit.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "amrf/adaptive.hpp"
#include "amrf/baselines.hpp"
#include "amrf/csv_io.hpp"
#include "amrf/error.hpp"
#include "amrf/experiment.hpp"

namespace {

using namespace amrf;

NeighborhoodSpec parse_neighborhood(const std::string& grid, Index n) {
  if (grid.empty()) return NeighborhoodSpec::chain2(n);
  const auto x = grid.find('x');
  if (x == std::string::npos) throw ConfigError("--grid expects HxW");
  const Index h = std::stol(grid.substr(0, x));
  const Index w = std::stol(grid.substr(x + 1));
  if (h * w != n) throw ConfigError("--grid " + grid + " does not cover N = " + std::to_string(n));
  return NeighborhoodSpec::grid8(h, w);
}

Vector read_signal(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".pgm") return vectorize(read_pgm(path));
  return csv::read_vector(path);
}

int run_main(int argc, char** argv) {
  CLI::App app{"Adaptive Markov-random-field compressive sensing"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment sweep from a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();

  std::string matrix_path, y_path, solver = "adaptive", out_path, trace_path, grid, bm_path,
      support_path;
  Index k_max = 0;
  double resid_tol = 0.0, sigma_n = 1e-12;
  int max_outer = 5;
  std::string map_mode = "loopy";
  bool warm = false;
  auto* recover = app.add_subcommand("recover", "Recover a signal from measurements");
  recover->add_option("--matrix", matrix_path, "Sensing matrix CSV (M x N)")->required();
  recover->add_option("--y", y_path, "Measurement vector CSV")->required();
  recover->add_option("--solver", solver, "adaptive | fixed | oracle | omp")
      ->check(CLI::IsMember({"adaptive", "fixed", "oracle", "omp"}));
  recover->add_option("--out", out_path, "Output vector CSV")->required();
  recover->add_option("--trace", trace_path, "Per-iteration trace CSV");
  recover->add_option("--grid", grid, "HxW raster for the grid8 neighborhood (default: chain2)");
  recover->add_option("--bm", bm_path, "Trained prior JSON (fixed solver)");
  recover->add_option("--support", support_path, "Known support CSV, nonzero = active (oracle solver)");
  recover->add_option("--sigma", sigma_n, "Noise variance for the oracle solver");
  recover->add_option("--k", k_max, "Atom budget for OMP (default M / 2)");
  recover->add_option("--tol", resid_tol, "Residual tolerance for OMP");
  recover->add_option("--max-outer", max_outer, "Outer iteration cap");
  recover->add_option("--map", map_mode, "exact | loopy")->check(CLI::IsMember({"exact", "loopy"}));
  recover->add_flag("--warm-start", warm, "Warm-start inner runs across outer iterations");

  std::string ref_path, rec_path;
  double peak = 255.0;
  auto* psnr_cmd = app.add_subcommand("psnr", "PSNR between two signals (CSV vectors or PGM images)");
  psnr_cmd->add_option("--ref", ref_path, "Reference")->required();
  psnr_cmd->add_option("--rec", rec_path, "Reconstruction")->required();
  psnr_cmd->add_option("--peak", peak, "Peak value");

  std::string synthetic, gen_out, gen_grid;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic clustered sparse vector");
  gen->add_option("--synthetic", synthetic, "N,k,clusters,amplitude")->required();
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("--grid", gen_grid, "HxW raster for 2-D blobs");
  gen->add_option("--out", gen_out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) {
    const ExperimentConfig cfg = load_config(config_path);
    const auto rows = run_experiment(cfg);
    std::cout << "wrote " << rows.size() << " rows to " << (cfg.output_dir / "results.csv").string() << '\n';
    return 0;
  }

  if (*recover) {
    const SensingMatrix a(csv::read_matrix(matrix_path));
    const Vector y = csv::read_vector(y_path);
    if (y.size() != a.rows()) throw InvalidDimension("y length does not match the matrix rows");
    OuterOptions opts;
    opts.neighborhood = parse_neighborhood(grid, a.cols());
    opts.max_outer = max_outer;
    opts.warm_start_inner = warm;
    opts.inner.map_mode = map_mode == "exact" ? MapMode::exact : MapMode::loopy;
    Vector x;
    std::ostringstream trace;
    if (solver == "adaptive") {
      AdaptiveResult res = adaptive_mrf_recover(a, y, opts);
      write_outer_trace(trace, res.trace);
      x = res.x;
    } else if (solver == "fixed") {
      if (bm_path.empty()) throw ConfigError("--solver fixed needs --bm");
      opts.inner.record_cost = !trace_path.empty();
      InnerResult res = fixed_mrf_recover(a, y, load_bm_json(bm_path), opts);
      write_inner_trace(trace, res.trace);
      x = res.x;
    } else if (solver == "oracle") {
      if (support_path.empty()) throw ConfigError("--solver oracle needs --support");
      const SpinVector s = SpinVector::from_mask(csv::read_vector(support_path));
      x = oracle_estimate(a, y, s, sigma_n, Vector::Ones(a.cols()));
    } else {
      const Index k = k_max > 0 ? k_max : std::max<Index>(1, a.rows() / 2);
      const OmpResult res = omp(a, y, k, resid_tol);
      trace << "step,atom,residual_norm\n";
      for (std::size_t i = 0; i < res.atoms.size(); ++i)
        trace << i + 1 << ',' << res.atoms[i] << ',' << csv::format_double(res.residual_norms[i + 1]) << '\n';
      x = res.x;
    }
    csv::write_vector(std::filesystem::path(out_path), x);
    if (!trace_path.empty()) {
      std::ofstream t(trace_path);
      if (!t) throw IoError("cannot write " + trace_path);
      t << trace.str();
    }
    return 0;
  }

  if (*psnr_cmd) {
    const double value = psnr(read_signal(ref_path), read_signal(rec_path), peak);
    std::cout << csv::format_double(value) << '\n';
    return 0;
  }

  if (*gen) {
    std::stringstream spec(synthetic);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(spec, field, ',')) fields.push_back(field);
    if (fields.size() != 4) throw ConfigError("--synthetic expects N,k,clusters,amplitude");
    const Index n = std::stol(fields[0]);
    std::optional<std::pair<Index, Index>> grid_dims;
    if (!gen_grid.empty()) {
      const auto nb = parse_neighborhood(gen_grid, n);
      grid_dims = std::make_pair(nb.height, nb.width);
    }
    const Vector x = gen_synthetic_structured(n, std::stol(fields[1]), std::stol(fields[2]),
                                              std::stod(fields[3]), seed, grid_dims);
    if (gen_out.empty())
      csv::write_vector(std::cout, x);
    else
      csv::write_vector(std::filesystem::path(gen_out), x);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const amrf::Error& e) {
    std::cerr << "amrf-cs: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::invalid_argument& e) {
    std::cerr << "amrf-cs: malformed number: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "amrf-cs: number out of range: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "amrf-cs: " << e.what() << '\n';
    return 3;
  }
}
