#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amrf/adaptive.hpp"
#include "amrf/transforms.hpp"

namespace amrf {

/// Peak signal-to-noise ratio in dB; +infinity when the inputs are identical.
double psnr(const Vector& reference, const Vector& reconstruction, double peak);
double psnr(const ImageGrid& reference, const ImageGrid& reconstruction, double peak);

/// k nonzeros in `clusters` separated groups: contiguous runs for 1-D signals,
/// compact rectangular blobs when `grid` (height, width) is given. Values are
/// amplitude * N(0, 1).
Vector gen_synthetic_structured(Index n, Index k, Index clusters, double amplitude,
                                std::uint64_t seed,
                                std::optional<std::pair<Index, Index>> grid = std::nullopt);

struct SyntheticSpec {
  Index n = 256;
  Index k = 26;
  Index clusters = 3;
  double amplitude = 1.0;
  // grid8 blobs when height * width == n, 1-D runs otherwise
  Index height = 0;
  Index width = 0;
};

enum class DatasetKind { synthetic, images, vectors };
enum class TransformKind { none, dct, haar, pca };
enum class SolverKind { adaptive, fixed, oracle, omp };

std::string to_string(SolverKind solver);

struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::synthetic;
  std::filesystem::path dataset_path;
  SyntheticSpec synthetic;
  TransformKind transform = TransformKind::none;
  int haar_levels = 2;
  std::filesystem::path pca_basis_path;
  std::vector<double> sampling_rates{0.2, 0.25, 0.3, 0.35, 0.4};
  std::vector<double> snr_levels_db{5.0, 10.0, 20.0, 30.0};
  std::vector<SolverKind> solvers{SolverKind::adaptive, SolverKind::omp};
  int trials = 3;
  std::uint64_t base_seed = 1;
  std::filesystem::path output_dir = "results";
  /// Size of the synthetic training set for the fixed-MRF prior.
  int train_count = 10;
  OuterOptions outer;
  /// OMP stops at floor(omp_k_fraction * M) atoms (at least one).
  double omp_k_fraction = 0.5;
  /// Write per-run outer traces for the adaptive solver.
  bool write_traces = true;

  void validate() const;
};

/// Parses the JSON config; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct TrialResult {
  SolverKind solver = SolverKind::adaptive;
  double sampling_rate = 0.0;
  double snr_db = 0.0;
  int trial_index = 0;
  double psnr_db = 0.0;
  double runtime_seconds = 0.0;
  int inner_iters_total = 0;
  int outer_iters = 0;
  double peak = 1.0;
  bool outer_converged = false;
};

/// results.csv header.
inline constexpr const char* kResultsHeader =
    "solver,rate,snr_db,trial,psnr_db,runtime_s,inner_iters,outer_iters";

/// Runs every (rate, snr, trial, solver) cell and writes results.csv,
/// summary.json and traces/ under config.output_dir. Rows come back in cell
/// order regardless of worker scheduling.
std::vector<TrialResult> run_experiment(const ExperimentConfig& config);

/// Worker count: AMRF_THREADS if set and positive, else hardware concurrency.
int experiment_threads();

}  // namespace amrf
