#include "amrf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <omp.h>

#include "amrf/baselines.hpp"
#include "amrf/csv_io.hpp"
#include "amrf/error.hpp"
#include "amrf/rng.hpp"

namespace amrf {

using nlohmann::json;

double psnr(const Vector& reference, const Vector& reconstruction, double peak) {
  if (reference.size() != reconstruction.size() || reference.size() == 0)
    throw InvalidDimension("psnr: shapes do not match");
  if (!(peak > 0.0)) throw InvalidDimension("psnr: peak must be positive");
  const double mse = (reference - reconstruction).squaredNorm() / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const ImageGrid& reference, const ImageGrid& reconstruction, double peak) {
  if (reference.height() != reconstruction.height() || reference.width() != reconstruction.width())
    throw InvalidDimension("psnr: image shapes do not match");
  return psnr(vectorize(reference), vectorize(reconstruction), peak);
}

namespace {

std::vector<Index> cluster_sizes(Index k, Index clusters) {
  std::vector<Index> sizes(static_cast<std::size_t>(clusters), k / clusters);
  for (Index c = 0; c < k % clusters; ++c) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

constexpr int kPlacementAttempts = 10000;

}  // namespace

Vector gen_synthetic_structured(Index n, Index k, Index clusters, double amplitude,
                                std::uint64_t seed, std::optional<std::pair<Index, Index>> grid) {
  if (n < 1) throw ConfigError("synthetic: N must be >= 1");
  if (k < 0 || k > n) throw ConfigError("synthetic: k must lie in [0, N]");
  Vector x = Vector::Zero(n);
  if (k == 0) return x;
  if (clusters < 1 || clusters > k) throw ConfigError("synthetic: cluster count must lie in [1, k]");
  if (grid && grid->first * grid->second != n) throw ConfigError("synthetic: grid does not cover N");

  Rng rng = make_rng(seed);
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  // Cells reserved by a cluster and its one-cell margin, so clusters never touch.
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  std::vector<Index> order;

  for (Index size : cluster_sizes(k, clusters)) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      std::vector<Index> cells;
      if (!grid) {
        if (size > n) break;
        std::uniform_int_distribution<Index> pick(0, n - size);
        const Index start = pick(rng);
        for (Index i = start; i < start + size; ++i) cells.push_back(i);
      } else {
        const auto [h, w] = *grid;
        const Index bw = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(size))));
        const Index bh = (size + bw - 1) / bw;
        if (bw > w || bh > h) break;
        std::uniform_int_distribution<Index> pick_r(0, h - bh);
        std::uniform_int_distribution<Index> pick_c(0, w - bw);
        const Index r0 = pick_r(rng);
        const Index c0 = pick_c(rng);
        for (Index t = 0; t < size; ++t) cells.push_back((r0 + t / bw) * w + c0 + t % bw);
      }
      if (std::any_of(cells.begin(), cells.end(), [&](Index i) { return blocked[static_cast<std::size_t>(i)]; }))
        continue;
      for (Index i : cells) {
        taken[static_cast<std::size_t>(i)] = true;
        order.push_back(i);
        if (!grid) {
          for (Index j = std::max<Index>(0, i - 1); j <= std::min(n - 1, i + 1); ++j)
            blocked[static_cast<std::size_t>(j)] = true;
        } else {
          const auto [h, w] = *grid;
          const Index r = i / w;
          const Index c = i % w;
          for (Index rr = std::max<Index>(0, r - 1); rr <= std::min(h - 1, r + 1); ++rr)
            for (Index cc = std::max<Index>(0, c - 1); cc <= std::min(w - 1, c + 1); ++cc)
              blocked[static_cast<std::size_t>(rr * w + cc)] = true;
        }
      }
      placed = true;
    }
    if (!placed)
      throw ConfigError("synthetic: cannot pack " + std::to_string(clusters) + " clusters of " +
                        std::to_string(k) + " nonzeros into N = " + std::to_string(n));
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index i : order) x[i] = amplitude * gauss(rng);
  return x;
}

std::string to_string(SolverKind solver) {
  switch (solver) {
    case SolverKind::adaptive: return "adaptive";
    case SolverKind::fixed: return "fixed";
    case SolverKind::oracle: return "oracle";
    case SolverKind::omp: return "omp";
  }
  return "?";
}

namespace {

SolverKind parse_solver(const std::string& name) {
  if (name == "adaptive") return SolverKind::adaptive;
  if (name == "fixed") return SolverKind::fixed;
  if (name == "oracle") return SolverKind::oracle;
  if (name == "omp") return SolverKind::omp;
  throw ConfigError("unknown solver '" + name + "'");
}

double parse_snr(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "noiseless" || s == "inf") return kNoiseless;
    throw ConfigError("bad SNR level '" + s + "'");
  }
  if (v.is_null()) return kNoiseless;
  return v.get<double>();
}

MapMode parse_map_mode(const std::string& s) {
  if (s == "exact") return MapMode::exact;
  if (s == "loopy") return MapMode::loopy;
  throw ConfigError("unknown map_mode '" + s + "'");
}

NoiseRule parse_noise_rule(const std::string& s) {
  if (s == "pooled") return NoiseRule::pooled;
  if (s == "mean_of_ratios") return NoiseRule::mean_of_ratios;
  throw ConfigError("unknown noise_rule '" + s + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (sampling_rates.empty()) throw ConfigError("sampling_rates is empty");
  for (double r : sampling_rates)
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("sampling rate " + csv::format_double(r) + " is outside (0, 1]");
  if (snr_levels_db.empty()) throw ConfigError("snr_levels_db is empty");
  for (double s : snr_levels_db)
    if (std::isnan(s) || s == -kNoiseless) throw ConfigError("SNR levels must be finite or noiseless");
  if (solvers.empty()) throw ConfigError("no solvers selected");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (train_count < 1 && std::find(solvers.begin(), solvers.end(), SolverKind::fixed) != solvers.end() &&
      dataset == DatasetKind::synthetic)
    throw ConfigError("train_count must be >= 1 for the fixed solver");
  if (!(omp_k_fraction > 0.0 && omp_k_fraction <= 1.0)) throw ConfigError("omp_k_fraction must lie in (0, 1]");
  if (dataset == DatasetKind::synthetic && transform != TransformKind::none)
    throw ConfigError("synthetic signals are generated in the coefficient domain; use transform \"none\"");
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
  }
  ExperimentConfig cfg;
  try {
    const json& ds = j.at("dataset");
    if (ds.is_string()) {
      const auto s = ds.get<std::string>();
      if (s == "synthetic") {
        cfg.dataset = DatasetKind::synthetic;
      } else {
        cfg.dataset_path = resolve(base_dir, s);
        cfg.dataset = DatasetKind::images;
      }
    } else {
      const auto kind = ds.value("kind", std::string("synthetic"));
      if (kind == "synthetic") {
        cfg.dataset = DatasetKind::synthetic;
      } else if (kind == "images" || kind == "vectors") {
        cfg.dataset = kind == "images" ? DatasetKind::images : DatasetKind::vectors;
        cfg.dataset_path = resolve(base_dir, ds.at("path").get<std::string>());
      } else {
        throw ConfigError("unknown dataset kind '" + kind + "'");
      }
    }
    const json syn = j.contains("synthetic") ? j.at("synthetic") : (ds.is_object() ? ds : json::object());
    cfg.synthetic.n = syn.value("n", cfg.synthetic.n);
    cfg.synthetic.k = syn.value("k", cfg.synthetic.k);
    cfg.synthetic.clusters = syn.value("clusters", cfg.synthetic.clusters);
    cfg.synthetic.amplitude = syn.value("amplitude", cfg.synthetic.amplitude);
    cfg.synthetic.height = syn.value("height", Index{0});
    cfg.synthetic.width = syn.value("width", Index{0});

    const auto transform = j.value("transform", std::string("none"));
    if (transform == "none") {
      cfg.transform = TransformKind::none;
    } else if (transform == "dct") {
      cfg.transform = TransformKind::dct;
    } else if (transform.rfind("haar", 0) == 0) {
      cfg.transform = TransformKind::haar;
      if (transform.size() > 5 && transform[4] == ':') cfg.haar_levels = std::stoi(transform.substr(5));
    } else if (transform.rfind("pca:", 0) == 0) {
      cfg.transform = TransformKind::pca;
      cfg.pca_basis_path = resolve(base_dir, transform.substr(4));
    } else {
      throw ConfigError("unknown transform '" + transform + "'");
    }

    if (j.contains("sampling_rates")) cfg.sampling_rates = j.at("sampling_rates").get<std::vector<double>>();
    if (j.contains("snr_levels_db")) {
      cfg.snr_levels_db.clear();
      for (const auto& v : j.at("snr_levels_db")) cfg.snr_levels_db.push_back(parse_snr(v));
    }
    if (j.contains("solvers")) {
      cfg.solvers.clear();
      for (const auto& v : j.at("solvers")) cfg.solvers.push_back(parse_solver(v.get<std::string>()));
    }
    cfg.trials = j.value("trials", cfg.trials);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    cfg.train_count = j.value("train_count", cfg.train_count);
    cfg.omp_k_fraction = j.value("omp_k_fraction", cfg.omp_k_fraction);
    cfg.write_traces = j.value("write_traces", cfg.write_traces);

    if (j.contains("inner")) {
      const json& in = j.at("inner");
      cfg.outer.inner.max_iters = in.value("max_iters", cfg.outer.inner.max_iters);
      cfg.outer.inner.rel_tol = in.value("rel_tol", cfg.outer.inner.rel_tol);
      if (in.contains("map_mode")) cfg.outer.inner.map_mode = parse_map_mode(in.at("map_mode").get<std::string>());
      if (in.contains("noise_rule")) cfg.outer.inner.noise_rule = parse_noise_rule(in.at("noise_rule").get<std::string>());
    }
    if (j.contains("outer")) {
      const json& out = j.at("outer");
      cfg.outer.max_outer = out.value("max_outer", cfg.outer.max_outer);
      cfg.outer.outer_rel_tol = out.value("outer_rel_tol", cfg.outer.outer_rel_tol);
      cfg.outer.pl.max_iters = out.value("pl_iters", cfg.outer.pl.max_iters);
      cfg.outer.warm_start_inner = out.value("warm_start", cfg.outer.warm_start_inner);
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: malformed number in transform spec");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

int experiment_threads() {
  if (const char* env = std::getenv("AMRF_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// One ground-truth signal in the solver's (coefficient) domain plus what is
// needed to score a reconstruction.
struct Sample {
  Vector coeffs;
  std::optional<ImageGrid> image;  // image datasets: PSNR is taken after the inverse transform
  std::optional<Vector> signal;    // vector datasets under a PCA basis
  double peak = 1.0;
};

class Dataset {
 public:
  explicit Dataset(const ExperimentConfig& cfg) : cfg_(cfg) {
    if (cfg.transform == TransformKind::pca) basis_ = Basis::load_csv(cfg.pca_basis_path);
    if (cfg.dataset == DatasetKind::synthetic) {
      const auto& syn = cfg.synthetic;
      n_ = syn.n;
      if (syn.height > 0 && syn.width > 0) {
        if (syn.height * syn.width != syn.n) throw ConfigError("synthetic: height * width must equal n");
        grid_ = std::make_pair(syn.height, syn.width);
        spec_ = NeighborhoodSpec::grid8(syn.height, syn.width);
      } else {
        spec_ = NeighborhoodSpec::chain2(syn.n);
      }
      return;
    }
    if (!std::filesystem::is_directory(cfg.dataset_path))
      throw ConfigError("dataset directory " + cfg.dataset_path.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    const std::string ext = cfg.dataset == DatasetKind::images ? ".pgm" : ".csv";
    for (const auto& entry : std::filesystem::directory_iterator(cfg.dataset_path))
      if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("dataset directory " + cfg.dataset_path.string() + " has no " + ext + " files");
    for (const auto& f : files) samples_.push_back(load(f));
    n_ = samples_.front().coeffs.size();
    for (const auto& s : samples_)
      if (s.coeffs.size() != n_) throw ConfigError("dataset signals have different sizes");
    if (cfg.dataset == DatasetKind::images)
      spec_ = NeighborhoodSpec::grid8(samples_.front().image->height(), samples_.front().image->width());
    else
      spec_ = NeighborhoodSpec::chain2(n_);
  }

  Index n() const { return n_; }
  const NeighborhoodSpec& spec() const { return spec_; }

  Sample sample(int trial) const {
    if (cfg_.dataset != DatasetKind::synthetic)
      return samples_[static_cast<std::size_t>(trial) % samples_.size()];
    return synthetic(mix_seed(cfg_.base_seed, 0x51C0000ULL + static_cast<std::uint64_t>(trial)));
  }

  /// Training masks for the fixed prior.
  std::vector<SpinVector> training_masks() const {
    std::vector<SpinVector> masks;
    if (cfg_.dataset == DatasetKind::synthetic) {
      for (int i = 0; i < cfg_.train_count; ++i)
        masks.push_back(threshold_support(
            synthetic(mix_seed(cfg_.base_seed, 0x7EA1000ULL + static_cast<std::uint64_t>(i))).coeffs));
    } else {
      for (const auto& s : samples_) masks.push_back(threshold_support(s.coeffs));
    }
    return masks;
  }

  double score(const Sample& truth, const Vector& coeffs) const {
    if (truth.image) {
      const ImageGrid& img = *truth.image;
      ImageGrid rec;
      switch (cfg_.transform) {
        case TransformKind::none: rec = devectorize(coeffs, img.height(), img.width(), img.peak); break;
        case TransformKind::dct: rec = dct2_inverse(coeffs, img.height(), img.width(), img.peak); break;
        case TransformKind::haar:
          rec = haar2_inverse(coeffs, img.height(), img.width(), cfg_.haar_levels, img.peak);
          break;
        case TransformKind::pca:
          rec = devectorize(pca_apply(coeffs, *basis_, Direction::inverse), img.height(), img.width(), img.peak);
          break;
      }
      return psnr(img, rec, truth.peak);
    }
    if (truth.signal) return psnr(*truth.signal, pca_apply(coeffs, *basis_, Direction::inverse), truth.peak);
    return psnr(truth.coeffs, coeffs, truth.peak);
  }

 private:
  Sample synthetic(std::uint64_t seed) const {
    const auto& syn = cfg_.synthetic;
    Sample s;
    s.coeffs = gen_synthetic_structured(syn.n, syn.k, syn.clusters, syn.amplitude, seed, grid_);
    s.peak = s.coeffs.cwiseAbs().maxCoeff();
    if (!(s.peak > 0.0)) s.peak = 1.0;
    return s;
  }

  Sample load(const std::filesystem::path& file) const {
    Sample s;
    if (cfg_.dataset == DatasetKind::images) {
      ImageGrid img = read_pgm(file);
      s.peak = img.peak;
      switch (cfg_.transform) {
        case TransformKind::none: s.coeffs = vectorize(img); break;
        case TransformKind::dct: s.coeffs = dct2_forward(img); break;
        case TransformKind::haar: s.coeffs = haar2_forward(img, cfg_.haar_levels); break;
        case TransformKind::pca: s.coeffs = pca_apply(vectorize(img), *basis_, Direction::forward); break;
      }
      s.image = std::move(img);
      return s;
    }
    Vector v = csv::read_vector(file);
    s.peak = v.cwiseAbs().maxCoeff();
    if (!(s.peak > 0.0)) s.peak = 1.0;
    switch (cfg_.transform) {
      case TransformKind::none: s.coeffs = v; break;
      case TransformKind::pca:
        s.coeffs = pca_apply(v, *basis_, Direction::forward);
        s.signal = std::move(v);
        break;
      default: throw ConfigError("vector datasets support only the none and pca transforms");
    }
    return s;
  }

  const ExperimentConfig& cfg_;
  Index n_ = 0;
  NeighborhoodSpec spec_;
  std::optional<std::pair<Index, Index>> grid_;
  std::optional<Basis> basis_;
  std::vector<Sample> samples_;
};

struct Cell {
  std::size_t rate_idx = 0;
  std::size_t snr_idx = 0;
  int trial = 0;
  std::uint64_t index = 0;
};

std::string snr_label(double snr) { return snr == kNoiseless ? "inf" : csv::format_double(snr); }

struct CellOutput {
  std::vector<TrialResult> rows;
  std::vector<std::pair<std::string, std::string>> traces;  // file name, contents
};

CellOutput run_cell(const ExperimentConfig& cfg, const Dataset& data, const Cell& cell,
                    const std::optional<BoltzmannMachine>& fixed_prior) {
  const double rate = cfg.sampling_rates[cell.rate_idx];
  const double snr = cfg.snr_levels_db[cell.snr_idx];
  const Index n = data.n();
  const Index m = static_cast<Index>(std::llround(rate * static_cast<double>(n)));
  const std::string where = "cell (rate " + csv::format_double(rate) + ", snr " + snr_label(snr) +
                            ", trial " + std::to_string(cell.trial) + ")";
  if (m < 1) throw ConfigError(where + ": M = round(rate * N) is 0");

  const Sample truth = data.sample(cell.trial);
  const SensingMatrix a = gen_bernoulli_matrix(m, n, mix_seed(cfg.base_seed, 2 * cell.index));
  const Vector clean = measure(a, truth.coeffs);
  Measurement meas;
  try {
    meas = add_noise_snr(clean, snr, mix_seed(cfg.base_seed, 2 * cell.index + 1));
  } catch (const UndefinedSnr& ex) {
    throw ConfigError(where + ": " + ex.what());
  }

  OuterOptions outer = cfg.outer;
  outer.neighborhood = data.spec();

  CellOutput out;
  for (SolverKind solver : cfg.solvers) {
    TrialResult row;
    row.solver = solver;
    row.sampling_rate = rate;
    row.snr_db = snr;
    row.trial_index = cell.trial;
    row.peak = truth.peak;
    const auto start = std::chrono::steady_clock::now();
    Vector x;
    switch (solver) {
      case SolverKind::adaptive: {
        AdaptiveResult res = adaptive_mrf_recover(a, meas.y, outer);
        x = std::move(res.x);
        row.inner_iters_total = res.inner_iters_total;
        row.outer_iters = static_cast<int>(res.trace.size());
        row.outer_converged = res.converged;
        if (cfg.write_traces) {
          std::ostringstream trace;
          write_outer_trace(trace, res.trace);
          out.traces.emplace_back("adaptive_r" + std::to_string(cell.rate_idx) + "_s" +
                                      std::to_string(cell.snr_idx) + "_t" + std::to_string(cell.trial) + ".csv",
                                  trace.str());
        }
        break;
      }
      case SolverKind::fixed: {
        InnerResult res = fixed_mrf_recover(a, meas.y, *fixed_prior, outer);
        x = std::move(res.x);
        row.inner_iters_total = static_cast<int>(res.trace.size());
        break;
      }
      case SolverKind::oracle: {
        const SpinVector support = SpinVector::from_mask(truth.coeffs);
        x = oracle_estimate(a, meas.y, support, meas.true_noise_variance, Vector::Ones(n));
        row.inner_iters_total = 1;
        break;
      }
      case SolverKind::omp: {
        const Index k_max = std::clamp<Index>(
            static_cast<Index>(std::floor(cfg.omp_k_fraction * static_cast<double>(m))), 1, m);
        const double tol = meas.noiseless() ? 1e-9 * clean.norm()
                                            : std::sqrt(static_cast<double>(m) * meas.true_noise_variance);
        const OmpResult res = omp(a, meas.y, k_max, tol);
        x = res.x;
        row.inner_iters_total = static_cast<int>(res.atoms.size());
        break;
      }
    }
    row.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.psnr_db = data.score(truth, x);
    out.rows.push_back(row);
  }
  return out;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<TrialResult>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kResultsHeader << '\n';
  for (const auto& r : rows)
    out << to_string(r.solver) << ',' << csv::format_double(r.sampling_rate) << ','
        << snr_label(r.snr_db) << ',' << r.trial_index << ',' << csv::format_double(r.psnr_db) << ','
        << csv::format_double(r.runtime_seconds) << ',' << r.inner_iters_total << ','
        << r.outer_iters << '\n';
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_summary(const std::filesystem::path& path, const ExperimentConfig& cfg,
                   const std::vector<TrialResult>& rows) {
  json cells = json::array();
  for (std::size_t ri = 0; ri < cfg.sampling_rates.size(); ++ri)
    for (std::size_t si = 0; si < cfg.snr_levels_db.size(); ++si)
      for (SolverKind solver : cfg.solvers) {
        std::vector<const TrialResult*> group;
        for (const auto& r : rows)
          if (r.solver == solver && r.sampling_rate == cfg.sampling_rates[ri] &&
              r.snr_db == cfg.snr_levels_db[si])
            group.push_back(&r);
        const double count = static_cast<double>(group.size());
        auto mean_std = [&](auto field) {
          double sum = 0.0;
          for (const auto* r : group) sum += field(*r);
          const double mean = sum / count;
          double var = 0.0;
          if (std::isfinite(mean) && group.size() > 1) {
            for (const auto* r : group) var += (field(*r) - mean) * (field(*r) - mean);
            var /= count - 1.0;
          }
          return std::make_pair(mean, std::sqrt(var));
        };
        const auto [psnr_mean, psnr_std] = mean_std([](const TrialResult& r) { return r.psnr_db; });
        const auto [rt_mean, rt_std] = mean_std([](const TrialResult& r) { return r.runtime_seconds; });
        int converged = 0;
        int exact = 0;
        for (const auto* r : group) {
          converged += r->outer_converged ? 1 : 0;
          exact += std::isinf(r->psnr_db) ? 1 : 0;
        }
        json peaks = json::array();
        for (const auto* r : group) peaks.push_back(r->peak);
        cells.push_back({{"solver", to_string(solver)},
                         {"rate", cfg.sampling_rates[ri]},
                         {"snr_db", number_or_null(cfg.snr_levels_db[si])},
                         {"trials", group.size()},
                         {"psnr_mean", number_or_null(psnr_mean)},
                         {"psnr_std", number_or_null(psnr_std)},
                         {"psnr_exact_count", exact},
                         {"runtime_mean", rt_mean},
                         {"runtime_std", rt_std},
                         {"outer_converged", converged},
                         {"peaks", peaks}});
      }
  json summary = {{"rows", rows.size()}, {"cells", cells}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << summary.dump(2) << '\n';
}

}  // namespace

std::vector<TrialResult> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Dataset data(config);
  config.outer.inner.validate();

  std::optional<BoltzmannMachine> fixed_prior;
  if (std::find(config.solvers.begin(), config.solvers.end(), SolverKind::fixed) != config.solvers.end())
    fixed_prior = train_fixed_mrf(data.training_masks(), data.spec(), config.outer.pl);

  std::vector<Cell> cells;
  for (std::size_t ri = 0; ri < config.sampling_rates.size(); ++ri)
    for (std::size_t si = 0; si < config.snr_levels_db.size(); ++si)
      for (int t = 0; t < config.trials; ++t)
        cells.push_back({ri, si, t, static_cast<std::uint64_t>(cells.size())});
  // Reject an infeasible M before doing any work.
  for (double rate : config.sampling_rates)
    if (std::llround(rate * static_cast<double>(data.n())) < 1)
      throw ConfigError("sampling rate " + csv::format_double(rate) + " gives M = 0 for N = " +
                        std::to_string(data.n()));

  std::vector<CellOutput> outputs(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  const int workers = std::min<int>(experiment_threads(), static_cast<int>(cells.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    if (workers > 1) omp_set_num_threads(1);
    for (std::size_t c; (c = next.fetch_add(1)) < cells.size();) {
      try {
        outputs[c] = run_cell(config, data, cells[c], fixed_prior);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<TrialResult> rows;
  std::filesystem::create_directories(config.output_dir);
  if (config.write_traces) std::filesystem::create_directories(config.output_dir / "traces");
  for (auto& out : outputs) {
    rows.insert(rows.end(), out.rows.begin(), out.rows.end());
    for (const auto& [name, text] : out.traces) {
      std::ofstream f(config.output_dir / "traces" / name);
      if (!f) throw IoError("cannot write trace " + name);
      f << text;
    }
  }
  write_results_csv(config.output_dir / "results.csv", rows);
  write_summary(config.output_dir / "summary.json", config, rows);
  return rows;
}

}  // namespace amrf
