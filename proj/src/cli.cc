#include "affineglue/cli.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "affineglue/errors.h"
#include "affineglue/estimator.h"
#include "affineglue/io.h"
#include "affineglue/metrics.h"
#include "affineglue/synth.h"

namespace affineglue {
namespace {

// Raised for invalid input the flag parser cannot catch.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> ParseFloatList(const std::string& text,
                                   const std::string& flag) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    double v;
    if (!ParseDouble(item, &v) || !std::isfinite(v)) {
      throw UsageError(flag + ": not a number: '" + item + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw UsageError(flag + ": empty list");
  return values;
}

std::string ThresholdLabel(double tau) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%g", tau);
  return buffer;
}

template <typename T>
T ReadFile(const std::string& path, T (*reader)(std::istream&)) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return reader(in);
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// Writes to `path`, or to `out` when the path is empty.
void Emit(const std::string& path, std::ostream& out,
          const std::function<void(std::ostream&)>& writer) {
  if (path.empty()) {
    writer(out);
    return;
  }
  std::ofstream file(path);
  if (!file) throw UsageError("cannot write '" + path + "'");
  writer(file);
}

void WriteSummary(std::ostream& out, const BenchmarkReport& report,
                  const std::string& prefix) {
  out << prefix << "AVG " << FormatDouble(report.avg_deg) << '\n';
  out << prefix << "MED " << FormatDouble(report.median_deg) << '\n';
  for (const auto& [tau, value] : report.auc) {
    out << prefix << "AUC@" << ThresholdLabel(tau) << ' ' << FormatDouble(value)
        << '\n';
  }
}

struct EstimateFlags {
  std::string model;
  std::string matches;
  std::string calib;
  double threshold = 2.0;
  int k = 5;
  double mu = 0.7;
  int max_iters = 1000;
  double confidence = 0.999;
  std::string scoring = "msac";
  uint64_t seed = 0;
  std::string out;
  bool no_hashing = false;
  bool trace = false;
  bool no_timing = false;
};

int RunEstimate(const EstimateFlags& f, std::ostream& out, std::ostream& err) {
  const MatchPool pool = ReadFile<MatchPool>(f.matches, &ReadMatchPool);
  const Calibration calib = ReadFile<Calibration>(f.calib, &ReadCalibration);
  try {
    pool.Validate();
  } catch (const Error& e) {
    throw UsageError(f.matches + ": " + e.what());
  }

  EstimatorConfig config;
  config.epsilon = f.threshold;
  config.k = f.k;
  config.mu = f.mu;
  config.max_iterations = f.max_iters;
  config.confidence = f.confidence;
  config.scoring = f.scoring == "magsac" ? ScoringKind::kMagsacLike
                                         : ScoringKind::kTruncatedQuadratic;
  config.seed = f.seed;
  config.use_hashing = !f.no_hashing;
  config.record_trace = f.trace;
  const CameraSetup cameras{calib.K1, calib.K2, calib.v1, calib.v2};
  const ModelKind kind =
      f.model == "essential" ? ModelKind::kEssential : ModelKind::kHomography;

  const auto start = std::chrono::steady_clock::now();
  EstimationResult result;
  try {
    result = Estimate(pool, kind, cameras, config);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNoModelFound) {
      err << "error: " << e.what() << '\n';
      return kExitNoModel;
    }
    throw UsageError(e.what());
  }
  const double runtime =
      f.no_timing ? 0.0
                  : std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  Emit(f.out, out, [&](std::ostream& o) {
    WriteResult(o, result, runtime);
    if (f.trace) {
      o << "trace " << result.trace.size() << '\n';
      for (const auto& entry : result.trace) {
        o << entry.sample_index << ' ' << FormatDouble(entry.best_score) << '\n';
      }
    }
  });
  return kExitOk;
}

struct BenchFlags {
  std::string study;
  std::string solver;
  int trials = 10000;
  std::string noise_levels = "0,0.5,1,2";
  double outliers = 0.5;
  uint64_t seed = 0;
  std::string out;
  int threads = 1;
  bool no_timing = false;
  int k = 3;
  int points = 100;
  double image_noise = 1.0;
  double gravity_noise = 0.0;
  std::string thresholds = "1,2.5,5,10,20";
};

int RunBench(const BenchFlags& f, std::ostream& out) {
  const SolverKind solver = *ParseSolverKind(f.solver);
  std::ostringstream csv;
  if (f.study == "stability") {
    const StabilityReport report =
        RunStabilityStudy(solver, f.trials, f.seed, f.threads);
    csv << "bin_lo,bin_hi,count_rot,count_trans,failures\n";
    for (const auto& bin : report.bins) {
      csv << FormatDouble(bin.lo) << ',' << FormatDouble(bin.hi) << ','
          << bin.count_rotation << ',' << bin.count_translation << ','
          << report.failures << '\n';
    }
  } else if (f.study == "noise") {
    const auto levels = ParseFloatList(f.noise_levels, "--noise-levels");
    for (const double level : levels) {
      if (level < 0) throw UsageError("--noise-levels: negative level");
    }
    if (!std::is_sorted(levels.begin(), levels.end())) {
      throw UsageError("--noise-levels must be ascending");
    }
    const auto table =
        RunNoiseStudy(solver, levels, f.trials, f.seed, {}, f.threads);
    csv << "noise_px,mean_rot_deg,mean_trans_deg,stderr_rot,stderr_trans\n";
    for (const auto& row : table) {
      csv << FormatDouble(row.noise_px) << ',' << FormatDouble(row.mean_rotation_deg)
          << ',' << FormatDouble(row.mean_translation_deg) << ','
          << FormatDouble(row.stderr_rotation) << ','
          << FormatDouble(row.stderr_translation) << '\n';
    }
  } else {
    if (solver == SolverKind::kHomography4PC) {
      throw UsageError("--study e2e needs --solver 1acg-pose or 1acg-h");
    }
    if (!(f.outliers >= 0.0 && f.outliers < 1.0)) {
      throw UsageError("--outliers must lie in [0, 1)");
    }
    if (f.k > f.points) throw UsageError("--k exceeds --points");
    EndToEndOptions options;
    options.model = solver == SolverKind::kPose1ACG ? ModelKind::kEssential
                                                    : ModelKind::kHomography;
    options.num_points = f.points;
    options.k = f.k;
    options.outlier_ratio = f.outliers;
    options.image_noise_px = f.image_noise;
    options.max_gravity_noise_deg = f.gravity_noise;
    const auto thresholds = ParseFloatList(f.thresholds, "--thresholds");
    const auto trials = RunEndToEndStudy(options, f.trials, f.seed, f.threads);
    csv << "trial,rot_deg,trans_deg,inliers,iters,runtime_s\n";
    std::vector<TrialOutcome> outcomes;
    const double inf = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < trials.size(); ++i) {
      const auto& t = trials[i];
      const double runtime = f.no_timing ? 0.0 : t.runtime_s;
      csv << i << ',' << FormatDouble(t.failed ? inf : t.rotation_deg) << ','
          << FormatDouble(t.failed ? inf : t.translation_deg) << ','
          << t.inliers << ',' << t.iterations << ',' << FormatDouble(runtime)
          << '\n';
      TrialOutcome outcome;
      if (!t.failed) outcome.error_deg = std::max(t.rotation_deg, t.translation_deg);
      outcome.inliers = t.inliers;
      outcome.runtime_s = runtime;
      outcomes.push_back(outcome);
    }
    WriteSummary(csv, Aggregate(outcomes, thresholds), "# ");
  }
  Emit(f.out, out, [&](std::ostream& o) { o << csv.str(); });
  return kExitOk;
}

int RunEval(const std::string& errors_path, const std::string& thresholds,
            std::ostream& out) {
  const auto taus = ParseFloatList(thresholds, "--thresholds");
  for (const double tau : taus) {
    if (!(tau > 0)) throw UsageError("--thresholds must be positive");
  }
  std::ifstream in(errors_path);
  if (!in) throw UsageError("cannot open '" + errors_path + "'");
  std::vector<double> errors;
  try {
    errors = ReadErrors(in);
  } catch (const Error& e) {
    throw UsageError(errors_path + ": " + e.what());
  }
  WriteSummary(out, AggregateErrors(errors, taus), "");
  return kExitOk;
}

struct MakePoolFlags {
  std::string model = "homography";
  int points = 100;
  int k = 3;
  double outliers = 0.0;
  double image_noise = 0.0;
  double gravity_noise = 0.0;
  double affine_noise = 0.0;
  uint64_t seed = 0;
  std::string matches_out;
  std::string calib_out;
};

int RunMakePool(const MakePoolFlags& f, std::ostream& out) {
  if (f.k > f.points) throw UsageError("--k exceeds --points");
  std::mt19937_64 rng(f.seed);
  SceneParams params;
  params.num_points = f.points;
  params.planar = f.model == "homography";
  NoiseConfig noise;
  noise.image_noise_px = f.image_noise;
  noise.gravity_noise_deg = f.gravity_noise;
  noise.affine_noise_px = f.affine_noise;
  noise.outlier_ratio = f.outliers;
  noise.pool_k = f.k;
  SyntheticScene scene;
  CorruptedScene data;
  try {
    scene = GenerateScene(params, rng);
    data = Corrupt(scene, noise, rng);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  Emit(f.matches_out, out, [&](std::ostream& o) { WriteMatchPool(o, data.pool); });
  Emit(f.calib_out, out, [&](std::ostream& o) {
    WriteCalibration(o, {scene.K1, scene.K2, data.v1, data.v2});
  });
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Joint feature matching and robust two-view estimation from "
               "one-to-many affine correspondence pools."};
  app.name("affineglue");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  EstimateFlags est;
  auto* estimate = app.add_subcommand("estimate", "Estimate a model from a match pool");
  estimate->add_option("--model", est.model, "Model kind")
      ->required()
      ->check(CLI::IsMember({"essential", "homography"}));
  estimate->add_option("--matches", est.matches, "Match pool file")->required();
  estimate->add_option("--calib", est.calib, "Calibration file")->required();
  estimate->add_option("--threshold", est.threshold, "Inlier threshold in pixels")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  estimate->add_option("--k", est.k, "Candidates per source point")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  estimate->add_option("--mu", est.mu, "Score ratio filter")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--max-iters", est.max_iters, "Iteration cap")
      ->capture_default_str()
      ->check(CLI::Range(1, std::numeric_limits<int>::max()));
  estimate->add_option("--confidence", est.confidence, "Termination confidence")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--scoring", est.scoring, "Scoring function")
      ->capture_default_str()
      ->check(CLI::IsMember({"msac", "magsac"}));
  estimate->add_option("--seed", est.seed, "Random seed")->capture_default_str();
  estimate->add_option("--out", est.out, "Result file (default: stdout)");
  estimate->add_flag("--no-hashing", est.no_hashing, "Disable grid hashing");
  estimate->add_flag("--trace", est.trace, "Append the per-iteration score trace");
  estimate->add_flag("--no-timing", est.no_timing,
                     "Report runtime_s as 0 for byte-stable output");

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Run a synthetic benchmark study");
  bench->add_option("--study", bench_flags.study, "Study")
      ->required()
      ->check(CLI::IsMember({"stability", "noise", "e2e"}));
  bench->add_option("--solver", bench_flags.solver, "Solver")
      ->required()
      ->check(CLI::IsMember({"1acg-pose", "1acg-h", "4pc"}));
  bench->add_option("--trials", bench_flags.trials, "Trials")
      ->capture_default_str()
      ->check(CLI::Range(1, std::numeric_limits<int>::max()));
  bench->add_option("--noise-levels", bench_flags.noise_levels,
                    "Image noise levels in pixels (noise study)")
      ->capture_default_str();
  bench->add_option("--outliers", bench_flags.outliers, "Outlier ratio (e2e)")
      ->capture_default_str();
  bench->add_option("--seed", bench_flags.seed, "Master seed")->capture_default_str();
  bench->add_option("--out", bench_flags.out, "CSV file (default: stdout)");
  bench->add_option("--threads", bench_flags.threads, "Worker threads")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));
  bench->add_flag("--no-timing", bench_flags.no_timing,
                  "Report runtime_s as 0 for byte-stable output");
  bench->add_option("--k", bench_flags.k, "Pool width (e2e)")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  bench->add_option("--points", bench_flags.points, "Source points (e2e)")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  bench->add_option("--image-noise", bench_flags.image_noise,
                    "Image noise in pixels (e2e)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--gravity-noise", bench_flags.gravity_noise,
                    "Max gravity perturbation in degrees (e2e)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--thresholds", bench_flags.thresholds,
                    "AUC thresholds in degrees (e2e summary)")
      ->capture_default_str();

  std::string errors_path;
  std::string eval_thresholds = "1,2.5,5,10,20";
  auto* eval = app.add_subcommand("eval", "Summarize per-pair pose errors");
  eval->add_option("--errors", errors_path, "File with one error per row")
      ->required();
  eval->add_option("--thresholds", eval_thresholds, "AUC thresholds")
      ->capture_default_str();

  MakePoolFlags mp;
  auto* make_pool = app.add_subcommand(
      "make-pool", "Write a synthetic match pool and calibration");
  make_pool->add_option("--model", mp.model, "Scene kind")
      ->capture_default_str()
      ->check(CLI::IsMember({"essential", "homography"}));
  make_pool->add_option("--points", mp.points, "Source points")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  make_pool->add_option("--k", mp.k, "Pool width")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  make_pool->add_option("--outliers", mp.outliers, "Outlier ratio")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  make_pool->add_option("--image-noise", mp.image_noise, "Pixel noise")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  make_pool->add_option("--gravity-noise", mp.gravity_noise, "Gravity noise (deg)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  make_pool->add_option("--affine-noise", mp.affine_noise, "Affine noise (px)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  make_pool->add_option("--seed", mp.seed, "Seed")->capture_default_str();
  make_pool->add_option("--matches-out", mp.matches_out, "Match pool file")
      ->required();
  make_pool->add_option("--calib-out", mp.calib_out, "Calibration file")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (estimate->parsed()) return RunEstimate(est, out, err);
    if (bench->parsed()) return RunBench(bench_flags, out);
    if (eval->parsed()) return RunEval(errors_path, eval_thresholds, out);
    if (make_pool->parsed()) return RunMakePool(mp, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace affineglue
