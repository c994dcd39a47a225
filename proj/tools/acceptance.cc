// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Exits 0 once every criterion has been evaluated, whatever the verdicts.
// An optional argument names a file that receives a copy of the lines.

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "affineglue/cli.h"
#include "affineglue/errors.h"
#include "affineglue/estimator.h"
#include "affineglue/geometry.h"
#include "affineglue/metrics.h"
#include "affineglue/polynomial.h"
#include "affineglue/solvers.h"
#include "affineglue/synth.h"
#include "testing/oracles.h"
#include "testing/scenes.h"
#include "testing/test_util.h"

namespace affineglue {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Format(const char* fmt, ...) {
  char buffer[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buffer, sizeof(buffer), fmt, args);
  va_end(args);
  return buffer;
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// End-to-end trials shared by criteria 4-6 and checked again by 8.
std::vector<EndToEndTrial> g_e2e_trials;

Verdict SolverStability() {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kTrials = 10000;
  std::string detail;
  bool pass = true;
  for (const SolverKind solver : {SolverKind::kPose1ACG, SolverKind::kHomography1ACG}) {
    const StabilityReport report = RunStabilityStudy(solver, kTrials, 1);
    int stable = 0;
    for (const auto& t : report.trials) {
      stable += !t.failed && t.rotation_deg < 1e-4 && t.translation_deg < 1e-4;
    }
    const double rate = static_cast<double>(stable) / kTrials;
    const double failure_rate = static_cast<double>(report.failures) / kTrials;
    pass &= rate >= 0.99 && failure_rate < 0.001;
    detail += Format("%s stable %.2f%% failed %.2f%%; ", SolverKindName(solver).c_str(),
                     100 * rate, 100 * failure_rate);
  }
  const double elapsed = Seconds(start);
  pass &= elapsed < 60.0;
  return {pass, detail + Format("%.1f s", elapsed)};
}

Verdict NoiseMonotonicity() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> levels = {0.0, 0.5, 1.0, 2.0};
  bool pass = true;
  std::string detail;
  for (const SolverKind solver : {SolverKind::kPose1ACG, SolverKind::kHomography1ACG}) {
    const auto stats =
        RunNoiseStudy(solver, levels, 1000, 2, NoiseStudyOptions{0.1, 0.5});
    detail += SolverKindName(solver) + " rot";
    for (const auto& s : stats) detail += Format(" %.3g", s.mean_rotation_deg);
    detail += " trans";
    for (const auto& s : stats) detail += Format(" %.3g", s.mean_translation_deg);
    detail += "; ";
    for (size_t i = 1; i < stats.size(); ++i) {
      pass &= stats[i].mean_rotation_deg + stats[i].stderr_rotation >=
              stats[i - 1].mean_rotation_deg;
      pass &= stats[i].mean_translation_deg + stats[i].stderr_translation >=
              stats[i - 1].mean_translation_deg;
    }
  }
  const double elapsed = Seconds(start);
  pass &= elapsed < 30.0;
  return {pass, detail + Format("%.1f s", elapsed)};
}

Verdict CanonicalInstance() {
  const AffineCorrespondence ac{ImagePoint(0, 0), ImagePoint(-1, 0),
                                Eigen::Matrix2d::Identity()};
  const GravityDirection down = GravityDirection::Down();
  Eigen::Matrix3d H_expected = Eigen::Matrix3d::Identity();
  H_expected(0, 2) = -1.0;
  H_expected = NormalizeHomographyScale(H_expected);
  try {
    const SolverOutput out = SolveHomography1ACGravity(ac, down, down);
    double best_h = kInf, best_pose = kInf;
    for (const auto& model : out.homographies) {
      best_h = std::min(best_h, (model.M - H_expected).cwiseAbs().maxCoeff());
      if (model.pose) {
        best_pose = std::min(
            best_pose,
            ComputePoseError({Eigen::Matrix3d::Identity(), Eigen::Vector3d::UnitX()},
                             *model.pose, TranslationSign::kFolded)
                .combined_deg);
      }
    }
    return {best_h < 1e-9 && best_pose < 1e-6,
            Format("H entry error %.3g, pose error %.3g deg", best_h, best_pose)};
  } catch (const Error& e) {
    return {false, std::string(e.what()) +
                       " (the point lies in the plane of the motion, so a "
                       "one-parameter family of exact solutions exists)"};
  }
}

Verdict EndToEndHomography() {
  EndToEndOptions options;
  options.model = ModelKind::kHomography;
  const auto trials = RunEndToEndStudy(options, 200, 4);
  int good = 0;
  double max_runtime = 0.0, total_runtime = 0.0;
  for (const auto& t : trials) {
    good += !t.failed && t.transfer_error_px < 3.0;
    max_runtime = std::max(max_runtime, t.runtime_s);
    total_runtime += t.runtime_s;
  }
  g_e2e_trials.insert(g_e2e_trials.end(), trials.begin(), trials.end());
  const double rate = good / 200.0;
  return {rate >= 0.95 && max_runtime < 0.1,
          Format("%d/200 under 3 px (%.1f%%), runtime mean %.4f s max %.4f s", good,
                 100 * rate, total_runtime / 200, max_runtime)};
}

Verdict EndToEndEssential() {
  EndToEndOptions options;
  options.model = ModelKind::kEssential;
  options.max_gravity_noise_deg = 10.0;
  const auto trials = RunEndToEndStudy(options, 200, 5);
  int good = 0;
  double max_runtime = 0.0;
  std::vector<double> rotation;
  for (const auto& t : trials) {
    good += !t.failed && t.rotation_deg < 2.0;
    max_runtime = std::max(max_runtime, t.runtime_s);
    rotation.push_back(t.failed ? kInf : t.rotation_deg);
  }
  g_e2e_trials.insert(g_e2e_trials.end(), trials.begin(), trials.end());
  const double rate = good / 200.0;
  return {rate >= 0.95, Format("%d/200 under 2 deg (%.1f%%), median rotation %.3g deg, "
                               "max runtime %.4f s",
                               good, 100 * rate, LowerMedian(rotation), max_runtime)};
}

Verdict OneToManyAdvantage() {
  EndToEndOptions options;
  options.model = ModelKind::kEssential;
  options.k = 3;
  options.top_rank_probability = 0.6;
  constexpr int kTrials = 200;
  std::vector<double> wide, narrow;
  int wins = 0, losses = 0;
  for (int i = 0; i < kTrials; ++i) {
    const uint64_t seed = TrialSeed(6, i);
    const EndToEndTrial a = RunEndToEndTrial(options, seed);
    const EndToEndTrial b = RunEndToEndTrial(options, seed, 1);
    g_e2e_trials.push_back(a);
    g_e2e_trials.push_back(b);
    const double ea = a.failed ? kInf : std::max(a.rotation_deg, a.translation_deg);
    const double eb = b.failed ? kInf : std::max(b.rotation_deg, b.translation_deg);
    wide.push_back(ea);
    narrow.push_back(eb);
    wins += ea < eb;
    losses += eb < ea;
  }
  const double auc_wide = Auc(wide, 5.0), auc_narrow = Auc(narrow, 5.0);
  // Two-sided exact sign test over the untied pairs.
  const int n = wins + losses;
  const boost::math::binomial_distribution<double> null(n, 0.5);
  const int extreme = std::max(wins, losses);
  const double p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(
                                           null, static_cast<double>(extreme - 1))));
  return {auc_wide > auc_narrow && wins > losses && p < 0.01,
          Format("AUC@5 k=3 %.4f vs k=1 %.4f, wins %d losses %d, sign test p=%.3g",
                 auc_wide, auc_narrow, wins, losses, p)};
}

Verdict OracleEquivalences() {
  std::string detail;
  bool pass = true;

  // (a) determinant polynomial against the numeric determinant.
  {
    std::mt19937_64 rng(71);
    double worst = 0.0;
    for (int scene = 0; scene < 100; ++scene) {
      const auto data = testing::MakeCalibratedScene(7100 + scene, scene % 2 == 0, 1);
      const auto problem = BuildGravityProblem(data.acs[0], data.scene.v1, data.scene.v2);
      const Degree6Polynomial poly = DeterminantPolynomial(problem);
      for (int i = 0; i < 100; ++i) {
        const double x = testing::Uniform(rng, -3.0, 3.0);
        const Eigen::Matrix3d M = HiddenVariableMatrix(problem, x);
        const double scale = std::pow(M.norm(), 3);
        worst = std::max(worst, std::abs(poly.Evaluate(x) - M.determinant()) / scale);
      }
    }
    pass &= worst < 1e-9;
    detail += Format("(a) %.2g", worst);
  }

  // (b) companion roots against bisection.
  {
    std::mt19937_64 rng(72);
    double worst = 0.0;
    int mismatched = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int pairs = static_cast<int>(testing::Uniform(rng, 0.0, 3.999));
      std::vector<double> real;
      while (static_cast<int>(real.size()) < 6 - 2 * pairs) {
        const double r = testing::Uniform(rng, -4.0, 4.0);
        bool separated = true;
        for (const double s : real) separated &= std::abs(s - r) > 0.05;
        if (separated) real.push_back(r);
      }
      std::vector<std::pair<double, double>> quadratics;
      for (int i = 0; i < pairs; ++i) {
        const double b = testing::Uniform(rng, -4.0, 4.0);
        quadratics.emplace_back(b, b * b / 4.0 + testing::Uniform(rng, 0.5, 4.0));
      }
      const Degree6Polynomial p =
          testing::FromRoots(real, quadratics, testing::Uniform(rng, 0.5, 2.0));
      const std::vector<double> oracle = testing::BisectionRoots(p, 5.0);
      std::vector<double> roots;
      try {
        roots = RealRoots(p);
      } catch (const Error&) {
      }
      if (roots.size() != oracle.size()) {
        ++mismatched;
        continue;
      }
      for (size_t i = 0; i < roots.size(); ++i) {
        worst = std::max(worst, std::abs(roots[i] - oracle[i]) /
                                    std::max(1.0, std::abs(oracle[i])));
      }
    }
    pass &= worst < 1e-8 && mismatched == 0;
    detail += Format(", (b) %.2g with %d count mismatches", worst, mismatched);
  }

  // (c) guided matching with and without the grid.
  {
    std::mt19937_64 rng(73);
    int identical = 0;
    for (uint64_t scene = 0; scene < 100; ++scene) {
      const bool planar = scene % 2 == 0;
      const auto c = testing::MakePoolCase(7300 + scene, planar, 3, 0.4, 1.0);
      const Eigen::Matrix3d dR =
          Eigen::AngleAxisd(0.002, testing::RandomUnit(rng)).toRotationMatrix();
      const RelativePose pose =
          RelativePose::Make(dR * c.scene.pose_gt.R, c.scene.pose_gt.t);
      const ModelHypothesis model =
          planar ? ModelHypothesis::Homography(PlaneHomography(pose, *c.scene.plane))
                 : ModelHypothesis::Essential(ComposeEssential(pose));
      EstimatorConfig config = CalibratedConfig(EstimatorConfig{}, c.cameras);
      config.use_hashing = true;
      const GuidedMatchingResult hashed = GuidedMatching(model, c.pool, config);
      config.use_hashing = false;
      const GuidedMatchingResult plain = GuidedMatching(model, c.pool, config);
      bool same = hashed.score == plain.score &&
                  hashed.matches.size() == plain.matches.size();
      for (size_t i = 0; same && i < plain.matches.size(); ++i) {
        same = hashed.matches[i].source_index == plain.matches[i].source_index &&
               hashed.matches[i].candidate_rank == plain.matches[i].candidate_rank &&
               hashed.matches[i].residual == plain.matches[i].residual;
      }
      identical += same;
    }
    pass &= identical == 100;
    detail += Format(", (c) %d/100 identical", identical);
  }

  // (d) exact affine against central differences of the plane transfer.
  {
    double worst = 0.0;
    int checked = 0;
    for (uint64_t seed = 0; checked < 1000; ++seed) {
      std::mt19937_64 rng(7400 + seed);
      SceneParams params;
      params.planar = seed % 2 == 0;
      params.num_points = 1;
      const SyntheticScene s = GenerateScene(params, rng);
      const ScenePlane plane = s.tangent_planes[0];
      const ImagePoint p1 = s.correspondences[0].p1;
      const auto transfer = [&](const ImagePoint& p) {
        const Eigen::Vector3d ray = Homogeneous(NormalizePoint(p, s.K1));
        const Eigen::Vector3d X = plane.d / plane.n.dot(ray) * ray;
        return DenormalizePoint(s.pose_gt.Transform(X).hnormalized(), s.K2);
      };
      Eigen::Matrix2d A;
      try {
        A = ExactAffine(s, plane, p1);
      } catch (const Error&) {
        continue;
      }
      Eigen::Matrix2d fd;
      const double h = 1e-3;
      for (int j = 0; j < 2; ++j) {
        const ImagePoint e = ImagePoint::Unit(j) * h;
        fd.col(j) = (transfer(p1 + e) - transfer(p1 - e)) / (2 * h);
      }
      worst = std::max(worst, (A - fd).norm() / A.norm());
      ++checked;
    }
    pass &= worst < 1e-7;
    detail += Format(", (d) %.2g", worst);
  }
  return {pass, detail};
}

Verdict InvariantSuites() {
  constexpr int kCases = 1000;
  std::vector<std::string> broken;
  auto check = [&broken](const std::string& name, const std::function<bool(int)>& body) {
    int failures = 0;
    for (int i = 0; i < kCases; ++i) failures += !body(i);
    if (failures > 0) broken.push_back(Format("%s %d", name.c_str(), failures));
  };
  std::mt19937_64 rng(81);

  check("essential-singular-values", [&](int) {
    const RelativePose pose = RelativePose::Make(testing::RandomRotation(rng, M_PI),
                                                 testing::RandomUnit(rng));
    const Eigen::Vector3d sv =
        ModelHypothesis::Essential(ComposeEssential(pose)).M.jacobiSvd().singularValues();
    return std::abs(sv(0) - 1) < 1e-12 && std::abs(sv(1) - 1) < 1e-12 && sv(2) < 1e-12;
  });
  check("homography-normalization", [&](int) {
    Eigen::Matrix3d H = Eigen::Matrix3d::Random() + 2 * Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d M = ModelHypothesis::Homography(H).M;
    Eigen::Index r, c;
    M.cwiseAbs().maxCoeff(&r, &c);
    return std::abs(M.norm() - 1) < 1e-12 && M(r, c) > 0;
  });
  check("real-roots-residual", [&](int) {
    Degree6Polynomial p;
    for (auto& c : p.coeffs) c = testing::Uniform(rng, -1, 1);
    std::vector<double> roots;
    try {
      roots = RealRoots(p);
    } catch (const Error&) {
      return true;
    }
    for (const double r : roots) {
      double scale = 0.0;
      for (int i = 0; i < 7; ++i) scale += std::abs(p.coeffs[i]) * std::pow(std::abs(r), i);
      if (std::abs(p.Evaluate(r)) > 1e-9 * scale) return false;
    }
    return std::is_sorted(roots.begin(), roots.end());
  });
  check("scene-cheirality-gravity", [&](int i) {
    const auto data = testing::MakeCalibratedScene(8100 + i, i % 2 == 0, 10);
    const SyntheticScene& s = data.scene;
    if ((s.v2.vector() - s.pose_gt.R * s.v1.vector()).norm() > 1e-12) return false;
    for (const auto& X : s.points3d) {
      if (X.z() <= 0 || s.pose_gt.Transform(X).z() <= 0) return false;
    }
    return true;
  });
  check("guided-matching-one-to-one", [&](int i) {
    const bool planar = i % 2 == 0;
    const auto c = testing::MakePoolCase(8200 + i, planar, 3, 0.4, 1.0, 30);
    const EstimatorConfig config = CalibratedConfig(EstimatorConfig{}, c.cameras);
    const auto result = GuidedMatching(testing::TruthModel(c, planar), c.pool, config);
    std::set<int> sources, targets;
    for (const auto& m : result.matches) {
      if (!sources.insert(m.source_index).second) return false;
      if (!targets.insert(m.target_index).second) return false;
      if (!(m.residual < config.epsilon)) return false;
    }
    return std::is_sorted(result.matches.begin(), result.matches.end(),
                          [](const FinalMatch& a, const FinalMatch& b) {
                            return a.source_index < b.source_index;
                          });
  });
  check("auc-bounded-monotone", [&](int) {
    std::vector<double> errors(1 + rng() % 20);
    for (auto& e : errors) e = rng() % 10 == 0 ? kInf : testing::Uniform(rng, 0, 30);
    double previous = 0.0;
    for (const double tau : {1.0, 2.5, 5.0, 10.0, 20.0}) {
      const double auc = Auc(errors, tau);
      if (auc < previous - 1e-15 || auc < 0 || auc > 1) return false;
      previous = auc;
    }
    return true;
  });

  int reproducible = 0, monotone = 0;
  for (const auto& t : g_e2e_trials) {
    reproducible += t.score_reproducible;
    monotone += t.score_monotone;
  }
  const int n = static_cast<int>(g_e2e_trials.size());
  std::string detail = Format("6 suites x %d cases, e2e score reproducible %d/%d, "
                              "monotone %d/%d",
                              kCases, reproducible, n, monotone, n);
  for (const auto& b : broken) detail += "; broken: " + b;
  return {broken.empty() && reproducible == n && monotone == n && n > 0, detail};
}

std::string RunCliText(const std::vector<std::string>& args, int* code) {
  std::ostringstream out, err;
  *code = RunCli(args, out, err);
  return out.str();
}

Verdict CliGolden() {
  const std::string data = AFFINEGLUE_TEST_DATA_DIR;
  std::ifstream golden_file(data + "/planar_result.txt");
  std::stringstream golden;
  golden << golden_file.rdbuf();

  bool fixture_ok = true;
  int code = 0;
  const std::vector<std::string> estimate = {
      "estimate", "--model", "homography", "--matches", data + "/planar_pool.txt",
      "--calib", data + "/planar_calib.txt", "--no-timing"};
  for (int repeat = 0; repeat < 3; ++repeat) {
    fixture_ok &= RunCliText(estimate, &code) == golden.str() && code == kExitOk;
  }

  int stable_benches = 0;
  const std::vector<std::vector<std::string>> benches = {
      {"bench", "--study", "stability", "--solver", "1acg-pose", "--trials", "500"},
      {"bench", "--study", "noise", "--solver", "1acg-h", "--trials", "200"},
      {"bench", "--study", "e2e", "--solver", "1acg-h", "--trials", "8", "--no-timing"}};
  for (const auto& bench : benches) {
    const std::string reference = RunCliText(bench, &code);
    bool stable = code == kExitOk && !reference.empty();
    stable &= RunCliText(bench, &code) == reference;
    for (const std::string threads : {"2", "4"}) {
      std::vector<std::string> args = bench;
      args.insert(args.end(), {"--threads", threads});
      stable &= RunCliText(args, &code) == reference;
    }
    stable_benches += stable;
  }
  return {fixture_ok && stable_benches == static_cast<int>(benches.size()),
          Format("fixture %s over 3 runs, %d/%zu bench studies byte-stable over "
                 "repeats and 1/2/4 threads",
                 fixture_ok ? "identical to golden" : "differs from golden",
                 stable_benches, benches.size())};
}

}  // namespace
}  // namespace affineglue

int main(int argc, char** argv) {
  using namespace affineglue;
  // Optional report file receiving the same lines as stdout.
  std::ofstream report;
  if (argc > 1) report.open(argv[1]);
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, SolverStability},    {2, NoiseMonotonicity},  {3, CanonicalInstance},
      {4, EndToEndHomography}, {5, EndToEndEssential},  {6, OneToManyAdvantage},
      {7, OracleEquivalences}, {8, InvariantSuites},    {9, CliGolden}};
  int passed = 0;
  for (const auto& [index, run] : criteria) {
    Verdict verdict;
    try {
      verdict = run();
    } catch (const std::exception& e) {
      verdict = {false, std::string("exception: ") + e.what()};
    }
    passed += verdict.pass;
    const std::string line = Format("criterion %d: %s  ", index,
                                    verdict.pass ? "PASS" : "FAIL") +
                             verdict.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (report) report << line << std::endl;
  }
  const std::string summary = Format("%d/%zu criteria passed", passed, criteria.size());
  std::printf("%s\n", summary.c_str());
  if (report) report << summary << '\n';
  return 0;
}
