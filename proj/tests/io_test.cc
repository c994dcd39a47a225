#include "affineglue/io.h"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "affineglue/errors.h"
#include "affineglue/synth.h"

namespace affineglue {
namespace {

// Runs `fn` and returns the message of the expected kParseError.
template <typename Fn>
std::string ParseErrorOf(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParseError) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return "";
}

TEST(FormatDouble, RoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> exponent(-300, 300);
  std::uniform_real_distribution<double> mantissa(-1, 1);
  for (int i = 0; i < 10000; ++i) {
    const double v = mantissa(rng) * std::pow(10.0, exponent(rng));
    double parsed;
    ASSERT_TRUE(ParseDouble(FormatDouble(v), &parsed));
    EXPECT_EQ(parsed, v);
  }
  EXPECT_EQ(FormatDouble(0.5), "0.5");
  double parsed;
  ASSERT_TRUE(ParseDouble(FormatDouble(std::numeric_limits<double>::infinity()), &parsed));
  EXPECT_TRUE(std::isinf(parsed));
  ASSERT_TRUE(ParseDouble("nan", &parsed));
  EXPECT_TRUE(std::isnan(parsed));
  EXPECT_FALSE(ParseDouble("1.5x", &parsed));
  EXPECT_FALSE(ParseDouble("", &parsed));
  EXPECT_FALSE(ParseDouble("abc", &parsed));
}

MatchPool SyntheticPool(uint64_t seed) {
  std::mt19937_64 rng(seed);
  SceneParams params;
  params.num_points = 30;
  const SyntheticScene scene = GenerateScene(params, rng);
  NoiseConfig noise;
  noise.pool_k = 3;
  noise.image_noise_px = 1.0;
  noise.outlier_ratio = 0.3;
  MatchPool pool = Corrupt(scene, noise, rng).pool;
  // One point-only candidate.
  pool.candidates[2][1].A.reset();
  return pool;
}

TEST(MatchPool, RoundTrip) {
  const MatchPool pool = SyntheticPool(2);
  std::stringstream ss;
  WriteMatchPool(ss, pool);
  const MatchPool back = ReadMatchPool(ss);
  ASSERT_EQ(back.source_points.size(), pool.source_points.size());
  EXPECT_EQ(back.k, pool.k);
  for (size_t i = 0; i < pool.source_points.size(); ++i) {
    EXPECT_EQ(back.source_points[i], pool.source_points[i]);
    ASSERT_EQ(back.candidates[i].size(), pool.candidates[i].size());
    for (size_t r = 0; r < pool.candidates[i].size(); ++r) {
      const MatchCandidate& a = pool.candidates[i][r];
      const MatchCandidate& b = back.candidates[i][r];
      EXPECT_EQ(a.p2, b.p2);
      EXPECT_EQ(a.score, b.score);
      ASSERT_EQ(a.A.has_value(), b.A.has_value());
      if (a.A) EXPECT_EQ(*a.A, *b.A);
    }
  }
  // Shared targets keep a shared index after the round trip.
  for (size_t i = 0; i < pool.source_points.size(); ++i) {
    for (size_t j = 0; j < pool.source_points.size(); ++j) {
      for (size_t r = 0; r < pool.candidates[i].size(); ++r) {
        for (size_t s = 0; s < pool.candidates[j].size(); ++s) {
          const bool same = pool.candidates[i][r].p2 == pool.candidates[j][s].p2;
          EXPECT_EQ(back.candidates[i][r].target_index ==
                        back.candidates[j][s].target_index,
                    same);
        }
      }
    }
  }
  // Writing again is byte-identical.
  std::stringstream again;
  WriteMatchPool(again, back);
  std::stringstream first;
  WriteMatchPool(first, pool);
  EXPECT_EQ(again.str(), first.str());
}

TEST(MatchPool, Errors) {
  const std::string good = "0 1 2 3 4 1 0 0 1 0.9\n";
  {
    std::istringstream in("# header\n" + good + "0 1 2 3\n");
    EXPECT_NE(ParseErrorOf([&] { ReadMatchPool(in); }).find("line 3"), std::string::npos);
  }
  {
    std::istringstream in(good + "0 1 2 5 6 1 0 0 1 0.95\n");
    EXPECT_NE(ParseErrorOf([&] { ReadMatchPool(in); }).find("line 2"), std::string::npos);
  }
  {
    std::istringstream in(good + "2 1 2 5 6 1 0 0 1 0.9\n");
    EXPECT_NE(ParseErrorOf([&] { ReadMatchPool(in); }).find("line 2"), std::string::npos);
  }
  {
    std::istringstream in(good + "\n0 1 2 5 6 nan 0 0 1 0.5\n");
    EXPECT_NE(ParseErrorOf([&] { ReadMatchPool(in); }).find("line 3"), std::string::npos);
  }
  {
    std::istringstream in("0 1 2 3 4 1 0 0 1 x\n");
    EXPECT_NE(ParseErrorOf([&] { ReadMatchPool(in); }).find("line 1"), std::string::npos);
  }
}

TEST(MatchPool, PointOnlyCandidate) {
  std::istringstream in("0 1 2 3 4 nan nan nan nan 0.9\n");
  const MatchPool pool = ReadMatchPool(in);
  ASSERT_EQ(pool.candidates.size(), 1u);
  EXPECT_FALSE(pool.candidates[0][0].A);
}

TEST(Calibration, RoundTrip) {
  Calibration c;
  c.K1 = CameraIntrinsics::FromFocal(800.0);
  c.K2 = CameraIntrinsics::FromFocal(1200.0);
  c.v1 = GravityDirection(Eigen::Vector3d(0.1, 0.9, 0.2).normalized());
  c.v2 = GravityDirection(Eigen::Vector3d(-0.3, 0.8, 0.1).normalized());
  std::stringstream ss;
  WriteCalibration(ss, c);
  const Calibration back = ReadCalibration(ss);
  EXPECT_EQ(back.K1.K(), c.K1.K());
  EXPECT_EQ(back.K2.K(), c.K2.K());
  EXPECT_EQ(back.v1.vector(), c.v1.vector());
  EXPECT_EQ(back.v2.vector(), c.v2.vector());
}

TEST(Calibration, Errors) {
  std::istringstream short_row("1 0 0 0 1 0 0 0\n1 0 0 0 1 0 0 0 1\n");
  EXPECT_NE(ParseErrorOf([&] { ReadCalibration(short_row); }).find("line 1"),
            std::string::npos);
  std::istringstream bad("1 0 0 0 1 0 0 0 1\n1 0 0 0 1 0 0 0 1\n0 1 0\n");
  EXPECT_THROW(ReadCalibration(bad), Error);
}

TEST(Result, RoundTrip) {
  EstimationResult result;
  Eigen::Matrix3d H;
  H << 1.1, 0.01, 3, -0.02, 0.9, 4, 1e-4, 2e-4, 1;
  RelativePose pose{Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.6, 0.0, 0.8)};
  result.model = ModelHypothesis::Homography(H, pose, Eigen::Vector3d(0, 0, 0.25));
  result.score = 12.25;
  result.matches = {{0, 0, 3, 0.125}, {4, 2, 7, 1.5}};
  result.iterations_run = 42;
  result.lo_runs = 6;
  std::stringstream ss;
  WriteResult(ss, result, 0.0);
  const ResultRecord back = ReadResult(ss);
  EXPECT_EQ(back.model.kind, ModelKind::kHomography);
  EXPECT_EQ(back.model.M, result.model.M);
  ASSERT_TRUE(back.model.pose);
  EXPECT_EQ(back.model.pose->t, pose.t);
  ASSERT_TRUE(back.model.plane_normal);
  EXPECT_EQ(*back.model.plane_normal, Eigen::Vector3d(0, 0, 0.25));
  EXPECT_EQ(back.score, 12.25);
  ASSERT_EQ(back.matches.size(), 2u);
  EXPECT_EQ(back.matches[1].source_index, 4);
  EXPECT_EQ(back.matches[1].candidate_rank, 2);
  EXPECT_EQ(back.matches[1].residual, 1.5);
  EXPECT_EQ(back.iterations, 42);
  EXPECT_EQ(back.lo_runs, 6);
}

TEST(Result, EssentialWithoutPose) {
  EstimationResult result;
  result.model = ModelHypothesis::Essential(Eigen::Matrix3d::Identity());
  std::stringstream ss;
  WriteResult(ss, result, 0.5);
  const ResultRecord back = ReadResult(ss);
  EXPECT_EQ(back.model.kind, ModelKind::kEssential);
  EXPECT_FALSE(back.model.pose);
  EXPECT_TRUE(back.matches.empty());
  EXPECT_EQ(back.runtime_s, 0.5);
}

TEST(Result, Truncated) {
  EstimationResult result;
  result.model = ModelHypothesis::Essential(Eigen::Matrix3d::Identity());
  result.matches = {{0, 0, 0, 0.5}};
  std::stringstream ss;
  WriteResult(ss, result, 0.0);
  const std::string text = ss.str();
  std::istringstream cut(text.substr(0, text.find("iterations")));
  EXPECT_THROW(ReadResult(cut), Error);
}

TEST(ReadErrors, Examples) {
  std::istringstream in("error\n# comment\n0.5\ninf\n\n2,\n");
  const std::vector<double> e = ReadErrors(in);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0], 0.5);
  EXPECT_TRUE(std::isinf(e[1]));
  EXPECT_EQ(e[2], 2.0);

  std::istringstream bad("0.5\n1.0\nabc\n");
  const std::string message = ParseErrorOf([&] { ReadErrors(bad); });
  EXPECT_NE(message.find("row 3"), std::string::npos);
  EXPECT_NE(message.find("abc"), std::string::npos);

  std::istringstream negative("-1\n");
  EXPECT_THROW(ReadErrors(negative), Error);

  std::istringstream empty("error\n# nothing\n");
  try {
    ReadErrors(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyInput);
  }
}

}  // namespace
}  // namespace affineglue
