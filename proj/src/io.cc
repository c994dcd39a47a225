#include "affineglue/io.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "affineglue/errors.h"

namespace affineglue {
namespace {

[[noreturn]] void Fail(int line, const std::string& what) {
  throw Error(ErrorKind::kParseError, "line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> Tokenize(const std::string& line) {
  std::istringstream stream(line);
  std::vector<std::string> tokens;
  std::string token;
  while (stream >> token) tokens.push_back(token);
  return tokens;
}

bool IsSkippable(const std::string& line) {
  const size_t first = line.find_first_not_of(" \t\r");
  return first == std::string::npos || line[first] == '#';
}

std::vector<double> ParseNumbers(const std::vector<std::string>& tokens,
                                 int line) {
  std::vector<double> values(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!ParseDouble(tokens[i], &values[i])) {
      Fail(line, "not a number: '" + tokens[i] + "'");
    }
  }
  return values;
}

// Non-comment lines with their 1-based line numbers.
std::vector<std::pair<int, std::string>> ContentLines(std::istream& in) {
  std::vector<std::pair<int, std::string>> lines;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!IsSkippable(line)) lines.emplace_back(number, line);
  }
  return lines;
}

void WriteRow(std::ostream& out, const std::string& key, const double* values,
              int n) {
  out << key;
  for (int i = 0; i < n; ++i) out << ' ' << FormatDouble(values[i]);
  out << '\n';
}

Eigen::Matrix3d RowMajor(const std::vector<double>& v) {
  Eigen::Matrix3d M;
  for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = v[i];
  return M;
}

}  // namespace

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

bool ParseDouble(const std::string& token, double* value) {
  if (token.empty()) return false;
  const char* begin = token.c_str();
  char* end = nullptr;
  *value = std::strtod(begin, &end);
  return end == begin + token.size();
}

MatchPool ReadMatchPool(std::istream& in) {
  MatchPool pool;
  std::map<std::pair<double, double>, int> targets;
  int k = 0;
  for (const auto& [line, text] : ContentLines(in)) {
    const auto tokens = Tokenize(text);
    if (tokens.size() != 10) {
      Fail(line, "expected 10 fields, got " + std::to_string(tokens.size()));
    }
    const std::vector<double> v = ParseNumbers(tokens, line);
    const double src = v[0];
    if (src != std::floor(src) || src < 0) Fail(line, "bad source index");
    const int source = static_cast<int>(src);
    for (const int i : {1, 2, 3, 4, 9}) {
      if (!std::isfinite(v[i])) Fail(line, "non-finite value");
    }
    const int nan_count = std::isnan(v[5]) + std::isnan(v[6]) +
                          std::isnan(v[7]) + std::isnan(v[8]);
    if (nan_count != 0 && nan_count != 4) {
      Fail(line, "affine entries must be all numbers or all nan");
    }
    for (int i = 5; i < 9; ++i) {
      if (std::isinf(v[i])) Fail(line, "non-finite affine entry");
    }

    const int current = static_cast<int>(pool.source_points.size()) - 1;
    if (source == current + 1) {
      pool.source_points.emplace_back(v[1], v[2]);
      pool.candidates.emplace_back();
    } else if (source != current) {
      Fail(line, "source indices must be contiguous and ascending");
    } else if (pool.source_points.back() != ImagePoint(v[1], v[2])) {
      Fail(line, "source point changes within a group");
    }
    auto& list = pool.candidates.back();
    if (!list.empty() && v[9] > list.back().score) {
      Fail(line, "scores must be descending within a source");
    }
    MatchCandidate c;
    c.p2 = ImagePoint(v[3], v[4]);
    const auto [it, inserted] =
        targets.emplace(std::make_pair(v[3], v[4]), static_cast<int>(targets.size()));
    c.target_index = it->second;
    if (nan_count == 0) {
      Eigen::Matrix2d A;
      A << v[5], v[6], v[7], v[8];
      c.A = A;
    }
    c.score = v[9];
    list.push_back(c);
    k = std::max(k, static_cast<int>(list.size()));
  }
  pool.k = std::max(k, 1);
  return pool;
}

void WriteMatchPool(std::ostream& out, const MatchPool& pool) {
  out << "# src_idx u1 v1 u2 v2 a11 a12 a21 a22 score\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t s = 0; s < pool.candidates.size(); ++s) {
    for (const auto& c : pool.candidates[s]) {
      const Eigen::Matrix2d A = c.A.value_or(Eigen::Matrix2d::Constant(nan));
      const double row[] = {pool.source_points[s].x(), pool.source_points[s].y(),
                            c.p2.x(), c.p2.y(), A(0, 0), A(0, 1), A(1, 0),
                            A(1, 1), c.score};
      WriteRow(out, std::to_string(s), row, 9);
    }
  }
}

Calibration ReadCalibration(std::istream& in) {
  const auto lines = ContentLines(in);
  if (lines.size() != 2 && lines.size() != 4) {
    throw Error(ErrorKind::kParseError,
                "calibration needs 2 or 4 lines, got " + std::to_string(lines.size()));
  }
  Calibration calibration;
  std::vector<Eigen::Matrix3d> Ks;
  for (int i = 0; i < 2; ++i) {
    const auto tokens = Tokenize(lines[i].second);
    if (tokens.size() != 9) Fail(lines[i].first, "expected 9 numbers");
    try {
      Ks.push_back(RowMajor(ParseNumbers(tokens, lines[i].first)));
      (i == 0 ? calibration.K1 : calibration.K2) = CameraIntrinsics(Ks.back());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kParseError) throw;
      Fail(lines[i].first, e.what());
    }
  }
  for (size_t i = 2; i < lines.size(); ++i) {
    const auto tokens = Tokenize(lines[i].second);
    if (tokens.size() != 3) Fail(lines[i].first, "expected 3 numbers");
    const auto v = ParseNumbers(tokens, lines[i].first);
    try {
      (i == 2 ? calibration.v1 : calibration.v2) =
          GravityDirection(Eigen::Vector3d(v[0], v[1], v[2]));
    } catch (const Error& e) {
      Fail(lines[i].first, e.what());
    }
  }
  return calibration;
}

void WriteCalibration(std::ostream& out, const Calibration& calibration) {
  for (const auto* K : {&calibration.K1.K(), &calibration.K2.K()}) {
    const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> M = *K;
    for (int i = 0; i < 9; ++i) out << (i ? " " : "") << FormatDouble(M.data()[i]);
    out << '\n';
  }
  for (const auto* v : {&calibration.v1.vector(), &calibration.v2.vector()}) {
    out << FormatDouble(v->x()) << ' ' << FormatDouble(v->y()) << ' '
        << FormatDouble(v->z()) << '\n';
  }
}

void WriteResult(std::ostream& out, const EstimationResult& result,
                 double runtime_s) {
  const ModelHypothesis& m = result.model;
  out << "model " << (m.kind == ModelKind::kEssential ? "essential" : "homography")
      << '\n';
  const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> M = m.M;
  WriteRow(out, "M", M.data(), 9);
  if (m.pose) {
    const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> R = m.pose->R;
    WriteRow(out, "R", R.data(), 9);
    WriteRow(out, "t", m.pose->t.data(), 3);
  } else {
    out << "R none\nt none\n";
  }
  if (m.kind == ModelKind::kHomography) {
    if (m.plane_normal) {
      WriteRow(out, "n", m.plane_normal->data(), 3);
    } else {
      out << "n none\n";
    }
  }
  out << "score " << FormatDouble(result.score) << '\n';
  out << "inliers " << result.matches.size() << '\n';
  for (const auto& match : result.matches) {
    out << match.source_index << ' ' << match.candidate_rank << ' '
        << FormatDouble(match.residual) << '\n';
  }
  out << "iterations " << result.iterations_run << '\n';
  out << "lo_runs " << result.lo_runs << '\n';
  out << "runtime_s " << FormatDouble(runtime_s) << '\n';
}

ResultRecord ReadResult(std::istream& in) {
  ResultRecord record;
  const auto lines = ContentLines(in);
  size_t i = 0;
  auto next = [&](const std::string& key, size_t count) {
    if (i >= lines.size()) {
      throw Error(ErrorKind::kParseError, "missing '" + key + "' line");
    }
    const auto& [line, text] = lines[i++];
    auto tokens = Tokenize(text);
    if (tokens.empty() || tokens[0] != key) Fail(line, "expected '" + key + "'");
    tokens.erase(tokens.begin());
    if (tokens.size() == 1 && tokens[0] == "none") return std::vector<double>{};
    if (tokens.size() != count) Fail(line, "wrong field count for " + key);
    if (key == "model") return std::vector<double>{};
    return ParseNumbers(tokens, line);
  };
  if (lines.empty()) throw Error(ErrorKind::kParseError, "empty result file");
  const auto model_tokens = Tokenize(lines[0].second);
  if (model_tokens.size() != 2 || model_tokens[0] != "model" ||
      (model_tokens[1] != "essential" && model_tokens[1] != "homography")) {
    Fail(lines[0].first, "expected 'model essential|homography'");
  }
  ++i;
  record.model.kind = model_tokens[1] == "essential" ? ModelKind::kEssential
                                                     : ModelKind::kHomography;
  record.model.M = RowMajor(next("M", 9));
  const auto R = next("R", 9);
  const auto t = next("t", 3);
  if (!R.empty() && !t.empty()) {
    record.model.pose = RelativePose{RowMajor(R), Eigen::Vector3d(t[0], t[1], t[2])};
  }
  if (record.model.kind == ModelKind::kHomography) {
    const auto n = next("n", 3);
    if (!n.empty()) record.model.plane_normal = Eigen::Vector3d(n[0], n[1], n[2]);
  }
  record.score = next("score", 1).at(0);
  const double count = next("inliers", 1).at(0);
  for (int m = 0; m < static_cast<int>(count); ++m) {
    if (i >= lines.size()) throw Error(ErrorKind::kParseError, "missing inlier lines");
    const auto& [line, text] = lines[i++];
    const auto tokens = Tokenize(text);
    if (tokens.size() != 3) Fail(line, "expected 'src rank residual'");
    const auto v = ParseNumbers(tokens, line);
    FinalMatch match;
    match.source_index = static_cast<int>(v[0]);
    match.candidate_rank = static_cast<int>(v[1]);
    match.residual = v[2];
    record.matches.push_back(match);
  }
  record.iterations = static_cast<int>(next("iterations", 1).at(0));
  record.lo_runs = static_cast<int>(next("lo_runs", 1).at(0));
  record.runtime_s = next("runtime_s", 1).at(0);
  return record;
}

std::vector<double> ReadErrors(std::istream& in) {
  std::vector<double> errors;
  std::string line;
  int row = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++row;
    if (IsSkippable(line)) continue;
    auto tokens = Tokenize(line);
    // Tolerate a trailing comma from CSV exporters.
    if (tokens.size() == 1 && tokens[0].size() > 1 && tokens[0].back() == ',') {
      tokens[0].pop_back();
    }
    if (first && tokens.size() == 1 && tokens[0] == "error") {
      first = false;
      continue;
    }
    first = false;
    if (tokens.size() != 1) Fail(row, "expected one value per row");
    double value;
    if (!ParseDouble(tokens[0], &value) || std::isnan(value) || value < 0) {
      throw Error(ErrorKind::kParseError,
                  "row " + std::to_string(row) + ": not a nonnegative error: '" +
                      tokens[0] + "'");
    }
    errors.push_back(value);
  }
  if (errors.empty()) throw Error(ErrorKind::kEmptyInput, "no error rows");
  return errors;
}

}  // namespace affineglue
