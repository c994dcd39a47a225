#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "affineglue/estimator.h"
#include "affineglue/geometry.h"

namespace affineglue {

// Shortest form that round-trips (17 significant digits); "nan", "inf".
std::string FormatDouble(double value);

// Parses one decimal token, accepting nan/inf. Returns false on garbage.
bool ParseDouble(const std::string& token, double* value);

// Match pool text format, one candidate per line:
//   src_idx u1 v1 u2 v2 a11 a12 a21 a22 score
// Targets are identified by their (u2, v2) coordinates; indices are assigned
// in order of first appearance. Throws kParseError with the line number.
MatchPool ReadMatchPool(std::istream& in);
void WriteMatchPool(std::ostream& out, const MatchPool& pool);

struct Calibration {
  CameraIntrinsics K1 = CameraIntrinsics::FromFocal(1.0);
  CameraIntrinsics K2 = CameraIntrinsics::FromFocal(1.0);
  GravityDirection v1 = GravityDirection::Down();
  GravityDirection v2 = GravityDirection::Down();
};

// Two lines with K and K' row-major, optionally followed by v1 and v2.
Calibration ReadCalibration(std::istream& in);
void WriteCalibration(std::ostream& out, const Calibration& calibration);

struct ResultRecord {
  ModelHypothesis model;
  double score = 0.0;
  std::vector<FinalMatch> matches;  // target_index is not stored
  int iterations = 0;
  int lo_runs = 0;
  double runtime_s = 0.0;
};

void WriteResult(std::ostream& out, const EstimationResult& result,
                 double runtime_s);
ResultRecord ReadResult(std::istream& in);

// One error per row, "inf" for failures; an optional "error" header and
// '#' comments are skipped. Throws kParseError with the row number and
// kEmptyInput when no rows remain.
std::vector<double> ReadErrors(std::istream& in);

}  // namespace affineglue
