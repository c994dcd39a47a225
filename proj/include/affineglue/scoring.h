#pragma once

namespace affineglue {

enum class ScoringKind { kTruncatedQuadratic, kMagsacLike };

// Quantile of the chi distribution (4 DOF) used to derive the marginalization
// cutoff from sigma_max.
inline constexpr double kMagsacCutoffQuantile = 3.64;

// Per-match quality in [0, 1]: gain(0) = 1, nonincreasing, and zero at and
// beyond the cutoff (epsilon for TruncatedQuadratic, kMagsacCutoffQuantile *
// sigma_max for MagsacLike).
double ScoreGain(double residual, ScoringKind kind, double epsilon,
                 double sigma_max);

}  // namespace affineglue
