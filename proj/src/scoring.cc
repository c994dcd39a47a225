#include "affineglue/scoring.h"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

namespace affineglue {
namespace {

constexpr double kDegreesOfFreedom = 4.0;

// Loss of a residual marginalized over sigma in [0, sigma_max], following the
// closed form of sigma-consensus with the incomplete gamma functions.
double MarginalizedLoss(double residual, double sigma_max) {
  const double cutoff = kMagsacCutoffQuantile * sigma_max;
  const double r = std::min(residual, cutoff);
  const double r2 = r * r;
  const double x = r2 / (2.0 * sigma_max * sigma_max);
  const double a_lower = 0.5 * (kDegreesOfFreedom + 1.0);
  const double a_upper = 0.5 * (kDegreesOfFreedom - 1.0);
  const double upper_at_cutoff = boost::math::tgamma(
      a_upper, 0.5 * kMagsacCutoffQuantile * kMagsacCutoffQuantile);
  const double lower = x > 0.0 ? boost::math::tgamma_lower(a_lower, x) : 0.0;
  const double upper = boost::math::tgamma(a_upper, x);
  return 0.5 * sigma_max * sigma_max * lower +
         0.25 * r2 * (upper - upper_at_cutoff);
}

}  // namespace

double ScoreGain(double residual, ScoringKind kind, double epsilon,
                 double sigma_max) {
  if (!(residual >= 0.0)) return 0.0;
  if (kind == ScoringKind::kTruncatedQuadratic) {
    if (residual >= epsilon) return 0.0;
    return 1.0 - (residual * residual) / (epsilon * epsilon);
  }
  const double cutoff = kMagsacCutoffQuantile * sigma_max;
  if (residual >= cutoff) return 0.0;
  const double full = MarginalizedLoss(cutoff, sigma_max);
  const double gain = 1.0 - MarginalizedLoss(residual, sigma_max) / full;
  return std::clamp(gain, 0.0, 1.0);
}

}  // namespace affineglue
