#pragma once

#include <array>
#include <vector>

namespace affineglue {

// c0 + c1 x + ... + c6 x^6.
struct Degree6Polynomial {
  std::array<double, 7> coeffs{};

  double Evaluate(double x) const;
  double Derivative(double x) const;
  double MaxAbsCoefficient() const;
};

// Real roots via the eigenvalues of the balanced companion matrix, sorted
// ascending and deduplicated within 1e-10. Coefficients are scaled by their
// largest magnitude first; leading coefficients below 1e-12 of it are dropped.
// Throws kNoRealRoots (also for an identically zero polynomial).
std::vector<double> RealRoots(const Degree6Polynomial& poly);

}  // namespace affineglue
