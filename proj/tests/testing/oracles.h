#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "affineglue/polynomial.h"

namespace affineglue {
namespace testing {

inline Degree6Polynomial FromRoots(
    const std::vector<double>& real_roots,
    const std::vector<std::pair<double, double>>& quadratics, double scale) {
  // Multiply out in ascending order.
  std::vector<double> c = {scale};
  auto multiply = [&c](const std::vector<double>& f) {
    std::vector<double> out(c.size() + f.size() - 1, 0.0);
    for (size_t i = 0; i < c.size(); ++i) {
      for (size_t j = 0; j < f.size(); ++j) out[i + j] += c[i] * f[j];
    }
    c = out;
  };
  for (const double r : real_roots) multiply({-r, 1.0});
  for (const auto& [b, q] : quadratics) multiply({q, b, 1.0});
  Degree6Polynomial p;
  for (size_t i = 0; i < c.size(); ++i) p.coeffs[i] = c[i];
  return p;
}

// Independent oracle: sign changes on a fine grid refined by bisection.
inline std::vector<double> BisectionRoots(const Degree6Polynomial& p, double bound) {
  std::vector<double> roots;
  const int steps = 200000;
  double x0 = -bound;
  double f0 = p.Evaluate(x0);
  for (int i = 1; i <= steps; ++i) {
    const double x1 = -bound + 2.0 * bound * i / steps;
    const double f1 = p.Evaluate(x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if (f0 * f1 < 0.0) {
      double lo = x0, hi = x1, flo = f0;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = p.Evaluate(mid);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

}  // namespace testing
}  // namespace affineglue
