#include "affineglue/polynomial.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "affineglue/errors.h"

namespace affineglue {
namespace {

constexpr double kImagTol = 1e-8;
constexpr double kDedupTol = 1e-10;
constexpr double kLeadingTol = 1e-12;

// Parlett-Reinsch balancing with powers of two, so no rounding is introduced.
void Balance(Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  constexpr double kRadix = 2.0;
  bool converged = false;
  while (!converged) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double col = 0.0;
      double row = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        col += std::abs(m(j, i));
        row += std::abs(m(i, j));
      }
      if (col == 0.0 || row == 0.0) continue;
      double g = row / kRadix;
      double f = 1.0;
      const double s = col + row;
      while (col < g) {
        f *= kRadix;
        col *= kRadix * kRadix;
      }
      g = row * kRadix;
      while (col > g) {
        f /= kRadix;
        col /= kRadix * kRadix;
      }
      if ((col + row) / f < 0.95 * s) {
        converged = false;
        m.row(i) /= f;
        m.col(i) *= f;
      }
    }
  }
}

}  // namespace

double Degree6Polynomial::Evaluate(double x) const {
  double value = 0.0;
  for (int i = 6; i >= 0; --i) value = value * x + coeffs[i];
  return value;
}

double Degree6Polynomial::Derivative(double x) const {
  double value = 0.0;
  for (int i = 6; i >= 1; --i) value = value * x + i * coeffs[i];
  return value;
}

double Degree6Polynomial::MaxAbsCoefficient() const {
  double m = 0.0;
  for (double c : coeffs) m = std::max(m, std::abs(c));
  return m;
}

std::vector<double> RealRoots(const Degree6Polynomial& poly) {
  const double scale = poly.MaxAbsCoefficient();
  if (scale == 0.0 || !std::isfinite(scale)) {
    throw Error(ErrorKind::kNoRealRoots, "zero or non-finite polynomial");
  }
  Degree6Polynomial p;
  for (int i = 0; i < 7; ++i) p.coeffs[i] = poly.coeffs[i] / scale;

  int degree = 6;
  while (degree > 0 && std::abs(p.coeffs[degree]) < kLeadingTol) --degree;

  // Zero roots are deflated explicitly; they would otherwise sit in a
  // singular companion matrix.
  int low = 0;
  while (low < degree && p.coeffs[low] == 0.0) ++low;

  std::vector<double> candidates;
  if (low > 0) candidates.push_back(0.0);
  const int reduced = degree - low;
  if (reduced == 1) {
    candidates.push_back(-p.coeffs[low] / p.coeffs[low + 1]);
  } else if (reduced > 1) {
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(reduced, reduced);
    for (int i = 0; i < reduced; ++i) {
      companion(0, i) = -p.coeffs[degree - 1 - i] / p.coeffs[degree];
    }
    for (int i = 1; i < reduced; ++i) companion(i, i - 1) = 1.0;
    Balance(companion);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorKind::kNoRealRoots, "eigenvalue iteration failed");
    }
    const Eigen::VectorXcd eig = solver.eigenvalues();
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
      if (std::abs(eig(i).imag()) < kImagTol) {
        candidates.push_back(eig(i).real());
      }
    }
  }

  // A couple of Newton steps, kept only when they reduce the residual.
  for (double& r : candidates) {
    for (int iter = 0; iter < 2; ++iter) {
      const double f = p.Evaluate(r);
      const double df = p.Derivative(r);
      if (df == 0.0) break;
      const double next = r - f / df;
      if (std::abs(p.Evaluate(next)) < std::abs(f)) {
        r = next;
      } else {
        break;
      }
    }
  }

  std::sort(candidates.begin(), candidates.end());
  std::vector<double> roots;
  for (double r : candidates) {
    if (!roots.empty() && std::abs(r - roots.back()) <= kDedupTol) continue;
    roots.push_back(r);
  }
  if (roots.empty()) {
    throw Error(ErrorKind::kNoRealRoots, "no real roots");
  }
  return roots;
}

}  // namespace affineglue
