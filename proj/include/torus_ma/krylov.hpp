#pragma once

// Restarted GMRES with right preconditioning for the nonsymmetric Newton
// systems. Operators are callables on Eigen vectors, so fields and the
// auxiliary constant can share one flat vector.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace torus_ma {

struct GmresOptions {
  double tolerance = 1e-12;  // on ||rhs - A x|| / ||rhs||
  int max_iterations = 400;
  int restart = 60;
};

struct GmresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  // Smallest singular value of the last Hessenberg matrix: an estimate for
  // the preconditioned operator restricted to the Krylov space.
  double min_singular_value = std::numeric_limits<double>::quiet_NaN();
};

/// Solves A x = rhs with right preconditioner P (x = P y, A P y = rhs).
template <class Op, class Prec>
GmresResult gmres(Op&& A, Prec&& P, const Eigen::VectorXd& rhs, const GmresOptions& opt) {
  const Eigen::Index n = rhs.size();
  GmresResult out;
  out.x = Eigen::VectorXd::Zero(n);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    out.converged = true;
    return out;
  }
  const int m = std::max(1, opt.restart);
  Eigen::VectorXd r = rhs;
  double beta = rhs_norm;
  while (out.iterations < opt.max_iterations) {
    std::vector<Eigen::VectorXd> V;
    V.reserve(m + 1);
    V.push_back(r / beta);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    g(0) = beta;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m + 1, m);  // rotated copy of H
    int j = 0;
    for (; j < m && out.iterations < opt.max_iterations; ++j) {
      ++out.iterations;
      Eigen::VectorXd w = A(P(V[j]));
      // modified Gram-Schmidt, twice for stability
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const double h = V[i].dot(w);
          H(i, j) += h;
          w -= h * V[i];
        }
      H(j + 1, j) = w.norm();
      for (int i = 0; i <= j + 1; ++i) R(i, j) = H(i, j);
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * R(i, j) + sn(i) * R(i + 1, j);
        R(i + 1, j) = -sn(i) * R(i, j) + cs(i) * R(i + 1, j);
        R(i, j) = t;
      }
      const double denom = std::hypot(R(j, j), R(j + 1, j));
      cs(j) = denom == 0.0 ? 1.0 : R(j, j) / denom;
      sn(j) = denom == 0.0 ? 0.0 : R(j + 1, j) / denom;
      R(j, j) = denom;
      R(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      const bool breakdown = H(j + 1, j) <= 1e-14 * denom;
      if (!breakdown) V.push_back(w / H(j + 1, j));
      if (std::abs(g(j + 1)) <= opt.tolerance * rhs_norm || breakdown) {
        ++j;
        break;
      }
    }
    // back substitution on the j x j triangle
    Eigen::VectorXd y = R.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    Eigen::VectorXd update = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < j; ++i) update += y(i) * V[i];
    out.x += P(update);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(H.topLeftCorner(j + 1, j));
    out.min_singular_value = svd.singularValues().minCoeff();
    r = rhs - A(out.x);
    beta = r.norm();
    out.relative_residual = beta / rhs_norm;
    if (out.relative_residual <= opt.tolerance) {
      out.converged = true;
      break;
    }
    if (beta == 0.0) break;
  }
  return out;
}

}  // namespace torus_ma
