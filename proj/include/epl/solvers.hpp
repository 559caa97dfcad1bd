#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "epl/vec.hpp"

namespace epl::solvers {

/// Nonnegative least squares min ||A c - b||, c >= 0 (Lawson-Hanson active set).
/// Columns of A are given as vectors.
inline std::vector<double> nnls(const std::vector<Vec>& columns, const Vec& b, int max_iter = 500) {
  const int n = static_cast<int>(b.size());
  const int p = static_cast<int>(columns.size());
  std::vector<double> c(p, 0.0);
  if (p == 0) return c;
  Eigen::MatrixXd A(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) A(i, j) = columns[j][i];
  Eigen::VectorXd bb(n);
  for (int i = 0; i < n; ++i) bb(i) = b[i];
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  std::vector<bool> passive(p, false);
  const double tol = 1e-12 * (1.0 + A.cwiseAbs().maxCoeff()) * (1.0 + bb.norm());
  for (int outer = 0; outer < max_iter; ++outer) {
    Eigen::VectorXd w = A.transpose() * (bb - A * x);
    int jmax = -1;
    double wmax = tol;
    for (int j = 0; j < p; ++j)
      if (!passive[j] && w(j) > wmax) {
        wmax = w(j);
        jmax = j;
      }
    if (jmax < 0) break;
    passive[jmax] = true;
    for (int inner = 0; inner < 3 * p + 10; ++inner) {
      std::vector<int> idx;
      for (int j = 0; j < p; ++j)
        if (passive[j]) idx.push_back(j);
      Eigen::MatrixXd Ap(n, idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(k) = A.col(idx[k]);
      Eigen::VectorXd z = Ap.completeOrthogonalDecomposition().solve(bb);
      bool feasible = true;
      for (std::size_t k = 0; k < idx.size(); ++k) feasible = feasible && z(k) > 0.0;
      if (feasible) {
        x.setZero();
        for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) = z(k);
        break;
      }
      double alpha = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k)
        if (z(k) <= 0.0) {
          double d = x(idx[k]) - z(k);
          if (d > 0.0) alpha = std::min(alpha, x(idx[k]) / d);
        }
      for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) += alpha * (z(k) - x(idx[k]));
      for (std::size_t k = 0; k < idx.size(); ++k)
        if (x(idx[k]) <= 1e-15) {
          x(idx[k]) = 0.0;
          passive[idx[k]] = false;
        }
    }
  }
  for (int j = 0; j < p; ++j) c[j] = std::max(0.0, x(j));
  return c;
}

struct SphereOrthantMin {
  double value = std::numeric_limits<double>::infinity();  // min t^T G t
  std::vector<double> t;
};

/// Minimizes t^T G t over t >= 0, ||t|| = 1 by enumerating the faces of the
/// orthant; on each face the minimizers are nonnegative eigenvectors.
inline SphereOrthantMin sphere_orthant_min(const Eigen::MatrixXd& G) {
  const int m = static_cast<int>(G.rows());
  SphereOrthantMin best;
  if (m > 20) throw InputError("sphere_orthant_min: dimension too large for face enumeration");
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const int s = static_cast<int>(idx.size());
    Eigen::MatrixXd H(s, s);
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b) H(a, b) = G(idx[a], idx[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    for (int e = 0; e < s; ++e) {
      Eigen::VectorXd v = es.eigenvectors().col(e);
      if (v.sum() < 0.0) v = -v;
      if (v.minCoeff() < -1e-12) continue;
      v = v.cwiseMax(0.0);
      v.normalize();
      double val = v.dot(H * v);
      if (val < best.value - 1e-15) {
        best.value = val;
        best.t.assign(m, 0.0);
        for (int a = 0; a < s; ++a) best.t[idx[a]] = v(a);
      }
    }
  }
  return best;
}

struct DescentResult {
  Vec x;
  double value;
  int iterations;
  bool converged;
};

/// Derivative-free compass search with halving steps. `feasible_map` may
/// project trial points back onto a constraint set.
inline DescentResult compass_descent(const std::function<double(const Vec&)>& f, Vec x0, double step,
                                     double min_step, int max_iter,
                                     const std::function<Vec(const Vec&)>& feasible_map = {}) {
  Vec x = feasible_map ? feasible_map(x0) : x0;
  double fx = f(x);
  const std::size_t n = x.size();
  int it = 0;
  for (; it < max_iter && step >= min_step; ++it) {
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (double sgn : {1.0, -1.0}) {
        Vec y = x;
        y[i] += sgn * step;
        if (feasible_map) y = feasible_map(y);
        double fy = f(y);
        if (fy < fx) {
          // Expand while improving along the same direction.
          for (int e = 0; e < 30; ++e) {
            Vec z = x + (y - x) * 2.0;
            if (feasible_map) z = feasible_map(z);
            double fz = f(z);
            if (!(fz < fy)) break;
            y = z;
            fy = fz;
          }
          x = y;
          fx = fy;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {x, fx, it, step < min_step};
}

}  // namespace epl::solvers
