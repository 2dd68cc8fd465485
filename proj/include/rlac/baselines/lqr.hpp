#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>

#include "rlac/env/cartpole.hpp"
#include "rlac/errors.hpp"

namespace rlac::baselines {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LinearModel {
  MatrixXd A;
  MatrixXd B;
};

// Central-difference Jacobians of x_{k+1} = f(x_k, u_k) at (x0, u0).
inline LinearModel linearize(const std::function<VectorXd(const VectorXd&, const VectorXd&)>& f,
                             const VectorXd& x0, const VectorXd& u0, double h = 1e-6) {
  const Eigen::Index n = x0.size(), m = u0.size();
  LinearModel lin{MatrixXd(n, n), MatrixXd(n, m)};
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXd xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    lin.A.col(j) = (f(xp, u0) - f(xm, u0)) / (2.0 * h);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    VectorXd up = u0, um = u0;
    up(j) += h;
    um(j) -= h;
    lin.B.col(j) = (f(x0, up) - f(x0, um)) / (2.0 * h);
  }
  return lin;
}

// Linearization of the cartpole step map at the upright rest point.
inline LinearModel linearize(const env::CartpoleParams& p) {
  p.validate();
  auto f = [&p](const VectorXd& x, const VectorXd& u) {
    const env::StateVec next = env::advance(p, {x(0), x(1), x(2), x(3)}, u(0));
    return VectorXd(Eigen::Map<const Eigen::Vector4d>(next.data()));
  };
  return linearize(f, VectorXd::Zero(4), VectorXd::Zero(1));
}

inline double spectral_radius(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> es(m, false);
  double r = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) r = std::max(r, std::abs(es.eigenvalues()(i)));
  return r;
}

struct LqrSolution {
  MatrixXd K;  // u = -K x
  MatrixXd P;
  int iterations = 0;
  double residual = 0.0;  // max |Riccati(P) - P|
};

inline MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& R, const MatrixXd& P) {
  return (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
}

// One Riccati step in Joseph form, Q + K'RK + (A-BK)'P(A-BK), which stays
// symmetric positive semidefinite in floating point.
inline MatrixXd riccati_map(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                            const MatrixXd& P) {
  const MatrixXd K = lqr_gain(A, B, R, P);
  const MatrixXd Acl = A - B * K;
  const MatrixXd next = Q + K.transpose() * R * K + Acl.transpose() * P * Acl;
  return 0.5 * (next + next.transpose());
}

// Fixed-point iteration of the discrete algebraic Riccati equation from
// P = Q until successive iterates differ by at most `tol`, or by a few ulps
// of |P| once roundoff dominates.
inline LqrSolution solve_lqr(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                             double tol = 1e-11, int max_iterations = 100'000) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || Q.cols() != A.cols() ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw DimensionError("solve_lqr: inconsistent A, B, Q, R shapes");
  }
  MatrixXd P = Q;
  for (int k = 1; k <= max_iterations; ++k) {
    MatrixXd next = riccati_map(A, B, Q, R, P);
    if (!next.allFinite()) break;
    const double diff = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    const double ulps = 64.0 * std::numeric_limits<double>::epsilon() * P.cwiseAbs().maxCoeff();
    if (diff <= std::max(tol, ulps)) {
      LqrSolution sol;
      sol.P = P;
      sol.K = lqr_gain(A, B, R, P);
      sol.iterations = k;
      sol.residual = (riccati_map(A, B, Q, R, P) - P).cwiseAbs().maxCoeff();
      return sol;
    }
  }
  throw NumericError("Riccati iteration did not converge; (A, B) looks unstabilizable");
}

struct LqrController {
  MatrixXd A, B, Q, R;
  Eigen::RowVector4d K = Eigen::RowVector4d::Zero();
  double force_limit = 20.0;
};

// Q mirrors the cost weights on x and theta, R = 1/force_limit^2.
inline LqrController make_lqr(const env::CartpoleParams& p) {
  LqrController c;
  const LinearModel lin = linearize(p);
  c.A = lin.A;
  c.B = lin.B;
  c.Q = MatrixXd::Zero(4, 4);
  c.Q(0, 0) = 1.0 / (p.x_threshold * p.x_threshold);
  c.Q(2, 2) = 20.0 / (p.theta_threshold * p.theta_threshold);
  c.R = MatrixXd::Constant(1, 1, 1.0 / (p.force_limit * p.force_limit));
  c.K = solve_lqr(c.A, c.B, c.Q, c.R).K;
  c.force_limit = p.force_limit;
  return c;
}

inline double lqr_act(const LqrController& c, const env::StateVec& s) {
  const double u = -(c.K * Eigen::Map<const Eigen::Vector4d>(s.data()))(0);
  return std::clamp(u, -c.force_limit, c.force_limit);
}

inline double closed_loop_radius(const LqrController& c) { return spectral_radius(c.A - c.B * c.K); }

}  // namespace rlac::baselines
