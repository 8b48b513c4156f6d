#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt, MINPACK schedule via Eigen) with a
// central-difference Jacobian. At most 200 iterations, relative tolerance 1e-8.

#include <cmath>
#include <functional>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "spintorque/errors.hpp"

namespace spintorque {

using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

struct LsqOptions {
  int max_iterations = 200;
  double rel_tol = 1e-8;
};

struct LsqResult {
  Eigen::VectorXd x;
  Eigen::MatrixXd covariance;  // s^2 (J^T J)^{-1}
  double residual_norm = 0.0;
  int iterations = 0;
};

namespace detail {

struct LsqFunctor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const ResidualFn* f;
  Eigen::Index n_in, n_out;

  Eigen::Index inputs() const { return n_in; }
  Eigen::Index values() const { return n_out; }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    (*f)(x, r);
    return r.allFinite() ? 0 : -1;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    jac.resize(n_out, n_in);
    Eigen::VectorXd xp = x, rp(n_out), rm(n_out);
    for (Eigen::Index j = 0; j < n_in; ++j) {
      const double h = 1e-7 * std::max(std::abs(x[j]), 1e-6);
      xp[j] = x[j] + h;
      (*f)(xp, rp);
      xp[j] = x[j] - h;
      (*f)(xp, rm);
      xp[j] = x[j];
      jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return jac.allFinite() ? 0 : -1;
  }
};

}  // namespace detail

inline LsqResult least_squares(const ResidualFn& f, Eigen::VectorXd x0, Eigen::Index n_residuals,
                               const LsqOptions& opt = {}) {
  using namespace Eigen::LevenbergMarquardtSpace;
  detail::LsqFunctor functor{&f, x0.size(), n_residuals};
  Eigen::LevenbergMarquardt<detail::LsqFunctor> lm(functor);
  lm.parameters.ftol = opt.rel_tol;
  lm.parameters.xtol = opt.rel_tol;
  lm.parameters.maxfev = 100 * opt.max_iterations;

  Status status = lm.minimizeInit(x0);
  if (status == ImproperInputParameters) throw NoConvergence(0, std::nan(""));
  int it = 0;
  do {
    status = lm.minimizeOneStep(x0);
    ++it;
  } while (status == Running && it < opt.max_iterations);

  Eigen::VectorXd r(n_residuals);
  f(x0, r);
  const double norm = r.norm();
  if (status == Running || status == TooManyFunctionEvaluation || status == UserAsked || !x0.allFinite())
    throw NoConvergence(it, norm);

  LsqResult res;
  res.x = x0;
  res.residual_norm = norm;
  res.iterations = it;
  Eigen::MatrixXd jac;
  functor.df(x0, jac);
  const double dof = std::max<double>(1.0, static_cast<double>(n_residuals - x0.size()));
  res.covariance = (jac.transpose() * jac).completeOrthogonalDecomposition().pseudoInverse() * (norm * norm / dof);
  return res;
}

}  // namespace spintorque
