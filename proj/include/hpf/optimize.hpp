#pragma once

#include <functional>

#include "hpf/common.hpp"

namespace hpf::opt {

struct Result {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

struct Options {
  int max_iterations = 200;
  double f_tolerance = 1e-8;   // absolute change in objective between iterations
  double g_tolerance = 1e-6;   // infinity norm of the gradient
  double fd_step = 1e-5;
};

/// Quasi-Newton (BFGS) minimization with central-difference gradients and a
/// backtracking Armijo line search. The objective may return +inf or NaN to
/// reject a point; the line search then shrinks the step.
Result minimize_bfgs(const std::function<double(const Vector&)>& f, Vector x0,
                     const Options& options = {});

/// Central-difference Hessian with per-coordinate relative steps.
Matrix numerical_hessian(const std::function<double(const Vector&)>& f, const Vector& x,
                         double rel_step = 1e-4);

}  // namespace hpf::opt
