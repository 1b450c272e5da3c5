#include "hpf/optimize.hpp"

#include <cmath>
#include <limits>

namespace hpf::opt {

namespace {

double safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

Vector gradient(const std::function<double(const Vector&)>& f, const Vector& x, double step,
                int& evals) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = safe(f(xp));
    xp[i] = x[i] - h;
    const double fm = safe(f(xp));
    xp[i] = x[i];
    evals += 2;
    g[i] = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2 * h) : 0.0;
  }
  return g;
}

}  // namespace

Result minimize_bfgs(const std::function<double(const Vector&)>& f, Vector x0,
                     const Options& options) {
  Result res;
  const Eigen::Index n = x0.size();
  res.x = x0;
  res.value = safe(f(x0));
  res.evaluations = 1;
  if (n == 0) {
    res.converged = true;
    return res;
  }
  if (!std::isfinite(res.value)) return res;

  Matrix H = Matrix::Identity(n, n);  // inverse Hessian approximation
  Vector g = gradient(f, res.x, options.fd_step, res.evaluations);
  int stalls = 0;

  for (int it = 0; it < options.max_iterations; ++it) {
    res.iterations = it + 1;
    if (g.lpNorm<Eigen::Infinity>() < options.g_tolerance) {
      res.converged = true;
      break;
    }
    Vector dir = -H * g;
    double slope = g.dot(dir);
    if (slope >= 0) {  // not a descent direction; reset
      H.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    // Keep the first trial step bounded in the unconstrained space.
    double step = 1.0;
    const double dnorm = dir.lpNorm<Eigen::Infinity>();
    if (dnorm > 2.0) step = 2.0 / dnorm;

    Vector x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = res.x + step * dir;
      f_new = safe(f(x_new));
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (H.isIdentity()) {
        res.converged = g.lpNorm<Eigen::Infinity>() < 1e3 * options.g_tolerance;
        break;
      }
      H.setIdentity();
      continue;
    }

    const Vector s = x_new - res.x;
    const double df = res.value - f_new;
    const Vector g_new = gradient(f, x_new, options.fd_step, res.evaluations);
    const Vector yk = g_new - g;
    res.x = x_new;
    res.value = f_new;
    g = g_new;

    const double sy = s.dot(yk);
    if (sy > 1e-12 * s.norm() * yk.norm()) {
      const double rho = 1.0 / sy;
      const Matrix I = Matrix::Identity(n, n);
      H = (I - rho * s * yk.transpose()) * H * (I - rho * yk * s.transpose()) +
          rho * s * s.transpose();
    }

    if (df < options.f_tolerance) {
      if (++stalls >= 2) {
        res.converged = true;
        break;
      }
    } else {
      stalls = 0;
    }
  }
  return res;
}

Matrix numerical_hessian(const std::function<double(const Vector&)>& f, const Vector& x,
                         double rel_step) {
  const Eigen::Index n = x.size();
  Matrix Hs(n, n);
  Vector h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = rel_step * std::max(1.0, std::abs(x[i]));
  const double f0 = f(x);
  Vector xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp[i] = x[i] + h[i];
    const double fp = f(xp);
    xp[i] = x[i] - h[i];
    const double fm = f(xp);
    xp[i] = x[i];
    Hs(i, i) = (fp - 2 * f0 + fm) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      xp[i] = x[i] + h[i];
      xp[j] = x[j] + h[j];
      const double fpp = f(xp);
      xp[j] = x[j] - h[j];
      const double fpm = f(xp);
      xp[i] = x[i] - h[i];
      const double fmm = f(xp);
      xp[j] = x[j] + h[j];
      const double fmp = f(xp);
      xp[i] = x[i];
      xp[j] = x[j];
      Hs(i, j) = Hs(j, i) = (fpp - fpm - fmp + fmm) / (4 * h[i] * h[j]);
    }
  }
  return Hs;
}

}  // namespace hpf::opt
