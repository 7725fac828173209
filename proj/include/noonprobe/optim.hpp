#pragma once

// Derivative-free minimization: Nelder-Mead simplex with a shrinking-restart
// polish, plus a deterministic multistart driver.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace noonprobe {

struct NmOptions {
  double ftol = 1e-12;        // relative simplex f-spread
  double xtol = 1e-10;        // simplex size in parameter space
  int max_iter = 20000;       // per run
  int polish_rounds = 2;      // re-runs with shrunken initial simplex
};

struct NmResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

template <class Fn>
NmResult nelder_mead(Fn&& f, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& init_step, const NmOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  NmResult result;
  result.x = x0;

  auto run = [&](Eigen::VectorXd start, Eigen::VectorXd steps) {
    std::vector<Eigen::VectorXd> pts(n + 1, start);
    std::vector<double> vals(n + 1);
    for (int i = 0; i < n; ++i) pts[i + 1](i) += steps(i);
    for (int i = 0; i <= n; ++i) {
      vals[i] = f(pts[i]);
      ++result.evaluations;
    }
    std::vector<int> order(n + 1);
    bool converged = false;
    for (int iter = 0; iter < opt.max_iter; ++iter) {
      for (int i = 0; i <= n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](int a, int b) { return vals[a] < vals[b]; });
      const int best = order[0], worst = order[n], second = order[n - 1];
      const double spread = std::abs(vals[worst] - vals[best]);
      double xsize = 0.0;
      for (int i = 0; i <= n; ++i)
        xsize = std::max(xsize, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
      if (spread <= opt.ftol * (std::abs(vals[best]) + opt.ftol) ||
          xsize <= opt.xtol) {
        converged = true;
        break;
      }
      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
      for (int i = 0; i <= n; ++i)
        if (i != worst) centroid += pts[i];
      centroid /= n;

      auto eval = [&](const Eigen::VectorXd& p) {
        ++result.evaluations;
        return f(p);
      };
      const Eigen::VectorXd refl = centroid + (centroid - pts[worst]);
      const double frefl = eval(refl);
      if (frefl < vals[best]) {
        const Eigen::VectorXd expd = centroid + 2.0 * (centroid - pts[worst]);
        const double fexpd = eval(expd);
        if (fexpd < frefl) {
          pts[worst] = expd;
          vals[worst] = fexpd;
        } else {
          pts[worst] = refl;
          vals[worst] = frefl;
        }
      } else if (frefl < vals[second]) {
        pts[worst] = refl;
        vals[worst] = frefl;
      } else {
        const bool outside = frefl < vals[worst];
        const Eigen::VectorXd contr =
            centroid + (outside ? 0.5 : -0.5) * (centroid - pts[worst]);
        const double fcontr = eval(contr);
        if (fcontr < std::min(frefl, vals[worst])) {
          pts[worst] = contr;
          vals[worst] = fcontr;
        } else {
          for (int i = 0; i <= n; ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
            vals[i] = eval(pts[i]);
          }
        }
      }
    }
    int ibest = 0;
    for (int i = 1; i <= n; ++i)
      if (vals[i] < vals[ibest]) ibest = i;
    return std::make_tuple(pts[ibest], vals[ibest], converged);
  };

  auto [x, fx, conv] = run(x0, init_step);
  result.x = x;
  result.f = fx;
  result.converged = conv;
  for (int round = 0; round < opt.polish_rounds; ++round) {
    const double shrink = std::pow(0.05, round + 1);
    auto [xp, fp, convp] = run(result.x, init_step * shrink);
    if (fp < result.f) {
      result.x = xp;
      result.f = fp;
      result.converged = convp;
    }
  }
  return result;
}

struct LmOptions {
  int max_iter = 200;
  double ftol = 1e-15;    // relative cost decrease
  double fd_step = 1e-7;  // forward-difference Jacobian step
  double init_lambda = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  double cost = std::numeric_limits<double>::infinity();  // ||r||^2
  int iterations = 0;
  bool converged = false;
};

// Levenberg-Marquardt on a residual vector, Jacobian by forward differences.
// Meant as the local polish after a global multistart; converges to machine
// precision on smooth least-squares problems.
template <class ResidFn>
LmResult levenberg_marquardt(ResidFn&& residuals, const Eigen::VectorXd& x0,
                             const LmOptions& opt = {}) {
  LmResult res;
  res.x = x0;
  Eigen::VectorXd r = residuals(res.x);
  res.cost = r.squaredNorm();
  double lambda = opt.init_lambda;
  const int m = static_cast<int>(r.size());
  const int n = static_cast<int>(x0.size());
  Eigen::MatrixXd jac(m, n);
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    ++res.iterations;
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd xs = res.x;
      const double h = opt.fd_step * (1.0 + std::abs(xs(j)));
      xs(j) += h;
      jac.col(j) = (residuals(xs) - r) / h;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    bool stepped = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
      const Eigen::VectorXd xn = res.x + delta;
      const Eigen::VectorXd rn = residuals(xn);
      const double cn = rn.squaredNorm();
      if (cn < res.cost) {
        const double gain = res.cost - cn;
        res.x = xn;
        r = rn;
        res.cost = cn;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (gain <= opt.ftol * (res.cost + 1e-300)) {
          res.converged = true;
          return res;
        }
        break;
      }
      lambda *= 8.0;
    }
    if (!stepped) {
      res.converged = true;  // no descent direction left at any damping
      return res;
    }
  }
  return res;
}

// Low-discrepancy multistart points in [0,1)^n (additive Weyl recurrence
// seeded deterministically).
inline std::vector<Eigen::VectorXd> scrambled_starts(int count, int dim,
                                                     std::uint64_t seed) {
  std::vector<Eigen::VectorXd> starts;
  starts.reserve(count);
  // irrational strides from sqrt of successive primes
  static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37,
                                  41, 43, 47, 53, 59, 61, 67, 71};
  std::uint64_t s = seed * 0x9e3779b97f4a7c15ull + 0xbf58476d1ce4e5b9ull;
  Eigen::VectorXd offset(dim);
  for (int d = 0; d < dim; ++d) {
    s ^= s >> 30;
    s *= 0xbf58476d1ce4e5b9ull;
    s ^= s >> 27;
    offset(d) = static_cast<double>(s >> 11) * 0x1.0p-53;
  }
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd p(dim);
    for (int d = 0; d < dim; ++d) {
      const double stride = std::sqrt(primes[d % 20]);
      p(d) = std::fmod(offset(d) + (k + 1) * stride, 1.0);
    }
    starts.push_back(p);
  }
  return starts;
}

}  // namespace noonprobe
