#pragma once

// Coincidence-count simulation and two-photon state reconstruction by
// chi-squared minimization, with Fisher-information error bands from
// constrained re-optimization around the fit optimum.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "noonprobe/metrology.hpp"
#include "noonprobe/rng.hpp"

namespace noonprobe {

// Counts are stored as doubles: measured data carries integers, while
// synthetic noiseless datasets use exact expected values.
struct CoincidencePoint {
  double field_T = 0.0;
  double t_int_s = 1.0;
  double n_hh = 0.0, n_hv = 0.0, n_vv = 0.0;
  bool has_singles = false;
  double n_h = 0.0, n_v = 0.0;
};

struct CoincidenceDataset {
  std::vector<CoincidencePoint> points;
  double temperature_C = 70.0;
  CellConfig cell;
  std::optional<double> true_rate;  // pairs/s, known for simulated data

  void validate() const {
    for (size_t i = 0; i < points.size(); ++i) {
      const CoincidencePoint& p = points[i];
      if (p.n_hh < 0 || p.n_hv < 0 || p.n_vv < 0)
        throw std::invalid_argument("dataset: negative counts");
      if (!(p.t_int_s > 0.0))
        throw std::invalid_argument("dataset: non-positive integration time");
      for (size_t j = 0; j < i; ++j)
        if (points[j].field_T == p.field_T)
          throw std::invalid_argument("dataset: duplicate field value");
    }
  }
};

// Poisson counts at lambda_i = R0 t_int P_i(B); deterministic per seed, with
// an independent substream per grid point.
template <class ChannelFn>
CoincidenceDataset simulate_counts(const TwoPhotonState& state, ChannelFn&& channel,
                                   const std::vector<double>& grid_T, double pair_rate,
                                   double t_int_s, std::uint64_t seed,
                                   bool include_singles = false, int threads = 1) {
  if (!(pair_rate > 0.0) || !(t_int_s > 0.0))
    throw std::invalid_argument("simulate_counts: rate and t_int must be positive");
  CoincidenceDataset data;
  data.true_rate = pair_rate;
  data.points.resize(grid_T.size());
  std::vector<OutcomeProbs> probs(grid_T.size());
  std::vector<std::array<double, 2>> singles(grid_T.size());
  parallel_for(grid_T.size(), threads, [&](std::size_t i) {
    const TransferCoefficients t = channel(grid_T[i]);
    probs[i] = outcome_probabilities(state, t);
    if (include_singles) singles[i] = singles_probabilities(state, t);
  });
  for (size_t i = 0; i < grid_T.size(); ++i) {
    Rng rng = Rng::substream(seed, i);
    CoincidencePoint& pt = data.points[i];
    pt.field_T = grid_T[i];
    pt.t_int_s = t_int_s;
    const double scale = pair_rate * t_int_s;
    pt.n_hh = static_cast<double>(rng.poisson(scale * probs[i].hh));
    pt.n_hv = static_cast<double>(rng.poisson(scale * probs[i].hv));
    pt.n_vv = static_cast<double>(rng.poisson(scale * probs[i].vv));
    if (include_singles) {
      pt.has_singles = true;
      // both photons of the pair feed the singles counters
      pt.n_h = static_cast<double>(rng.poisson(2.0 * scale * singles[i][0]));
      pt.n_v = static_cast<double>(rng.poisson(2.0 * scale * singles[i][1]));
    }
  }
  return data;
}

namespace detail {

// rho = G^dagger G / Tr[G^dagger G] with G lower triangular: 4 real diagonal
// entries and 6 complex sub-diagonal ones, 16 real parameters in all.
// Positivity holds at every iterate by construction.
inline Eigen::Matrix4cd density_from_params(const Eigen::VectorXd& x) {
  Eigen::Matrix4cd g = Eigen::Matrix4cd::Zero();
  int k = 4;
  for (int i = 0; i < 4; ++i) {
    g(i, i) = x(i);
    for (int j = 0; j < i; ++j) {
      g(i, j) = cplx(x(k), x(k + 1));
      k += 2;
    }
  }
  Eigen::Matrix4cd rho = g.adjoint() * g;
  const double tr = rho.trace().real();
  if (!(tr > 1e-300)) return Eigen::Matrix4cd::Identity() / 4.0;
  return rho / tr;
}

inline Eigen::VectorXd params_from_density(const Eigen::Matrix4cd& rho) {
  // Cholesky of rho + tiny ridge keeps the factorization well defined for
  // rank-deficient states.
  Eigen::Matrix4cd reg = rho + 1e-12 * Eigen::Matrix4cd::Identity();
  Eigen::LLT<Eigen::Matrix4cd> llt(reg);
  Eigen::Matrix4cd l = llt.matrixL();
  // G = L^dagger reproduces rho = G^dagger G
  Eigen::Matrix4cd g = l.adjoint();
  // rephase columns so diagonal is real positive: G -> D G with |D|=1
  Eigen::VectorXd x(16);
  for (int i = 0; i < 4; ++i) {
    const cplx d = g(i, i);
    const cplx ph = std::abs(d) > 0 ? std::conj(d) / std::abs(d) : cplx(1, 0);
    for (int j = 0; j < 4; ++j) g(i, j) *= ph;
  }
  int k = 4;
  for (int i = 0; i < 4; ++i) {
    x(i) = g(i, i).real();
    for (int j = 0; j < i; ++j) {
      x(k) = g(i, j).real();
      x(k + 1) = g(i, j).imag();
      k += 2;
    }
  }
  return x;
}

struct TomoModel {
  // Heisenberg-picture effects E_ik = T_k^dag Pi_i T_k in the circular basis,
  // so P_i(k) = Tr[E_ik rho] costs one 4x4 inner product.  When singles
  // counts participate in the fit, two more effects per point give the
  // expected H and V singles rates (both photons of the pair feed them).
  std::vector<std::array<Eigen::Matrix4cd, 3>> effects;
  std::vector<double> t_int;
  std::vector<std::array<double, 3>> counts;
  std::vector<std::array<double, 3>> weights;  // 1/max(N,1)
  bool with_singles = false;
  std::vector<std::array<Eigen::Matrix4cd, 2>> singles_effects;
  std::vector<std::array<double, 2>> singles_counts;
  std::vector<std::array<double, 2>> singles_weights;

  std::array<double, 3> probabilities(const Eigen::Matrix4cd& rho_circ,
                                      size_t point) const {
    std::array<double, 3> p{};
    for (int i = 0; i < 3; ++i)
      p[i] = (effects[point][i] * rho_circ).trace().real();
    return p;
  }

  // chi^2 with the pair rate profiled out in closed form (it enters the
  // model linearly); returns the optimal rate through *rate.
  double chi2(const Eigen::Matrix4cd& rho_circ, double* rate = nullptr) const {
    double s_nn = 0.0, s_nm = 0.0, s_mm = 0.0;
    for (size_t k = 0; k < counts.size(); ++k) {
      const std::array<double, 3> p = probabilities(rho_circ, k);
      for (int i = 0; i < 3; ++i) {
        const double model = t_int[k] * p[i];
        s_nn += weights[k][i] * counts[k][i] * counts[k][i];
        s_nm += weights[k][i] * counts[k][i] * model;
        s_mm += weights[k][i] * model * model;
      }
      if (with_singles)
        for (int i = 0; i < 2; ++i) {
          const double model =
              t_int[k] * (singles_effects[k][i] * rho_circ).trace().real();
          s_nn += singles_weights[k][i] * singles_counts[k][i] * singles_counts[k][i];
          s_nm += singles_weights[k][i] * singles_counts[k][i] * model;
          s_mm += singles_weights[k][i] * model * model;
        }
    }
    const double r = s_mm > 1e-300 ? std::max(0.0, s_nm / s_mm) : 0.0;
    if (rate) *rate = r;
    return std::max(0.0, s_nn - 2.0 * r * s_nm + r * r * s_mm);
  }

  // Weighted residual vector at the profiled rate; chi2 = ||resid||^2.
  Eigen::VectorXd residuals(const Eigen::Matrix4cd& rho_circ) const {
    double rate = 0.0;
    chi2(rho_circ, &rate);
    const size_t per_point = with_singles ? 5 : 3;
    Eigen::VectorXd r(per_point * counts.size());
    for (size_t k = 0; k < counts.size(); ++k) {
      const std::array<double, 3> p = probabilities(rho_circ, k);
      for (int i = 0; i < 3; ++i)
        r(per_point * k + i) = std::sqrt(weights[k][i]) *
                               (counts[k][i] - rate * t_int[k] * p[i]);
      if (with_singles)
        for (int i = 0; i < 2; ++i) {
          const double model =
              t_int[k] * (singles_effects[k][i] * rho_circ).trace().real();
          r(per_point * k + 3 + i) = std::sqrt(singles_weights[k][i]) *
                                     (singles_counts[k][i] - rate * model);
        }
    }
    return r;
  }
};

// Weighted linear inversion for X = rate * rho over unconstrained Hermitian
// matrices (probabilities are linear in rho), projected onto the physical
// cone.  Used only as a starting point; the optimizer itself stays in the
// factorized parametrization.
inline Eigen::VectorXd linear_inversion_start(const TomoModel& model) {
  const size_t n = model.counts.size();
  Eigen::MatrixXd design(3 * n, 16);
  Eigen::VectorXd rhs(3 * n);
  Eigen::VectorXd wts(3 * n);
  for (size_t k = 0; k < n; ++k)
    for (int i = 0; i < 3; ++i) {
      const Eigen::Matrix4cd& e = model.effects[k][i];
      const size_t row = 3 * k + i;
      int col = 0;
      for (int d = 0; d < 4; ++d) design(row, col++) = model.t_int[k] * e(d, d).real();
      for (int p = 0; p < 4; ++p)
        for (int q = p + 1; q < 4; ++q) {
          design(row, col++) = model.t_int[k] * 2.0 * e(q, p).real();
          design(row, col++) = model.t_int[k] * -2.0 * e(q, p).imag();
        }
      rhs(row) = model.counts[k][i];
      wts(row) = model.weights[k][i];
    }
  const Eigen::MatrixXd wa = wts.asDiagonal() * design;
  const Eigen::MatrixXd normal = design.transpose() * wa;
  const Eigen::VectorXd sol =
      (normal + 1e-9 * Eigen::MatrixXd::Identity(16, 16))
          .ldlt()
          .solve(design.transpose() * (wts.asDiagonal() * rhs));
  Eigen::Matrix4cd x_hat = Eigen::Matrix4cd::Zero();
  int col = 0;
  for (int d = 0; d < 4; ++d) x_hat(d, d) = sol(col++);
  for (int p = 0; p < 4; ++p)
    for (int q = p + 1; q < 4; ++q) {
      const double re = sol(col++);
      const double im = sol(col++);
      x_hat(p, q) = cplx(re, im);
      x_hat(q, p) = cplx(re, -im);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(x_hat);
  const double scale = std::max(es.eigenvalues().maxCoeff(), 1.0);
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(1e-9 * scale);
  Eigen::Matrix4cd rho0 =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  rho0 /= rho0.trace().real();
  return params_from_density(rho0);
}

template <class ChannelFn>
TomoModel build_tomo_model(const CoincidenceDataset& data, ChannelFn&& channel,
                           int threads, bool use_singles = false) {
  TomoModel model;
  const size_t n = data.points.size();
  model.effects.resize(n);
  model.t_int.resize(n);
  model.counts.resize(n);
  model.weights.resize(n);
  model.with_singles = use_singles;
  if (use_singles) {
    for (const CoincidencePoint& pt : data.points)
      if (!pt.has_singles)
        throw std::invalid_argument("joint singles fit needs N_H/N_V columns");
    model.singles_effects.resize(n);
    model.singles_counts.resize(n);
    model.singles_weights.resize(n);
  }
  const PovmSet& povm = coincidence_povm();
  const Eigen::Matrix4cd& u = hv_to_circ_2();
  parallel_for(n, threads, [&](std::size_t k) {
    const TransferCoefficients tc = channel(data.points[k].field_T);
    const Eigen::Matrix4cd t = TransferOperator::pairs(tc).mat;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Matrix4cd pi_circ = u * povm.elems[i] * u.adjoint();
      model.effects[k][i] = t.adjoint() * pi_circ * t;
    }
    if (use_singles) {
      // expected singles counts are rate * t_int * (P_x(photon 1) + P_x(photon 2))
      const Eigen::Matrix2cd chan = single_transfer_circ(tc);
      const Eigen::Matrix2cd& u1 = hv_to_circ_1();
      for (int i = 0; i < 2; ++i) {
        Eigen::Matrix2cd pi = Eigen::Matrix2cd::Zero();
        pi(i, i) = 1.0;  // H or V port
        const Eigen::Matrix2cd a = chan.adjoint() * (u1 * pi * u1.adjoint()) * chan;
        Eigen::Matrix4cd e = Eigen::Matrix4cd::Zero();
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c) {
            e.block<2, 2>(2 * r, 2 * c) += a(r, c) * Eigen::Matrix2cd::Identity();
            if (r == c) e.block<2, 2>(2 * r, 2 * c) += a;
          }
        model.singles_effects[k][i] = e;
      }
    }
  });
  for (size_t k = 0; k < n; ++k) {
    const CoincidencePoint& pt = data.points[k];
    model.t_int[k] = pt.t_int_s;
    model.counts[k] = {pt.n_hh, pt.n_hv, pt.n_vv};
    for (int i = 0; i < 3; ++i)
      model.weights[k][i] = 1.0 / std::max(model.counts[k][i], 1.0);
    if (use_singles) {
      model.singles_counts[k] = {pt.n_h, pt.n_v};
      for (int i = 0; i < 2; ++i)
        model.singles_weights[k][i] = 1.0 / std::max(model.singles_counts[k][i], 1.0);
    }
  }
  return model;
}

}  // namespace detail

// Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double state_fidelity(const TwoPhotonState& a, const TwoPhotonState& b) {
  const Eigen::Matrix4cd rho = a.in_basis(PolBasis::Circ).rho;
  const Eigen::Matrix4cd sig = b.in_basis(PolBasis::Circ).rho;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  const Eigen::Matrix4cd sqrt_rho = es.eigenvectors() *
                                    ev.cwiseSqrt().asDiagonal() *
                                    es.eigenvectors().adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es2(sqrt_rho * sig * sqrt_rho);
  double f = 0.0;
  for (int i = 0; i < 4; ++i) f += std::sqrt(std::max(0.0, es2.eigenvalues()(i)));
  return f * f;
}

struct ReconstructOptions {
  int restarts = 8;
  bool use_singles = false;  // include N_H/N_V rows in the chi-squared
  std::uint64_t seed = 7341u;
  NmOptions nm{1e-13, 1e-9, 12000, 2};
  int threads = 1;
  double identifiability_fidelity = 0.98;  // restart agreement threshold
};

struct TomographyResult {
  TwoPhotonState rho_hat;
  double rate_hat = 0.0;  // fitted R0 in pairs/s
  double chi2 = 0.0;
  std::vector<double> residuals;  // per point, signed, weighted
  StateMetrics metrics;
  double fitted_phi = 0.0;
  std::vector<double> restart_chi2;
  bool converged = false;
  bool identifiability_warning = false;
  Eigen::VectorXd params;  // internal factorization at the optimum
};

template <class ChannelFn>
TomographyResult reconstruct(const CoincidenceDataset& data, ChannelFn&& channel,
                             const ReconstructOptions& opt = {}) {
  data.validate();
  if (data.points.size() < 8)
    throw std::invalid_argument("reconstruct: need at least 8 field points");
  const detail::TomoModel model =
      detail::build_tomo_model(data, channel, opt.threads, opt.use_singles);

  auto objective = [&](const Eigen::VectorXd& x) {
    return model.chi2(detail::density_from_params(x));
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(detail::linear_inversion_start(model));
  starts.push_back(detail::params_from_density(Eigen::Matrix4cd::Identity() / 4.0));
  for (int r = 2; r < opt.restarts; ++r) {
    Rng rng = Rng::substream(opt.seed, static_cast<std::uint64_t>(r));
    Eigen::VectorXd x(16);
    for (int i = 0; i < 16; ++i) x(i) = 2.0 * rng.uniform() - 1.0;
    starts.push_back(x);
  }

  std::vector<NmResult> runs(starts.size());
  const Eigen::VectorXd step = Eigen::VectorXd::Constant(16, 0.25);
  parallel_for(starts.size(), opt.threads, [&](std::size_t i) {
    runs[i] = nelder_mead(objective, starts[i], step, opt.nm);
  });

  size_t best = 0;
  for (size_t i = 1; i < runs.size(); ++i)
    if (runs[i].f < runs[best].f) best = i;

  // Gauss-Newton polish down to machine precision, from the multistart winner
  // and from the linear-inversion seed (the latter is usually in the global
  // basin even when the simplex runs are not)
  auto residual_fn = [&](const Eigen::VectorXd& x) {
    return model.residuals(detail::density_from_params(x));
  };
  LmResult final_run = levenberg_marquardt(residual_fn, runs[best].x);
  const LmResult from_linear = levenberg_marquardt(residual_fn, starts[0]);
  if (from_linear.cost < final_run.cost) final_run = from_linear;

  TomographyResult result;
  result.params = final_run.x;
  result.rho_hat.basis = PolBasis::Circ;
  result.rho_hat.rho = detail::density_from_params(final_run.x);
  result.chi2 = model.chi2(result.rho_hat.rho, &result.rate_hat);
  result.converged = final_run.converged;
  for (const NmResult& r : runs) result.restart_chi2.push_back(r.f);

  // flat-direction heuristic: restarts that reach the optimal chi2 but end at
  // clearly different states indicate an unidentifiable fit
  for (size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].f > result.chi2 + 1.0) continue;
    TwoPhotonState s;
    s.basis = PolBasis::Circ;
    s.rho = detail::density_from_params(runs[i].x);
    if (state_fidelity(s, result.rho_hat) < opt.identifiability_fidelity)
      result.identifiability_warning = true;
  }

  const Eigen::VectorXd resid = model.residuals(result.rho_hat.rho);
  result.residuals.assign(resid.data(), resid.data() + resid.size());

  const auto [phi, fid] = best_noon_phase(result.rho_hat);
  result.fitted_phi = phi;
  result.metrics = state_metrics(result.rho_hat, phi);
  return result;
}

// --- Fisher-information error band -------------------------------------------

struct FiBandOptions {
  double delta = 1.0;  // allowed chi-squared excess, 1 ~ one sigma
  bool use_singles = false;  // must match the options of the fit
  FisherOptions fisher;
  NmOptions nm{1e-11, 1e-9, 6000, 1};
  int restarts = 4;
  std::uint64_t seed = 9917u;
  int threads = 1;
};

namespace detail {

// Generic penalized search: extremize value(x) subject to cost(x) <= budget,
// starting from a feasible x0.  The penalty compares the normalized
// constraint excess against the normalized value, and an infeasible endpoint
// is pulled back along the line to the start.  Returns the extremal value
// found.
template <class ValueFn, class CostFn>
double constrained_extremum(ValueFn&& value, CostFn&& cost, double budget,
                            double cost_slack, const Eigen::VectorXd& x0,
                            bool maximize, const NmOptions& nm, int restarts,
                            std::uint64_t seed, double start_spread) {
  const double vscale = std::max(std::abs(value(x0)), 1e-12);
  const double cscale = std::max(cost_slack, 1e-9);
  auto feasible = [&](const Eigen::VectorXd& p) {
    return cost(p) <= budget + 1e-6 * cscale;
  };
  double best = value(x0);
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd x = x0;
    if (r > 0) {
      Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
      for (int i = 0; i < x.size(); ++i)
        x(i) += start_spread * (2.0 * rng.uniform() - 1.0);
    }
    for (double weight : {1.0, 1e2, 1e4, 1e6}) {
      auto penalized = [&](const Eigen::VectorXd& p) {
        const double excess = std::max(0.0, cost(p) - budget) / cscale;
        return (maximize ? -1.0 : 1.0) * value(p) / vscale +
               weight * excess * excess;
      };
      x = nelder_mead(penalized, x, Eigen::VectorXd::Constant(x.size(), 0.02), nm).x;
    }
    if (!feasible(x)) {
      // bisection pullback toward the feasible start
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(x0 + mid * (x - x0)) ? lo : hi) = mid;
      }
      x = x0 + lo * (x - x0);
    }
    const double v = value(x);
    best = maximize ? std::max(best, v) : std::min(best, v);
  }
  return best;
}

}  // namespace detail

// [I_min, I_max] over physical states whose chi-squared exceeds the optimum
// by at most delta; always contains the FI of the fitted state.
template <class ChannelFn>
std::array<double, 2> fi_error_band(const TomographyResult& fit,
                                    const CoincidenceDataset& data,
                                    ChannelFn&& channel, double field_eval_T,
                                    const FiBandOptions& opt = {}) {
  if (opt.delta < 0.0) throw std::invalid_argument("fi_error_band: delta >= 0");
  const detail::TomoModel model =
      detail::build_tomo_model(data, channel, opt.threads, opt.use_singles);
  const auto frozen = detail::FrozenChannel::make(channel, field_eval_T,
                                                  opt.fisher.step_T);

  auto fi_of = [&](const Eigen::VectorXd& x) {
    TwoPhotonState s;
    s.basis = PolBasis::Circ;
    s.rho = detail::density_from_params(x);
    auto probs = [&](const TransferCoefficients& t) {
      const OutcomeProbs p = outcome_probabilities(s, t);
      std::vector<double> v{p.hh, p.hv, p.vv};
      if (opt.fisher.include_noclick) v.push_back(std::max(0.0, 1.0 - p.sum()));
      return v;
    };
    const auto p0 = probs(frozen.center);
    const auto pp = probs(frozen.plus);
    const auto pm = probs(frozen.minus);
    double fi = 0.0;
    for (size_t i = 0; i < p0.size(); ++i)
      fi += detail::fisher_term(p0[i], pp[i], pm[i], opt.fisher.step_T,
                                opt.fisher.prob_floor);
    return fi;
  };
  auto chi2_of = [&](const Eigen::VectorXd& x) {
    return model.chi2(detail::density_from_params(x));
  };

  const double budget = fit.chi2 + opt.delta;
  const double fi_center = fi_of(fit.params);
  const double spread = opt.delta > 0.0 ? 0.05 : 0.0;
  const double lo = detail::constrained_extremum(fi_of, chi2_of, budget, opt.delta,
                                                 fit.params, false, opt.nm,
                                                 opt.restarts, opt.seed, spread);
  const double hi = detail::constrained_extremum(fi_of, chi2_of, budget, opt.delta,
                                                 fit.params, true, opt.nm,
                                                 opt.restarts, opt.seed + 1, spread);
  return {std::min(lo, fi_center), std::max(hi, fi_center)};
}

}  // namespace noonprobe
