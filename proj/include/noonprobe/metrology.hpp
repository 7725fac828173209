#pragma once

// Fisher information of the detection outcomes, scattering damage to the
// probed 85Rb ensemble, the numerically optimized standard quantum limit and
// the quantum-advantage ratios.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "noonprobe/optim.hpp"
#include "noonprobe/parallel.hpp"
#include "noonprobe/polarimetry.hpp"

namespace noonprobe {

struct FisherOptions {
  double step_T = 2e-6;        // central-difference step
  double prob_floor = 1e-12;   // guard against fringe-zero blowup
  bool include_noclick = false;
};

struct FisherResult {
  double total = 0.0;
  std::vector<double> per_outcome;
  std::vector<double> probs;
  std::vector<double> dprobs;
};

namespace detail {

// Configurations whose outcome probabilities sit below this value are inside
// the cancellation noise of the channel arithmetic; the angle and phase
// optimizers must not chase finite-difference noise there.  The flat optimum
// ridge always has equivalent configurations with healthy probabilities, so
// excluding the noisy zone does not change any reported maximum.
inline constexpr double kSearchFloor = 1e-7;

// One FI term from a three-point stencil.  Probabilities are non-negative, so
// their zeros are quadratic; there the finite-difference slope is curvature
// noise and P_i (d ln P_i)^2 would blow up against the tiny denominator.
// Such outcomes (P below the floor, or a stencil that straddles a zero)
// contribute zero, which is also what the fringe-extremum physics expects.
inline double fisher_term(double p0, double pp, double pm, double step,
                          double floor) {
  if (!std::isfinite(p0) || !std::isfinite(pp) || !std::isfinite(pm))
    throw std::runtime_error("fisher: non-finite probability");
  if (p0 < floor) return 0.0;
  if (p0 < 0.25 * std::max(pp, pm)) return 0.0;  // stencil straddles a zero
  const double dp = (pp - pm) / (2.0 * step);
  return dp * dp / p0;
}

}  // namespace detail

// I = sum_i P_i (d_B ln P_i)^2 with central differences.
template <class ProbFn>
FisherResult fisher_information(ProbFn&& probs_at, double field_T,
                                const FisherOptions& opt = {}) {
  if (!(opt.step_T > 0.0)) throw std::invalid_argument("fisher: step must be > 0");
  const std::vector<double> p0 = probs_at(field_T);
  const std::vector<double> pp = probs_at(field_T + opt.step_T);
  const std::vector<double> pm = probs_at(field_T - opt.step_T);
  if (pp.size() != p0.size() || pm.size() != p0.size())
    throw std::invalid_argument("fisher: outcome count changed across steps");
  FisherResult out;
  out.probs = p0;
  out.per_outcome.resize(p0.size());
  out.dprobs.resize(p0.size());
  for (size_t i = 0; i < p0.size(); ++i) {
    out.dprobs[i] = (pp[i] - pm[i]) / (2.0 * opt.step_T);
    const double term =
        detail::fisher_term(p0[i], pp[i], pm[i], opt.step_T, opt.prob_floor);
    out.per_outcome[i] = term;
    out.total += term;
  }
  return out;
}

// Outcome-probability closures used by all Fisher evaluations.
template <class ChannelFn>
auto pair_prob_fn(const TwoPhotonState& state, ChannelFn&& channel,
                  bool include_noclick = false) {
  return [state, channel = std::forward<ChannelFn>(channel),
          include_noclick](double b) {
    const OutcomeProbs p = outcome_probabilities(state, channel(b));
    std::vector<double> v{p.hh, p.hv, p.vv};
    if (include_noclick) v.push_back(std::max(0.0, 1.0 - p.sum()));
    return v;
  };
}

template <class ChannelFn>
auto single_prob_fn(const SinglePhotonState& state, ChannelFn&& channel,
                    const AnalyzerBasis& analyzer, bool include_noclick = false) {
  return [state, channel = std::forward<ChannelFn>(channel), analyzer,
          include_noclick](double b) {
    const auto p = single_probabilities(state, channel(b), analyzer);
    std::vector<double> v{p[0], p[1]};
    if (include_noclick) v.push_back(std::max(0.0, 1.0 - p[0] - p[1]));
    return v;
  };
}

// Mean number of photons scattered by the 85Rb ensemble per probe state,
// s_ab = 2 - |t_a^(85)|^2 - |t_b^(85)|^2 on the circular-basis diagonal.
struct ScatteringOperator {
  double s_plus = 0.0;   // singles: 1 - |t85+|^2
  double s_minus = 0.0;  // singles: 1 - |t85-|^2

  static ScatteringOperator from(const TransferCoefficients& t) {
    ScatteringOperator op;
    op.s_plus = 1.0 - std::norm(t.t85_plus);
    op.s_minus = 1.0 - std::norm(t.t85_minus);
    return op;
  }
  double pair_entry(int a, int b) const {
    const double sa = a == 0 ? s_plus : s_minus;
    const double sb = b == 0 ? s_plus : s_minus;
    return sa + sb;
  }
};

// S = Tr[rho Pi_scat], evaluated on the state before the cell.
inline double scattering_mean(const TwoPhotonState& state,
                              const ScatteringOperator& op) {
  const Eigen::Matrix4cd rho = state.in_basis(PolBasis::Circ).rho;
  double s = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) s += rho(2 * a + b, 2 * a + b).real() * op.pair_entry(a, b);
  return s;
}

inline double scattering_mean(const SinglePhotonState& state,
                              const ScatteringOperator& op) {
  const Eigen::Matrix2cd rho = state.in_basis(PolBasis::Circ).rho;
  return rho(0, 0).real() * op.s_plus + rho(1, 1).real() * op.s_minus;
}

// --- standard quantum limit --------------------------------------------------

enum class SqlObjective { FiPerPhoton, FiPerScatter };

struct SqlOptions {
  int restarts = 16;
  std::uint64_t seed = 20121u;
  FisherOptions fisher;
  NmOptions nm{1e-12, 1e-11, 4000, 2};
  int threads = 1;
};

struct SqlResult {
  double field_T = 0.0;
  SqlObjective objective = SqlObjective::FiPerPhoton;
  double objective_value = 0.0;
  double fisher = 0.0;            // FI of the optimal configuration
  double scattering = 0.0;        // S of the optimal input
  double fi_per_scatter = 0.0;
  std::array<double, 2> input_angles{};     // Bloch angles of the input ket
  std::array<double, 2> analyzer_angles{};  // Bloch angles of the analyzer port
  std::vector<double> restart_values;       // best objective per restart
  bool converged = false;
};

namespace detail {

// Channel frozen at the three stencil fields, so the angle search never
// re-evaluates the vapor model.
struct FrozenChannel {
  TransferCoefficients minus, center, plus;
  double step_T;

  template <class ChannelFn>
  static FrozenChannel make(ChannelFn&& channel, double field_T, double step_T) {
    return {channel(field_T - step_T), channel(field_T), channel(field_T + step_T),
            step_T};
  }
};

inline double single_fisher_frozen(const FrozenChannel& fc, const Eigen::Vector2cd& in_hv,
                                   const AnalyzerBasis& analyzer, const FisherOptions& opt,
                                   double* scatter = nullptr) {
  const Eigen::Matrix2cd& u = hv_to_circ_1();
  const Eigen::Vector2cd in_circ = u * in_hv;
  const Eigen::Vector2cd a = u * analyzer.port_a();
  const Eigen::Vector2cd b = u * analyzer.port_b();
  std::array<std::vector<double>, 3> p;
  const TransferCoefficients* ts[3] = {&fc.minus, &fc.center, &fc.plus};
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector2cd out(ts[k]->t_plus * in_circ(0), ts[k]->t_minus * in_circ(1));
    p[k] = {std::norm(a.dot(out)), std::norm(b.dot(out))};
    if (opt.include_noclick)
      p[k].push_back(std::max(0.0, 1.0 - p[k][0] - p[k][1]));
  }
  double fi = 0.0;
  for (size_t i = 0; i < p[1].size(); ++i)
    fi += fisher_term(p[1][i], p[2][i], p[0][i], fc.step_T, opt.prob_floor);
  if (scatter) {
    const ScatteringOperator op = ScatteringOperator::from(fc.center);
    *scatter = std::norm(in_circ(0)) * op.s_plus + std::norm(in_circ(1)) * op.s_minus;
  }
  return fi;
}

}  // namespace detail

// Maximizes FI (or FI/S) of a single photon over pure input polarization and
// projective analyzer, multistart simplex search over the four angles.
template <class ChannelFn>
SqlResult sql_optimize(ChannelFn&& channel, double field_T, SqlObjective objective,
                       const SqlOptions& opt = {}) {
  const auto frozen =
      detail::FrozenChannel::make(channel, field_T, opt.fisher.step_T);
  FisherOptions search = opt.fisher;
  search.prob_floor = std::max(search.prob_floor, detail::kSearchFloor);

  auto objective_at = [&](const Eigen::VectorXd& x) {
    const Eigen::Vector2cd in = bloch_ket(x(0), x(1));
    const AnalyzerBasis an{x(2), x(3)};
    double s = 0.0;
    const double fi = detail::single_fisher_frozen(frozen, in, an, search,
                                                   objective == SqlObjective::FiPerScatter ? &s : nullptr);
    if (objective == SqlObjective::FiPerScatter)
      return -(s > 1e-15 ? fi / s : 0.0);
    return -fi;
  };

  // Deterministic seeds plus scrambled ones; a linear input with a 45-degree
  // analyzer offset is the known optimum of the pure-rotation limit.
  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd x(4);
    x << kPi / 2.0, 0.0, kPi / 2.0 * 0.5, 0.0;
    starts.push_back(x);
    x << kPi / 2.0, kPi / 2.0, kPi / 4.0, kPi / 2.0;
    starts.push_back(x);
  }
  for (const Eigen::VectorXd& s :
       scrambled_starts(std::max(0, opt.restarts - 2), 4, opt.seed)) {
    Eigen::VectorXd x(4);
    x << s(0) * kPi, s(1) * 2.0 * kPi, s(2) * kPi, s(3) * 2.0 * kPi;
    starts.push_back(x);
  }

  std::vector<NmResult> runs(starts.size());
  Eigen::VectorXd step = Eigen::VectorXd::Constant(4, 0.35);
  parallel_for(starts.size(), opt.threads, [&](std::size_t i) {
    runs[i] = nelder_mead(objective_at, starts[i], step, opt.nm);
  });

  SqlResult result;
  result.field_T = field_T;
  result.objective = objective;
  size_t best = 0;
  for (size_t i = 0; i < runs.size(); ++i) {
    result.restart_values.push_back(-runs[i].f);
    if (runs[i].f < runs[best].f) best = i;
  }
  result.converged = false;
  for (const NmResult& r : runs)
    if (r.converged &&
        r.f <= runs[best].f + 1e-9 * (std::abs(runs[best].f) + 1e-30))
      result.converged = true;
  const Eigen::VectorXd& x = runs[best].x;
  result.input_angles = {x(0), x(1)};
  result.analyzer_angles = {x(2), x(3)};
  result.objective_value = -runs[best].f;
  double s = 0.0;
  result.fisher = detail::single_fisher_frozen(frozen, bloch_ket(x(0), x(1)),
                                               AnalyzerBasis{x(2), x(3)}, search, &s);
  result.scattering = s;
  result.fi_per_scatter = s > 1e-15 ? result.fisher / s : 0.0;
  return result;
}

// --- advantage ratios --------------------------------------------------------

struct EfficiencyModel {
  double eta_det = 0.95;
  double eta_path = 0.984;
  double eta_ex() const { return eta_det * eta_path; }
  void validate() const {
    if (!(eta_det > 0.0 && eta_det <= 1.0 && eta_path > 0.0 && eta_path <= 1.0))
      throw std::invalid_argument("efficiencies must lie in (0,1]");
  }
};

struct AdvantageReport {
  double field_T = 0.0;
  // NOON-state quantities (state of two photons)
  double fi_noon = 0.0;
  double scatter_noon = 0.0;
  // SQL quantities (single photon), one optimization per objective
  SqlResult sql_photon;
  SqlResult sql_scatter;
  SqlResult sql_scatter_pure85;
  double fi_noon_pure85 = 0.0;
  double scatter_noon_pure85 = 0.0;
  // headline ratios
  double per_photon = 0.0;          // I_noon / (2 I_sql)
  double per_scatter = 0.0;         // (I/S)_noon / (I/S)_sql
  double per_scatter_pure85 = 0.0;  // same with the 87Rb contaminant removed
  // extrinsic-efficiency adjusted ratios
  EfficiencyModel efficiency;
  double adj_per_photon = 0.0;
  double adj_per_scatter = 0.0;
  double adj_per_scatter_pure85 = 0.0;
};

// Scales Fisher information for constant extrinsic losses: two-photon FI by
// eta^2, single-photon FI by eta; every NOON/SQL ratio therefore scales by
// eta.
inline void apply_extrinsic_efficiency(AdvantageReport& report,
                                       const EfficiencyModel& eff) {
  eff.validate();
  const double eta = eff.eta_ex();
  report.efficiency = eff;
  report.adj_per_photon = report.per_photon * eta;
  report.adj_per_scatter = report.per_scatter * eta;
  report.adj_per_scatter_pure85 = report.per_scatter_pure85 * eta;
}

inline AdvantageReport advantage_ratios(const ChannelModel& channel, double field_T,
                                        const TwoPhotonState& noon,
                                        const SqlOptions& opt = {},
                                        const EfficiencyModel& eff = {}) {
  AdvantageReport rep;
  rep.field_T = field_T;

  const FisherResult fi =
      fisher_information(pair_prob_fn(noon, channel, opt.fisher.include_noclick),
                         field_T, opt.fisher);
  rep.fi_noon = fi.total;
  rep.scatter_noon = scattering_mean(noon, ScatteringOperator::from(channel(field_T)));

  rep.sql_photon = sql_optimize(channel, field_T, SqlObjective::FiPerPhoton, opt);
  rep.sql_scatter = sql_optimize(channel, field_T, SqlObjective::FiPerScatter, opt);
  if (!rep.sql_photon.converged || !rep.sql_scatter.converged)
    throw std::runtime_error("advantage_ratios: SQL optimizer did not converge");

  const ChannelModel pure85 = channel.without_rb87();
  const FisherResult fi85 =
      fisher_information(pair_prob_fn(noon, pure85, opt.fisher.include_noclick),
                         field_T, opt.fisher);
  rep.fi_noon_pure85 = fi85.total;
  rep.scatter_noon_pure85 =
      scattering_mean(noon, ScatteringOperator::from(pure85(field_T)));
  rep.sql_scatter_pure85 =
      sql_optimize(pure85, field_T, SqlObjective::FiPerScatter, opt);
  if (!rep.sql_scatter_pure85.converged)
    throw std::runtime_error("advantage_ratios: SQL optimizer did not converge");

  rep.per_photon = rep.fi_noon / (2.0 * rep.sql_photon.fisher);
  rep.per_scatter =
      (rep.fi_noon / rep.scatter_noon) / rep.sql_scatter.fi_per_scatter;
  rep.per_scatter_pure85 = (rep.fi_noon_pure85 / rep.scatter_noon_pure85) /
                           rep.sql_scatter_pure85.fi_per_scatter;
  apply_extrinsic_efficiency(rep, eff);
  return rep;
}

// NOON phase that maximizes the state's Fisher information at one field,
// mirroring the experiment's freedom to rotate the input polarization.  The
// channel is frozen at the stencil fields so the scan is pure algebra.
template <class ChannelFn>
double optimize_noon_phase(ChannelFn&& channel, double field_T, double fidelity_knob,
                           const FisherOptions& opt = {}) {
  const auto frozen = detail::FrozenChannel::make(channel, field_T, opt.step_T);
  const double floor = std::max(opt.prob_floor, detail::kSearchFloor);
  auto fi_at = [&](double phi) {
    const TwoPhotonState s = make_noon_state(phi, fidelity_knob);
    const OutcomeProbs p0 = outcome_probabilities(s, frozen.center);
    const OutcomeProbs pp = outcome_probabilities(s, frozen.plus);
    const OutcomeProbs pm = outcome_probabilities(s, frozen.minus);
    const auto a0 = p0.as_array(), ap = pp.as_array(), am = pm.as_array();
    double fi = 0.0;
    for (int i = 0; i < 3; ++i)
      fi += detail::fisher_term(a0[i], ap[i], am[i], opt.step_T, floor);
    return fi;
  };
  // period pi/2 in phi; coarse scan plus golden refinement
  double best_phi = 0.0, best_fi = -1.0;
  const int n = 96;
  for (int k = 0; k < n; ++k) {
    const double phi = 0.5 * kPi * k / n;
    const double fi = fi_at(phi);
    if (fi > best_fi) {
      best_fi = fi;
      best_phi = phi;
    }
  }
  double a = best_phi - 0.5 * kPi / n, b = best_phi + 0.5 * kPi / n;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = fi_at(c), fd = fi_at(d);
  for (int it = 0; it < 60; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = fi_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = fi_at(d);
    }
  }
  return 0.5 * (a + b);
}

// delta B = (I M)^{-1/2} for M repeated uses.
inline double magnetic_uncertainty(double fisher, double uses) {
  if (!(uses >= 1.0)) throw std::invalid_argument("magnetic_uncertainty: M >= 1");
  if (!(fisher > 0.0))
    throw std::domain_error("magnetic_uncertainty: undefined for zero Fisher information");
  return 1.0 / std::sqrt(fisher * uses);
}

// --- Fisher curve over a field grid -----------------------------------------

struct FisherPoint {
  double field_T = 0.0;
  OutcomeProbs probs;
  std::array<double, 3> dprobs{};
  double fi_total = 0.0;
  std::array<double, 3> fi_outcome{};
  double scattering = 0.0;
  double fi_per_scatter = 0.0;
};

struct FisherCurve {
  std::vector<FisherPoint> points;
};

template <class ChannelFn>
FisherCurve fisher_curve(const TwoPhotonState& state, ChannelFn&& channel,
                         const std::vector<double>& grid_T,
                         const FisherOptions& opt = {}, int threads = 1) {
  FisherCurve curve;
  curve.points.resize(grid_T.size());
  parallel_for(grid_T.size(), threads, [&](std::size_t i) {
    FisherPoint& pt = curve.points[i];
    pt.field_T = grid_T[i];
    const FisherResult fi =
        fisher_information(pair_prob_fn(state, channel, opt.include_noclick),
                           grid_T[i], opt);
    pt.probs = {fi.probs[0], fi.probs[1], fi.probs[2]};
    pt.dprobs = {fi.dprobs[0], fi.dprobs[1], fi.dprobs[2]};
    pt.fi_total = fi.total;
    for (int k = 0; k < 3; ++k) pt.fi_outcome[k] = fi.per_outcome[k];
    pt.scattering =
        scattering_mean(state, ScatteringOperator::from(channel(grid_T[i])));
    pt.fi_per_scatter = pt.scattering > 1e-15 ? pt.fi_total / pt.scattering : 0.0;
  });
  return curve;
}

}  // namespace noonprobe
