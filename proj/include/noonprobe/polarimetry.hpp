#pragma once

// Polarization states of one and two photons, the lossy cell channel and
// detection-outcome probabilities.
//
// Conventions used throughout: |L> = (|H> + i|V>)/sqrt2 is sigma+, |R> =
// (|H> - i|V>)/sqrt2 is sigma-.  Faraday rotation by angle theta multiplies
// the sigma+- amplitudes by exp(-+ i theta).  Two-photon bases are ordered
// (HH, HV, VH, VV) and (LL, LR, RL, RR).

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "noonprobe/atomic_model.hpp"

namespace noonprobe {

enum class PolBasis { HV, Circ };

inline const Eigen::Matrix2cd& hv_to_circ_1() {
  static const Eigen::Matrix2cd u = [] {
    Eigen::Matrix2cd m;
    const double r = 1.0 / std::sqrt(2.0);
    m << cplx(r, 0), cplx(0, -r),  // <L|
        cplx(r, 0), cplx(0, r);    // <R|
    return m;
  }();
  return u;
}

inline const Eigen::Matrix4cd& hv_to_circ_2() {
  static const Eigen::Matrix4cd u = [] {
    const Eigen::Matrix2cd& s = hv_to_circ_1();
    Eigen::Matrix4cd m;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        m.block<2, 2>(2 * i, 2 * j) = s(i, j) * s;
    return m;
  }();
  return u;
}

struct SinglePhotonState {
  Eigen::Matrix2cd rho = Eigen::Matrix2cd::Identity() / 2.0;
  PolBasis basis = PolBasis::HV;

  SinglePhotonState in_basis(PolBasis target) const {
    if (target == basis) return *this;
    const Eigen::Matrix2cd& u = hv_to_circ_1();
    SinglePhotonState out;
    out.basis = target;
    out.rho = target == PolBasis::Circ ? Eigen::Matrix2cd(u * rho * u.adjoint())
                                       : Eigen::Matrix2cd(u.adjoint() * rho * u);
    return out;
  }
};

struct TwoPhotonState {
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Identity() / 4.0;
  PolBasis basis = PolBasis::Circ;

  TwoPhotonState in_basis(PolBasis target) const {
    if (target == basis) return *this;
    const Eigen::Matrix4cd& u = hv_to_circ_2();
    TwoPhotonState out;
    out.basis = target;
    out.rho = target == PolBasis::Circ ? Eigen::Matrix4cd(u * rho * u.adjoint())
                                       : Eigen::Matrix4cd(u.adjoint() * rho * u);
    return out;
  }
  double purity() const { return (rho * rho).trace().real(); }
};

// Pure polarization qubit from Bloch angles, in the HV basis.
inline Eigen::Vector2cd bloch_ket(double theta, double phi) {
  return {cplx(std::cos(0.5 * theta), 0.0),
          std::exp(cplx(0.0, phi)) * std::sin(0.5 * theta)};
}

inline SinglePhotonState make_single_state(double theta, double phi) {
  SinglePhotonState s;
  s.basis = PolBasis::HV;
  const Eigen::Vector2cd k = bloch_ket(theta, phi);
  s.rho = k * k.adjoint();
  return s;
}

// |N_phi> = (|LL> + e^{2 i phi} |RR>)/sqrt2 in the circular basis.
inline Eigen::Vector4cd noon_ket(double phi) {
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  const double r = 1.0 / std::sqrt(2.0);
  v(0) = cplx(r, 0.0);
  v(3) = r * std::exp(cplx(0.0, 2.0 * phi));
  return v;
}

// p |N_phi><N_phi| + (1-p)/3 * projector on the symmetric triplet subspace.
// p = 1 is the pure NOON state; the mixing knob lowers the fidelity while
// keeping the state bosonic.
inline TwoPhotonState make_noon_state(double phi, double fidelity_knob) {
  if (fidelity_knob < 0.0 || fidelity_knob > 1.0)
    throw std::invalid_argument("make_noon_state: knob outside [0,1]");
  const Eigen::Vector4cd n = noon_ket(phi);
  Eigen::Vector4cd sym = Eigen::Vector4cd::Zero();
  const double r = 1.0 / std::sqrt(2.0);
  sym(1) = cplx(r, 0.0);
  sym(2) = cplx(r, 0.0);
  Eigen::Matrix4cd triplet = Eigen::Matrix4cd::Zero();
  triplet(0, 0) = 1.0;
  triplet(3, 3) = 1.0;
  triplet += sym * sym.adjoint();

  TwoPhotonState out;
  out.basis = PolBasis::Circ;
  out.rho = fidelity_knob * (n * n.adjoint()) +
            (1.0 - fidelity_knob) / 3.0 * triplet;
  return out;
}

// Mixing knob that lands the NOON fidelity exactly on `fidelity`
// (F = p + (1-p)/3 for this family).
inline double knob_for_fidelity(double fidelity) {
  return (3.0 * fidelity - 1.0) / 2.0;
}

struct PovmSet {
  std::array<Eigen::Matrix4cd, 3> elems;  // HH, HV, VV
  PolBasis basis = PolBasis::HV;
};

// The post-selected coincidence outcomes: diag(1,0,0,0), diag(0,1,1,0),
// diag(0,0,0,1) in the HV basis.
inline const PovmSet& coincidence_povm() {
  static const PovmSet set = [] {
    PovmSet p;
    p.basis = PolBasis::HV;
    p.elems[0] = Eigen::Vector4cd(1, 0, 0, 0).asDiagonal();
    p.elems[1] = Eigen::Vector4cd(0, 1, 1, 0).asDiagonal();
    p.elems[2] = Eigen::Vector4cd(0, 0, 0, 1).asDiagonal();
    return p;
  }();
  return set;
}

// T(B) = diag(t+^2, t+t-, t-t+, t-^2) in the circular basis.
struct TransferOperator {
  Eigen::Matrix4cd mat = Eigen::Matrix4cd::Identity();
  PolBasis basis = PolBasis::Circ;

  static TransferOperator pairs(const TransferCoefficients& t) {
    TransferOperator op;
    op.basis = PolBasis::Circ;
    op.mat = Eigen::Vector4cd(t.t_plus * t.t_plus, t.t_plus * t.t_minus,
                              t.t_minus * t.t_plus, t.t_minus * t.t_minus)
                 .asDiagonal();
    return op;
  }
  TransferOperator in_basis(PolBasis target) const {
    if (target == basis) return *this;
    const Eigen::Matrix4cd& u = hv_to_circ_2();
    TransferOperator out;
    out.basis = target;
    out.mat = target == PolBasis::Circ ? Eigen::Matrix4cd(u * mat * u.adjoint())
                                       : Eigen::Matrix4cd(u.adjoint() * mat * u);
    return out;
  }
};

inline Eigen::Matrix2cd single_transfer_circ(const TransferCoefficients& t) {
  return Eigen::Vector2cd(t.t_plus, t.t_minus).asDiagonal();
}

struct OutcomeProbs {
  double hh = 0.0, hv = 0.0, vv = 0.0;
  double sum() const { return hh + hv + vv; }
  std::array<double, 3> as_array() const { return {hh, hv, vv}; }
};

// P_i = Tr[Pi_i T rho T^dagger], evaluated in the circular basis.
inline OutcomeProbs outcome_probabilities(const TwoPhotonState& state,
                                          const TransferOperator& channel,
                                          const PovmSet& povm = coincidence_povm()) {
  const Eigen::Matrix4cd rho = state.in_basis(PolBasis::Circ).rho;
  const Eigen::Matrix4cd t = channel.in_basis(PolBasis::Circ).mat;
  const Eigen::Matrix4cd out = t * rho * t.adjoint();
  const Eigen::Matrix4cd& u = hv_to_circ_2();
  OutcomeProbs p;
  double* slot[3] = {&p.hh, &p.hv, &p.vv};
  for (int i = 0; i < 3; ++i) {
    Eigen::Matrix4cd pi = povm.elems[i];
    if (povm.basis == PolBasis::HV) pi = u * pi * u.adjoint();
    *slot[i] = (pi * out).trace().real();
  }
  return p;
}

inline OutcomeProbs outcome_probabilities(const TwoPhotonState& state,
                                          const TransferCoefficients& t,
                                          const PovmSet& povm = coincidence_povm()) {
  return outcome_probabilities(state, TransferOperator::pairs(t), povm);
}

// Projective analyzer for single photons, defined by the Bloch angles of its
// transmitted port in the HV basis.
struct AnalyzerBasis {
  double theta = 0.0;
  double phi = 0.0;

  Eigen::Vector2cd port_a() const { return bloch_ket(theta, phi); }
  Eigen::Vector2cd port_b() const {
    // Orthogonal complement of port_a.
    const Eigen::Vector2cd a = port_a();
    return {-std::conj(a(1)), std::conj(a(0))};
  }
};

// {P_a, P_b} for a single photon through the cell and a projective analyzer.
inline std::array<double, 2> single_probabilities(const SinglePhotonState& state,
                                                  const TransferCoefficients& t,
                                                  const AnalyzerBasis& analyzer) {
  const Eigen::Matrix2cd rho = state.in_basis(PolBasis::Circ).rho;
  const Eigen::Matrix2cd chan = single_transfer_circ(t);
  const Eigen::Matrix2cd out = chan * rho * chan.adjoint();
  const Eigen::Matrix2cd& u = hv_to_circ_1();
  const Eigen::Vector2cd a = u * analyzer.port_a();
  const Eigen::Vector2cd b = u * analyzer.port_b();
  return {(a.adjoint() * out * a)(0).real(), (b.adjoint() * out * b)(0).real()};
}

struct StateMetrics {
  double purity = 0.0;
  double noon_fidelity = 0.0;
  double distinguishability = 0.0;
};

// purity, overlap with |N_phi>, and singlet population <psi-|rho|psi->.
inline StateMetrics state_metrics(const TwoPhotonState& state, double phi) {
  const Eigen::Matrix4cd rho = state.in_basis(PolBasis::Circ).rho;
  StateMetrics m;
  m.purity = (rho * rho).trace().real();
  const Eigen::Vector4cd n = noon_ket(phi);
  m.noon_fidelity = (n.adjoint() * rho * n)(0).real();
  // singlet (|HV> - |VH>)/sqrt2 expressed in the circular basis
  Eigen::Vector4cd singlet_hv = Eigen::Vector4cd::Zero();
  const double r = 1.0 / std::sqrt(2.0);
  singlet_hv(1) = cplx(r, 0.0);
  singlet_hv(2) = cplx(-r, 0.0);
  const Eigen::Vector4cd singlet = hv_to_circ_2() * singlet_hv;
  m.distinguishability = (singlet.adjoint() * rho * singlet)(0).real();
  return m;
}

// NOON phase maximizing <N_phi|rho|N_phi>, and that maximal fidelity.
inline std::pair<double, double> best_noon_phase(const TwoPhotonState& state) {
  const Eigen::Matrix4cd rho = state.in_basis(PolBasis::Circ).rho;
  const cplx coh = rho(0, 3);  // <LL|rho|RR>
  const double phi = -0.5 * std::arg(coh);
  const double fid = 0.5 * (rho(0, 0).real() + rho(3, 3).real()) + std::abs(coh);
  return {phi, fid};
}

// Per-photon marginal detection probabilities in the HV analyzer, averaged
// over the two photons of the pair.
inline std::array<double, 2> singles_probabilities(const TwoPhotonState& state,
                                                   const TransferCoefficients& t) {
  const Eigen::Matrix4cd rho = state.in_basis(PolBasis::Circ).rho;
  Eigen::Matrix2cd red1 = Eigen::Matrix2cd::Zero();
  Eigen::Matrix2cd red2 = Eigen::Matrix2cd::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        red1(i, j) += rho(2 * i + k, 2 * j + k);
        red2(i, j) += rho(k * 2 + i, k * 2 + j);
      }
  double ph = 0.0, pv = 0.0;
  for (const Eigen::Matrix2cd& red : {red1, red2}) {
    SinglePhotonState s;
    s.basis = PolBasis::Circ;
    s.rho = red;
    const auto p = single_probabilities(s, t, AnalyzerBasis{0.0, 0.0});
    ph += 0.5 * p[0];
    pv += 0.5 * p[1];
  }
  return {ph, pv};
}

struct FringePoint {
  double field_T = 0.0;
  OutcomeProbs pairs;
  double p_h = 0.0, p_v = 0.0;
  double rate_hh = 0.0, rate_hv = 0.0, rate_vv = 0.0;
};

struct FringeTable {
  std::vector<FringePoint> points;
  double pair_rate = 0.0;  // input flux R0, pairs/s
};

// Probabilities and rates over a monotone field grid.  ChannelFn maps a
// field value to TransferCoefficients.
template <class ChannelFn>
FringeTable fringe_scan(const TwoPhotonState& state, ChannelFn&& channel,
                        const std::vector<double>& field_grid_T, double pair_rate,
                        bool include_singles = true) {
  for (size_t i = 1; i < field_grid_T.size(); ++i)
    if (!(field_grid_T[i] > field_grid_T[i - 1]))
      throw std::invalid_argument("fringe_scan: field grid must be increasing");
  FringeTable table;
  table.pair_rate = pair_rate;
  table.points.resize(field_grid_T.size());
  for (size_t i = 0; i < field_grid_T.size(); ++i) {
    const TransferCoefficients t = channel(field_grid_T[i]);
    FringePoint& pt = table.points[i];
    pt.field_T = field_grid_T[i];
    pt.pairs = outcome_probabilities(state, t);
    if (include_singles) {
      const auto s = singles_probabilities(state, t);
      pt.p_h = s[0];
      pt.p_v = s[1];
    }
    pt.rate_hh = pair_rate * pt.pairs.hh;
    pt.rate_hv = pair_rate * pt.pairs.hv;
    pt.rate_vv = pair_rate * pt.pairs.vv;
  }
  return table;
}

// --- fringe analysis -------------------------------------------------------

struct SinusoidFit {
  double offset = 0.0;
  double amplitude = 0.0;
  double period = 0.0;
  double phase = 0.0;
  double chirp = 0.0;  // quadratic phase fraction, zero for the plain fit
  double rms_residual = 0.0;
};

namespace detail {

inline double sinusoid_residual(const std::vector<double>& x,
                                const std::vector<double>& y, double period,
                                SinusoidFit* fit = nullptr) {
  // Linear least squares in (offset, cos, sin) at fixed period.
  const size_t n = x.size();
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  const double w = 2.0 * kPi / period;
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d row(1.0, std::cos(w * x[i]), std::sin(w * x[i]));
    ata += row * row.transpose();
    atb += row * y[i];
  }
  const Eigen::Vector3d c = ata.ldlt().solve(atb);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double model = c(0) + c(1) * std::cos(w * x[i]) + c(2) * std::sin(w * x[i]);
    ss += (y[i] - model) * (y[i] - model);
  }
  if (fit) {
    fit->offset = c(0);
    fit->amplitude = std::hypot(c(1), c(2));
    fit->period = period;
    fit->phase = std::atan2(-c(2), c(1));
    fit->rms_residual = std::sqrt(ss / n);
  }
  return ss;
}

}  // namespace detail

// Best-fitting sinusoid over a dense period scan plus golden-section polish.
inline SinusoidFit fit_fringe_period(const std::vector<double>& x,
                                     const std::vector<double>& y) {
  if (x.size() < 8 || x.size() != y.size())
    throw std::invalid_argument("fit_fringe_period: need >= 8 samples");
  const double span = x.back() - x.front();
  const double lo = span / 40.0, hi = 3.0 * span;
  double best_p = lo, best_ss = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 800; ++k) {
    const double p = lo * std::pow(hi / lo, k / 800.0);
    const double ss = detail::sinusoid_residual(x, y, p);
    if (ss < best_ss) {
      best_ss = ss;
      best_p = p;
    }
  }
  double a = best_p / 1.08, b = best_p * 1.08;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = detail::sinusoid_residual(x, y, c);
  double fd = detail::sinusoid_residual(x, y, d);
  for (int it = 0; it < 80; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = detail::sinusoid_residual(x, y, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = detail::sinusoid_residual(x, y, d);
    }
  }
  SinusoidFit fit;
  detail::sinusoid_residual(x, y, 0.5 * (a + b), &fit);
  return fit;
}

namespace detail {

inline double chirped_residual(const std::vector<double>& x,
                               const std::vector<double>& y, double period,
                               double chirp, SinusoidFit* fit = nullptr) {
  // linear LSQ in (offset, cos, sin) at fixed carrier period and quadratic
  // phase term; x is first centered to keep the chirp well conditioned
  const size_t n = x.size();
  const double x0 = 0.5 * (x.front() + x.back());
  const double w = 2.0 * kPi / period;
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  auto phase = [&](double xi) {
    const double u = xi - x0;
    return w * (u + chirp * u * u);
  };
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d row(1.0, std::cos(phase(x[i])), std::sin(phase(x[i])));
    ata += row * row.transpose();
    atb += row * y[i];
  }
  const Eigen::Vector3d c = ata.ldlt().solve(atb);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double model =
        c(0) + c(1) * std::cos(phase(x[i])) + c(2) * std::sin(phase(x[i]));
    ss += (y[i] - model) * (y[i] - model);
  }
  if (fit) {
    fit->offset = c(0);
    fit->amplitude = std::hypot(c(1), c(2));
    fit->period = period;
    fit->phase = std::atan2(-c(2), c(1));
    fit->chirp = chirp;
    fit->rms_residual = std::sqrt(ss / n);
  }
  return ss;
}

}  // namespace detail

// Sinusoid fit allowing a quadratic phase ("chirp"); the reported period is
// the carrier period at the scan center.  Suited to Faraday fringes whose
// local frequency grows with the field: super-resolved and singles fringes
// share the same phase map, so their carrier periods keep the exact factor.
inline SinusoidFit fit_chirped_period(const std::vector<double>& x,
                                      const std::vector<double>& y) {
  if (x.size() < 8 || x.size() != y.size())
    throw std::invalid_argument("fit_chirped_period: need >= 8 samples");
  const double span = x.back() - x.front();
  double best_p = span, best_q = 0.0;
  double best_ss = std::numeric_limits<double>::infinity();
  for (int kq = -24; kq <= 24; ++kq) {
    const double q = kq / (24.0 * span);  // up to +-1/span
    for (int k = 0; k <= 240; ++k) {
      const double p = (span / 30.0) * std::pow(90.0, k / 240.0);  // span/30..3 span
      const double ss = detail::chirped_residual(x, y, p, q);
      if (ss < best_ss) {
        best_ss = ss;
        best_p = p;
        best_q = q;
      }
    }
  }
  // coordinate refinement
  for (int round = 0; round < 3; ++round) {
    for (double scale : {1.02, 1.002}) {
      double a = best_p / scale, b = best_p * scale;
      for (int it = 0; it < 40; ++it) {
        const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
        if (detail::chirped_residual(x, y, m1, best_q) <
            detail::chirped_residual(x, y, m2, best_q))
          b = m2;
        else
          a = m1;
      }
      best_p = 0.5 * (a + b);
    }
    double qa = best_q - 0.1 / span, qb = best_q + 0.1 / span;
    for (int it = 0; it < 40; ++it) {
      const double m1 = qa + (qb - qa) / 3.0, m2 = qb - (qb - qa) / 3.0;
      if (detail::chirped_residual(x, y, best_p, m1) <
          detail::chirped_residual(x, y, best_p, m2))
        qb = m2;
      else
        qa = m1;
    }
    best_q = 0.5 * (qa + qb);
  }
  SinusoidFit fit;
  detail::chirped_residual(x, y, best_p, best_q, &fit);
  return fit;
}

// (max - min)/(max + min) with the extrema of f refined by golden-section
// search around the best grid samples.
template <class Fn>
double visibility_refined(Fn&& f, double lo, double hi, int coarse = 256) {
  auto refine = [&](double a, double b, bool maximize) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    auto val = [&](double x) { return maximize ? -f(x) : f(x); };
    double fc = val(c), fd = val(d);
    for (int it = 0; it < 90; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - gr * (b - a);
        fc = val(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + gr * (b - a);
        fd = val(d);
      }
    }
    return f(0.5 * (a + b));
  };
  std::vector<double> xs(coarse + 1), ys(coarse + 1);
  for (int i = 0; i <= coarse; ++i) {
    xs[i] = lo + (hi - lo) * i / coarse;
    ys[i] = f(xs[i]);
  }
  double vmax = -std::numeric_limits<double>::infinity();
  double vmin = std::numeric_limits<double>::infinity();
  for (int i = 1; i < coarse; ++i) {
    if (ys[i] >= ys[i - 1] && ys[i] >= ys[i + 1])
      vmax = std::max(vmax, refine(xs[i - 1], xs[i + 1], true));
    if (ys[i] <= ys[i - 1] && ys[i] <= ys[i + 1])
      vmin = std::min(vmin, refine(xs[i - 1], xs[i + 1], false));
  }
  vmax = std::max({vmax, ys.front(), ys.back()});
  vmin = std::min({vmin, ys.front(), ys.back()});
  return (vmax - vmin) / (vmax + vmin);
}

}  // namespace noonprobe
