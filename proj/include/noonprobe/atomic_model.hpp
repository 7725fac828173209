#pragma once

// First-principles magneto-optical response of the two-isotope rubidium
// vapor: hyperfine/Zeeman level structure, sigma+- transition strengths,
// Doppler-broadened complex refractive indices and the amplitude
// transmission of the heated cell.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "noonprobe/angular.hpp"
#include "noonprobe/constants.hpp"
#include "noonprobe/faddeeva.hpp"

namespace noonprobe {

enum class Manifold { Ground5S12, Excited5P12 };

// Eigenstates of one D1 manifold at a fixed axial field.  Energies are in Hz
// relative to the zero-field centroid of the manifold; eigenvector columns
// are expressed in the |mJ, mI> product basis with mI fastest and both
// quantum numbers ascending.
struct LevelDiagram {
  double field_T = 0.0;
  Manifold manifold = Manifold::Ground5S12;
  Eigen::VectorXd energy_Hz;
  Eigen::MatrixXd states;  // column k is the k-th eigenvector

  int dim() const { return static_cast<int>(energy_Hz.size()); }
};

namespace detail {

inline Eigen::MatrixXd manifold_hamiltonian_Hz(const IsotopeConstants& iso,
                                               Manifold manifold, double field_T) {
  const double i_spin = iso.nuclear_spin;
  const double a_hfs = manifold == Manifold::Ground5S12 ? iso.ahfs_ground_Hz
                                                        : iso.ahfs_excited_Hz;
  const double g_j = manifold == Manifold::Ground5S12 ? iso.g_j_ground
                                                      : iso.g_j_excited;
  const int ni = spin_dim(i_spin);
  const Eigen::MatrixXd jz = spin_z(0.5);
  const Eigen::MatrixXd jp = spin_raising(0.5);
  const Eigen::MatrixXd iz = spin_z(i_spin);
  const Eigen::MatrixXd ip = spin_raising(i_spin);
  const Eigen::MatrixXd id_j = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd id_i = Eigen::MatrixXd::Identity(ni, ni);

  // J.I = Jz Iz + (J+ I- + J- I+)/2; everything is real in this basis.
  Eigen::MatrixXd j_dot_i = kron(jz, iz);
  j_dot_i += 0.5 * (kron(jp, ip.transpose()) + kron(jp.transpose(), ip));

  Eigen::MatrixXd h = a_hfs * j_dot_i;
  h += (kBohrMagnetonHz * field_T) *
       (g_j * kron(jz, id_i) + iso.g_i * kron(id_j, iz));
  return h;
}

}  // namespace detail

// Diagonalizes H_hfs + H_Zeeman of one manifold.  Energies come back sorted
// ascending; each eigenvector is rephased so its largest-magnitude component
// is positive.
inline LevelDiagram diagonalize_levels(const IsotopeConstants& iso,
                                       Manifold manifold, double field_T) {
  const Eigen::MatrixXd h = detail::manifold_hamiltonian_Hz(iso, manifold, field_T);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("hyperfine diagonalization failed");

  LevelDiagram out;
  out.field_T = field_T;
  out.manifold = manifold;
  out.energy_Hz = solver.eigenvalues();
  out.states = solver.eigenvectors();
  for (int k = 0; k < out.states.cols(); ++k) {
    int imax = 0;
    out.states.col(k).cwiseAbs().maxCoeff(&imax);
    if (out.states(imax, k) < 0.0) out.states.col(k) *= -1.0;
  }
  return out;
}

// One optical line of the polarizability sum.  Strengths are dimensionless:
// |<e|d_q|g>|^2 in units of the reduced dipole element squared, already
// weighted by the uniform thermal ground-state population, so each
// polarization sums to exactly 1/3 over the whole table at any field.
struct TransitionLine {
  double frequency_Hz = 0.0;
  double sigma_plus = 0.0;
  double sigma_minus = 0.0;
};

inline std::vector<TransitionLine> transition_table(const IsotopeConstants& iso,
                                                    double field_T) {
  const LevelDiagram ground = diagonalize_levels(iso, Manifold::Ground5S12, field_T);
  const LevelDiagram excited = diagonalize_levels(iso, Manifold::Excited5P12, field_T);
  const int ni = spin_dim(iso.nuclear_spin);
  const double pop = 1.0 / ground.dim();
  const double weight = dipole_sigma_weight();

  std::vector<TransitionLine> lines;
  lines.reserve(static_cast<size_t>(ground.dim()) * excited.dim());
  for (int g = 0; g < ground.dim(); ++g) {
    for (int e = 0; e < excited.dim(); ++e) {
      // sigma+: mJ -1/2 -> +1/2 (dipole is diagonal in mI); sigma-: reverse.
      double amp_plus = 0.0, amp_minus = 0.0;
      for (int mi = 0; mi < ni; ++mi) {
        amp_plus += excited.states(ni + mi, e) * ground.states(mi, g);
        amp_minus += excited.states(mi, e) * ground.states(ni + mi, g);
      }
      TransitionLine line;
      line.frequency_Hz = iso.d1_frequency_Hz + excited.energy_Hz(e) - ground.energy_Hz(g);
      line.sigma_plus = pop * weight * amp_plus * amp_plus;
      line.sigma_minus = pop * weight * amp_minus * amp_minus;
      if (line.sigma_plus > 1e-14 || line.sigma_minus > 1e-14)
        lines.push_back(line);
    }
  }
  return lines;
}

// Total Rb number density from the vapor-pressure fit; valid for the cell's
// operating range.
inline double vapor_density(double temperature_C) {
  if (temperature_C < 0.0 || temperature_C > 150.0)
    throw std::invalid_argument("vapor_density: temperature outside [0,150] C");
  const double t_K = temperature_C + kZeroCelsiusK;
  return rubidium_vapor_pressure_Pa(temperature_C) / (kBoltzmann * t_K);
}

// 1-sigma Doppler width of the optical line, in Hz.
inline double doppler_sigma(const IsotopeConstants& iso, double temperature_C) {
  const double t_K = temperature_C + kZeroCelsiusK;
  return iso.d1_frequency_Hz / kSpeedOfLight *
         std::sqrt(kBoltzmann * t_K / iso.mass_kg);
}

struct CellConfig {
  double length_m = 0.075;
  double temperature_C = 70.0;
  double rb85_abundance = 0.995;
  double rb87_abundance = 0.005;
  double field_drop = 0.15;  // fractional drop of B from center to faces
  int slices = 51;           // Simpson nodes along the beam, odd

  double abundance(const IsotopeConstants& iso) const {
    return iso.isotope_label == 85 ? rb85_abundance : rb87_abundance;
  }
  // B(z) with z measured from the cell center.
  double field_at(double b_center_T, double z_m) const {
    const double u = 2.0 * z_m / length_m;
    return b_center_T * (1.0 - field_drop * u * u);
  }
  void validate() const {
    if (!(length_m > 0.0)) throw std::invalid_argument("cell length must be positive");
    if (slices < 3 || slices % 2 == 0)
      throw std::invalid_argument("slices must be odd and >= 3");
    if (field_drop < 0.0 || field_drop >= 1.0)
      throw std::invalid_argument("field drop must lie in [0,1)");
    if (rb85_abundance < 0.0 || rb87_abundance < 0.0)
      throw std::invalid_argument("abundances must be non-negative");
    if (temperature_C < 0.0 || temperature_C > 150.0)
      throw std::invalid_argument("temperature outside [0,150] C");
  }
};

struct IndexPair {
  cplx n_plus{1.0, 0.0};
  cplx n_minus{1.0, 0.0};
};

namespace detail {

// n - 1 = sum over lines of N d^2 S V(nu_line - nu) / (2 eps0 h); the
// prefactor reproduces the standard two-level cross section in the
// zero-field, zero-Doppler limit.
inline double polarizability_prefactor(const IsotopeConstants& iso,
                                       double density_m3) {
  return density_m3 * iso.dipole_Cm * iso.dipole_Cm /
         (2.0 * kEpsilon0 * kPlanck);
}

inline IndexPair index_from_lines(const std::vector<TransitionLine>& lines,
                                  double prefactor, double sigma_doppler_Hz,
                                  double natural_width_Hz, double nu_Hz) {
  cplx chi_half_plus(0.0, 0.0), chi_half_minus(0.0, 0.0);
  for (const TransitionLine& line : lines) {
    const cplx v = voigt_profile(line.frequency_Hz - nu_Hz, sigma_doppler_Hz,
                                 natural_width_Hz);
    chi_half_plus += prefactor * line.sigma_plus * v;
    chi_half_minus += prefactor * line.sigma_minus * v;
  }
  return {1.0 + chi_half_plus, 1.0 + chi_half_minus};
}

}  // namespace detail

// Complex refractive indices of one isotope at a uniform field.
inline IndexPair complex_index(const IsotopeConstants& iso, const CellConfig& cfg,
                               double nu_Hz, double field_T) {
  cfg.validate();
  const double density = vapor_density(cfg.temperature_C) * cfg.abundance(iso);
  return detail::index_from_lines(
      transition_table(iso, field_T),
      detail::polarizability_prefactor(iso, density),
      doppler_sigma(iso, cfg.temperature_C), iso.natural_width_Hz, nu_Hz);
}

// Amplitude transmissions of the full cell for sigma+- light, with the
// common vacuum phase removed.  t = t85 * t87 holds by construction.
struct TransferCoefficients {
  cplx t_plus{1.0, 0.0};
  cplx t_minus{1.0, 0.0};
  cplx t85_plus{1.0, 0.0};
  cplx t85_minus{1.0, 0.0};
  cplx t87_plus{1.0, 0.0};
  cplx t87_minus{1.0, 0.0};

  // Faraday rotation of linear polarization, radians (principal value).
  double faraday_angle() const { return 0.5 * std::arg(t_minus / t_plus); }
};

// Keeps the phases, drops the attenuation; the synthetic "lossless channel".
inline TransferCoefficients phases_only(const TransferCoefficients& t) {
  auto unit = [](cplx v) { return std::abs(v) > 0.0 ? v / std::abs(v) : cplx(1.0, 0.0); };
  TransferCoefficients out;
  out.t85_plus = unit(t.t85_plus);
  out.t85_minus = unit(t.t85_minus);
  out.t87_plus = unit(t.t87_plus);
  out.t87_minus = unit(t.t87_minus);
  out.t_plus = out.t85_plus * out.t87_plus;
  out.t_minus = out.t85_minus * out.t87_minus;
  return out;
}

// Precomputed per-slice level structure for one cell at one center field;
// evaluating the transmission at many probe frequencies then only costs the
// Voigt sums.  The level tables depend on B(z) but not on nu.
class CellResponse {
 public:
  CellResponse(const CellConfig& cfg, double b_center_T) : cfg_(cfg), b_center_(b_center_T) {
    cfg.validate();
    const int n = cfg.slices;
    const double h = cfg.length_m / (n - 1);
    const double density = vapor_density(cfg.temperature_C);
    for (const IsotopeConstants* iso : cell_species()) {
      SpeciesTables tab;
      tab.iso = iso;
      tab.prefactor = detail::polarizability_prefactor(
          *iso, density * cfg.abundance(*iso));
      tab.sigma_doppler = doppler_sigma(*iso, cfg.temperature_C);
      if (tab.prefactor > 0.0) {
        tab.slice_lines.resize(n);
        for (int i = 0; i < n; ++i) {
          const double z = -0.5 * cfg.length_m + i * h;
          tab.slice_lines[i] = transition_table(*iso, cfg.field_at(b_center_T, z));
        }
      }
      species_.push_back(std::move(tab));
    }
    weights_.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      weights_[i] = w * h / 3.0;
    }
  }

  TransferCoefficients transmission(double nu_Hz) const {
    TransferCoefficients out;
    const double wavevector = 2.0 * kPi * nu_Hz / kSpeedOfLight;
    for (const SpeciesTables& tab : species_) {
      cplx path_plus(0.0, 0.0), path_minus(0.0, 0.0);
      for (size_t i = 0; i < tab.slice_lines.size(); ++i) {
        const IndexPair n_iso = detail::index_from_lines(
            tab.slice_lines[i], tab.prefactor, tab.sigma_doppler,
            tab.iso->natural_width_Hz, nu_Hz);
        path_plus += weights_[i] * (n_iso.n_plus - 1.0);
        path_minus += weights_[i] * (n_iso.n_minus - 1.0);
      }
      const cplx t_plus = std::exp(cplx(0.0, 1.0) * wavevector * path_plus);
      const cplx t_minus = std::exp(cplx(0.0, 1.0) * wavevector * path_minus);
      if (tab.iso->isotope_label == 85) {
        out.t85_plus = t_plus;
        out.t85_minus = t_minus;
      } else {
        out.t87_plus = t_plus;
        out.t87_minus = t_minus;
      }
    }
    out.t_plus = out.t85_plus * out.t87_plus;
    out.t_minus = out.t85_minus * out.t87_minus;
    return out;
  }

  const CellConfig& config() const { return cfg_; }
  double field_center() const { return b_center_; }

 private:
  struct SpeciesTables {
    const IsotopeConstants* iso = nullptr;
    double prefactor = 0.0;
    double sigma_doppler = 0.0;
    std::vector<std::vector<TransitionLine>> slice_lines;
  };
  CellConfig cfg_;
  double b_center_;
  std::vector<SpeciesTables> species_;
  std::vector<double> weights_;
};

inline TransferCoefficients cell_transmission(const CellConfig& cfg, double nu_Hz,
                                              double b_center_T) {
  return CellResponse(cfg, b_center_T).transmission(nu_Hz);
}

// The probing channel as a function of the center field: one cell, one probe
// frequency, with the synthetic toggles the analysis commands expose.
struct ChannelModel {
  CellConfig cell;
  double probe_nu_Hz = probe_frequency_Hz();
  bool lossless = false;
  bool pure_rb85 = false;

  TransferCoefficients operator()(double b_center_T) const {
    CellConfig cfg = cell;
    if (pure_rb85) cfg.rb87_abundance = 0.0;
    TransferCoefficients t = cell_transmission(cfg, probe_nu_Hz, b_center_T);
    return lossless ? phases_only(t) : t;
  }

  ChannelModel without_rb87() const {
    ChannelModel out = *this;
    out.pure_rb85 = true;
    return out;
  }
};

}  // namespace noonprobe
