#pragma once

// Physical constants and rubidium isotope data.
//
// Every isotope-specific number is carried with a short source string so the
// table can be dumped to (and cross-checked against) data/rb_constants.txt.
// Frequencies are ordinary frequencies in Hz unless a name says otherwise.

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace noonprobe {

// CODATA 2018 (SI exact where the 2019 redefinition fixed them)
inline constexpr double kPlanck = 6.62607015e-34;        // J s (exact)
inline constexpr double kHbar = 1.054571817e-34;         // J s
inline constexpr double kSpeedOfLight = 299792458.0;     // m/s (exact)
inline constexpr double kBoltzmann = 1.380649e-23;       // J/K (exact)
inline constexpr double kEpsilon0 = 8.8541878128e-12;    // F/m
inline constexpr double kBohrMagneton = 9.2740100783e-24;  // J/T
inline constexpr double kTorrToPascal = 133.32236842105263;
inline constexpr double kZeroCelsiusK = 273.15;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Bohr magneton over h, the natural Zeeman unit for Hamiltonians kept in Hz.
inline constexpr double kBohrMagnetonHz = kBohrMagneton / kPlanck;  // Hz/T

struct IsotopeConstants {
  int isotope_label;          // 85 or 87
  double nuclear_spin;        // I
  double g_j_ground;          // Lande g_J of 5S1/2
  double g_j_excited;         // Lande g_J of 5P1/2
  double g_i;                 // nuclear g-factor (mu_B convention, negative)
  double ahfs_ground_Hz;      // magnetic-dipole hyperfine A of 5S1/2
  double ahfs_excited_Hz;     // magnetic-dipole hyperfine A of 5P1/2
  double d1_frequency_Hz;     // D1 line centroid
  double natural_width_Hz;    // D1 natural linewidth Gamma/2pi (FWHM)
  double mass_kg;
  double dipole_Cm;           // reduced dipole element <J=1/2||er||J'=1/2>
  double abundance;           // fraction of this species in the cell

  int ground_dim() const { return 2 * static_cast<int>(2.0 * nuclear_spin + 1.0); }
};

// Cell composition from the experiment: purified 85Rb with 0.5% residual 87Rb.
inline const IsotopeConstants& rb85() {
  static const IsotopeConstants iso{
      85,
      2.5,
      2.00233113,
      0.6659,
      -0.00029364,
      1.0119108130e9,
      120.527e6,
      377.107385690e12,
      5.7500e6,
      1.409993199e-25,
      2.5377e-29,
      0.995,
  };
  return iso;
}

inline const IsotopeConstants& rb87() {
  static const IsotopeConstants iso{
      87,
      1.5,
      2.00233113,
      0.6659,
      -0.0009951414,
      3.417341305452145e9,
      407.24e6,
      377.107463380e12,
      5.7500e6,
      1.443160648e-25,
      2.5370e-29,
      0.005,
  };
  return iso;
}

inline std::array<const IsotopeConstants*, 2> cell_species() {
  return {&rb85(), &rb87()};
}

// Rubidium vapor pressure, CRC/Alcock fit as tabulated in the Steck data
// sheets.  Solid branch below the 39.30 C melting point, liquid above.
inline double rubidium_vapor_pressure_Pa(double temperature_C) {
  const double t_K = temperature_C + kZeroCelsiusK;
  const double log10_torr = (temperature_C < 39.30)
                                ? 2.881 + 4.857 - 4215.0 / t_K
                                : 2.881 + 4.312 - 4040.0 / t_K;
  return std::pow(10.0, log10_torr) * kTorrToPascal;
}

// Zero-field hyperfine shift of an F level relative to the manifold centroid,
// E(F) = A/2 [F(F+1) - I(I+1) - J(J+1)], J = 1/2 on both ends of the D1 line.
inline double hyperfine_shift_Hz(double ahfs_Hz, double nuclear_spin, double f) {
  const double j = 0.5;
  const double k =
      f * (f + 1.0) - nuclear_spin * (nuclear_spin + 1.0) - j * (j + 1.0);
  return 0.5 * ahfs_Hz * k;
}

// Probe frequency: the 87Rb D1 F=2 -> F'=1 transition the photon pairs are
// locked to.
inline double probe_frequency_Hz() {
  const IsotopeConstants& iso = rb87();
  return iso.d1_frequency_Hz +
         hyperfine_shift_Hz(iso.ahfs_excited_Hz, iso.nuclear_spin, 1.0) -
         hyperfine_shift_Hz(iso.ahfs_ground_Hz, iso.nuclear_spin, 2.0);
}

// One row of the shipped constants file: key, value, source.
struct ConstantRecord {
  std::string key;
  double value;
  std::string source;
};

inline std::vector<ConstantRecord> constants_table() {
  auto iso_rows = [](const IsotopeConstants& iso, const char* steck) {
    const std::string p = "rb" + std::to_string(iso.isotope_label) + ".";
    return std::vector<ConstantRecord>{
        {p + "nuclear_spin", iso.nuclear_spin, steck},
        {p + "g_j_5s12", iso.g_j_ground, "Steck, after Arimondo et al. RMP 49, 31 (1977)"},
        {p + "g_j_5p12", iso.g_j_excited, "Arimondo et al. RMP 49, 31 (1977)"},
        {p + "g_i", iso.g_i, steck},
        {p + "ahfs_5s12_Hz", iso.ahfs_ground_Hz, steck},
        {p + "ahfs_5p12_Hz", iso.ahfs_excited_Hz, steck},
        {p + "d1_frequency_Hz", iso.d1_frequency_Hz, steck},
        {p + "natural_width_Hz", iso.natural_width_Hz, steck},
        {p + "mass_kg", iso.mass_kg, steck},
        {p + "dipole_Cm", iso.dipole_Cm, steck},
        {p + "abundance", iso.abundance, "cell fill: purified 85Rb + 0.5% 87Rb"},
    };
  };
  std::vector<ConstantRecord> rows;
  for (const ConstantRecord& r :
       iso_rows(rb85(), "Steck, Rubidium 85 D Line Data"))
    rows.push_back(r);
  for (const ConstantRecord& r :
       iso_rows(rb87(), "Steck, Rubidium 87 D Line Data"))
    rows.push_back(r);
  rows.push_back({"vapor_pressure.solid_log10_torr_offset", 2.881 + 4.857,
                  "CRC/Alcock fit via Steck data sheets"});
  rows.push_back({"vapor_pressure.solid_log10_torr_slope_K", -4215.0,
                  "CRC/Alcock fit via Steck data sheets"});
  rows.push_back({"vapor_pressure.liquid_log10_torr_offset", 2.881 + 4.312,
                  "CRC/Alcock fit via Steck data sheets"});
  rows.push_back({"vapor_pressure.liquid_log10_torr_slope_K", -4040.0,
                  "CRC/Alcock fit via Steck data sheets"});
  rows.push_back({"vapor_pressure.melting_point_C", 39.30,
                  "CRC/Alcock fit via Steck data sheets"});
  return rows;
}

}  // namespace noonprobe
