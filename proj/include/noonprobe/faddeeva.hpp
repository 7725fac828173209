#pragma once

// Faddeeva function w(z) = exp(-z^2) erfc(-iz) and the complex Voigt
// lineshape built on it.
//
// The rational approximation follows Weideman, SIAM J. Numer. Anal. 31, 1497
// (1994), with the coefficients generated at startup instead of hardcoded.
// Far from the origin a Laplace continued fraction is cheaper and more
// accurate.  Combined relative accuracy is well below 1e-10 on the upper
// half-plane, which comfortably covers the 1e-8 the vapor model needs.

#include <array>
#include <cmath>
#include <complex>

#include "noonprobe/constants.hpp"

namespace noonprobe {

using cplx = std::complex<double>;

namespace detail {

struct WeidemanTable {
  static constexpr int kTerms = 64;
  double scale = 0.0;                  // Weideman's L
  std::array<double, kTerms> coeff{};  // coeff[k] multiplies Z^k

  WeidemanTable() {
    constexpr int m = 2 * kTerms;
    constexpr int m2 = 2 * m;
    scale = std::sqrt(kTerms / std::sqrt(2.0));
    // Sample f(t) = exp(-t^2) (L^2 + t^2) on the tangent grid, fftshifted.
    std::array<double, m2> samples{};
    for (int i = 1; i < m2; ++i) {
      const int k = i - m;
      const double theta = k * kPi / m;
      const double t = scale * std::tan(0.5 * theta);
      const double f = std::exp(-t * t) * (scale * scale + t * t);
      samples[(i + m) % m2] = f;
    }
    // Real part of the DFT gives the Taylor coefficients of the mapped
    // function; only the first kTerms enter the rational evaluation.
    for (int k = 1; k <= kTerms; ++k) {
      double acc = 0.0;
      for (int n = 0; n < m2; ++n)
        acc += samples[n] * std::cos(2.0 * kPi * k * n / m2);
      coeff[k - 1] = acc / m2;
    }
  }
};

inline const WeidemanTable& weideman_table() {
  static const WeidemanTable table;
  return table;
}

inline cplx faddeeva_weideman(cplx z) {
  const WeidemanTable& tab = weideman_table();
  const cplx iz(-z.imag(), z.real());
  const cplx denom = tab.scale - iz;
  const cplx big_z = (tab.scale + iz) / denom;
  cplx poly = tab.coeff[WeidemanTable::kTerms - 1];
  for (int k = WeidemanTable::kTerms - 2; k >= 0; --k)
    poly = poly * big_z + tab.coeff[k];
  constexpr double inv_sqrt_pi = 0.5641895835477562869;
  return 2.0 * poly / (denom * denom) + inv_sqrt_pi / denom;
}

// Laplace continued fraction, adequate once |z| is a few tens.
inline cplx faddeeva_contfrac(cplx z) {
  constexpr int kDepth = 24;
  cplx r(0.0, 0.0);
  for (int n = kDepth; n >= 1; --n) r = (0.5 * n) / (z - r);
  constexpr double inv_sqrt_pi = 0.5641895835477562869;
  return cplx(0.0, inv_sqrt_pi) / (z - r);
}

}  // namespace detail

// w(z) on the upper half-plane (Im z >= 0); the lower half-plane is reached
// through w(z) = 2 exp(-z^2) - w(-z) and is only safe while exp(-z^2) does
// not overflow, which holds everywhere this project evaluates it.
inline cplx faddeeva_w(cplx z) {
  if (z.imag() < 0.0) return 2.0 * std::exp(-z * z) - faddeeva_w(-z);
  return std::norm(z) >= 1024.0 ? detail::faddeeva_contfrac(z)
                                : detail::faddeeva_weideman(z);
}

// Complex Voigt lineshape: the Lorentzian 1/(detuning - i Gamma/2) convolved
// with a unit-normalized Gaussian of standard deviation doppler_sigma.  The
// imaginary (absorptive) part integrates to pi regardless of the widths; the
// real part is the dispersive component and is odd in the detuning.
// natural_width is the FWHM Gamma; all three arguments share one unit (Hz
// here) and the result carries its inverse.
inline cplx voigt_profile(double detuning, double doppler_sigma,
                          double natural_width) {
  const double hwhm = 0.5 * natural_width;
  if (doppler_sigma <= 0.0) return 1.0 / cplx(detuning, -hwhm);
  const double s = std::sqrt(2.0) * doppler_sigma;
  const cplx z(-detuning / s, hwhm / s);
  return cplx(0.0, 1.0) * std::sqrt(0.5 * kPi) / doppler_sigma *
         faddeeva_w(z);
}

}  // namespace noonprobe
