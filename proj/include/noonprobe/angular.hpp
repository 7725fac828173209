#pragma once

// Spin operators on the |j, m> ladder (m ascending) and the electric-dipole
// coupling factors for the D1 line (J = 1/2 -> J' = 1/2).

#include <Eigen/Dense>
#include <cmath>

namespace noonprobe {

inline int spin_dim(double j) { return static_cast<int>(std::lround(2.0 * j)) + 1; }

inline Eigen::MatrixXd spin_z(double j) {
  const int n = spin_dim(j);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = -j + i;
  return m;
}

inline Eigen::MatrixXd spin_raising(double j) {
  const int n = spin_dim(j);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    const double mval = -j + i;
    m(i + 1, i) = std::sqrt(j * (j + 1.0) - mval * (mval + 1.0));
  }
  return m;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// |<J'=1/2, mJ+q | d_q | J=1/2, mJ>|^2 = (2/3) d^2 for the allowed sigma
// transitions (mJ = -q/2), zero otherwise; the pi component (q = 0) carries
// the remaining 1/3.  Only the squared magnitude ever enters the model, so
// the Clebsch-Gordan sign is dropped.
inline double dipole_sigma_weight() { return 2.0 / 3.0; }

}  // namespace noonprobe
