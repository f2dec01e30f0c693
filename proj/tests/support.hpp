#ifndef AUXGMM_TESTS_SUPPORT_HPP
#define AUXGMM_TESTS_SUPPORT_HPP

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "auxgmm/data.hpp"
#include "auxgmm/propensity.hpp"
#include "auxgmm/sieve.hpp"
#include "auxgmm/simulate.hpp"

namespace testsupport {

// Hand enumeration of the two-point design used throughout: X uniform on
// {0, 1}, p(0) = 1/4, p(1) = 1/2, Y | X=0 uniform on {0, 1}, Y | X=1 uniform
// on {1, 2}. Written directly from the cell table, independent of the library.
struct Cells {
  double f[2] = {0.5, 0.5};
  double p[2] = {0.25, 0.5};
  double ey[2] = {0.5, 1.5};
  double vy[2] = {0.25, 0.25};
};

inline double pbar(const Cells& c) { return c.f[0] * c.p[0] + c.f[1] * c.p[1]; }

inline double beta_out(const Cells& c) {
  return (c.f[0] * c.p[0] * c.ey[0] + c.f[1] * c.p[1] * c.ey[1]) / pbar(c);
}

inline double beta_in(const Cells& c) { return c.f[0] * c.ey[0] + c.f[1] * c.ey[1]; }

// E[p(x)^2 V / (p^2 (1 - p(x))) + p(x) (E - b)^2 / p^2]
inline double omega1(const Cells& c) {
  const double p = pbar(c);
  const double b = beta_out(c);
  double s = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double e = c.ey[k] - b;
    s += c.f[k] * (c.p[k] * c.p[k] * c.vy[k] / (p * p * (1.0 - c.p[k])) + c.p[k] * e * e / (p * p));
  }
  return s;
}

// Known p: the second term carries p(x)^2 instead of p(x).
inline double omega1_known(const Cells& c) {
  const double p = pbar(c);
  const double b = beta_out(c);
  double s = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double e = c.ey[k] - b;
    s += c.f[k] * (c.p[k] * c.p[k] * c.vy[k] / (p * p * (1.0 - c.p[k])) +
                   c.p[k] * c.p[k] * e * e / (p * p));
  }
  return s;
}

inline double omega2(const Cells& c) {
  const double b = beta_in(c);
  double s = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double e = c.ey[k] - b;
    s += c.f[k] * (c.vy[k] / (1.0 - c.p[k]) + e * e);
  }
  return s;
}

// Variance of the verify-in IPW estimator with the true p(x).
inline double ipw_in_known(const Cells& c) {
  const double b = beta_in(c);
  double s = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double e = c.ey[k] - b;
    s += c.f[k] * (c.vy[k] + e * e) / (1.0 - c.p[k]);
  }
  return s;
}

// Verify-in IPW with gamma estimated in p(x) = gamma (1 + x): the known-p
// variance minus G I^-1 G', G = E[(E - b) p_gamma / (1 - p)], I = E[p_gamma^2 / (p (1 - p))].
inline double ipw_in_param(const Cells& c) {
  const double b = beta_in(c);
  double g = 0.0;
  double info = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double pg = 1.0 + k;
    g += c.f[k] * (c.ey[k] - b) * pg / (1.0 - c.p[k]);
    info += c.f[k] * pg * pg / (c.p[k] * (1.0 - c.p[k]));
  }
  return ipw_in_known(c) - g * g / info;
}

inline auxgmm::Dataset dgp_a(Eigen::Index n, std::uint64_t seed,
                             auxgmm::SampleCase c = auxgmm::SampleCase::VerifyOut) {
  auxgmm::DGPSpec spec = auxgmm::dgp_preset("dgp-a");
  spec.sample_case = c;
  return auxgmm::generate(spec, n, seed);
}

inline auxgmm::BasisSpec saturated_two_point() {
  auxgmm::BasisSpec b;
  b.kind = auxgmm::BasisKind::PowerSeries;
  b.degree = 1;
  return b;
}

inline Eigen::MatrixXd random_spd(Eigen::Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(k, k);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = z(rng);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(k, k);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = z(rng);
  return a;
}

inline double min_eigenvalue(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace testsupport

#endif  // AUXGMM_TESTS_SUPPORT_HPP
