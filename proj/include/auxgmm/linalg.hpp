#ifndef AUXGMM_LINALG_HPP
#define AUXGMM_LINALG_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "auxgmm/error.hpp"

// Small dense-matrix helpers shared by the bounds and estimator code. All of
// them accept arbitrary Eigen expressions and return plain dynamic matrices
// of the expression's scalar type.

namespace auxgmm {

template <typename Scalar>
using DynMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A matrix result that may have needed a pseudo-inverse on the way.
template <typename Scalar>
struct Flagged {
  DynMatrix<Scalar> value;
  bool pseudo_inverse = false;
};

template <typename Derived>
DynMatrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& a) {
  return (a + a.transpose()) / typename Derived::Scalar(2);
}

/// Inverse of a symmetric matrix through its eigendecomposition. Eigenvalues
/// below `rel_cutoff` times the largest magnitude are dropped and the result
/// is flagged as a pseudo-inverse.
template <typename Derived>
Flagged<typename Derived::Scalar> sym_inverse(const Eigen::MatrixBase<Derived>& a,
                                              double rel_cutoff = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "sym_inverse: matrix is not square");
  }
  Eigen::SelfAdjointEigenSolver<DynMatrix<Scalar>> es(symmetrize(a));
  const auto& ev = es.eigenvalues();
  const Scalar scale = ev.cwiseAbs().maxCoeff();
  Flagged<Scalar> out;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_ev(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > rel_cutoff * scale && scale > Scalar(0)) {
      inv_ev(i) = Scalar(1) / ev(i);
    } else {
      inv_ev(i) = Scalar(0);
      out.pseudo_inverse = true;
    }
  }
  out.value = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
  return out;
}

/// Smallest eigenvalue of the symmetrized difference A - B. Non-negative
/// values mean A dominates B in the positive semidefinite order.
template <typename DA, typename DB>
typename DA::Scalar psd_gap(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "psd_gap: operands must be square and equal-sized");
  }
  const DynMatrix<Scalar> diff = a - b;
  Eigen::SelfAdjointEigenSolver<DynMatrix<Scalar>> es(symmetrize(diff),
                                                      Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// (J' Omega^-1 J)^-1.
template <typename DJ, typename DO>
Flagged<typename DJ::Scalar> efficiency_bound(const Eigen::MatrixBase<DJ>& jac,
                                              const Eigen::MatrixBase<DO>& omega) {
  using Scalar = typename DJ::Scalar;
  if (omega.rows() != jac.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "efficiency_bound: J and Omega disagree on d_m");
  }
  auto omega_inv = sym_inverse(omega);
  const DynMatrix<Scalar> info = jac.transpose() * omega_inv.value * jac;
  auto bound = sym_inverse(info);
  return {symmetrize(bound.value), omega_inv.pseudo_inverse || bound.pseudo_inverse};
}

/// (J'WJ)^-1 J'W Omega W J (J'WJ)^-1.
template <typename DJ, typename DW, typename DO>
DynMatrix<typename DJ::Scalar> sandwich_variance(const Eigen::MatrixBase<DJ>& jac,
                                                 const Eigen::MatrixBase<DW>& weight,
                                                 const Eigen::MatrixBase<DO>& omega) {
  using Scalar = typename DJ::Scalar;
  const DynMatrix<Scalar> bread = jac.transpose() * weight * jac;
  Eigen::FullPivLU<DynMatrix<Scalar>> lu(bread);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::SingularBread, "sandwich_variance: J'WJ is singular");
  }
  const DynMatrix<Scalar> bread_inv = lu.inverse();
  const DynMatrix<Scalar> meat = jac.transpose() * weight * omega * weight * jac;
  return symmetrize(bread_inv * meat * bread_inv.transpose());
}

/// The optimal linear combination matrix A = J' Omega^-1 (d_beta x d_m).
template <typename DJ, typename DO>
Flagged<typename DJ::Scalar> optimal_combination(const Eigen::MatrixBase<DJ>& jac,
                                                 const Eigen::MatrixBase<DO>& omega) {
  auto omega_inv = sym_inverse(omega);
  return {jac.transpose() * omega_inv.value, omega_inv.pseudo_inverse};
}

/// Variance implied by a fixed combination matrix A: (AJ)^-1 A Omega A' (J'A')^-1.
template <typename DA, typename DJ, typename DO>
DynMatrix<typename DA::Scalar> combination_variance(const Eigen::MatrixBase<DA>& a,
                                                    const Eigen::MatrixBase<DJ>& jac,
                                                    const Eigen::MatrixBase<DO>& omega) {
  using Scalar = typename DA::Scalar;
  const DynMatrix<Scalar> aj_inv = (a * jac).inverse();
  return symmetrize(aj_inv * a * omega * a.transpose() * aj_inv.transpose());
}

}  // namespace auxgmm

#endif  // AUXGMM_LINALG_HPP
