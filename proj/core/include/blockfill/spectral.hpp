#pragma once

#include "blockfill/types.hpp"

namespace blockfill::spectral {

/// Singular values of a matrix together with its shape. Entries are
/// nonincreasing and nonnegative; length is min(rows, cols).
struct SpectralSummary {
  Vector sigmas;
  Index rows = 0;
  Index cols = 0;

  static SpectralSummary from_matrix(const Matrix& m);
  static SpectralSummary from_sigmas(Vector sigmas, Index rows, Index cols);
};

/// Rank-k truncated SVD with a deterministic sign convention: in each
/// column of U the entry of largest magnitude is nonnegative.
struct TruncatedSvd {
  Matrix U;  // rows x k, column-orthonormal
  Vector S;  // k nonincreasing nonnegative values
  Matrix V;  // cols x k, column-orthonormal
  Index k = 0;

  Matrix reconstruct() const { return U * S.asDiagonal() * V.transpose(); }
};

TruncatedSvd truncated_svd(const Matrix& m, Index k);

/// Best rank-k Frobenius approximation M_[k].
Matrix rank_k_approx(const Matrix& m, Index k);

/// sigma_1, computed through the same SVD path as everything else.
double operator_norm(const Matrix& m);

/// Relative singular gap delta_k = 1 - sigma_{k+1}/sigma_k (1-based k).
/// The conventional delta_0 is 1; this accessor requires 1 <= k < length.
double relative_gap(const SpectralSummary& s, Index k);

/// tail_q(k) = sum_{i > k} sigma_i^q for q >= 1, 0 <= k <= length.
double tail_norm(const SpectralSummary& s, Index k, double q);
double tail_norm(const Vector& sigmas, Index k, double q);

/// Both sides of the relative-gap SVD perturbation bound:
///   || Mhat_[k] - Mstar_[k] ||_F  <=  9 || Mhat - Mstar ||_F / (delta_k (1 - eta))
/// valid whenever || Mhat - Mstar ||_op <= eta sigma_k(Mstar) delta_k(Mstar).
struct SvdPerturbationCheck {
  double lhs = 0;       // || Mhat_[k] - Mstar_[k] ||_F
  double rhs = 0;       // 9 || Mhat - Mstar ||_F / (delta_k (1 - eta))
  double op_err = 0;    // || Mhat - Mstar ||_op
  double fro_err = 0;   // || Mhat - Mstar ||_F
  double sigma_k = 0;   // sigma_k(Mstar)
  double gap_k = 0;     // delta_k(Mstar)
  bool precondition_met = false;
  bool holds = false;
};

SvdPerturbationCheck svd_perturbation_check(const Matrix& mstar,
                                            const Matrix& mhat, Index k,
                                            double eta);

/// Orthogonal Procrustes: the R minimizing ||A - Bhat R||_F over
/// orthogonal R, computed from the SVD of Bhat^T A.
Matrix orthogonal_procrustes(const Matrix& a, const Matrix& bhat);

}  // namespace blockfill::spectral
