#pragma once

#include <utility>

#include "blockfill/types.hpp"

namespace blockfill::balancing {

/// Symmetric PSD square root via eigendecomposition.
Matrix spd_sqrt(const Matrix& a, double eig_floor = 0.0);

/// Symmetric inverse square root. Eigenvalues at or below the floor are
/// rejected (IllConditioned), never clamped silently.
Matrix spd_inv_sqrt(const Matrix& a, double eig_floor = kEigFloor);

/// Eigenvalues of a symmetric matrix, nonincreasing.
Vector sym_eigenvalues(const Matrix& a);

/// Result of the balancing operator: the unique SPD W with X = W Y W,
/// plus the balanced covariance W^{1/2} Y W^{1/2}.
struct BalanceResult {
  Matrix W;
  Matrix cov_bal;
  Index px = 0;  // input dimensions, for provenance
  Index py = 0;
};

/// W = X^{1/2} (X^{1/2} Y X^{1/2})^{-1/2} X^{1/2}.
BalanceResult psi_bal(const Matrix& x, const Matrix& y,
                      double eig_floor = kEigFloor);

/// CovBal(X, Y) = Psi(Y;X)^{1/2} Y Psi(Y;X)^{1/2}; symmetric in (X, Y) and
/// with spectrum sigma(X^{1/2} Y^{1/2}).
Matrix cov_bal(const Matrix& x, const Matrix& y, double eig_floor = kEigFloor);

/// Oblique projection Q = W^{-1/2} P_r W^{1/2} where P_r is the orthogonal
/// projection onto the top-r eigenspace of CovBal(Y, X).
struct BalancedProjection {
  Index r = 0;
  Matrix Q;
  Matrix P;
  bool unique = true;  // false when sigma_r = sigma_{r+1} up to tolerance
};

BalancedProjection proj_bal(Index r, const Matrix& x, const Matrix& y,
                            double eig_floor = kEigFloor);

/// sep-rank(r0, sigma0; Sigma) = max{ r in [r0] : sigma_r >= sigma0 and
/// sigma_r - sigma_{r+1} >= sigma_r / r0 }, with sigma_{p+1} := 0.
/// Throws NoAdmissibleRank (carrying the spectrum) when the set is empty.
Index sep_rank(const Matrix& sigma, Index r0, double sigma0);
Index sep_rank(const Vector& eigs, Index r0, double sigma0);

/// Balanced factorization M = A B^T with A^T A = B^T B, realized as
/// A = U Sigma^{1/2}, B = V Sigma^{1/2}, zero-padded to inner width d.
std::pair<Matrix, Matrix> balanced_factorization(const Matrix& m, Index d);

/// Balances embeddings under weighted covariances: Ftil = F T^{-1} and
/// Gtil = G T share the covariance CovBal(Sigma_F, Sigma_G), and all inner
/// products <f(x), g(y)> are preserved.
struct BalancedEmbeddings {
  Matrix F;
  Matrix G;
  Matrix T;  // r x r SPD
};

BalancedEmbeddings balance_embeddings(const Matrix& f, const Matrix& g,
                                      const Vector& px, const Vector& qy,
                                      double eig_floor = kEigFloor);

/// Weighted second-moment matrix sum_i w_i row_i row_i^T.
Matrix weighted_covariance(const Matrix& rows, const Vector& w);

}  // namespace blockfill::balancing
