#include "blockfill/balancing.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "blockfill/spectral.hpp"

namespace blockfill::balancing {

namespace {

void check_symmetric(const Matrix& a, const char* who) {
  require(a.rows() == a.cols(), std::string(who) + ": matrix must be square");
  require_finite(a, who);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidInput(std::string(who) + ": matrix is not symmetric");
}

// Eigendecomposition of a symmetric matrix; eigenvalues descending.
struct SymEig {
  Vector lambda;
  Matrix vectors;
};

SymEig sym_eig(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success)
    throw Error("sym_eig: eigendecomposition failed");
  SymEig out;
  out.lambda = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

Matrix sym_power(const SymEig& eig, double power, double eig_floor,
                 const char* who) {
  Vector lam = eig.lambda;
  for (Index i = 0; i < lam.size(); ++i) {
    if (power < 0.0 && lam[i] <= eig_floor) {
      std::ostringstream msg;
      msg << who << ": eigenvalue " << lam[i] << " at or below floor "
          << eig_floor;
      throw IllConditioned(msg.str());
    }
    lam[i] = std::pow(std::max(lam[i], 0.0), power);
  }
  return eig.vectors * lam.asDiagonal() * eig.vectors.transpose();
}

void check_spd(const SymEig& eig, double eig_floor, const char* who) {
  if (eig.lambda.minCoeff() <= eig_floor) {
    std::ostringstream msg;
    msg << who << ": smallest eigenvalue " << eig.lambda.minCoeff()
        << " at or below floor " << eig_floor;
    throw IllConditioned(msg.str());
  }
}

}  // namespace

Vector sym_eigenvalues(const Matrix& a) {
  check_symmetric(a, "sym_eigenvalues");
  return sym_eig(a).lambda;
}

Matrix spd_sqrt(const Matrix& a, double eig_floor) {
  check_symmetric(a, "spd_sqrt");
  return sym_power(sym_eig(a), 0.5, eig_floor, "spd_sqrt");
}

Matrix spd_inv_sqrt(const Matrix& a, double eig_floor) {
  check_symmetric(a, "spd_inv_sqrt");
  auto eig = sym_eig(a);
  check_spd(eig, eig_floor, "spd_inv_sqrt");
  return sym_power(eig, -0.5, eig_floor, "spd_inv_sqrt");
}

BalanceResult psi_bal(const Matrix& x, const Matrix& y, double eig_floor) {
  check_symmetric(x, "psi_bal");
  check_symmetric(y, "psi_bal");
  require(x.rows() == y.rows(), "psi_bal: X and Y must share dimensions");
  auto ex = sym_eig(x);
  auto ey = sym_eig(y);
  check_spd(ex, eig_floor, "psi_bal(X)");
  check_spd(ey, eig_floor, "psi_bal(Y)");

  // W equals X^{1/2} (X^{1/2} Y X^{1/2})^{-1/2} X^{1/2}, but that inner
  // matrix squares the conditioning of the inputs. The Cholesky form is
  // equivalent and stable: with X = Lx Lx^T, Y = Ly Ly^T and the SVD
  // Lx^T Ly = U S V^T, the unique SPD solution of X = W Y W is
  // W = (Ly^-T V) S (Ly^-T V)^T.
  Eigen::LLT<Matrix> lx(0.5 * (x + x.transpose()));
  Eigen::LLT<Matrix> ly(0.5 * (y + y.transpose()));
  if (lx.info() != Eigen::Success || ly.info() != Eigen::Success)
    throw IllConditioned("psi_bal: Cholesky failed on an SPD-checked input");
  const Matrix cross = Matrix(lx.matrixL()).transpose() * Matrix(ly.matrixL());
  Eigen::JacobiSVD<Matrix> svd(cross,
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix k = Matrix(ly.matrixL())
                       .transpose()
                       .triangularView<Eigen::Upper>()
                       .solve(svd.matrixV());
  BalanceResult out;
  out.W = k * svd.singularValues().asDiagonal() * k.transpose();
  out.W = 0.5 * (out.W + out.W.transpose());
  const Matrix w_half = spd_sqrt(out.W, 0.0);
  out.cov_bal = w_half * y * w_half;
  out.cov_bal = 0.5 * (out.cov_bal + out.cov_bal.transpose());
  out.px = x.rows();
  out.py = y.rows();
  return out;
}

Matrix cov_bal(const Matrix& x, const Matrix& y, double eig_floor) {
  return psi_bal(x, y, eig_floor).cov_bal;
}

BalancedProjection proj_bal(Index r, const Matrix& x, const Matrix& y,
                            double eig_floor) {
  require(r >= 1 && r <= x.rows(), "proj_bal: r out of range");
  auto bal = psi_bal(x, y, eig_floor);
  auto eig = sym_eig(bal.cov_bal);

  BalancedProjection out;
  out.r = r;
  const Index p = x.rows();
  if (r < p) {
    const double gap = eig.lambda[r - 1] - eig.lambda[r];
    out.unique = gap > 1e-12 * std::max(1.0, eig.lambda[0]);
  }
  const Matrix vr = eig.vectors.leftCols(r);
  out.P = vr * vr.transpose();
  const Matrix w_half = spd_sqrt(bal.W, 0.0);
  const Matrix w_inv_half = spd_inv_sqrt(bal.W, eig_floor);
  out.Q = w_inv_half * out.P * w_half;
  return out;
}

Index sep_rank(const Vector& eigs, Index r0, double sigma0) {
  const Index p = eigs.size();
  require(p >= 1, "sep_rank: empty spectrum");
  require(r0 >= 1 && r0 <= p, "sep_rank: r0 out of range");
  require(sigma0 > 0.0, "sep_rank: sigma0 must be positive");
  for (Index r = r0; r >= 1; --r) {
    const double sr = eigs[r - 1];
    const double next = (r < p) ? eigs[r] : 0.0;
    if (sr >= sigma0 && sr - next >= sr / static_cast<double>(r0)) return r;
  }
  std::ostringstream msg;
  msg << "sep_rank: no admissible rank in [1, " << r0 << "] at sigma0=" << sigma0;
  throw NoAdmissibleRank(msg.str(), eigs);
}

Index sep_rank(const Matrix& sigma, Index r0, double sigma0) {
  check_symmetric(sigma, "sep_rank");
  return sep_rank(sym_eig(sigma).lambda, r0, sigma0);
}

std::pair<Matrix, Matrix> balanced_factorization(const Matrix& m, Index d) {
  require_finite(m, "balanced_factorization");
  require(d >= 1 && d <= std::min(m.rows(), m.cols()),
          "balanced_factorization: d out of range");
  auto svd = spectral::truncated_svd(m, d);
  const Vector root = svd.S.cwiseMax(0.0).cwiseSqrt();
  Matrix a = svd.U * root.asDiagonal();
  Matrix b = svd.V * root.asDiagonal();
  const double scale = std::max(1.0, m.norm());
  if ((m - a * b.transpose()).norm() > 1e-8 * scale)
    throw InvalidInput(
        "balanced_factorization: d below rank(M), reconstruction fails");
  return {std::move(a), std::move(b)};
}

Matrix weighted_covariance(const Matrix& rows, const Vector& w) {
  require(rows.rows() == w.size(),
          "weighted_covariance: weight length mismatch");
  return rows.transpose() * w.asDiagonal() * rows;
}

BalancedEmbeddings balance_embeddings(const Matrix& f, const Matrix& g,
                                      const Vector& px, const Vector& qy,
                                      double eig_floor) {
  require_finite(f, "balance_embeddings");
  require_finite(g, "balance_embeddings");
  require(f.cols() == g.cols(), "balance_embeddings: ranks differ");
  const Matrix sigma_f = weighted_covariance(f, px);
  const Matrix sigma_g = weighted_covariance(g, qy);

  const auto check_rank = [&](const Matrix& s, const char* side) {
    const Vector lam = sym_eigenvalues(s);
    if (lam.minCoeff() <= eig_floor) {
      std::ostringstream msg;
      msg << "balance_embeddings: " << side << " covariance has sigma_r "
          << lam.minCoeff() << " at or below floor " << eig_floor;
      throw RankDeficient(msg.str());
    }
  };
  check_rank(sigma_f, "F");
  check_rank(sigma_g, "G");

  // Ftil = F T^{-1}, Gtil = G T balances iff T^2 Sigma_G T^2 = Sigma_F,
  // i.e. T^2 is the balancing operator Psi(Sigma_G; Sigma_F).
  const Matrix w = psi_bal(sigma_f, sigma_g, eig_floor).W;
  BalancedEmbeddings out;
  out.T = spd_sqrt(w, 0.0);
  const Matrix t_inv = spd_inv_sqrt(w, eig_floor);
  out.F = f * t_inv;
  out.G = g * out.T;
  return out;
}

}  // namespace blockfill::balancing
