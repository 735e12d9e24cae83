#include "blockfill/spectral.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace blockfill::spectral {

namespace {

// Flip signs so the largest-magnitude entry of each U column is
// nonnegative; ties on magnitude resolve to the first index.
void apply_sign_convention(Matrix& u, Matrix& v) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index imax = 0;
    double best = -1.0;
    for (Index i = 0; i < u.rows(); ++i) {
      const double a = std::abs(u(i, j));
      if (a > best) {
        best = a;
        imax = i;
      }
    }
    if (u(imax, j) < 0.0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }
}

Eigen::JacobiSVD<Matrix> thin_svd(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

}  // namespace

SpectralSummary SpectralSummary::from_matrix(const Matrix& m) {
  require_finite(m, "SpectralSummary");
  Eigen::JacobiSVD<Matrix> svd(m);
  return {svd.singularValues(), m.rows(), m.cols()};
}

SpectralSummary SpectralSummary::from_sigmas(Vector sigmas, Index rows,
                                             Index cols) {
  require(sigmas.size() == std::min(rows, cols),
          "SpectralSummary: length must equal min(rows, cols)");
  for (Index i = 0; i < sigmas.size(); ++i) {
    require(std::isfinite(sigmas[i]) && sigmas[i] >= 0.0,
            "SpectralSummary: sigmas must be finite and nonnegative");
    if (i > 0)
      require(sigmas[i] <= sigmas[i - 1] + 1e-15 * std::abs(sigmas[i - 1]),
              "SpectralSummary: sigmas must be nonincreasing");
  }
  return {std::move(sigmas), rows, cols};
}

TruncatedSvd truncated_svd(const Matrix& m, Index k) {
  require_finite(m, "truncated_svd");
  require(k >= 1 && k <= std::min(m.rows(), m.cols()),
          "truncated_svd: k out of range");
  auto svd = thin_svd(m);
  Matrix u = svd.matrixU().leftCols(k);
  Matrix v = svd.matrixV().leftCols(k);
  Vector s = svd.singularValues().head(k);
  apply_sign_convention(u, v);
  return {std::move(u), std::move(s), std::move(v), k};
}

Matrix rank_k_approx(const Matrix& m, Index k) {
  return truncated_svd(m, k).reconstruct();
}

double operator_norm(const Matrix& m) {
  require_finite(m, "operator_norm");
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double relative_gap(const SpectralSummary& s, Index k) {
  require(k >= 1 && k < s.sigmas.size(), "relative_gap: k out of range");
  const double sk = s.sigmas[k - 1];
  if (sk <= 0.0) throw InvalidInput("relative_gap: sigma_k = 0, gap undefined");
  return 1.0 - s.sigmas[k] / sk;
}

double tail_norm(const Vector& sigmas, Index k, double q) {
  require(k >= 0 && k <= sigmas.size(), "tail_norm: k out of range");
  require(q >= 1.0, "tail_norm: q must be >= 1");
  double acc = 0.0;
  for (Index i = sigmas.size() - 1; i >= k; --i) acc += std::pow(sigmas[i], q);
  return acc;
}

double tail_norm(const SpectralSummary& s, Index k, double q) {
  return tail_norm(s.sigmas, k, q);
}

SvdPerturbationCheck svd_perturbation_check(const Matrix& mstar,
                                            const Matrix& mhat, Index k,
                                            double eta) {
  require(mstar.rows() == mhat.rows() && mstar.cols() == mhat.cols(),
          "svd_perturbation_check: dimension mismatch");
  require(eta > 0.0 && eta < 1.0, "svd_perturbation_check: eta must be in (0,1)");
  require(k >= 1 && k <= std::min(mstar.rows(), mstar.cols()),
          "svd_perturbation_check: k out of range");

  auto star = SpectralSummary::from_matrix(mstar);
  SvdPerturbationCheck out;
  out.sigma_k = star.sigmas[k - 1];
  if (out.sigma_k <= 0.0)
    throw InvalidInput("svd_perturbation_check: sigma_k(Mstar) = 0");
  out.gap_k = (k < star.sigmas.size()) ? relative_gap(star, k) : 1.0;
  if (out.gap_k <= 0.0)
    throw InvalidInput("svd_perturbation_check: zero relative gap at k");

  const Matrix diff = mhat - mstar;
  out.op_err = operator_norm(diff);
  out.fro_err = diff.norm();
  out.precondition_met = out.op_err <= eta * out.sigma_k * out.gap_k;
  out.lhs = (rank_k_approx(mhat, k) - rank_k_approx(mstar, k)).norm();
  out.rhs = 9.0 * out.fro_err / (out.gap_k * (1.0 - eta));
  out.holds = out.lhs <= out.rhs;
  return out;
}

Matrix orthogonal_procrustes(const Matrix& a, const Matrix& bhat) {
  require(a.rows() == bhat.rows() && a.cols() == bhat.cols(),
          "orthogonal_procrustes: shape mismatch");
  require_finite(a, "orthogonal_procrustes");
  require_finite(bhat, "orthogonal_procrustes");
  const Matrix cross = bhat.transpose() * a;
  auto svd = thin_svd(cross);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace blockfill::spectral
