#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "blockfill/datagen.hpp"
#include "blockfill/types.hpp"

namespace blockfill::risk {

using datagen::Dist;
using datagen::GroundTruthInstance;

/// Excess risk R(f,g;D) = E_D[(<f(x),g(y)> - h*(x,y))^2], computed on the
/// weighted-Frobenius path: for product blocks it is
/// ||M_ij(f,g) - M_ij(f*,g*)||_F^2 with M_ij[x,y] = sqrt(p_x q_y) <f,g>.
double risk(const Matrix& f, const Matrix& g, const GroundTruthInstance& inst,
            Dist dist);

/// Excess risk relative to the rank-s truncated truth h*_s = <f*_s, g*_s>,
/// where f*_s projects f* onto the top-s eigenspace of Sigma*_{1x1}.
double risk_r(const Matrix& f, const Matrix& g,
              const GroundTruthInstance& inst, Index s, Dist dist);

/// Weighted and unweighted factor-recovery errors against the rank-k
/// truncated truth, after balancing the pair and aligning it with a joint
/// orthogonal Procrustes rotation. The measured values upper-bound the
/// optimal ones over all rotations.
struct DeltaErrors {
  double delta0 = 0.0;
  double delta1 = 0.0;
  Matrix rotation;
};

DeltaErrors delta_errors(const Matrix& f, const Matrix& g,
                         const GroundTruthInstance& inst, Index k);

/// sigma_r( E_dx1[f f^T]^{1/2} E_dy1[g g^T]^{1/2} ).
double sigma_r_embed(const Matrix& f, const Matrix& g,
                     const GroundTruthInstance& inst, Index r);

/// alpha-conditioning: sigma_r(f,g)^2 >= (sigma*_r)^2 / alpha. Vacuous
/// (and flagged degenerate) when sigma*_r = 0.
struct ConditioningResult {
  bool ok = false;
  bool degenerate = false;
  double sigma_r = 0.0;
  double sigma_star_r = 0.0;
};

ConditioningResult conditioning_check(const Matrix& f, const Matrix& g,
                                      const GroundTruthInstance& inst, Index r,
                                      double alpha);

/// The five inequalities of the good spectral event, evaluated on the true
/// spectrum for a data-dependent rank r_hat.
struct SpectralEventResult {
  std::array<bool, 5> checks{};
  std::array<std::string, 5> names{};
  bool holds = false;
};

SpectralEventResult spectral_event_check(Index r_hat, double sigma_cut,
                                         Index r_cut,
                                         const Vector& star_sigmas);

/// Exact coverage inequalities with their slacks:
///   R(f,g;D_ij)   <= kappa_trn R(f,g;D_train)   for observed (i,j),
///   R(f,g;D_test) <= kappa_tst (R(f,g;D_22) + 3 kappa_trn R(f,g;D_train)).
struct CoverageLine {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = false;
  bool skipped = false;
  std::string reason;
};

struct CoverageReport {
  std::vector<CoverageLine> lines;
  datagen::KappaReport kappas;
  bool all_hold = true;
};

CoverageReport coverage_inequalities(const Matrix& f, const Matrix& g,
                                     const GroundTruthInstance& inst);

/// Every term on the right side of the main risk bound, next to the
/// measured test risk. The bound holds only up to problem-dependent
/// constants, so no inequality is asserted; the terms are reported raw.
struct BoundReport {
  double eps_trn_sq = 0.0;
  double eps_11_sq = 0.0;
  double alpha = 1.0;
  double term_r4_eps11 = 0.0;      // r^4 eps_11^2
  double term_alpha_sigma = 0.0;   // alpha r^2 (sigma*_{r+1})^2
  double term_tail1_sq = 0.0;      // tail_1(r)^2
  double term_ratio = 0.0;         // (r^6 eps_11^4 + eps_trn^4 + tail_2(r)^2)/(sigma*_r)^2
  bool ratio_defined = true;       // false when sigma*_r = 0
  double r_test = 0.0;
};

BoundReport bound_report(const Matrix& f, const Matrix& g,
                         const GroundTruthInstance& inst, Index k, Index r);

/// Aggregate evaluation report for a learned pair.
struct RiskReport {
  double r_train = 0, r_11 = 0, r_12 = 0, r_21 = 0, r_22 = 0, r_test = 0;
  double delta0 = 0, delta1 = 0;
  Index k_used = 0;
  double sigma_r_fg = 0;
  double tail1_k = 0, tail2_k = 0, tail1_r = 0, tail2_r = 0;
  bool alpha_conditioned = false;
  double alpha = 1.0;
  bool conditioning_degenerate = false;
  std::optional<SpectralEventResult> good_spectral_event;
};

RiskReport risk_report(const Matrix& f, const Matrix& g,
                       const GroundTruthInstance& inst, Index k, Index r,
                       double alpha = 2.0,
                       std::optional<std::pair<double, Index>> event_params =
                           std::nullopt);

}  // namespace blockfill::risk
