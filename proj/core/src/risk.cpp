#include "blockfill/risk.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "blockfill/balancing.hpp"
#include "blockfill/spectral.hpp"

namespace blockfill::risk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Scaled factor block: rows sqrt(weight_x) f(x) over the support of the
// marginal. Norm identities are unaffected by dropping zero rows.
Matrix scaled_block(const Matrix& rows, const Vector& marginal, Index lo,
                    Index hi) {
  Matrix out(hi - lo, rows.cols());
  for (Index i = lo; i < hi; ++i)
    out.row(i - lo) = std::sqrt(marginal[i]) * rows.row(i);
  return out;
}

struct ScaledFactors {
  Matrix a1, a2, b1, b2;
};

ScaledFactors scale_pair(const Matrix& f, const Matrix& g,
                         const GroundTruthInstance& inst) {
  return {scaled_block(f, inst.dx1, 0, inst.n1),
          scaled_block(f, inst.dx2, inst.n1, inst.n),
          scaled_block(g, inst.dy1, 0, inst.m1),
          scaled_block(g, inst.dy2, inst.m1, inst.m)};
}

double block_risk(const Matrix& ahat, const Matrix& bhat, const Matrix& astar,
                  const Matrix& bstar) {
  return (ahat * bhat.transpose() - astar * bstar.transpose()).squaredNorm();
}

double risk_against(const Matrix& f, const Matrix& g, const Matrix& fstar,
                    const Matrix& gstar, const GroundTruthInstance& inst,
                    Dist dist) {
  require(f.rows() == inst.n && g.rows() == inst.m,
          "risk: embedding rows must match the instance support");
  require(f.cols() == g.cols(), "risk: pair ranks differ");
  const auto hat = scale_pair(f, g, inst);
  const auto star = scale_pair(fstar, gstar, inst);
  switch (dist) {
    case Dist::D11: return block_risk(hat.a1, hat.b1, star.a1, star.b1);
    case Dist::D12: return block_risk(hat.a1, hat.b2, star.a1, star.b2);
    case Dist::D21: return block_risk(hat.a2, hat.b1, star.a2, star.b1);
    case Dist::D22: return block_risk(hat.a2, hat.b2, star.a2, star.b2);
    case Dist::Train:
      return inst.train_weights[0] * block_risk(hat.a1, hat.b1, star.a1, star.b1) +
             inst.train_weights[1] * block_risk(hat.a1, hat.b2, star.a1, star.b2) +
             inst.train_weights[2] * block_risk(hat.a2, hat.b1, star.a2, star.b1);
    case Dist::Test:
      if (inst.test_on_grid) {
        const double cells =
            static_cast<double>(inst.n) * static_cast<double>(inst.m);
        return (f * g.transpose() - fstar * gstar.transpose()).squaredNorm() /
               cells;
      }
      return block_risk(hat.a2, hat.b2, star.a2, star.b2);
  }
  return 0.0;
}

// Projector onto the top-k eigenspace of Sigma*_{1x1}.
Matrix star_projector(const GroundTruthInstance& inst, Index k) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(inst.sigma_star());
  const Matrix vecs = es.eigenvectors().rowwise().reverse();
  const Matrix vk = vecs.leftCols(k);
  return vk * vk.transpose();
}

Matrix pad_cols(const Matrix& a, Index width) {
  if (a.cols() == width) return a;
  Matrix out = Matrix::Zero(a.rows(), width);
  out.leftCols(a.cols()) = a;
  return out;
}

}  // namespace

double risk(const Matrix& f, const Matrix& g, const GroundTruthInstance& inst,
            Dist dist) {
  return risk_against(f, g, inst.Fstar, inst.Gstar, inst, dist);
}

double risk_r(const Matrix& f, const Matrix& g,
              const GroundTruthInstance& inst, Index s, Dist dist) {
  require(s >= 1 && s <= inst.d, "risk_r: s out of range");
  const Matrix proj = star_projector(inst, s);
  return risk_against(f, g, inst.Fstar * proj, inst.Gstar * proj, inst, dist);
}

DeltaErrors delta_errors(const Matrix& f, const Matrix& g,
                         const GroundTruthInstance& inst, Index k) {
  const Index r = f.cols();
  require(k >= 1 && k <= r, "delta_errors: k must be in [1, rank]");

  const auto balanced =
      balancing::balance_embeddings(f, g, inst.dx1, inst.dy1);
  const Matrix ahat = scaled_block(balanced.F, inst.dx1, 0, inst.n1);
  const Matrix bhat = scaled_block(balanced.G, inst.dy1, 0, inst.m1);

  const Matrix astar = scaled_block(inst.Fstar, inst.dx1, 0, inst.n1);
  const Matrix bstar = scaled_block(inst.Gstar, inst.dy1, 0, inst.m1);
  const Matrix proj = star_projector(inst, std::min(k, inst.d));
  const Matrix astar_k = astar * proj;
  const Matrix bstar_k = bstar * proj;

  const Index width = std::max(r, inst.d);
  const Matrix ah = pad_cols(ahat, width);
  const Matrix bh = pad_cols(bhat, width);
  const Matrix as = pad_cols(astar_k, width);
  const Matrix bs = pad_cols(bstar_k, width);

  Matrix stacked_star(as.rows() + bs.rows(), width);
  stacked_star << as, bs;
  Matrix stacked_hat(ah.rows() + bh.rows(), width);
  stacked_hat << ah, bh;
  const Matrix rot = spectral::orthogonal_procrustes(stacked_star, stacked_hat);

  const Matrix ea = as - ah * rot;
  const Matrix eb = bs - bh * rot;
  DeltaErrors out;
  out.delta0 = std::max((ea * bs.transpose()).squaredNorm(),
                        (as * eb.transpose()).squaredNorm());
  out.delta1 = std::max(ea.squaredNorm(), eb.squaredNorm());
  out.rotation = rot;
  return out;
}

double sigma_r_embed(const Matrix& f, const Matrix& g,
                     const GroundTruthInstance& inst, Index r) {
  require(r >= 1 && r <= f.cols(), "sigma_r_embed: r out of range");
  const Matrix sf = balancing::weighted_covariance(f, inst.dx1);
  const Matrix sg = balancing::weighted_covariance(g, inst.dy1);
  const Matrix prod = balancing::spd_sqrt(sf) * balancing::spd_sqrt(sg);
  const auto summary = spectral::SpectralSummary::from_matrix(prod);
  return summary.sigmas[r - 1];
}

ConditioningResult conditioning_check(const Matrix& f, const Matrix& g,
                                      const GroundTruthInstance& inst, Index r,
                                      double alpha) {
  require(alpha >= 1.0, "conditioning_check: alpha must be >= 1");
  ConditioningResult out;
  out.sigma_r = sigma_r_embed(f, g, inst, r);
  out.sigma_star_r = (r <= inst.spectrum.size())
                         ? std::max(inst.spectrum[r - 1], 0.0)
                         : 0.0;
  if (out.sigma_star_r <= 0.0) {
    out.ok = true;
    out.degenerate = true;
    return out;
  }
  out.ok = out.sigma_r * out.sigma_r >=
           out.sigma_star_r * out.sigma_star_r / alpha;
  return out;
}

SpectralEventResult spectral_event_check(Index r_hat, double sigma_cut,
                                         Index r_cut,
                                         const Vector& star_sigmas) {
  require(r_hat >= 1 && r_hat <= r_cut,
          "spectral_event_check: need 1 <= r_hat <= r_cut");
  const auto sig = [&](Index k) {
    return (k <= star_sigmas.size()) ? std::max(star_sigmas[k - 1], 0.0) : 0.0;
  };
  const double s_r = sig(r_hat);
  const double s_r1 = sig(r_hat + 1);
  const double t1_rhat = spectral::tail_norm(star_sigmas, std::min<Index>(r_hat, star_sigmas.size()), 1.0);
  const double t2_rhat = spectral::tail_norm(star_sigmas, std::min<Index>(r_hat, star_sigmas.size()), 2.0);
  const Index rc = std::min<Index>(r_cut, star_sigmas.size());
  const double t1_rcut = spectral::tail_norm(star_sigmas, rc, 1.0);
  const double t2_rcut = spectral::tail_norm(star_sigmas, rc, 2.0);
  const double rcut_d = static_cast<double>(r_cut);

  SpectralEventResult out;
  out.names = {"sigma*_rhat >= 3 sigma_cut / 4",
               "sigma*_{rhat+1} <= 3 sigma_cut",
               "gap >= sigma*_rhat / (3 r_cut)",
               "tail_2(rhat) <= tail_2(r_cut) + 9 sigma_cut^2 r_cut",
               "tail_1(rhat)^2 <= 18 r_cut^2 sigma_cut^2 + 2 tail_1(r_cut)^2"};
  out.checks[0] = s_r >= 0.75 * sigma_cut;
  out.checks[1] = s_r1 <= 3.0 * sigma_cut;
  out.checks[2] = s_r - s_r1 >= s_r / (3.0 * rcut_d);
  out.checks[3] = t2_rhat <= t2_rcut + 9.0 * sigma_cut * sigma_cut * rcut_d;
  out.checks[4] = t1_rhat * t1_rhat <=
                  18.0 * rcut_d * rcut_d * sigma_cut * sigma_cut +
                  2.0 * t1_rcut * t1_rcut;
  out.holds = std::all_of(out.checks.begin(), out.checks.end(),
                          [](bool b) { return b; });
  return out;
}

CoverageReport coverage_inequalities(const Matrix& f, const Matrix& g,
                                     const GroundTruthInstance& inst) {
  CoverageReport out;
  out.kappas = datagen::compute_kappas(inst);
  const double r_train = risk(f, g, inst, Dist::Train);
  const double scale = std::max(1.0, r_train);

  const auto add = [&](const std::string& name, double lhs, double rhs,
                       bool skipped, const std::string& reason) {
    CoverageLine line;
    line.name = name;
    line.lhs = lhs;
    line.rhs = rhs;
    line.slack = rhs - lhs;
    line.skipped = skipped;
    line.reason = reason;
    line.holds = skipped || lhs <= rhs + 1e-9 * std::max(scale, rhs);
    out.all_hold = out.all_hold && line.holds;
    out.lines.push_back(line);
  };

  const std::array<Dist, 3> obs = {Dist::D11, Dist::D12, Dist::D21};
  for (Dist d : obs) {
    const std::string name =
        std::string("R(") + datagen::dist_name(d) + ") <= kappa_trn R(train)";
    if (std::isinf(out.kappas.trn)) {
      add(name, 0, 0, true, "kappa_trn infinite: coverage assumption fails");
      continue;
    }
    add(name, risk(f, g, inst, d), out.kappas.trn * r_train, false, "");
  }

  const std::string test_name =
      "R(test) <= kappa_tst (R(d22) + 3 kappa_trn R(train))";
  if (std::isinf(out.kappas.trn) || std::isinf(out.kappas.tst)) {
    add(test_name, 0, 0, true, "infinite kappa: coverage assumption fails");
  } else {
    const double rhs = out.kappas.tst * (risk(f, g, inst, Dist::D22) +
                                         3.0 * out.kappas.trn * r_train);
    add(test_name, risk(f, g, inst, Dist::Test), rhs, false, "");
  }
  return out;
}

BoundReport bound_report(const Matrix& f, const Matrix& g,
                         const GroundTruthInstance& inst, Index k, Index r) {
  require(r >= 1 && r <= f.cols(), "bound_report: r out of range");
  BoundReport out;
  out.eps_trn_sq = risk(f, g, inst, Dist::Train);
  out.eps_11_sq = kInf;
  for (Index s = std::min(r, inst.d); s <= inst.d; ++s)
    out.eps_11_sq = std::min(out.eps_11_sq, risk_r(f, g, inst, s, Dist::D11));

  const auto sig = [&](Index j) {
    return (j <= inst.spectrum.size()) ? std::max(inst.spectrum[j - 1], 0.0)
                                       : 0.0;
  };
  const double sigma_r_star = sig(r);
  const double sigma_r = sigma_r_embed(f, g, inst, r);
  out.alpha = (sigma_r > 0.0 && sigma_r_star > 0.0)
                  ? std::max(1.0, (sigma_r_star * sigma_r_star) /
                                      (sigma_r * sigma_r))
                  : 1.0;

  const double rd = static_cast<double>(r);
  const Index rcap = std::min<Index>(r, inst.spectrum.size());
  const double tail1_r = spectral::tail_norm(inst.spectrum, rcap, 1.0);
  const double tail2_r = spectral::tail_norm(inst.spectrum, rcap, 2.0);
  out.term_r4_eps11 = std::pow(rd, 4.0) * out.eps_11_sq;
  out.term_alpha_sigma = out.alpha * rd * rd * sig(r + 1) * sig(r + 1);
  out.term_tail1_sq = tail1_r * tail1_r;
  if (sigma_r_star > 0.0) {
    out.term_ratio = (std::pow(rd, 6.0) * out.eps_11_sq * out.eps_11_sq +
                      out.eps_trn_sq * out.eps_trn_sq + tail2_r * tail2_r) /
                     (sigma_r_star * sigma_r_star);
  } else {
    out.ratio_defined = false;
  }
  out.r_test = risk(f, g, inst, Dist::Test);
  (void)k;
  return out;
}

RiskReport risk_report(const Matrix& f, const Matrix& g,
                       const GroundTruthInstance& inst, Index k, Index r,
                       double alpha,
                       std::optional<std::pair<double, Index>> event_params) {
  // Ranks above the pair's own rank are clamped; the report records k_used.
  k = std::clamp<Index>(k, 1, f.cols());
  r = std::clamp<Index>(r, 1, f.cols());
  RiskReport out;
  out.r_train = risk(f, g, inst, Dist::Train);
  out.r_11 = risk(f, g, inst, Dist::D11);
  out.r_12 = risk(f, g, inst, Dist::D12);
  out.r_21 = risk(f, g, inst, Dist::D21);
  out.r_22 = risk(f, g, inst, Dist::D22);
  out.r_test = risk(f, g, inst, Dist::Test);
  out.k_used = k;

  try {
    const auto deltas = delta_errors(f, g, inst, k);
    out.delta0 = deltas.delta0;
    out.delta1 = deltas.delta1;
  } catch (const RankDeficient&) {
    out.delta0 = out.delta1 = kInf;
  }

  out.sigma_r_fg = sigma_r_embed(f, g, inst, r);
  const auto cond = conditioning_check(f, g, inst, r, alpha);
  out.alpha_conditioned = cond.ok;
  out.alpha = alpha;
  out.conditioning_degenerate = cond.degenerate;

  const Index kcap = std::min<Index>(k, inst.spectrum.size());
  const Index rcap = std::min<Index>(r, inst.spectrum.size());
  out.tail1_k = spectral::tail_norm(inst.spectrum, kcap, 1.0);
  out.tail2_k = spectral::tail_norm(inst.spectrum, kcap, 2.0);
  out.tail1_r = spectral::tail_norm(inst.spectrum, rcap, 1.0);
  out.tail2_r = spectral::tail_norm(inst.spectrum, rcap, 2.0);

  if (event_params) {
    const auto [sigma_cut, r_cut] = *event_params;
    if (r <= r_cut)
      out.good_spectral_event =
          spectral_event_check(r, sigma_cut, r_cut, inst.spectrum);
  }
  return out;
}

}  // namespace blockfill::risk
