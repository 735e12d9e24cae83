#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "blockfill/balancing.hpp"
#include "blockfill/datagen.hpp"
#include "blockfill/io.hpp"
#include "blockfill/risk.hpp"
#include "blockfill/rng.hpp"

using namespace blockfill;
using datagen::Dist;

namespace {

Matrix randn(Index n, Index m, std::uint64_t seed, double scale = 1.0) {
  RngStream rng(seed);
  Matrix g(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = scale * rng.normal();
  return g;
}

// top-k projector of the true covariance, recomputed here
Matrix projector(const datagen::GroundTruthInstance& inst, Index k) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(inst.sigma_star());
  const Matrix vk = es.eigenvectors().rowwise().reverse().leftCols(k);
  return vk * vk.transpose();
}

}  // namespace

TEST_CASE("the truth has zero risk under every selector") {
  const auto inst = datagen::make_instance_poly(14, 12, 8, 7, 3, 1.0, 1.0, 2);
  for (Dist d : {Dist::Train, Dist::Test, Dist::D11, Dist::D12, Dist::D21,
                 Dist::D22})
    CHECK(risk::risk(inst.Fstar, inst.Gstar, inst, d) <= 1e-18);
}

TEST_CASE("risk_r") {
  const auto inst = datagen::make_instance_exp(16, 16, 9, 9, 4, 0.8, 1.0, 3);
  SUBCASE("the truncated truth is its own reference") {
    const Matrix proj = projector(inst, 2);
    CHECK(risk::risk_r(inst.Fstar * proj, inst.Gstar * proj, inst, 2, Dist::D11) <=
          1e-16);
  }
  SUBCASE("s = d recovers plain risk") {
    const Matrix f = randn(16, 3, 4, 0.5);
    const Matrix g = randn(16, 3, 5, 0.5);
    CHECK(risk::risk_r(f, g, inst, inst.d, Dist::Train) ==
          doctest::Approx(risk::risk(f, g, inst, Dist::Train)).epsilon(1e-12));
  }
  SUBCASE("matches a direct double sum") {
    const Matrix f = randn(16, 2, 6, 0.5);
    const Matrix g = randn(16, 2, 7, 0.5);
    const Index s = 2;
    const Matrix proj = projector(inst, s);
    const Matrix fs = inst.Fstar * proj;
    const Matrix gs = inst.Gstar * proj;
    double direct = 0.0;
    for (Index x = 0; x < inst.n; ++x)
      for (Index y = 0; y < inst.m; ++y) {
        const double w = inst.density(Dist::D11, x, y);
        const double err = f.row(x).dot(g.row(y)) - fs.row(x).dot(gs.row(y));
        direct += w * err * err;
      }
    CHECK(std::abs(risk::risk_r(f, g, inst, s, Dist::D11) - direct) <= 1e-10);
  }
}

TEST_CASE("delta errors") {
  const auto inst = datagen::make_instance_poly(12, 12, 7, 7, 3, 1.5, 1.0, 9);
  SUBCASE("the truth at full depth has no error") {
    const auto d = risk::delta_errors(inst.Fstar, inst.Gstar, inst, inst.d);
    CHECK(d.delta0 <= 1e-12);
    CHECK(d.delta1 <= 1e-12);
  }
  SUBCASE("a known rotation is undone") {
    Eigen::HouseholderQR<Matrix> qr(randn(3, 3, 10));
    const Matrix q = Matrix(qr.householderQ());
    const auto d =
        risk::delta_errors(inst.Fstar * q, inst.Gstar * q, inst, inst.d);
    CHECK(d.delta1 <= 1e-10);
  }
  SUBCASE("rank-deficient pairs are refused") {
    Matrix f = Matrix::Zero(12, 2);
    f.col(0).setOnes();
    CHECK_THROWS_AS(risk::delta_errors(f, f, inst, 1), RankDeficient);
  }
}

TEST_CASE("joint procrustes beats the SO(2) grid on a planted 2-d case") {
  // truth rotated by a known angle plus a small perturbation
  const auto inst = datagen::make_instance_poly(10, 10, 6, 6, 2, 1.0, 1.0, 12);
  const double theta = 0.6;
  Matrix q(2, 2);
  q << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  const Matrix f = inst.Fstar * q + 0.01 * randn(10, 2, 13);
  const Matrix g = inst.Gstar * q + 0.01 * randn(10, 2, 14);
  const auto measured = risk::delta_errors(f, g, inst, 2);

  // grid oracle over rotations applied after balancing, as in the library
  const auto bal = balancing::balance_embeddings(f, g, inst.dx1, inst.dy1);
  Matrix ahat(6, 2), bhat(6, 2), astar(6, 2), bstar(6, 2);
  for (Index i = 0; i < 6; ++i) {
    ahat.row(i) = std::sqrt(inst.dx1[i]) * bal.F.row(i);
    bhat.row(i) = std::sqrt(inst.dy1[i]) * bal.G.row(i);
    astar.row(i) = std::sqrt(inst.dx1[i]) * inst.Fstar.row(i);
    bstar.row(i) = std::sqrt(inst.dy1[i]) * inst.Gstar.row(i);
  }
  const Matrix proj = projector(inst, 2);
  const Matrix ak = astar * proj;
  const Matrix bk = bstar * proj;
  for (int deg = 0; deg < 360; ++deg) {
    const double t = deg * M_PI / 180.0;
    Matrix rot(2, 2);
    rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    const double grid = std::max((ak - ahat * rot).squaredNorm(),
                                 (bk - bhat * rot).squaredNorm());
    CHECK(measured.delta1 <= grid + 1e-12);
  }
}

TEST_CASE("sigma_r_embed") {
  const auto inst = datagen::make_instance_poly(14, 14, 8, 8, 3, 1.0, 1.0, 15);
  SUBCASE("the truth realizes the true spectrum") {
    for (Index r = 1; r <= 3; ++r)
      CHECK(risk::sigma_r_embed(inst.Fstar, inst.Gstar, inst, r) ==
            doctest::Approx(inst.spectrum[r - 1]).epsilon(1e-9));
  }
  SUBCASE("invariant under the (F T^-1, G T^T) reparameterization") {
    const Matrix f = randn(14, 3, 16, 0.6);
    const Matrix g = randn(14, 3, 17, 0.6);
    Matrix t = randn(3, 3, 18);
    t += 4.0 * Matrix::Identity(3, 3);  // comfortably invertible
    const Matrix f2 = f * t.inverse();
    const Matrix g2 = g * t.transpose();
    for (Index r = 1; r <= 3; ++r)
      CHECK(risk::sigma_r_embed(f2, g2, inst, r) ==
            doctest::Approx(risk::sigma_r_embed(f, g, inst, r)).epsilon(1e-8));
  }
}

TEST_CASE("conditioning checks") {
  const auto inst = datagen::make_instance_poly(14, 14, 8, 8, 3, 1.0, 1.0, 19);
  CHECK(risk::conditioning_check(inst.Fstar, inst.Gstar, inst, 3, 1.0).ok);
  Matrix tiny = 1e-6 * inst.Fstar;
  const auto bad = risk::conditioning_check(tiny, tiny, inst, 3, 100.0);
  CHECK(!bad.ok);

  // example 3 at r = 2 sits on sigma*_2 = 0 and is vacuous
  const auto fx = datagen::make_example(3, 6);
  const auto& [fhat, ghat] = *fx.adversarial;
  const auto deg = risk::conditioning_check(fhat, ghat, fx.inst, 2, 1.0);
  CHECK(deg.ok);
  CHECK(deg.degenerate);
}

TEST_CASE("good spectral event") {
  SUBCASE("flat tiny spectrum fails the event") {
    // magnitude and gap checks both fail; the tail checks cannot fail at
    // the same time as check 1 since sigma*_{r+1} <= sigma*_r
    const Vector flat = Vector::Constant(4, 1e-3);
    const auto ev = risk::spectral_event_check(1, 1.0, 2, flat);
    CHECK(!ev.holds);
    CHECK(!ev.checks[0]);
    CHECK(!ev.checks[2]);
  }
  SUBCASE("well separated top value passes the first three") {
    Vector s(4);
    s << 1.0, 0.01, 0.001, 0.0001;
    const auto ev = risk::spectral_event_check(1, 1.0, 2, s);
    CHECK(ev.checks[0]);
    CHECK(ev.checks[1]);
    CHECK(ev.checks[2]);
  }
  SUBCASE("a tuned spectrum violates only the gap inequality") {
    Vector s(4);
    s << 1.0, 0.97, 1e-6, 1e-8;
    const auto ev = risk::spectral_event_check(1, 1.0, 2, s);
    CHECK(ev.checks[0]);
    CHECK(ev.checks[1]);
    CHECK(!ev.checks[2]);
    CHECK(ev.checks[3]);
    CHECK(ev.checks[4]);
  }
}

TEST_CASE("coverage inequalities on the truth are all zero") {
  const auto inst = datagen::make_instance_exp(12, 12, 7, 7, 3, 0.9, 1.0, 20);
  const auto report = risk::coverage_inequalities(inst.Fstar, inst.Gstar, inst);
  CHECK(report.all_hold);
  for (const auto& line : report.lines) {
    CHECK(!line.skipped);
    CHECK(std::abs(line.lhs) <= 1e-14);
    CHECK(std::abs(line.rhs) <= 1e-12);
  }
}

TEST_CASE("coverage is skipped with a reason when kappas blow up") {
  const auto fx = datagen::make_example(2, 6, 0.5);
  // kappa_cov is infinite here, but trn and tst stay finite, so nothing
  // is skipped; the inequalities still hold for the adversarial pair.
  const auto& [fhat, ghat] = *fx.adversarial;
  const auto report = risk::coverage_inequalities(fhat, ghat, fx.inst);
  CHECK(report.all_hold);
}

TEST_CASE("bound report") {
  const auto inst = datagen::make_instance_poly(14, 14, 8, 8, 4, 2.0, 1.0, 21);
  SUBCASE("truth zeroes the epsilon terms") {
    const auto rep = risk::bound_report(inst.Fstar, inst.Gstar, inst, 2, 2);
    CHECK(rep.eps_trn_sq <= 1e-16);
    CHECK(rep.term_r4_eps11 <= 1e-12);
    CHECK(rep.ratio_defined);
    CHECK(rep.r_test <= 1e-16);
  }
  SUBCASE("the report is a pure function of its inputs") {
    const Matrix f = randn(14, 2, 22, 0.4);
    const Matrix g = randn(14, 2, 23, 0.4);
    const auto a = risk::bound_report(f, g, inst, 2, 2);
    const auto b = risk::bound_report(f, g, inst, 2, 2);
    CHECK(a.term_r4_eps11 == b.term_r4_eps11);
    CHECK(a.term_ratio == b.term_ratio);
    CHECK(a.r_test == b.r_test);
  }
  SUBCASE("sigma*_r = 0 flags the ratio as undefined") {
    const auto fx = datagen::make_example(3, 5);
    const auto& [fhat, ghat] = *fx.adversarial;
    const auto rep = risk::bound_report(fhat, ghat, fx.inst, 2, 2);
    CHECK(!rep.ratio_defined);
  }
}

TEST_CASE("risk report serializes against the published schema") {
  const auto inst = datagen::make_instance_poly(12, 12, 7, 7, 3, 1.0, 1.0, 24);
  const Matrix f = randn(12, 2, 25, 0.4);
  const Matrix g = randn(12, 2, 26, 0.4);
  const auto report = risk::risk_report(f, g, inst, 2, 2, 2.0,
                                  std::make_pair(0.1, Index{2}));
  const std::string payload = io::risk_report_json(report);
  std::string why;
  CHECK(io::validate_risk_report_json(payload, &why));
  CHECK(!io::validate_risk_report_json("{}", &why));
  CHECK(!why.empty());
}

TEST_CASE("example-2 risks through the report") {
  const double gamma = 0.5;
  const auto fx = datagen::make_example(2, 20, gamma);
  const auto& [fhat, ghat] = *fx.adversarial;
  const auto report = risk::risk_report(fhat, ghat, fx.inst, 1, 1);
  CHECK(report.r_train == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(report.r_test == doctest::Approx(gamma * gamma).epsilon(1e-12));
  CHECK(report.r_22 == doctest::Approx(report.r_test));
}

TEST_CASE("balanced pair spectrum tracks the true one within sqrt risk") {
  // |lambda_i(Sigma_balanced) - sigma*_i| <= ||Mhat - Mstar||_F, i.e. the
  // square root of the 1x1 risk, by Weyl and the matrix correspondence.
  const auto inst = datagen::make_instance_poly(16, 16, 9, 9, 3, 1.0, 1.0, 27);
  RngStream rng(28);
  for (int t = 0; t < 10; ++t) {
    const Index r = 2 + Index(rng.below(3));
    const Matrix f = randn(16, r, rng.next_u64(), 0.5);
    const Matrix g = randn(16, r, rng.next_u64(), 0.5);
    const double budget = std::sqrt(risk::risk(f, g, inst, Dist::D11));
    Matrix fb, gb;
    try {
      const auto bal = balancing::balance_embeddings(f, g, inst.dx1, inst.dy1);
      fb = bal.F;
    } catch (const RankDeficient&) {
      continue;
    }
    const Vector lam = balancing::sym_eigenvalues(
        balancing::weighted_covariance(fb, inst.dx1));
    for (Index i = 0; i < lam.size(); ++i) {
      const double star = (i < inst.d) ? inst.spectrum[i] : 0.0;
      CHECK(std::abs(lam[i] - star) <= budget + 1e-10);
    }
  }
}
