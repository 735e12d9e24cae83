#include <doctest.h>

#include <cmath>
#include <map>

#include "blockfill/balancing.hpp"
#include "blockfill/datagen.hpp"
#include "blockfill/risk.hpp"

using namespace blockfill;
using namespace blockfill::datagen;

TEST_CASE("polynomial instance hits the target spectrum exactly") {
  SUBCASE("one-dimensional") {
    const auto inst = make_instance_poly(6, 6, 3, 3, 1, 1.0, 1.0, 3);
    CHECK(inst.spectrum.size() == 1);
    CHECK(inst.spectrum[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("gamma = 2") {
    const auto inst = make_instance_poly(20, 18, 10, 9, 4, 2.0, 1.0, 5);
    for (Index i = 0; i < 4; ++i)
      CHECK(inst.spectrum[i] ==
            doctest::Approx(std::pow(double(i + 1), -3.0)).epsilon(1e-10));
  }
}

TEST_CASE("exponential instance spectrum and tail bound") {
  const auto inst = make_instance_exp(20, 20, 10, 10, 3, std::log(2.0), 1.0, 9);
  CHECK(inst.spectrum[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(inst.spectrum[1] == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(inst.spectrum[2] == doctest::Approx(0.125).epsilon(1e-10));

  const double gamma = std::log(2.0);
  for (Index r = 0; r <= 3; ++r) {
    double tail2 = 0.0;
    for (Index i = r; i < 3; ++i) tail2 += inst.spectrum[i] * inst.spectrum[i];
    CHECK(tail2 <=
          (1.0 + 1.0 / gamma) * std::exp(-2.0 * gamma * (r + 1)) + 1e-12);
  }
}

TEST_CASE("instances are deterministic in the seed") {
  const auto a = make_instance_poly(16, 14, 9, 8, 3, 1.5, 2.0, 123);
  const auto b = make_instance_poly(16, 14, 9, 8, 3, 1.5, 2.0, 123);
  CHECK(a.Fstar == b.Fstar);
  CHECK(a.Gstar == b.Gstar);
  CHECK(a.B == b.B);
  const auto c = make_instance_poly(16, 14, 9, 8, 3, 1.5, 2.0, 124);
  CHECK(a.Fstar != c.Fstar);
}

TEST_CASE("generated instances pass their own invariant suite") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto inst = make_instance_exp(24, 20, 14, 12, 5, 0.7, 1.3, seed);
    for (const auto& line : validate(inst)) {
      INFO(line.name, ": ", line.detail);
      CHECK(line.ok);
    }
  }
}

TEST_CASE("uniform block constants") {
  SUBCASE("alpha = beta = 1/2") {
    const auto blocks = make_uniform_blocks(8, 8, 4, 4);
    CHECK(blocks.kappa_trn == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(blocks.kappa_tst == doctest::Approx(0.25).epsilon(1e-12));
    // density ratio dD11/dDtrain = 3 on the (1,1) block
    const auto inst = make_instance_poly(8, 8, 4, 4, 2, 1.0, 1.0, 1);
    const double ratio =
        inst.density(Dist::D11, 0, 0) / inst.density(Dist::Train, 0, 0);
    CHECK(ratio == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("near-full split") {
    const Index n = 10, m = 12;
    const auto blocks = make_uniform_blocks(n, m, n - 1, m - 1);
    CHECK(blocks.kappa_tst ==
          doctest::Approx(double((n - 1) * (m - 1)) / double(n * m)));
  }
  CHECK_THROWS_AS(make_uniform_blocks(8, 8, 0, 4), InvalidInput);
  CHECK_THROWS_AS(make_uniform_blocks(8, 8, 8, 4), InvalidInput);
}

TEST_CASE("computed kappas match the closed forms on a grid-test instance") {
  const auto inst = make_instance_poly(12, 12, 6, 6, 3, 1.0, 1.0, 21, true);
  const auto blocks = make_uniform_blocks(12, 12, 6, 6);
  const auto kappas = compute_kappas(inst);
  CHECK(kappas.trn == doctest::Approx(blocks.kappa_trn).epsilon(1e-12));
  CHECK(kappas.tst == doctest::Approx(blocks.kappa_tst).epsilon(1e-12));
  CHECK(std::isfinite(kappas.cov));
  CHECK(std::isfinite(kappas.apx));
}

TEST_CASE("example fixtures") {
  SUBCASE("example 1 is the all-ones table") {
    const auto fx = make_example(1, 5);
    CHECK(fx.inst.d == 1);
    for (Index x = 0; x < fx.inst.n; ++x)
      for (Index y = 0; y < fx.inst.m; ++y)
        CHECK(fx.inst.hstar(x, y) == doctest::Approx(1.0));
    CHECK(compute_kappas(fx.inst).cov == doctest::Approx(1.0));
    CHECK(!fx.adversarial.has_value());
  }
  SUBCASE("example 2 elevates the unseen block and breaks covariance coverage") {
    const double gamma = 0.5;
    const auto fx = make_example(2, 6, gamma);
    for (Index x = 0; x < fx.inst.n; ++x)
      for (Index y = 0; y < fx.inst.m; ++y) {
        const double expected =
            (x >= 6 && y >= 6) ? 1.0 + gamma : 1.0;
        CHECK(fx.inst.hstar(x, y) == doctest::Approx(expected).epsilon(1e-12));
      }
    const auto& [fhat, ghat] = *fx.adversarial;
    CHECK(risk::risk(fhat, ghat, fx.inst, Dist::Train) <= 1e-15);
    CHECK(risk::risk(fhat, ghat, fx.inst, Dist::Test) ==
          doctest::Approx(gamma * gamma).epsilon(1e-12));
    CHECK(std::isinf(compute_kappas(fx.inst).cov));
  }
  SUBCASE("example 3 adversary predicts 2 on the unseen block") {
    const auto fx = make_example(3, 4);
    const auto& [fhat, ghat] = *fx.adversarial;
    for (Index x = 4; x < 8; ++x)
      for (Index y = 4; y < 8; ++y)
        CHECK(fhat.row(x).dot(ghat.row(y)) == doctest::Approx(2.0));
    CHECK(risk::risk(fhat, ghat, fx.inst, Dist::Train) <= 1e-15);
    CHECK(risk::risk(fhat, ghat, fx.inst, Dist::Test) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_example(4, 5), InvalidInput);
}

TEST_CASE("sampling") {
  SUBCASE("point-mass marginals give identical draws") {
    const auto inst = make_instance_poly(2, 2, 1, 1, 1, 1.0, 1.0, 2);
    const auto samples = sample_labeled(inst, Dist::D11, 20, 5);
    for (const auto& s : samples) {
      CHECK(s.x == 0);
      CHECK(s.y == 0);
      CHECK(s.z == doctest::Approx(inst.hstar(0, 0)));
    }
  }
  SUBCASE("train block frequencies stay within 3-sigma binomial bands") {
    const auto inst = make_instance_poly(12, 12, 6, 6, 3, 1.0, 1.0, 77);
    const Index count = 10000;
    const auto samples = sample_labeled(inst, Dist::Train, count, 99);
    std::map<int, int> block_counts;
    for (const auto& s : samples) {
      const int block = (s.x < 6 ? 0 : 2) + (s.y < 6 ? 0 : 1);
      block_counts[block]++;
    }
    const double expected[3] = {inst.train_weights[0], inst.train_weights[1],
                                inst.train_weights[2]};
    const int observed[3] = {block_counts[0], block_counts[1],
                             block_counts[2]};
    for (int b = 0; b < 3; ++b) {
      const double mean = expected[b] * count;
      const double sd = std::sqrt(count * expected[b] * (1 - expected[b]));
      CHECK(std::abs(observed[b] - mean) <= 3.0 * sd);
    }
    CHECK(block_counts[3] == 0);  // the (2,2) block is never observed
  }
  SUBCASE("noisy labels stay within the B^2 bound") {
    const auto inst = make_instance_exp(10, 10, 5, 5, 2, 1.0, 1.0, 4);
    const auto samples = sample_labeled(inst, Dist::Train, 500, 7, 10.0);
    for (const auto& s : samples) CHECK(std::abs(s.z) <= inst.B * inst.B);
  }
  SUBCASE("exact cells carry the distribution itself") {
    const auto inst = make_instance_poly(10, 8, 6, 5, 2, 1.0, 1.0, 6);
    for (Dist dist : {Dist::Train, Dist::D11, Dist::Test}) {
      double total = 0.0;
      for (const auto& cell : exact_cells(inst, dist)) {
        CHECK(cell.w == doctest::Approx(inst.density(dist, cell.x, cell.y)));
        CHECK(cell.z == doctest::Approx(inst.hstar(cell.x, cell.y)));
        total += cell.w;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("kappa edge cases") {
  // block-2 energy outside the block-1 rowspace blows up kappa_cov
  auto inst = make_instance_poly(10, 10, 5, 5, 2, 1.0, 1.0, 8);
  inst.Fstar.col(1).head(5).setZero();
  inst.Fstar.col(1).tail(5).setZero();
  inst.Fstar(7, 1) = 10.0;
  CHECK(std::isinf(compute_kappas(inst).cov));
}

TEST_CASE("infeasible instance parameters are rejected") {
  CHECK_THROWS_AS(make_instance_poly(10, 10, 10, 5, 2, 1.0, 1.0, 1),
                  InvalidInput);
  CHECK_THROWS_AS(make_instance_poly(10, 10, 5, 5, 6, 1.0, 1.0, 1),
                  InvalidInput);
  CHECK_THROWS_AS(make_instance_poly(10, 10, 5, 5, 2, -1.0, 1.0, 1),
                  InvalidInput);
}
