#include <doctest.h>

#include <cmath>

#include "blockfill/partition.hpp"
#include "blockfill/rng.hpp"

using namespace blockfill;
using namespace blockfill::partition;

TEST_CASE("flat spectrum collapses to a single block") {
  const Vector flat = Vector::Constant(4, 1.0);
  const auto part = well_tempered_partition(flat, 4, 1.0);
  CHECK(part.pivots == std::vector<Index>{0, 4});
  CHECK(part.blocks() == 1);
  CHECK(part.m_space == doctest::Approx(1.0));
  CHECK(part.m_spec == doctest::Approx(0.0));
}

TEST_CASE("geometric halving satisfies every spacing postcondition") {
  Vector geo(4);
  for (Index i = 0; i < 4; ++i) geo[i] = std::pow(2.0, -double(i + 1));
  const auto part = well_tempered_partition(geo, 4, geo[3]);

  // the recursion's exact pivot set is not asserted, only its guarantees
  const Index ell = part.blocks();
  for (Index i = 0; i < ell; ++i) {
    const Index ki = part.pivots[i];
    const Index kn = part.pivots[i + 1];
    CHECK(pivot_gap(geo, ki) >= 1.0 / double(kn) - 1e-12);
    if (i + 1 < ell) {
      CHECK(geo[ki] <= 2.0 * M_E * M_E * pivot_sigma(geo, kn) * (1 + 1e-12));
      CHECK(pivot_sigma(geo, ki) >= M_E * pivot_sigma(geo, kn) * (1 - 1e-12));
    } else {
      CHECK(geo[ki] <= 2.0 * M_E * part.sigma_ref * (1 + 1e-12));
      CHECK(pivot_sigma(geo, ki) >= part.sigma_ref * (1 - 1e-12));
    }
  }
  CHECK(part.delta >= 0.25 - 1e-12);
  CHECK(part.pivots.back() == 4);
}

TEST_CASE("rerunning the construction is deterministic") {
  Vector s(8);
  for (Index i = 0; i < 8; ++i) s[i] = std::pow(0.6, double(i));
  const auto a = well_tempered_partition(s, 8, s[7]);
  const auto b = well_tempered_partition(s, 8, s[7]);
  CHECK(a.pivots == b.pivots);
  CHECK(a.m_space == b.m_space);
  CHECK(a.m_spec == b.m_spec);
}

TEST_CASE("partition constants") {
  SUBCASE("single block") {
    const Vector s = Vector::Constant(5, 2.0);
    const auto [m_space, m_spec] = partition_constants({0, 5}, s);
    CHECK(m_space == doctest::Approx(1.0));
    CHECK(m_spec == doctest::Approx(0.0));
  }
  SUBCASE("worked example over (4,2,1)") {
    const Vector s{{4.0, 2.0, 1.0}};
    const auto [m_space, m_spec] = partition_constants({0, 1, 3}, s);
    CHECK(m_space == doctest::Approx(5.0));   // 1 + (1/2)^-2
    CHECK(m_spec == doctest::Approx(0.25));   // 1/4
  }
  SUBCASE("bad pivot lists are rejected") {
    const Vector s{{4.0, 2.0, 1.0}};
    CHECK_THROWS_AS(partition_constants({1, 3}, s), InvalidInput);
    CHECK_THROWS_AS(partition_constants({0, 2, 2}, s), InvalidInput);
    CHECK_THROWS_AS(partition_constants({0, 4}, s), InvalidInput);
  }
}

TEST_CASE("sigma outside the admissible interval is rejected") {
  Vector s(6);
  for (Index i = 0; i < 6; ++i) s[i] = std::pow(0.5, double(i));
  CHECK_THROWS_AS(well_tempered_partition(s, 4, 2.0), InvalidInput);
  CHECK_THROWS_AS(well_tempered_partition(s, 4, 1e-6), InvalidInput);
  CHECK_THROWS_AS(well_tempered_partition(s, 1, 0.5), InvalidInput);
}

TEST_CASE("prop bounds hold on random spectra with pinned seeds") {
  RngStream rng(17);
  for (int t = 0; t < 50; ++t) {
    const Index len = 6 + Index(rng.below(24));
    Vector s(len);
    double cur = rng.uniform(0.5, 4.0);
    for (Index i = 0; i < len; ++i) {
      s[i] = cur;
      cur *= rng.uniform(0.3, 0.98);
    }
    const Index target = 2 + Index(rng.below(len - 1));
    const double sigma =
        s[target - 1] * std::pow(s[0] / s[target - 1], rng.uniform());
    const auto part = well_tempered_partition(s, target, sigma);

    CHECK(part.delta >= 1.0 / double(target) - 1e-12);
    CHECK(part.mu <= 2.0 * M_E * M_E + 1e-9);
    CHECK(part.pivots[part.blocks() - 1] < target);
    CHECK(part.m_spec <= (1.0 / sigma) / (1.0 - std::exp(-1.0)) + 1e-12);
    const double ell_bound =
        std::min<double>(1.0 + std::ceil(std::log(s[0] / sigma)), double(target));
    CHECK(part.m_space <= ell_bound * double(target) * double(target) + 1e-9);
  }
}
