#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blockfill/datagen.hpp"
#include "blockfill/types.hpp"

namespace blockfill::verify {

struct Check {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;
  bool ok() const {
    for (const auto& c : checks)
      if (!c.ok) return false;
    return true;
  }
  int passed() const {
    int n = 0;
    for (const auto& c : checks) n += c.ok ? 1 : 0;
    return n;
  }
};

/// Independent risk oracle: the literal double sum
/// sum_{x,y} D(x,y) (<f(x),g(y)> - h*(x,y))^2. Shares no code with the
/// weighted-Frobenius path in the risk module.
double risk_double_sum(const Matrix& f, const Matrix& g,
                       const datagen::GroundTruthInstance& inst,
                       datagen::Dist dist);

/// Monte Carlo verification of the relative-gap SVD perturbation bound.
SuiteResult svd_perturbation_suite(int trials, double eta, Index max_dim,
                                   std::uint64_t seed);

/// Identities and order properties of the balancing operator on random
/// SPD pairs.
SuiteResult balancing_suite(int trials, Index max_p, std::uint64_t seed);

/// Well-tempered partition postconditions on random decaying spectra.
SuiteResult partition_suite(int spectra, std::uint64_t seed);

/// Fast risk path against the double-sum oracle, and the truncated-truth
/// tail identity, on random instances.
SuiteResult risk_identity_suite(int instances, std::uint64_t seed);

/// Coverage inequalities on random (instance, pair) draws.
SuiteResult coverage_suite(int draws, std::uint64_t seed);

/// Tail and ratio decay bounds on generated poly/exp spectra.
SuiteResult decay_suite();

/// One acceptance criterion: pass/fail plus a deterministic fingerprint of
/// everything the run produced (used by the determinism criterion).
struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  std::string fingerprint;
};

/// Criteria 1-10, in order.
std::vector<CriterionResult> run_criteria(std::uint64_t seed);

/// All 11 criteria; the last one re-runs 1-10 and compares outcomes and
/// artifact fingerprints.
std::vector<CriterionResult> acceptance(std::uint64_t seed);

}  // namespace blockfill::verify
