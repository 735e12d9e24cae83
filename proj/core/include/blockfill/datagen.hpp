#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blockfill/types.hpp"

namespace blockfill::datagen {

/// Distribution selectors over the block structure. Train is the mixture
/// w11 D11 + w12 D12 + w21 D21; Test is either D22 (default) or the
/// uniform distribution over the full grid when the instance says so.
enum class Dist { Train, Test, D11, D12, D21, D22 };

const char* dist_name(Dist d);

struct LabeledTriple {
  Index x = 0;
  Index y = 0;
  double z = 0.0;
  double w = 1.0;
};

struct WeightedIndex {
  Index i = 0;
  double w = 0.0;
};

/// Finite-support ground truth: true embeddings as matrix rows
/// (Fstar.row(x) = f*(x)), block split at (n1, m1), per-block marginals,
/// and the training mixture weights (w11, w12, w21).
struct GroundTruthInstance {
  Index n = 0, m = 0;
  Index n1 = 0, m1 = 0;
  Index d = 0;
  Matrix Fstar;  // n x d
  Matrix Gstar;  // m x d
  Vector dx1, dx2;  // length n, supported on [0,n1) and [n1,n)
  Vector dy1, dy2;  // length m
  std::array<double, 3> train_weights{1.0 / 3, 1.0 / 3, 1.0 / 3};
  bool test_on_grid = false;  // false: D_test = D22; true: uniform full grid
  double B = 0.0;             // max row norm over Fstar, Gstar
  std::uint64_t seed = 0;
  std::string kind;  // "poly", "exp", "example1", ...
  double gamma = 0.0;
  double C = 0.0;
  Vector spectrum;  // realized eigenvalues of Sigma*_{1x1}, nonincreasing

  double hstar(Index x, Index y) const {
    return Fstar.row(x).dot(Gstar.row(y));
  }
  /// Density of the selector at a cell (probability of the cell).
  double density(Dist dist, Index x, Index y) const;
  /// Weighted covariance of the true embeddings under dx1 / dy1.
  Matrix sigma_star() const;
};

/// Minimal constants of the coverage / covariance / approximation
/// assumptions on a finite instance; +infinity encodes failure.
struct KappaReport {
  double trn = 1.0;
  double tst = 1.0;
  double cov = 1.0;
  double apx = 1.0;
};

/// Uniform per-block marginals and the area-weighted training mixture,
/// plus the closed-form constants for alpha = n1/n, beta = m1/m.
struct UniformBlocks {
  Vector dx1, dx2, dy1, dy2;
  std::array<double, 3> weights;
  double kappa_trn = 1.0;
  double kappa_tst = 1.0;
};

UniformBlocks make_uniform_blocks(Index n, Index m, Index n1, Index m1);

/// Instance with lambda_i(Sigma*_{1x1}) = C i^{-(1+gamma)} exactly.
GroundTruthInstance make_instance_poly(Index n, Index m, Index n1, Index m1,
                                       Index d, double gamma, double C,
                                       std::uint64_t seed,
                                       bool grid_test = false);

/// Instance with lambda_i(Sigma*_{1x1}) = C e^{-gamma i} exactly.
GroundTruthInstance make_instance_exp(Index n, Index m, Index n1, Index m1,
                                      Index d, double gamma, double C,
                                      std::uint64_t seed,
                                      bool grid_test = false);

KappaReport compute_kappas(const GroundTruthInstance& inst);

/// The three illustrative fixtures on 2n x 2n supports, split at n.
/// For id 2 and 3 the adversarial embedding pair (Fhat, Ghat) is attached:
/// it fits every observed block exactly yet fails on the unseen block.
struct ExampleFixture {
  GroundTruthInstance inst;
  std::optional<std::pair<Matrix, Matrix>> adversarial;
};

ExampleFixture make_example(int id, Index n, double gamma = 0.5);

/// (x, y, z) triples drawn i.i.d. from the selected distribution, each
/// with weight 1/count. Labels are noiseless unless noise_sd > 0, in which
/// case z is clipped to |z| <= B^2.
std::vector<LabeledTriple> sample_labeled(const GroundTruthInstance& inst,
                                          Dist dist, Index count,
                                          std::uint64_t seed,
                                          double noise_sd = 0.0);

std::vector<std::pair<Index, Index>> sample_pairs(
    const GroundTruthInstance& inst, Dist dist, Index count,
    std::uint64_t seed);

/// Every support cell of the selector, weighted by its probability and
/// labeled by hstar. This is the exact-expectation counterpart of
/// sample_labeled.
std::vector<LabeledTriple> exact_cells(const GroundTruthInstance& inst,
                                       Dist dist);

/// Support of a marginal as (index, weight) pairs.
std::vector<WeightedIndex> marginal_support(const Vector& marginal);

/// Self-check: marginal normalization and support, balanced basis,
/// |h*| <= B^2, and (for decay instances) the realized spectrum.
struct CheckLine {
  std::string name;
  bool ok = false;
  std::string detail;
};

std::vector<CheckLine> validate(const GroundTruthInstance& inst);

}  // namespace blockfill::datagen
