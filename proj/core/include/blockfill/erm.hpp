#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "blockfill/datagen.hpp"
#include "blockfill/types.hpp"

namespace blockfill::erm {

using datagen::GroundTruthInstance;
using datagen::LabeledTriple;
using datagen::WeightedIndex;

/// Learned factor matrices: row x of F is f(x), row y of G is g(y).
struct EmbeddingPair {
  Matrix F;
  Matrix G;
  Index rank() const { return F.cols(); }
  double predict(Index x, Index y) const { return F.row(x).dot(G.row(y)); }
};

struct SolverOptions {
  int max_sweeps = 200;
  double rel_tol = 1e-10;
  double ridge = 1e-9;
  int restarts = 5;
  std::uint64_t seed = 0;
  double init_scale = 0.0;  // <= 0 means 1/sqrt(rank)
};

struct ErmConfig {
  Index p = 4;             // overparametrized rank
  Index r_cut = 2;         // rank cutoff
  double sigma_cut = 0.1;  // spectral cutoff
  std::optional<double> lambda;  // default r_cut^4
  std::optional<double> mu;      // default B^2 / n1
  Index n1 = 1000, n2 = 1000, n3 = 1000, n4 = 1000;
  bool exact_expectation = false;
  SolverOptions solver;
};

/// One alternating-least-squares fit: sweep losses are of the full ridge
/// objective and are nonincreasing; data_loss is the weighted misfit alone.
struct FitResult {
  EmbeddingPair pair;
  std::vector<double> sweep_objectives;
  double objective = 0.0;
  double data_loss = 0.0;
  int best_start = 0;  // index among restarts (warm starts come first)
};

/// Minimizes sum_i w_i (<F_x, G_y> - z_i)^2 + ridge (|F|_F^2 + |G|_F^2) by
/// alternating weighted ridge least squares over the rows of F and G.
/// The best of `restarts` random initializations (plus any warm starts) is
/// returned.
FitResult fit_factorized(const std::vector<LabeledTriple>& samples, Index n,
                         Index m, Index r, const SolverOptions& opts,
                         const std::vector<EmbeddingPair>& warm_starts = {});

/// Sigma_f = sum_x w_x f(x) f(x)^T + mu I (and likewise for g); weights
/// normally sum to one (1/n2 per sample, or exact marginals).
std::pair<Matrix, Matrix> estimate_covariances(
    const EmbeddingPair& pair, const std::vector<WeightedIndex>& xs,
    const std::vector<WeightedIndex>& ys, double mu);

/// DimReduce: balance the two covariances, pick the separated rank of the
/// balanced covariance, and return the oblique projection at that rank.
struct DimReduceResult {
  Index r_hat = 0;
  Matrix Q;
  Matrix P;  // orthogonal projection in the balanced coordinates
  Matrix W;
  Vector cov_spectrum;
  bool unique = true;
};

DimReduceResult dim_reduce(const Matrix& sigma_f, const Matrix& sigma_g,
                           Index r_cut, double sigma_cut);

/// Distillation: minimizes L3 + lambda L4 where L3 averages the labeled
/// squared errors and L4 the squared gaps to h_red on unlabeled pairs.
FitResult distill_fit(const std::vector<LabeledTriple>& labeled,
                      const std::vector<LabeledTriple>& unlabeled_with_targets,
                      double lambda, Index n, Index m, Index r,
                      const SolverOptions& opts,
                      const std::vector<EmbeddingPair>& warm_starts = {});

struct DiagnosticsTrace {
  std::vector<double> stage1_objectives;
  std::vector<double> stage4_objectives;
  double stage1_data_loss = 0.0;
  double stage4_data_loss = 0.0;
  Index r_hat = 0;
  Vector cov_spectrum;
  bool projection_unique = true;
  double q_op_norm = 0.0;
  double lambda_used = 0.0;
  double mu_used = 0.0;
  double sigma_cut = 0.0;
  Index r_cut = 0;
  Index p = 0;
  std::uint64_t seed = 0;
  bool exact_expectation = false;
  bool stage1_pinned = false;
  std::array<double, 4> stage_seconds{};  // not part of canonical output
};

struct DoubleStageResult {
  EmbeddingPair pair;
  DiagnosticsTrace trace;
};

/// The four-stage pipeline: overparametrized training, covariance
/// estimation, dimension reduction, distillation. Defaults are
/// lambda = r_cut^4 and mu = B^2/n1 when unset. `stage1_override` pins the
/// first-stage embeddings (used by diagnostics and fixtures).
DoubleStageResult erm_double_stage(const GroundTruthInstance& inst,
                                   ErmConfig cfg,
                                   const EmbeddingPair* stage1_override =
                                       nullptr);

/// Rank-r warm start realizing <f, Q g> exactly: (F W^{-1/2} V_r,
/// G W^{1/2} V_r) for V_r the top eigenvectors of the balanced covariance.
EmbeddingPair reduced_warm_start(const EmbeddingPair& pair,
                                 const DimReduceResult& red);

}  // namespace blockfill::erm
