#include "blockfill/erm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "blockfill/balancing.hpp"
#include "blockfill/rng.hpp"
#include "blockfill/spectral.hpp"

namespace blockfill::erm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct SampleIndex {
  // per-row sample lists for the alternating solves
  std::vector<std::vector<int>> by_x;
  std::vector<std::vector<int>> by_y;
};

SampleIndex index_samples(const std::vector<LabeledTriple>& samples, Index n,
                          Index m) {
  SampleIndex idx;
  idx.by_x.resize(n);
  idx.by_y.resize(m);
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    const auto& s = samples[i];
    require(s.x >= 0 && s.x < n && s.y >= 0 && s.y < m,
            "fit_factorized: sample index out of range");
    require(std::isfinite(s.z) && std::isfinite(s.w) && s.w >= 0.0,
            "fit_factorized: non-finite sample");
    idx.by_x[s.x].push_back(i);
    idx.by_y[s.y].push_back(i);
  }
  return idx;
}

double objective_of(const std::vector<LabeledTriple>& samples,
                    const EmbeddingPair& pair, double ridge) {
  double data = 0.0;
  for (const auto& s : samples) {
    const double err = pair.predict(s.x, s.y) - s.z;
    data += s.w * err * err;
  }
  return data + ridge * (pair.F.squaredNorm() + pair.G.squaredNorm());
}

double data_loss_of(const std::vector<LabeledTriple>& samples,
                    const EmbeddingPair& pair) {
  double data = 0.0;
  for (const auto& s : samples) {
    const double err = pair.predict(s.x, s.y) - s.z;
    data += s.w * err * err;
  }
  return data;
}

// Exact minimization over the rows of `target` given the other factor.
void solve_side(const std::vector<LabeledTriple>& samples,
                const std::vector<std::vector<int>>& lists, const Matrix& other,
                bool other_is_g, double ridge, Matrix& target) {
  const Index r = target.cols();
  Matrix gram(r, r);
  Vector rhs(r);
  for (Index row = 0; row < target.rows(); ++row) {
    const auto& list = lists[row];
    if (list.empty()) {
      target.row(row).setZero();
      continue;
    }
    gram.setZero();
    rhs.setZero();
    for (int i : list) {
      const auto& s = samples[i];
      const auto v = other_is_g ? other.row(s.y) : other.row(s.x);
      gram.noalias() += (s.w * v.transpose()) * v;
      rhs.noalias() += (s.w * s.z) * v.transpose();
    }
    gram.diagonal().array() += ridge;
    target.row(row) = gram.ldlt().solve(rhs).transpose();
  }
}

FitResult run_als(const std::vector<LabeledTriple>& samples, Index n, Index m,
                  Index r, const SolverOptions& opts,
                  const std::vector<EmbeddingPair>& warm_starts) {
  require(!samples.empty(), "fit_factorized: empty sample set");
  require(r >= 1 && r <= std::min(n, m), "fit_factorized: rank out of range");
  const auto idx = index_samples(samples, n, m);
  const double scale =
      opts.init_scale > 0.0 ? opts.init_scale : 1.0 / std::sqrt(double(r));

  FitResult best;
  best.objective = std::numeric_limits<double>::infinity();
  const int total = static_cast<int>(warm_starts.size()) +
                    std::max(1, opts.restarts);
  for (int start = 0; start < total; ++start) {
    EmbeddingPair pair;
    if (start < static_cast<int>(warm_starts.size())) {
      pair = warm_starts[start];
      require(pair.F.rows() == n && pair.G.rows() == m && pair.rank() == r,
              "fit_factorized: warm start shape mismatch");
    } else {
      RngStream rng(opts.seed, hash_combine(hash_tag("als_init"),
                                            static_cast<std::uint64_t>(start)));
      pair.F = Matrix(n, r);
      pair.G = Matrix(m, r);
      for (Index j = 0; j < r; ++j) {
        for (Index i = 0; i < n; ++i) pair.F(i, j) = scale * rng.normal();
        for (Index i = 0; i < m; ++i) pair.G(i, j) = scale * rng.normal();
      }
    }

    std::vector<double> sweeps;
    double prev = objective_of(samples, pair, opts.ridge);
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      solve_side(samples, idx.by_x, pair.G, true, opts.ridge, pair.F);
      solve_side(samples, idx.by_y, pair.F, false, opts.ridge, pair.G);
      const double cur = objective_of(samples, pair, opts.ridge);
      sweeps.push_back(cur);
      if (prev - cur <= opts.rel_tol * std::max(prev, 1e-300)) {
        prev = cur;
        break;
      }
      prev = cur;
    }

    const double obj = objective_of(samples, pair, opts.ridge);
    if (obj < best.objective) {
      best.pair = std::move(pair);
      best.objective = obj;
      best.sweep_objectives = std::move(sweeps);
      best.best_start = start;
    }
  }
  best.data_loss = data_loss_of(samples, best.pair);
  return best;
}

}  // namespace

FitResult fit_factorized(const std::vector<LabeledTriple>& samples, Index n,
                         Index m, Index r, const SolverOptions& opts,
                         const std::vector<EmbeddingPair>& warm_starts) {
  return run_als(samples, n, m, r, opts, warm_starts);
}

std::pair<Matrix, Matrix> estimate_covariances(
    const EmbeddingPair& pair, const std::vector<WeightedIndex>& xs,
    const std::vector<WeightedIndex>& ys, double mu) {
  require(!xs.empty() && !ys.empty(),
          "estimate_covariances: empty unlabeled set");
  require(mu > 0.0, "estimate_covariances: mu must be positive");
  const Index r = pair.rank();
  Matrix sf = Matrix::Zero(r, r);
  Matrix sg = Matrix::Zero(r, r);
  for (const auto& wx : xs)
    sf.noalias() += wx.w * pair.F.row(wx.i).transpose() * pair.F.row(wx.i);
  for (const auto& wy : ys)
    sg.noalias() += wy.w * pair.G.row(wy.i).transpose() * pair.G.row(wy.i);
  sf.diagonal().array() += mu;
  sg.diagonal().array() += mu;
  return {sf, sg};
}

DimReduceResult dim_reduce(const Matrix& sigma_f, const Matrix& sigma_g,
                           Index r_cut, double sigma_cut) {
  const auto bal = balancing::psi_bal(sigma_f, sigma_g);
  const Vector spectrum = balancing::sym_eigenvalues(bal.cov_bal);
  DimReduceResult out;
  out.cov_spectrum = spectrum;
  out.W = bal.W;
  out.r_hat = balancing::sep_rank(spectrum, r_cut, sigma_cut);
  const auto proj = balancing::proj_bal(out.r_hat, sigma_f, sigma_g);
  out.Q = proj.Q;
  out.P = proj.P;
  out.unique = proj.unique;
  return out;
}

FitResult distill_fit(const std::vector<LabeledTriple>& labeled,
                      const std::vector<LabeledTriple>& unlabeled_with_targets,
                      double lambda, Index n, Index m, Index r,
                      const SolverOptions& opts,
                      const std::vector<EmbeddingPair>& warm_starts) {
  require(!labeled.empty() && !unlabeled_with_targets.empty(),
          "distill_fit: both sample sets must be nonempty");
  require(lambda >= 0.0, "distill_fit: lambda must be nonnegative");
  std::vector<LabeledTriple> merged;
  merged.reserve(labeled.size() + unlabeled_with_targets.size());
  merged.insert(merged.end(), labeled.begin(), labeled.end());
  for (auto s : unlabeled_with_targets) {
    s.w *= lambda;
    if (s.w > 0.0) merged.push_back(s);
  }
  return run_als(merged, n, m, r, opts, warm_starts);
}

EmbeddingPair reduced_warm_start(const EmbeddingPair& pair,
                                 const DimReduceResult& red) {
  // <f, Q g> = <P W^{-1/2} f, P W^{1/2} g> with P = V_r V_r^T, so the rank-r
  // pair (F W^{-1/2} V_r, G W^{1/2} V_r) reproduces h_red exactly.
  const Matrix w_half = balancing::spd_sqrt(red.W);
  const Matrix w_inv_half = balancing::spd_inv_sqrt(red.W);
  Eigen::SelfAdjointEigenSolver<Matrix> es(red.P);
  const Matrix vr = es.eigenvectors().rowwise().reverse().leftCols(red.r_hat);
  EmbeddingPair out;
  out.F = pair.F * w_inv_half * vr;
  out.G = pair.G * w_half * vr;
  return out;
}

DoubleStageResult erm_double_stage(const GroundTruthInstance& inst,
                                   ErmConfig cfg,
                                   const EmbeddingPair* stage1_override) {
  require(cfg.p >= cfg.r_cut && cfg.r_cut >= 1,
          "erm_double_stage: need p >= r_cut >= 1");
  require(cfg.n1 >= 1 && cfg.n2 >= 1 && cfg.n3 >= 1 && cfg.n4 >= 1,
          "erm_double_stage: sample sizes must be >= 1");
  const double lambda =
      cfg.lambda.value_or(std::pow(static_cast<double>(cfg.r_cut), 4.0));
  const double mu =
      cfg.mu.value_or(inst.B * inst.B / static_cast<double>(cfg.n1));
  require(mu > 0.0, "erm_double_stage: mu must be positive");

  DoubleStageResult out;
  auto& trace = out.trace;
  trace.lambda_used = lambda;
  trace.mu_used = mu;
  trace.sigma_cut = cfg.sigma_cut;
  trace.r_cut = cfg.r_cut;
  trace.p = cfg.p;
  trace.seed = cfg.solver.seed;
  trace.exact_expectation = cfg.exact_expectation;
  trace.stage1_pinned = stage1_override != nullptr;

  // Stage 1: overparametrized training on D_train.
  auto t0 = Clock::now();
  EmbeddingPair tilde;
  if (stage1_override) {
    tilde = *stage1_override;
    require(tilde.F.rows() == inst.n && tilde.G.rows() == inst.m,
            "erm_double_stage: pinned stage-1 pair has wrong support");
  } else {
    SolverOptions s1 = cfg.solver;
    if (s1.init_scale <= 0.0)
      s1.init_scale = inst.B / std::sqrt(static_cast<double>(cfg.p));
    s1.seed = hash_combine(cfg.solver.seed, hash_tag("stage1"));
    const auto samples =
        cfg.exact_expectation
            ? datagen::exact_cells(inst, datagen::Dist::Train)
            : datagen::sample_labeled(inst, datagen::Dist::Train, cfg.n1,
                                      s1.seed);
    auto fit = fit_factorized(samples, inst.n, inst.m, cfg.p, s1);
    trace.stage1_objectives = fit.sweep_objectives;
    trace.stage1_data_loss = fit.data_loss;
    tilde = std::move(fit.pair);
  }
  trace.stage_seconds[0] = seconds_since(t0);

  // Stage 2: covariance estimation on unlabeled D_{1x1} pairs.
  t0 = Clock::now();
  std::vector<WeightedIndex> xs, ys;
  if (cfg.exact_expectation) {
    xs = datagen::marginal_support(inst.dx1);
    ys = datagen::marginal_support(inst.dy1);
  } else {
    const auto pairs = datagen::sample_pairs(
        inst, datagen::Dist::D11, cfg.n2,
        hash_combine(cfg.solver.seed, hash_tag("stage2")));
    const double w = 1.0 / static_cast<double>(pairs.size());
    for (const auto& [x, y] : pairs) {
      xs.push_back({x, w});
      ys.push_back({y, w});
    }
  }
  const auto [sigma_f, sigma_g] = estimate_covariances(tilde, xs, ys, mu);
  trace.stage_seconds[1] = seconds_since(t0);

  // Stage 3: DimReduce.
  t0 = Clock::now();
  DimReduceResult red;
  try {
    red = dim_reduce(sigma_f, sigma_g, cfg.r_cut, cfg.sigma_cut);
  } catch (const NoAdmissibleRank& e) {
    throw NoAdmissibleRank(
        std::string("stage 3 (dimension reduction): ") + e.what() +
            "; consider lowering sigma_cut",
        e.spectrum());
  }
  trace.r_hat = red.r_hat;
  trace.cov_spectrum = red.cov_spectrum;
  trace.projection_unique = red.unique;
  trace.q_op_norm = spectral::operator_norm(red.Q);
  trace.stage_seconds[2] = seconds_since(t0);

  // Stage 4: distillation at rank r_hat against h_red(x,y) = <f~(x), Q g~(y)>.
  t0 = Clock::now();
  const Matrix gq = tilde.G * red.Q.transpose();
  const auto h_red = [&](Index x, Index y) {
    return tilde.F.row(x).dot(gq.row(y));
  };

  SolverOptions s4 = cfg.solver;
  if (s4.init_scale <= 0.0)
    s4.init_scale = inst.B / std::sqrt(static_cast<double>(red.r_hat));
  s4.seed = hash_combine(cfg.solver.seed, hash_tag("stage4"));

  std::vector<LabeledTriple> labeled;
  std::vector<LabeledTriple> unlabeled;
  if (cfg.exact_expectation) {
    labeled = datagen::exact_cells(inst, datagen::Dist::Train);
    unlabeled = datagen::exact_cells(inst, datagen::Dist::D11);
    for (auto& s : unlabeled) s.z = h_red(s.x, s.y);
  } else {
    labeled = datagen::sample_labeled(inst, datagen::Dist::Train, cfg.n3,
                                      hash_combine(s4.seed, hash_tag("l3")));
    const auto pairs = datagen::sample_pairs(
        inst, datagen::Dist::D11, cfg.n4,
        hash_combine(s4.seed, hash_tag("l4")));
    const double w = 1.0 / static_cast<double>(pairs.size());
    for (const auto& [x, y] : pairs) unlabeled.push_back({x, y, h_red(x, y), w});
  }

  const std::vector<EmbeddingPair> warm = {reduced_warm_start(tilde, red)};
  auto fit = distill_fit(labeled, unlabeled, lambda, inst.n, inst.m, red.r_hat,
                         s4, warm);
  trace.stage4_objectives = fit.sweep_objectives;
  trace.stage4_data_loss = fit.data_loss;
  trace.stage_seconds[3] = seconds_since(t0);
  out.pair = std::move(fit.pair);
  return out;
}

}  // namespace blockfill::erm
