#include <doctest.h>

#include <cmath>

#include "blockfill/balancing.hpp"
#include "blockfill/datagen.hpp"
#include "blockfill/erm.hpp"
#include "blockfill/io.hpp"
#include "blockfill/rng.hpp"
#include "blockfill/risk.hpp"

using namespace blockfill;
using namespace blockfill::erm;
using datagen::Dist;

TEST_CASE("rank-1 realizable completion reaches near-zero loss") {
  const auto fx = datagen::make_example(1, 6);
  const auto samples = datagen::exact_cells(fx.inst, Dist::Train);
  SolverOptions opts;
  opts.seed = 3;
  const auto fit = fit_factorized(samples, fx.inst.n, fx.inst.m, 1, opts);
  CHECK(fit.data_loss <= 1e-10);
  // zero-loss forces <f,g> = 1 on the unseen block as well
  CHECK(risk::risk(fit.pair.F, fit.pair.G, fx.inst, Dist::Test) <= 1e-6);
}

TEST_CASE("a single sample is interpolated") {
  std::vector<datagen::LabeledTriple> one = {{2, 3, 1.7, 1.0}};
  SolverOptions opts;
  opts.seed = 1;
  const auto fit = fit_factorized(one, 5, 5, 1, opts);
  CHECK(fit.data_loss <= 1e-10);
}

TEST_CASE("objective is nonincreasing across sweeps") {
  const auto inst = datagen::make_instance_poly(14, 12, 8, 7, 3, 1.0, 1.0, 5);
  const auto samples = datagen::sample_labeled(inst, Dist::Train, 300, 9);
  SolverOptions opts;
  opts.seed = 11;
  opts.restarts = 2;
  const auto fit = fit_factorized(samples, inst.n, inst.m, 3, opts);
  for (std::size_t i = 1; i < fit.sweep_objectives.size(); ++i)
    CHECK(fit.sweep_objectives[i] <=
          fit.sweep_objectives[i - 1] * (1 + 1e-12) + 1e-15);
}

TEST_CASE("fit input validation") {
  SolverOptions opts;
  CHECK_THROWS_AS(fit_factorized({}, 4, 4, 1, opts), InvalidInput);
  std::vector<datagen::LabeledTriple> one = {{0, 0, 1.0, 1.0}};
  CHECK_THROWS_AS(fit_factorized(one, 4, 4, 5, opts), InvalidInput);
  std::vector<datagen::LabeledTriple> oob = {{9, 0, 1.0, 1.0}};
  CHECK_THROWS_AS(fit_factorized(oob, 4, 4, 1, opts), InvalidInput);
}

TEST_CASE("covariance estimation") {
  EmbeddingPair pair;
  pair.F = Matrix::Zero(4, 2);
  pair.G = Matrix::Zero(4, 2);
  pair.F(1, 0) = 1.0;  // f(1) = e1

  SUBCASE("repeated single x concentrates on e1 e1^T") {
    std::vector<datagen::WeightedIndex> xs = {{1, 0.5}, {1, 0.5}};
    std::vector<datagen::WeightedIndex> ys = {{0, 1.0}};
    const auto [sf, sg] = estimate_covariances(pair, xs, ys, 1e-9);
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 1.0;
    expected.diagonal().array() += 1e-9;
    CHECK((sf - expected).norm() <= 1e-12);
  }
  SUBCASE("zero embeddings leave only the ridge") {
    std::vector<datagen::WeightedIndex> idx = {{0, 1.0}};
    const auto [sf, sg] = estimate_covariances(pair, idx, idx, 0.5);
    CHECK((sg - 0.5 * Matrix::Identity(2, 2)).norm() <= 1e-14);
  }
  SUBCASE("exact-expectation weights reproduce the closed-form sum") {
    const auto inst = datagen::make_instance_poly(10, 10, 6, 6, 2, 1.0, 1.0, 7);
    EmbeddingPair truth{inst.Fstar, inst.Gstar};
    const auto xs = datagen::marginal_support(inst.dx1);
    const auto ys = datagen::marginal_support(inst.dy1);
    const double mu = 0.01;
    const auto [sf, sg] = estimate_covariances(truth, xs, ys, mu);
    Matrix direct = balancing::weighted_covariance(inst.Fstar, inst.dx1);
    direct.diagonal().array() += mu;
    CHECK((sf - direct).norm() <= 1e-12);
  }
}

TEST_CASE("dim_reduce") {
  SUBCASE("axis-aligned covariances with a clear gap") {
    const double mu = 1e-6;
    Matrix s = Vector{{3.0 + mu, 1.0 + mu}}.asDiagonal();
    const auto red = dim_reduce(s, s, 2, 2.0);
    CHECK(red.r_hat == 1);
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 1.0;
    CHECK((red.Q - expected).norm() <= 1e-8);
  }
  SUBCASE("everything below the threshold fails loudly") {
    Matrix s = 0.05 * Matrix::Identity(3, 3);
    CHECK_THROWS_AS(dim_reduce(s, s, 3, 0.5), NoAdmissibleRank);
  }
  SUBCASE("example-3 adversarial covariances select rank one") {
    const auto fx = datagen::make_example(3, 8);
    const auto& [fhat, ghat] = *fx.adversarial;
    EmbeddingPair pair{fhat, ghat};
    const auto xs = datagen::marginal_support(fx.inst.dx1);
    const auto ys = datagen::marginal_support(fx.inst.dy1);
    const auto [sf, sg] = estimate_covariances(pair, xs, ys, 1e-6);
    const auto red = dim_reduce(sf, sg, 2, 0.5);
    CHECK(red.r_hat == 1);
  }
}

TEST_CASE("distillation") {
  const auto inst = datagen::make_instance_poly(10, 10, 6, 6, 1, 1.0, 1.0, 13);
  const auto labeled = datagen::exact_cells(inst, Dist::Train);
  auto unlabeled = datagen::exact_cells(inst, Dist::D11);

  SUBCASE("lambda = 0 reduces to the labeled objective") {
    SolverOptions opts;
    opts.seed = 2;
    opts.restarts = 2;
    const auto plain = fit_factorized(labeled, inst.n, inst.m, 1, opts);
    const auto distilled =
        distill_fit(labeled, unlabeled, 0.0, inst.n, inst.m, 1, opts);
    CHECK(distilled.objective == doctest::Approx(plain.objective).epsilon(1e-9));
  }
  SUBCASE("consistent targets keep the joint loss near zero") {
    // unlabeled targets already equal h*, so both losses vanish together
    SolverOptions opts;
    opts.seed = 4;
    const auto fit =
        distill_fit(labeled, unlabeled, 1.0, inst.n, inst.m, 1, opts);
    CHECK(fit.data_loss <= 1e-8);
  }
}

TEST_CASE("double-stage pipeline") {
  const auto inst = datagen::make_instance_poly(20, 20, 12, 12, 4, 2.0, 1.0, 17);
  ErmConfig cfg;
  cfg.p = 6;
  cfg.r_cut = 2;
  cfg.sigma_cut = 0.5 * (inst.spectrum[1] + inst.spectrum[2]);
  cfg.mu = 1e-8;
  cfg.exact_expectation = true;
  cfg.solver.seed = 23;

  SUBCASE("defaults are applied and recorded") {
    auto result = erm_double_stage(inst, cfg);
    CHECK(result.trace.lambda_used == doctest::Approx(16.0));  // r_cut^4
    CHECK(result.trace.mu_used == doctest::Approx(1e-8));
    CHECK(result.trace.r_hat == 2);
    ErmConfig with_mu = cfg;
    with_mu.mu.reset();
    with_mu.n1 = 50;
    auto other = erm_double_stage(inst, with_mu);
    CHECK(other.trace.mu_used == doctest::Approx(inst.B * inst.B / 50.0));
  }
  SUBCASE("identical config and seed give identical traces and pairs") {
    const auto a = erm_double_stage(inst, cfg);
    const auto b = erm_double_stage(inst, cfg);
    CHECK(io::trace_json(a.trace) == io::trace_json(b.trace));
    CHECK(a.pair.F == b.pair.F);
    CHECK(a.pair.G == b.pair.G);
  }
  SUBCASE("the warm start never beats the returned pair") {
    auto result = erm_double_stage(inst, cfg);
    // rebuild the warm start the pipeline used
    const auto samples = datagen::exact_cells(inst, Dist::Train);
    SolverOptions s1 = cfg.solver;
    s1.init_scale = inst.B / std::sqrt(double(cfg.p));
    s1.seed = hash_combine(cfg.solver.seed, hash_tag("stage1"));
    const auto stage1 = fit_factorized(samples, inst.n, inst.m, cfg.p, s1);
    const auto xs = datagen::marginal_support(inst.dx1);
    const auto ys = datagen::marginal_support(inst.dy1);
    const auto [sf, sg] = estimate_covariances(stage1.pair, xs, ys, 1e-8);
    const auto red = dim_reduce(sf, sg, cfg.r_cut, cfg.sigma_cut);
    const auto warm = reduced_warm_start(stage1.pair, red);

    // warm start reproduces h_red exactly
    const Matrix gq = stage1.pair.G * red.Q.transpose();
    const Matrix h_red = stage1.pair.F * gq.transpose();
    const Matrix h_warm = warm.F * warm.G.transpose();
    CHECK((h_red - h_warm).norm() <= 1e-8 * std::max(1.0, h_red.norm()));

    // and stage 4 ends at an objective no worse than the warm start's
    auto labeled = datagen::exact_cells(inst, Dist::Train);
    auto unlabeled = datagen::exact_cells(inst, Dist::D11);
    for (auto& cell : unlabeled) cell.z = h_red(cell.x, cell.y);
    double warm_obj = 0.0;
    for (const auto& s : labeled) {
      const double e = warm.predict(s.x, s.y) - s.z;
      warm_obj += s.w * e * e;
    }
    for (const auto& s : unlabeled) {
      const double e = warm.predict(s.x, s.y) - s.z;
      warm_obj += result.trace.lambda_used * s.w * e * e;
    }
    CHECK(result.trace.stage4_objectives.back() <= warm_obj + 1e-12);
  }
  SUBCASE("pipeline beats the plain single-stage fit at the reduced rank") {
    auto result = erm_double_stage(inst, cfg);
    const double r_test =
        risk::risk(result.pair.F, result.pair.G, inst, Dist::Test);
    CHECK(r_test < 1.0);
    CHECK(result.trace.cov_spectrum.size() == cfg.p);
  }
}

TEST_CASE("stage errors carry the stage label") {
  const auto inst = datagen::make_instance_poly(12, 12, 8, 8, 2, 1.0, 1.0, 3);
  ErmConfig cfg;
  cfg.p = 3;
  cfg.r_cut = 2;
  cfg.sigma_cut = 100.0;  // nothing admissible
  cfg.exact_expectation = true;
  cfg.mu = 1e-8;
  cfg.solver.seed = 5;
  try {
    erm_double_stage(inst, cfg);
    CHECK(false);
  } catch (const NoAdmissibleRank& e) {
    CHECK(std::string(e.what()).find("stage 3") != std::string::npos);
    CHECK(e.spectrum().size() == 3);
  }
}

TEST_CASE("sampled covariances approach the exact-expectation ones") {
  const auto inst = datagen::make_instance_poly(16, 16, 10, 10, 3, 1.0, 1.0, 29);
  EmbeddingPair truth{inst.Fstar, inst.Gstar};
  const double mu = 1e-6;

  const auto exact = estimate_covariances(
      truth, datagen::marginal_support(inst.dx1),
      datagen::marginal_support(inst.dy1), mu);

  const Index count = 20000;
  const auto pairs = datagen::sample_pairs(inst, Dist::D11, count, 31);
  std::vector<datagen::WeightedIndex> xs, ys;
  const double w = 1.0 / double(count);
  for (const auto& [x, y] : pairs) {
    xs.push_back({x, w});
    ys.push_back({y, w});
  }
  const auto sampled = estimate_covariances(truth, xs, ys, mu);

  // entrywise 3-sigma band from the iid second-moment estimator
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) {
      double second = 0.0;
      for (const auto& wx : datagen::marginal_support(inst.dx1)) {
        const double prod = inst.Fstar(wx.i, i) * inst.Fstar(wx.i, j);
        second += wx.w * prod * prod;
      }
      const double mean = exact.first(i, j) - (i == j ? mu : 0.0);
      const double var = std::max(0.0, second - mean * mean) / double(count);
      CHECK(std::abs(sampled.first(i, j) - exact.first(i, j)) <=
            3.0 * std::sqrt(var) + 1e-12);
    }
  }
}

TEST_CASE("double stage at r_cut = 1 solves example 1 through the sweep path") {
  const auto fx = datagen::make_example(1, 10);
  ErmConfig cfg;
  cfg.p = 1;
  cfg.r_cut = 1;
  cfg.sigma_cut = 0.5;
  cfg.mu = 1e-8;
  cfg.exact_expectation = true;
  cfg.solver.seed = 37;
  const auto result = erm_double_stage(fx.inst, cfg);
  CHECK(result.trace.r_hat == 1);
  CHECK(risk::risk(result.pair.F, result.pair.G, fx.inst, Dist::Test) <= 1e-5);
}
