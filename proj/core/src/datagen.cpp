#include "blockfill/datagen.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "blockfill/balancing.hpp"
#include "blockfill/risk.hpp"
#include "blockfill/rng.hpp"

namespace blockfill::datagen {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector uniform_on(Index len, Index lo, Index hi) {
  Vector v = Vector::Zero(len);
  const double p = 1.0 / static_cast<double>(hi - lo);
  for (Index i = lo; i < hi; ++i) v[i] = p;
  return v;
}

std::vector<double> cumsum_of(const Vector& v) {
  std::vector<double> c(v.size());
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    acc += v[i];
    c[i] = acc;
  }
  return c;
}

double max_row_norm(const Matrix& a) {
  double best = 0.0;
  for (Index i = 0; i < a.rows(); ++i) best = std::max(best, a.row(i).norm());
  return best;
}

// Column-orthonormal basis from seeded Gaussians.
Matrix random_orthonormal(Index rows, Index cols, RngStream rng) {
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  return Matrix(qr.householderQ()) * Matrix::Identity(rows, cols);
}

GroundTruthInstance make_instance_decay(const std::string& kind, Index n,
                                        Index m, Index n1, Index m1, Index d,
                                        double gamma, double C,
                                        std::uint64_t seed, bool grid_test) {
  require(n1 >= 1 && n1 < n && m1 >= 1 && m1 < m,
          "make_instance: split must satisfy 1 <= n1 < n, 1 <= m1 < m");
  require(d >= 1 && d <= std::min(n1, m1),
          "make_instance: d must be in [1, min(n1, m1)]");
  require(gamma > 0.0 && C > 0.0, "make_instance: gamma and C must be positive");

  Vector lambda(d);
  for (Index i = 0; i < d; ++i) {
    const double idx = static_cast<double>(i + 1);
    lambda[i] = (kind == "poly") ? C * std::pow(idx, -(1.0 + gamma))
                                 : C * std::exp(-gamma * idx);
  }
  const Vector root = lambda.cwiseSqrt();

  RngStream rng(seed, hash_tag("make_instance_" + kind));
  const Matrix u = random_orthonormal(n1, d, rng.derive("U"));
  const Matrix v = random_orthonormal(m1, d, rng.derive("V"));

  GroundTruthInstance inst;
  inst.n = n;
  inst.m = m;
  inst.n1 = n1;
  inst.m1 = m1;
  inst.d = d;
  inst.kind = kind;
  inst.gamma = gamma;
  inst.C = C;
  inst.seed = seed;
  inst.test_on_grid = grid_test;

  auto blocks = make_uniform_blocks(n, m, n1, m1);
  inst.dx1 = blocks.dx1;
  inst.dx2 = blocks.dx2;
  inst.dy1 = blocks.dy1;
  inst.dy2 = blocks.dy2;
  inst.train_weights = blocks.weights;

  inst.Fstar = Matrix::Zero(n, d);
  inst.Gstar = Matrix::Zero(m, d);
  inst.Fstar.topRows(n1) = std::sqrt(static_cast<double>(n1)) * u * root.asDiagonal();
  inst.Gstar.topRows(m1) = std::sqrt(static_cast<double>(m1)) * v * root.asDiagonal();

  // Block-2 rows are sparse bounded mixtures of block-1 rows, so their
  // rowspaces stay inside the block-1 rowspaces and kappa_cov is finite.
  const auto fill_block2 = [](Matrix& mat, Index split, RngStream mix_rng) {
    const Index terms = std::min<Index>(3, split);
    for (Index i = split; i < mat.rows(); ++i) {
      for (Index t = 0; t < terms; ++t) {
        const Index src = static_cast<Index>(mix_rng.below(split));
        const double coef = mix_rng.uniform(-1.0, 1.0);
        mat.row(i) += coef * mat.row(src);
      }
    }
  };
  fill_block2(inst.Fstar, n1, rng.derive("F2"));
  fill_block2(inst.Gstar, m1, rng.derive("G2"));

  inst.B = std::max(max_row_norm(inst.Fstar), max_row_norm(inst.Gstar));
  inst.spectrum = balancing::sym_eigenvalues(inst.sigma_star());
  return inst;
}

}  // namespace

const char* dist_name(Dist d) {
  switch (d) {
    case Dist::Train: return "train";
    case Dist::Test: return "test";
    case Dist::D11: return "d11";
    case Dist::D12: return "d12";
    case Dist::D21: return "d21";
    case Dist::D22: return "d22";
  }
  return "?";
}

double GroundTruthInstance::density(Dist dist, Index x, Index y) const {
  switch (dist) {
    case Dist::D11: return dx1[x] * dy1[y];
    case Dist::D12: return dx1[x] * dy2[y];
    case Dist::D21: return dx2[x] * dy1[y];
    case Dist::D22: return dx2[x] * dy2[y];
    case Dist::Train:
      return train_weights[0] * dx1[x] * dy1[y] +
             train_weights[1] * dx1[x] * dy2[y] +
             train_weights[2] * dx2[x] * dy1[y];
    case Dist::Test:
      if (test_on_grid)
        return 1.0 / (static_cast<double>(n) * static_cast<double>(m));
      return dx2[x] * dy2[y];
  }
  return 0.0;
}

Matrix GroundTruthInstance::sigma_star() const {
  return balancing::weighted_covariance(Fstar, dx1);
}

UniformBlocks make_uniform_blocks(Index n, Index m, Index n1, Index m1) {
  require(n1 >= 1 && n1 < n && m1 >= 1 && m1 < m,
          "make_uniform_blocks: degenerate split");
  UniformBlocks out;
  out.dx1 = uniform_on(n, 0, n1);
  out.dx2 = uniform_on(n, n1, n);
  out.dy1 = uniform_on(m, 0, m1);
  out.dy2 = uniform_on(m, m1, m);

  const double alpha = static_cast<double>(n1) / static_cast<double>(n);
  const double beta = static_cast<double>(m1) / static_cast<double>(m);
  const double z = alpha * beta + alpha * (1 - beta) + (1 - alpha) * beta;
  out.weights = {alpha * beta / z, alpha * (1 - beta) / z,
                 (1 - alpha) * beta / z};
  out.kappa_trn =
      z / std::min({(1 - beta) * alpha, (1 - alpha) * beta, alpha * beta});
  out.kappa_tst = alpha * beta;
  return out;
}

GroundTruthInstance make_instance_poly(Index n, Index m, Index n1, Index m1,
                                       Index d, double gamma, double C,
                                       std::uint64_t seed, bool grid_test) {
  return make_instance_decay("poly", n, m, n1, m1, d, gamma, C, seed, grid_test);
}

GroundTruthInstance make_instance_exp(Index n, Index m, Index n1, Index m1,
                                      Index d, double gamma, double C,
                                      std::uint64_t seed, bool grid_test) {
  return make_instance_decay("exp", n, m, n1, m1, d, gamma, C, seed, grid_test);
}

KappaReport compute_kappas(const GroundTruthInstance& inst) {
  KappaReport out;

  // kappa_trn: largest density ratio dD_{ij}/dD_train over the three
  // observed product distributions.
  const auto xs1 = marginal_support(inst.dx1);
  const auto xs2 = marginal_support(inst.dx2);
  const auto ys1 = marginal_support(inst.dy1);
  const auto ys2 = marginal_support(inst.dy2);
  const std::array<std::pair<const std::vector<WeightedIndex>*,
                             const std::vector<WeightedIndex>*>,
                   3>
      observed = {{{&xs1, &ys1}, {&xs1, &ys2}, {&xs2, &ys1}}};
  const std::array<Dist, 3> obs_dist = {Dist::D11, Dist::D12, Dist::D21};
  double trn = 0.0;
  for (std::size_t b = 0; b < 3; ++b) {
    for (const auto& wx : *observed[b].first) {
      for (const auto& wy : *observed[b].second) {
        const double num = inst.density(obs_dist[b], wx.i, wy.i);
        const double den = inst.density(Dist::Train, wx.i, wy.i);
        trn = (den <= 0.0) ? kInf : std::max(trn, num / den);
      }
    }
  }
  out.trn = std::max(1.0, trn);

  // kappa_tst: largest ratio of the test density to the sum of the four
  // product densities, over the test support.
  double tst = 0.0;
  const auto tst_cell = [&](Index x, Index y) {
    const double num = inst.density(Dist::Test, x, y);
    if (num <= 0.0) return;
    const double den = inst.density(Dist::D11, x, y) +
                       inst.density(Dist::D12, x, y) +
                       inst.density(Dist::D21, x, y) +
                       inst.density(Dist::D22, x, y);
    tst = (den <= 0.0) ? kInf : std::max(tst, num / den);
  };
  if (inst.test_on_grid) {
    for (Index x = 0; x < inst.n; ++x)
      for (Index y = 0; y < inst.m; ++y) tst_cell(x, y);
  } else {
    for (const auto& wx : xs2)
      for (const auto& wy : ys2) tst_cell(wx.i, wy.i);
  }
  out.tst = tst;

  // kappa_cov: largest generalized eigenvalue of (Sigma_2, Sigma_1) on the
  // range of Sigma_1; infinite when the block-2 covariance leaves it.
  const auto cov_side = [&](const Matrix& rows, const Vector& w1,
                            const Vector& w2) -> double {
    const Matrix s1 = balancing::weighted_covariance(rows, w1);
    const Matrix s2 = balancing::weighted_covariance(rows, w2);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s1);
    const Vector lam = es.eigenvalues();
    const double lmax = std::max(lam.maxCoeff(), 0.0);
    const double floor = std::max(lmax, 1.0) * 1e-12;
    std::vector<Index> keep;
    for (Index i = 0; i < lam.size(); ++i)
      if (lam[i] > floor) keep.push_back(i);
    Matrix ur(rows.cols(), static_cast<Index>(keep.size()));
    Vector lr(static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
      ur.col(static_cast<Index>(j)) = es.eigenvectors().col(keep[j]);
      lr[static_cast<Index>(j)] = lam[keep[j]];
    }
    // containment: trace of Sigma_2 outside range(Sigma_1) must vanish
    const double outside = (s2 - ur * (ur.transpose() * s2 * ur) * ur.transpose()).norm();
    if (outside > 1e-9 * std::max(1.0, s2.norm())) return kInf;
    if (keep.empty()) return 1.0;
    const Matrix mid = lr.cwiseSqrt().cwiseInverse().asDiagonal() *
                       (ur.transpose() * s2 * ur) *
                       lr.cwiseSqrt().cwiseInverse().asDiagonal();
    return balancing::sym_eigenvalues(mid).maxCoeff();
  };
  out.cov = std::max(
      1.0, std::max(cov_side(inst.Fstar, inst.dx1, inst.dx2),
                    cov_side(inst.Gstar, inst.dy1, inst.dy2)));

  // kappa_apx: worst ratio of train risk to 1x1 risk of the truncated truth.
  const Matrix sigma = inst.sigma_star();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  Matrix vecs = es.eigenvectors().rowwise().reverse();
  double apx = 0.0;
  for (Index k = 1; k <= inst.d; ++k) {
    const Matrix vk = vecs.leftCols(k);
    const Matrix proj = vk * vk.transpose();
    const Matrix fk = inst.Fstar * proj;
    const Matrix gk = inst.Gstar * proj;
    const double num = risk::risk(fk, gk, inst, Dist::Train);
    const double den = risk::risk(fk, gk, inst, Dist::D11);
    constexpr double kZero = 1e-14;
    double ratio;
    if (den <= kZero)
      ratio = (num <= kZero) ? 1.0 : kInf;
    else
      ratio = num / den;
    apx = std::max(apx, ratio);
  }
  out.apx = std::max(1.0, apx);
  return out;
}

ExampleFixture make_example(int id, Index n, double gamma) {
  require(n >= 1, "make_example: n must be >= 1");
  const Index full = 2 * n;

  GroundTruthInstance inst;
  inst.n = inst.m = full;
  inst.n1 = inst.m1 = n;
  inst.seed = 0;
  inst.test_on_grid = false;
  auto blocks = make_uniform_blocks(full, full, n, n);
  inst.dx1 = blocks.dx1;
  inst.dx2 = blocks.dx2;
  inst.dy1 = blocks.dy1;
  inst.dy2 = blocks.dy2;
  inst.train_weights = blocks.weights;

  ExampleFixture out;
  switch (id) {
    case 1: {
      inst.d = 1;
      inst.kind = "example1";
      inst.Fstar = Matrix::Ones(full, 1);
      inst.Gstar = Matrix::Ones(full, 1);
      break;
    }
    case 2: {
      // Second coordinate sqrt(gamma) on the unseen halves, so the flat
      // predictor (1,0) scores exactly gamma^2 on the test block.
      require(gamma > 0.0, "make_example: gamma must be positive for id=2");
      inst.d = 2;
      inst.kind = "example2";
      inst.gamma = gamma;
      const double c = std::sqrt(gamma);
      inst.Fstar = Matrix::Zero(full, 2);
      inst.Gstar = Matrix::Zero(full, 2);
      inst.Fstar.col(0).setOnes();
      inst.Gstar.col(0).setOnes();
      for (Index i = n; i < full; ++i) {
        inst.Fstar(i, 1) = c;
        inst.Gstar(i, 1) = c;
      }
      Matrix fhat = Matrix::Zero(full, 2);
      Matrix ghat = Matrix::Zero(full, 2);
      fhat.col(0).setOnes();
      ghat.col(0).setOnes();
      out.adversarial = {fhat, ghat};
      break;
    }
    case 3: {
      inst.d = 2;
      inst.kind = "example3";
      inst.Fstar = Matrix::Zero(full, 2);
      inst.Gstar = Matrix::Zero(full, 2);
      inst.Fstar.col(0).setOnes();
      inst.Gstar.col(0).setOnes();
      Matrix fhat = inst.Fstar;
      Matrix ghat = inst.Gstar;
      for (Index i = n; i < full; ++i) {
        fhat(i, 1) = 1.0;
        ghat(i, 1) = 1.0;
      }
      out.adversarial = {fhat, ghat};
      break;
    }
    default:
      throw InvalidInput("make_example: id must be 1, 2, or 3");
  }
  inst.B = std::max(max_row_norm(inst.Fstar), max_row_norm(inst.Gstar));
  inst.spectrum = balancing::sym_eigenvalues(inst.sigma_star());
  out.inst = std::move(inst);
  return out;
}

std::vector<WeightedIndex> marginal_support(const Vector& marginal) {
  std::vector<WeightedIndex> out;
  for (Index i = 0; i < marginal.size(); ++i)
    if (marginal[i] > 0.0) out.push_back({i, marginal[i]});
  return out;
}

namespace {

struct BlockSampler {
  std::vector<double> block_cum;          // over mixture components
  std::vector<const Vector*> xs, ys;      // component marginals
  std::vector<std::vector<double>> x_cum, y_cum;
};

BlockSampler make_sampler(const GroundTruthInstance& inst, Dist dist) {
  BlockSampler s;
  const auto push = [&](const Vector& x, const Vector& y, double w) {
    s.xs.push_back(&x);
    s.ys.push_back(&y);
    s.x_cum.push_back(cumsum_of(x));
    s.y_cum.push_back(cumsum_of(y));
    s.block_cum.push_back((s.block_cum.empty() ? 0.0 : s.block_cum.back()) + w);
  };
  switch (dist) {
    case Dist::D11: push(inst.dx1, inst.dy1, 1.0); break;
    case Dist::D12: push(inst.dx1, inst.dy2, 1.0); break;
    case Dist::D21: push(inst.dx2, inst.dy1, 1.0); break;
    case Dist::D22: push(inst.dx2, inst.dy2, 1.0); break;
    case Dist::Train:
      push(inst.dx1, inst.dy1, inst.train_weights[0]);
      push(inst.dx1, inst.dy2, inst.train_weights[1]);
      push(inst.dx2, inst.dy1, inst.train_weights[2]);
      break;
    case Dist::Test:
      if (inst.test_on_grid) {
        const double a = static_cast<double>(inst.n1) / inst.n;
        const double b = static_cast<double>(inst.m1) / inst.m;
        push(inst.dx1, inst.dy1, a * b);
        push(inst.dx1, inst.dy2, a * (1 - b));
        push(inst.dx2, inst.dy1, (1 - a) * b);
        push(inst.dx2, inst.dy2, (1 - a) * (1 - b));
      } else {
        push(inst.dx2, inst.dy2, 1.0);
      }
      break;
  }
  return s;
}

}  // namespace

std::vector<std::pair<Index, Index>> sample_pairs(
    const GroundTruthInstance& inst, Dist dist, Index count,
    std::uint64_t seed) {
  require(count >= 1, "sample_pairs: count must be >= 1");
  auto sampler = make_sampler(inst, dist);
  RngStream rng(seed, hash_tag(std::string("sample_") + dist_name(dist)));
  std::vector<std::pair<Index, Index>> out;
  out.reserve(count);
  for (Index i = 0; i < count; ++i) {
    const std::size_t b = rng.categorical(sampler.block_cum);
    const Index x = static_cast<Index>(rng.categorical(sampler.x_cum[b]));
    const Index y = static_cast<Index>(rng.categorical(sampler.y_cum[b]));
    out.emplace_back(x, y);
  }
  return out;
}

std::vector<LabeledTriple> sample_labeled(const GroundTruthInstance& inst,
                                          Dist dist, Index count,
                                          std::uint64_t seed, double noise_sd) {
  auto pairs = sample_pairs(inst, dist, count, seed);
  RngStream noise(seed, hash_tag("label_noise"));
  std::vector<LabeledTriple> out;
  out.reserve(pairs.size());
  const double w = 1.0 / static_cast<double>(count);
  const double bound = inst.B * inst.B;
  for (const auto& [x, y] : pairs) {
    double z = inst.hstar(x, y);
    if (noise_sd > 0.0)
      z = std::clamp(z + noise_sd * noise.normal(), -bound, bound);
    out.push_back({x, y, z, w});
  }
  return out;
}

std::vector<LabeledTriple> exact_cells(const GroundTruthInstance& inst,
                                       Dist dist) {
  std::vector<LabeledTriple> out;
  for (Index x = 0; x < inst.n; ++x) {
    for (Index y = 0; y < inst.m; ++y) {
      const double w = inst.density(dist, x, y);
      if (w > 0.0) out.push_back({x, y, inst.hstar(x, y), w});
    }
  }
  return out;
}

std::vector<CheckLine> validate(const GroundTruthInstance& inst) {
  std::vector<CheckLine> out;
  const auto add = [&](const std::string& name, bool ok,
                       const std::string& detail) {
    out.push_back({name, ok, detail});
  };
  const auto sum_err = [](const Vector& v) { return std::abs(v.sum() - 1.0); };

  add("marginals normalized",
      sum_err(inst.dx1) <= 1e-12 && sum_err(inst.dx2) <= 1e-12 &&
          sum_err(inst.dy1) <= 1e-12 && sum_err(inst.dy2) <= 1e-12,
      "each marginal sums to 1 within 1e-12");

  bool support_ok = true;
  for (Index i = 0; i < inst.n; ++i) {
    if (i >= inst.n1 && inst.dx1[i] != 0.0) support_ok = false;
    if (i < inst.n1 && inst.dx2[i] != 0.0) support_ok = false;
  }
  for (Index j = 0; j < inst.m; ++j) {
    if (j >= inst.m1 && inst.dy1[j] != 0.0) support_ok = false;
    if (j < inst.m1 && inst.dy2[j] != 0.0) support_ok = false;
  }
  add("marginal supports", support_ok, "each marginal lives on its block");

  const Matrix sf = balancing::weighted_covariance(inst.Fstar, inst.dx1);
  const Matrix sg = balancing::weighted_covariance(inst.Gstar, inst.dy1);
  const double bal_err = (sf - sg).norm() / std::max(1.0, sf.norm());
  {
    std::ostringstream ss;
    ss << "relative error " << bal_err;
    add("balanced basis", bal_err <= 1e-7, ss.str());
  }

  double hmax = 0.0;
  for (Index x = 0; x < inst.n; ++x)
    for (Index y = 0; y < inst.m; ++y)
      hmax = std::max(hmax, std::abs(inst.hstar(x, y)));
  {
    std::ostringstream ss;
    ss << "max |h*| = " << hmax << ", B^2 = " << inst.B * inst.B;
    add("bounded labels", hmax <= inst.B * inst.B * (1.0 + 1e-12), ss.str());
  }

  if (inst.kind == "poly" || inst.kind == "exp") {
    double worst = 0.0;
    for (Index i = 0; i < inst.d; ++i) {
      const double idx = static_cast<double>(i + 1);
      const double target = (inst.kind == "poly")
                                ? inst.C * std::pow(idx, -(1.0 + inst.gamma))
                                : inst.C * std::exp(-inst.gamma * idx);
      worst = std::max(worst,
                       std::abs(inst.spectrum[i] - target) / std::max(target, 1e-300));
    }
    std::ostringstream ss;
    ss << "worst relative deviation " << worst;
    add("target spectrum", worst <= 1e-8, ss.str());
  }
  return out;
}

}  // namespace blockfill::datagen
