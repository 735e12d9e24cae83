#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "blockfill/datagen.hpp"
#include "blockfill/erm.hpp"
#include "blockfill/io.hpp"
#include "blockfill/rng.hpp"

using namespace blockfill;
namespace fs = std::filesystem;

namespace {

Matrix randn(Index n, Index m, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix g(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  return g;
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("blockfill_io_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("matrix market round trip is bit exact") {
  const fs::path dir = temp_dir("mm");
  const Matrix m = randn(9, 5, 1);
  io::write_matrix_market(dir / "m.mtx", m);
  const Matrix back = io::read_matrix_market(dir / "m.mtx");
  CHECK(back == m);  // %.17g round-trips doubles exactly
}

TEST_CASE("matrix market rejects malformed files") {
  const fs::path dir = temp_dir("mm_bad");
  {
    std::ofstream f(dir / "bad.mtx");
    f << "not a banner\n1 1\n0\n";
  }
  CHECK_THROWS_AS(io::read_matrix_market(dir / "bad.mtx"), io::IoError);
  {
    std::ofstream f(dir / "short.mtx");
    f << "%%MatrixMarket matrix array real general\n3 2\n1.0\n2.0\n";
  }
  CHECK_THROWS_AS(io::read_matrix_market(dir / "short.mtx"), io::IoError);
  CHECK_THROWS_AS(io::read_matrix_market(dir / "missing.mtx"), io::IoError);
}

TEST_CASE("csv vector round trip") {
  const fs::path dir = temp_dir("csv");
  Vector v(4);
  v << 0.1, -2.5, 1e-17, 3.0;
  io::write_csv_vector(dir / "v.csv", v);
  CHECK(io::read_csv_vector(dir / "v.csv") == v);
}

TEST_CASE("instance bundles round trip and rewrite identically") {
  const fs::path dir = temp_dir("inst");
  const auto inst = datagen::make_instance_poly(14, 12, 8, 7, 3, 1.5, 1.0, 33);
  const auto kappas = datagen::compute_kappas(inst);
  io::save_instance(dir / "a", inst, kappas);
  io::save_instance(dir / "b", inst, kappas);

  for (const char* name : {"manifest.json", "Fstar.mtx", "Gstar.mtx",
                           "dx1.csv", "dx2.csv", "dy1.csv", "dy2.csv"})
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));

  const auto back = io::load_instance(dir / "a");
  CHECK(back.n == inst.n);
  CHECK(back.m == inst.m);
  CHECK(back.n1 == inst.n1);
  CHECK(back.Fstar == inst.Fstar);
  CHECK(back.Gstar == inst.Gstar);
  CHECK(back.dx1 == inst.dx1);
  CHECK(back.spectrum == inst.spectrum);
  CHECK(back.B == inst.B);
  CHECK(back.test_on_grid == inst.test_on_grid);
  CHECK(back.train_weights == inst.train_weights);
}

TEST_CASE("embedding bundles round trip") {
  const fs::path dir = temp_dir("emb");
  erm::EmbeddingPair pair{randn(8, 2, 4), randn(6, 2, 5)};
  io::save_embeddings(dir, pair, 42, "cafebabe");
  const auto back = io::load_embeddings(dir);
  CHECK(back.F == pair.F);
  CHECK(back.G == pair.G);
}

TEST_CASE("content hash is stable and content sensitive") {
  CHECK(io::content_hash("abc") == io::content_hash("abc"));
  CHECK(io::content_hash("abc") != io::content_hash("abd"));
}

TEST_CASE("trace json excludes wall-clock state") {
  erm::DiagnosticsTrace trace;
  trace.r_hat = 2;
  trace.cov_spectrum = Vector::Constant(3, 0.5);
  trace.stage_seconds = {1.0, 2.0, 3.0, 4.0};
  auto a = io::trace_json(trace);
  trace.stage_seconds = {9.0, 9.0, 9.0, 9.0};
  CHECK(io::trace_json(trace) == a);
}
