#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace blockfill::cli {

// exit codes: 0 success, 1 usage, 2 algorithmic failure, 3 I/O
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kAlgorithm = 2;
inline constexpr int kIo = 3;

struct GenArgs {
  std::string decay;  // poly | exp, or empty when example is set
  int example = 0;    // 1..3 when generating a fixture
  double gamma = 1.0;
  double c = 1.0;
  long n = 60, m = 60, n1 = 40, m1 = 40, d = 8;
  std::uint64_t seed = 0;
  bool grid_test = false;
  std::string out;
};

struct FitArgs {
  std::string instance;
  std::string mode = "double";  // single | double
  long r = 1;                   // single-stage rank
  long p = 4;
  long r_cut = 2;
  double sigma_cut = 0.1;
  std::optional<double> lambda;
  std::optional<double> mu;
  long n1 = 1000, n2 = 1000, n3 = 1000, n4 = 1000;
  bool exact = false;
  int restarts = 5;
  std::uint64_t seed = 0;
  std::string out;
};

struct EvalArgs {
  std::string instance;
  std::string embeddings;
  long k = 1;
  long r = 1;
  std::optional<double> sigma_cut;
  std::optional<long> r_cut;
  std::string out;  // empty: stdout
};

struct DiagArgs {
  std::string what;  // svd-pert | partition | balance
  int trials = 200;
  double eta = 0.5;
  std::string instance;
  long s = 4;
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  std::string out;  // empty: stdout
};

struct SweepArgs {
  std::string instance;
  std::vector<long> r_cut = {1, 2, 4, 8};
  std::vector<long> n1 = {};  // empty with exact=true means exact mode only
  bool exact = false;
  int seeds = 1;
  std::uint64_t seed = 0;
  long p = 0;  // 0: derived per r_cut
  std::optional<double> sigma_cut;
  std::optional<double> mu;
  int threads = 0;  // 0: BLOCKFILL_THREADS or 1
  std::string out;
};

struct VerifyArgs {
  std::string suite = "all";
  std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& args);
int cmd_fit(const FitArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_diag(const DiagArgs& args);
int cmd_sweep(const SweepArgs& args);
int cmd_verify(const VerifyArgs& args);

}  // namespace blockfill::cli
