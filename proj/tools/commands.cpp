#include "commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

#include <json.hpp>

#include "blockfill/datagen.hpp"
#include "blockfill/erm.hpp"
#include "blockfill/io.hpp"
#include "blockfill/partition.hpp"
#include "blockfill/risk.hpp"
#include "blockfill/rng.hpp"
#include "blockfill/verify.hpp"

namespace blockfill::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int guard(const std::string& where, const std::function<int()>& body) {
  try {
    return body();
  } catch (const io::IoError& e) {
    std::cerr << where << ": " << e.what() << "\n";
    return kIo;
  } catch (const InvalidInput& e) {
    std::cerr << where << ": " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << where << ": " << e.what() << "\n";
    return kAlgorithm;
  } catch (const std::exception& e) {
    std::cerr << where << ": " << e.what() << "\n";
    return kAlgorithm;
  }
}

void emit(const std::string& out, const std::string& payload) {
  if (out.empty()) {
    std::cout << payload << "\n";
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw io::IoError("cannot write " + out);
  f << payload << "\n";
}

int thread_budget(int requested) {
  int cap = 0;
  if (const char* env = std::getenv("BLOCKFILL_THREADS")) cap = std::atoi(env);
  int n = requested > 0 ? requested : (cap > 0 ? cap : 1);
  if (cap > 0) n = std::min(n, cap);
  return std::max(1, n);
}

}  // namespace

int cmd_gen(const GenArgs& args) {
  return guard("gen", [&] {
    datagen::GroundTruthInstance inst;
    if (args.example != 0) {
      auto fixture = datagen::make_example(args.example, args.n, args.gamma);
      inst = std::move(fixture.inst);
      if (fixture.adversarial) {
        const auto& [fhat, ghat] = *fixture.adversarial;
        io::save_embeddings(fs::path(args.out) / "adversarial",
                            erm::EmbeddingPair{fhat, ghat}, 0, "fixture");
      }
    } else if (args.decay == "poly") {
      inst = datagen::make_instance_poly(args.n, args.m, args.n1, args.m1,
                                         args.d, args.gamma, args.c, args.seed,
                                         args.grid_test);
    } else if (args.decay == "exp") {
      inst = datagen::make_instance_exp(args.n, args.m, args.n1, args.m1,
                                        args.d, args.gamma, args.c, args.seed,
                                        args.grid_test);
    } else {
      throw InvalidInput("gen: --decay must be poly or exp, or use --example");
    }
    const auto kappas = datagen::compute_kappas(inst);
    io::save_instance(args.out, inst, kappas);

    for (const auto& line : datagen::validate(inst)) {
      if (!line.ok)
        throw Error("instance self-check failed: " + line.name + " (" +
                    line.detail + ")");
    }
    std::cerr << "wrote instance bundle to " << args.out << "\n";
    return kOk;
  });
}

namespace {

std::string fit_config_hash(const FitArgs& args) {
  json j;
  j["mode"] = args.mode;
  j["r"] = args.r;
  j["p"] = args.p;
  j["r_cut"] = args.r_cut;
  j["sigma_cut"] = args.sigma_cut;
  j["lambda"] = args.lambda ? json(*args.lambda) : json(nullptr);
  j["mu"] = args.mu ? json(*args.mu) : json(nullptr);
  j["n"] = {args.n1, args.n2, args.n3, args.n4};
  j["exact"] = args.exact;
  j["restarts"] = args.restarts;
  j["seed"] = args.seed;
  return io::content_hash(j.dump());
}

}  // namespace

int cmd_fit(const FitArgs& args) {
  return guard("fit", [&] {
    const auto inst = io::load_instance(args.instance);
    const std::string config_hash = fit_config_hash(args);

    if (args.mode == "single") {
      erm::SolverOptions opts;
      opts.restarts = args.restarts;
      opts.seed = args.seed;
      opts.init_scale = inst.B / std::sqrt(static_cast<double>(args.r));
      const auto samples =
          args.exact ? datagen::exact_cells(inst, datagen::Dist::Train)
                     : datagen::sample_labeled(inst, datagen::Dist::Train,
                                               args.n1, args.seed);
      const auto fit =
          erm::fit_factorized(samples, inst.n, inst.m, args.r, opts);
      io::save_embeddings(args.out, fit.pair, args.seed, config_hash);
      json trace;
      trace["format"] = "blockfill-trace-v1";
      trace["mode"] = "single";
      trace["rank"] = args.r;
      trace["seed"] = args.seed;
      trace["objectives"] = fit.sweep_objectives;
      trace["data_loss"] = fit.data_loss;
      emit((fs::path(args.out) / "trace.json").string(), trace.dump(2));
      std::cerr << "single-stage fit done; train data loss "
                << io::format_double(fit.data_loss) << "\n";
      return kOk;
    }
    if (args.mode != "double")
      throw InvalidInput("fit: --mode must be single or double");

    erm::ErmConfig cfg;
    cfg.p = args.p;
    cfg.r_cut = args.r_cut;
    cfg.sigma_cut = args.sigma_cut;
    cfg.lambda = args.lambda;
    cfg.mu = args.mu;
    cfg.n1 = args.n1;
    cfg.n2 = args.n2;
    cfg.n3 = args.n3;
    cfg.n4 = args.n4;
    cfg.exact_expectation = args.exact;
    cfg.solver.restarts = args.restarts;
    cfg.solver.seed = args.seed;
    try {
      const auto result = erm::erm_double_stage(inst, cfg);
      io::save_embeddings(args.out, result.pair, args.seed, config_hash);
      emit((fs::path(args.out) / "trace.json").string(),
           io::trace_json(result.trace));
      std::cerr << "double-stage fit done; r_hat = " << result.trace.r_hat
                << ", stage seconds ["
                << result.trace.stage_seconds[0] << ", "
                << result.trace.stage_seconds[1] << ", "
                << result.trace.stage_seconds[2] << ", "
                << result.trace.stage_seconds[3] << "]\n";
    } catch (const NoAdmissibleRank& e) {
      std::cerr << "fit: stage 3 (dimension reduction) failed: " << e.what()
                << "\n";
      return kAlgorithm;
    }
    return kOk;
  });
}

int cmd_eval(const EvalArgs& args) {
  return guard("eval", [&] {
    const auto inst = io::load_instance(args.instance);
    const auto pair = io::load_embeddings(args.embeddings);
    std::optional<std::pair<double, Index>> event;
    if (args.sigma_cut && args.r_cut) event = {{*args.sigma_cut, *args.r_cut}};
    const auto report =
        risk::risk_report(pair.F, pair.G, inst, args.k, args.r, 2.0, event);
    const std::string payload = io::risk_report_json(report);
    std::string why;
    if (!io::validate_risk_report_json(payload, &why))
      throw Error("risk report failed schema validation: " + why);
    emit(args.out, payload);
    return kOk;
  });
}

int cmd_diag(const DiagArgs& args) {
  return guard("diag", [&] {
    verify::SuiteResult suite;
    if (args.what == "svd-pert") {
      suite = verify::svd_perturbation_suite(args.trials, args.eta, 50,
                                             args.seed);
    } else if (args.what == "balance") {
      suite = verify::balancing_suite(args.trials, 20, args.seed);
    } else if (args.what == "partition") {
      if (!args.instance.empty()) {
        const auto inst = io::load_instance(args.instance);
        const Vector& sig = inst.spectrum;
        const double sigma = args.sigma.value_or(sig[args.s - 1]);
        const auto part =
            partition::well_tempered_partition(sig, args.s, sigma);
        json j;
        j["pivots"] = part.pivots;
        j["delta"] = part.delta;
        j["mu"] = part.mu;
        j["m_space"] = part.m_space;
        j["m_spec"] = part.m_spec;
        j["sigma_ref"] = part.sigma_ref;
        emit(args.out, j.dump(2));
        return kOk;
      }
      suite = verify::partition_suite(args.trials, args.seed);
    } else {
      throw InvalidInput("diag: unknown target " + args.what +
                         " (svd-pert | partition | balance)");
    }
    json j;
    j["suite"] = suite.suite;
    j["passed"] = suite.passed();
    j["total"] = suite.checks.size();
    json checks = json::array();
    for (const auto& c : suite.checks)
      checks.push_back({{"name", c.name}, {"ok", c.ok}, {"detail", c.detail}});
    j["checks"] = checks;
    emit(args.out, j.dump(2));
    return suite.ok() ? kOk : kAlgorithm;
  });
}

namespace {

struct SweepTrial {
  long index = 0;
  long r_cut = 0;
  long n1 = 0;  // 0 means exact-expectation
  int seed_index = 0;
};

std::vector<std::string> run_sweep_trial(const datagen::GroundTruthInstance& inst,
                                         const SweepArgs& args,
                                         const SweepTrial& trial) {
  const std::uint64_t trial_seed =
      hash_combine(args.seed, static_cast<std::uint64_t>(trial.index));
  erm::ErmConfig cfg;
  cfg.r_cut = trial.r_cut;
  cfg.p = args.p > 0 ? args.p
                     : std::min<Index>(2 * trial.r_cut + 2,
                                       std::min(inst.n1, inst.m1));
  if (trial.r_cut == 1) cfg.p = 1;  // sep-rank at r_cut=1 needs a flat tail
  if (args.sigma_cut) {
    cfg.sigma_cut = *args.sigma_cut;
  } else {
    const double hi = inst.spectrum[std::min<Index>(trial.r_cut, inst.d) - 1];
    const double lo =
        (trial.r_cut < inst.d) ? inst.spectrum[trial.r_cut] : 0.0;
    cfg.sigma_cut = 0.5 * (hi + lo);
  }
  cfg.mu = args.mu;
  cfg.exact_expectation = trial.n1 == 0;
  if (trial.n1 > 0) cfg.n1 = cfg.n2 = cfg.n3 = cfg.n4 = trial.n1;
  cfg.solver.seed = trial_seed;

  std::vector<std::string> row;
  row.push_back(std::to_string(trial.index));
  row.push_back(std::to_string(trial.r_cut));
  row.push_back(trial.n1 == 0 ? "exact" : std::to_string(trial.n1));
  row.push_back(std::to_string(trial.seed_index));
  try {
    const auto result = erm::erm_double_stage(inst, cfg);
    const double r_train =
        risk::risk(result.pair.F, result.pair.G, inst, datagen::Dist::Train);
    const double r_test =
        risk::risk(result.pair.F, result.pair.G, inst, datagen::Dist::Test);
    const double sigma_r = risk::sigma_r_embed(result.pair.F, result.pair.G,
                                               inst, result.trace.r_hat);
    const auto event = risk::spectral_event_check(
        result.trace.r_hat, cfg.sigma_cut, cfg.r_cut, inst.spectrum);
    row.push_back("ok");
    row.push_back(std::to_string(result.trace.r_hat));
    row.push_back(io::format_double(cfg.sigma_cut));
    row.push_back(io::format_double(r_train));
    row.push_back(io::format_double(r_test));
    row.push_back(io::format_double(sigma_r));
    row.push_back(event.holds ? "1" : "0");
  } catch (const Error& e) {
    row.push_back(std::string("error:") + e.what());
    for (int i = 0; i < 6; ++i) row.push_back("");
  }
  return row;
}

}  // namespace

int cmd_sweep(const SweepArgs& args) {
  return guard("sweep", [&] {
    const auto inst = io::load_instance(args.instance);
    std::vector<long> sizes = args.n1;
    if (args.exact || sizes.empty()) sizes.insert(sizes.begin(), 0);

    std::vector<SweepTrial> trials;
    long index = 0;
    for (long r_cut : args.r_cut)
      for (long n1 : sizes)
        for (int s = 0; s < args.seeds; ++s)
          trials.push_back({index++, r_cut, n1, s});
    if (trials.empty()) throw InvalidInput("sweep: empty grid");

    std::vector<std::vector<std::string>> rows(trials.size());
    const int workers =
        std::min<int>(thread_budget(args.threads), trials.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= trials.size()) return;
        rows[i] = run_sweep_trial(inst, args, trials[i]);
      }
    };
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    io::write_csv_table(args.out,
                        {"trial", "r_cut", "n", "seed", "status", "r_hat",
                         "sigma_cut", "R_train", "R_test", "sigma_r",
                         "event_ok"},
                        rows);
    std::cerr << "wrote " << rows.size() << " rows to " << args.out << "\n";
    return kOk;
  });
}

int cmd_verify(const VerifyArgs& args) {
  return guard("verify", [&] {
    bool ok = true;
    const auto print_suite = [&](const verify::SuiteResult& suite) {
      for (const auto& c : suite.checks) {
        std::cout << (c.ok ? "[PASS] " : "[FAIL] ") << suite.suite << ": "
                  << c.name;
        if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
        std::cout << "\n";
      }
      ok = ok && suite.ok();
    };

    if (args.suite == "acceptance" || args.suite == "all") {
      const auto results = verify::acceptance(args.seed);
      for (const auto& c : results) {
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << "criterion " << c.id
                  << ": " << c.name << " (" << c.detail << ")\n";
        ok = ok && c.pass;
      }
      return ok ? kOk : kAlgorithm;
    }
    if (args.suite == "svd-pert")
      print_suite(verify::svd_perturbation_suite(500, 0.5, 50, args.seed));
    else if (args.suite == "balance")
      print_suite(verify::balancing_suite(200, 20, args.seed));
    else if (args.suite == "partition")
      print_suite(verify::partition_suite(100, args.seed));
    else if (args.suite == "risk")
      print_suite(verify::risk_identity_suite(50, args.seed));
    else if (args.suite == "coverage")
      print_suite(verify::coverage_suite(100, args.seed));
    else if (args.suite == "decay")
      print_suite(verify::decay_suite());
    else
      throw InvalidInput("verify: unknown suite " + args.suite);
    return ok ? kOk : kAlgorithm;
  });
}

}  // namespace blockfill::cli
