#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace blockfill::cli;

  CLI::App app{"blockfill: block matrix completion with missing-not-at-random data"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* cmd_g = app.add_subcommand("gen", "generate an instance bundle");
  cmd_g->add_option("--decay", gen.decay, "spectral decay: poly | exp");
  cmd_g->add_option("--example", gen.example, "fixture id 1 | 2 | 3");
  cmd_g->add_option("--gamma", gen.gamma, "decay rate");
  cmd_g->add_option("--C", gen.c, "decay scale");
  cmd_g->add_option("--n", gen.n, "row support size (per block for fixtures)");
  cmd_g->add_option("--m", gen.m, "column support size");
  cmd_g->add_option("--n1", gen.n1, "row split");
  cmd_g->add_option("--m1", gen.m1, "column split");
  cmd_g->add_option("--d", gen.d, "embedding dimension");
  cmd_g->add_option("--seed", gen.seed, "rng seed");
  cmd_g->add_flag("--grid-test", gen.grid_test,
                  "test distribution uniform over the full grid");
  cmd_g->add_option("--out", gen.out, "output directory")->required();

  FitArgs fit;
  auto* cmd_f = app.add_subcommand("fit", "fit embeddings on an instance");
  cmd_f->add_option("--instance", fit.instance, "instance bundle")->required();
  cmd_f->add_option("--mode", fit.mode, "single | double");
  cmd_f->add_option("--r", fit.r, "single-stage rank");
  cmd_f->add_option("--p", fit.p, "overparametrized rank");
  cmd_f->add_option("--r-cut", fit.r_cut, "rank cutoff");
  cmd_f->add_option("--sigma-cut", fit.sigma_cut, "spectral cutoff");
  double lambda_in = -1, mu_in = -1;
  cmd_f->add_option("--lambda", lambda_in, "distillation weight (default r_cut^4)");
  cmd_f->add_option("--mu", mu_in, "covariance ridge (default B^2/n1)");
  cmd_f->add_option("--n1", fit.n1, "stage 1 sample count");
  cmd_f->add_option("--n2", fit.n2, "stage 2 sample count");
  cmd_f->add_option("--n3", fit.n3, "stage 3 sample count");
  cmd_f->add_option("--n4", fit.n4, "stage 4 sample count");
  cmd_f->add_flag("--exact", fit.exact, "exact-expectation mode");
  cmd_f->add_option("--restarts", fit.restarts, "solver restarts");
  cmd_f->add_option("--seed", fit.seed, "rng seed")->required();
  cmd_f->add_option("--out", fit.out, "output directory")->required();

  EvalArgs ev;
  auto* cmd_e = app.add_subcommand("eval", "risk report for stored embeddings");
  cmd_e->add_option("--instance", ev.instance, "instance bundle")->required();
  cmd_e->add_option("--embeddings", ev.embeddings, "embeddings directory")->required();
  cmd_e->add_option("--k", ev.k, "truncation rank for delta errors");
  cmd_e->add_option("--r", ev.r, "conditioning rank");
  double ev_sigma = -1;
  long ev_rcut = -1;
  cmd_e->add_option("--sigma-cut", ev_sigma, "spectral cutoff for the event check");
  cmd_e->add_option("--r-cut", ev_rcut, "rank cutoff for the event check");
  cmd_e->add_option("--out", ev.out, "output file (default stdout)");

  DiagArgs diag;
  auto* cmd_d = app.add_subcommand("diag", "numerical verifiers");
  cmd_d->add_option("what", diag.what, "svd-pert | partition | balance")->required();
  cmd_d->add_option("--trials", diag.trials, "trial count");
  cmd_d->add_option("--eta", diag.eta, "perturbation budget fraction");
  cmd_d->add_option("--instance", diag.instance, "instance for partition diagnostics");
  cmd_d->add_option("--s", diag.s, "partition target rank");
  double diag_sigma = -1;
  cmd_d->add_option("--sigma", diag_sigma, "partition threshold");
  cmd_d->add_option("--seed", diag.seed, "rng seed");
  cmd_d->add_option("--out", diag.out, "output file (default stdout)");

  SweepArgs sweep;
  auto* cmd_s = app.add_subcommand("sweep", "grid of double-stage runs to CSV");
  cmd_s->add_option("--instance", sweep.instance, "instance bundle")->required();
  cmd_s->add_option("--r-cut", sweep.r_cut, "rank cutoffs")->delimiter(',');
  cmd_s->add_option("--n1", sweep.n1, "sample sizes")->delimiter(',');
  cmd_s->add_flag("--exact", sweep.exact, "include exact-expectation trials");
  cmd_s->add_option("--seeds", sweep.seeds, "seeds per grid point");
  cmd_s->add_option("--seed", sweep.seed, "base seed")->required();
  cmd_s->add_option("--p", sweep.p, "overparametrized rank (0: derived)");
  double sweep_sigma = -1, sweep_mu = -1;
  cmd_s->add_option("--sigma-cut", sweep_sigma, "spectral cutoff (default from spectrum)");
  cmd_s->add_option("--mu", sweep_mu, "covariance ridge");
  cmd_s->add_option("--threads", sweep.threads, "worker threads (capped by BLOCKFILL_THREADS)");
  cmd_s->add_option("--out", sweep.out, "output CSV")->required();

  VerifyArgs ver;
  auto* cmd_v = app.add_subcommand("verify", "run property suites");
  cmd_v->add_option("--suite", ver.suite,
                    "all | acceptance | svd-pert | balance | partition | risk "
                    "| coverage | decay");
  cmd_v->add_option("--seed", ver.seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (cmd_g->parsed()) return cmd_gen(gen);
  if (cmd_f->parsed()) {
    if (lambda_in >= 0) fit.lambda = lambda_in;
    if (mu_in > 0) fit.mu = mu_in;
    return cmd_fit(fit);
  }
  if (cmd_e->parsed()) {
    if (ev_sigma > 0) ev.sigma_cut = ev_sigma;
    if (ev_rcut > 0) ev.r_cut = ev_rcut;
    return cmd_eval(ev);
  }
  if (cmd_d->parsed()) {
    if (diag_sigma > 0) diag.sigma = diag_sigma;
    return cmd_diag(diag);
  }
  if (cmd_s->parsed()) {
    if (sweep_sigma > 0) sweep.sigma_cut = sweep_sigma;
    if (sweep_mu > 0) sweep.mu = sweep_mu;
    return cmd_sweep(sweep);
  }
  if (cmd_v->parsed()) return cmd_verify(ver);
  return kUsage;
}
