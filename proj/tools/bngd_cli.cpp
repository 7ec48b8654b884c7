// Command-line driver for the batch-normalized gradient descent laboratory.
// Subcommands: run | sweep | dim-scan | omega | scaling-check | verify.
// Every output directory gets the fully resolved config echoed back plus a
// manifest with content checksums, so runs are reproducible from their own
// artifacts.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bngd/analysis.hpp"
#include "bngd/dynamics.hpp"
#include "bngd/io.hpp"
#include "bngd/model.hpp"
#include "bngd/verification.hpp"

namespace {

using bngd::json;
using bngd::Vec;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out = "out";
  long thin = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "JSON config file");
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--workers", a.workers, "worker thread count")->check(CLI::PositiveNumber);
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--thin", a.thin, "record every M-th trajectory step")
      ->check(CLI::NonNegativeNumber);
}

json load_config(const CommonArgs& a) {
  if (a.config_path.empty()) return json::object();
  return json::parse(bngd::read_file(a.config_path));
}

std::uint64_t require_seed(const CommonArgs& a, const json& cfg) {
  if (a.seed) return *a.seed;
  if (cfg.contains("seed")) return cfg["seed"].get<std::uint64_t>();
  throw std::domain_error("--seed is required (this experiment kind samples)");
}

bngd::UMode parse_u_mode(const std::string& s) {
  if (s == "random_sphere") return bngd::UMode::random_sphere;
  if (s == "hu_normalized") return bngd::UMode::hu_normalized;
  if (s == "given") return bngd::UMode::given;
  throw std::domain_error("unknown u_mode '" + s + "'");
}

// Fills every defaulted field so the echoed config is fully explicit.
struct ResolvedInstance {
  bngd::SpectrumSpec spectrum;
  bngd::UMode u_mode = bngd::UMode::random_sphere;
  bngd::InstanceOptions opt;
  std::string u_mode_name;
  json echo;
};

ResolvedInstance resolve_instance(const json& cfg, std::uint64_t seed) {
  ResolvedInstance r;
  const json inst = cfg.value("instance", json::object());
  if (inst.contains("spectrum"))
    r.spectrum = bngd::parse_spectrum(inst["spectrum"]);
  else
    r.spectrum = bngd::SpectrumSpec::logspace(0.0, 5.0, 100);
  r.u_mode_name = inst.value("u_mode", std::string("hu_normalized"));
  r.u_mode = parse_u_mode(r.u_mode_name);
  r.opt.conjugate_random_q = inst.value("conjugate_random_q", false);
  if (inst.contains("u")) {
    r.opt.given_u = inst["u"].get<Vec>();
    r.u_mode = bngd::UMode::given;
    r.u_mode_name = "given";
  }
  r.echo = {{"spectrum", bngd::spectrum_to_json(r.spectrum)},
            {"u_mode", r.u_mode_name},
            {"conjugate_random_q", r.opt.conjugate_random_q},
            {"seed", seed}};
  if (!r.opt.given_u.empty()) r.echo["u"] = r.opt.given_u;
  return r;
}

Vec resolve_w0(const json& run_cfg, const bngd::ProblemInstance& p, std::uint64_t seed) {
  if (run_cfg.contains("w0")) return run_cfg["w0"].get<Vec>();
  const std::string mode = run_cfg.value("w0_mode", std::string("hu_normalized"));
  if (mode == "hu_normalized") return bngd::normalized(p.g);
  if (mode == "random_sphere") {
    bngd::CounterRng rng = bngd::CounterRng::substream(seed, 0x3057);
    return rng.unit_sphere(p.dim());
  }
  if (mode == "ones") return Vec(p.dim(), 1.0);
  throw std::domain_error("unknown w0_mode '" + mode + "'");
}

int cmd_run(const CommonArgs& args) {
  const json cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, cfg);
  ResolvedInstance inst = resolve_instance(cfg, seed);
  bngd::ProblemInstance p = bngd::make_instance(inst.spectrum, inst.u_mode, seed, inst.opt);

  const json rc = cfg.value("run", json::object());
  bngd::RunConfig run;
  run.eps = rc.value("eps", p.spectrum.eps_opt);
  run.eps_a = rc.value("eps_a", 1.0);
  run.a0 = rc.value("a0", 0.0);
  run.max_iters = rc.value("max_iters", 2000L);
  run.grad_tol = rc.value("grad_tol", 0.0);
  run.div_tol = rc.value("div_tol", 1e300);
  run.verify = rc.value("verify", false);
  run.thin = args.thin;
  run.w0 = resolve_w0(rc, p, seed);
  const std::string mode_name = rc.value("mode", std::string("bngd"));
  const bngd::Mode mode = mode_name == "gd" ? bngd::Mode::gd : bngd::Mode::bngd;

  bngd::Trajectory t = bngd::run(p, run, mode);

  bngd::OutputDir out(args.out);
  out.add("trajectory.csv", bngd::trajectory_csv(t));
  out.add_json("summary.json", bngd::trajectory_summary_json(t));
  json resolved = {{"kind", "run"},
                   {"instance", inst.echo},
                   {"run",
                    {{"mode", mode_name},
                     {"eps", run.eps},
                     {"eps_a", run.eps_a},
                     {"a0", run.a0},
                     {"w0", run.w0},
                     {"max_iters", run.max_iters},
                     {"grad_tol", run.grad_tol},
                     {"div_tol", run.div_tol},
                     {"verify", run.verify}}},
                   {"seed", seed},
                   {"workers", args.workers},
                   {"thin", args.thin}};
  out.finish(resolved);

  std::cout << bngd::to_string(t.outcome) << " after " << t.iterations << " iterations, loss "
            << bngd::fmt17(t.steps.back().loss) << "\n";
  switch (t.outcome) {
    case bngd::Outcome::converged_minimizer: return 0;
    case bngd::Outcome::converged_saddle: return 2;
    case bngd::Outcome::max_iters_reached: return 3;
    case bngd::Outcome::diverged: return 4;
  }
  return 3;
}

int cmd_sweep(const CommonArgs& args) {
  const json cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, cfg);
  ResolvedInstance inst = resolve_instance(cfg, seed);
  bngd::ProblemInstance p = bngd::make_instance(inst.spectrum, inst.u_mode, seed, inst.opt);

  const json sc = cfg.value("sweep", json::object());
  const Vec eps_a_grid = sc.contains("eps_a_grid")
                             ? bngd::parse_grid(sc["eps_a_grid"])
                             : bngd::parse_grid(json{{"kind", "logspace"},
                                                     {"lo", -10.0},
                                                     {"hi", 0.0},
                                                     {"count", 41},
                                                     {"scale", 1.99}});
  const Vec eps_grid =
      sc.contains("eps_grid")
          ? bngd::parse_grid(sc["eps_grid"])
          : bngd::parse_grid(json{{"kind", "logspace"}, {"lo", -5.0}, {"hi", 16.0}, {"count", 43}});
  const long k = sc.value("k", 2000L);
  const double a0 = sc.value("a0", 0.0);
  const Vec w0 = resolve_w0(sc, p, seed);

  bngd::SweepGrid grid = bngd::sweep(p, eps_a_grid, eps_grid, w0, a0, k, args.workers);

  bngd::OutputDir out(args.out);
  out.add("sweep.csv", bngd::sweep_csv(grid));
  json header = {{"eps_opt", grid.eps_opt},
                 {"final_loss_gd_opt", grid.final_loss_gd_opt},
                 {"k", k},
                 {"kappa", p.spectrum.kappa}};
  out.add_json("sweep_header.json", header);
  json resolved = {{"kind", "sweep"},
                   {"instance", inst.echo},
                   {"sweep",
                    {{"eps_a_grid", eps_a_grid},
                     {"eps_grid", eps_grid},
                     {"k", k},
                     {"a0", a0},
                     {"w0", w0}}},
                   {"seed", seed},
                   {"workers", args.workers},
                   {"thin", args.thin}};
  out.finish(resolved);
  std::cout << "sweep: " << eps_a_grid.size() * eps_grid.size() << " cells written\n";
  return 0;
}

int cmd_dim_scan(const CommonArgs& args) {
  const json cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, cfg);
  const json dc = cfg.value("dim_scan", json::object());

  std::vector<std::size_t> dims =
      dc.value("dims", std::vector<std::size_t>{25, 50, 100, 200, 400});
  bngd::DimScanParams params;
  params.lambda_lo = dc.value("lambda_lo", 1.0);
  params.lambda_hi = dc.value("lambda_hi", 10000.0);
  params.runs = dc.value("runs", 50L);
  params.steps = dc.value("steps", 5000L);
  params.beta_samples = dc.value("beta_samples", 500L);
  params.eps_grid =
      dc.contains("eps_grid")
          ? bngd::parse_grid(dc["eps_grid"])
          : bngd::parse_grid(json{{"kind", "logspace"}, {"lo", -6.0}, {"hi", 8.0}, {"count", 29}});

  std::vector<bngd::DimScanPoint> points;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    points.push_back(bngd::dim_scan_point(dims[i], params, seed + 7919 * i, args.workers));
    std::cout << "d=" << dims[i] << " measured (band) "
              << bngd::fmt17(points.back().measured.width) << " measured (tail) "
              << bngd::fmt17(points.back().measured_tail) << " predicted "
              << bngd::fmt17(points.back().predicted.omega) << "\n";
  }

  bngd::OutputDir out(args.out);
  out.add("dim_scan.csv", bngd::dim_scan_csv(points));
  json resolved = {{"kind", "dim_scan"},
                   {"dim_scan",
                    {{"dims", dims},
                     {"lambda_lo", params.lambda_lo},
                     {"lambda_hi", params.lambda_hi},
                     {"runs", params.runs},
                     {"steps", params.steps},
                     {"beta_samples", params.beta_samples},
                     {"eps_grid", params.eps_grid}}},
                   {"seed", seed},
                   {"workers", args.workers}};
  out.finish(resolved);
  return 0;
}

int cmd_omega(const CommonArgs& args) {
  const json cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, cfg);
  ResolvedInstance inst = resolve_instance(cfg, seed);
  bngd::ProblemInstance p = bngd::make_instance(inst.spectrum, inst.u_mode, seed, inst.opt);

  const json oc = cfg.value("omega", json::object());
  const long n_samples = oc.value("n_samples", 500L);
  const bool include_samples = oc.value("include_samples", false);

  bngd::OmegaEstimate est = bngd::beta_bar_mc(p, n_samples, seed);

  json j = {{"beta_bar", est.beta_bar},
            {"omega", est.omega},
            {"lower_bound_generic", est.lower_bound_generic},
            {"discarded_zero_samples", est.discarded_zero_samples},
            {"n_samples", n_samples}};
  if (est.lower_bound_arithmetic) j["lower_bound_arithmetic"] = *est.lower_bound_arithmetic;
  if (include_samples) j["beta0_samples"] = est.beta0_samples;

  bngd::OutputDir out(args.out);
  out.add_json("omega.json", j);
  json resolved = {{"kind", "omega"},
                   {"instance", inst.echo},
                   {"omega", {{"n_samples", n_samples}, {"include_samples", include_samples}}},
                   {"seed", seed},
                   {"workers", args.workers}};
  out.finish(resolved);
  std::cout << "omega " << bngd::fmt17(est.omega) << " (bound " << bngd::fmt17(est.lower_bound_generic)
            << ")\n";
  return 0;
}

int cmd_scaling_check(const CommonArgs& args) {
  const json cfg = load_config(args);
  const std::uint64_t seed = require_seed(args, cfg);
  const json sc = cfg.value("scaling_check", json::object());
  const long cases = sc.value("cases", 100L);
  const long steps = sc.value("steps", 50L);
  const double tol = sc.value("tol", 1e-8);

  bngd::VerifyOptions vo;
  vo.seed = seed;
  vo.workers = args.workers;
  bngd::CheckResult r = bngd::check_scaling_equivalence(vo, cases);

  bngd::OutputDir out(args.out);
  json j = {{"cases_per_variant", cases},
            {"steps", steps},
            {"max_deviation_margin", r.worst_residual},
            {"violations", r.violations},
            {"tolerance", tol},
            {"passed", r.passed}};
  out.add_json("scaling.json", j);
  json resolved = {{"kind", "scaling_check"},
                   {"scaling_check", {{"cases", cases}, {"steps", steps}, {"tol", tol}}},
                   {"seed", seed},
                   {"workers", args.workers}};
  out.finish(resolved);
  std::cout << (r.passed ? "scaling equivalence holds" : "scaling equivalence VIOLATED")
            << " across " << 2 * cases << " cases\n";
  return r.passed ? 0 : 1;
}

int cmd_verify(const CommonArgs& args, const std::vector<std::string>& checks,
               bool fault_flip_a) {
  const json cfg = load_config(args);
  bngd::VerifyOptions vo;
  vo.seed = args.seed.value_or(cfg.value("seed", 1ULL));
  vo.workers = args.workers;
  vo.filter = checks;
  if (vo.filter.empty() && cfg.contains("verify") && cfg["verify"].contains("checks"))
    vo.filter = cfg["verify"]["checks"].get<std::vector<std::string>>();
  vo.fault_flip_a_update = fault_flip_a;

  const auto results = bngd::run_verification(vo);
  bool all_pass = true;
  json jr = json::array();
  for (const auto& r : results) {
    all_pass = all_pass && r.passed;
    std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.evaluations
              << " evaluations, " << r.violations << " violations, worst margin "
              << bngd::fmt17(r.worst_residual) << ")\n";
    if (!r.detail.empty()) std::cout << "      " << r.detail << "\n";
    jr.push_back({{"name", r.name},
                  {"passed", r.passed},
                  {"evaluations", r.evaluations},
                  {"violations", r.violations},
                  {"worst_residual", r.worst_residual},
                  {"detail", r.detail}});
  }

  bngd::OutputDir out(args.out);
  out.add_json("verify.json",
               json{{"all_pass", all_pass}, {"checks", jr}, {"fault_injection", fault_flip_a}});
  json resolved = {{"kind", "verify"},
                   {"verify", {{"checks", vo.filter}, {"fault_flip_a_update", fault_flip_a}}},
                   {"seed", vo.seed},
                   {"workers", args.workers}};
  out.finish(resolved);
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"batch-normalized gradient descent laboratory"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, dim_args, omega_args, scaling_args, verify_args;
  std::vector<std::string> verify_checks;
  bool fault_flip_a = false;

  add_common(app.add_subcommand("run", "single trajectory"), run_args);
  add_common(app.add_subcommand("sweep", "learning-rate grid with four-color classification"),
             sweep_args);
  add_common(app.add_subcommand("dim-scan", "insensitivity interval versus dimension"),
             dim_args);
  add_common(app.add_subcommand("omega", "Monte-Carlo insensitivity estimate"), omega_args);
  add_common(app.add_subcommand("scaling-check", "trajectory equivalence under rescaling"),
             scaling_args);
  CLI::App* verify = app.add_subcommand("verify", "run the full property-check suite");
  add_common(verify, verify_args);
  verify->add_option("--check", verify_checks, "run only the named checks");
  verify
      ->add_flag("--fault-flip-a-update", fault_flip_a,
                 "test hook: negate the a-update to confirm the bound checks can fail")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
    if (app.got_subcommand("run")) return cmd_run(run_args);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep_args);
    if (app.got_subcommand("dim-scan")) return cmd_dim_scan(dim_args);
    if (app.got_subcommand("omega")) return cmd_omega(omega_args);
    if (app.got_subcommand("scaling-check")) return cmd_scaling_check(scaling_args);
    if (app.got_subcommand("verify")) return cmd_verify(verify_args, verify_checks, fault_flip_a);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 70;
  }
  return 64;
}
