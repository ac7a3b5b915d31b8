#include "ppsim/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppsim/config.hpp"
#include "ppsim/consensus.hpp"
#include "ppsim/errors.hpp"
#include "ppsim/landscape.hpp"
#include "ppsim/measures.hpp"
#include "ppsim/objectives.hpp"
#include "ppsim/param_space.hpp"
#include "ppsim/snapshot.hpp"
#include "ppsim/theory.hpp"
#include "ppsim/trainer.hpp"

#ifndef PPSIM_CODE_VERSION
#define PPSIM_CODE_VERSION "unknown"
#endif

namespace ppsim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot open for writing: " + path.string());
  os << text;
  if (!os.flush()) throw ConfigError("failed writing: " + path.string());
}

struct RunArtifacts {
  ExperimentConfig cfg;
  std::unique_ptr<Objective> obj;
  std::vector<ParamVector> workers;
  ParamVector mean;
  std::optional<LayerLayout> layout;
  fs::path dir;
};

// Loads everything the analysis subcommands need from a finished run
// directory: the resolved config (to rebuild the objective), the final
// worker snapshots, their mean, and the layer layout when present.
RunArtifacts load_run_dir(const std::string& run_dir) {
  RunArtifacts art;
  art.dir = run_dir;
  const fs::path cfg_path = art.dir / "resolved_config.json";
  art.cfg = load_experiment_config(cfg_path);
  art.obj = build_objective(art.cfg.objective);

  const fs::path snapdir = art.dir / "snapshots";
  if (!fs::is_directory(snapdir)) {
    throw ConfigError("run directory has no snapshots/: " + art.dir.string());
  }
  std::vector<fs::path> worker_files;
  for (const auto& entry : fs::directory_iterator(snapdir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("worker_", 0) == 0 && entry.path().extension() == ".ppsv") {
      worker_files.push_back(entry.path());
    }
  }
  std::sort(worker_files.begin(), worker_files.end());
  if (worker_files.empty()) {
    throw ConfigError("no worker snapshots under " + snapdir.string());
  }
  for (const auto& f : worker_files) {
    art.workers.push_back(read_snapshot(f));
    if (art.workers.back().size() != art.workers.front().size()) {
      throw ConfigError("snapshots disagree in dimension under " + snapdir.string());
    }
  }
  if (art.workers.front().size() != art.obj->dim()) {
    throw ConfigError("snapshot dimension does not match the configured objective");
  }
  const fs::path mean_path = snapdir / "mean.ppsv";
  art.mean = fs::exists(mean_path) ? read_snapshot(mean_path) : mean_vectors(art.workers);
  if (art.mean.size() != art.obj->dim()) {
    throw ConfigError("mean snapshot dimension does not match the configured objective");
  }
  const fs::path layout_path = snapdir / "layout.json";
  if (fs::exists(layout_path)) {
    art.layout = read_layout_json(layout_path);
    art.layout->validate(art.obj->dim());
  }
  return art;
}

std::vector<double> read_scalar_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open list file: " + path);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  if (!is.eof()) throw ConfigError("non-numeric content in list file: " + path);
  if (out.empty()) throw ConfigError("list file is empty: " + path);
  return out;
}

// ---------------------------------------------------------------- train ---

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::optional<int>& cli_threads) {
  ExperimentConfig cfg = load_experiment_config(config_path, overrides);
  std::unique_ptr<Objective> obj = build_objective(cfg.objective);
  const int threads = resolve_threads(cli_threads, cfg);

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir / "snapshots");

  json echo = json::parse(resolved_config_json(cfg));
  echo["code_version"] = PPSIM_CODE_VERSION;
  write_text_file(dir / "resolved_config.json", echo.dump(2) + "\n");

  const RunResult result = run(*obj, cfg.workers, cfg.pull_push, cfg.local_opt, cfg.noise,
                               cfg.total_iters, cfg.seed, threads, cfg.trainer_flags);

  {
    std::ofstream os(dir / "metrics.csv", std::ios::trunc);
    if (!os) throw ConfigError("cannot open metrics.csv for writing");
    write_metrics_csv(os, result);
  }

  json summary;
  summary["final_losses"] = result.terminal_losses;
  summary["terminal_consensus_distance"] = result.terminal_consensus_distance;
  if (result.terminal_train_error) {
    summary["terminal_train_error"] = *result.terminal_train_error;
  }
  if (result.terminal_test_error) {
    summary["terminal_test_error"] = *result.terminal_test_error;
  }
  summary["communication_volume"] = result.communication_volume;
  summary["rounds"] = result.rounds;
  summary["completed_iters"] = result.completed_iters;
  summary["terminal_tau"] =
      result.metrics.empty() ? result.pull_push.tau : result.metrics.back().tau_t;
  summary["terminal_lambda"] =
      result.metrics.empty() ? 0.0 : result.metrics.back().lambda_t;
  summary["wall_time_s"] = result.wall_time_s;
  summary["aborted"] = result.aborted;
  if (result.aborted) summary["abort_reason"] = result.abort_reason;
  summary["seed"] = result.seed;
  summary["threads"] = threads;
  summary["code_version"] = PPSIM_CODE_VERSION;
  summary["config"] = echo;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");

  for (std::size_t m = 0; m < result.final_params.size(); ++m) {
    char name[32];
    std::snprintf(name, sizeof(name), "worker_%04zu.ppsv", m);
    write_snapshot(dir / "snapshots" / name, result.final_params[m]);
  }
  write_snapshot(dir / "snapshots" / "mean.ppsv", result.final_mean);
  if (const auto* mlp = dynamic_cast<const MlpObjective*>(obj.get())) {
    write_layout_json(dir / "snapshots" / "layout.json", mlp->layout());
  }

  if (result.aborted) {
    std::cerr << "run aborted: " << result.abort_reason << "\n";
    std::cout << "wrote partial outputs to " << dir.string() << "\n";
    return 3;
  }
  std::cout << "run complete: rounds=" << result.rounds
            << " terminal_consensus_distance=" << result.terminal_consensus_distance
            << " output=" << dir.string() << "\n";
  return 0;
}

// -------------------------------------------------------------- measure ---

struct MeasureParams {
  double kappa = 2.0;
  double mv_step = 0.1;
  long long max_steps = 1000000;
  bool no_normalize = false;
  double eps = 1e-3;
  bool keskar_box = false;
  double sigma = 0.01;
  int n_mc = 100;
  int probes = 32;
  std::string probe_kind = "rademacher";
  int power_iters = 200;
  double tol = 1e-9;
  std::optional<std::uint64_t> seed;
  std::string rank_a;
  std::string rank_b;
};

int cmd_measure(const std::string& run_dir, std::vector<std::string> names,
                const MeasureParams& mp) {
  if (names.empty()) {
    throw ConfigError("no measures requested; pass --measure");
  }
  const bool only_kendall =
      names.size() == 1 && names.front() == "kendall" && run_dir.empty();
  std::optional<RunArtifacts> art;
  if (!only_kendall) {
    if (run_dir.empty()) throw ConfigError("this measure set needs a run directory");
    art = load_run_dir(run_dir);
  }
  const std::uint64_t seed = mp.seed ? *mp.seed : (art ? art->cfg.seed : 0);
  RngStream rng(seed, kMeasureStream);

  json records = json::array();
  for (const std::string& name : names) {
    json rec;
    rec["name"] = name;
    if (name == "inv-mv") {
      const LayerLayout* layout =
          (!mp.no_normalize && art->layout) ? &*art->layout : nullptr;
      const MeasureResult r = inverse_mean_valley(art->workers, *art->obj, mp.kappa,
                                                  mp.mv_step, mp.max_steps, layout);
      rec["value"] = r.value;
      rec["params"] = r.params;
      rec["per_direction_betas"] = r.betas;
    } else if (name == "eps-sharpness") {
      rec["value"] = epsilon_sharpness(art->mean, *art->obj, mp.eps, mp.keskar_box);
      rec["params"] = {{"eps", mp.eps}, {"per_coordinate_box", mp.keskar_box}};
    } else if (name == "lpf") {
      rec["value"] = lpf_measure(art->mean, *art->obj, mp.sigma, mp.n_mc, rng);
      rec["params"] = {{"sigma", mp.sigma}, {"n_mc", mp.n_mc}, {"seed", seed}};
    } else if (name == "fisher-rao") {
      rec["value"] = fisher_rao(art->mean, *art->obj);
      rec["params"] = json::object();
    } else if (name == "hessian-trace") {
      TraceProbe probe;
      if (mp.probe_kind == "rademacher") {
        probe = TraceProbe::Rademacher;
      } else if (mp.probe_kind == "basis") {
        probe = TraceProbe::Basis;
      } else {
        throw ConfigError("unknown probe kind '" + mp.probe_kind + "'");
      }
      rec["value"] = hessian_trace(art->mean, *art->obj, mp.probes, rng, probe);
      rec["params"] = {{"n_probes", mp.probes}, {"probe", mp.probe_kind}, {"seed", seed}};
    } else if (name == "lambda-max") {
      const LambdaMaxResult r =
          hessian_lambda_max(art->mean, *art->obj, mp.power_iters, mp.tol, rng);
      rec["value"] = r.value;
      rec["converged"] = r.converged;
      rec["params"] = {{"iters", mp.power_iters},
                       {"tol", mp.tol},
                       {"iters_used", r.iters},
                       {"seed", seed}};
    } else if (name == "kendall") {
      if (mp.rank_a.empty() || mp.rank_b.empty()) {
        throw ConfigError("kendall needs --rank-a and --rank-b list files");
      }
      const auto a = read_scalar_list(mp.rank_a);
      const auto b = read_scalar_list(mp.rank_b);
      rec["value"] = kendall_tau(a, b);
      rec["params"] = {{"n", a.size()}};
    } else {
      throw ConfigError("unknown measure '" + name + "'");
    }
    std::cout << rec.dump() << "\n";
    records.push_back(std::move(rec));
  }
  if (art) {
    write_text_file(art->dir / "measures.json", records.dump(2) + "\n");
  }
  return 0;
}

// ------------------------------------------------------------ landscape ---

int cmd_landscape(const std::string& run_dir, double limit, double step,
                  const std::optional<int>& cli_threads,
                  const std::vector<int>& interpolate, int points) {
  RunArtifacts art = load_run_dir(run_dir);
  if (!interpolate.empty()) {
    if (interpolate.size() != 2) {
      throw ConfigError("--interpolate takes exactly two worker indices");
    }
    const int M = static_cast<int>(art.workers.size());
    for (int idx : interpolate) {
      if (idx < 0 || idx >= M) {
        throw ConfigError("interpolation worker index out of range");
      }
    }
    const auto curve =
        interpolation_scan(art.workers[static_cast<std::size_t>(interpolate[0])],
                           art.workers[static_cast<std::size_t>(interpolate[1])],
                           *art.obj, points);
    std::ofstream os(art.dir / "interpolation.csv", std::ios::trunc);
    if (!os) throw ConfigError("cannot open interpolation.csv for writing");
    write_interpolation_csv(os, curve);
    std::cout << "wrote " << (art.dir / "interpolation.csv").string() << " (" << points
              << " points)\n";
    return 0;
  }

  const int threads = resolve_threads(cli_threads, art.cfg);
  const SvdBasis basis = svd_basis(art.workers);
  const LandscapeGrid grid =
      scan_grid(*art.obj, basis.x_A, basis.dx, basis.dy, limit, step, threads);
  {
    std::ofstream os(art.dir / "landscape_grid.csv", std::ios::trunc);
    if (!os) throw ConfigError("cannot open landscape_grid.csv for writing");
    write_grid_csv(os, grid);
  }
  const auto proj = project_workers(art.workers, basis.x_A, basis.dx, basis.dy);
  {
    std::ofstream os(art.dir / "worker_projections.csv", std::ios::trunc);
    if (!os) throw ConfigError("cannot open worker_projections.csv for writing");
    write_projections_csv(os, proj);
  }
  const long long side = 2 * grid.half + 1;
  std::cout << "wrote " << (art.dir / "landscape_grid.csv").string() << " (" << side << "x"
            << side << " nodes) and worker_projections.csv\n";
  return 0;
}

// --------------------------------------------------------------- theory ---

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Desk-scale simulator and analysis toolkit for pull-push consensus "
               "training"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Run a training experiment from a config");
  std::string train_config;
  std::vector<std::string> train_overrides;
  int train_threads_val = 0;
  train->add_option("config", train_config, "JSON experiment config")->required();
  train->add_option("--set", train_overrides,
                    "Dotted-path config override, e.g. pullpush.lambda=0.25");
  auto* train_threads =
      train->add_option("--threads", train_threads_val, "Worker thread count");

  // measure
  auto* measure = app.add_subcommand("measure", "Compute measures over a finished run");
  std::string measure_dir;
  std::vector<std::string> measure_names;
  MeasureParams mp;
  std::uint64_t measure_seed_val = 0;
  measure->add_option("run_dir", measure_dir,
                      "Run directory (optional for the rank-correlation mode)");
  measure->add_option("--measure", measure_names,
                      "inv-mv, eps-sharpness, lpf, fisher-rao, hessian-trace, "
                      "lambda-max, kendall")
      ->delimiter(',');
  measure->add_option("--kappa", mp.kappa, "Valley boundary threshold factor");
  measure->add_option("--mv-step", mp.mv_step, "Valley line-search step");
  measure->add_option("--max-steps", mp.max_steps, "Valley line-search step budget");
  measure->add_flag("--no-normalize", mp.no_normalize,
                    "Skip per-layer normalization even when a layout exists");
  measure->add_option("--eps", mp.eps, "Perturbation radius");
  measure->add_flag("--keskar-box", mp.keskar_box,
                    "Scale the perturbation per coordinate by (|x_i|+1)");
  measure->add_option("--sigma", mp.sigma, "Smoothing standard deviation");
  measure->add_option("--n-mc", mp.n_mc, "Monte Carlo sample count");
  measure->add_option("--probes", mp.probes, "Trace probe count");
  measure->add_option("--probe-kind", mp.probe_kind, "rademacher or basis");
  measure->add_option("--power-iters", mp.power_iters, "Power iteration budget");
  measure->add_option("--tol", mp.tol, "Rayleigh quotient stopping tolerance");
  auto* measure_seed =
      measure->add_option("--measure-seed", measure_seed_val, "Measurement stream seed");
  measure->add_option("--rank-a", mp.rank_a, "Scalar list file (rank correlation)");
  measure->add_option("--rank-b", mp.rank_b, "Scalar list file (rank correlation)");

  // landscape
  auto* landscape = app.add_subcommand("landscape", "Plane scans over a finished run");
  std::string landscape_dir;
  double landscape_limit = 1.0;
  double landscape_step = 0.1;
  int landscape_threads_val = 0;
  std::vector<int> landscape_interp;
  int landscape_points = 101;
  landscape->add_option("run_dir", landscape_dir, "Run directory")->required();
  landscape->add_option("--limit", landscape_limit, "Grid half-width L");
  landscape->add_option("--step", landscape_step, "Grid step s");
  auto* landscape_threads =
      landscape->add_option("--threads", landscape_threads_val, "Evaluation threads");
  landscape->add_option("--interpolate", landscape_interp,
                        "Two worker indices: emit the segment scan instead of the grid")
      ->delimiter(',');
  landscape->add_option("--points", landscape_points, "Interpolation point count");

  // theory
  auto* theory = app.add_subcommand("theory", "Numerical checks of the analysis results");
  theory->require_subcommand(1);

  auto* t_gap = theory->add_subcommand("gap-recurrence", "Consensus gap recurrence");
  GapRecurrenceConfig gap_cfg;
  bool gap_stochastic = false;
  t_gap->add_option("--alpha", gap_cfg.alpha, "Pull strength")->required();
  t_gap->add_option("--lambda", gap_cfg.lambda, "Push coefficient")->required();
  t_gap->add_option("--eta", gap_cfg.eta, "Learning rate (stochastic mode)");
  t_gap->add_option("--sigma0", gap_cfg.sigma0, "Gradient noise scale (stochastic mode)");
  t_gap->add_option("--tau", gap_cfg.tau, "Communication period (stochastic mode)");
  t_gap->add_option("--workers", gap_cfg.M, "Ensemble size (stochastic mode)");
  t_gap->add_option("--k", gap_cfg.rounds, "Round count")->required();
  t_gap->add_flag("--stochastic", gap_stochastic, "Include the noise envelope");

  auto* t_width = theory->add_subcommand("valley-width", "Limiting gap lambda/alpha");
  double width_alpha = 0.1, width_lambda = 0.5;
  t_width->add_option("--alpha", width_alpha)->required();
  t_width->add_option("--lambda", width_lambda)->required();

  auto* t_pac = theory->add_subcommand("pac-bayes", "Generalization gap expression");
  PacBayesParams pac;
  double pac_r = 1.0;
  double pac_rmin = 0.0, pac_rmax = 0.0, pac_gamma = 0.0;
  auto* pac_r_opt = t_pac->add_option("--r", pac_r, "Single radius");
  auto* pac_rmin_opt = t_pac->add_option("--r-min", pac_rmin, "Grid start");
  t_pac->add_option("--r-max", pac_rmax, "Grid end");
  t_pac->add_option("--gamma", pac_gamma, "Grid growth factor");
  t_pac->add_option("--d", pac.d, "Parameter dimension");
  t_pac->add_option("--c", pac.c, "Posterior variance ratio");
  t_pac->add_option("--d0", pac.D0, "Initial squared distance scale");
  t_pac->add_option("--beta", pac.beta, "Radius exponent");
  t_pac->add_option("--sigma0", pac.sigma0, "Prior scale");
  t_pac->add_option("--n", pac.n, "Sample count");
  t_pac->add_option("--delta", pac.delta, "Confidence level");
  t_pac->add_option("--j", pac.J, "Grid size for the union bound");

  auto* t_grid = theory->add_subcommand("grid", "Geometric radius grid");
  double grid_rmin = 1.0, grid_rmax = 8.0, grid_gamma = 1.0;
  t_grid->add_option("--r-min", grid_rmin)->required();
  t_grid->add_option("--r-max", grid_rmax)->required();
  t_grid->add_option("--gamma", grid_gamma)->required();

  auto* t_circle = theory->add_subcommand("circle-spread", "Point spread on a circle");
  std::vector<double> circle_angles;
  double circle_radius = 1.0;
  t_circle->add_option("--angles", circle_angles, "Angles in radians")
      ->required()
      ->delimiter(',');
  t_circle->add_option("--radius", circle_radius, "Circle radius");

  auto* t_bound = theory->add_subcommand("nonconvex-bound", "Single-worker rate bound");
  double b_f0 = 1.0, b_eta = 0.01, b_L = 1.0, b_alpha = 0.1, b_lambda = 0.05, b_delta = 1.0,
         b_sigma = 0.1;
  long long b_T = 10000;
  t_bound->add_option("--f0-gap", b_f0, "f(x0) - f*")->required();
  t_bound->add_option("--eta", b_eta)->required();
  t_bound->add_option("--iters", b_T)->required();
  t_bound->add_option("--smoothness", b_L, "Gradient Lipschitz constant");
  t_bound->add_option("--alpha", b_alpha);
  t_bound->add_option("--lambda", b_lambda);
  t_bound->add_option("--delta", b_delta, "Consensus distance scale");
  t_bound->add_option("--sigma", b_sigma, "Gradient noise scale");

  auto* t_unit = theory->add_subcommand("mean-unit-vector",
                                        "Monte Carlo check of the mean-direction bound");
  int unit_M = 8, unit_trials = 10000;
  std::size_t unit_dim = 16;
  std::uint64_t unit_seed = 1;
  t_unit->add_option("--workers", unit_M);
  t_unit->add_option("--dim", unit_dim);
  t_unit->add_option("--trials", unit_trials);
  t_unit->add_option("--seed", unit_seed);

  auto* t_check = theory->add_subcommand("valley-width-check",
                                         "Terminal gap vs the predicted band for a run");
  std::string check_run;
  double check_alpha = 0, check_lambda = 0, check_eta = 0, check_sigma0 = 0;
  int check_M = 0;
  t_check->add_option("--run", check_run, "Run directory")->required();
  auto* check_alpha_opt = t_check->add_option("--alpha", check_alpha);
  auto* check_lambda_opt = t_check->add_option("--lambda", check_lambda);
  auto* check_eta_opt = t_check->add_option("--eta", check_eta);
  auto* check_sigma0_opt = t_check->add_option("--sigma0", check_sigma0);
  auto* check_M_opt = t_check->add_option("--workers", check_M);

  // dataset-dump
  auto* dump = app.add_subcommand("dataset-dump", "Write the classifier dataset as CSV");
  std::string dump_config;
  std::string dump_out;
  dump->add_option("config", dump_config, "JSON experiment config")->required();
  dump->add_option("--out", dump_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }

  try {
    if (app.got_subcommand(train)) {
      std::optional<int> threads;
      if (train_threads->count() > 0) threads = train_threads_val;
      return cmd_train(train_config, train_overrides, threads);
    }
    if (app.got_subcommand(measure)) {
      if (measure_seed->count() > 0) mp.seed = measure_seed_val;
      return cmd_measure(measure_dir, measure_names, mp);
    }
    if (app.got_subcommand(landscape)) {
      std::optional<int> threads;
      if (landscape_threads->count() > 0) threads = landscape_threads_val;
      return cmd_landscape(landscape_dir, landscape_limit, landscape_step, threads,
                           landscape_interp, landscape_points);
    }
    if (app.got_subcommand(theory)) {
      if (theory->got_subcommand(t_gap)) {
        gap_cfg.mode =
            gap_stochastic ? RecurrenceMode::Stochastic : RecurrenceMode::Deterministic;
        const auto r = gap_recurrence(gap_cfg);
        json out;
        out["check"] = "gap_recurrence";
        out["alpha"] = gap_cfg.alpha;
        out["lambda"] = gap_cfg.lambda;
        out["mode"] = gap_stochastic ? "stochastic" : "deterministic";
        out["rounds"] = gap_cfg.rounds;
        out["r_final"] = r.back();
        out["limit"] = valley_width_limit(gap_cfg.alpha, gap_cfg.lambda);
        out["r"] = r;
        print_json(out);
        return 0;
      }
      if (theory->got_subcommand(t_width)) {
        print_json({{"check", "valley_width_limit"},
                    {"alpha", width_alpha},
                    {"lambda", width_lambda},
                    {"value", valley_width_limit(width_alpha, width_lambda)}});
        return 0;
      }
      if (theory->got_subcommand(t_pac)) {
        json out;
        out["check"] = "pac_bayes_gap";
        if (pac_rmin_opt->count() > 0) {
          const auto radii = geometric_grid(pac_rmin, pac_rmax, pac_gamma);
          json values = json::array();
          bool decreasing = true;
          double prev = 0.0;
          for (std::size_t i = 0; i < radii.size(); ++i) {
            const double g = pac_bayes_gap(radii[i], pac);
            values.push_back({{"r", radii[i]}, {"gap", g}});
            if (i > 0 && !(g < prev)) decreasing = false;
            prev = g;
          }
          out["values"] = values;
          out["strictly_decreasing"] = decreasing;
        } else if (pac_r_opt->count() > 0) {
          out["r"] = pac_r;
          out["value"] = pac_bayes_gap(pac_r, pac);
        } else {
          throw ConfigError("pass --r or a grid (--r-min --r-max --gamma)");
        }
        print_json(out);
        return 0;
      }
      if (theory->got_subcommand(t_grid)) {
        print_json({{"check", "geometric_grid"},
                    {"points", geometric_grid(grid_rmin, grid_rmax, grid_gamma)}});
        return 0;
      }
      if (theory->got_subcommand(t_circle)) {
        const CircleSpread s = circle_spread(circle_angles, circle_radius);
        print_json({{"check", "circle_spread"},
                    {"direct", s.direct},
                    {"identity", s.identity},
                    {"max", static_cast<double>(circle_angles.size()) * circle_radius *
                                circle_radius}});
        return 0;
      }
      if (theory->got_subcommand(t_bound)) {
        const NonconvexBound b =
            nonconvex_bound_rhs(b_f0, b_eta, b_T, b_L, b_alpha, b_lambda, b_delta, b_sigma);
        print_json({{"check", "nonconvex_bound"},
                    {"value", b.value},
                    {"side_condition_ok", b.side_condition_ok}});
        return 0;
      }
      if (theory->got_subcommand(t_unit)) {
        RngStream rng(unit_seed, kMeasureStream);
        const MeanUnitVectorReport rep =
            mean_unit_vector_check(unit_M, unit_dim, unit_trials, rng);
        print_json({{"check", "mean_unit_vector"},
                    {"mean_norm", rep.mean_norm},
                    {"bound", rep.bound},
                    {"std_error", rep.std_error},
                    {"pass", rep.pass}});
        return 0;
      }
      if (theory->got_subcommand(t_check)) {
        const fs::path summary_path = fs::path(check_run) / "summary.json";
        std::ifstream is(summary_path);
        if (!is) throw ConfigError("cannot open " + summary_path.string());
        json summary;
        try {
          is >> summary;
        } catch (const json::exception& e) {
          throw ConfigError("malformed summary.json: " + std::string(e.what()));
        }
        RunResult skeleton;
        try {
          skeleton.terminal_consensus_distance =
              summary.at("terminal_consensus_distance").get<double>();
          const json& cfg = summary.at("config");
          const std::string push = cfg.at("pullpush").at("push_mode").get<std::string>();
          skeleton.pull_push.push_mode =
              push == "off" ? PushMode::Off : PushMode::Simplified;
          RoundRecord rec;
          rec.tau_t = summary.at("terminal_tau").get<long long>();
          skeleton.pull_push.tau = rec.tau_t;
          skeleton.metrics.push_back(rec);
          if (check_alpha_opt->count() == 0) {
            check_alpha = cfg.at("pullpush").at("alpha").get<double>();
          }
          if (check_lambda_opt->count() == 0) {
            check_lambda = cfg.at("pullpush").at("lambda").get<double>();
          }
          if (check_eta_opt->count() == 0) {
            check_eta = cfg.at("local_opt").at("eta").get<double>();
          }
          if (check_sigma0_opt->count() == 0) {
            check_sigma0 = cfg.at("noise").at("sigma0").get<double>();
          }
          if (check_M_opt->count() == 0) {
            check_M = cfg.at("workers").get<int>();
          }
        } catch (const json::exception& e) {
          throw ConfigError("summary.json is missing fields: " + std::string(e.what()));
        }
        const ValleyWidthReport rep = empirical_valley_width_check(
            skeleton, check_alpha, check_lambda, check_eta, check_sigma0, check_M);
        print_json({{"check", "valley_width_check"},
                    {"terminal", rep.terminal},
                    {"limit", rep.limit},
                    {"slack", rep.slack},
                    {"lower", rep.lower},
                    {"upper", rep.upper},
                    {"pass", rep.pass}});
        return 0;
      }
    }
    if (app.got_subcommand(dump)) {
      const ExperimentConfig cfg = load_experiment_config(dump_config);
      std::unique_ptr<Objective> obj = build_objective(cfg.objective);
      const auto* mlp = dynamic_cast<const MlpObjective*>(obj.get());
      if (!mlp) {
        throw ConfigError("dataset-dump needs a classifier objective (kind=mlp)");
      }
      if (dump_out.empty()) {
        mlp->dump_dataset_csv(std::cout);
      } else {
        std::ofstream os(dump_out, std::ios::trunc);
        if (!os) throw ConfigError("cannot open for writing: " + dump_out);
        mlp->dump_dataset_csv(os);
      }
      return 0;
    }
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalOverflow& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.emplace_back("ppsim");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ppsim
