#pragma once

// Command-line surface: simulate -> fit -> standardize -> eval
// pipelines, tail heatmaps and CDF tables. Every command is a pure
// function of its flags and input files.
//
// Exit codes: 0 success, 2 fit did not converge, 64 usage error,
// 65 data-format error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bgadj/bgadj.hpp"

namespace bgadj::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNoConvergence = 2;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitDataFormat = 65;

namespace detail {

inline std::shared_ptr<const TemplateStack> templates_from_baf(const std::string& path) {
  const BafRaster r = read_baf(path);
  return std::make_shared<const TemplateStack>(VoxelGrid{r.nx, r.ny},
                                               static_cast<std::size_t>(r.channels),
                                               r.data);
}

inline BafRaster raster_from(const VoxelGrid& grid, std::size_t channels,
                             std::vector<double> data) {
  BafRaster r;
  r.nx = grid.nx;
  r.ny = grid.ny;
  r.channels = static_cast<int>(channels);
  r.data = std::move(data);
  return r;
}

inline std::pair<int, int> parse_dims(const std::string& s) {
  int nx = 0, ny = 0;
  char comma = 0;
  std::istringstream in(s);
  if (!(in >> nx >> comma >> ny) || comma != ',' || nx <= 0 || ny <= 0 || !in.eof())
    throw std::invalid_argument("--dims expects NX,NY with positive integers");
  return {nx, ny};
}

inline Vec parse_csv_doubles(const std::string& s, const char* flag) {
  Vec out;
  std::string token;
  std::istringstream in(s);
  while (std::getline(in, token, ',')) {
    try {
      out.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(flag) + ": cannot parse '" + token + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument(std::string(flag) + ": empty list");
  return out;
}

inline Method parse_method(const std::string& s) {
  if (s == "t1") return Method::t1;
  if (s == "t2") return Method::t2;
  if (s == "t3") return Method::t3;
  throw std::invalid_argument("--transform/--method expects t1, t2 or t3");
}

inline Assignment parse_assignment(const std::string& s) {
  if (s == "soft") return Assignment::soft;
  if (s == "hard") return Assignment::hard;
  throw std::invalid_argument("--assign expects soft or hard");
}

inline Side parse_side(const std::string& s) {
  if (s == "two") return Side::two;
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  throw std::invalid_argument("--tail expects two, left or right");
}

// --t LO:HI:STEP
inline std::vector<double> parse_t_range(const std::string& s) {
  double lo, hi, step;
  char c1, c2;
  std::istringstream in(s);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) ||
      hi < lo || !in.eof())
    throw std::invalid_argument("--t expects LO:HI:STEP with STEP > 0 and HI >= LO");
  std::vector<double> ts;
  for (int i = 0;; ++i) {
    const double t = lo + i * step;
    if (t > hi + 1e-12 * std::max(1.0, std::abs(hi))) break;
    ts.push_back(t);
  }
  return ts;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario = "A";
  std::string dims = "320,256";
  std::uint64_t seed = 1;
  std::string params_file;
  std::string templates = "synthetic";
  std::string lesion;
  std::string out;
  int threads = 0;
};

inline int cmd_simulate(const SimulateArgs& a) {
  const auto [nx, ny] = parse_dims(a.dims);
  if (a.scenario != "A" && a.scenario != "B")
    throw std::invalid_argument("--scenario expects A or B");
  const VoxelGrid grid{nx, ny};

  std::shared_ptr<const TemplateStack> templates;
  if (a.templates == "synthetic")
    templates = synth_templates(nx, ny, TemplateStyle::concentric);
  else
    templates = templates_from_baf(a.templates);
  if (!(templates->grid() == grid))
    throw std::invalid_argument("cmd_simulate: template grid does not match --dims");

  ScenarioSpec spec;
  spec.scenario = a.scenario[0];
  spec.nx = nx;
  spec.ny = ny;
  spec.seed = a.seed;
  if (a.params_file.empty()) {
    if (templates->components() != 3)
      throw std::invalid_argument(
          "cmd_simulate: default phantom parameters need K = 3 templates");
    spec.model = make_spatial_model(phantom_components(), phantom_gamma(), templates);
  } else {
    const ParsedParams parsed = read_params(a.params_file);
    spec.model = parsed.kind == WeightKind::spatial ? parsed.to_model(templates)
                                                    : parsed.to_model();
  }
  if (spec.scenario == 'B') {
    LesionSpec lesion = default_lesion(nx, ny);
    if (!a.lesion.empty()) {
      const Vec v = parse_csv_doubles(a.lesion, "--lesion");
      if (v.size() != 3) throw std::invalid_argument("--lesion expects CX,CY,R");
      lesion.cx = v[0];
      lesion.cy = v[1];
      lesion.radius = v[2];
    }
    spec.lesion = lesion;
  } else if (!a.lesion.empty()) {
    throw std::invalid_argument("cmd_simulate: --lesion requires --scenario B");
  }

  const SampleResult result = generate(spec);
  const std::size_t p = spec.model.p();
  write_baf(a.out + ".obs.baf", raster_from(grid, p, result.obs));
  write_baf(a.out + ".templates.baf",
            raster_from(grid, templates->components(), templates->values()));
  write_params(a.out + ".truth.params", spec.model);
  if (spec.scenario == 'B') {
    std::vector<double> mask(result.mask.begin(), result.mask.end());
    write_baf(a.out + ".mask.baf", raster_from(grid, 1, std::move(mask)));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string method;
  std::string in;
  std::string templates;
  std::size_t components = 3;
  double tol = 1e-5;
  int max_iter = 1000;
  double huber_q = 0.99;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
};

inline int cmd_fit(const FitArgs& a) {
  const bool spatial = a.method == "sgmm" || a.method == "rb-sgmm";
  if (!spatial && a.method != "gmm")
    throw std::invalid_argument("--method expects gmm, sgmm or rb-sgmm");
  if (spatial && a.templates.empty())
    throw std::invalid_argument("cmd_fit: --method " + a.method + " requires --templates");

  const BafRaster obs = read_baf(a.in);
  const std::size_t n = obs.pixels();
  const std::size_t p = static_cast<std::size_t>(obs.channels);

  FitConfig cfg;
  cfg.tol = a.tol;
  cfg.max_iter = a.max_iter;
  cfg.huber_q = a.huber_q;
  cfg.robust = a.method == "rb-sgmm";
  cfg.spatial = spatial;
  cfg.seed = a.seed;
  cfg.threads = a.threads;

  std::shared_ptr<const TemplateStack> templates;
  std::size_t K = a.components;
  if (spatial) {
    templates = templates_from_baf(a.templates);
    if (!(templates->grid() == VoxelGrid{obs.nx, obs.ny}))
      throw std::invalid_argument("cmd_fit: template grid does not match observations");
    K = templates->components();
  }

  const FitResult result = fit(obs.data, n, p, K, templates, cfg);
  write_params(a.out, result.model);

  std::ofstream log(a.out + ".log.jsonl", std::ios::trunc);
  if (!log) throw DataFormatError("cmd_fit: cannot open " + a.out + ".log.jsonl");
  for (std::size_t i = 0; i < result.loglik_trace.size(); ++i) {
    nlohmann::json row{{"iter", i}, {"loglik", result.loglik_trace[i]}};
    log << row.dump() << "\n";
  }
  nlohmann::json tail{{"converged", result.converged},
                      {"iterations", result.iterations},
                      {"warnings", result.warnings}};
  log << tail.dump() << "\n";
  return result.converged ? kExitOk : kExitNoConvergence;
}

// ---------------------------------------------------------------------------

struct StandardizeArgs {
  std::string in;
  std::string params;
  std::string templates;
  std::string transform = "t1";
  std::string assign = "soft";
  std::string contrast;
  std::string out;
  int threads = 0;
};

inline int cmd_standardize(const StandardizeArgs& a) {
  const BafRaster obs = read_baf(a.in);
  const VoxelGrid grid{obs.nx, obs.ny};
  const std::size_t p = static_cast<std::size_t>(obs.channels);

  const ParsedParams parsed = read_params(a.params);
  MixtureModel model = [&] {
    if (parsed.kind == WeightKind::spatial) {
      if (a.templates.empty())
        throw std::invalid_argument(
            "cmd_standardize: spatial parameters require --templates");
      return parsed.to_model(templates_from_baf(a.templates));
    }
    return parsed.to_model();
  }();
  if (model.p() != p)
    throw std::invalid_argument("cmd_standardize: parameter/observation dimension mismatch");

  Vec contrast;
  if (!a.contrast.empty()) {
    contrast = parse_csv_doubles(a.contrast, "--contrast");
  } else if (p == 1) {
    contrast = {1.0};
  } else if (p == 2) {
    contrast = {-1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  } else {
    throw std::invalid_argument("cmd_standardize: --contrast required for p > 2");
  }

  const ScoreField field = standardize_field(obs.data, grid, model,
                                             parse_method(a.transform),
                                             parse_assignment(a.assign), a.threads);
  const ContrastScores scores = contrast_scores(field, contrast);
  if (scores.renormalized)
    std::cerr << "cmd_standardize: contrast renormalized to unit length\n";

  write_baf(a.out + ".scores.baf", raster_from(grid, p, field.scores));
  write_baf(a.out + ".z.baf", raster_from(grid, 1, scores.z));
  write_baf(a.out + ".p.baf", raster_from(grid, 1, scores.p_two));
  const KsResult ks = ks_test(scores.z);
  write_csv(a.out + ".summary.csv", "n,ks_statistic,ks_p_value",
            {{static_cast<double>(grid.size()), ks.statistic, ks.p_value}});
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TailArgs {
  int case_id = 1;
  double rho = 0.0;
  double kappa2 = 1.0;
  double alpha = 0.001;
  std::string tail = "two";
  std::string grid = "25x25";
  std::uint64_t reps = 100000;
  std::string method = "t1";
  std::string assign = "soft";
  std::uint64_t seed = 1;
  std::string out;
  int threads = 0;
};

inline int cmd_tail(const TailArgs& a) {
  int gk = 0, gp = 0;
  {
    char x = 0;
    std::istringstream in(a.grid);
    if (!(in >> gk >> x >> gp) || x != 'x' || gk < 1 || gp < 1 || !in.eof())
      throw std::invalid_argument("--grid expects NxM");
  }
  CaseGrid grid = default_case_grid(a.case_id, a.rho, a.kappa2);
  grid.kappa1_grid = linspace(0.0, 8.0, gk);
  grid.pi1_grid = linspace(0.02, 0.98, gp);
  grid.validate();

  TailSpec spec;
  spec.alpha = a.alpha;
  spec.side = parse_side(a.tail);
  spec.contrast = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)};
  spec.reps = a.reps;
  spec.seed = a.seed;
  spec.threads = a.threads;

  const HeatmapResult hm =
      heatmap(grid, parse_method(a.method), parse_assignment(a.assign), spec);
  std::vector<std::vector<double>> rows;
  rows.reserve(hm.cells.size());
  for (const HeatmapCell& c : hm.cells)
    rows.push_back({c.kappa1, c.pi1, c.estimate.R, c.estimate.se});
  write_csv(a.out, "kappa1,pi1,R,SE", rows);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CdfArgs {
  double tau = 1.0;
  double delta1 = 0.0;
  double pi0 = 0.0;
  std::string t_range = "-4:4:0.2";
  std::uint64_t reps = 100000;
  std::uint64_t seed = 1;
  std::string out;
  int threads = 0;
};

inline int cmd_cdf(const CdfArgs& a) {
  if (!(a.tau > 0.0)) throw std::invalid_argument("--tau must be positive");
  const CanonicalParams theta(Vec{a.delta1}, Mat(1, 1, {a.tau}), a.pi0);
  if (theta.in_theta0())
    throw std::invalid_argument(
        "cmd_cdf: parameters lie in Theta_0 (Delta_1 = 0 with tau = 1, or a "
        "degenerate class weight); the hard-assignment CDF theory excludes "
        "this set, where T equals Z exactly");
  const std::vector<double> ts = parse_t_range(a.t_range);
  const auto mc = hard_contrast_cdf_mc(ts, {1.0}, theta, a.reps, a.seed, a.threads);
  const Canonical1d c = to_univariate(theta);
  std::vector<std::vector<double>> rows;
  rows.reserve(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i)
    rows.push_back({ts[i], hard_cdf_univariate(ts[i], c), mc[i].value, mc[i].se});
  write_csv(a.out, "t,F_exact,F_mc,SE", rows);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string est;
  std::string truth;
  std::string templates;
  std::string out;
};

inline int cmd_eval(const EvalArgs& a) {
  const ParsedParams est_p = read_params(a.est);
  const ParsedParams truth_p = read_params(a.truth);
  std::shared_ptr<const TemplateStack> templates;
  if (est_p.kind == WeightKind::spatial || truth_p.kind == WeightKind::spatial) {
    if (a.templates.empty())
      throw std::invalid_argument("cmd_eval: spatial parameters require --templates");
    templates = templates_from_baf(a.templates);
  }
  const MixtureModel est = est_p.to_model(templates);
  const MixtureModel truth = truth_p.to_model(templates);
  const ParamErrorTable t = param_error(est, truth);

  std::ofstream f(a.out, std::ios::trunc);
  if (!f) throw DataFormatError("cmd_eval: cannot open " + a.out);
  f << "parameter,error\n";
  for (std::size_t k = 0; k < t.mean_err.size(); ++k)
    f << "mu_" << (k + 1) << "," << bgadj::detail::fmt17(t.mean_err[k]) << "\n";
  for (std::size_t k = 0; k < t.cov_err.size(); ++k)
    f << "sigma_" << (k + 1) << "," << bgadj::detail::fmt17(t.cov_err[k]) << "\n";
  f << "pi," << bgadj::detail::fmt17(t.pi_err) << "\n";
  return kExitOk;
}

}  // namespace detail

/// Entry point; returns the process exit code.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Robust spatial Gaussian-mixture background adjustment"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (0 = BGADJ_THREADS env or hardware)");

  detail::SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic phantom");
  simulate->add_option("--scenario", sim.scenario, "A (no lesion) or B (lesion)");
  simulate->add_option("--dims", sim.dims, "grid as NX,NY");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--params", sim.params_file, "generating parameters file");
  simulate->add_option("--templates", sim.templates, "templates BAF file or 'synthetic'");
  simulate->add_option("--lesion", sim.lesion, "lesion as CX,CY,R (scenario B)");
  simulate->add_option("--out", sim.out, "output prefix")->required();

  detail::FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a mixture model by EM");
  fit_cmd->add_option("--method", fit_args.method, "gmm, sgmm or rb-sgmm")->required();
  fit_cmd->add_option("--in", fit_args.in, "observations BAF file")->required();
  fit_cmd->add_option("--templates", fit_args.templates, "templates BAF file");
  fit_cmd->add_option("--components", fit_args.components, "K for non-spatial fits");
  fit_cmd->add_option("--tol", fit_args.tol, "relative log-likelihood tolerance");
  fit_cmd->add_option("--max-iter", fit_args.max_iter, "iteration cap");
  fit_cmd->add_option("--huber-q", fit_args.huber_q, "quantile for k1(p)");
  fit_cmd->add_option("--seed", fit_args.seed, "initialization seed");
  fit_cmd->add_option("--out", fit_args.out, "output parameters file")->required();

  detail::StandardizeArgs std_args;
  CLI::App* standardize = app.add_subcommand("standardize", "standardize observations");
  standardize->add_option("--in", std_args.in, "observations BAF file")->required();
  standardize->add_option("--params", std_args.params, "parameters file")->required();
  standardize->add_option("--templates", std_args.templates, "templates BAF file");
  standardize->add_option("--transform", std_args.transform, "t1, t2 or t3");
  standardize->add_option("--assign", std_args.assign, "soft or hard");
  standardize->add_option("--contrast", std_args.contrast, "contrast as a1,a2,...");
  standardize->add_option("--out", std_args.out, "output prefix")->required();

  detail::TailArgs tail_args;
  CLI::App* tail = app.add_subcommand("tail", "relative-size heatmap over a case grid");
  tail->add_option("--case", tail_args.case_id, "1 or 2");
  tail->add_option("--rho", tail_args.rho, "correlation of Sigma_1");
  tail->add_option("--kappa2", tail_args.kappa2, "scale of Sigma_1");
  tail->add_option("--alpha", tail_args.alpha, "test size");
  tail->add_option("--tail", tail_args.tail, "two, left or right");
  tail->add_option("--grid", tail_args.grid, "cells as NxM");
  tail->add_option("--reps", tail_args.reps, "replicates per cell");
  tail->add_option("--method", tail_args.method, "t1, t2 or t3");
  tail->add_option("--assign", tail_args.assign, "soft or hard");
  tail->add_option("--seed", tail_args.seed, "RNG seed");
  tail->add_option("--out", tail_args.out, "output CSV")->required();

  detail::CdfArgs cdf_args;
  CLI::App* cdf = app.add_subcommand("cdf", "exact and Monte Carlo CDF of T_H (p = 1)");
  cdf->add_option("--tau", cdf_args.tau, "tau (> 0)")->required();
  cdf->add_option("--delta1", cdf_args.delta1, "Delta_1")->required();
  cdf->add_option("--pi0", cdf_args.pi0, "pi_0 = 2 log(pi_2/pi_1)")->required();
  cdf->add_option("--t", cdf_args.t_range, "thresholds as LO:HI:STEP");
  cdf->add_option("--reps", cdf_args.reps, "Monte Carlo replicates");
  cdf->add_option("--seed", cdf_args.seed, "RNG seed");
  cdf->add_option("--out", cdf_args.out, "output CSV")->required();

  detail::EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "parameter-error table of a fit");
  eval->add_option("--est", eval_args.est, "estimated parameters file")->required();
  eval->add_option("--truth", eval_args.truth, "true parameters file")->required();
  eval->add_option("--templates", eval_args.templates, "templates BAF file");
  eval->add_option("--out", eval_args.out, "output CSV")->required();

  // let --threads (a parent option) appear after the subcommand too
  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    sim.threads = fit_args.threads = std_args.threads = tail_args.threads =
        cdf_args.threads = threads;
    if (app.got_subcommand(simulate)) return detail::cmd_simulate(sim);
    if (app.got_subcommand(fit_cmd)) return detail::cmd_fit(fit_args);
    if (app.got_subcommand(standardize)) return detail::cmd_standardize(std_args);
    if (app.got_subcommand(tail)) return detail::cmd_tail(tail_args);
    if (app.got_subcommand(cdf)) return detail::cmd_cdf(cdf_args);
    if (app.got_subcommand(eval)) return detail::cmd_eval(eval_args);
  } catch (const DataFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataFormat;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DegenerateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  }
  return kExitUsage;
}

}  // namespace bgadj::cli
