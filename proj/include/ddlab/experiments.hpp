// Experiment pipelines behind the CLI subcommands. Each writes results.csv
// (schema documented per experiment) and meta.json into the output directory
// and returns a JSON summary. Outputs are deterministic for a fixed config:
// rerunning a seed reproduces results.csv byte for byte.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ddlab/config.hpp"
#include "ddlab/csv.hpp"
#include "ddlab/estimators.hpp"
#include "ddlab/integrate.hpp"
#include "ddlab/oracles.hpp"
#include "ddlab/parallel.hpp"
#include "ddlab/stats.hpp"

namespace ddlab {

namespace detail {

inline void write_meta(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  Json meta;
  meta["experiment"] = experiment_name(cfg.experiment);
  meta["config"] = cfg.doc;
  meta["config_hash"] = cfg.hash();
  meta["seed"] = cfg.doc.at("run").at("seed");
  meta["tool"] = "ddlab";
  meta["version"] = "0.1.0";
  const auto now = std::chrono::system_clock::now();
  meta["created_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  std::ofstream f(out_dir / "meta.json");
  f << meta.dump(2) << "\n";
}

inline std::filesystem::path prepare(const ExperimentConfig& cfg, const std::string& out_dir) {
  std::filesystem::path p(out_dir);
  std::filesystem::create_directories(p);
  write_meta(cfg, p);
  return p;
}

// One Algorithm-1 sample: base sampler from T to t_thr, then the augmented
// HP-ODE to 0. Returns y0 with its tracked log p_0(y0).
struct HpSampleResult {
  Eigen::VectorXd y0;
  double logp_y0;
};

inline HpSampleResult hp_sample_one(const GaussianMixtureFamily& family,
                                    const NoiseSchedule& sched, double t_thr, long n_steps,
                                    bool base_reverse_sde, std::uint64_t seed,
                                    std::uint64_t stream) {
  const double T = sched.horizon();
  const ScheduleCoeffs cT = sched.at(T);
  const int d = family.dim();
  CounterRng init(seed, stream);
  Eigen::VectorXd x_T = cT.sigma * init.normal_vector(d).eval();
  const ScoreModel model = ScoreModel::exact(family);

  Eigen::VectorXd x_t;
  if (t_thr >= T) {
    x_t = x_T;
  } else {
    const std::size_t base_steps = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(static_cast<double>(n_steps) * (T - t_thr) / T)));
    const TimeGrid base_grid = make_time_grid(sched, T, t_thr, base_steps);
    if (base_reverse_sde) {
      const SystemSpec base(SystemKind::approx_rev_sde_aug, sched, model);
      x_t = integrate_sde(base, base_grid, AugmentedState{x_T, 0.0}, seed, stream).back().x;
    } else {
      const SystemSpec base(SystemKind::pf_ode_aug, sched, model);
      x_t = integrate_ode([&](double t, const AugmentedState& st) { return base.ode_rate(t, st); },
                          base_grid, AugmentedState{x_T, 0.0})
                .back()
                .x;
    }
  }

  if (t_thr <= 0.0) return {x_t, family.log_density(0.0, x_t)};  // degenerate threshold

  const std::size_t hp_steps = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(static_cast<double>(n_steps) * t_thr / T)));
  const SystemSpec hp = SystemSpec::anchored(SystemKind::hp_ode_aug, sched, model, t_thr, x_t);
  const TimeGrid hp_grid = make_time_grid(sched, t_thr, 0.0, hp_steps);
  const AugmentedTrajectory traj =
      integrate_ode([&](double s, const AugmentedState& st) { return hp.ode_rate(s, st); },
                    hp_grid, AugmentedState{x_t, family.log_density(t_thr, x_t)});
  return {traj.back().x, traj.back().aux};
}

}  // namespace detail

// --- hp-sample: Algorithm 1 across a list of lambda thresholds. -------------
inline Json run_high_probability_sampling(const ExperimentConfig& cfg,
                                          const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const GaussianMixtureFamily family = cfg.family();
  const std::vector<double> thresholds = cfg.numbers("thresholds_lambda");
  const bool base_rev = cfg.doc.value("base_sampler", "reverse-sde") == "reverse-sde";
  const long n_paths = cfg.n_paths();
  const long n_steps = cfg.n_steps();
  const std::uint64_t seed = cfg.seed();
  const std::string hash = cfg.hash();

  std::vector<std::string> header = {"threshold_lambda", "path"};
  for (int i = 0; i < family.dim(); ++i) header.push_back("y0_" + std::to_string(i));
  header.push_back("logp_y0");
  header.push_back("seed");
  header.push_back("config_hash");
  CsvWriter csv((out / "results.csv").string(), header);

  Json summary = Json::array();
  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    const double lam = thresholds[ti];
    const double t_thr = sched.time_from_lambda(lam);
    std::vector<detail::HpSampleResult> res(n_paths);
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
      res[p] = detail::hp_sample_one(family, sched, t_thr, n_steps, base_rev, seed,
                                     ti * static_cast<std::size_t>(n_paths) + p);
    });
    std::vector<double> logps(n_paths);
    for (long p = 0; p < n_paths; ++p) {
      std::vector<CsvWriter::Field> row{lam, static_cast<long>(p)};
      for (int i = 0; i < family.dim(); ++i) row.emplace_back(res[p].y0[i]);
      row.emplace_back(res[p].logp_y0);
      row.emplace_back(static_cast<long>(seed));
      row.emplace_back(hash);
      csv.row(row);
      logps[p] = res[p].logp_y0;
    }
    summary.push_back({{"threshold_lambda", lam}, {"mean_logp_y0", mean_and_se(logps).mean}});
  }
  return summary;
}

// --- track-likelihood: Fig.-2 analog. ---------------------------------------
inline Json run_track_likelihood(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const GaussianMixtureFamily family = cfg.family();
  const long n_paths = cfg.n_paths();
  const long n_steps = cfg.n_steps();
  const std::uint64_t seed = cfg.seed();
  const double T = sched.horizon();

  const SystemSpec sys(SystemKind::rev_sde_aug, sched, ScoreModel::exact(family));
  const TimeGrid grid = make_time_grid(sched, T, 0.0, static_cast<std::size_t>(n_steps));
  std::vector<double> max_errs(n_paths), end_errs(n_paths);
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
    CounterRng init(seed, p);
    Eigen::VectorXd x_T = family.sample_pt(T, init);
    AugmentedState start{x_T, family.log_density(T, x_T)};
    const AugmentedTrajectory traj =
        integrate_sde(sys, grid, std::move(start), seed, p, AuxScheme::corrected);
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      const double err =
          std::abs(traj.states[k].aux - family.log_density(grid.nodes[k], traj.states[k].x));
      worst = std::max(worst, err);
    }
    max_errs[p] = worst;
    end_errs[p] = std::abs(traj.back().aux - family.log_density(0.0, traj.back().x));
  });

  CsvWriter csv((out / "results.csv").string(),
                {"path", "max_abs_err", "endpoint_abs_err", "seed", "config_hash"});
  const std::string hash = cfg.hash();
  for (long p = 0; p < n_paths; ++p)
    csv.row({static_cast<long>(p), max_errs[p], end_errs[p], static_cast<long>(seed), hash});
  Json summary;
  summary["mean_max_abs_err"] = mean_and_se(max_errs).mean;
  summary["worst_max_abs_err"] = *std::max_element(max_errs.begin(), max_errs.end());
  return summary;
}

// --- bias-bounds: R, R^U, R^L, E[X], E[Y]. -----------------------------------
inline Json run_bias_bounds(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const ScoreModel model = cfg.score_model();
  const long n_paths = cfg.n_paths();
  const long n_steps = cfg.n_steps();
  const long elbo_n = cfg.doc.value("elbo_samples", 2048);
  const long ode_steps = cfg.doc.value("ode_steps", 1024);
  const std::uint64_t seed = cfg.seed();

  const auto pairs = sample_with_r0(model, sched, n_paths, n_steps, seed);
  std::vector<double> elbos(n_paths), odes(n_paths);
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
    elbos[p] = elbo(model, sched, pairs[p].x0, elbo_n, detail::mix64(seed + 1000 + p)).value;
    odes[p] = ode_log_density(model, sched, pairs[p].x0, ode_steps);
  });
  const GapBounds gb = gap_and_kl_bounds(pairs, odes, elbos);
  const auto [ex, ey] =
      bias_integrals(model, model.family(), sched, 4 * n_paths, detail::mix64(seed + 7));

  const std::string hash = cfg.hash();
  CsvWriter csv((out / "results.csv").string(),
                {"estimator_id", "value", "std_error", "n", "seed", "config_hash"});
  for (const EstimateReport* r : {&gb.R, &gb.R_upper, &gb.R_lower, &ex, &ey})
    csv.row({r->estimator_id, r->value, r->std_error, r->n, static_cast<long>(seed), hash});

  CsvWriter samples((out / "samples.csv").string(),
                    {"path", "r0", "elbo", "ode_logp", "config_hash"});
  for (long p = 0; p < n_paths; ++p)
    samples.row({static_cast<long>(p), pairs[p].r0, elbos[p], odes[p], hash});

  Json summary;
  summary["R"] = gb.R.value;
  summary["R_se"] = gb.R.std_error;
  summary["R_upper"] = gb.R_upper.value;
  summary["R_upper_se"] = gb.R_upper.std_error;
  summary["R_lower"] = gb.R_lower.value;
  summary["R_lower_se"] = gb.R_lower.std_error;
  summary["E_X"] = ex.value;
  summary["E_X_se"] = ex.std_error;
  summary["E_Y"] = ey.value;
  summary["E_Y_se"] = ey.std_error;
  return summary;
}

// --- mode-curve: Theorem-5 ODE against the grid oracle. ----------------------
inline Json run_mode_curve(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const GaussianMixtureFamily family = cfg.family();
  const double lambda_t = cfg.num("anchor", "lambda_t");
  const double t_anchor = sched.time_from_lambda(lambda_t);
  Eigen::VectorXd x_t(1);
  x_t << cfg.num("anchor", "x");
  const double lambda_end = cfg.doc.at("lambda_end").get<double>();
  const std::vector<double> checkpoints = cfg.numbers("checkpoints_lambda");
  const GridSpec grid_spec = GridSpec::uniform_1d(
      cfg.num("grid", "lo"), cfg.num("grid", "hi"), static_cast<int>(cfg.integer("grid", "points")));

  const SystemSpec sys =
      SystemSpec::anchored(SystemKind::mode_ode, sched, ScoreModel::exact(family), t_anchor, x_t);
  const TimeGrid grid = make_time_grid(sched, t_anchor, sched.time_from_lambda(lambda_end),
                                       static_cast<std::size_t>(cfg.n_steps()),
                                       GridSpacing::refined_anchor);
  const AugmentedTrajectory traj = integrate_ode(
      [&](double s, const AugmentedState& st) {
        return AugmentedRate{sys.mode_rhs(s, st.x), 0.0};
      },
      grid, AugmentedState{x_t, 0.0});

  const std::string hash = cfg.hash();
  CsvWriter csv((out / "results.csv").string(),
                {"lambda_s", "s", "y_ode", "y_grid", "abs_diff", "cell", "within_cell",
                 "config_hash"});
  const double cell = grid_spec.cell();
  double worst = 0.0;
  for (double lam_chk : checkpoints) {
    // nearest trajectory node
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
      const double d = std::abs(sched.lambda_at(grid.nodes[k]) - lam_chk);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    const double s = grid.nodes[best];
    if (s >= t_anchor) continue;
    const double y_ode = traj.states[best].x[0];
    const ArgmaxResult am = denoising_grid_argmax(family, sched, x_t, t_anchor, s, grid_spec);
    const double diff = std::abs(y_ode - am.x_star[0]);
    worst = std::max(worst, diff);
    csv.row({sched.lambda_at(s), s, y_ode, am.x_star[0], diff, cell,
             static_cast<long>(diff <= cell ? 1 : 0), hash});
  }
  Json summary;
  summary["worst_abs_diff"] = worst;
  summary["cell"] = cell;
  summary["pass"] = worst <= cell;
  return summary;
}

// --- tradeoff: likelihood vs diversity across thresholds (Fig.-5 analog). ----
inline Json run_tradeoff(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const GaussianMixtureFamily family = cfg.family();
  const std::vector<double> thresholds = cfg.numbers("thresholds_lambda");
  const bool base_rev = cfg.doc.value("base_sampler", "reverse-sde") == "reverse-sde";
  const long n_paths = cfg.n_paths();
  if (n_paths < 2) throw ConfigError("run.n_paths", "tradeoff needs >= 2 paths");
  const long n_steps = cfg.n_steps();
  const std::uint64_t seed = cfg.seed();
  const int d = family.dim();
  const std::string hash = cfg.hash();

  std::vector<std::string> header = {"threshold_lambda", "path"};
  for (int i = 0; i < d; ++i) header.push_back("y0_" + std::to_string(i));
  header.push_back("logp_y0");
  header.push_back("config_hash");
  CsvWriter csv((out / "results.csv").string(), header);
  CsvWriter agg((out / "summary.csv").string(),
                {"threshold_lambda", "cov_trace", "mean_logp_y0", "n", "config_hash"});

  Json summary = Json::array();
  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    const double lam = thresholds[ti];
    const double t_thr = sched.time_from_lambda(lam);
    std::vector<detail::HpSampleResult> res(n_paths);
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
      res[p] = detail::hp_sample_one(family, sched, t_thr, n_steps, base_rev, seed,
                                     ti * static_cast<std::size_t>(n_paths) + p);
    });
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& r : res) mean += r.y0;
    mean /= static_cast<double>(n_paths);
    double cov_trace = 0.0;
    std::vector<double> logps(n_paths);
    for (long p = 0; p < n_paths; ++p) {
      cov_trace += (res[p].y0 - mean).squaredNorm();
      logps[p] = res[p].logp_y0;
      std::vector<CsvWriter::Field> row{lam, static_cast<long>(p)};
      for (int i = 0; i < d; ++i) row.emplace_back(res[p].y0[i]);
      row.emplace_back(res[p].logp_y0);
      row.emplace_back(hash);
      csv.row(row);
    }
    cov_trace /= static_cast<double>(n_paths - 1);
    const double mean_logp = mean_and_se(logps).mean;
    agg.row({lam, cov_trace, mean_logp, n_paths, hash});
    summary.push_back(
        {{"threshold_lambda", lam}, {"cov_trace", cov_trace}, {"mean_logp_y0", mean_logp}});
  }
  return summary;
}

// --- hp-vs-samples: Fig.-6 statistic. ----------------------------------------
inline Json run_hp_vs_samples(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const GaussianMixtureFamily family = cfg.family();
  const std::vector<double> thresholds = cfg.numbers("thresholds_lambda");
  const long K = cfg.doc.value("k_samples", 512);
  const long anchors = cfg.doc.value("anchors_per_threshold", 4);
  const long n_steps = cfg.n_steps();
  const std::uint64_t seed = cfg.seed();
  const std::string hash = cfg.hash();

  CsvWriter csv((out / "results.csv").string(),
                {"lambda_t", "anchor", "fraction", "n_compared", "k", "config_hash"});
  Json summary = Json::array();
  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    const double lam = thresholds[ti];
    const double t = sched.time_from_lambda(lam);
    double worst = 0.0;
    for (long a = 0; a < anchors; ++a) {
      CounterRng rng(seed, 500000 + ti * 1000 + static_cast<std::uint64_t>(a));
      const Eigen::VectorXd x_t = family.sample_pt(t, rng);
      const DenoisingPoint hp = hp_ode_denoising(family, sched, x_t, t, n_steps);
      const EstimateReport rep = higher_likelihood_fraction(
          family, sched, x_t, t, hp.y0, K, n_steps,
          detail::mix64(seed + ti * 7919 + static_cast<std::uint64_t>(a)));
      worst = std::max(worst, rep.value);
      csv.row({lam, a, rep.value, rep.n, K, hash});
    }
    summary.push_back({{"lambda_t", lam}, {"worst_fraction", worst}});
  }
  return summary;
}

// --- nonsmooth-demo: the discontinuous mode curve. ---------------------------
inline Json run_nonsmooth_demo(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const GaussianMixtureFamily family = cfg.family();
  const double lambda_t = cfg.num("anchor", "lambda_t");
  const double t = sched.time_from_lambda(lambda_t);
  Eigen::VectorXd x_t(1);
  x_t << cfg.num("anchor", "x");
  const double from = cfg.num("lambda_scan", "from");
  const double to = cfg.num("lambda_scan", "to");
  const double step = cfg.num("lambda_scan", "step");
  if (!(step > 0.0 && to > from)) throw ConfigError("lambda_scan", "need step > 0 and to > from");
  std::vector<double> scan;
  for (double l = from; l <= to + 1e-12; l += step) scan.push_back(l);
  const GridSpec grid = GridSpec::uniform_1d(cfg.num("grid", "lo"), cfg.num("grid", "hi"),
                                             static_cast<int>(cfg.integer("grid", "points")));
  const double threshold = cfg.doc.value("jump_threshold", 0.5);

  const ModeJumpResult r = detect_mode_jump(family, sched, x_t, t, scan, grid, threshold);

  const std::string hash = cfg.hash();
  CsvWriter csv((out / "results.csv").string(),
                {"found", "lambda_star", "lambda_lo", "lambda_hi", "left_mode", "right_mode",
                 "displacement", "config_hash"});
  csv.row({static_cast<long>(r.found ? 1 : 0), r.lambda_star, r.lambda_lo, r.lambda_hi,
           r.left_mode, r.right_mode, r.displacement, hash});

  CsvWriter scan_csv((out / "scan.csv").string(), {"lambda_s", "mode", "config_hash"});
  for (double l : scan) {
    const double s = sched.time_from_lambda(l);
    scan_csv.row({l, denoising_grid_argmax(family, sched, x_t, t, s, grid).x_star[0], hash});
  }

  Json summary;
  summary["found"] = r.found;
  summary["lambda_star"] = r.lambda_star;
  summary["left_mode"] = r.left_mode;
  summary["right_mode"] = r.right_mode;
  return summary;
}

// --- beta-invariance: marginals agree across beta choices. -------------------
inline Json run_beta_invariance(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const GaussianMixtureFamily family = cfg.family();
  if (family.dim() != 1) throw ConfigError("family.dim", "beta-invariance expects 1D");
  const std::vector<double> betas = cfg.numbers("betas");
  if (betas.size() != 2) throw ConfigError("betas", "expected exactly two beta values");
  const long n_paths = cfg.n_paths();
  const long n_steps = cfg.n_steps();
  const std::uint64_t seed = cfg.seed();
  const double T = sched.horizon();
  const TimeGrid grid = make_time_grid(sched, T, 0.0, static_cast<std::size_t>(n_steps));

  const auto endpoint_sample = [&](double beta, std::uint64_t stream_offset) {
    const SystemSpec sys = SystemSpec::beta_system(
        SystemKind::beta_rev_aug, sched, ScoreModel::exact(family),
        [beta](double) { return beta; });
    std::vector<double> xs(n_paths);
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
      CounterRng init(seed, stream_offset + p);
      Eigen::VectorXd x_T = family.sample_pt(T, init);
      AugmentedState start{x_T, family.log_density(T, x_T)};
      xs[p] = integrate_sde(sys, grid, std::move(start), seed, stream_offset + p).back().x[0];
    });
    return xs;
  };

  const std::vector<double> a = endpoint_sample(betas[0], 0);
  const std::vector<double> b =
      endpoint_sample(betas[1], static_cast<std::uint64_t>(n_paths) + 1000);
  const double ks = ks_statistic(a, b);

  const std::string hash = cfg.hash();
  CsvWriter csv((out / "results.csv").string(),
                {"beta_a", "beta_b", "ks_stat", "n", "config_hash"});
  csv.row({betas[0], betas[1], ks, n_paths, hash});
  Json summary;
  summary["ks_stat"] = ks;
  return summary;
}

// --- selftest: fast deterministic checks. ------------------------------------
inline Json run_selftest(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto out = detail::prepare(cfg, out_dir);
  const NoiseSchedule sched = cfg.schedule();
  const GaussianMixtureFamily family = cfg.family();
  const std::uint64_t seed = cfg.seed();
  const std::string hash = cfg.hash();

  CsvWriter csv((out / "results.csv").string(),
                {"check", "value", "threshold", "pass", "config_hash"});
  bool all_ok = true;
  const auto emit = [&](const std::string& name, double value, double threshold) {
    const bool ok = value <= threshold;
    all_ok = all_ok && ok;
    csv.row({name, value, threshold, static_cast<long>(ok ? 1 : 0), hash});
  };

  // schedule identity
  double vp_err = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const ScheduleCoeffs c = sched.at(sched.horizon() * i / 200.0);
    vp_err = std::max(vp_err, std::abs(c.alpha * c.alpha + c.sigma * c.sigma - 1.0));
  }
  emit("vp_identity", vp_err, 1e-12);

  // derivative chain at a few points
  CounterRng rng(seed, 42);
  double fd_worst = 0.0, fpe_worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double t = 0.05 + 0.9 * rng.uniform() * sched.horizon();
    Eigen::VectorXd x = 3.0 * rng.normal_vector(family.dim());
    for (DerivOrder o : {DerivOrder::score, DerivOrder::hessian, DerivOrder::laplacian,
                         DerivOrder::grad_laplacian})
      fd_worst = std::max(fd_worst, finite_diff_check(family, t, x, o));
    fpe_worst = std::max(fpe_worst, std::abs(family.fokker_planck_residual(t, x)));
  }
  emit("finite_diff_chain", fd_worst, 1e-6);
  emit("fokker_planck_residual", fpe_worst, 1e-5);

  // PF-ODE aux tracking on a short run
  {
    const SystemSpec sys(SystemKind::pf_ode_aug, sched, ScoreModel::exact(family));
    const TimeGrid grid = make_time_grid(sched, sched.horizon(), 0.0,
                                         static_cast<std::size_t>(cfg.n_steps()));
    CounterRng init(seed, 7);
    Eigen::VectorXd x_T = family.sample_pt(sched.horizon(), init);
    const AugmentedTrajectory traj = integrate_ode(
        [&](double t, const AugmentedState& st) { return sys.ode_rate(t, st); }, grid,
        AugmentedState{x_T, family.log_density(sched.horizon(), x_T)});
    emit("pf_ode_aux_endpoint_err",
         std::abs(traj.back().aux - family.log_density(0.0, traj.back().x)), 1e-2);
  }

  // reverse-SDE tracking, corrected aux channel
  {
    const SystemSpec sys(SystemKind::rev_sde_aug, sched, ScoreModel::exact(family));
    const TimeGrid grid = make_time_grid(sched, sched.horizon(), 0.0,
                                         static_cast<std::size_t>(cfg.n_steps()));
    std::vector<double> errs(cfg.n_paths());
    parallel_for(static_cast<std::size_t>(cfg.n_paths()), [&](std::size_t p) {
      CounterRng init(seed, p);
      Eigen::VectorXd x_T = family.sample_pt(sched.horizon(), init);
      AugmentedState start{x_T, family.log_density(sched.horizon(), x_T)};
      const AugmentedTrajectory traj =
          integrate_sde(sys, grid, std::move(start), seed, p, AuxScheme::corrected);
      double worst = 0.0;
      for (std::size_t k = 0; k < traj.states.size(); ++k)
        worst = std::max(worst, std::abs(traj.states[k].aux -
                                         family.log_density(grid.nodes[k], traj.states[k].x)));
      errs[p] = worst;
    });
    emit("rev_sde_tracking_mean_max_err", mean_and_se(errs).mean, 0.15);
  }

  Json summary;
  summary["pass"] = all_ok;
  return summary;
}

// Dispatch by experiment kind; returns the JSON summary.
inline Json run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  switch (cfg.experiment) {
    case ExperimentKind::hp_sample: return run_high_probability_sampling(cfg, out_dir);
    case ExperimentKind::track_likelihood: return run_track_likelihood(cfg, out_dir);
    case ExperimentKind::bias_bounds: return run_bias_bounds(cfg, out_dir);
    case ExperimentKind::mode_curve: return run_mode_curve(cfg, out_dir);
    case ExperimentKind::tradeoff: return run_tradeoff(cfg, out_dir);
    case ExperimentKind::hp_vs_samples: return run_hp_vs_samples(cfg, out_dir);
    case ExperimentKind::nonsmooth_demo: return run_nonsmooth_demo(cfg, out_dir);
    case ExperimentKind::beta_invariance: return run_beta_invariance(cfg, out_dir);
    case ExperimentKind::selftest: return run_selftest(cfg, out_dir);
  }
  throw std::logic_error("run_experiment: unknown kind");
}

}  // namespace ddlab
