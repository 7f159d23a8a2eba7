//! Exact stochastic simulation of the networked Markov process.
//!
//! The mean-field ODEs approximate this process; simulating it directly is
//! both the ground truth for validation and the only view that captures
//! stochastic die-out. The simulator is the direct (Gillespie) method: draw a
//! global exponential waiting time from the total outflow rate, pick the node
//! and target proportionally, apply, repeat. State spaces are desk-scale, so
//! rates are recomputed incrementally per affected node rather than with
//! event queues.
//!
//! A semi-Markov variant replaces the holding time of a designated
//! sole-outflow infectious transition with a named non-exponential
//! distribution (the reference ground truth that phase-type expansion
//! approximates). Races between non-exponential and exponential clocks on
//! the same state are not supported; their semantics are not defined here.

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::stats::{derive_seed, format_sig12, lognormal_params_from_mean_sd};

/// Compartment label of a single node. Indices are 0-based internally;
/// display is 1-based (`S`, `I1..Im`, `V1..Vn`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeLabel {
    Susceptible,
    Infectious(usize),
    Vigilant(usize),
}

impl NodeLabel {
    pub fn is_infectious(&self) -> bool {
        matches!(self, NodeLabel::Infectious(_))
    }

    /// Dense index in `0..1+m+n`: S, then I^1..I^m, then V^1..V^n.
    pub fn dense_index(&self, m: usize) -> usize {
        match *self {
            NodeLabel::Susceptible => 0,
            NodeLabel::Infectious(k) => 1 + k,
            NodeLabel::Vigilant(l) => 1 + m + l,
        }
    }

    pub fn from_dense_index(idx: usize, m: usize) -> Self {
        if idx == 0 {
            NodeLabel::Susceptible
        } else if idx <= m {
            NodeLabel::Infectious(idx - 1)
        } else {
            NodeLabel::Vigilant(idx - 1 - m)
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text == "S" {
            return Ok(NodeLabel::Susceptible);
        }
        if text.len() < 2 {
            return Err(Error::Parse(format!("bad label `{text}`")));
        }
        let (kind, idx) = text.split_at(1);
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::Parse(format!("bad label `{text}`")))?;
        if idx == 0 {
            return Err(Error::Parse(format!("label indices are 1-based: `{text}`")));
        }
        match kind {
            "I" => Ok(NodeLabel::Infectious(idx - 1)),
            "V" => Ok(NodeLabel::Vigilant(idx - 1)),
            _ => Err(Error::Parse(format!("bad label `{text}`"))),
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NodeLabel::Susceptible => write!(f, "S"),
            NodeLabel::Infectious(k) => write!(f, "I{}", k + 1),
            NodeLabel::Vigilant(l) => write!(f, "V{}", l + 1),
        }
    }
}

/// Joint configuration: one label per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkState {
    labels: Vec<NodeLabel>,
}

impl NetworkState {
    pub fn all_susceptible(node_count: usize) -> Self {
        Self {
            labels: vec![NodeLabel::Susceptible; node_count],
        }
    }

    pub fn set(&mut self, node: usize, label: NodeLabel) {
        self.labels[node] = label;
    }

    pub fn label(&self, node: usize) -> NodeLabel {
        self.labels[node]
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.labels.len() != model.node_count() {
            return Err(Error::InvalidInput("state has wrong node count".into()));
        }
        for (i, l) in self.labels.iter().enumerate() {
            let ok = match *l {
                NodeLabel::Susceptible => true,
                NodeLabel::Infectious(k) => k < model.m(),
                NodeLabel::Vigilant(v) => v < model.n(),
            };
            if !ok {
                return Err(Error::InvalidInput(format!("node {i}: label {l} out of range")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub node: usize,
    pub from: NodeLabel,
    pub to: NodeLabel,
}

/// Time-ordered transition record over `[0, horizon]`, including the initial
/// configuration so it can be replayed.
#[derive(Debug, Clone)]
pub struct EventLog {
    pub init: NetworkState,
    pub events: Vec<Event>,
    pub horizon: f64,
}

impl EventLog {
    /// Replay all events from the initial configuration.
    pub fn final_state(&self) -> NetworkState {
        self.state_at(self.horizon)
    }

    /// Configuration immediately after the last event with `time <= t`.
    pub fn state_at(&self, t: f64) -> NetworkState {
        let mut state = self.init.clone();
        for e in &self.events {
            if e.time > t {
                break;
            }
            state.set(e.node, e.to);
        }
        state
    }

    /// First time `node` enters `label`, if ever (0 if it starts there).
    pub fn first_entry(&self, node: usize, label: NodeLabel) -> Option<f64> {
        if self.init.label(node) == label {
            return Some(0.0);
        }
        self.events
            .iter()
            .find(|e| e.node == node && e.to == label)
            .map(|e| e.time)
    }

    /// CSV rows `t,node,from,to`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "t,node,from,to")?;
        for e in &self.events {
            writeln!(out, "{},{},{},{}", format_sig12(e.time), e.node, e.from, e.to)?;
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Precomputed per-node rate tables shared by both simulators.
struct RateTables {
    /// Sum of theta per node.
    theta_sum: Vec<f64>,
    /// [node][k]: total outflow rate of I^k (recovery + internal).
    infectious_out: Vec<Vec<f64>>,
    /// [node][l]: total outflow rate of V^l (gamma + internal).
    vigilant_out: Vec<Vec<f64>>,
}

impl RateTables {
    fn new(model: &Model) -> Self {
        let (m, n) = (model.m(), model.n());
        let mut theta_sum = Vec::with_capacity(model.node_count());
        let mut infectious_out = Vec::with_capacity(model.node_count());
        let mut vigilant_out = Vec::with_capacity(model.node_count());
        for i in 0..model.node_count() {
            let p = model.node(i);
            theta_sum.push(p.vigilance.sum());
            infectious_out.push(
                (0..m)
                    .map(|k| p.recovery.row(k).sum() + p.infectious_internal.row(k).sum())
                    .collect(),
            );
            vigilant_out.push(
                (0..n)
                    .map(|l| p.susceptibility[l] + p.vigilant_internal.row(l).sum())
                    .collect(),
            );
        }
        Self {
            theta_sum,
            infectious_out,
            vigilant_out,
        }
    }
}

/// Infection pressure on a susceptible node: sum over in-neighbors currently
/// in I^k of beta_ij^k.
fn pressure(model: &Model, labels: &[NodeLabel], i: usize) -> f64 {
    let mut acc = 0.0;
    for (j, beta) in model.incoming(i) {
        if let NodeLabel::Infectious(k) = labels[*j] {
            acc += beta[k];
        }
    }
    acc
}

type ExemptFn<'a> = &'a dyn Fn(NodeLabel) -> bool;

fn node_rate(
    model: &Model,
    tables: &RateTables,
    labels: &[NodeLabel],
    i: usize,
    exempt: Option<ExemptFn>,
) -> f64 {
    let label = labels[i];
    if let Some(exempt) = exempt {
        if exempt(label) {
            return 0.0;
        }
    }
    match label {
        NodeLabel::Susceptible => pressure(model, labels, i) + tables.theta_sum[i],
        NodeLabel::Infectious(k) => tables.infectious_out[i][k],
        NodeLabel::Vigilant(l) => tables.vigilant_out[i][l],
    }
}

/// Choose the target of a transition out of `labels[i]`, given a uniform draw
/// `u` already scaled to the node's total rate.
fn pick_target(model: &Model, labels: &[NodeLabel], i: usize, mut u: f64) -> NodeLabel {
    let p = model.node(i);
    let (m, n) = (model.m(), model.n());
    match labels[i] {
        NodeLabel::Susceptible => {
            let inf = pressure(model, labels, i);
            if u < inf {
                return NodeLabel::Infectious(0); // infection always lands in I^1
            }
            u -= inf;
            for l in 0..n {
                u -= p.vigilance[l];
                if u < 0.0 {
                    return NodeLabel::Vigilant(l);
                }
            }
            NodeLabel::Vigilant(n - 1)
        }
        NodeLabel::Infectious(k) => {
            for l in 0..n {
                u -= p.recovery[(k, l)];
                if u < 0.0 {
                    return NodeLabel::Vigilant(l);
                }
            }
            for k2 in 0..m {
                if k2 != k {
                    u -= p.infectious_internal[(k, k2)];
                    if u < 0.0 {
                        return NodeLabel::Infectious(k2);
                    }
                }
            }
            // Roundoff spill: take the last positive-rate target.
            for k2 in (0..m).rev() {
                if k2 != k && p.infectious_internal[(k, k2)] > 0.0 {
                    return NodeLabel::Infectious(k2);
                }
            }
            for l in (0..n).rev() {
                if p.recovery[(k, l)] > 0.0 {
                    return NodeLabel::Vigilant(l);
                }
            }
            NodeLabel::Infectious(k)
        }
        NodeLabel::Vigilant(l) => {
            u -= p.susceptibility[l];
            if u < 0.0 {
                return NodeLabel::Susceptible;
            }
            for l2 in 0..n {
                if l2 != l {
                    u -= p.vigilant_internal[(l, l2)];
                    if u < 0.0 {
                        return NodeLabel::Vigilant(l2);
                    }
                }
            }
            for l2 in (0..n).rev() {
                if l2 != l && p.vigilant_internal[(l, l2)] > 0.0 {
                    return NodeLabel::Vigilant(l2);
                }
            }
            NodeLabel::Susceptible
        }
    }
}

/// After node `changed` switched labels, refresh the cached rates of every
/// node whose outflow could have moved: the node itself plus its susceptible
/// out-neighbors (their infection pressure depends on `changed`).
fn refresh_rates(
    model: &Model,
    tables: &RateTables,
    labels: &[NodeLabel],
    rates: &mut [f64],
    changed: usize,
    exempt: Option<ExemptFn>,
) {
    rates[changed] = node_rate(model, tables, labels, changed, exempt);
    for &o in model.graph().out_neighbors(changed) {
        if labels[o] == NodeLabel::Susceptible {
            rates[o] = node_rate(model, tables, labels, o, exempt);
        }
    }
}

/// Exact continuous-time simulation by the direct method. Deterministic for
/// a fixed rng stream; a zero total rate ends the log early (absorbing
/// configuration).
pub fn simulate_ctmc(
    model: &Model,
    init: &NetworkState,
    horizon: f64,
    rng: &mut impl Rng,
) -> Result<EventLog> {
    init.validate(model)?;
    if !(horizon >= 0.0) {
        return Err(Error::InvalidInput("horizon must be nonnegative".into()));
    }
    let tables = RateTables::new(model);
    let mut labels = init.labels().to_vec();
    let mut rates: Vec<f64> = (0..model.node_count())
        .map(|i| node_rate(model, &tables, &labels, i, None))
        .collect();
    let mut events = Vec::new();
    let mut t = 0.0f64;
    loop {
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            break;
        }
        let draw: f64 = rng.random();
        t += -(1.0 - draw).ln() / total;
        if t > horizon {
            break;
        }
        // Pick the node proportionally to its rate.
        let mut u = rng.random::<f64>() * total;
        let mut node = model.node_count() - 1;
        for (i, &r) in rates.iter().enumerate() {
            u -= r;
            if u < 0.0 {
                node = i;
                break;
            }
        }
        let from = labels[node];
        let to = pick_target(model, &labels, node, rng.random::<f64>() * rates[node]);
        if to == from {
            continue; // roundoff produced a no-op; redraw
        }
        labels[node] = to;
        events.push(Event {
            time: t,
            node,
            from,
            to,
        });
        refresh_rates(model, &tables, &labels, &mut rates, node, None);
    }
    Ok(EventLog {
        init: init.clone(),
        events,
        horizon,
    })
}

/// Empirical per-label occupancy frequencies on a time grid.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub grid: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub runs: usize,
    /// Flat `[t][node][label]` frequencies, label width `1 + m + n`.
    freq: Vec<f64>,
    node_count: usize,
}

impl Ensemble {
    fn width(&self) -> usize {
        1 + self.m + self.n
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn frequency(&self, t_idx: usize, node: usize, label: NodeLabel) -> f64 {
        let w = self.width();
        self.freq[(t_idx * self.node_count + node) * w + label.dense_index(self.m)]
    }

    /// Per-time, per-node probability of being in any infectious state.
    pub fn infectious_occupancy(&self) -> Vec<Vec<f64>> {
        (0..self.grid.len())
            .map(|ti| {
                (0..self.node_count)
                    .map(|i| {
                        (0..self.m)
                            .map(|k| self.frequency(ti, i, NodeLabel::Infectious(k)))
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// CSV rows `t,node,label,frequency`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "t,node,label,frequency")?;
        let w = self.width();
        for (ti, t) in self.grid.iter().enumerate() {
            for node in 0..self.node_count {
                for idx in 0..w {
                    let label = NodeLabel::from_dense_index(idx, self.m);
                    writeln!(
                        out,
                        "{},{},{},{}",
                        format_sig12(*t),
                        node,
                        label,
                        format_sig12(self.freq[(ti * self.node_count + node) * w + idx])
                    )?;
                }
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn accumulate_run(log: &EventLog, grid: &[f64], m: usize, n: usize, counts: &mut [u64]) {
    let width = 1 + m + n;
    let node_count = log.init.node_count();
    let mut state = log.init.clone();
    let mut next_event = 0usize;
    for (ti, &g) in grid.iter().enumerate() {
        while next_event < log.events.len() && log.events[next_event].time <= g {
            let e = &log.events[next_event];
            state.set(e.node, e.to);
            next_event += 1;
        }
        for i in 0..node_count {
            counts[(ti * node_count + i) * width + state.label(i).dense_index(m)] += 1;
        }
    }
}

fn ensemble_impl(
    model: &Model,
    init: &NetworkState,
    horizon: f64,
    runs: usize,
    grid: &[f64],
    simulate: impl Fn(u64) -> Result<EventLog> + Sync,
) -> Result<Ensemble> {
    if runs == 0 {
        return Err(Error::InvalidInput("runs must be >= 1".into()));
    }
    if grid.is_empty()
        || grid.windows(2).any(|w| w[1] < w[0])
        || grid.iter().any(|&g| !(0.0..=horizon).contains(&g))
    {
        return Err(Error::InvalidInput(
            "grid must be nondecreasing and within [0, horizon]".into(),
        ));
    }
    let (m, n) = (model.m(), model.n());
    let width = 1 + m + n;
    let len = grid.len() * model.node_count() * width;
    let counts = (0..runs)
        .into_par_iter()
        .try_fold(
            || vec![0u64; len],
            |mut acc, run| -> Result<Vec<u64>> {
                let log = simulate(run as u64)?;
                accumulate_run(&log, grid, m, n, &mut acc);
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let freq = counts.iter().map(|&c| c as f64 / runs as f64).collect();
    Ok(Ensemble {
        grid: grid.to_vec(),
        m,
        n,
        runs,
        freq,
        node_count: init.node_count(),
    })
}

/// Independent runs with per-run seeds derived from `seed` by the documented
/// counter-based scheme; the reduction is order-independent, so results do
/// not depend on worker scheduling.
pub fn ensemble(
    model: &Model,
    init: &NetworkState,
    horizon: f64,
    runs: usize,
    seed: u64,
    grid: &[f64],
) -> Result<Ensemble> {
    init.validate(model)?;
    ensemble_impl(model, init, horizon, runs, grid, |run| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, run));
        simulate_ctmc(model, init, horizon, &mut rng)
    })
}

/// Named holding-time distributions for semi-Markov overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HoldingDistribution {
    Exponential { rate: f64 },
    /// Parameterized by the mean and standard deviation of the distribution
    /// itself (not of the underlying normal).
    LogNormal { mean: f64, sd: f64 },
}

impl HoldingDistribution {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            HoldingDistribution::Exponential { rate } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
            HoldingDistribution::LogNormal { mean, sd } => {
                let (mu, sigma) = lognormal_params_from_mean_sd(mean, sd)
                    .expect("validated at spec construction");
                rand_distr::LogNormal::new(mu, sigma)
                    .expect("sigma > 0")
                    .sample(rng)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            HoldingDistribution::Exponential { rate } if rate > 0.0 => Ok(()),
            HoldingDistribution::LogNormal { mean, sd } => {
                lognormal_params_from_mean_sd(mean, sd).map(|_| ())
            }
            _ => Err(Error::InvalidInput("holding distribution rate must be positive".into())),
        }
    }
}

/// Replace the holding time of one internal transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionOverride {
    pub from: NodeLabel,
    pub to: NodeLabel,
    pub distribution: HoldingDistribution,
}

/// A model plus holding-time overrides on internal infectious transitions
/// that are the sole outflow of their source state (for every node). That
/// restriction keeps the semantics unambiguous: an overridden clock never
/// races an exponential one.
#[derive(Debug, Clone)]
pub struct SemiMarkovSpec {
    model: Model,
    overrides: Vec<TransitionOverride>,
}

impl SemiMarkovSpec {
    pub fn new(model: Model, overrides: Vec<TransitionOverride>) -> Result<Self> {
        let (m, n) = (model.m(), model.n());
        let mut seen_from = std::collections::BTreeSet::new();
        for ov in &overrides {
            ov.distribution.validate()?;
            let k = match ov.from {
                NodeLabel::Infectious(k) if k < m => k,
                other => {
                    return Err(Error::UnsupportedConfiguration(format!(
                        "override source must be an infectious state, got {other}"
                    )))
                }
            };
            if !seen_from.insert(k) {
                return Err(Error::UnsupportedConfiguration(format!(
                    "multiple overrides on source state I{}",
                    k + 1
                )));
            }
            match ov.to {
                NodeLabel::Infectious(k2) if k2 < m && k2 != k => {}
                NodeLabel::Vigilant(l) if l < n => {}
                other => {
                    return Err(Error::UnsupportedConfiguration(format!(
                        "override target {other} is not a distinct internal state"
                    )))
                }
            }
            // The overridden transition must be the sole outflow of I^k.
            for i in 0..model.node_count() {
                let p = model.node(i);
                let mut competing = p.recovery.row(k).sum() + p.infectious_internal.row(k).sum();
                competing -= match ov.to {
                    NodeLabel::Infectious(k2) => p.infectious_internal[(k, k2)],
                    NodeLabel::Vigilant(l) => p.recovery[(k, l)],
                    NodeLabel::Susceptible => unreachable!(),
                };
                if competing > 0.0 {
                    return Err(Error::UnsupportedConfiguration(format!(
                        "node {i}: state I{} has competing exponential rates; \
                         overrides require a sole outflow",
                        k + 1
                    )));
                }
            }
        }
        Ok(Self { model, overrides })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    fn override_for(&self, label: NodeLabel) -> Option<&TransitionOverride> {
        self.overrides.iter().find(|ov| ov.from == label)
    }
}

/// Next-event simulation of a [`SemiMarkovSpec`]: overridden states hold for
/// a freshly drawn non-exponential time; all other transitions remain an
/// exponential race, exactly as in [`simulate_ctmc`].
pub fn simulate_semi_markov(
    spec: &SemiMarkovSpec,
    init: &NetworkState,
    horizon: f64,
    rng: &mut impl Rng,
) -> Result<EventLog> {
    let model = &spec.model;
    init.validate(model)?;
    if !(horizon >= 0.0) {
        return Err(Error::InvalidInput("horizon must be nonnegative".into()));
    }
    let tables = RateTables::new(model);
    let mut labels = init.labels().to_vec();
    let exempt = |label: NodeLabel| spec.override_for(label).is_some();
    let exempt_ref: ExemptFn = &exempt;

    // Scheduled fire times for nodes currently holding in an overridden state.
    let mut scheduled: Vec<Option<(f64, NodeLabel)>> = vec![None; model.node_count()];
    for i in 0..model.node_count() {
        if let Some(ov) = spec.override_for(labels[i]) {
            scheduled[i] = Some((ov.distribution.sample(rng), ov.to));
        }
    }
    let mut rates: Vec<f64> = (0..model.node_count())
        .map(|i| node_rate(model, &tables, &labels, i, Some(exempt_ref)))
        .collect();

    let mut events = Vec::new();
    let mut t = 0.0f64;
    loop {
        let total: f64 = rates.iter().sum();
        let t_exp = if total > 0.0 {
            let draw: f64 = rng.random();
            t + -(1.0 - draw).ln() / total
        } else {
            f64::INFINITY
        };
        let sched = scheduled
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|(ft, to)| (ft, i, to)))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let t_sched = sched.map_or(f64::INFINITY, |(ft, _, _)| ft);

        if t_exp.min(t_sched) > horizon {
            break;
        }
        let (node, from, to) = if t_sched <= t_exp {
            let (ft, node, to) = sched.unwrap();
            t = ft;
            scheduled[node] = None;
            (node, labels[node], to)
        } else {
            t = t_exp;
            let mut u = rng.random::<f64>() * total;
            let mut node = model.node_count() - 1;
            for (i, &r) in rates.iter().enumerate() {
                u -= r;
                if u < 0.0 {
                    node = i;
                    break;
                }
            }
            let from = labels[node];
            let to = pick_target(model, &labels, node, rng.random::<f64>() * rates[node]);
            if to == from {
                continue;
            }
            (node, from, to)
        };
        labels[node] = to;
        events.push(Event {
            time: t,
            node,
            from,
            to,
        });
        if let Some(ov) = spec.override_for(to) {
            scheduled[node] = Some((t + ov.distribution.sample(rng), ov.to));
        }
        refresh_rates(model, &tables, &labels, &mut rates, node, Some(exempt_ref));
    }
    Ok(EventLog {
        init: init.clone(),
        events,
        horizon,
    })
}

/// Ensemble of semi-Markov runs (see [`ensemble`] for seeding semantics).
pub fn ensemble_semi_markov(
    spec: &SemiMarkovSpec,
    init: &NetworkState,
    horizon: f64,
    runs: usize,
    seed: u64,
    grid: &[f64],
) -> Result<Ensemble> {
    init.validate(spec.model())?;
    ensemble_impl(spec.model(), init, horizon, runs, grid, |run| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, run));
        simulate_semi_markov(spec, init, horizon, &mut rng)
    })
}
