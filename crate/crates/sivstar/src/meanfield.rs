//! Deterministic mean-field dynamics.
//!
//! Per node the state is a probability vector over `S, I^1..I^m, V^1..V^n`.
//! The reduced system integrates only the `I` and `V` coordinates and
//! reconstructs `S = 1 - sum(I) - sum(V)`; the full-form right-hand side
//! (including an independently evaluated `dS`) is exposed for conservation
//! checks. Integration is classical fixed-step 4th-order Runge–Kutta;
//! simplex violations beyond tolerance are reported as errors, never
//! repaired.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::stats::format_sig12;

/// Default integration step in days.
pub const DEFAULT_STEP: f64 = 0.01;

/// Per-node probabilities over the `1 + m + n` compartments.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    m: usize,
    n: usize,
    s: Vec<f64>,
    infectious: Vec<f64>, // node-major, N*m
    vigilant: Vec<f64>,   // node-major, N*n
}

impl MeanFieldState {
    /// Every node fully susceptible.
    pub fn all_susceptible(node_count: usize, m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            s: vec![1.0; node_count],
            infectious: vec![0.0; node_count * m],
            vigilant: vec![0.0; node_count * n],
        }
    }

    /// Build from explicit I and V blocks; S is reconstructed per node.
    pub fn from_infectious_vigilant(
        node_count: usize,
        m: usize,
        n: usize,
        infectious: Vec<f64>,
        vigilant: Vec<f64>,
    ) -> Result<Self> {
        if infectious.len() != node_count * m || vigilant.len() != node_count * n {
            return Err(Error::InvalidInput("state block lengths do not match dimensions".into()));
        }
        let mut s = vec![0.0; node_count];
        for i in 0..node_count {
            let si: f64 = 1.0
                - infectious[i * m..(i + 1) * m].iter().sum::<f64>()
                - vigilant[i * n..(i + 1) * n].iter().sum::<f64>();
            s[i] = si;
        }
        Ok(Self {
            m,
            n,
            s,
            infectious,
            vigilant,
        })
    }

    /// The disease-free point: `I = 0`, `V` at the vigilant equilibrium.
    pub fn disease_free(model: &Model) -> Result<Self> {
        let ystar = crate::stability::vigilant_equilibrium(model)?;
        let n = model.n();
        let mut vigilant = vec![0.0; model.node_count() * n];
        for (i, y) in ystar.iter().enumerate() {
            for l in 0..n {
                vigilant[i * n + l] = y[l];
            }
        }
        Self::from_infectious_vigilant(
            model.node_count(),
            model.m(),
            n,
            vec![0.0; model.node_count() * model.m()],
            vigilant,
        )
    }

    /// Move `fraction` of node `i`'s susceptible mass into `I^{k+1}`.
    pub fn seed_infection(&mut self, i: usize, k: usize, fraction: f64) {
        self.s[i] -= fraction;
        self.infectious[i * self.m + k] += fraction;
    }

    pub fn node_count(&self) -> usize {
        self.s.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s[i]
    }

    /// Probability of node `i` being in `I^{k+1}` (0-based `k`).
    pub fn infectious(&self, i: usize, k: usize) -> f64 {
        self.infectious[i * self.m + k]
    }

    /// Probability of node `i` being in `V^{l+1}` (0-based `l`).
    pub fn vigilant(&self, i: usize, l: usize) -> f64 {
        self.vigilant[i * self.n + l]
    }

    /// Total infectious probability of node `i`.
    pub fn infection_probability(&self, i: usize) -> f64 {
        self.infectious[i * self.m..(i + 1) * self.m].iter().sum()
    }

    /// Max deviation of any per-node sum from 1.
    pub fn simplex_residual(&self) -> f64 {
        (0..self.node_count())
            .map(|i| {
                (self.s[i]
                    + self.infectious[i * self.m..(i + 1) * self.m].iter().sum::<f64>()
                    + self.vigilant[i * self.n..(i + 1) * self.n].iter().sum::<f64>()
                    - 1.0)
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Check the simplex constraint: per-node sums within `sum_tol` of 1 and
    /// all entries >= `-entry_tol` (and <= 1 + entry_tol).
    pub fn validate(&self, sum_tol: f64, entry_tol: f64) -> Result<()> {
        if self.simplex_residual() > sum_tol {
            return Err(Error::InvalidInput(format!(
                "state sums deviate from 1 by {:.3e}",
                self.simplex_residual()
            )));
        }
        let all = self
            .s
            .iter()
            .chain(self.infectious.iter())
            .chain(self.vigilant.iter());
        for &v in all {
            if !(-entry_tol..=1.0 + entry_tol).contains(&v) {
                return Err(Error::InvalidInput(format!("state entry {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn to_reduced(&self, z: &mut [f64]) {
        let w = self.m + self.n;
        for i in 0..self.node_count() {
            z[i * w..i * w + self.m]
                .copy_from_slice(&self.infectious[i * self.m..(i + 1) * self.m]);
            z[i * w + self.m..(i + 1) * w]
                .copy_from_slice(&self.vigilant[i * self.n..(i + 1) * self.n]);
        }
    }

    fn from_reduced(node_count: usize, m: usize, n: usize, z: &[f64]) -> Self {
        let w = m + n;
        let mut infectious = vec![0.0; node_count * m];
        let mut vigilant = vec![0.0; node_count * n];
        for i in 0..node_count {
            infectious[i * m..(i + 1) * m].copy_from_slice(&z[i * w..i * w + m]);
            vigilant[i * n..(i + 1) * n].copy_from_slice(&z[i * w + m..(i + 1) * w]);
        }
        Self::from_infectious_vigilant(node_count, m, n, infectious, vigilant)
            .expect("lengths are consistent by construction")
    }
}

/// Time derivative of a [`MeanFieldState`], same shape. `ds` is evaluated
/// from its own balance terms, so summing all components of a node tests the
/// analytic cancellation rather than restating it.
#[derive(Debug, Clone)]
pub struct MeanFieldDerivative {
    pub ds: Vec<f64>,
    pub dinfectious: Vec<f64>,
    pub dvigilant: Vec<f64>,
}

impl MeanFieldDerivative {
    /// Sum of all compartment derivatives of node `i` (analytically zero).
    pub fn node_sum(&self, i: usize, m: usize, n: usize) -> f64 {
        self.ds[i]
            + self.dinfectious[i * m..(i + 1) * m].iter().sum::<f64>()
            + self.dvigilant[i * n..(i + 1) * n].iter().sum::<f64>()
    }
}

/// Reduced-system right-hand side over the packed `[I_i | V_i]` layout.
/// `S_i` is reconstructed from the stage values, so the function is
/// self-contained on the reduced coordinates.
fn rhs_reduced(model: &Model, z: &[f64], dz: &mut [f64]) {
    let (m, n) = (model.m(), model.n());
    let w = m + n;
    for i in 0..model.node_count() {
        let p = model.node(i);
        let zi = &z[i * w..(i + 1) * w];
        let s_i = 1.0 - zi.iter().sum::<f64>();

        let mut pressure = 0.0;
        for (j, beta) in model.incoming(i) {
            let zj = &z[j * w..j * w + m];
            for k in 0..m {
                pressure += beta[k] * zj[k];
            }
        }

        let dzi = &mut dz[i * w..(i + 1) * w];
        // Infectious states.
        for k in 0..m {
            let mut acc = -zi[k] * p.recovery.row(k).sum();
            for k2 in 0..m {
                acc += zi[k2] * p.infectious_internal[(k2, k)]
                    - zi[k] * p.infectious_internal[(k, k2)];
            }
            dzi[k] = acc;
        }
        dzi[0] += s_i * pressure;
        // Vigilant states.
        for l in 0..n {
            let mut acc = p.vigilance[l] * s_i - p.susceptibility[l] * zi[m + l];
            for k in 0..m {
                acc += p.recovery[(k, l)] * zi[k];
            }
            for l2 in 0..n {
                acc += zi[m + l2] * p.vigilant_internal[(l2, l)]
                    - zi[m + l] * p.vigilant_internal[(l, l2)];
            }
            dzi[m + l] = acc;
        }
    }
}

/// Full-form right-hand side at `state`.
///
/// Requires the state to satisfy the simplex constraint within `1e-6`.
pub fn rhs(model: &Model, state: &MeanFieldState) -> Result<MeanFieldDerivative> {
    if state.node_count() != model.node_count() || state.m != model.m() || state.n != model.n() {
        return Err(Error::InvalidInput("state dimensions do not match the model".into()));
    }
    state.validate(1e-6, 1e-6)?;
    let (m, n) = (model.m(), model.n());
    let w = m + n;
    let mut z = vec![0.0; model.node_count() * w];
    state.to_reduced(&mut z);
    let mut dz = vec![0.0; z.len()];
    rhs_reduced(model, &z, &mut dz);

    let mut ds = vec![0.0; model.node_count()];
    for i in 0..model.node_count() {
        let p = model.node(i);
        let mut pressure = 0.0;
        for (j, beta) in model.incoming(i) {
            for k in 0..m {
                pressure += beta[k] * state.infectious(*j, k);
            }
        }
        let mut acc = -state.s(i) * (p.vigilance.sum() + pressure);
        for l in 0..n {
            acc += p.susceptibility[l] * state.vigilant(i, l);
        }
        ds[i] = acc;
    }

    let mut dinfectious = vec![0.0; model.node_count() * m];
    let mut dvigilant = vec![0.0; model.node_count() * n];
    for i in 0..model.node_count() {
        dinfectious[i * m..(i + 1) * m].copy_from_slice(&dz[i * w..i * w + m]);
        dvigilant[i * n..(i + 1) * n].copy_from_slice(&dz[i * w + m..(i + 1) * w]);
    }
    Ok(MeanFieldDerivative {
        ds,
        dinfectious,
        dvigilant,
    })
}

/// Recorded mean-field evolution. Times are strictly increasing; every stored
/// state passed the simplex check at recording time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
}

impl Trajectory {
    pub fn last(&self) -> &MeanFieldState {
        self.states.last().expect("trajectory is never empty")
    }

    /// Per-time, per-node total infectious probability.
    pub fn infection_probability(&self) -> Vec<Vec<f64>> {
        self.states
            .iter()
            .map(|st| {
                (0..st.node_count())
                    .map(|i| st.infection_probability(i))
                    .collect()
            })
            .collect()
    }

    /// Long-format CSV: `t,node,S,I1..Im,V1..Vn`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        let (m, n) = (self.states[0].m, self.states[0].n);
        let mut header = String::from("t,node,S");
        for k in 1..=m {
            header.push_str(&format!(",I{k}"));
        }
        for l in 1..=n {
            header.push_str(&format!(",V{l}"));
        }
        writeln!(out, "{header}")?;
        for (t, st) in self.times.iter().zip(&self.states) {
            for i in 0..st.node_count() {
                let mut line = format!("{},{}", format_sig12(*t), i);
                line.push(',');
                line.push_str(&format_sig12(st.s(i)));
                for k in 0..m {
                    line.push(',');
                    line.push_str(&format_sig12(st.infectious(i, k)));
                }
                for l in 0..n {
                    line.push(',');
                    line.push_str(&format_sig12(st.vigilant(i, l)));
                }
                writeln!(out, "{line}")?;
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Summary CSV over nodes: `t,P_min,P_avg,P_max` of the total infectious
    /// probability.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "t,P_min,P_avg,P_max")?;
        for (t, st) in self.times.iter().zip(&self.states) {
            let ps: Vec<f64> = (0..st.node_count())
                .map(|i| st.infection_probability(i))
                .collect();
            let min = ps.iter().copied().fold(f64::INFINITY, f64::min);
            let max = ps.iter().copied().fold(0.0f64, f64::max);
            let avg = ps.iter().sum::<f64>() / ps.len() as f64;
            writeln!(
                out,
                "{},{},{},{}",
                format_sig12(*t),
                format_sig12(min),
                format_sig12(avg),
                format_sig12(max)
            )?;
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Recording cadence. `None` applies the default rule: every step for
/// horizons up to 100 days, otherwise decimated to at most 10^4 samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrateOptions {
    pub record_stride: Option<usize>,
}

/// Per-recorded-state tolerance on negative entries (see module docs).
const ENTRY_TOL: f64 = 1e-8;

struct Stepper<'a> {
    model: &'a Model,
    z: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a Model, init: &MeanFieldState) -> Self {
        let dim = model.node_count() * (model.m() + model.n());
        let mut z = vec![0.0; dim];
        init.to_reduced(&mut z);
        Self {
            model,
            z,
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            scratch: vec![0.0; dim],
        }
    }

    /// One classical RK4 step of size `h`. Leaves the derivative at the step
    /// start in `k1`.
    fn step(&mut self, h: f64) {
        rhs_reduced(self.model, &self.z, &mut self.k1);
        for i in 0..self.z.len() {
            self.scratch[i] = self.z[i] + 0.5 * h * self.k1[i];
        }
        rhs_reduced(self.model, &self.scratch, &mut self.k2);
        for i in 0..self.z.len() {
            self.scratch[i] = self.z[i] + 0.5 * h * self.k2[i];
        }
        rhs_reduced(self.model, &self.scratch, &mut self.k3);
        for i in 0..self.z.len() {
            self.scratch[i] = self.z[i] + h * self.k3[i];
        }
        rhs_reduced(self.model, &self.scratch, &mut self.k4);
        for i in 0..self.z.len() {
            self.z[i] +=
                h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    /// Simplex check on the packed coordinates; `t` only labels the error.
    fn check(&self, t: f64) -> Result<()> {
        let w = self.model.m() + self.model.n();
        for i in 0..self.model.node_count() {
            let zi = &self.z[i * w..(i + 1) * w];
            let mut sum = 0.0;
            for &v in zi {
                if v < -ENTRY_TOL || v > 1.0 + ENTRY_TOL {
                    return Err(Error::IntegrationFailure {
                        time: t,
                        detail: format!("node {i} left the probability simplex (entry {v:.3e})"),
                    });
                }
                sum += v;
            }
            let s = 1.0 - sum;
            if s < -ENTRY_TOL || s > 1.0 + ENTRY_TOL {
                return Err(Error::IntegrationFailure {
                    time: t,
                    detail: format!("node {i} left the probability simplex (S = {s:.3e})"),
                });
            }
        }
        Ok(())
    }

    fn state(&self) -> MeanFieldState {
        MeanFieldState::from_reduced(
            self.model.node_count(),
            self.model.m(),
            self.model.n(),
            &self.z,
        )
    }

    fn rhs_max_norm(&mut self) -> f64 {
        rhs_reduced(self.model, &self.z, &mut self.k1);
        self.k1.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

fn plan_steps(horizon: f64, step: f64) -> Result<(usize, f64)> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    if horizon < step {
        return Err(Error::InvalidInput("horizon must be at least one step".into()));
    }
    let n_full = (horizon / step + 1e-9).floor() as usize;
    let tail = horizon - n_full as f64 * step;
    Ok((n_full, if tail > 1e-9 * step.max(1.0) { tail } else { 0.0 }))
}

/// Integrate the reduced system with classical fixed-step RK4, recording
/// states on the configured stride (plus the initial and final states).
pub fn integrate_with(
    model: &Model,
    init: &MeanFieldState,
    horizon: f64,
    step: f64,
    options: IntegrateOptions,
) -> Result<Trajectory> {
    if init.node_count() != model.node_count() || init.m != model.m() || init.n != model.n() {
        return Err(Error::InvalidInput("initial state dimensions do not match the model".into()));
    }
    init.validate(1e-6, ENTRY_TOL)?;
    let (n_full, tail) = plan_steps(horizon, step)?;
    let total_steps = n_full + usize::from(tail > 0.0);
    let stride = options.record_stride.unwrap_or_else(|| {
        if horizon <= 100.0 {
            1
        } else {
            total_steps.div_ceil(10_000).max(1)
        }
    });

    let mut stepper = Stepper::new(model, init);
    stepper.check(0.0)?;
    let mut trajectory = Trajectory {
        times: vec![0.0],
        states: vec![stepper.state()],
    };
    for step_idx in 1..=n_full {
        stepper.step(step);
        let t = step_idx as f64 * step;
        stepper.check(t)?;
        if step_idx % stride == 0 || (step_idx == n_full && tail == 0.0) {
            if *trajectory.times.last().unwrap() < t {
                trajectory.times.push(t);
                trajectory.states.push(stepper.state());
            }
        }
    }
    if tail > 0.0 {
        stepper.step(tail);
        stepper.check(horizon)?;
        trajectory.times.push(horizon);
        trajectory.states.push(stepper.state());
    }
    Ok(trajectory)
}

/// [`integrate_with`] under the default recording rule.
pub fn integrate(
    model: &Model,
    init: &MeanFieldState,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    integrate_with(model, init, horizon, step, IntegrateOptions::default())
}

/// Why [`steady_state`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCondition {
    /// `max norm of rhs < tolerance`.
    Converged,
    HorizonReached,
}

#[derive(Debug, Clone)]
pub struct SteadyStateOutcome {
    pub state: MeanFieldState,
    pub time: f64,
    pub stopped: StopCondition,
}

/// Integrate until the max-norm of the reduced right-hand side falls below
/// `tolerance`, or until `max_horizon`.
pub fn steady_state(
    model: &Model,
    init: &MeanFieldState,
    tolerance: f64,
    max_horizon: f64,
    step: f64,
) -> Result<SteadyStateOutcome> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    init.validate(1e-6, ENTRY_TOL)?;
    let (n_full, tail) = plan_steps(max_horizon, step)?;
    let mut stepper = Stepper::new(model, init);
    stepper.check(0.0)?;
    for step_idx in 0..n_full {
        if stepper.rhs_max_norm() < tolerance {
            return Ok(SteadyStateOutcome {
                state: stepper.state(),
                time: step_idx as f64 * step,
                stopped: StopCondition::Converged,
            });
        }
        stepper.step(step);
        stepper.check((step_idx + 1) as f64 * step)?;
    }
    if tail > 0.0 {
        stepper.step(tail);
        stepper.check(max_horizon)?;
    }
    let stopped = if stepper.rhs_max_norm() < tolerance {
        StopCondition::Converged
    } else {
        StopCondition::HorizonReached
    };
    Ok(SteadyStateOutcome {
        state: stepper.state(),
        time: max_horizon,
        stopped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::{EdgeInfection, NodeParams, ParamRanges};
    use nalgebra::{dmatrix, dvector};

    fn isolated_node(delta: f64, theta: f64, gamma: f64) -> Model {
        let graph = Graph::new(1, &[]).unwrap();
        let node = NodeParams {
            recovery: dmatrix![delta],
            infectious_internal: dmatrix![0.0],
            vigilant_internal: dmatrix![0.0],
            susceptibility: dvector![gamma],
            vigilance: dvector![theta],
        };
        Model::new(graph, 1, 1, vec![node], vec![]).unwrap()
    }

    #[test]
    fn rhs_recovery_only() {
        let model = isolated_node(0.2, 0.0, 0.0);
        let state =
            MeanFieldState::from_infectious_vigilant(1, 1, 1, vec![0.5], vec![0.0]).unwrap();
        let d = rhs(&model, &state).unwrap();
        assert!((d.dinfectious[0] + 0.1).abs() < 1e-15);
        assert!((d.dvigilant[0] - 0.1).abs() < 1e-15);
        assert!(d.ds[0].abs() < 1e-15);
    }

    #[test]
    fn rhs_single_edge_pressure() {
        let graph = Graph::new(2, &[(0, 1)]).unwrap();
        let node = NodeParams::zeros(1, 1);
        let edges = vec![EdgeInfection {
            from: 0,
            to: 1,
            beta: dvector![0.3],
        }];
        let model = Model::new(graph, 1, 1, vec![node.clone(), node], edges).unwrap();
        let state =
            MeanFieldState::from_infectious_vigilant(2, 1, 1, vec![1.0, 0.0], vec![0.0, 0.0])
                .unwrap();
        let d = rhs(&model, &state).unwrap();
        assert!((d.dinfectious[1] - 0.3).abs() < 1e-15);
        assert!((d.ds[1] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn rhs_vanishes_at_disease_free_point() {
        let model = isolated_node(0.2, 0.5, 0.5);
        let state = MeanFieldState::disease_free(&model).unwrap();
        let d = rhs(&model, &state).unwrap();
        assert!(d.dinfectious[0].abs() < 1e-14);
        assert!(d.dvigilant[0].abs() < 1e-14);
        assert!(d.ds[0].abs() < 1e-14);
    }

    #[test]
    fn conservation_on_random_models() {
        use rand::Rng;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for seed in 0..30u64 {
            let n_nodes = 2 + (seed as usize % 4);
            let graph = Graph::erdos_renyi(n_nodes, 0.5, seed).unwrap();
            let ranges = ParamRanges {
                delta: (0.0, 1.0),
                epsilon: (0.0, 1.0),
                mu: (0.0, 1.0),
                gamma: (0.0, 1.0),
                theta: (0.0, 1.0),
                beta: (0.0, 1.0),
            };
            let m = 1 + (seed as usize % 3);
            let n = 1 + (seed as usize % 2);
            let model = Model::sample_from_ranges(graph, m, n, &ranges, seed).unwrap();
            let state = random_simplex_state(&model, &mut rng);
            let d = rhs(&model, &state).unwrap();
            for i in 0..model.node_count() {
                let total = d.node_sum(i, m, n);
                assert!(total.abs() < 1e-12, "node {i} sum {total}");
            }
        }

        fn random_simplex_state(model: &Model, rng: &mut impl Rng) -> MeanFieldState {
            let (m, n) = (model.m(), model.n());
            let mut infectious = vec![0.0; model.node_count() * m];
            let mut vigilant = vec![0.0; model.node_count() * n];
            for i in 0..model.node_count() {
                let mut weights: Vec<f64> =
                    (0..1 + m + n).map(|_| rng.random::<f64>()).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                for k in 0..m {
                    infectious[i * m + k] = weights[1 + k];
                }
                for l in 0..n {
                    vigilant[i * n + l] = weights[1 + m + l];
                }
            }
            MeanFieldState::from_infectious_vigilant(
                model.node_count(),
                m,
                n,
                infectious,
                vigilant,
            )
            .unwrap()
        }
    }

    #[test]
    fn flow_points_inward_on_the_boundary() {
        // Zero coordinates must have nonnegative derivatives.
        let graph = Graph::new(2, &[(0, 1), (1, 0)]).unwrap();
        let ranges = ParamRanges {
            delta: (0.1, 0.9),
            epsilon: (0.0, 0.7),
            mu: (0.0, 0.7),
            gamma: (0.1, 0.9),
            theta: (0.1, 0.9),
            beta: (0.1, 0.9),
        };
        for seed in 0..20u64 {
            let model = Model::sample_from_ranges(graph.clone(), 2, 2, &ranges, seed).unwrap();
            // Node 0 all-susceptible (I = V = 0), node 1 fully in I^2.
            let state = MeanFieldState::from_infectious_vigilant(
                2,
                2,
                2,
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0; 4],
            )
            .unwrap();
            let d = rhs(&model, &state).unwrap();
            for k in 0..2 {
                assert!(d.dinfectious[k] >= 0.0);
                assert!(d.dvigilant[k] >= 0.0);
            }
            assert!(d.dinfectious[2] >= 0.0); // node 1, I^1 = 0
            assert!(d.ds[1] >= 0.0); // node 1, S = 0
        }
    }

    #[test]
    fn integrate_stays_at_fixed_point() {
        let model = isolated_node(0.2, 0.5, 0.5);
        let init = MeanFieldState::disease_free(&model).unwrap();
        let traj = integrate(&model, &init, 10.0, 0.01).unwrap();
        for st in &traj.states {
            assert!((st.vigilant(0, 0) - init.vigilant(0, 0)).abs() < 1e-9);
            assert!((st.s(0) - init.s(0)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_node_matches_matrix_exponential() {
        // With beta = 0 the node is a linear Markov chain; compare against
        // expm of the (1+m+n)-state generator.
        let model = isolated_node(0.2, 0.4, 0.3);
        let mut init = MeanFieldState::all_susceptible(1, 1, 1);
        init.seed_infection(0, 0, 0.6);
        let traj = integrate(&model, &init, 20.0, 0.01).unwrap();

        // Generator over [S, I, V], column = from-state.
        let g = dmatrix![
            -0.4, 0.0, 0.3;
            0.0, -0.2, 0.0;
            0.4, 0.2, -0.3
        ];
        let p0 = dvector![0.4, 0.6, 0.0];
        let mut worst = 0.0f64;
        for (idx, t) in traj.times.iter().enumerate() {
            let p = crate::linalg::expm_apply(&g, *t, &p0);
            let st = &traj.states[idx];
            worst = worst
                .max((st.s(0) - p[0]).abs())
                .max((st.infectious(0, 0) - p[1]).abs())
                .max((st.vigilant(0, 0) - p[2]).abs());
        }
        assert!(worst < 1e-6, "max abs error {worst}");
    }

    #[test]
    fn infection_probability_shapes() {
        let model = isolated_node(0.2, 0.0, 0.0);
        let init = MeanFieldState::all_susceptible(1, 1, 1);
        let traj = integrate(&model, &init, 1.0, 0.1).unwrap();
        let p = traj.infection_probability();
        assert_eq!(p.len(), traj.times.len());
        assert!(p.iter().all(|row| row[0] == 0.0));
    }

    #[test]
    fn steady_state_returns_immediately_at_fixed_point() {
        let model = isolated_node(0.2, 0.5, 0.5);
        let init = MeanFieldState::disease_free(&model).unwrap();
        let out = steady_state(&model, &init, 1e-8, 50.0, 0.01).unwrap();
        assert_eq!(out.stopped, StopCondition::Converged);
        assert_eq!(out.time, 0.0);
    }

    #[test]
    fn steady_state_without_infection_reaches_sv_equilibrium() {
        let model = isolated_node(0.2, 0.5, 0.5);
        let mut init = MeanFieldState::all_susceptible(1, 1, 1);
        init.seed_infection(0, 0, 0.5);
        let out = steady_state(&model, &init, 1e-9, 500.0, 0.01).unwrap();
        assert_eq!(out.stopped, StopCondition::Converged);
        assert!(out.state.infection_probability(0) < 1e-6);
        assert!((out.state.vigilant(0, 0) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn invalid_step_and_horizon_are_rejected() {
        let model = isolated_node(0.2, 0.5, 0.5);
        let init = MeanFieldState::all_susceptible(1, 1, 1);
        assert!(integrate(&model, &init, 1.0, 0.0).is_err());
        assert!(integrate(&model, &init, 0.05, 0.1).is_err());
    }

    #[test]
    fn default_stride_decimates_long_runs() {
        let model = isolated_node(0.2, 0.5, 0.5);
        let init = MeanFieldState::all_susceptible(1, 1, 1);
        let traj = integrate(&model, &init, 200.0, 0.01).unwrap();
        assert!(traj.times.len() <= 10_002);
        assert_eq!(*traj.times.last().unwrap(), 200.0);
    }
}
