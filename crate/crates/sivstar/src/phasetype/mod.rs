//! Phase-type distributions.
//!
//! A phase-type distribution `(phi, S)` is the absorption time of a
//! continuous-time Markov chain with `p` transient phases: `phi` is the
//! initial distribution over phases and `S` the invertible Metzler
//! sub-generator with nonpositive row sums. The exit-rate vector is
//! `s0 = -S 1`. Phase-type laws are dense in the positive-valued
//! distributions, which is what makes them useful here: a non-exponential
//! transition (say a log-normal incubation period) can be replaced by a small
//! chain of exponential phases without changing the rest of the model.
//!
//! This module evaluates, samples, and fits these distributions, implements
//! the densification construction that turns any `(phi, S)` into an
//! arbitrarily close `(e1, T_r)`, and expands a fitted distribution into
//! extra infectious states of a [`Model`](crate::model::Model).

mod em;

pub use em::{fit_em, fit_ph_em, EmFit, EmOptions};

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::expm;
use crate::model::{EdgeInfection, Model, NodeParams};

/// Tolerances for construction-time validation. Signs may be off by float
/// roundoff when an instance comes out of the EM fit.
const SIGN_TOL: f64 = 1e-9;

/// An absorption-time distribution `(phi, S)`. Immutable and validated:
/// `phi >= 0` summing to 1, `S` Metzler and invertible with nonpositive row
/// sums, exit rates `s0 = -S 1 >= 0` and not identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    initial: DVector<f64>,
    subgenerator: DMatrix<f64>,
    exit: DVector<f64>,
}

impl PhaseType {
    pub fn new(initial: DVector<f64>, subgenerator: DMatrix<f64>) -> Result<Self> {
        let p = initial.len();
        if p == 0 {
            return Err(Error::InvalidInput("phase-type needs at least one phase".into()));
        }
        if subgenerator.nrows() != p || subgenerator.ncols() != p {
            return Err(Error::InvalidInput(format!(
                "subgenerator is {}x{}, expected {p}x{p}",
                subgenerator.nrows(),
                subgenerator.ncols()
            )));
        }
        if initial.iter().any(|&v| v < -SIGN_TOL || !v.is_finite()) {
            return Err(Error::InvalidInput("initial distribution has negative mass".into()));
        }
        if (initial.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "initial distribution sums to {}, expected 1",
                initial.sum()
            )));
        }
        let scale = 1.0 + subgenerator.amax();
        for r in 0..p {
            for c in 0..p {
                let v = subgenerator[(r, c)];
                if !v.is_finite() {
                    return Err(Error::InvalidInput("subgenerator has non-finite entries".into()));
                }
                if r != c && v < -SIGN_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "subgenerator off-diagonal ({r},{c}) = {v} is negative"
                    )));
                }
            }
        }
        let mut exit = DVector::zeros(p);
        for r in 0..p {
            let row_sum: f64 = subgenerator.row(r).sum();
            if row_sum > SIGN_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "subgenerator row {r} sums to {row_sum} > 0"
                )));
            }
            exit[r] = (-row_sum).max(0.0);
        }
        if exit.max() <= 0.0 {
            return Err(Error::InvalidInput(
                "exit-rate vector is identically zero (no absorption)".into(),
            ));
        }
        let lu = subgenerator.clone().lu();
        let max_pivot = (0..p).map(|k| lu.u()[(k, k)].abs()).fold(0.0f64, f64::max);
        let min_pivot = (0..p).map(|k| lu.u()[(k, k)].abs()).fold(f64::INFINITY, f64::min);
        if max_pivot == 0.0 || min_pivot < 1e-12 * max_pivot {
            return Err(Error::InvalidInput("subgenerator is singular".into()));
        }
        Ok(Self {
            initial,
            subgenerator,
            exit,
        })
    }

    /// Exponential law with the given rate, as a single phase.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::InvalidInput("rate must be positive".into()));
        }
        Self::new(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, -rate))
    }

    /// Erlang chain: `phases` sequential phases, each at `rate`.
    pub fn erlang(phases: usize, rate: f64) -> Result<Self> {
        if phases == 0 || !(rate > 0.0) {
            return Err(Error::InvalidInput("need phases >= 1 and rate > 0".into()));
        }
        let mut s = DMatrix::zeros(phases, phases);
        for k in 0..phases {
            s[(k, k)] = -rate;
            if k + 1 < phases {
                s[(k, k + 1)] = rate;
            }
        }
        let mut phi = DVector::zeros(phases);
        phi[0] = 1.0;
        Self::new(phi, s)
    }

    pub fn phases(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn subgenerator(&self) -> &DMatrix<f64> {
        &self.subgenerator
    }

    /// `s0 = -S 1`, clamped at zero where roundoff made it barely negative.
    pub fn exit_rates(&self) -> &DVector<f64> {
        &self.exit
    }

    /// True iff the initial distribution is exactly the first unit vector
    /// (within 1e-12), the form required for model expansion.
    pub fn starts_in_first_phase(&self) -> bool {
        (self.initial[0] - 1.0).abs() <= 1e-12
            && self.initial.iter().skip(1).all(|&v| v.abs() <= 1e-12)
    }

    /// Density `phi' exp(S t) s0` at `t >= 0`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidInput("pdf is defined for t >= 0".into()));
        }
        let e = expm(&(&self.subgenerator * t));
        Ok((self.initial.transpose() * e * &self.exit)[(0, 0)].max(0.0))
    }

    /// Distribution function `1 - phi' exp(S t) 1` at `t >= 0`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidInput("cdf is defined for t >= 0".into()));
        }
        let e = expm(&(&self.subgenerator * t));
        let survival = (self.initial.transpose() * e).sum();
        Ok((1.0 - survival).clamp(0.0, 1.0))
    }

    /// CDF evaluated on a nondecreasing grid of times. Propagates
    /// `phi' exp(S t)` step by step, caching the step propagator per distinct
    /// increment, so uniform grids cost a single matrix exponential.
    pub fn cdf_grid(&self, times: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cache: BTreeMap<u64, DMatrix<f64>> = BTreeMap::new();
        let mut row: RowDVector<f64> = self.initial.transpose();
        let mut current = 0.0f64;
        for &t in times {
            if t < current - 1e-12 {
                return Err(Error::InvalidInput("cdf_grid times must be nondecreasing".into()));
            }
            let dt = (t - current).max(0.0);
            if dt > 0.0 {
                let propagator = cache
                    .entry(dt.to_bits())
                    .or_insert_with(|| expm(&(&self.subgenerator * dt)));
                row *= &*propagator;
                current = t;
            }
            out.push((1.0 - row.sum()).clamp(0.0, 1.0));
        }
        Ok(out)
    }

    /// k-th raw moment `(-1)^k k! phi' S^{-k} 1` via repeated linear solves.
    pub fn moment(&self, order: usize) -> Result<f64> {
        if order == 0 {
            return Err(Error::InvalidInput("moment order must be >= 1".into()));
        }
        let lu = self.subgenerator.clone().lu();
        let mut w = DVector::from_element(self.phases(), 1.0);
        let mut factorial = 1.0f64;
        for k in 1..=order {
            w = lu
                .solve(&w)
                .ok_or_else(|| Error::InvalidInput("subgenerator is singular".into()))?;
            factorial *= k as f64;
        }
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * factorial * (self.initial.transpose() * w)[(0, 0)])
    }

    pub fn mean(&self) -> f64 {
        self.moment(1).expect("validated instance has invertible S")
    }

    /// Draw one absorption time by simulating the phase chain.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let p = self.phases();
        // Initial phase from phi.
        let mut u: f64 = rng.random();
        let mut phase = p - 1;
        let mut acc = 0.0;
        for k in 0..p {
            acc += self.initial[k];
            if u <= acc {
                phase = k;
                break;
            }
        }
        let mut t = 0.0f64;
        loop {
            let total = -self.subgenerator[(phase, phase)];
            // Holding time.
            let draw: f64 = rng.random();
            t += -(1.0 - draw).ln() / total;
            // Jump target: absorption with probability s0/total.
            u = rng.random::<f64>() * total;
            let mut acc = self.exit[phase];
            if u <= acc {
                return t;
            }
            let mut next = phase;
            for l in 0..p {
                if l != phase {
                    acc += self.subgenerator[(phase, l)];
                    if u <= acc {
                        next = l;
                        break;
                    }
                }
            }
            // Rounding can leave u just above the accumulated mass; absorb.
            if next == phase {
                return t;
            }
            phase = next;
        }
    }

    pub fn sample_n(&self, count: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    /// Densification: prepend a fast phase of rate `r`, giving the
    /// `(p+1)`-phase instance with initial vector `e1` and sub-generator
    /// `[[-r, r phi'], [0, S]]`. As `r` grows this converges to `(phi, S)`.
    pub fn densify(&self, r: f64) -> Result<PhaseType> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput("densification rate must be positive".into()));
        }
        let p = self.phases();
        let mut s = DMatrix::zeros(p + 1, p + 1);
        s[(0, 0)] = -r;
        for k in 0..p {
            s[(0, k + 1)] = r * self.initial[k];
            for l in 0..p {
                s[(k + 1, l + 1)] = self.subgenerator[(k, l)];
            }
        }
        let mut phi = DVector::zeros(p + 1);
        phi[0] = 1.0;
        PhaseType::new(phi, s)
    }

    pub fn to_json(&self) -> String {
        let file = PhaseTypeFile {
            p: self.phases(),
            phi: self.initial.iter().copied().collect(),
            s: (0..self.phases())
                .map(|r| self.subgenerator.row(r).iter().copied().collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("phase-type serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PhaseTypeFile = serde_json::from_str(text)?;
        if file.phi.len() != file.p || file.s.len() != file.p {
            return Err(Error::Parse("phi/S dimensions disagree with p".into()));
        }
        if file.s.iter().any(|row| row.len() != file.p) {
            return Err(Error::Parse("S is not square".into()));
        }
        let initial = DVector::from_vec(file.phi);
        let sub = DMatrix::from_fn(file.p, file.p, |r, c| file.s[r][c]);
        Self::new(initial, sub)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct PhaseTypeFile {
    p: usize,
    phi: Vec<f64>,
    #[serde(rename = "S")]
    s: Vec<Vec<f64>>,
}

fn expansion_parts(
    ph: &PhaseType,
) -> Result<(usize, DMatrix<f64>)> {
    if !ph.starts_in_first_phase() {
        return Err(Error::InvalidInput(
            "expansion requires an (e1, S) phase-type; apply densify first".into(),
        ));
    }
    let p = ph.phases();
    let m = p + 1;
    // Internal infectious-transition matrix: phases keep their off-diagonal
    // rates, each phase k gains an absorption rate s0_k into the final state,
    // and the final state has no internal outflow.
    let mut eps = DMatrix::zeros(m, m);
    for k in 0..p {
        for l in 0..p {
            if k != l {
                eps[(k, l)] = ph.subgenerator[(k, l)];
            }
        }
        eps[(k, p)] = ph.exit[k];
    }
    Ok((m, eps))
}

fn expanded_model(
    base: &Model,
    m: usize,
    eps: &DMatrix<f64>,
    recovery_row: impl Fn(usize) -> DVector<f64>,
    beta_final: impl Fn(usize, usize) -> Option<f64>,
) -> Result<Model> {
    let n = base.n();
    let nodes = (0..base.node_count())
        .map(|i| {
            let b = base.node(i);
            let mut recovery = DMatrix::zeros(m, n);
            recovery.row_mut(m - 1).copy_from(&recovery_row(i).transpose());
            NodeParams {
                recovery,
                infectious_internal: eps.clone(),
                vigilant_internal: b.vigilant_internal.clone(),
                susceptibility: b.susceptibility.clone(),
                vigilance: b.vigilance.clone(),
            }
        })
        .collect();
    let mut edges = Vec::new();
    for (from, to) in base.graph().edges() {
        if let Some(value) = beta_final(from, to) {
            let mut beta = DVector::zeros(m);
            beta[m - 1] = value;
            edges.push(EdgeInfection { from, to, beta });
        }
    }
    Model::new(base.graph().clone(), m, n, nodes, edges)
}

/// Expand a phase-type incubation pipeline into the infectious class of
/// `base`: the new model has `m = p + 1` infectious states where `I^1..I^p`
/// are the (non-contagious, non-recovering) phases and `I^m` is the single
/// contagious state. `contagious_beta` is placed on every graph edge and
/// `recovery_from_final` on every final-state recovery rate; the vigilant
/// class and graph come from `base`, whose own infectious parameters are
/// discarded.
///
/// The distribution must be of the form `(e1, S)`; densify a general
/// instance first.
pub fn expand_transition(
    base: &Model,
    ph: &PhaseType,
    contagious_beta: f64,
    recovery_from_final: f64,
) -> Result<Model> {
    if contagious_beta < 0.0 || recovery_from_final < 0.0 {
        return Err(Error::InvalidInput("expansion rates must be nonnegative".into()));
    }
    let (m, eps) = expansion_parts(ph)?;
    let n = base.n();
    expanded_model(
        base,
        m,
        &eps,
        |_| DVector::from_element(n, recovery_from_final),
        |_, _| Some(contagious_beta),
    )
}

/// As [`expand_transition`], but the contagious state inherits the per-edge
/// infection rates and the per-node recovery row of `base`'s last infectious
/// state, preserving heterogeneity.
pub fn expand_transition_inherit(base: &Model, ph: &PhaseType) -> Result<Model> {
    let (m, eps) = expansion_parts(ph)?;
    let last = base.m() - 1;
    expanded_model(
        base,
        m,
        &eps,
        |i| base.node(i).recovery.row(last).transpose(),
        |from, to| base.beta(from, to).map(|beta| beta[last]),
    )
}

/// Build an isolated single-node model whose infectious chain is the
/// expansion of `ph`; useful for studying the pipeline itself (for example
/// first-passage times into the contagious state).
pub fn expansion_chain_model(ph: &PhaseType) -> Result<Model> {
    let graph = Graph::new(1, &[])?;
    let mut node = NodeParams::zeros(1, 1);
    node.vigilance[0] = 0.0;
    let base = Model::new(graph, 1, 1, vec![node], vec![])?;
    expand_transition(&base, ph, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_statistic, mean};
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponential_pdf_cdf() {
        let ph = PhaseType::exponential(1.0).unwrap();
        assert!((ph.pdf(0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((ph.cdf(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(ph.cdf(0.0).unwrap(), 0.0);
        assert!(ph.pdf(-0.5).is_err());
        for t in [0.3, 1.7, 4.0] {
            assert!((ph.pdf(t).unwrap() - (-t as f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn erlang2_matches_closed_form() {
        let lambda = 0.8;
        let ph = PhaseType::erlang(2, lambda).unwrap();
        for i in 0..60 {
            let t = 0.25 * i as f64;
            let expected = lambda * lambda * t * (-lambda * t).exp();
            assert!((ph.pdf(t).unwrap() - expected).abs() < 1e-10, "t = {t}");
        }
        assert!((ph.mean() - 2.0 / lambda).abs() < 1e-12);
    }

    #[test]
    fn moments_of_exponential() {
        let ph = PhaseType::exponential(2.0).unwrap();
        assert!((ph.moment(1).unwrap() - 0.5).abs() < 1e-14);
        assert!((ph.moment(2).unwrap() - 0.5).abs() < 1e-14); // E[T^2] = 2/lambda^2
        assert!(ph.moment(0).is_err());
    }

    #[test]
    fn cdf_is_monotone_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let ph = random_instance(&mut rng, 4);
            let times: Vec<f64> = (0..50).map(|i| 0.2 * i as f64).collect();
            let cdf = ph.cdf_grid(&times).unwrap();
            for w in cdf.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            assert!(cdf[0] < 1e-12);
        }
    }

    #[test]
    fn cdf_grid_agrees_with_pointwise_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ph = random_instance(&mut rng, 3);
        let times = [0.0, 0.4, 0.9, 2.3, 7.0];
        let grid = ph.cdf_grid(&times).unwrap();
        for (&t, &g) in times.iter().zip(&grid) {
            assert!((ph.cdf(t).unwrap() - g).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_are_nonnegative_and_exponential_passes_ks() {
        let ph = PhaseType::exponential(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = ph.sample_n(10_000, &mut rng);
        assert!(samples.iter().all(|&t| t >= 0.0));
        let d = ks_statistic(&samples, |t| 1.0 - (-t).exp());
        // One-sample KS critical value at alpha = 0.01: 1.628 / sqrt(n).
        assert!(d < 1.628 / (samples.len() as f64).sqrt(), "KS = {d}");
    }

    #[test]
    fn erlang_sample_mean_close_to_moment() {
        let ph = PhaseType::erlang(2, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let samples = ph.sample_n(20_000, &mut rng);
        let mu = mean(&samples);
        assert!((mu - ph.mean()).abs() / ph.mean() < 0.02, "mean {mu}");
    }

    #[test]
    fn densify_structure_and_mean() {
        let ph = PhaseType::exponential(0.5).unwrap();
        let dense = ph.densify(10.0).unwrap();
        assert_eq!(dense.phases(), 2);
        assert_eq!(dense.subgenerator().clone(), dmatrix![-10.0, 10.0; 0.0, -0.5]);
        // Hypoexponential mean: 1/r + 1/lambda.
        assert!((dense.mean() - (0.1 + 2.0)).abs() < 1e-12);
        // The mean offset decreases as r grows.
        let denser = ph.densify(100.0).unwrap();
        assert!(denser.mean() < dense.mean());
        assert!(ph.densify(0.0).is_err());
    }

    #[test]
    fn densify_converges_in_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let ph = random_instance(&mut rng, 3);
            let scale = ph
                .subgenerator()
                .diagonal()
                .iter()
                .fold(0.0f64, |a, &d| a.max(d.abs()));
            let horizon = ph.mean() + 8.0 * ph.mean();
            let times: Vec<f64> = (0..2000).map(|i| horizon * i as f64 / 1999.0).collect();
            let base_cdf = ph.cdf_grid(&times).unwrap();
            let mut last = f64::INFINITY;
            for mult in [10.0, 100.0, 1000.0] {
                let dense = ph.densify(mult * scale).unwrap();
                let cdf = dense.cdf_grid(&times).unwrap();
                let d = base_cdf
                    .iter()
                    .zip(&cdf)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(d < last + 1e-9, "KS not decreasing: {d} after {last}");
                last = d;
            }
            assert!(last < 0.005, "final KS {last}");
        }
    }

    #[test]
    fn construction_rejects_bad_instances() {
        // Initial mass off the simplex.
        assert!(PhaseType::new(dvector![0.5], dmatrix![-1.0]).is_err());
        // Negative off-diagonal.
        assert!(PhaseType::new(dvector![0.5, 0.5], dmatrix![-1.0, -0.1; 0.0, -1.0]).is_err());
        // Positive row sum.
        assert!(PhaseType::new(dvector![1.0, 0.0], dmatrix![-1.0, 2.0; 0.0, -1.0]).is_err());
        // No absorption anywhere (also singular).
        assert!(PhaseType::new(dvector![0.5, 0.5], dmatrix![-1.0, 1.0; 1.0, -1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ph = PhaseType::erlang(3, 1.3).unwrap();
        let text = ph.to_json();
        let back = PhaseType::from_json(&text).unwrap();
        assert_eq!(ph, back);
    }

    #[test]
    fn expand_exponential_gives_classic_seiv_shape() {
        let graph = Graph::new(2, &[(0, 1), (1, 0)]).unwrap();
        let mut node = NodeParams::zeros(1, 1);
        node.vigilance[0] = 0.5;
        node.susceptibility[0] = 0.5;
        let base = Model::homogeneous(graph, 1, 1, node, dvector![0.3]).unwrap();
        let ph = PhaseType::exponential(0.4).unwrap();
        let model = expand_transition(&base, &ph, 0.25, 0.2).unwrap();
        assert_eq!(model.m(), 2);
        let p = model.node(0);
        assert_eq!(p.infectious_internal[(0, 1)], 0.4);
        assert_eq!(p.recovery[(0, 0)], 0.0);
        assert_eq!(p.recovery[(1, 0)], 0.2);
        let beta = model.beta(0, 1).unwrap();
        assert_eq!(beta[0], 0.0);
        assert_eq!(beta[1], 0.25);
    }

    #[test]
    fn expand_ten_phases_gives_thirteen_states() {
        let graph = Graph::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let mut node = NodeParams::zeros(1, 1);
        node.vigilance[0] = 0.5;
        node.susceptibility[0] = 0.5;
        let base = Model::homogeneous(graph, 1, 1, node, dvector![0.3]).unwrap();
        let ph = PhaseType::erlang(10, 0.8).unwrap();
        let model = expand_transition(&base, &ph, 0.25, 0.2).unwrap();
        // 1 susceptible + 11 infectious + 1 vigilant = 13 states per node.
        assert_eq!(1 + model.m() + model.n(), 13);
        assert!(model.validate().ok);
    }

    #[test]
    fn expand_requires_e1_initial() {
        let graph = Graph::new(1, &[]).unwrap();
        let base = Model::new(graph, 1, 1, vec![NodeParams::zeros(1, 1)], vec![]).unwrap();
        let ph = PhaseType::new(
            dvector![0.5, 0.5],
            dmatrix![-1.0, 0.5; 0.0, -2.0],
        )
        .unwrap();
        let err = expand_transition(&base, &ph, 0.1, 0.1).unwrap_err();
        assert!(err.to_string().contains("densify"));
        assert!(expand_transition(&base, &ph.densify(50.0).unwrap(), 0.1, 0.1).is_ok());
    }

    #[test]
    fn inherit_expansion_preserves_heterogeneous_rates() {
        let graph = Graph::new(2, &[(0, 1)]).unwrap();
        let mut n0 = NodeParams::zeros(1, 1);
        n0.recovery[(0, 0)] = 0.15;
        n0.susceptibility[0] = 0.5;
        n0.vigilance[0] = 0.5;
        let mut n1 = n0.clone();
        n1.recovery[(0, 0)] = 0.35;
        let edges = vec![EdgeInfection {
            from: 0,
            to: 1,
            beta: dvector![0.22],
        }];
        let base = Model::new(graph, 1, 1, vec![n0, n1], edges).unwrap();
        let ph = PhaseType::erlang(2, 1.0).unwrap();
        let model = expand_transition_inherit(&base, &ph).unwrap();
        assert_eq!(model.m(), 3);
        assert_eq!(model.node(0).recovery[(2, 0)], 0.15);
        assert_eq!(model.node(1).recovery[(2, 0)], 0.35);
        assert_eq!(model.beta(0, 1).unwrap()[2], 0.22);
    }

    /// Random valid instance with bounded rate spread for tests.
    pub(super) fn random_instance(rng: &mut impl Rng, max_phases: usize) -> PhaseType {
        let p = 1 + rng.random_range(0..max_phases);
        loop {
            let mut s = DMatrix::zeros(p, p);
            for k in 0..p {
                for l in 0..p {
                    if k != l && rng.random::<f64>() < 0.6 {
                        s[(k, l)] = 0.2 + rng.random::<f64>();
                    }
                }
            }
            for k in 0..p {
                let off: f64 = s.row(k).sum();
                let exit = if k == p - 1 || rng.random::<f64>() < 0.5 {
                    0.3 + rng.random::<f64>()
                } else {
                    0.0
                };
                s[(k, k)] = -(off + exit);
            }
            let mut phi = DVector::zeros(p);
            let mut total = 0.0;
            for k in 0..p {
                let w: f64 = rng.random();
                phi[k] = w;
                total += w;
            }
            phi /= total;
            if let Ok(ph) = PhaseType::new(phi, s) {
                return ph;
            }
        }
    }
}
