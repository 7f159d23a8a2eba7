//! Expectation-maximization fitting of phase-type distributions to samples.
//!
//! Standard complete-data formulation: the E-step computes expected start
//! counts, per-phase sojourn times, jump counts, and absorption counts given
//! each observed absorption time; the M-step is the closed-form rate update.
//!
//! The E-step integrals `int_0^y exp(S(y-u)) s0 phi' exp(Su) du` are
//! evaluated by uniformization rather than per-sample blocked matrix
//! exponentials: with `P = I + S/q`, `q = max |S_kk|`, every conditional
//! expectation reduces to Poisson-weighted sums of the sample-independent
//! sequences `phi' P^v` and `P^v s0`, so one iteration over 10^4 samples
//! costs a few scalar operations per sample per Poisson term. Zero entries
//! of `phi` and `S` are fixed points of the update, so initializing with
//! `phi = e1` fits within the (e1, S) family that model expansion requires.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::derive_seed;

use super::PhaseType;

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    pub max_iterations: usize,
    /// Stop when the relative log-likelihood improvement drops below this.
    pub rel_tol: f64,
    /// Independent random initializations; the best final likelihood wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-8,
            restarts: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub ph: PhaseType,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Log-likelihood before each update; nondecreasing.
    pub ll_trace: Vec<f64>,
}

/// Fit a `phases`-phase distribution to positive samples.
///
/// Requires at least 100 samples (the M-step divides by empirical sojourn
/// masses; tiny datasets produce meaningless rates).
pub fn fit_em(samples: &[f64], phases: usize, options: EmOptions) -> Result<EmFit> {
    if phases == 0 {
        return Err(Error::InvalidInput("phases must be >= 1".into()));
    }
    if samples.len() < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
        return Err(Error::InvalidInput("samples must be positive and finite".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(0.0f64, f64::max);
    if hi - lo <= 1e-12 * hi {
        return Err(Error::FitFailed("degenerate samples (all equal)".into()));
    }

    let runs: Vec<Result<EmFit>> = (0..options.restarts.max(1))
        .into_par_iter()
        .map(|restart| single_run(samples, phases, options, restart as u64))
        .collect();
    let mut best: Option<EmFit> = None;
    let mut first_err: Option<Error> = None;
    for run in runs {
        match run {
            Ok(fit) => {
                if best
                    .as_ref()
                    .map(|b| fit.log_likelihood > b.log_likelihood)
                    .unwrap_or(true)
                {
                    best = Some(fit);
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or_else(|| Error::FitFailed("all restarts failed".into())))
}

/// Spec-shaped convenience wrapper over [`fit_em`].
pub fn fit_ph_em(samples: &[f64], phases: usize, max_iterations: usize, seed: u64) -> Result<EmFit> {
    fit_em(
        samples,
        phases,
        EmOptions {
            max_iterations,
            seed,
            ..EmOptions::default()
        },
    )
}

fn single_run(samples: &[f64], p: usize, options: EmOptions, restart: u64) -> Result<EmFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, restart));
    let sample_mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let (mut phi, mut sub) = initialize(p, sample_mean, &mut rng);

    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0usize;
    for iter in 0..options.max_iterations.max(1) {
        iterations = iter + 1;
        let stats = e_step(samples, &phi, &sub)?;
        trace.push(stats.log_likelihood);
        if iter > 0 {
            let prev = trace[iter - 1];
            let improvement = stats.log_likelihood - prev;
            if improvement < options.rel_tol * prev.abs().max(1.0) {
                break;
            }
        }
        m_step(samples.len(), &stats, &mut phi, &mut sub);
    }

    let ph = PhaseType::new(phi, sub)
        .map_err(|e| Error::FitFailed(format!("EM produced an invalid instance: {e}")))?;
    Ok(EmFit {
        ph,
        log_likelihood: *trace.last().expect("at least one iteration ran"),
        iterations,
        ll_trace: trace,
    })
}

/// Coxian-like initialization: `phi = e1`, a forward bidiagonal backbone with
/// total rate near `p / mean`, plus small random fill on the remaining
/// off-diagonal entries so the update can explore the full family.
fn initialize(p: usize, sample_mean: f64, rng: &mut impl Rng) -> (DVector<f64>, DMatrix<f64>) {
    let base_rate = p as f64 / sample_mean;
    let mut sub = DMatrix::zeros(p, p);
    for k in 0..p {
        let rate = base_rate * rng.random_range(0.6..1.4);
        let mut weights = vec![0.0; p + 1]; // positions 0..p are phases, p is absorption
        if k + 1 < p {
            weights[k + 1] = 0.8;
            weights[p] = 0.05;
        } else {
            weights[p] = 0.85;
        }
        for l in 0..p {
            if l != k && l != k + 1 {
                weights[l] = 0.15 / p as f64 * rng.random_range(0.2..1.0);
            }
        }
        let total: f64 = weights.iter().sum();
        for l in 0..p {
            if l != k {
                sub[(k, l)] = rate * weights[l] / total;
            }
        }
        sub[(k, k)] = -rate;
    }
    let mut phi = DVector::zeros(p);
    phi[0] = 1.0;
    (phi, sub)
}

struct EStats {
    log_likelihood: f64,
    /// sum over samples of b(y)/f(y) (posterior start weights per phase,
    /// before multiplying by phi).
    start_weight: DVector<f64>,
    /// sum over samples of a(y)/f(y) (absorption weights, before s0).
    absorb_weight: DVector<f64>,
    /// sum over samples of G(y)/f(y); diagonal = expected sojourn times,
    /// entry (l, k) feeds the k->l jump count via S_kl.
    sojourn: DMatrix<f64>,
}

/// Truncation point for a Poisson(lambda) tail below ~1e-18.
fn poisson_truncation(lambda: f64) -> usize {
    (lambda + 12.0 * (lambda + 1.0).sqrt() + 30.0).ceil() as usize
}

/// Normalized Poisson pmf values 0..=upto, computed by recurrence from the
/// mode so large means neither under- nor overflow.
fn poisson_weights(lambda: f64, upto: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.resize(upto + 1, 0.0);
    if lambda <= 0.0 {
        buf[0] = 1.0;
        return;
    }
    let mode = (lambda.floor() as usize).min(upto);
    buf[mode] = 1.0;
    for v in mode + 1..=upto {
        buf[v] = buf[v - 1] * lambda / v as f64;
    }
    for v in (0..mode).rev() {
        buf[v] = buf[v + 1] * (v + 1) as f64 / lambda;
    }
    let total: f64 = buf.iter().sum();
    for w in buf.iter_mut() {
        *w /= total;
    }
}

fn e_step(samples: &[f64], phi: &DVector<f64>, sub: &DMatrix<f64>) -> Result<EStats> {
    let p = phi.len();
    let q = (0..p).map(|k| sub[(k, k)].abs()).fold(0.0f64, f64::max);
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::FitFailed("sub-generator diagonal collapsed".into()));
    }
    let exit = {
        let mut e = DVector::zeros(p);
        for k in 0..p {
            e[k] = (-sub.row(k).sum()).max(0.0);
        }
        e
    };
    // Uniformized jump matrix.
    let jump = {
        let mut m = sub / q;
        for k in 0..p {
            m[(k, k)] += 1.0;
        }
        m.map(|v| v.max(0.0))
    };

    let y_max = samples.iter().copied().fold(0.0f64, f64::max);
    let k_max = poisson_truncation(q * y_max) + 1;
    if k_max > 3_000_000 {
        return Err(Error::FitFailed(format!(
            "uniformization truncation exploded (q * y_max = {})",
            q * y_max
        )));
    }

    // Sample-independent sequences a_v = phi' P^v, b_v = P^v s0, c_v = a_v s0.
    let mut a_rows: Vec<RowDVector<f64>> = Vec::with_capacity(k_max + 1);
    let mut b_cols: Vec<DVector<f64>> = Vec::with_capacity(k_max + 1);
    let mut c = Vec::with_capacity(k_max + 1);
    a_rows.push(phi.transpose());
    b_cols.push(exit.clone());
    c.push((phi.transpose() * &exit)[(0, 0)]);
    for v in 1..=k_max {
        let a = &a_rows[v - 1] * &jump;
        let b = &jump * &b_cols[v - 1];
        c.push((&a * &exit)[(0, 0)]);
        a_rows.push(a);
        b_cols.push(b);
    }

    // Accumulate Poisson weights over samples: u[v] = sum_i pois_v(q y_i) / f(y_i).
    let mut u = vec![0.0f64; k_max + 2];
    let mut pois: Vec<f64> = Vec::new();
    let mut log_likelihood = 0.0f64;
    for &y in samples {
        let lambda = q * y;
        let keep = (poisson_truncation(lambda) + 1).min(k_max);
        poisson_weights(lambda, keep, &mut pois);
        let mut f = 0.0;
        for v in 0..keep {
            f += pois[v] * c[v];
        }
        let f = f.max(1e-300);
        log_likelihood += f.ln();
        for v in 0..=keep {
            u[v] += pois[v] / f;
        }
    }

    let mut start_weight = DVector::zeros(p);
    let mut absorb_weight = DVector::zeros(p);
    for v in 0..=k_max {
        if u[v] == 0.0 {
            continue;
        }
        for k in 0..p {
            start_weight[k] += u[v] * b_cols[v][k];
            absorb_weight[k] += u[v] * a_rows[v][k];
        }
    }

    // sojourn = (1/q) sum_{v,w} u[v+w+1] b_v a_w.
    let mut sojourn = DMatrix::zeros(p, p);
    let mut r = vec![0.0f64; p];
    for v in 0..=k_max {
        r.iter_mut().for_each(|x| *x = 0.0);
        let mut any = false;
        for w in 0..=k_max {
            let idx = v + w + 1;
            if idx > k_max + 1 {
                break;
            }
            if u[idx] != 0.0 {
                for l in 0..p {
                    r[l] += u[idx] * a_rows[w][l];
                }
                any = true;
            }
        }
        if any {
            for k in 0..p {
                let b = b_cols[v][k];
                if b != 0.0 {
                    for l in 0..p {
                        sojourn[(k, l)] += b * r[l];
                    }
                }
            }
        }
    }
    sojourn /= q;

    Ok(EStats {
        log_likelihood,
        start_weight,
        absorb_weight,
        sojourn,
    })
}

fn m_step(sample_count: usize, stats: &EStats, phi: &mut DVector<f64>, sub: &mut DMatrix<f64>) {
    let p = phi.len();
    // Start probabilities: posterior start counts / sample count. Zero
    // entries stay zero, so an e1 initialization stays e1.
    let mut total = 0.0;
    for k in 0..p {
        phi[k] *= stats.start_weight[k] / sample_count as f64;
        total += phi[k];
    }
    if total > 0.0 {
        *phi /= total;
    }

    let exit: Vec<f64> = (0..p).map(|k| (-sub.row(k).sum()).max(0.0)).collect();
    for k in 0..p {
        let z = stats.sojourn[(k, k)];
        if !(z > 1e-300) {
            continue; // phase never visited: leave its row untouched
        }
        let mut outflow = 0.0;
        for l in 0..p {
            if l != k {
                let jumps = sub[(k, l)] * stats.sojourn[(l, k)];
                sub[(k, l)] = jumps / z;
                outflow += sub[(k, l)];
            }
        }
        let absorb = exit[k] * stats.absorb_weight[k] / z;
        sub[(k, k)] = -(outflow + absorb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{lognormal_params_from_mean_sd, mean, std_dev};
    use rand_distr::{Distribution, LogNormal};

    fn lognormal_samples(count: usize, target_mean: f64, target_sd: f64, seed: u64) -> Vec<f64> {
        let (mu, sigma) = lognormal_params_from_mean_sd(target_mean, target_sd).unwrap();
        let dist = LogNormal::new(mu, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| dist.sample(&mut rng)).collect()
    }

    #[test]
    fn single_phase_fit_recovers_exponential_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let exp = rand_distr::Exp::new(1.0f64).unwrap();
        let samples: Vec<f64> = (0..10_000).map(|_| exp.sample(&mut rng)).collect();
        let fit = fit_ph_em(&samples, 1, 200, 7).unwrap();
        let rate = -fit.ph.subgenerator()[(0, 0)];
        assert!((rate - 1.0).abs() < 0.03, "fitted rate {rate}");
        // Exponential MLE is 1/sample-mean; EM must land there.
        assert!((rate - 1.0 / mean(&samples)).abs() < 1e-6);
    }

    #[test]
    fn log_likelihood_is_nondecreasing() {
        let samples = lognormal_samples(500, 12.7, 4.31, 5);
        let fit = fit_em(
            &samples,
            3,
            EmOptions {
                max_iterations: 60,
                restarts: 2,
                seed: 1,
                ..EmOptions::default()
            },
        )
        .unwrap();
        for w in fit.ll_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "ll decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fit_recovers_erlang_moments() {
        // A 3-phase target the family contains exactly.
        let target = PhaseType::erlang(3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let samples = target.sample_n(4_000, &mut rng);
        let fit = fit_em(
            &samples,
            3,
            EmOptions {
                max_iterations: 300,
                restarts: 3,
                seed: 2,
                ..EmOptions::default()
            },
        )
        .unwrap();
        let fitted_mean = fit.ph.mean();
        let m2 = fit.ph.moment(2).unwrap();
        let fitted_sd = (m2 - fitted_mean * fitted_mean).sqrt();
        let sample_mean = mean(&samples);
        let sample_sd = std_dev(&samples);
        assert!(
            (fitted_mean - sample_mean).abs() / sample_mean < 0.05,
            "mean {fitted_mean} vs {sample_mean}"
        );
        assert!(
            (fitted_sd - sample_sd).abs() / sample_sd < 0.15,
            "sd {fitted_sd} vs {sample_sd}"
        );
        assert!(fit.ph.starts_in_first_phase());
    }

    #[test]
    fn rejects_bad_inputs() {
        let samples = vec![1.0; 200];
        assert!(matches!(fit_ph_em(&samples, 2, 10, 0), Err(Error::FitFailed(_))));
        let few = vec![1.0, 2.0];
        assert!(fit_ph_em(&few, 2, 10, 0).is_err());
        let ok = lognormal_samples(200, 5.0, 2.0, 1);
        assert!(fit_ph_em(&ok, 0, 10, 0).is_err());
    }

    #[test]
    fn poisson_weights_sum_to_one_and_match_pmf() {
        let mut buf = Vec::new();
        for lambda in [0.3, 4.0, 90.0, 800.0] {
            let upto = poisson_truncation(lambda);
            poisson_weights(lambda, upto, &mut buf);
            let total: f64 = buf.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            if lambda < 30.0 {
                // Direct pmf check where e^-lambda is representable comfortably.
                let mut pmf = (-lambda).exp();
                for (v, &w) in buf.iter().enumerate() {
                    assert!((w - pmf).abs() < 1e-12, "lambda {lambda}, v {v}");
                    pmf *= lambda / (v + 1) as f64;
                }
            }
        }
    }
}
