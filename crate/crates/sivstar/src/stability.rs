//! Stability analysis of the disease-free equilibrium.
//!
//! The mean-field dynamics split as `[x; y]' = W [x; y] + H` with `x` the
//! stacked infectious probabilities and `y` the stacked vigilant
//! probabilities. This module assembles the blocks of `W`, computes the
//! vigilant-class equilibrium `y* = -W_yy^{-1} H_y`, forms the linearization
//! block `Q_xx` around `(x, y) = (0, y*)`, and decides Hurwitz stability of
//! the Metzler blocks.
//!
//! Two verdicts are produced: `W_xx` Hurwitz is sufficient for global
//! stability of the disease-free states; `Q_xx` Hurwitz is necessary and
//! sufficient for local stability.
//!
//! Block conventions. `W_xx` is an N*m square block matrix: diagonal block i
//! covers node i's internal infectious transitions and recovery outflow; the
//! (i, j) off-diagonal block is nonzero only for j in the in-neighborhood of
//! i and carries the beta row that feeds `I^1`. Internal-transition blocks
//! are oriented so that entry (k, k') multiplies the source state `I^{k'}`,
//! i.e. the transpose of the rate matrix appears, matching the ODEs.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{degree_matrix, Model};

/// Relative pivot threshold below which a factorization counts as singular.
const SINGULARITY_RTOL: f64 = 1e-12;

/// Off-diagonal tolerance for the Metzler precondition.
const METZLER_TOL: f64 = 1e-12;

fn internal_block(rates: &DMatrix<f64>) -> DMatrix<f64> {
    // rates^T - deg(rates): entry (k, k') = rate k' -> k for k != k',
    // diagonal = -(total outflow of k).
    rates.transpose() - degree_matrix(rates)
}

/// N*m x N*m infectious-to-infectious block of the linear part.
pub fn assemble_wxx(model: &Model) -> DMatrix<f64> {
    let (big_n, m) = (model.node_count(), model.m());
    let mut w = DMatrix::zeros(big_n * m, big_n * m);
    for i in 0..big_n {
        let p = model.node(i);
        let diag = internal_block(&p.infectious_internal) - degree_matrix(&p.recovery);
        w.view_mut((i * m, i * m), (m, m)).copy_from(&diag);
        for (j, beta) in model.incoming(i) {
            for k in 0..m {
                w[(i * m, j * m + k)] = beta[k];
            }
        }
    }
    w
}

/// N*n x N*n block-diagonal vigilant-to-vigilant block.
pub fn assemble_wyy(model: &Model) -> DMatrix<f64> {
    let (big_n, n) = (model.node_count(), model.n());
    let mut w = DMatrix::zeros(big_n * n, big_n * n);
    for i in 0..big_n {
        let p = model.node(i);
        let mut block = internal_block(&p.vigilant_internal);
        for l in 0..n {
            for l2 in 0..n {
                block[(l, l2)] -= p.vigilance[l];
            }
            block[(l, l)] -= p.susceptibility[l];
        }
        w.view_mut((i * n, i * n), (n, n)).copy_from(&block);
    }
    w
}

/// N*n x N*m block-diagonal infectious-to-vigilant block.
pub fn assemble_wyx(model: &Model) -> DMatrix<f64> {
    let (big_n, m, n) = (model.node_count(), model.m(), model.n());
    let mut w = DMatrix::zeros(big_n * n, big_n * m);
    for i in 0..big_n {
        let p = model.node(i);
        let mut block = p.recovery.transpose();
        for l in 0..n {
            for k in 0..m {
                block[(l, k)] -= p.vigilance[l];
            }
        }
        w.view_mut((i * n, i * m), (n, m)).copy_from(&block);
    }
    w
}

/// Unique equilibrium of the vigilant class at x = 0, one length-n vector per
/// node, solving `W_yy y* + H_y = 0` blockwise.
pub fn vigilant_equilibrium(model: &Model) -> Result<Vec<DVector<f64>>> {
    let n = model.n();
    let mut out = Vec::with_capacity(model.node_count());
    for i in 0..model.node_count() {
        let p = model.node(i);
        let mut block = internal_block(&p.vigilant_internal);
        for l in 0..n {
            for l2 in 0..n {
                block[(l, l2)] -= p.vigilance[l];
            }
            block[(l, l)] -= p.susceptibility[l];
        }
        let lu = block.clone().lu();
        let max_pivot = (0..n).map(|k| lu.u()[(k, k)].abs()).fold(0.0f64, f64::max);
        let min_pivot = (0..n).map(|k| lu.u()[(k, k)].abs()).fold(f64::INFINITY, f64::min);
        if max_pivot == 0.0 || min_pivot < SINGULARITY_RTOL * max_pivot {
            return Err(Error::EquilibriumUndefined(format!(
                "vigilant block of node {i} is singular (absorbing vigilant class)"
            )));
        }
        let rhs = -&p.vigilance;
        let ybar = lu
            .solve(&rhs)
            .ok_or_else(|| Error::EquilibriumUndefined(format!("solve failed for node {i}")))?;
        let total: f64 = ybar.sum();
        if ybar.iter().any(|&v| !(-1e-8..=1.0 + 1e-8).contains(&v)) || total > 1.0 + 1e-8 {
            return Err(Error::EquilibriumUndefined(format!(
                "equilibrium of node {i} left the probability simplex"
            )));
        }
        out.push(ybar);
    }
    Ok(out)
}

/// Stack per-node equilibrium vectors into a single N*n vector.
pub fn stack_equilibrium(ystar: &[DVector<f64>]) -> DVector<f64> {
    let n = ystar.first().map_or(0, |v| v.len());
    let mut out = DVector::zeros(ystar.len() * n);
    for (i, v) in ystar.iter().enumerate() {
        out.rows_mut(i * n, n).copy_from(v);
    }
    out
}

/// Linearization block around the disease-free point: same as `W_xx` except
/// node i's incoming beta rows are scaled by `(1 - sum_l ybar_i^l)`.
pub fn assemble_qxx(model: &Model, ystar: &[DVector<f64>]) -> DMatrix<f64> {
    let (big_n, m) = (model.node_count(), model.m());
    let mut q = assemble_wxx(model);
    for i in 0..big_n {
        let scale = 1.0 - ystar[i].sum();
        for (j, _) in model.incoming(i) {
            for k in 0..m {
                q[(i * m, j * m + k)] *= scale;
            }
        }
    }
    q
}

/// True iff all off-diagonal entries are >= -tolerance.
pub fn is_metzler(q: &DMatrix<f64>) -> bool {
    let n = q.nrows();
    (0..n).all(|r| (0..n).all(|c| r == c || q[(r, c)] >= -METZLER_TOL))
}

/// Hurwitz decision for a Metzler matrix by linear solve: factorize Q, treat
/// a pivot below `1e-12 * max pivot` as singular (not Hurwitz), otherwise
/// solve `Q z = -1` and report Hurwitz iff `z > 0` componentwise. For Metzler
/// matrices this is equivalent to `Q^{-1} <= 0`, and `z` certifies `Q z < 0`.
pub fn is_metzler_hurwitz(q: &DMatrix<f64>) -> Result<bool> {
    Ok(hurwitz_certificate(q)?.is_some())
}

/// As [`is_metzler_hurwitz`], returning the positive certificate vector `z`
/// (with `Q z = -1`) when the verdict is true.
pub fn hurwitz_certificate(q: &DMatrix<f64>) -> Result<Option<DVector<f64>>> {
    if q.nrows() != q.ncols() {
        return Err(Error::InvalidInput("Hurwitz test requires a square matrix".into()));
    }
    if !is_metzler(q) {
        return Err(Error::InvalidInput(
            "Hurwitz test by linear solve requires a Metzler matrix".into(),
        ));
    }
    let n = q.nrows();
    let lu = q.clone().lu();
    let max_pivot = (0..n).map(|k| lu.u()[(k, k)].abs()).fold(0.0f64, f64::max);
    let min_pivot = (0..n).map(|k| lu.u()[(k, k)].abs()).fold(f64::INFINITY, f64::min);
    if max_pivot == 0.0 || min_pivot < SINGULARITY_RTOL * max_pivot {
        return Ok(None); // singular: cannot be Hurwitz
    }
    let rhs = DVector::from_element(n, -1.0);
    let z = match lu.solve(&rhs) {
        Some(z) => z,
        None => return Ok(None),
    };
    if z.iter().all(|&v| v > 0.0) {
        Ok(Some(z))
    } else {
        Ok(None)
    }
}

fn is_irreducible_pattern(q: &DMatrix<f64>) -> bool {
    // Strong connectivity of the sparsity digraph via forward+backward DFS
    // from vertex 0.
    let n = q.nrows();
    if n <= 1 {
        return true;
    }
    let reach = |transpose: bool| -> bool {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let entry = if transpose { q[(v, u)] } else { q[(u, v)] };
                if u != v && entry != 0.0 && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    };
    reach(false) && reach(true)
}

/// Largest real part among the eigenvalues of a Metzler matrix.
///
/// Shifts by `c = 1 + max |q_ii|` so `B = Q + cI` is nonnegative with positive
/// diagonal, then runs power iteration with Collatz–Wielandt ratio brackets
/// until the bracket width drops below `tolerance`; the abscissa is
/// `rho(B) - c`. A reducible matrix gets a uniform `1e-12` perturbation on
/// its zero off-diagonal entries (for this computation only) so the iteration
/// has a single dominant class to converge to.
pub fn spectral_abscissa(q: &DMatrix<f64>, tolerance: f64, max_iterations: usize) -> Result<f64> {
    if q.nrows() != q.ncols() {
        return Err(Error::InvalidInput("spectral abscissa requires a square matrix".into()));
    }
    if !is_metzler(q) {
        return Err(Error::InvalidInput(
            "spectral abscissa by power iteration requires a Metzler matrix".into(),
        ));
    }
    let n = q.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let mut b = q.clone();
    if !is_irreducible_pattern(q) {
        for r in 0..n {
            for c in 0..n {
                if r != c && b[(r, c)] == 0.0 {
                    b[(r, c)] = 1e-12;
                }
            }
        }
    }
    let shift = 1.0 + (0..n).map(|k| q[(k, k)].abs()).fold(0.0f64, f64::max);
    for k in 0..n {
        b[(k, k)] += shift;
    }

    let mut x = DVector::from_element(n, 1.0);
    let mut estimate = 0.0;
    // Detect a stalled bracket: clustered dominant eigenvalues make the
    // ratio bounds converge arbitrarily slowly, so after a stretch of
    // negligible progress we finish by bisection instead.
    let stall_window = 2000.min(max_iterations / 2).max(1);
    let mut width_at_last_check = f64::INFINITY;
    for iter in 0..max_iterations {
        let bx = &b * &x;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..n {
            let ratio = bx[k] / x[k];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        estimate = 0.5 * (lo + hi) - shift;
        if hi - lo <= tolerance {
            return Ok(estimate);
        }
        if iter % stall_window == stall_window - 1 {
            let width = hi - lo;
            if width > 0.99 * width_at_last_check {
                // The Collatz-Wielandt bounds are rigorous: lo <= rho(B) <= hi.
                return abscissa_by_bisection(q, lo - shift, hi - shift, tolerance);
            }
            width_at_last_check = width;
        }
        let scale = bx.amax();
        x = bx / scale;
    }
    Err(Error::NonConvergence {
        estimate,
        iterations: max_iterations,
    })
}

/// Shrink a rigorous abscissa bracket by bisecting on the Lemma-1 decision:
/// `Q - sI` is Metzler, and it is Hurwitz exactly when the abscissa is below
/// `s`. Immune to eigenvalue clustering. For a defective dominant eigenvalue
/// the pivot threshold blurs the decision in a band of roughly the square
/// root of the threshold (~1e-6), which bounds the achievable accuracy
/// there; simple eigenvalues bisect down to `tolerance`.
fn abscissa_by_bisection(q: &DMatrix<f64>, mut lo: f64, mut hi: f64, tolerance: f64) -> Result<f64> {
    let n = q.nrows();
    let mut shifted = q.clone();
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        for k in 0..n {
            shifted[(k, k)] = q[(k, k)] - mid;
        }
        if is_metzler_hurwitz(&shifted)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Defaults used by [`stability_report`] for abscissa computation.
pub const ABSCISSA_TOLERANCE: f64 = 1e-10;
pub const ABSCISSA_MAX_ITERATIONS: usize = 2_000_000;

/// Assembled blocks, equilibrium, abscissas, and the two Hurwitz verdicts.
///
/// The `Q`-side fields are `None` when the vigilant equilibrium is undefined
/// (absorbing vigilant class); the `W`-side verdict is still produced.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub wxx: DMatrix<f64>,
    pub wyy: DMatrix<f64>,
    pub wyx: DMatrix<f64>,
    pub vigilant_equilibrium: Option<Vec<DVector<f64>>>,
    pub qxx: Option<DMatrix<f64>>,
    pub lambda_wxx: f64,
    pub lambda_qxx: Option<f64>,
    /// Theorem-1-style sufficient condition: `W_xx` Hurwitz.
    pub global_sufficient: bool,
    /// Theorem-2-style iff condition: `Q_xx` Hurwitz.
    pub local_iff: Option<bool>,
}

/// JSON-friendly summary of a [`StabilityReport`] (verdicts, abscissas,
/// equilibrium, dimensions — not the matrices themselves).
#[derive(Debug, Clone, Serialize)]
pub struct StabilitySummary {
    pub nodes: usize,
    pub m: usize,
    pub n: usize,
    pub wxx_dim: usize,
    pub lambda_wxx: f64,
    pub lambda_qxx: Option<f64>,
    pub global_sufficient: bool,
    pub local_iff: Option<bool>,
    pub vigilant_equilibrium: Option<Vec<Vec<f64>>>,
    pub equilibrium_residual: Option<f64>,
}

pub fn stability_report(model: &Model) -> Result<StabilityReport> {
    let wxx = assemble_wxx(model);
    let wyy = assemble_wyy(model);
    let wyx = assemble_wyx(model);
    let global_sufficient = is_metzler_hurwitz(&wxx)?;
    let lambda_wxx = spectral_abscissa(&wxx, ABSCISSA_TOLERANCE, ABSCISSA_MAX_ITERATIONS)?;

    let (ystar, qxx, lambda_qxx, local_iff) = match vigilant_equilibrium(model) {
        Ok(ystar) => {
            let qxx = assemble_qxx(model, &ystar);
            let lambda_qxx = spectral_abscissa(&qxx, ABSCISSA_TOLERANCE, ABSCISSA_MAX_ITERATIONS)?;
            let verdict = is_metzler_hurwitz(&qxx)?;
            (Some(ystar), Some(qxx), Some(lambda_qxx), Some(verdict))
        }
        Err(Error::EquilibriumUndefined(_)) => (None, None, None, None),
        Err(e) => return Err(e),
    };

    Ok(StabilityReport {
        wxx,
        wyy,
        wyx,
        vigilant_equilibrium: ystar,
        qxx,
        lambda_wxx,
        lambda_qxx,
        global_sufficient,
        local_iff,
    })
}

impl StabilityReport {
    pub fn summary(&self, model: &Model) -> StabilitySummary {
        let residual = self.vigilant_equilibrium.as_ref().map(|ystar| {
            let stacked = stack_equilibrium(ystar);
            let hy = stack_theta(model);
            (&self.wyy * &stacked + hy).amax()
        });
        StabilitySummary {
            nodes: model.node_count(),
            m: model.m(),
            n: model.n(),
            wxx_dim: self.wxx.nrows(),
            lambda_wxx: self.lambda_wxx,
            lambda_qxx: self.lambda_qxx,
            global_sufficient: self.global_sufficient,
            local_iff: self.local_iff,
            vigilant_equilibrium: self
                .vigilant_equilibrium
                .as_ref()
                .map(|v| v.iter().map(|y| y.iter().copied().collect()).collect()),
            equilibrium_residual: residual,
        }
    }
}

/// The constant forcing on the vigilant class: stacked theta vectors.
pub fn stack_theta(model: &Model) -> DVector<f64> {
    let n = model.n();
    let mut out = DVector::zeros(model.node_count() * n);
    for i in 0..model.node_count() {
        out.rows_mut(i * n, n).copy_from(&model.node(i).vigilance);
    }
    out
}
