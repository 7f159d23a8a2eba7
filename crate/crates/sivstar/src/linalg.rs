//! Small dense linear-algebra helpers shared across the crate.
//!
//! The only nontrivial piece is [`expm`], a scaling-and-squaring matrix
//! exponential with a degree-13 Padé approximant. Matrices in this crate are
//! desk-scale (a few hundred rows at most), so a fixed-order dense routine is
//! the right tool; no norm-estimation refinements are needed.

use nalgebra::{DMatrix, DVector};

/// Padé-13 numerator/denominator coefficients for `exp`.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Threshold on the 1-norm below which the unscaled Padé-13 approximant is
/// accurate to machine precision (Higham's theta_13).
const THETA13: f64 = 5.371920351148152;

/// Matrix 1-norm (maximum absolute column sum).
pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|x| x.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Dense matrix exponential by scaling and squaring with a Padé-13 core.
///
/// Panics if `a` is not square.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), a.ncols(), "expm requires a square matrix");
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }

    let norm = one_norm(a);
    let scaling = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(scaling);

    let identity = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    // u = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let w1 = &a6 * (PADE13[13] * &a6 + PADE13[11] * &a4 + PADE13[9] * &a2);
    let w2 = PADE13[7] * &a6 + PADE13[5] * &a4 + PADE13[3] * &a2 + PADE13[1] * &identity;
    let u = &a * (w1 + w2);

    // v = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let z1 = &a6 * (PADE13[12] * &a6 + PADE13[10] * &a4 + PADE13[8] * &a2);
    let v = z1 + PADE13[6] * &a6 + PADE13[4] * &a4 + PADE13[2] * &a2 + PADE13[0] * &identity;

    // exp(A) ~= (v - u)^-1 (v + u)
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut result = lhs
        .lu()
        .solve(&rhs)
        .expect("Pade denominator is singular; matrix norm out of range");

    for _ in 0..scaling {
        result = &result * &result;
    }
    result
}

/// `exp(a t) v` convenience for propagating a vector.
pub fn expm_apply(a: &DMatrix<f64>, t: f64, v: &DVector<f64>) -> DVector<f64> {
    expm(&(a * t)) * v
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn identity_exponential() {
        let z = DMatrix::<f64>::zeros(3, 3);
        let e = expm(&z);
        assert!((e - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn diagonal_exponential() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![1.0, -2.0, 0.5]);
        let e = expm(&a);
        for (k, lam) in [1.0f64, -2.0, 0.5].iter().enumerate() {
            assert!((e[(k, k)] - lam.exp()).abs() < 1e-13);
        }
        assert!(e[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn nilpotent_exponential_is_exact_polynomial() {
        // exp([[0,1],[0,0]]) = [[1,1],[0,1]]
        let a = dmatrix![0.0, 1.0; 0.0, 0.0];
        let e = expm(&a);
        assert!((e - dmatrix![1.0, 1.0; 0.0, 1.0]).amax() < 1e-15);
    }

    #[test]
    fn rotation_exponential() {
        // exp(t [[0,-1],[1,0]]) = [[cos t, -sin t],[sin t, cos t]]
        let t = 1.3f64;
        let a = dmatrix![0.0, -t; t, 0.0];
        let e = expm(&a);
        let expected = dmatrix![t.cos(), -t.sin(); t.sin(), t.cos()];
        assert!((e - expected).amax() < 1e-13);
    }

    #[test]
    fn large_norm_requires_squaring() {
        // exp(diag(50, -50)) exercises the scaling branch.
        let a = DMatrix::from_diagonal(&nalgebra::dvector![50.0, -50.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] / 50f64.exp() - 1.0).abs() < 1e-10);
        assert!((e[(1, 1)] / (-50f64).exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn matches_taylor_series_for_small_random_matrices() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..20 {
            let a = DMatrix::from_fn(5, 5, |_, _| next() * 0.4);
            let e = expm(&a);
            // Truncated Taylor series as an independent route.
            let mut term = DMatrix::<f64>::identity(5, 5);
            let mut sum = term.clone();
            for k in 1..30 {
                term = &term * &a / k as f64;
                sum += &term;
            }
            assert!((e - sum).amax() < 1e-12);
        }
    }
}
