//! Monotone vector norms, induced matrix norms, and certificate renormings.
//!
//! The renorming turns a normality certificate `z > 0` with `Az < z` into a
//! weighted max norm `||x||_A = max_i |x_i| / z_i` under which `A` contracts
//! the positive cone by a factor `alpha = max_i (Az)_i / z_i < 1`, together
//! with the constants relating `||.||_A` back to the 1-norm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonneg_matrix::{certificate_vector, MatrixError, NonnegativeMatrix};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NormError {
    #[error("p-norm exponent {p} is below 1")]
    InvalidP { p: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Standard p-norm for `1 <= p <= infinity` (pass `f64::INFINITY` for the max norm).
pub fn p_norm(x: &[f64], p: f64) -> Result<f64, NormError> {
    if p.is_nan() || p < 1.0 {
        return Err(NormError::InvalidP { p });
    }
    if p == f64::INFINITY {
        return Ok(x.iter().fold(0.0, |acc, v| acc.max(v.abs())));
    }
    if p == 1.0 {
        return Ok(x.iter().map(|v| v.abs()).sum());
    }
    if p == 2.0 {
        return Ok(x.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p))
}

/// 1-norm distance; the library's default scalar metric.
pub fn one_norm_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum()
}

/// Induced 1-norm: maximum column sum of absolute values.
pub fn induced_norm_1(a: &NonnegativeMatrix) -> f64 {
    let n = a.dimension();
    let mut best = 0.0_f64;
    for j in 0..n {
        let mut column = 0.0;
        for i in 0..n {
            column += a.entry(i, j).abs();
        }
        best = best.max(column);
    }
    best
}

/// Induced infinity norm: maximum row sum of absolute values.
pub fn induced_norm_inf(a: &NonnegativeMatrix) -> f64 {
    let n = a.dimension();
    (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Weighted max norm built from a positive certificate, with its certified
/// contraction factor and the equivalence constants against the 1-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Renorming {
    weights: Vec<f64>,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl Renorming {
    /// Assemble from a positive weight vector and the matrix it certifies;
    /// `alpha = max_i (A w)_i / w_i`, `beta = min w`, `gamma = sum w`.
    pub fn from_certificate(
        a: &NonnegativeMatrix,
        weights: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        if weights.len() != a.dimension() {
            return Err(MatrixError::DimensionMismatch {
                expected: a.dimension(),
                actual: weights.len(),
            });
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(MatrixError::BadRightHandSide { index, value: w });
            }
        }
        let image = a.matvec(&weights)?;
        let alpha = image
            .iter()
            .zip(weights.iter())
            .map(|(num, den)| num / den)
            .fold(0.0, f64::max);
        let beta = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let gamma = weights.iter().sum();
        Ok(Self { weights, alpha, beta, gamma })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Certified contraction factor; strictly below 1, and 0 exactly when
    /// `A` annihilates the weights (the degenerate `A = 0` case). Callers
    /// needing a strictly positive factor clamp with [`Renorming::positive_alpha`].
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `alpha` clamped away from zero for consumers that require a ratio
    /// strictly inside `(0, 1)`.
    pub fn positive_alpha(&self) -> f64 {
        self.alpha.max(1e-6)
    }

    /// `min_i` of the weights: `beta * ||x||_A <= ||x||_1`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Sum of the weights: `||x||_1 <= gamma * ||x||_A`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }
}

/// `||x||_A = max_i |x_i| / w_i` for the renorming's weights.
pub fn weighted_max_norm(x: &[f64], renorming: &Renorming) -> Result<f64, NormError> {
    if x.len() != renorming.dimension() {
        return Err(NormError::DimensionMismatch {
            expected: renorming.dimension(),
            actual: x.len(),
        });
    }
    Ok(x.iter()
        .zip(renorming.weights.iter())
        .map(|(v, w)| v.abs() / w)
        .fold(0.0, f64::max))
}

/// Renorming from the all-ones certificate of a normal matrix.
pub fn build_renorming(a: &NonnegativeMatrix) -> Result<Renorming, MatrixError> {
    let ones = vec![1.0; a.dimension()];
    let weights = certificate_vector(a, &ones)?;
    Renorming::from_certificate(a, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> NonnegativeMatrix {
        NonnegativeMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn p_norm_examples() {
        assert_eq!(p_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(p_norm(&[0.0, 0.0, 0.0], 1.0).unwrap(), 0.0);
        assert_eq!(p_norm(&[0.0, 0.0], 7.5).unwrap(), 0.0);
        assert_eq!(p_norm(&[1.0, -2.0, 3.0], f64::INFINITY).unwrap(), 3.0);
        assert!(matches!(p_norm(&[1.0], 0.5), Err(NormError::InvalidP { .. })));
        assert!(matches!(p_norm(&[1.0], f64::NAN), Err(NormError::InvalidP { .. })));
    }

    #[test]
    fn induced_norm_examples() {
        let identity = NonnegativeMatrix::identity(3).unwrap();
        assert_eq!(induced_norm_1(&identity), 1.0);
        assert_eq!(induced_norm_inf(&identity), 1.0);

        let sym = matrix(&[&[0.5, 0.25], &[0.25, 0.5]]);
        assert_eq!(induced_norm_1(&sym), 0.75);
        assert_eq!(induced_norm_inf(&sym), 0.75);

        let single = matrix(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert_eq!(induced_norm_1(&single), 2.0);
        assert_eq!(induced_norm_inf(&single), 2.0);
    }

    #[test]
    fn induced_norm_1_is_attained_on_the_canonical_basis() {
        let a = matrix(&[&[0.3, 0.7, 0.1], &[0.2, 0.1, 0.5], &[0.4, 0.0, 0.2]]);
        let norm = induced_norm_1(&a);
        let mut attained = 0.0_f64;
        for j in 0..3 {
            let mut basis = vec![0.0; 3];
            basis[j] = 1.0;
            let image = a.matvec(&basis).unwrap();
            attained = attained.max(p_norm(&image, 1.0).unwrap());
        }
        assert!((norm - attained).abs() <= 1e-15);
    }

    #[test]
    fn weighted_max_norm_examples() {
        let a = matrix(&[&[0.5, 0.25], &[0.25, 0.5]]);
        let renorming = build_renorming(&a).unwrap();
        assert_eq!(renorming.weights(), &[4.0, 4.0]);

        let at_weights = weighted_max_norm(&renorming.weights().to_vec(), &renorming).unwrap();
        assert_eq!(at_weights, 1.0);
        assert_eq!(weighted_max_norm(&[0.0, 0.0], &renorming).unwrap(), 0.0);
        assert_eq!(weighted_max_norm(&[1.0, 2.0], &renorming).unwrap(), 0.5);
        assert!(matches!(
            weighted_max_norm(&[1.0], &renorming),
            Err(NormError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn renorming_scalar_example() {
        let r = build_renorming(&matrix(&[&[0.5]])).unwrap();
        assert_eq!(r.weights(), &[2.0]);
        assert_eq!(r.alpha(), 0.5);
        assert_eq!(r.beta(), 2.0);
        assert_eq!(r.gamma(), 2.0);
    }

    #[test]
    fn renorming_degenerate_zero_matrix() {
        let r = build_renorming(&NonnegativeMatrix::zeros(2).unwrap()).unwrap();
        assert_eq!(r.weights(), &[1.0, 1.0]);
        assert_eq!(r.alpha(), 0.0);
        assert_eq!(r.positive_alpha(), 1e-6);
        assert_eq!(r.beta(), 1.0);
        assert_eq!(r.gamma(), 2.0);
    }

    #[test]
    fn renorming_symmetric_example() {
        let r = build_renorming(&matrix(&[&[0.5, 0.25], &[0.25, 0.5]])).unwrap();
        assert_eq!(r.weights(), &[4.0, 4.0]);
        assert_eq!(r.alpha(), 0.75);
        assert_eq!(r.beta(), 4.0);
        assert_eq!(r.gamma(), 8.0);
    }

    #[test]
    fn renorming_requires_normality() {
        assert!(matches!(
            build_renorming(&NonnegativeMatrix::identity(2).unwrap()),
            Err(MatrixError::NotNormal { .. })
        ));
    }

    #[test]
    fn contraction_and_equivalence_hold_on_samples() {
        let a = matrix(&[&[0.23, 0.11, 0.31], &[0.05, 0.42, 0.17], &[0.29, 0.08, 0.33]]);
        let r = build_renorming(&a).unwrap();
        // deterministic sample fan, positive and signed
        for s in 0..100 {
            let x: Vec<f64> = (0..3)
                .map(|i| ((s * 3 + i + 1) as f64 * 0.618).fract() + 1e-3)
                .collect();
            let ax = a.matvec(&x).unwrap();
            let lhs = weighted_max_norm(&ax, &r).unwrap();
            let rhs = r.alpha() * weighted_max_norm(&x, &r).unwrap();
            assert!(lhs <= rhs + 1e-10, "contraction violated: {lhs} > {rhs}");

            let signed: Vec<f64> =
                x.iter().enumerate().map(|(i, v)| if i % 2 == 0 { *v } else { -v }).collect();
            let weighted = weighted_max_norm(&signed, &r).unwrap();
            let one = p_norm(&signed, 1.0).unwrap();
            assert!(r.beta() * weighted <= one + 1e-10);
            assert!(one <= r.gamma() * weighted + 1e-10);
        }
    }

    #[test]
    fn nonnegative_vectors_are_dominated_by_their_weighted_norm() {
        // x <= ||x||_A * w for x >= 0
        let a = matrix(&[&[0.4, 0.2], &[0.1, 0.3]]);
        let r = build_renorming(&a).unwrap();
        let x = [0.7, 2.3];
        let norm = weighted_max_norm(&x, &r).unwrap();
        for i in 0..2 {
            assert!(x[i] <= norm * r.weights()[i] + 1e-12);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn small_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0..10.0_f64, n)
        }

        proptest! {
            // 0 <= x <= y implies norm(x) <= norm(y), for every supported norm
            #[test]
            fn monotone_norms(base in small_vector(4), bump in small_vector(4), p in 1.0..6.0_f64) {
                let y: Vec<f64> = base.iter().zip(bump.iter()).map(|(b, d)| b + d).collect();
                prop_assert!(p_norm(&base, p).unwrap() <= p_norm(&y, p).unwrap() + 1e-12);
                prop_assert!(
                    p_norm(&base, f64::INFINITY).unwrap()
                        <= p_norm(&y, f64::INFINITY).unwrap() + 1e-12
                );

                let a = matrix(&[
                    &[0.2, 0.1, 0.0, 0.3],
                    &[0.1, 0.3, 0.2, 0.0],
                    &[0.0, 0.2, 0.1, 0.1],
                    &[0.3, 0.0, 0.1, 0.2],
                ]);
                let r = build_renorming(&a).unwrap();
                prop_assert!(
                    weighted_max_norm(&base, &r).unwrap()
                        <= weighted_max_norm(&y, &r).unwrap() + 1e-12
                );
            }

            // ||Ax||_1 never exceeds the induced 1-norm on the unit ball
            #[test]
            fn induced_norm_is_compatible(x in small_vector(3)) {
                let a = matrix(&[&[0.3, 0.7, 0.1], &[0.2, 0.1, 0.5], &[0.4, 0.0, 0.2]]);
                let scale = p_norm(&x, 1.0).unwrap();
                prop_assume!(scale > 1e-9);
                let unit: Vec<f64> = x.iter().map(|v| v / scale).collect();
                let image = a.matvec(&unit).unwrap();
                prop_assert!(
                    p_norm(&image, 1.0).unwrap() <= induced_norm_1(&a) + 1e-12
                );
            }
        }
    }
}
