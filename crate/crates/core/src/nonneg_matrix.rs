//! Normality analysis for nonnegative matrices.
//!
//! A nonnegative matrix `A` is *normal* when some strictly positive vector
//! `z` satisfies `Az < z` componentwise. This module decides normality four
//! ways — a division-free pivot elimination, leading principal minors of
//! `I - A`, a perturbed power-iteration bracket for the spectral radius, and
//! decay of matrix powers — and produces the artifacts the solvers consume:
//! positive certificates, spectral brackets, and truncated Neumann inverses.
//!
//! The four routes are algorithmically independent on purpose; agreement
//! between them is part of the test surface, not an implementation shortcut.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::norms;

/// Strict inequalities `> 0` are tested as `> DEFAULT_POSITIVITY_TOL`.
/// Values inside `(-tol, tol]` are treated as undecidable rather than signed.
pub const DEFAULT_POSITIVITY_TOL: f64 = 1e-12;

/// Entry magnitude that triggers a per-row rescale during elimination.
const RESCALE_UPPER: f64 = 1e100;
/// Magnitude below which a nonzero row is scaled back up.
const RESCALE_LOWER: f64 = 1e-100;
/// Power-iteration sweeps allowed per perturbation stage.
const POWER_ITERATION_CAP: usize = 10_000;
/// Perturbation stages `eps_k = 1e-2 * 4^-k`, `k = 0..=MAX_EPSILON_STAGES`.
const MAX_EPSILON_STAGES: i32 = 20;
/// Bisection steps for the Collatz-Wielandt value.
const MAX_BISECTION_STEPS: usize = 500;
/// Matrix-power norm past which power decay is abandoned for the spectral route.
const POWER_BLOWUP_LIMIT: f64 = 1e100;
/// Hard cap on Neumann series terms.
const NEUMANN_TERM_CAP: usize = 200_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix entry ({row},{col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not normal: pivot {pivot:e} at stage {stage} is not positive")]
    NotNormal { stage: usize, pivot: f64 },
    #[error("right-hand side component {index} = {value} is not strictly positive")]
    BadRightHandSide { index: usize, value: f64 },
    #[error("tolerance must be strictly positive and finite")]
    InvalidTolerance,
    #[error("maximum power must be at least 1")]
    InvalidMaxPower,
    #[error("scale factor {factor} must be nonnegative and finite")]
    InvalidScale { factor: f64 },
    #[error("undecided: {0}")]
    Undecided(String),
}

// ── matrix type ─────────────────────────────────────────────────────────────

/// Square matrix with finite nonnegative entries, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegativeMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl NonnegativeMatrix {
    /// Build from rows, rejecting ragged shapes and negative or non-finite entries.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, MatrixError> {
        let n = rows.len();
        if n == 0 {
            return Err(MatrixError::EmptyMatrix);
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MatrixError::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            for (j, &value) in row.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(MatrixError::InvalidEntry { row: i, col: j, value });
                }
                entries.push(value);
            }
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::EmptyMatrix);
        }
        Ok(Self { n, entries: vec![0.0; n * n] })
    }

    pub fn identity(n: usize) -> Result<Self, MatrixError> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `true` when `self <= other` entrywise.
    pub fn dominated_by(&self, other: &Self) -> bool {
        self.n == other.n
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|(a, b)| a <= b)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if x.len() != self.n {
            return Err(MatrixError::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = self.row(i);
            let mut sum = 0.0;
            for j in 0..self.n {
                sum += row[j] * x[j];
            }
            out[i] = sum;
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        if other.n != self.n {
            return Err(MatrixError::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = self.entries[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                let brow = &other.entries[k * n..(k + 1) * n];
                let crow = &mut entries[i * n..(i + 1) * n];
                for j in 0..n {
                    crow[j] += aik * brow[j];
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn add(&self, other: &Self) -> Result<Self, MatrixError> {
        if other.n != self.n {
            return Err(MatrixError::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        let entries = self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self { n: self.n, entries })
    }

    /// Entrywise multiple `factor * A`; the factor must be nonnegative.
    pub fn scaled(&self, factor: f64) -> Result<Self, MatrixError> {
        if !factor.is_finite() || factor < 0.0 {
            return Err(MatrixError::InvalidScale { factor });
        }
        let entries = self.entries.iter().map(|a| a * factor).collect();
        Ok(Self { n: self.n, entries })
    }

    /// Maximum row sum; the induced infinity norm.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `A + eps` on every entry; strictly positive for `eps > 0`.
    fn perturbed(&self, eps: f64) -> Self {
        debug_assert!(eps >= 0.0 && eps.is_finite());
        let entries = self.entries.iter().map(|a| a + eps).collect();
        Self { n: self.n, entries }
    }
}

impl Serialize for NonnegativeMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("NonnegativeMatrix", 2)?;
        st.serialize_field("n", &self.n)?;
        let rows: Vec<&[f64]> = (0..self.n).map(|i| self.row(i)).collect();
        st.serialize_field("rows", &rows)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for NonnegativeMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            n: usize,
            rows: Vec<Vec<f64>>,
        }
        let repr = Repr::deserialize(deserializer)?;
        if repr.rows.len() != repr.n {
            return Err(serde::de::Error::custom(format!(
                "declared n = {} but got {} rows",
                repr.n,
                repr.rows.len()
            )));
        }
        NonnegativeMatrix::new(repr.rows).map_err(serde::de::Error::custom)
    }
}

// ── elimination ─────────────────────────────────────────────────────────────

/// Three-valued outcome of a strict-positivity scan (pivots or minors).
/// Indices are 1-based to match the pivot numbering `a_kk^(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalityDecision {
    Normal,
    NotNormal { index: usize, value: f64 },
    Undecided { index: usize, value: f64 },
}

impl NormalityDecision {
    pub fn is_normal(&self) -> bool {
        matches!(self, NormalityDecision::Normal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RescalePolicy {
    /// Never rescale; the raw recursion (entries grow multiplicatively).
    Never,
    /// Rescale a row only when its magnitude leaves `[1e-100, 1e100]`.
    Auto,
    /// Rescale every row of every derived stage to unit magnitude.
    Always,
}

#[derive(Debug, Clone, Copy)]
pub struct EliminationOptions {
    pub positivity_tol: f64,
    pub rescale: RescalePolicy,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        Self {
            positivity_tol: DEFAULT_POSITIVITY_TOL,
            rescale: RescalePolicy::Auto,
        }
    }
}

/// Full record of the division-free elimination.
///
/// Stage `s` (0-based) holds the square grid `a_ij^(s+1)` for the trailing
/// `n - s` indices, row-major, together with the transformed right-hand side
/// `sigma^(s+1)`. Stage 0 is the sign-split of `I - A`: `1 - a_ii` on the
/// diagonal, `a_ij >= 0` off it (off-diagonal entries are stored with
/// positive sign; they enter the underlying linear system negatively).
#[derive(Debug, Clone)]
pub struct EliminationTable {
    n: usize,
    stages: Vec<Vec<f64>>,
    sigmas: Vec<Vec<f64>>,
    pivots: Vec<f64>,
    scaled: bool,
    decision: NormalityDecision,
}

impl EliminationTable {
    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Pivots `a_kk^(k)` in stage order; shorter than `n` when elimination
    /// stopped at a nonpositive pivot (the offending pivot is included).
    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    /// Stage grids; `stages()[s]` is `(n-s) x (n-s)` row-major.
    pub fn stages(&self) -> &[Vec<f64>] {
        &self.stages
    }

    /// Entry `a_ij^(s+1)` with 0-based global indices `s <= i, j < n`.
    pub fn stage_entry(&self, s: usize, i: usize, j: usize) -> f64 {
        let m = self.n - s;
        self.stages[s][(i - s) * m + (j - s)]
    }

    /// Transformed right-hand sides `sigma^(s+1)`.
    pub fn sigmas(&self) -> &[Vec<f64>] {
        &self.sigmas
    }

    /// Whether any per-row rescale was applied while building the table.
    pub fn scaled(&self) -> bool {
        self.scaled
    }

    pub fn decision(&self) -> NormalityDecision {
        self.decision
    }

    pub fn is_complete(&self) -> bool {
        self.decision.is_normal()
    }

    /// Solve the triangularized system by back-substitution. All retained
    /// quantities are nonnegative and pivots are positive, so the solution
    /// is strictly positive whenever the table is complete.
    fn back_substitute(&self) -> Vec<f64> {
        debug_assert!(self.is_complete());
        let n = self.n;
        let mut z = vec![0.0; n];
        for k in (0..n).rev() {
            let head_row = &self.stages[k][0..(n - k)];
            let mut acc = self.sigmas[k][0];
            for j in (k + 1)..n {
                acc += head_row[j - k] * z[j];
            }
            z[k] = acc / head_row[0];
        }
        z
    }
}

fn classify_value(value: f64, tol: f64) -> Option<bool> {
    // Some(true): strictly positive; Some(false): strictly nonpositive; None: ambiguous.
    if value > tol {
        Some(true)
    } else if value <= -tol {
        Some(false)
    } else {
        None
    }
}

/// Division-free elimination with the all-ones right-hand side.
pub fn matkowski_eliminate(a: &NonnegativeMatrix) -> EliminationTable {
    let ones = vec![1.0; a.dimension()];
    matkowski_eliminate_with(a, &ones, &EliminationOptions::default())
        .expect("all-ones right-hand side is valid")
}

/// Division-free elimination of the sign-split system with right-hand side
/// `y > 0`. Stops at the first pivot that fails strict positivity.
pub fn matkowski_eliminate_with(
    a: &NonnegativeMatrix,
    y: &[f64],
    options: &EliminationOptions,
) -> Result<EliminationTable, MatrixError> {
    let n = a.dimension();
    if y.len() != n {
        return Err(MatrixError::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    for (index, &value) in y.iter().enumerate() {
        if !value.is_finite() || value <= 0.0 {
            return Err(MatrixError::BadRightHandSide { index, value });
        }
    }

    // Stage 0: diagonal 1 - a_ii, off-diagonal a_ij (kept unscaled).
    let mut stage = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            stage[i * n + j] = if i == j { 1.0 - a.entry(i, j) } else { a.entry(i, j) };
        }
    }
    let mut sigma = y.to_vec();

    let mut stages = vec![stage.clone()];
    let mut sigmas = vec![sigma.clone()];
    let mut pivots = Vec::with_capacity(n);
    let mut scaled = false;
    let mut decision = NormalityDecision::Normal;

    for s in 0..n {
        let m = n - s;
        let pivot = stage[0];
        pivots.push(pivot);
        match classify_value(pivot, options.positivity_tol) {
            Some(true) => {}
            Some(false) => {
                decision = NormalityDecision::NotNormal { index: s + 1, value: pivot };
                break;
            }
            None => {
                decision = NormalityDecision::Undecided { index: s + 1, value: pivot };
                break;
            }
        }
        if s + 1 == n {
            break;
        }

        // Derived stage: a_ij' = p*a_ij -/+ a_i0*a_0j (minus on the diagonal),
        // sigma_i' = p*sigma_i + a_i0*sigma_0.
        let mm = m - 1;
        let mut next = vec![0.0; mm * mm];
        let mut next_sigma = vec![0.0; mm];
        for i in 1..m {
            let multiplier = stage[i * m];
            for j in 1..m {
                let prod = pivot * stage[i * m + j];
                let cross = multiplier * stage[j];
                next[(i - 1) * mm + (j - 1)] = if i == j { prod - cross } else { prod + cross };
            }
            next_sigma[i - 1] = pivot * sigma[i] + multiplier * sigma[0];
        }

        // Per-row rescale of the derived stage; positive factors preserve
        // every sign, hence the decision and the solved certificate.
        match options.rescale {
            RescalePolicy::Never => {}
            RescalePolicy::Auto | RescalePolicy::Always => {
                for i in 0..mm {
                    let row = &mut next[i * mm..(i + 1) * mm];
                    let mut magnitude = next_sigma[i].abs();
                    for &v in row.iter() {
                        magnitude = magnitude.max(v.abs());
                    }
                    let apply = match options.rescale {
                        RescalePolicy::Always => magnitude > 0.0,
                        _ => magnitude > RESCALE_UPPER
                            || (magnitude > 0.0 && magnitude < RESCALE_LOWER),
                    };
                    if apply {
                        for v in row.iter_mut() {
                            *v /= magnitude;
                        }
                        next_sigma[i] /= magnitude;
                        scaled = true;
                    }
                }
            }
        }

        stage = next;
        sigma = next_sigma;
        stages.push(stage.clone());
        sigmas.push(sigma.clone());
    }

    Ok(EliminationTable {
        n,
        stages,
        sigmas,
        pivots,
        scaled,
        decision,
    })
}

/// Pivot-based normality decision at the default tolerance.
pub fn matkowski_decision(a: &NonnegativeMatrix) -> NormalityDecision {
    matkowski_eliminate(a).decision()
}

/// `true` iff every pivot exists and exceeds the positivity tolerance.
pub fn is_normal_matkowski(a: &NonnegativeMatrix) -> bool {
    matkowski_decision(a).is_normal()
}

// ── leading minors ──────────────────────────────────────────────────────────

/// Determinants of the leading principal blocks of `I - A`, computed
/// independently of the pivot recursion: cofactor expansion for `n <= 4`,
/// partially pivoted elimination otherwise.
pub fn leading_minors(a: &NonnegativeMatrix) -> Vec<f64> {
    let n = a.dimension();
    let use_cofactor = n <= 4;
    (1..=n)
        .map(|m| {
            let mut block = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    let e = a.entry(i, j);
                    block[i * m + j] = if i == j { 1.0 - e } else { -e };
                }
            }
            if use_cofactor {
                det_cofactor(&block, m)
            } else {
                det_pivoted(block, m)
            }
        })
        .collect()
}

fn det_cofactor(block: &[f64], m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => block[0],
        2 => block[0] * block[3] - block[1] * block[2],
        _ => {
            let mut det = 0.0;
            let mut sign = 1.0;
            for col in 0..m {
                let pivot = block[col];
                if pivot != 0.0 {
                    let sub: Vec<f64> = (1..m)
                        .flat_map(|i| {
                            (0..m).filter(move |&j| j != col).map(move |j| block[i * m + j])
                        })
                        .collect();
                    det += sign * pivot * det_cofactor(&sub, m - 1);
                }
                sign = -sign;
            }
            det
        }
    }
}

fn det_pivoted(mut block: Vec<f64>, m: usize) -> f64 {
    let mut sign = 1.0;
    for k in 0..m {
        let mut pivot_row = k;
        let mut best = block[k * m + k].abs();
        for i in (k + 1)..m {
            let mag = block[i * m + k].abs();
            if mag > best {
                best = mag;
                pivot_row = i;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot_row != k {
            for j in 0..m {
                block.swap(k * m + j, pivot_row * m + j);
            }
            sign = -sign;
        }
        let pivot = block[k * m + k];
        for i in (k + 1)..m {
            let factor = block[i * m + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k..m {
                block[i * m + j] -= factor * block[k * m + j];
            }
        }
    }
    let mut det = sign;
    for k in 0..m {
        det *= block[k * m + k];
    }
    det
}

/// Minor-based decision at the default tolerance.
pub fn admissibility_decision(a: &NonnegativeMatrix) -> NormalityDecision {
    let minors = leading_minors(a);
    for (i, &minor) in minors.iter().enumerate() {
        match classify_value(minor, DEFAULT_POSITIVITY_TOL) {
            Some(true) => {}
            Some(false) => return NormalityDecision::NotNormal { index: i + 1, value: minor },
            None => return NormalityDecision::Undecided { index: i + 1, value: minor },
        }
    }
    NormalityDecision::Normal
}

/// `true` iff every leading minor of `I - A` exceeds the positivity tolerance.
pub fn is_admissible(a: &NonnegativeMatrix) -> bool {
    admissibility_decision(a).is_normal()
}

// ── certificates ────────────────────────────────────────────────────────────

/// Which characterization produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characterization {
    MatkowskiPivots,
    LeadingMinors,
    SpectralRadius,
    AsymptoticPowers,
}

/// Evidence that normality fails: an approximate eigenpair with `lambda >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refutation {
    pub lambda: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// Decision plus witness. Exactly one of `certificate`/`refutation` is
/// present; the constructors enforce this.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityVerdict {
    normal: bool,
    method: Characterization,
    certificate: Option<Vec<f64>>,
    refutation: Option<Refutation>,
}

impl NormalityVerdict {
    pub fn certified(certificate: Vec<f64>, method: Characterization) -> Self {
        Self {
            normal: true,
            method,
            certificate: Some(certificate),
            refutation: None,
        }
    }

    pub fn refuted(refutation: Refutation, method: Characterization) -> Self {
        Self {
            normal: false,
            method,
            certificate: None,
            refutation: Some(refutation),
        }
    }

    pub fn is_normal(&self) -> bool {
        self.normal
    }

    pub fn method(&self) -> Characterization {
        self.method
    }

    pub fn certificate(&self) -> Option<&[f64]> {
        self.certificate.as_deref()
    }

    pub fn refutation(&self) -> Option<&Refutation> {
        self.refutation.as_ref()
    }
}

/// Strictly positive solution of `(I - A) z = y` by forward elimination and
/// back-substitution; exists exactly when all pivots are positive.
pub fn certificate_vector(a: &NonnegativeMatrix, y: &[f64]) -> Result<Vec<f64>, MatrixError> {
    let table = matkowski_eliminate_with(a, y, &EliminationOptions::default())?;
    match table.decision() {
        NormalityDecision::Normal => Ok(table.back_substitute()),
        NormalityDecision::NotNormal { index, value }
        | NormalityDecision::Undecided { index, value } => Err(MatrixError::NotNormal {
            stage: index,
            pivot: value,
        }),
    }
}

/// Certificate verdict for a normal matrix: `z > 0` with `Az = z - y < z`.
pub fn normality_certificate(
    a: &NonnegativeMatrix,
    y: &[f64],
) -> Result<NormalityVerdict, MatrixError> {
    let z = certificate_vector(a, y)?;
    Ok(NormalityVerdict::certified(z, Characterization::MatkowskiPivots))
}

// ── Collatz-Wielandt value ──────────────────────────────────────────────────

/// Bisection for `nu(A) = inf { lambda >= 0 : Az <= lambda z, some z > 0 }`,
/// driven by the pivot predicate on `A / lambda`. The estimate is within
/// `tol` of the true value.
pub fn nu_estimate(a: &NonnegativeMatrix, tol: f64) -> Result<f64, MatrixError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(MatrixError::InvalidTolerance);
    }
    let row_sum = a.max_row_sum();
    if row_sum == 0.0 {
        return Ok(0.0);
    }
    // nu(A) <= row_sum always; if A/row_sum is not normal the infimum is
    // attained at the row-sum bound itself.
    if !is_normal_matkowski(&a.scaled(1.0 / row_sum)?) {
        return Ok(row_sum);
    }
    let mut lo = 0.0_f64;
    let mut hi = row_sum;
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if is_normal_matkowski(&a.scaled(1.0 / mid)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ── spectral radius ─────────────────────────────────────────────────────────

/// Spectral-radius estimate with a Collatz-Wielandt style bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    /// Point estimate; always inside `[lower, upper]`.
    pub rho: f64,
    pub lower: f64,
    pub upper: f64,
    /// Perturbation size of the reported bracket.
    pub epsilon_used: f64,
}

impl SpectralEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Whether the bracket separates the spectral radius from 1.
    pub fn excludes_one(&self) -> bool {
        self.upper < 1.0 || self.lower >= 1.0
    }
}

/// One power-iteration pass on a strictly positive matrix. Returns the last
/// iterate's ratio bracket `[min_i (Mv)_i/v_i, max_i (Mv)_i/v_i]`, which
/// encloses `rho(M)` for any positive `v`.
fn power_bracket(
    m: &NonnegativeMatrix,
    v: &mut [f64],
    spread_target: f64,
    max_iters: usize,
) -> (f64, f64) {
    let mut min_ratio = 0.0;
    let mut max_ratio = f64::INFINITY;
    for _ in 0..max_iters {
        let w = m.matvec(v).expect("dimension fixed by caller");
        min_ratio = f64::INFINITY;
        max_ratio = 0.0;
        let mut peak = 0.0_f64;
        for i in 0..v.len() {
            let ratio = w[i] / v[i];
            min_ratio = min_ratio.min(ratio);
            max_ratio = max_ratio.max(ratio);
            peak = peak.max(w[i]);
        }
        for i in 0..v.len() {
            v[i] = w[i] / peak;
        }
        let floor = 8.0 * f64::EPSILON * max_ratio.max(1.0);
        if max_ratio - min_ratio <= spread_target.max(floor) {
            break;
        }
    }
    (min_ratio, max_ratio)
}

/// Power iteration on the positive perturbations `A + eps*ones` for the
/// decreasing schedule `eps_k = 1e-2 * 4^-k`; stops when the bracket
/// `[min_i (A_eps v)_i/v_i - n*eps, max_i (A_eps v)_i/v_i]` is narrower
/// than `tol` or the schedule is exhausted. The point estimate removes the
/// leading-order perturbation bias by extrapolating consecutive stages.
pub fn spectral_radius(a: &NonnegativeMatrix, tol: f64) -> Result<SpectralEstimate, MatrixError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(MatrixError::InvalidTolerance);
    }
    let n = a.dimension() as f64;
    let mut v = vec![1.0; a.dimension()];
    let spread_target = 0.5 * tol;

    let mut best: Option<(f64, f64, f64)> = None; // (lower, upper, eps)
    let mut prev_lambda: Option<f64> = None;
    let mut rho_raw = f64::NAN;

    for k in 0..=MAX_EPSILON_STAGES {
        let eps = 1e-2 * 0.25_f64.powi(k);
        let perturbed = a.perturbed(eps);
        let (min_ratio, max_ratio) =
            power_bracket(&perturbed, &mut v, spread_target, POWER_ITERATION_CAP);
        let lower = (min_ratio - n * eps).max(0.0);
        let upper = max_ratio;

        let improved = match best {
            None => true,
            Some((bl, bu, _)) => upper - lower < bu - bl,
        };
        if improved {
            best = Some((lower, upper, eps));
        }

        rho_raw = match prev_lambda {
            // lambda(eps) ~ rho + c*eps with a 4:1 eps step; eliminate c.
            Some(previous) => max_ratio + (max_ratio - previous) / 3.0,
            None => 0.5 * (lower + upper),
        };
        prev_lambda = Some(max_ratio);

        let (bl, bu, _) = best.expect("set above");
        if bu - bl <= tol {
            break;
        }
    }

    let (lower, upper, epsilon_used) = best.expect("at least one stage runs");
    let rho = rho_raw.clamp(lower, upper);
    Ok(SpectralEstimate {
        rho,
        lower,
        upper,
        epsilon_used,
    })
}

// ── asymptotic powers ───────────────────────────────────────────────────────

/// Certified power decay: `Ok(true)` as soon as some `||A^p||_1^* < 1` with
/// `p <= max_p` (geometric decay then follows by submultiplicativity),
/// `Ok(false)` when the spectral bracket certifies `rho >= 1`, and
/// `Err(Undecided)` otherwise.
pub fn is_asymptotic(a: &NonnegativeMatrix, tol: f64, max_p: usize) -> Result<bool, MatrixError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(MatrixError::InvalidTolerance);
    }
    if max_p == 0 {
        return Err(MatrixError::InvalidMaxPower);
    }
    let mut power = a.clone();
    let mut last_norm = f64::NAN;
    for p in 1..=max_p {
        last_norm = norms::induced_norm_1(&power);
        if last_norm < 1.0 {
            return Ok(true);
        }
        if last_norm > POWER_BLOWUP_LIMIT || p == max_p {
            break;
        }
        power = power.matmul(a)?;
    }
    let estimate = spectral_radius(a, tol)?;
    if estimate.lower >= 1.0 {
        return Ok(false);
    }
    Err(MatrixError::Undecided(format!(
        "powers stayed at norm {last_norm:e} without a rho >= 1 certificate (bracket [{}, {}])",
        estimate.lower, estimate.upper
    )))
}

// ── Neumann inverse ─────────────────────────────────────────────────────────

/// Truncated Neumann series `S = sum A^p`, an entrywise nonnegative
/// approximation of `(I - A)^{-1}` with `||(I - A) S - I||_1^* <= tol`.
/// The series is cut once the next term's induced 1-norm drops below
/// `tol * (1 - alpha)`, with `alpha` the certified contraction factor.
pub fn neumann_inverse(a: &NonnegativeMatrix, tol: f64) -> Result<NonnegativeMatrix, MatrixError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(MatrixError::InvalidTolerance);
    }
    let renorming = norms::build_renorming(a)?;
    let rate = renorming.alpha();
    let threshold = tol * (1.0 - rate);

    let mut sum = NonnegativeMatrix::identity(a.dimension())?;
    let mut term = sum.clone();
    for _ in 0..NEUMANN_TERM_CAP {
        term = term.matmul(a)?;
        // The dropped tail starts at this term, so the residual
        // (I - A) S - I = -term is under the threshold on exit.
        if norms::induced_norm_1(&term) <= threshold {
            return Ok(sum);
        }
        sum = sum.add(&term)?;
    }
    Err(MatrixError::Undecided(format!(
        "Neumann series did not reach the truncation threshold {threshold:e} within {NEUMANN_TERM_CAP} terms"
    )))
}

// ── tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> NonnegativeMatrix {
        NonnegativeMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn symmetric_half_quarter() -> NonnegativeMatrix {
        matrix(&[&[0.5, 0.25], &[0.25, 0.5]])
    }

    fn tripled_point_two() -> NonnegativeMatrix {
        matrix(&[&[0.2, 0.2, 0.2], &[0.2, 0.4, 0.0], &[0.2, 0.2, 0.2]])
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert_eq!(NonnegativeMatrix::new(vec![]), Err(MatrixError::EmptyMatrix));
        assert!(matches!(
            NonnegativeMatrix::new(vec![vec![1.0], vec![1.0]]),
            Err(MatrixError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            NonnegativeMatrix::new(vec![vec![1.0, -0.5], vec![0.0, 0.0]]),
            Err(MatrixError::InvalidEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            NonnegativeMatrix::new(vec![vec![f64::NAN]]),
            Err(MatrixError::InvalidEntry { .. })
        ));
    }

    #[test]
    fn matrix_json_round_trip() {
        let a = symmetric_half_quarter();
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(text, r#"{"n":2,"rows":[[0.5,0.25],[0.25,0.5]]}"#);
        let back: NonnegativeMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<NonnegativeMatrix>(r#"{"n":2,"rows":[[0.5]]}"#).is_err());
        assert!(serde_json::from_str::<NonnegativeMatrix>(r#"{"n":1,"rows":[[-1.0]]}"#).is_err());
    }

    #[test]
    fn eliminate_zero_matrix_gives_identity_pattern() {
        let table = matkowski_eliminate(&NonnegativeMatrix::zeros(2).unwrap());
        assert_eq!(table.pivots(), &[1.0, 1.0]);
        assert!(table.is_complete());
        for s in 0..2 {
            for i in s..2 {
                for j in s..2 {
                    if i != j {
                        assert_eq!(table.stage_entry(s, i, j), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn eliminate_identity_stops_at_stage_one() {
        let table = matkowski_eliminate(&NonnegativeMatrix::identity(2).unwrap());
        assert_eq!(table.pivots(), &[0.0]);
        assert_eq!(table.stages().len(), 1);
        assert_eq!(
            table.decision(),
            NormalityDecision::Undecided { index: 1, value: 0.0 }
        );
        assert!(!is_normal_matkowski(&NonnegativeMatrix::identity(2).unwrap()));
    }

    #[test]
    fn eliminate_matches_hand_recursion_2x2() {
        // Oracle: direct determinant of I - A agrees with the final pivot.
        let a = symmetric_half_quarter();
        let table = matkowski_eliminate(&a);
        assert_eq!(table.pivots(), &[0.5, 0.1875]);
        let det = (1.0 - 0.5) * (1.0 - 0.5) - 0.25 * 0.25;
        assert_eq!(det, 0.1875);
        assert!(table.is_complete());
        assert!(!table.scaled());
    }

    #[test]
    fn eliminate_three_by_three_hand_values() {
        let table = matkowski_eliminate(&tripled_point_two());
        assert_eq!(table.pivots().len(), 3);
        assert!((table.pivots()[0] - 0.8).abs() < 1e-15);
        assert!((table.pivots()[1] - 0.44).abs() < 1e-15);
        assert!((table.pivots()[2] - 0.256).abs() < 1e-15);
        // sigma updates from the all-ones start
        assert!((table.sigmas()[1][0] - 1.0).abs() < 1e-15);
        assert!((table.sigmas()[2][0] - 0.64).abs() < 1e-15);
    }

    #[test]
    fn stage_pivots_track_minors_times_earlier_pivots() {
        // For a 3x3 table (no rescaling), the last pivot equals the full
        // determinant of I - A multiplied by the first pivot, and the second
        // pivot equals the 2x2 minor exactly.
        let a = tripled_point_two();
        let table = matkowski_eliminate(&a);
        let minors = leading_minors(&a);
        assert!((minors[2] - 0.32).abs() < 1e-15);
        assert!((table.pivots()[2] - minors[2] * table.pivots()[0]).abs() < 1e-14);
        assert!((table.pivots()[1] - minors[1]).abs() < 1e-15);
    }

    #[test]
    fn off_diagonal_stage_entries_stay_nonnegative() {
        let a = matrix(&[
            &[0.1, 0.7, 0.05],
            &[0.3, 0.2, 0.4],
            &[0.0, 0.6, 0.1],
        ]);
        let table = matkowski_eliminate(&a);
        for (s, stage) in table.stages().iter().enumerate() {
            let m = a.dimension() - s;
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        assert!(stage[i * m + j] >= 0.0, "stage {s} entry ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn rescaling_preserves_decision_and_certificate() {
        let a = matrix(&[
            &[0.3, 0.5, 0.1, 0.0],
            &[0.2, 0.1, 0.3, 0.2],
            &[0.0, 0.4, 0.2, 0.1],
            &[0.3, 0.1, 0.2, 0.2],
        ]);
        let y = vec![1.0; 4];
        let raw = matkowski_eliminate_with(
            &a,
            &y,
            &EliminationOptions { rescale: RescalePolicy::Never, ..Default::default() },
        )
        .unwrap();
        let scaled = matkowski_eliminate_with(
            &a,
            &y,
            &EliminationOptions { rescale: RescalePolicy::Always, ..Default::default() },
        )
        .unwrap();
        assert!(scaled.scaled());
        assert_eq!(raw.decision().is_normal(), scaled.decision().is_normal());
        let z_raw = raw.back_substitute();
        let z_scaled = scaled.back_substitute();
        for (a, b) in z_raw.iter().zip(z_scaled.iter()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn normal_examples_decide_correctly() {
        assert!(is_normal_matkowski(&NonnegativeMatrix::zeros(2).unwrap()));
        assert!(!is_normal_matkowski(&NonnegativeMatrix::identity(2).unwrap()));
        assert!(is_normal_matkowski(&tripled_point_two()));
    }

    #[test]
    fn leading_minors_examples() {
        let minors = leading_minors(&symmetric_half_quarter());
        assert_eq!(minors, vec![0.5, 0.1875]);
        assert_eq!(leading_minors(&NonnegativeMatrix::zeros(3).unwrap()), vec![1.0; 3]);
        // coupled matrix with alpha = 0.8: minors (1 - 0.4, 1 - 0.8)
        let coupled = matrix(&[&[0.4, 0.4], &[0.4, 0.4]]);
        let minors = leading_minors(&coupled);
        assert!((minors[0] - 0.6).abs() < 1e-15);
        assert!((minors[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn admissibility_examples() {
        assert!(is_admissible(&NonnegativeMatrix::zeros(2).unwrap()));
        assert!(!is_admissible(&matrix(&[&[1.2]])));
        assert!(is_admissible(&symmetric_half_quarter()));
    }

    #[test]
    fn minors_pivoted_route_matches_cofactor_route() {
        // Same matrix evaluated both ways: n = 5 uses pivoted elimination,
        // its leading 4x4 restriction uses cofactors.
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| 0.07 * ((i * 5 + j + 1) % 7) as f64).collect())
            .collect();
        let a5 = NonnegativeMatrix::new(rows.clone()).unwrap();
        let a4 =
            NonnegativeMatrix::new(rows[..4].iter().map(|r| r[..4].to_vec()).collect()).unwrap();
        let minors5 = leading_minors(&a5);
        let minors4 = leading_minors(&a4);
        for i in 0..4 {
            assert!((minors5[i] - minors4[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_scalar_example() {
        let verdict = normality_certificate(&matrix(&[&[0.5]]), &[1.0]).unwrap();
        assert!(verdict.is_normal());
        assert_eq!(verdict.certificate().unwrap(), &[2.0]);
        assert_eq!(verdict.method(), Characterization::MatkowskiPivots);
    }

    #[test]
    fn certificate_symmetric_example() {
        let a = symmetric_half_quarter();
        let z = certificate_vector(&a, &[1.0, 1.0]).unwrap();
        assert_eq!(z, vec![4.0, 4.0]);
        let az = a.matvec(&z).unwrap();
        for i in 0..2 {
            assert!(az[i] < z[i]);
        }
    }

    #[test]
    fn certificate_rejects_identity_and_bad_rhs() {
        let identity = NonnegativeMatrix::identity(2).unwrap();
        assert!(matches!(
            normality_certificate(&identity, &[1.0, 1.0]),
            Err(MatrixError::NotNormal { stage: 1, .. })
        ));
        assert!(matches!(
            normality_certificate(&symmetric_half_quarter(), &[1.0, 0.0]),
            Err(MatrixError::BadRightHandSide { index: 1, .. })
        ));
    }

    #[test]
    fn certificate_residual_is_tiny() {
        let a = matrix(&[
            &[0.23, 0.11, 0.31],
            &[0.05, 0.42, 0.17],
            &[0.29, 0.08, 0.33],
        ]);
        let y = [0.7, 1.3, 2.1];
        let z = certificate_vector(&a, &y).unwrap();
        let az = a.matvec(&z).unwrap();
        for i in 0..3 {
            let residual = (z[i] - az[i]) - y[i];
            assert!(residual.abs() <= 1e-12 * y[i].abs().max(1.0));
            assert!(z[i] > 0.0);
            assert!(az[i] < z[i]);
        }
    }

    #[test]
    fn nu_estimate_examples() {
        let tol = 1e-9;
        assert_eq!(nu_estimate(&NonnegativeMatrix::zeros(3).unwrap(), tol).unwrap(), 0.0);
        // Oracle: largest root of l^2 - l + 0.1875 = 0.
        let oracle = 0.5 * (1.0 + (1.0_f64 - 4.0 * 0.1875).sqrt());
        assert_eq!(oracle, 0.75);
        let nu = nu_estimate(&symmetric_half_quarter(), tol).unwrap();
        assert!((nu - oracle).abs() <= tol);
        // rank-1 coupled matrix: eigenvalues {0, alpha}
        let coupled = matrix(&[&[0.4, 0.4], &[0.4, 0.4]]);
        let nu = nu_estimate(&coupled, tol).unwrap();
        assert!((nu - 0.8).abs() <= tol);
    }

    #[test]
    fn nu_estimate_attained_at_row_sum_bound() {
        // Constant row sums: nu equals the row sum exactly.
        let nu = nu_estimate(&matrix(&[&[1.2]]), 1e-10).unwrap();
        assert!((nu - 1.2).abs() <= 1e-10);
        assert!(matches!(
            nu_estimate(&matrix(&[&[0.5]]), 0.0),
            Err(MatrixError::InvalidTolerance)
        ));
    }

    #[test]
    fn spectral_radius_examples() {
        let tol = 1e-9;
        let zero = spectral_radius(&NonnegativeMatrix::zeros(2).unwrap(), tol).unwrap();
        assert!(zero.rho.abs() <= tol);
        assert!(zero.lower <= zero.rho && zero.rho <= zero.upper);

        let sym = spectral_radius(&symmetric_half_quarter(), tol).unwrap();
        assert!((sym.rho - 0.75).abs() <= tol);
        assert!(sym.upper - sym.lower <= tol);

        let tripled = spectral_radius(&tripled_point_two(), tol).unwrap();
        assert!((tripled.rho - 0.6).abs() <= tol);
    }

    #[test]
    fn spectral_radius_brackets_identity() {
        let est = spectral_radius(&NonnegativeMatrix::identity(3).unwrap(), 1e-8).unwrap();
        assert!(est.lower >= 1.0 - 1e-12);
        assert!((est.rho - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn asymptotic_examples() {
        let tol = 1e-8;
        assert!(is_asymptotic(&NonnegativeMatrix::zeros(2).unwrap(), tol, 4).unwrap());
        // nilpotent despite norm 2 at p = 1
        let nilpotent = matrix(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert!(is_asymptotic(&nilpotent, tol, 4).unwrap());
        assert!(!is_asymptotic(&NonnegativeMatrix::identity(2).unwrap(), tol, 8).unwrap());
        assert!(matches!(
            is_asymptotic(&nilpotent, tol, 0),
            Err(MatrixError::InvalidMaxPower)
        ));
    }

    #[test]
    fn neumann_inverse_examples() {
        let tol = 1e-10;
        let scalar = neumann_inverse(&matrix(&[&[0.5]]), tol).unwrap();
        assert!((scalar.entry(0, 0) - 2.0).abs() <= 10.0 * tol);

        // Oracle: 2x2 inverse of I - A by adjugate.
        let a = symmetric_half_quarter();
        let inv = neumann_inverse(&a, tol).unwrap();
        let det = 0.1875;
        let oracle = [[0.5 / det, 0.25 / det], [0.25 / det, 0.5 / det]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv.entry(i, j) - oracle[i][j]).abs() <= 1e-7);
                assert!(inv.entry(i, j) >= 0.0);
            }
        }

        let zero = NonnegativeMatrix::zeros(3).unwrap();
        assert_eq!(neumann_inverse(&zero, tol).unwrap(), NonnegativeMatrix::identity(3).unwrap());

        assert!(matches!(
            neumann_inverse(&NonnegativeMatrix::identity(2).unwrap(), tol),
            Err(MatrixError::NotNormal { .. })
        ));
    }

    #[test]
    fn neumann_residual_is_under_tolerance() {
        let a = matrix(&[
            &[0.23, 0.11, 0.31],
            &[0.05, 0.42, 0.17],
            &[0.29, 0.08, 0.33],
        ]);
        let tol = 1e-9;
        let s = neumann_inverse(&a, tol).unwrap();
        // residual (I - A) S - I, measured in the induced 1-norm
        let n = 3;
        let mut residual: f64 = 0.0;
        for j in 0..n {
            let mut column_sum = 0.0;
            for i in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    let ia = if i == k { 1.0 - a.entry(i, k) } else { -a.entry(i, k) };
                    v += ia * s.entry(k, j);
                }
                if i == j {
                    v -= 1.0;
                }
                column_sum += v.abs();
            }
            residual = residual.max(column_sum);
        }
        assert!(residual <= tol, "residual {residual:e}");
    }

    #[test]
    fn pivot_and_minor_signs_agree() {
        // predicate equality on a batch of structured matrices
        let cases = [
            matrix(&[&[0.9, 0.3], &[0.3, 0.9]]),
            matrix(&[&[0.1, 0.0], &[2.0, 0.1]]),
            matrix(&[&[1.5, 0.2], &[0.0, 0.4]]),
            tripled_point_two(),
            matrix(&[&[0.4, 0.4], &[0.4, 0.4]]),
            matrix(&[&[2.0]]),
        ];
        for a in &cases {
            assert_eq!(is_normal_matkowski(a), is_admissible(a));
        }
    }
}
