//! Ordered Picard iteration with certified residual bounds.
//!
//! Iterates a contractive map from an order-admissible start point, records
//! the residual trace together with the a-priori bound `alpha^n/(1-alpha) *
//! d(x0,x1)` and the a-posteriori bound `alpha/(1-alpha) * d(x_{n-1},x_n)`,
//! and stops when the a-posteriori bound falls under the tolerance. The
//! trace is monitored against the claimed contraction factor: a step that
//! grows faster than `alpha` aborts the run, since every bound above would
//! be unjustified.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::norms::one_norm_distance;
use crate::order::CoordinateOrder;

/// Total, deterministic, reentrant state map.
pub type StateMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Scalar metric oracle; must be symmetric and zero on the diagonal.
pub type ScalarMetric = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Slack factor for the trace contraction monitor.
const CONTRACTION_SLACK: f64 = 1e-9;
/// Steps on which the metric oracle is spot-checked.
const METRIC_SPOT_CHECKS: usize = 3;

#[derive(Debug, Error)]
pub enum PicardError {
    #[error("contraction factor alpha = {alpha} must lie strictly inside (0, 1)")]
    InvalidAlpha { alpha: f64 },
    #[error("tolerance must be strictly positive and finite")]
    InvalidTolerance,
    #[error("maximum iteration count must be at least 1")]
    InvalidMaxIter,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("start point does not precede its image (x0 <= T x0 fails)")]
    NotAscendingStart,
    #[error("iterate order violated at step {step} with require_ascending set")]
    AscentViolated { step: usize },
    #[error(
        "contraction claim violated at step {step}: residual {current:e} > alpha {alpha} * {previous:e}"
    )]
    ContractionViolated {
        step: usize,
        previous: f64,
        current: f64,
        alpha: f64,
    },
    #[error("maximum iterations exceeded before the a-posteriori bound met the tolerance")]
    MaxIterExceeded { run: Box<PicardRun> },
    #[error("pair {index} is not order-comparable")]
    IncomparablePair { index: usize },
    #[error("pair {index} has coincident points")]
    CoincidentPair { index: usize },
    #[error("distance {value} is negative")]
    NegativeDistance { value: f64 },
}

/// State-space descriptor plus map, start point, and claimed contraction factor.
///
/// Construction verifies the start admissibility `x0 <= T x0`; the claimed
/// `alpha` is trusted but monitored during iteration. `d`-completeness of the
/// metric and self-closedness of the order hold automatically for coordinate
/// spaces with coordinatewise orders; for user metrics they are obligations.
#[derive(Clone)]
pub struct OrderedProblem {
    order: CoordinateOrder,
    map: StateMap,
    start: Vec<f64>,
    alpha: f64,
    metric: ScalarMetric,
    require_ascending: bool,
}

impl OrderedProblem {
    pub fn new(
        order: CoordinateOrder,
        map: StateMap,
        start: Vec<f64>,
        alpha: f64,
    ) -> Result<Self, PicardError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(PicardError::InvalidAlpha { alpha });
        }
        let dim = order.dimension();
        if start.len() != dim {
            return Err(PicardError::DimensionMismatch {
                expected: dim,
                actual: start.len(),
            });
        }
        let image = map(&start);
        if image.len() != dim {
            return Err(PicardError::DimensionMismatch {
                expected: dim,
                actual: image.len(),
            });
        }
        if !order.leq(&start, &image) {
            return Err(PicardError::NotAscendingStart);
        }
        Ok(Self {
            order,
            map,
            start,
            alpha,
            metric: Arc::new(|x, y| one_norm_distance(x, y)),
            require_ascending: false,
        })
    }

    /// Replace the default 1-norm metric with a user oracle.
    pub fn with_metric(mut self, metric: ScalarMetric) -> Self {
        self.metric = metric;
        self
    }

    /// Escalate order violations along the trace from warnings to errors.
    pub fn with_require_ascending(mut self, require: bool) -> Self {
        self.require_ascending = require;
        self
    }

    pub fn dimension(&self) -> usize {
        self.order.dimension()
    }

    pub fn order(&self) -> &CoordinateOrder {
        &self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn map(&self) -> &StateMap {
        &self.map
    }

    pub fn metric(&self) -> &ScalarMetric {
        &self.metric
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterExceeded,
}

/// Trace of one Picard run.
///
/// Indexing convention: `iterates[n]` is `x_n`; `residuals[n] = d(x_n,
/// x_{n+1})`; `a_priori[n]` and `a_posteriori[n]` both bound `d(x_n, x*)`.
#[derive(Debug, Clone, Serialize)]
pub struct PicardRun {
    pub iterates: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub a_priori: Vec<f64>,
    pub a_posteriori: Vec<f64>,
    /// Whether step `n` preserved the order (`x_n <= x_{n+1}`).
    pub ascent_ok: Vec<bool>,
    pub warnings: Vec<String>,
    pub converged: bool,
    pub fixed_point: Option<Vec<f64>>,
    pub termination: Termination,
}

impl PicardRun {
    /// Number of map applications performed.
    pub fn steps(&self) -> usize {
        self.residuals.len()
    }
}

/// Iterate `T` from the problem's start point until the a-posteriori bound
/// drops below `tol` or `max_iter` steps are spent. The a-posteriori test
/// runs before the iteration-limit test each step; step-0 convergence is
/// declared when `d(x0, T x0)` is exactly zero.
pub fn picard_iterate(
    problem: &OrderedProblem,
    tol: f64,
    max_iter: usize,
) -> Result<PicardRun, PicardError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(PicardError::InvalidTolerance);
    }
    if max_iter == 0 {
        return Err(PicardError::InvalidMaxIter);
    }
    let dim = problem.dimension();
    let alpha = problem.alpha;
    let factor = alpha / (1.0 - alpha);
    let map = &problem.map;
    let metric = &problem.metric;

    let mut iterates = vec![problem.start.clone()];
    let mut residuals: Vec<f64> = Vec::new();
    let mut ascent_ok: Vec<bool> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut ascent_warned = false;

    let mut converged = false;
    let mut fixed_point: Option<Vec<f64>> = None;

    for step in 0..max_iter {
        let current = iterates.last().expect("nonempty").clone();
        let next = map(&current);
        if next.len() != dim {
            return Err(PicardError::DimensionMismatch {
                expected: dim,
                actual: next.len(),
            });
        }
        let residual = metric(&current, &next);

        if step < METRIC_SPOT_CHECKS {
            let diagonal = metric(&current, &current);
            if diagonal.abs() > 1e-12 {
                warnings.push(format!(
                    "metric oracle is nonzero on the diagonal at step {step}: {diagonal:e}"
                ));
            }
            let mirrored = metric(&next, &current);
            if (mirrored - residual).abs() > 1e-9 * residual.abs().max(1.0) {
                warnings.push(format!(
                    "metric oracle is asymmetric at step {step}: {residual:e} vs {mirrored:e}"
                ));
            }
        }

        let ascending = problem.order.leq(&current, &next);
        ascent_ok.push(ascending);
        if !ascending {
            if problem.require_ascending {
                return Err(PicardError::AscentViolated { step });
            }
            if !ascent_warned {
                warnings.push(format!("iterate order violated at step {step}"));
                ascent_warned = true;
            }
        }

        if let Some(&previous) = residuals.last() {
            if residual > alpha * previous * (1.0 + CONTRACTION_SLACK) {
                return Err(PicardError::ContractionViolated {
                    step: step - 1,
                    previous,
                    current: residual,
                    alpha,
                });
            }
        }

        residuals.push(residual);
        iterates.push(next.clone());

        if step == 0 && residual == 0.0 {
            converged = true;
            fixed_point = Some(current);
            break;
        }
        if factor * residual <= tol {
            converged = true;
            fixed_point = Some(next);
            break;
        }
    }

    let d01 = residuals[0];
    let a_priori: Vec<f64> = (0..iterates.len())
        .map(|n| alpha.powi(n as i32) * d01 / (1.0 - alpha))
        .collect();
    let mut a_posteriori = Vec::with_capacity(iterates.len());
    a_posteriori.push(d01 / (1.0 - alpha));
    for &r in &residuals {
        a_posteriori.push(factor * r);
    }
    a_posteriori.truncate(iterates.len());

    let termination = if converged {
        Termination::Converged
    } else {
        Termination::MaxIterExceeded
    };
    let run = PicardRun {
        iterates,
        residuals,
        a_priori,
        a_posteriori,
        ascent_ok,
        warnings,
        converged,
        fixed_point,
        termination,
    };
    if converged {
        Ok(run)
    } else {
        Err(PicardError::MaxIterExceeded { run: Box::new(run) })
    }
}

/// Banach residual bounds: `(alpha^n * d01 / (1 - alpha), alpha / (1 - alpha))`.
pub fn residual_bounds(alpha: f64, d01: f64, n: u32) -> Result<(f64, f64), PicardError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PicardError::InvalidAlpha { alpha });
    }
    if !(d01 >= 0.0) {
        return Err(PicardError::NegativeDistance { value: d01 });
    }
    let a_priori = alpha.powi(n as i32) * d01 / (1.0 - alpha);
    let factor = alpha / (1.0 - alpha);
    Ok((a_priori, factor))
}

/// `true` iff consecutive iterates ascend; transitivity extends the check to
/// every pair `n <= m`.
pub fn check_ascending(run: &PicardRun, order: &CoordinateOrder) -> bool {
    run.iterates
        .windows(2)
        .all(|pair| order.leq(&pair[0], &pair[1]))
}

/// Connected components of the comparability graph on a finite point set.
/// Components are returned as sorted index groups, ordered by smallest member,
/// so the partition is invariant under permutation of the input.
pub fn comparability_components(
    points: &[Vec<f64>],
    order: &CoordinateOrder,
) -> Vec<Vec<usize>> {
    let mut dsu = DisjointSet::new(points.len());
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if order.comparable(&points[i], &points[j]) {
                dsu.unite(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root: Vec<Option<usize>> = vec![None; points.len()];
    for i in 0..points.len() {
        let root = dsu.find(i);
        match group_of_root[root] {
            Some(g) => groups[g].push(i),
            None => {
                group_of_root[root] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Empirical contraction factor: max over comparable pairs of
/// `d(Tx, Ty) / d(x, y)`. A lower bound on any valid alpha for the map.
pub fn sample_contractivity(
    map: &StateMap,
    order: &CoordinateOrder,
    pairs: &[(Vec<f64>, Vec<f64>)],
    metric: &ScalarMetric,
) -> Result<f64, PicardError> {
    let mut worst = 0.0_f64;
    for (index, (x, y)) in pairs.iter().enumerate() {
        if !order.comparable(x, y) {
            return Err(PicardError::IncomparablePair { index });
        }
        let gap = metric(x, y);
        if gap == 0.0 {
            return Err(PicardError::CoincidentPair { index });
        }
        let image_gap = metric(&map(x), &map(y));
        worst = worst.max(image_gap / gap);
    }
    Ok(worst)
}

// ── union-find ──────────────────────────────────────────────────────────────

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(size: usize) -> Self {
        Self {
            parent: (0..size).collect(),
            rank: vec![0; size],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let parent = self.parent[x];
        if parent != x {
            self.parent[x] = self.find(parent);
        }
        self.parent[x]
    }

    fn unite(&mut self, x: usize, y: usize) {
        let xr = self.find(x);
        let yr = self.find(y);
        if xr == yr {
            return;
        }
        if self.rank[xr] < self.rank[yr] {
            self.parent[xr] = yr;
        } else if self.rank[xr] > self.rank[yr] {
            self.parent[yr] = xr;
        } else {
            self.parent[yr] = xr;
            self.rank[xr] += 1;
        }
    }
}

// ── tests ───────────────────────────────────────────────────────────────────
