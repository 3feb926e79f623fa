//! Vector-valued metric layer and the matrix-contraction solver.
//!
//! A product of ordered metric factors carries the vector metric
//! `Delta(x, y) = (d_1(x_1, y_1), ..., d_q(x_q, y_q))` and the componentwise
//! product order. A system of maps `T_i : X -> X_i` assembles into a selfmap
//! of the product; when the system contracts `Delta` through a normal
//! nonnegative matrix `A`, the certificate renorming scalarizes the vector
//! metric into `e = ||Delta||_A` under which the assembled map is a plain
//! `alpha`-contraction, and the ordered Picard engine finishes the job.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::nonneg_matrix::{MatrixError, NonnegativeMatrix};
use crate::norms::{build_renorming, one_norm_distance, weighted_max_norm, NormError, Renorming};
use crate::order::CoordinateOrder;
use crate::picard::{picard_iterate, OrderedProblem, PicardError, PicardRun, ScalarMetric, StateMap};

/// Componentwise tolerance for sampled contraction checks.
const CONTRACTION_CHECK_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PerovError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("product space needs at least one factor")]
    EmptyProduct,
    #[error("factor metric {factor} failed a spot-check: {detail}")]
    InvalidFactorMetric { factor: usize, detail: String },
    #[error("start point is not admissible: component {factor} does not precede its image")]
    InadmissibleStart { factor: usize },
    #[error("pair {index} is not order-comparable")]
    IncomparablePair { index: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Picard(#[from] PicardError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

// ── product space ───────────────────────────────────────────────────────────

/// Finite product of ordered metric coordinate spaces, flattened for storage:
/// factor `i` occupies the slice `offsets[i]..offsets[i+1]`.
#[derive(Clone)]
pub struct ProductSpace {
    factor_orders: Vec<CoordinateOrder>,
    factor_metrics: Vec<ScalarMetric>,
    offsets: Vec<usize>,
}

impl ProductSpace {
    /// Build from per-factor orders and scalar metric oracles. Each metric is
    /// spot-checked for symmetry and vanishing on the diagonal.
    pub fn new(
        factor_orders: Vec<CoordinateOrder>,
        factor_metrics: Vec<ScalarMetric>,
    ) -> Result<Self, PerovError> {
        if factor_orders.is_empty() {
            return Err(PerovError::EmptyProduct);
        }
        if factor_metrics.len() != factor_orders.len() {
            return Err(PerovError::DimensionMismatch {
                expected: factor_orders.len(),
                actual: factor_metrics.len(),
            });
        }
        let mut offsets = vec![0];
        for order in &factor_orders {
            offsets.push(offsets.last().unwrap() + order.dimension());
        }
        for (factor, (order, metric)) in factor_orders.iter().zip(&factor_metrics).enumerate() {
            let zero = vec![0.0; order.dimension()];
            let probe: Vec<f64> = (0..order.dimension()).map(|i| 1.0 + i as f64).collect();
            if metric(&zero, &zero) != 0.0 || metric(&probe, &probe) != 0.0 {
                return Err(PerovError::InvalidFactorMetric {
                    factor,
                    detail: "nonzero on the diagonal".into(),
                });
            }
            let forward = metric(&zero, &probe);
            let backward = metric(&probe, &zero);
            if (forward - backward).abs() > 1e-12 * forward.abs().max(1.0) {
                return Err(PerovError::InvalidFactorMetric {
                    factor,
                    detail: format!("asymmetric: {forward} vs {backward}"),
                });
            }
        }
        Ok(Self {
            factor_orders,
            factor_metrics,
            offsets,
        })
    }

    /// Product of identical factors with the 1-norm metric on each.
    pub fn uniform(q: usize, factor_order: CoordinateOrder) -> Result<Self, PerovError> {
        let metric: ScalarMetric = Arc::new(|x, y| one_norm_distance(x, y));
        Self::new(vec![factor_order; q], vec![metric; q])
    }

    pub fn factor_count(&self) -> usize {
        self.factor_orders.len()
    }

    pub fn factor_dim(&self, i: usize) -> usize {
        self.factor_orders[i].dimension()
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn factor_order(&self, i: usize) -> &CoordinateOrder {
        &self.factor_orders[i]
    }

    pub fn factor_metric(&self, i: usize) -> &ScalarMetric {
        &self.factor_metrics[i]
    }

    /// The product order: concatenation of the factor direction flags.
    pub fn product_order(&self) -> CoordinateOrder {
        CoordinateOrder::concat(&self.factor_orders.iter().collect::<Vec<_>>())
    }

    /// Slice factor `i` out of a flattened point.
    pub fn factor<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Flatten per-factor components into a single point.
    pub fn flatten(&self, parts: &[Vec<f64>]) -> Result<Vec<f64>, PerovError> {
        if parts.len() != self.factor_count() {
            return Err(PerovError::DimensionMismatch {
                expected: self.factor_count(),
                actual: parts.len(),
            });
        }
        let mut flat = Vec::with_capacity(self.total_dim());
        for (i, part) in parts.iter().enumerate() {
            if part.len() != self.factor_dim(i) {
                return Err(PerovError::DimensionMismatch {
                    expected: self.factor_dim(i),
                    actual: part.len(),
                });
            }
            flat.extend_from_slice(part);
        }
        Ok(flat)
    }

    fn check_point(&self, x: &[f64]) -> Result<(), PerovError> {
        if x.len() != self.total_dim() {
            return Err(PerovError::DimensionMismatch {
                expected: self.total_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// The vector metric: componentwise factor distances.
pub fn product_metric(space: &ProductSpace, x: &[f64], y: &[f64]) -> Result<Vec<f64>, PerovError> {
    space.check_point(x)?;
    space.check_point(y)?;
    Ok((0..space.factor_count())
        .map(|i| (space.factor_metrics[i])(space.factor(x, i), space.factor(y, i)))
        .collect())
}

/// Scalarize a vector distance through the renorming: `||delta||_A`.
pub fn scalarize(delta: &[f64], renorming: &Renorming) -> Result<f64, PerovError> {
    Ok(weighted_max_norm(delta, renorming)?)
}

// ── systems of maps ─────────────────────────────────────────────────────────

/// Component map `T_i : X -> X_i`, evaluated on the flattened product point.
pub type FactorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A system `(T_1, ..., T_q)` over a product space, with an admissible start:
/// `a_i <=_i T_i(a)` for every factor, checked at construction.
pub struct SystemOfMaps {
    space: ProductSpace,
    components: Vec<FactorMap>,
    start: Vec<f64>,
}

impl SystemOfMaps {
    pub fn new(
        space: ProductSpace,
        components: Vec<FactorMap>,
        start_parts: &[Vec<f64>],
    ) -> Result<Self, PerovError> {
        if components.len() != space.factor_count() {
            return Err(PerovError::DimensionMismatch {
                expected: space.factor_count(),
                actual: components.len(),
            });
        }
        let start = space.flatten(start_parts)?;
        for (i, component) in components.iter().enumerate() {
            let image = component(&start);
            if image.len() != space.factor_dim(i) {
                return Err(PerovError::DimensionMismatch {
                    expected: space.factor_dim(i),
                    actual: image.len(),
                });
            }
            if !space.factor_order(i).leq(space.factor(&start, i), &image) {
                return Err(PerovError::InadmissibleStart { factor: i });
            }
        }
        Ok(Self {
            space,
            components,
            start,
        })
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }
}

/// Assemble the associated selfmap `T x = (T_1 x, ..., T_q x)`.
pub fn associate_selfmap(system: &SystemOfMaps) -> StateMap {
    let components = system.components.clone();
    let total = system.space.total_dim();
    Arc::new(move |x: &[f64]| {
        let mut out = Vec::with_capacity(total);
        for component in &components {
            out.extend(component(x));
        }
        out
    })
}

/// Linear system `x = Ax + b` as a system of scalar factors with the
/// 1-norm metric; `A` doubles as its own contraction datum.
pub fn linear_system(
    a: &NonnegativeMatrix,
    b: &[f64],
    start: &[f64],
) -> Result<SystemOfMaps, PerovError> {
    let n = a.dimension();
    if b.len() != n {
        return Err(PerovError::DimensionMismatch { expected: n, actual: b.len() });
    }
    if start.len() != n {
        return Err(PerovError::DimensionMismatch { expected: n, actual: start.len() });
    }
    let space = ProductSpace::uniform(n, CoordinateOrder::ascending(1))?;
    let components: Vec<FactorMap> = (0..n)
        .map(|i| {
            let row: Vec<f64> = a.row(i).to_vec();
            let offset = b[i];
            let component: FactorMap = Arc::new(move |x: &[f64]| {
                let mut acc = offset;
                for (coefficient, value) in row.iter().zip(x.iter()) {
                    acc += coefficient * value;
                }
                vec![acc]
            });
            component
        })
        .collect();
    let start_parts: Vec<Vec<f64>> = start.iter().map(|&v| vec![v]).collect();
    SystemOfMaps::new(space, components, &start_parts)
}

// ── contraction verification ────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct ContractionViolation {
    pub pair: usize,
    pub component: usize,
    pub observed: f64,
    pub allowed: f64,
}

/// Sampling report for the vector contraction `Delta(Tx, Ty) <= A Delta(x, y)`.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub pairs_checked: usize,
    /// Worst componentwise `Delta(Tx,Ty)_i - (A Delta(x,y))_i`; negative
    /// means the sampled pairs all satisfied the bound with room to spare.
    pub worst_slack: f64,
    pub violations: Vec<ContractionViolation>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the matrix contraction condition on explicit comparable pairs.
/// Sampling evidence only, never a proof.
pub fn verify_vector_contraction(
    map: &StateMap,
    space: &ProductSpace,
    a: &NonnegativeMatrix,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<ContractionReport, PerovError> {
    if a.dimension() != space.factor_count() {
        return Err(PerovError::DimensionMismatch {
            expected: space.factor_count(),
            actual: a.dimension(),
        });
    }
    let order = space.product_order();
    let mut worst_slack = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (index, (x, y)) in pairs.iter().enumerate() {
        space.check_point(x)?;
        space.check_point(y)?;
        if !order.comparable(x, y) {
            return Err(PerovError::IncomparablePair { index });
        }
        let delta = product_metric(space, x, y)?;
        let image_delta = product_metric(space, &map(x), &map(y))?;
        let allowed = a.matvec(&delta)?;
        for component in 0..space.factor_count() {
            let slack = image_delta[component] - allowed[component];
            worst_slack = worst_slack.max(slack);
            if slack > CONTRACTION_CHECK_SLACK {
                violations.push(ContractionViolation {
                    pair: index,
                    component,
                    observed: image_delta[component],
                    allowed: allowed[component],
                });
            }
        }
    }
    Ok(ContractionReport {
        pairs_checked: pairs.len(),
        worst_slack: if pairs.is_empty() { 0.0 } else { worst_slack },
        violations,
    })
}

// ── solver ──────────────────────────────────────────────────────────────────

/// A Picard run together with the matrix-contraction artifacts that drove it.
#[derive(Debug, Clone, Serialize)]
pub struct PerovRun {
    pub run: PicardRun,
    /// Vector residuals `Delta(x_n, x_{n+1})` along the trace.
    pub vector_residuals: Vec<Vec<f64>>,
    pub certificate: Vec<f64>,
    pub renorming: Renorming,
}

impl PerovRun {
    pub fn fixed_point(&self) -> Option<&[f64]> {
        self.run.fixed_point.as_deref()
    }
}

/// Solve the system by Picard iteration in the scalarized metric
/// `e(x, y) = ||Delta(x, y)||_A`.
///
/// The pipeline: certificate for `A` -> renorming (contraction factor
/// `alpha < 1`) -> ordered problem with metric `e` -> iteration. The trace is
/// monitored against `alpha`; a violating step surfaces as
/// `ContractionViolated`, signalling that `A` does not actually dominate the
/// system on the visited pairs.
pub fn perov_solve(
    system: &SystemOfMaps,
    a: &NonnegativeMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<PerovRun, PerovError> {
    let space = system.space();
    if a.dimension() != space.factor_count() {
        return Err(PerovError::DimensionMismatch {
            expected: space.factor_count(),
            actual: a.dimension(),
        });
    }
    let renorming = build_renorming(a)?;
    let certificate = renorming.weights().to_vec();

    let metric_space = space.clone();
    let metric_renorming = renorming.clone();
    let metric: ScalarMetric = Arc::new(move |x: &[f64], y: &[f64]| {
        let delta = product_metric(&metric_space, x, y).expect("dimensions fixed by solver");
        weighted_max_norm(&delta, &metric_renorming).expect("weights match factor count")
    });

    let problem = OrderedProblem::new(
        space.product_order(),
        associate_selfmap(system),
        system.start().to_vec(),
        renorming.positive_alpha(),
    )?
    .with_metric(metric);

    let run = picard_iterate(&problem, tol, max_iter)?;
    let vector_residuals = trace_vector_residuals(space, &run)?;
    Ok(PerovRun {
        run,
        vector_residuals,
        certificate,
        renorming,
    })
}

/// Vector residuals `Delta(x_n, x_{n+1})` along a finished trace.
pub fn trace_vector_residuals(
    space: &ProductSpace,
    run: &PicardRun,
) -> Result<Vec<Vec<f64>>, PerovError> {
    run.iterates
        .windows(2)
        .map(|pair| product_metric(space, &pair[0], &pair[1]))
        .collect()
}

// ── tests ───────────────────────────────────────────────────────────────────
