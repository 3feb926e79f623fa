//! Coupled and tripled fixed-point problems reduced to the product machinery.
//!
//! A tripled problem asks for `(b1, b2, b3)` with `b1 = F(b1,b2,b3)`,
//! `b2 = F(b2,b1,b2)`, `b3 = F(b3,b2,b1)`. Stacking those three equations
//! turns `F` into a selfmap of the cube, ordered with the mixed directions
//! `(<=, >=, <=)`. The contraction coefficients `(a1, a2, a3)` of `F` stack
//! into an explicit 3x3 nonnegative matrix whose row sums all equal
//! `a1 + a2 + a3 < 1`, so the matrix is normal and the product solver
//! applies. A coupled problem is the same construction on two slots with the
//! rank-one matrix `(alpha/2) * ones`. The max metric over slots gives an
//! independent scalar route to the same fixed points.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonneg_matrix::{MatrixError, NonnegativeMatrix};
use crate::norms::{one_norm_distance, Renorming};
use crate::order::CoordinateOrder;
use crate::perov::{
    associate_selfmap, perov_solve, FactorMap, PerovError, ProductSpace, SystemOfMaps,
};
use crate::picard::{picard_iterate, OrderedProblem, PicardError, PicardRun, ScalarMetric, StateMap};

/// Map `F : X^3 -> X` on the base space `X = R^m`, taking the three slots.
pub type TripledMap = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// Map `G : X^2 -> X`.
pub type CoupledMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Error)]
pub enum CoupledTripledError {
    #[error("alpha component {index} = {value} must be strictly positive and finite")]
    NonpositiveAlpha { index: usize, value: f64 },
    #[error("alpha = {alpha} must lie strictly inside (0, 1)")]
    AlphaOutOfRange { alpha: f64 },
    #[error("alpha components sum to {sum} >= 1; the reduction is not contractive")]
    AlphaSumNotContractive { sum: f64 },
    #[error("start violates the admissibility inequalities at slot {slot}")]
    InvalidStart { slot: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("routes disagree: fixed points differ by {gap:e} > allowed {allowed:e}")]
    RouteDisagreement { gap: f64, allowed: f64 },
    #[error(transparent)]
    Perov(#[from] PerovError),
    #[error(transparent)]
    Picard(#[from] PicardError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

// ── contraction matrices ────────────────────────────────────────────────────

/// The stacked 3x3 contraction matrix of a tripled problem:
/// rows `(a1, a2, a3)`, `(a2, a1 + a3, 0)`, `(a3, a2, a1)`.
/// The zero in the middle row is structural; every row sums to `a1 + a2 + a3`.
pub fn tripled_matrix(alphas: (f64, f64, f64)) -> Result<NonnegativeMatrix, CoupledTripledError> {
    let parts = [alphas.0, alphas.1, alphas.2];
    for (index, &value) in parts.iter().enumerate() {
        if !value.is_finite() || value <= 0.0 {
            return Err(CoupledTripledError::NonpositiveAlpha { index, value });
        }
    }
    let (a1, a2, a3) = alphas;
    Ok(NonnegativeMatrix::new(vec![
        vec![a1, a2, a3],
        vec![a2, a1 + a3, 0.0],
        vec![a3, a2, a1],
    ])?)
}

/// The 2x2 coupled contraction matrix: both rows `(alpha/2, alpha/2)`.
/// Rank one, with spectral radius exactly `alpha`.
pub fn coupled_matrix(alpha: f64) -> Result<NonnegativeMatrix, CoupledTripledError> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(CoupledTripledError::AlphaOutOfRange { alpha });
    }
    let half = alpha / 2.0;
    Ok(NonnegativeMatrix::new(vec![vec![half, half], vec![half, half]])?)
}

// ── orders and metrics on the product ───────────────────────────────────────

/// Direction flags of the mixed tripled order: slots compare `(<=, >=, <=)`
/// relative to the base order.
pub fn tripled_order_directions(base: &CoordinateOrder) -> CoordinateOrder {
    CoordinateOrder::concat(&[base, &base.flipped(), base])
}

/// The mixed order on flattened triples: `x <= y` iff `x1 <= y1`, `x2 >= y2`,
/// `x3 <= y3` in the base order.
pub fn tripled_order(base: &CoordinateOrder, x: &[f64], y: &[f64]) -> bool {
    tripled_order_directions(base).leq(x, y)
}

/// Direction flags of the coupled order: slots compare `(<=, >=)`.
pub fn coupled_order_directions(base: &CoordinateOrder) -> CoordinateOrder {
    CoordinateOrder::concat(&[base, &base.flipped()])
}

/// Max metric over equal-size slots: `D(x, y) = max_i d(x_i, y_i)`.
pub fn max_metric(d: &ScalarMetric, base_dim: usize, x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    debug_assert_eq!(x.len() % base_dim, 0);
    x.chunks(base_dim)
        .zip(y.chunks(base_dim))
        .map(|(a, b)| d(a, b))
        .fold(0.0, f64::max)
}

// ── associated selfmaps ─────────────────────────────────────────────────────

/// Selfmap of the cube whose fixed points are exactly the tripled fixed
/// points: `T x = (F(x1,x2,x3), F(x2,x1,x2), F(x3,x2,x1))`.
pub fn tripled_associated_map(f: &TripledMap, base_dim: usize) -> StateMap {
    let f = f.clone();
    Arc::new(move |x: &[f64]| {
        let (x1, x2, x3) = (&x[..base_dim], &x[base_dim..2 * base_dim], &x[2 * base_dim..]);
        let mut out = f(x1, x2, x3);
        out.extend(f(x2, x1, x2));
        out.extend(f(x3, x2, x1));
        out
    })
}

/// Selfmap of the square for coupled problems: `T(x, y) = (G(x,y), G(y,x))`.
pub fn coupled_associated_map(g: &CoupledMap, base_dim: usize) -> StateMap {
    let g = g.clone();
    Arc::new(move |x: &[f64]| {
        let (x1, x2) = (&x[..base_dim], &x[base_dim..]);
        let mut out = g(x1, x2);
        out.extend(g(x2, x1));
        out
    })
}

// ── problems ────────────────────────────────────────────────────────────────

/// Tripled problem data; construction verifies the coefficient constraints
/// and the start admissibility `a1 <= F(a1,a2,a3)`, `a2 >= F(a2,a1,a2)`,
/// `a3 <= F(a3,a2,a1)`.
pub struct TripledProblem {
    f: TripledMap,
    base_order: CoordinateOrder,
    alphas: (f64, f64, f64),
    start: [Vec<f64>; 3],
    monotone_declared: bool,
}

impl TripledProblem {
    pub fn new(
        base_order: CoordinateOrder,
        f: TripledMap,
        alphas: (f64, f64, f64),
        start: [Vec<f64>; 3],
        monotone_declared: bool,
    ) -> Result<Self, CoupledTripledError> {
        let parts = [alphas.0, alphas.1, alphas.2];
        for (index, &value) in parts.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(CoupledTripledError::NonpositiveAlpha { index, value });
            }
        }
        let sum = alphas.0 + alphas.1 + alphas.2;
        if sum >= 1.0 {
            return Err(CoupledTripledError::AlphaSumNotContractive { sum });
        }
        let m = base_order.dimension();
        for slot in &start {
            if slot.len() != m {
                return Err(CoupledTripledError::DimensionMismatch {
                    expected: m,
                    actual: slot.len(),
                });
            }
        }
        let (a1, a2, a3) = (&start[0], &start[1], &start[2]);
        let images = [f(a1, a2, a3), f(a2, a1, a2), f(a3, a2, a1)];
        for image in &images {
            if image.len() != m {
                return Err(CoupledTripledError::DimensionMismatch {
                    expected: m,
                    actual: image.len(),
                });
            }
        }
        if !base_order.leq(a1, &images[0]) {
            return Err(CoupledTripledError::InvalidStart { slot: 0 });
        }
        if !base_order.leq(&images[1], a2) {
            return Err(CoupledTripledError::InvalidStart { slot: 1 });
        }
        if !base_order.leq(a3, &images[2]) {
            return Err(CoupledTripledError::InvalidStart { slot: 2 });
        }
        Ok(Self {
            f,
            base_order,
            alphas,
            start,
            monotone_declared,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.base_order.dimension()
    }

    pub fn alphas(&self) -> (f64, f64, f64) {
        self.alphas
    }
}

/// Coupled problem data: `G : X^2 -> X` with slots `(x, y)` and `(y, x)`,
/// order directions `(<=, >=)`, and coefficient `alpha` in `(0, 1)`.
pub struct CoupledProblem {
    g: CoupledMap,
    base_order: CoordinateOrder,
    alpha: f64,
    start: [Vec<f64>; 2],
    monotone_declared: bool,
}

impl CoupledProblem {
    pub fn new(
        base_order: CoordinateOrder,
        g: CoupledMap,
        alpha: f64,
        start: [Vec<f64>; 2],
        monotone_declared: bool,
    ) -> Result<Self, CoupledTripledError> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(CoupledTripledError::AlphaOutOfRange { alpha });
        }
        let m = base_order.dimension();
        for slot in &start {
            if slot.len() != m {
                return Err(CoupledTripledError::DimensionMismatch {
                    expected: m,
                    actual: slot.len(),
                });
            }
        }
        let (a1, a2) = (&start[0], &start[1]);
        let forward = g(a1, a2);
        let backward = g(a2, a1);
        if forward.len() != m || backward.len() != m {
            return Err(CoupledTripledError::DimensionMismatch {
                expected: m,
                actual: forward.len().max(backward.len()),
            });
        }
        if !base_order.leq(a1, &forward) {
            return Err(CoupledTripledError::InvalidStart { slot: 0 });
        }
        if !base_order.leq(&backward, a2) {
            return Err(CoupledTripledError::InvalidStart { slot: 1 });
        }
        Ok(Self {
            g,
            base_order,
            alpha,
            start,
            monotone_declared,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.base_order.dimension()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

// ── solving ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Matrix contraction through the certificate renorming (the default).
    Vector,
    /// Scalar contraction in the max metric over slots.
    MaxMetric,
    /// Run both and cross-check the fixed points (diagnostic).
    Both,
}

/// Cross-route diagnostic: the other route's fixed point and the max-metric
/// gap between the two.
#[derive(Debug, Clone, Serialize)]
pub struct RouteCrossCheck {
    pub other_route: Route,
    pub other_fixed_point: Vec<f64>,
    pub gap: f64,
}

/// Result of a coupled or tripled solve.
#[derive(Debug, Clone, Serialize)]
pub struct ProductSolve {
    pub route: Route,
    pub run: PicardRun,
    /// Certificate and renorming when the vector route ran.
    pub certificate: Option<Vec<f64>>,
    pub renorming: Option<Renorming>,
    pub vector_residuals: Option<Vec<Vec<f64>>>,
    /// Residuals of the defining equations at the computed point, one per slot.
    pub slot_residuals: Vec<f64>,
    pub cross_check: Option<RouteCrossCheck>,
}

impl ProductSolve {
    pub fn fixed_point(&self) -> Option<&[f64]> {
        self.run.fixed_point.as_deref()
    }
}

/// Everything a reduction needs to run either route.
struct Reduction {
    slot_orders: Vec<CoordinateOrder>,
    components: Vec<FactorMap>,
    start_parts: Vec<Vec<f64>>,
    matrix: NonnegativeMatrix,
    scalar_alpha: f64,
    base_dim: usize,
    monotone_declared: bool,
}

impl Reduction {
    fn solve(
        &self,
        tol: f64,
        max_iter: usize,
        route: Route,
    ) -> Result<ProductSolve, CoupledTripledError> {
        match route {
            Route::Vector => self.solve_vector(tol, max_iter),
            Route::MaxMetric => self.solve_max_metric(tol, max_iter),
            Route::Both => {
                let vector = self.solve_vector(tol, max_iter)?;
                let scalar = self.solve_max_metric(tol, max_iter)?;
                let d: ScalarMetric = Arc::new(|x, y| one_norm_distance(x, y));
                let gap = max_metric(
                    &d,
                    self.base_dim,
                    vector.fixed_point().expect("converged"),
                    scalar.fixed_point().expect("converged"),
                );
                let allowed = 20.0 * tol;
                if gap > allowed {
                    return Err(CoupledTripledError::RouteDisagreement { gap, allowed });
                }
                let mut combined = vector;
                combined.route = Route::Both;
                combined.cross_check = Some(RouteCrossCheck {
                    other_route: Route::MaxMetric,
                    other_fixed_point: scalar.fixed_point().expect("converged").to_vec(),
                    gap,
                });
                Ok(combined)
            }
        }
    }

    fn space(&self) -> Result<ProductSpace, PerovError> {
        let metric: ScalarMetric = Arc::new(|x, y| one_norm_distance(x, y));
        ProductSpace::new(
            self.slot_orders.clone(),
            vec![metric; self.slot_orders.len()],
        )
    }

    fn solve_vector(&self, tol: f64, max_iter: usize) -> Result<ProductSolve, CoupledTripledError> {
        let space = self.space()?;
        let system = SystemOfMaps::new(space, self.components.clone(), &self.start_parts)?;
        let solved = perov_solve(&system, &self.matrix, tol, max_iter)?;
        let mut run = solved.run;
        self.append_monotone_warning(&mut run);
        let slot_residuals = self.slot_residuals(&run)?;
        Ok(ProductSolve {
            route: Route::Vector,
            run,
            certificate: Some(solved.certificate),
            renorming: Some(solved.renorming),
            vector_residuals: Some(solved.vector_residuals),
            slot_residuals,
            cross_check: None,
        })
    }

    fn solve_max_metric(
        &self,
        tol: f64,
        max_iter: usize,
    ) -> Result<ProductSolve, CoupledTripledError> {
        let space = self.space()?;
        let system = SystemOfMaps::new(space, self.components.clone(), &self.start_parts)?;
        let order =
            CoordinateOrder::concat(&self.slot_orders.iter().collect::<Vec<_>>());
        let base_dim = self.base_dim;
        let base: ScalarMetric = Arc::new(|x, y| one_norm_distance(x, y));
        let metric: ScalarMetric =
            Arc::new(move |x: &[f64], y: &[f64]| max_metric(&base, base_dim, x, y));
        let problem = OrderedProblem::new(
            order,
            associate_selfmap(&system),
            system.start().to_vec(),
            self.scalar_alpha,
        )
        .map_err(PerovError::from)?
        .with_metric(metric);
        let mut run = picard_iterate(&problem, tol, max_iter).map_err(PerovError::from)?;
        self.append_monotone_warning(&mut run);
        let slot_residuals = self.slot_residuals(&run)?;
        Ok(ProductSolve {
            route: Route::MaxMetric,
            run,
            certificate: None,
            renorming: None,
            vector_residuals: None,
            slot_residuals,
            cross_check: None,
        })
    }

    /// At a fixed point of the associated selfmap, the image slots are
    /// exactly the defining-equation right-hand sides, so the slot residuals
    /// are the per-slot distances to the image.
    fn slot_residuals(&self, run: &PicardRun) -> Result<Vec<f64>, CoupledTripledError> {
        let point = run
            .fixed_point
            .as_deref()
            .unwrap_or_else(|| run.iterates.last().expect("nonempty trace"));
        let mut image = Vec::with_capacity(point.len());
        for component in &self.components {
            image.extend(component(point));
        }
        Ok(point
            .chunks(self.base_dim)
            .zip(image.chunks(self.base_dim))
            .map(|(a, b)| one_norm_distance(a, b))
            .collect())
    }

    /// Declared mixed monotonicity makes the trace ascend from an admissible
    /// start; a broken ascent chain is evidence against the declaration.
    fn append_monotone_warning(&self, run: &mut PicardRun) {
        if !self.monotone_declared {
            return;
        }
        if let Some(step) = run.ascent_ok.iter().position(|&ok| !ok) {
            run.warnings.push(format!(
                "declared mixed monotonicity is inconsistent with the trace: order break at step {step}"
            ));
        }
    }
}

fn tripled_reduction(problem: &TripledProblem) -> Result<Reduction, CoupledTripledError> {
    let m = problem.base_dim();
    let base = problem.base_order.clone();
    let slot_orders = vec![base.clone(), base.flipped(), base.clone()];
    let f = &problem.f;
    let components: Vec<FactorMap> = (0..3)
        .map(|slot| {
            let f = f.clone();
            let component: FactorMap = Arc::new(move |x: &[f64]| {
                let (x1, x2, x3) = (&x[..m], &x[m..2 * m], &x[2 * m..]);
                match slot {
                    0 => f(x1, x2, x3),
                    1 => f(x2, x1, x2),
                    _ => f(x3, x2, x1),
                }
            });
            component
        })
        .collect();
    Ok(Reduction {
        slot_orders,
        components,
        start_parts: problem.start.to_vec(),
        matrix: tripled_matrix(problem.alphas)?,
        scalar_alpha: problem.alphas.0 + problem.alphas.1 + problem.alphas.2,
        base_dim: m,
        monotone_declared: problem.monotone_declared,
    })
}

fn coupled_reduction(problem: &CoupledProblem) -> Result<Reduction, CoupledTripledError> {
    let m = problem.base_dim();
    let base = problem.base_order.clone();
    let slot_orders = vec![base.clone(), base.flipped()];
    let g = &problem.g;
    let components: Vec<FactorMap> = (0..2)
        .map(|slot| {
            let g = g.clone();
            let component: FactorMap = Arc::new(move |x: &[f64]| {
                let (x1, x2) = (&x[..m], &x[m..]);
                if slot == 0 {
                    g(x1, x2)
                } else {
                    g(x2, x1)
                }
            });
            component
        })
        .collect();
    Ok(Reduction {
        slot_orders,
        components,
        start_parts: problem.start.to_vec(),
        matrix: coupled_matrix(problem.alpha)?,
        scalar_alpha: problem.alpha,
        base_dim: m,
        monotone_declared: problem.monotone_declared,
    })
}

/// Solve a tripled problem on the chosen route. Both routes report the
/// residuals of the three defining equations at the computed point.
pub fn solve_tripled(
    problem: &TripledProblem,
    tol: f64,
    max_iter: usize,
    route: Route,
) -> Result<ProductSolve, CoupledTripledError> {
    tripled_reduction(problem)?.solve(tol, max_iter, route)
}

/// Solve a coupled problem on the chosen route.
pub fn solve_coupled(
    problem: &CoupledProblem,
    tol: f64,
    max_iter: usize,
    route: Route,
) -> Result<ProductSolve, CoupledTripledError> {
    coupled_reduction(problem)?.solve(tol, max_iter, route)
}

// ── tests ───────────────────────────────────────────────────────────────────
