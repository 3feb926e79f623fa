//! Expression trees and named map families for problem ingest.
//!
//! General systems arrive as JSON: either one of the built-in families
//! (`linear`, `affine`, `affine_saturated`) given by a real rectangular
//! matrix, or an explicit expression tree per output coordinate built from
//! constants, coordinate projections, `add`, `mul`, `min`, and `max`.

use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::picard::StateMap;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("coordinate {index} is out of range for input dimension {dim}")]
    CoordOutOfRange { index: usize, dim: usize },
    #[error("operator '{op}' needs at least one argument")]
    EmptyArguments { op: &'static str },
    #[error("matrix rows are ragged or empty")]
    RaggedRows,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("map has no output coordinates")]
    EmptyOutputs,
    #[error("saturation bounds are inverted at coordinate {index}")]
    InvertedBounds { index: usize },
}

/// Scalar expression over a flattened input vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, input: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => input[*i],
            Expr::Add(args) => args.iter().map(|a| a.eval(input)).sum(),
            Expr::Mul(args) => args.iter().map(|a| a.eval(input)).product(),
            Expr::Min(args) => args
                .iter()
                .map(|a| a.eval(input))
                .fold(f64::INFINITY, f64::min),
            Expr::Max(args) => args
                .iter()
                .map(|a| a.eval(input))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Check coordinate references and argument arities against an input dimension.
    pub fn validate(&self, dim: usize) -> Result<(), ExprError> {
        match self {
            Expr::Const(_) => Ok(()),
            Expr::Coord(i) => {
                if *i < dim {
                    Ok(())
                } else {
                    Err(ExprError::CoordOutOfRange { index: *i, dim })
                }
            }
            Expr::Add(args) | Expr::Mul(args) => args.iter().try_for_each(|a| a.validate(dim)),
            Expr::Min(args) => {
                if args.is_empty() {
                    return Err(ExprError::EmptyArguments { op: "min" });
                }
                args.iter().try_for_each(|a| a.validate(dim))
            }
            Expr::Max(args) => {
                if args.is_empty() {
                    return Err(ExprError::EmptyArguments { op: "max" });
                }
                args.iter().try_for_each(|a| a.validate(dim))
            }
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(None)?;
        match self {
            Expr::Const(c) => map.serialize_entry("const", c)?,
            Expr::Coord(i) => map.serialize_entry("coord", i)?,
            Expr::Add(args) => {
                map.serialize_entry("op", "add")?;
                map.serialize_entry("args", args)?;
            }
            Expr::Mul(args) => {
                map.serialize_entry("op", "mul")?;
                map.serialize_entry("args", args)?;
            }
            Expr::Min(args) => {
                map.serialize_entry("op", "min")?;
                map.serialize_entry("args", args)?;
            }
            Expr::Max(args) => {
                map.serialize_entry("op", "max")?;
                map.serialize_entry("args", args)?;
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Const {
                #[serde(rename = "const")]
                value: f64,
            },
            Coord {
                coord: usize,
            },
            Node {
                op: String,
                args: Vec<Expr>,
            },
        }
        match Repr::deserialize(deserializer)? {
            Repr::Const { value } => Ok(Expr::Const(value)),
            Repr::Coord { coord } => Ok(Expr::Coord(coord)),
            Repr::Node { op, args } => match op.as_str() {
                "add" => Ok(Expr::Add(args)),
                "mul" => Ok(Expr::Mul(args)),
                "min" => Ok(Expr::Min(args)),
                "max" => Ok(Expr::Max(args)),
                other => Err(D::Error::custom(format!(
                    "unknown operator '{other}' (expected add, mul, min, or max)"
                ))),
            },
        }
    }
}

/// Named map families accepted on ingest. The matrices here are arbitrary
/// real rectangular arrays: they describe the map itself, not the
/// nonnegative contraction datum, which always travels separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// `x -> R x`
    Linear { rows: Vec<Vec<f64>> },
    /// `x -> R x + b`
    Affine { rows: Vec<Vec<f64>>, b: Vec<f64> },
    /// `x -> clamp(R x + b, lower, upper)` componentwise
    AffineSaturated {
        rows: Vec<Vec<f64>>,
        b: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// One expression per output coordinate.
    Expr { outputs: Vec<Expr> },
}

impl MapSpec {
    /// Number of output coordinates.
    pub fn output_dim(&self) -> usize {
        match self {
            MapSpec::Linear { rows } | MapSpec::Affine { rows, .. } => rows.len(),
            MapSpec::AffineSaturated { rows, .. } => rows.len(),
            MapSpec::Expr { outputs } => outputs.len(),
        }
    }

    /// Validate against an input dimension and compile to a callable map.
    pub fn build(&self, input_dim: usize) -> Result<StateMap, ExprError> {
        match self {
            MapSpec::Linear { rows } => {
                let rows = checked_rows(rows, input_dim)?;
                Ok(Arc::new(move |x: &[f64]| apply_rows(&rows, x, None)))
            }
            MapSpec::Affine { rows, b } => {
                let rows = checked_rows(rows, input_dim)?;
                if b.len() != rows.len() {
                    return Err(ExprError::DimensionMismatch {
                        expected: rows.len(),
                        actual: b.len(),
                    });
                }
                let offset = b.clone();
                Ok(Arc::new(move |x: &[f64]| apply_rows(&rows, x, Some(&offset))))
            }
            MapSpec::AffineSaturated { rows, b, lower, upper } => {
                let rows = checked_rows(rows, input_dim)?;
                for (name, v) in [("b", b), ("lower", lower), ("upper", upper)] {
                    if v.len() != rows.len() {
                        let _ = name;
                        return Err(ExprError::DimensionMismatch {
                            expected: rows.len(),
                            actual: v.len(),
                        });
                    }
                }
                for (index, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
                    if lo > hi {
                        return Err(ExprError::InvertedBounds { index });
                    }
                }
                let offset = b.clone();
                let lower = lower.clone();
                let upper = upper.clone();
                Ok(Arc::new(move |x: &[f64]| {
                    apply_rows(&rows, x, Some(&offset))
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| v.clamp(lower[i], upper[i]))
                        .collect()
                }))
            }
            MapSpec::Expr { outputs } => {
                if outputs.is_empty() {
                    return Err(ExprError::EmptyOutputs);
                }
                for output in outputs {
                    output.validate(input_dim)?;
                }
                let outputs = outputs.clone();
                Ok(Arc::new(move |x: &[f64]| {
                    outputs.iter().map(|e| e.eval(x)).collect()
                }))
            }
        }
    }
}

fn checked_rows(rows: &[Vec<f64>], input_dim: usize) -> Result<Vec<Vec<f64>>, ExprError> {
    if rows.is_empty() {
        return Err(ExprError::EmptyOutputs);
    }
    for row in rows {
        if row.len() != input_dim {
            return Err(ExprError::DimensionMismatch {
                expected: input_dim,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ExprError::RaggedRows);
        }
    }
    Ok(rows.to_vec())
}

fn apply_rows(rows: &[Vec<f64>], x: &[f64], offset: Option<&[f64]>) -> Vec<f64> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut acc = offset.map_or(0.0, |b| b[i]);
            for (coefficient, value) in row.iter().zip(x.iter()) {
                acc += coefficient * value;
            }
            acc
        })
        .collect()
}
