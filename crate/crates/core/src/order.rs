//! Coordinatewise orders on real coordinate spaces.
//!
//! An order is a direction flag per coordinate: ascending coordinates compare
//! with `<=`, descending ones with `>=`. Product orders and the mixed
//! coupled/tripled orders are all concatenations of these flags.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderDirection {
    /// Coordinate compares with `<=`.
    Ascending,
    /// Coordinate compares with `>=`.
    Descending,
}

impl OrderDirection {
    pub fn flipped(self) -> Self {
        match self {
            OrderDirection::Ascending => OrderDirection::Descending,
            OrderDirection::Descending => OrderDirection::Ascending,
        }
    }
}

/// Order on `R^dim` defined by one direction flag per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinateOrder {
    directions: Vec<OrderDirection>,
}

impl CoordinateOrder {
    pub fn new(directions: Vec<OrderDirection>) -> Self {
        Self { directions }
    }

    /// All-ascending order on `R^dim`.
    pub fn ascending(dim: usize) -> Self {
        Self { directions: vec![OrderDirection::Ascending; dim] }
    }

    /// All-descending order on `R^dim`.
    pub fn descending(dim: usize) -> Self {
        Self { directions: vec![OrderDirection::Descending; dim] }
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[OrderDirection] {
        &self.directions
    }

    /// Same coordinates with every direction reversed.
    pub fn flipped(&self) -> Self {
        Self {
            directions: self.directions.iter().map(|d| d.flipped()).collect(),
        }
    }

    /// Concatenation; the product order on the flattened product space.
    pub fn concat(orders: &[&CoordinateOrder]) -> Self {
        let directions = orders
            .iter()
            .flat_map(|o| o.directions.iter().copied())
            .collect();
        Self { directions }
    }

    /// `x` precedes `y` in this order.
    pub fn leq(&self, x: &[f64], y: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.directions.len());
        debug_assert_eq!(y.len(), self.directions.len());
        self.directions.iter().enumerate().all(|(i, d)| match d {
            OrderDirection::Ascending => x[i] <= y[i],
            OrderDirection::Descending => x[i] >= y[i],
        })
    }

    /// `x` and `y` are comparable: `x <= y` or `y <= x`.
    pub fn comparable(&self, x: &[f64], y: &[f64]) -> bool {
        self.leq(x, y) || self.leq(y, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leq_respects_directions() {
        let order = CoordinateOrder::new(vec![
            OrderDirection::Ascending,
            OrderDirection::Descending,
        ]);
        assert!(order.leq(&[0.0, 5.0], &[1.0, 2.0]));
        assert!(!order.leq(&[0.0, 5.0], &[1.0, 6.0]));
        assert!(order.leq(&[1.0, 1.0], &[1.0, 1.0]));
    }

    #[test]
    fn comparability_is_symmetric_but_not_total() {
        let order = CoordinateOrder::ascending(2);
        assert!(order.comparable(&[0.0, 0.0], &[1.0, 1.0]));
        assert!(order.comparable(&[1.0, 1.0], &[0.0, 0.0]));
        assert!(!order.comparable(&[0.0, 1.0], &[1.0, 0.0]));
    }

    #[test]
    fn flip_and_concat_compose() {
        let base = CoordinateOrder::ascending(2);
        let product = CoordinateOrder::concat(&[&base, &base.flipped(), &base]);
        assert_eq!(product.dimension(), 6);
        assert!(product.leq(
            &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]
        ));
    }
}
