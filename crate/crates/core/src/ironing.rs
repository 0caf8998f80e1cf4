//! Ironing the utility virtual value in quantile space.
//!
//! With `q = 1 - F(v)`, the virtual value is tabulated at cell midpoints of a
//! uniform grid on `[0, 1]`, integrated into a cumulative curve, and replaced
//! by the slopes of that curve's least concave majorant. Nonincreasing slopes
//! in `q` are nondecreasing in value.

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{usage, Error, Result};

pub const DEFAULT_GRID: usize = 4096;
pub const MIN_GRID: usize = 16;

/// Virtual values on a quantile grid and their cumulative integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    /// `K + 1` ascending grid points from 0 to 1.
    pub grid: Vec<f64>,
    /// `K` cell values.
    pub theta: Vec<f64>,
    /// `K + 1` partial integrals, starting at 0.
    pub cumulative: Vec<f64>,
}

impl QuantileCurve {
    /// Curve from arbitrary per-cell values on the uniform grid `k / K`.
    pub fn from_theta(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return usage("curve needs at least one cell");
        }
        let k = theta.len();
        let grid: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        let mut cumulative = Vec::with_capacity(k + 1);
        cumulative.push(0.0);
        for (c, t) in theta.iter().enumerate() {
            let prev = cumulative[c];
            cumulative.push(prev + t * (grid[c + 1] - grid[c]));
        }
        Ok(Self { grid, theta, cumulative })
    }

    pub fn cells(&self) -> usize {
        self.theta.len()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Tabulate `theta(q) = virtual_value(quantile(1 - q))` at the midpoints of `K` cells.
pub fn build_curve(spec: &DistributionSpec, cells: usize) -> Result<QuantileCurve> {
    if !spec.is_continuous() {
        return Err(Error::Unsupported("ironing a discrete distribution".into()));
    }
    if cells < MIN_GRID {
        return usage(format!("ironing grid needs at least {MIN_GRID} cells, got {cells}"));
    }
    let theta = (0..cells)
        .map(|c| {
            let q = (c as f64 + 0.5) / cells as f64;
            spec.virtual_value(spec.quantile(1.0 - q)?)
        })
        .collect::<Result<Vec<_>>>()?;
    QuantileCurve::from_theta(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IroningResult {
    pub grid: Vec<f64>,
    pub theta: Vec<f64>,
    /// Concave-majorant values at the grid points.
    pub hull: Vec<f64>,
    /// Majorant slope on each cell.
    pub ironed_theta: Vec<f64>,
}

impl IroningResult {
    /// The ironed slopes as a fresh curve.
    pub fn as_curve(&self) -> QuantileCurve {
        let mut cumulative = Vec::with_capacity(self.grid.len());
        cumulative.push(0.0);
        for (c, t) in self.ironed_theta.iter().enumerate() {
            let prev = cumulative[c];
            cumulative.push(prev + t * (self.grid[c + 1] - self.grid[c]));
        }
        QuantileCurve {
            grid: self.grid.clone(),
            theta: self.ironed_theta.clone(),
            cumulative,
        }
    }

    pub fn spread(&self) -> f64 {
        let max = self.ironed_theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.ironed_theta.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn max_deviation(&self) -> f64 {
        self.theta
            .iter()
            .zip(&self.ironed_theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Least concave majorant of the piecewise-linear cumulative curve.
pub fn iron(curve: &QuantileCurve) -> Result<IroningResult> {
    let QuantileCurve { grid, theta, cumulative } = curve;
    if grid.len() != cumulative.len() || grid.len() < 2 {
        return usage("grid and cumulative curve must have equal length >= 2");
    }

    // Monotone-chain upper hull, scanning left to right.
    let mut hull_idx: Vec<usize> = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        while hull_idx.len() >= 2 {
            let a = hull_idx[hull_idx.len() - 2];
            let b = hull_idx[hull_idx.len() - 1];
            let cross = (grid[b] - grid[a]) * (cumulative[k] - cumulative[a])
                - (cumulative[b] - cumulative[a]) * (grid[k] - grid[a]);
            if cross >= 0.0 {
                hull_idx.pop();
            } else {
                break;
            }
        }
        hull_idx.push(k);
    }

    let mut hull = vec![0.0; grid.len()];
    let mut ironed_theta = vec![0.0; grid.len() - 1];
    for w in hull_idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slope = (cumulative[b] - cumulative[a]) / (grid[b] - grid[a]);
        for k in a..b {
            hull[k] = cumulative[a] + slope * (grid[k] - grid[a]);
        }
        hull[b] = cumulative[b];
        ironed_theta[a..b].iter_mut().for_each(|t| *t = slope);
    }

    Ok(IroningResult {
        grid: grid.clone(),
        theta: theta.clone(),
        hull,
        ironed_theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_theta_equals_quantile() {
        let curve = build_curve(&DistributionSpec::uniform(0.0, 1.0).unwrap(), 16).unwrap();
        for (t, q) in curve.theta.iter().zip(curve.midpoints()) {
            assert_abs_diff_eq!(*t, q, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(*curve.cumulative.last().unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn uniform_at_four_cells() {
        // Below the minimum grid: go through from_theta with the same tabulation.
        let spec = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let theta: Vec<f64> = [0.125, 0.375, 0.625, 0.875]
            .iter()
            .map(|q| spec.virtual_value(spec.quantile(1.0 - q).unwrap()).unwrap())
            .collect();
        for (t, e) in theta.iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert_abs_diff_eq!(*t, e, epsilon = 1e-15);
        }
        let curve = QuantileCurve::from_theta(theta).unwrap();
        assert_abs_diff_eq!(curve.cumulative[4], 0.5, epsilon = 1e-15);
        assert!(build_curve(&spec, 4).is_err());
    }

    #[test]
    fn pareto_theta_closed_form() {
        let curve = build_curve(&DistributionSpec::pareto(2.0, 1.0).unwrap(), 64).unwrap();
        for (t, q) in curve.theta.iter().zip(curve.midpoints()) {
            assert_abs_diff_eq!(*t, q.powf(-0.5) / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn discrete_is_rejected() {
        let d = DistributionSpec::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(build_curve(&d, 64), Err(Error::Unsupported(_))));
    }

    #[test]
    fn constant_theta_is_its_own_hull() {
        let r = iron(&QuantileCurve::from_theta(vec![0.7; 32]).unwrap()).unwrap();
        for t in &r.ironed_theta {
            assert_abs_diff_eq!(*t, 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_irons_flat() {
        let spec = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let r = iron(&build_curve(&spec, DEFAULT_GRID).unwrap()).unwrap();
        assert!(r.spread() <= 1e-6);
        for t in &r.ironed_theta {
            assert_abs_diff_eq!(*t, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn pareto_needs_no_ironing() {
        let spec = DistributionSpec::pareto(2.0, 1.0).unwrap();
        let r = iron(&build_curve(&spec, DEFAULT_GRID).unwrap()).unwrap();
        assert!(r.max_deviation() <= 1e-6, "{}", r.max_deviation());
    }

    #[test]
    fn mixed_curve_irons_the_increasing_stretch() {
        // Increasing then decreasing: the rising part is pooled.
        let theta = vec![1.0, 2.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.1];
        let r = iron(&QuantileCurve::from_theta(theta).unwrap()).unwrap();
        assert!(r.ironed_theta.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_abs_diff_eq!(r.ironed_theta[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.ironed_theta[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let mut c = QuantileCurve::from_theta(vec![1.0; 4]).unwrap();
        c.cumulative.pop();
        assert!(iron(&c).is_err());
    }
}
