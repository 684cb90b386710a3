//! Angle estimation by beampattern peak search and line-intersection
//! triangulation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{array_response, Point};

/// `(1/N) Σ_n x̂_n* x̂_nᵀ`, the covariance whose quadratic form with a
/// steering vector gives the beampattern.
pub fn signal_covariance(x_hat: &[DVector<Complex64>]) -> DMatrix<Complex64> {
    let m = x_hat.first().map_or(0, DVector::len);
    let mut r = DMatrix::zeros(m, m);
    for x in x_hat {
        let xc = x.map(|v| v.conj());
        r += &xc * xc.adjoint();
    }
    if !x_hat.is_empty() {
        r /= Complex64::new(x_hat.len() as f64, 0.0);
    }
    r
}

/// `a(θ)ᴴ R a(θ)` over `grid`.
pub fn beampattern(r: &DMatrix<Complex64>, grid: &[f64]) -> Vec<f64> {
    let m = r.nrows();
    grid.iter()
        .map(|&t| {
            let a = array_response(t, m);
            (a.adjoint() * r * &a)[(0, 0)].re
        })
        .collect()
}

/// Angles from `lo` to `hi` inclusive in steps of `step_deg`.
pub fn angle_grid(lo: f64, hi: f64, step_deg: f64) -> Vec<f64> {
    let step = step_deg.to_radians();
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// The half-plane grid on the side of the array axis that contains
/// `true_angle`. A linear array cannot tell `θ` from `−θ`, so the search is
/// restricted to the correct side.
pub fn half_plane_grid(true_angle: f64, step_deg: f64) -> Vec<f64> {
    if true_angle.sin() >= 0.0 {
        angle_grid(0.0, PI, step_deg)
    } else {
        angle_grid(-PI, 0.0, step_deg)
    }
}

/// Grid angle with the largest pattern value; ties go to the first.
pub fn estimate_angle(x_hat: &[DVector<Complex64>], grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Config("empty angle grid".into()));
    }
    let pattern = beampattern(&signal_covariance(x_hat), grid);
    let mut best = 0;
    for (i, v) in pattern.iter().enumerate() {
        if *v > pattern[best] {
            best = i;
        }
    }
    Ok(grid[best])
}

/// Line through `anchor` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line {
    pub anchor: Point,
    pub direction: Vector2<f64>,
}

impl Line {
    pub fn from_angle(anchor: Point, theta: f64) -> Self {
        Self {
            anchor,
            direction: Vector2::new(theta.cos(), theta.sin()),
        }
    }

    fn projector(&self) -> Matrix2<f64> {
        Matrix2::identity() - self.direction * self.direction.transpose()
    }

    pub fn distance_sq(&self, q: &Point) -> f64 {
        (self.projector() * (q - self.anchor)).norm_squared()
    }
}

/// Mean squared distance from `q` to the lines.
pub fn line_mse(lines: &[Line], q: &Point) -> f64 {
    lines.iter().map(|l| l.distance_sq(q)).sum::<f64>() / lines.len() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct Triangulation {
    pub point: Point,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at every iterate, starting from the initial point.
    pub mse_history: Vec<f64>,
}

impl Triangulation {
    pub fn mse_monotone(&self) -> bool {
        self.mse_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15)
    }
}

/// Gradient descent on the mean squared point-to-line distance, started at
/// the centroid of the anchors. Stops when a step moves less than `tol`.
pub fn triangulate(lines: &[Line], eta: f64, max_iter: usize, tol: f64) -> Result<Triangulation> {
    if lines.len() < 2 {
        return Err(Error::Config(format!("triangulation needs two lines, got {}", lines.len())));
    }
    let n = lines.len() as f64;
    let mut q = lines.iter().map(|l| l.anchor).sum::<Point>() / n;
    let mut mse_history = vec![line_mse(lines, &q)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let grad = lines.iter().map(|l| l.projector() * (q - l.anchor)).sum::<Vector2<f64>>() * (2.0 / n);
        let step = grad * eta;
        q -= step;
        iterations += 1;
        mse_history.push(line_mse(lines, &q));
        if step.norm() < tol {
            converged = true;
            break;
        }
    }
    Ok(Triangulation {
        point: q,
        iterations,
        converged,
        mse_history,
    })
}
