//! Variational EM estimate of an AP's transmit vector from the adversary's
//! scalar observations, with the channel and a Student's-t scale as latent
//! variables.
//!
//! The `K` antennas of the adversary contribute independent likelihood
//! terms, each with its own channel estimate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct EmParams {
    pub nu: f64,
    pub noise_power: f64,
    /// Channel-estimate error variance (absolute).
    pub sigma_h2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

/// Posterior quantities after one expectation step.
#[derive(Debug, Clone)]
pub struct EmState {
    /// `E_q[h_k]`, one per observation.
    pub e_h: Vec<DVector<Complex64>>,
    /// Shared posterior covariance `Ω_h`.
    pub omega_h: DMatrix<Complex64>,
    pub e_u: f64,
    pub x_hat: DVector<Complex64>,
    pub iteration: usize,
    /// `‖Δx̂‖²` fell below the tolerance before the iteration cap.
    pub converged: bool,
}

fn hermitian_inverse(a: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    a.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Solver("posterior precision is not positive definite".into()))
}

/// Mean of a shape–rate Gamma(`(ν+2K)/2`, `(ν+C)/2`).
pub fn gamma_mean_u(nu: f64, k: usize, c: f64) -> f64 {
    (nu + 2.0 * k as f64) / (nu + c)
}

/// Expectation step. With `sigma_h2 == 0` the channel is known exactly and
/// `Ω_h = 0`.
pub fn em_e_step(
    y: &[Complex64],
    x_hat: &DVector<Complex64>,
    h_hat: &[DVector<Complex64>],
    e_u_prev: f64,
    params: &EmParams,
) -> Result<(Vec<DVector<Complex64>>, DMatrix<Complex64>, f64)> {
    let m = x_hat.len();
    let k = y.len();
    if h_hat.len() != k {
        return Err(Error::Dimension(format!("{} observations but {} channel estimates", k, h_hat.len())));
    }
    let (e_h, omega) = if params.sigma_h2 == 0.0 {
        (h_hat.to_vec(), DMatrix::zeros(m, m))
    } else {
        let data_w = e_u_prev / params.noise_power;
        let prior_w = 1.0 / params.sigma_h2;
        let precision = DMatrix::<Complex64>::identity(m, m) * Complex64::new(prior_w, 0.0)
            + x_hat * x_hat.adjoint() * Complex64::new(data_w, 0.0);
        let omega = hermitian_inverse(precision)?;
        let e_h = h_hat
            .iter()
            .zip(y)
            .map(|(hh, yk)| &omega * (hh * Complex64::new(prior_w, 0.0) + x_hat * (yk.conj() * data_w)))
            .collect();
        (e_h, omega)
    };
    let spread = (x_hat.adjoint() * &omega * x_hat)[(0, 0)].re * m as f64;
    let c: f64 = e_h
        .iter()
        .zip(y)
        .map(|(eh, yk)| (yk - eh.dotc(x_hat)).norm_sqr() + spread)
        .sum::<f64>()
        / params.noise_power;
    Ok((e_h, omega, gamma_mean_u(params.nu, k, c)))
}

/// Maximization step: minimizer of `Σ_k |y_k − e_kᴴx|² + M xᴴ Ω_h x`.
pub fn em_m_step(y: &[Complex64], e_h: &[DVector<Complex64>], omega_h: &DMatrix<Complex64>) -> DVector<Complex64> {
    let m = omega_h.nrows();
    let mut lhs = omega_h * Complex64::new(m as f64, 0.0);
    let mut rhs = DVector::zeros(m);
    for (e, yk) in e_h.iter().zip(y) {
        lhs += e * e.adjoint();
        rhs += e * *yk;
    }
    match lhs.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        // rank-deficient when Ω_h = 0 and K < M: minimum-norm solution
        None => {
            let eps = 1e-12 * lhs.norm();
            lhs.pseudo_inverse(eps)
            .map(|p| p * rhs)
                .unwrap_or_else(|_| DVector::zeros(m))
        }
    }
}

/// Objective minimized by [`em_m_step`].
pub fn m_step_objective(
    x: &DVector<Complex64>,
    y: &[Complex64],
    e_h: &[DVector<Complex64>],
    omega_h: &DMatrix<Complex64>,
) -> f64 {
    let m = omega_h.nrows() as f64;
    let fit: f64 = e_h.iter().zip(y).map(|(e, yk)| (yk - e.dotc(x)).norm_sqr()).sum();
    fit + m * (x.adjoint() * omega_h * x)[(0, 0)].re
}

#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub x_hat: Vec<DVector<Complex64>>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

/// Runs EM independently for every sample. `y[n][k]` is antenna `k`'s
/// observation of sample `n`.
pub fn em_estimate_signal<R: Rng>(
    y: &[Vec<Complex64>],
    h_hat: &[DVector<Complex64>],
    params: &EmParams,
    rng: &mut R,
) -> Result<EmOutcome> {
    let m = h_hat.first().map_or(0, DVector::len);
    let mut out = EmOutcome {
        x_hat: Vec::with_capacity(y.len()),
        iterations: Vec::with_capacity(y.len()),
        converged: Vec::with_capacity(y.len()),
    };
    for yn in y {
        let state = run_em(yn, h_hat, params, rng.gen_range(0.5..1.5), m)?;
        out.converged.push(state.converged);
        out.iterations.push(state.iteration);
        out.x_hat.push(state.x_hat);
    }
    Ok(out)
}

/// EM iterations for a single sample starting from `x̂ = 0`.
pub fn run_em(y: &[Complex64], h_hat: &[DVector<Complex64>], params: &EmParams, e_u_init: f64, m: usize) -> Result<EmState> {
    let mut x = DVector::zeros(m);
    let mut e_u = e_u_init;
    let mut state = EmState {
        e_h: h_hat.to_vec(),
        omega_h: DMatrix::zeros(m, m),
        e_u,
        x_hat: x.clone(),
        iteration: 0,
        converged: false,
    };
    for t in 1..=params.max_iter {
        let (e_h, omega, u) = em_e_step(y, &x, h_hat, e_u, params)?;
        let x_new = em_m_step(y, &e_h, &omega);
        let diff = (&x_new - &x).norm_squared();
        x = x_new;
        e_u = u;
        state = EmState {
            e_h,
            omega_h: omega,
            e_u,
            x_hat: x.clone(),
            iteration: t,
            converged: diff < params.tol,
        };
        if state.converged {
            break;
        }
    }
    Ok(state)
}
