//! The convex subproblem of one CCP step, posed as a second-order cone
//! program and handed to Clarabel.
//!
//! Decision vector (real): the precoder `W̃ = W/√P_max` stored column-major
//! as interleaved (re, im) pairs, followed by the numerator slacks `τ_n` and
//! the denominator slacks `τ_d` of every user. Each user's constraints are
//! written with its channel normalized to unit norm, so all slack values stay
//! of order one regardless of path loss.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::LinearObjective;
use crate::error::{Error, Result};

/// Solver-independent optimality residuals of a returned point, each
/// relative to the size of the data it is measured against.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub w: DMatrix<Complex64>,
    /// Value of the affine objective at `w`.
    pub objective: f64,
    pub kkt: KktResiduals,
    pub iterations: u32,
}

/// Problem data shared by every CCP step of one precoder optimization.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemLimits {
    pub gamma_min: f64,
    pub p_max: f64,
    pub noise_power: f64,
    pub tol: f64,
}

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    /// Adds constraint row `e = gᵀx + g0`, stored as `A = -g`, `b = g0`.
    fn push(&mut self, terms: &[(usize, f64)], constant: f64) {
        let row = self.b.len();
        for &(c, v) in terms {
            if v != 0.0 {
                self.rows.push(row);
                self.cols.push(c);
                self.vals.push(-v);
            }
        }
        self.b.push(constant);
    }
}

/// Real-coefficient view of the complex functional `hᴴ w_col`.
fn inner_terms(h: &DVector<Complex64>, col: usize, n_rows: usize, scale: Complex64) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    // scale·hᴴw = Σ conj(h)·scale·w; write c = conj(h)·scale
    let mut re = Vec::with_capacity(2 * n_rows);
    let mut im = Vec::with_capacity(2 * n_rows);
    for r in 0..n_rows {
        let c = h[r].conj() * scale;
        let base = 2 * (col * n_rows + r);
        re.push((base, c.re));
        re.push((base + 1, -c.im));
        im.push((base, c.im));
        im.push((base + 1, c.re));
    }
    (re, im)
}

fn merge(mut a: Vec<(usize, f64)>, b: &[(usize, f64)]) -> Vec<(usize, f64)> {
    a.extend_from_slice(b);
    a
}

/// Maximizes the affine sensing objective subject to the linearized user-SINR
/// constraints (with slacks) and the per-antenna power limit.
///
/// `channels[i]` is the channel to user `i` stacked over the same transmitters
/// as the rows of `w_prev`.
pub fn solve_ccp_subproblem(
    objective: &LinearObjective,
    channels: &[DVector<Complex64>],
    w_prev: &DMatrix<Complex64>,
    limits: SubproblemLimits,
) -> Result<SubproblemSolution> {
    let n_rows = w_prev.nrows();
    let n_cols = w_prev.ncols();
    let n_ue = n_cols - 1;
    if channels.len() != n_ue || channels.iter().any(|h| h.len() != n_rows) {
        return Err(Error::Dimension(format!(
            "expected {n_ue} channels of length {n_rows} for a {n_rows}x{n_cols} precoder"
        )));
    }
    if objective.coeff.shape() != w_prev.shape() {
        return Err(Error::Dimension("objective coefficients do not match the precoder shape".into()));
    }
    let sqrt_p = limits.p_max.sqrt();
    let n_w = 2 * n_rows * n_cols;
    let tau_n = |i: usize| n_w + i;
    let tau_d = |i: usize| n_w + n_ue + i;
    let n_var = n_w + 2 * n_ue;

    // objective: minimize -ĉᵀx, ĉ normalized
    let mut q = vec![0.0; n_var];
    for c in 0..n_cols {
        for r in 0..n_rows {
            let z = objective.coeff[(r, c)];
            q[2 * (c * n_rows + r)] = -z.re;
            q[2 * (c * n_rows + r) + 1] = -z.im;
        }
    }
    let q_norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if q_norm > 0.0 {
        q.iter_mut().for_each(|v| *v /= q_norm);
    }

    let mut t = Triplets {
        rows: Vec::new(),
        cols: Vec::new(),
        vals: Vec::new(),
        b: Vec::new(),
    };
    let mut cones = Vec::new();

    // per-user normalization of the channel: h̄ = h·√P/σ / ‖h·√P/σ‖
    let users: Vec<(DVector<Complex64>, f64)> = channels
        .iter()
        .map(|h| {
            let kappa = h.norm() * sqrt_p / limits.noise_power.sqrt();
            let hn = if kappa > 0.0 { h / Complex64::new(h.norm(), 0.0) } else { h.clone() };
            let noise = if kappa > 0.0 { 1.0 / (kappa * kappa) } else { f64::INFINITY };
            (hn, noise)
        })
        .collect();
    if users.iter().any(|(_, n)| !n.is_finite()) {
        return Err(Error::Infeasible);
    }
    let one = Complex64::new(1.0, 0.0);

    if n_ue > 0 {
        for (i, (h, _)) in users.iter().enumerate() {
            // linearized numerator: 2 Re(conj(b0) h̄ᴴw̃_i) - |b0|² - τ_n >= 0
            let b0 = h.dotc(&w_prev.column(i)) / sqrt_p;
            let (re, im) = inner_terms(h, i, n_rows, one);
            let mut terms: Vec<(usize, f64)> = re.iter().map(|&(k, v)| (k, 2.0 * b0.re * v)).collect();
            terms.extend(im.iter().map(|&(k, v)| (k, 2.0 * b0.im * v)));
            terms.push((tau_n(i), -1.0));
            t.push(&terms, -b0.norm_sqr());
        }
        for i in 0..n_ue {
            t.push(&[(tau_n(i), 1.0), (tau_d(i), -limits.gamma_min)], 0.0);
        }
        cones.push(SupportedConeT::NonnegativeConeT(2 * n_ue));

        for (i, (h, noise)) in users.iter().enumerate() {
            // ‖(τ_d - σ̄² - 1, 2z)‖ <= τ_d - σ̄² + 1  ⇔  ‖z‖² <= τ_d - σ̄²
            t.push(&[(tau_d(i), 1.0)], 1.0 - noise);
            t.push(&[(tau_d(i), 1.0)], -1.0 - noise);
            let two = Complex64::new(2.0, 0.0);
            let mut int_re = Vec::new();
            let mut int_im = Vec::new();
            for k in (0..n_ue).filter(|&k| k != i) {
                let (re, im) = inner_terms(h, k, n_rows, two);
                int_re = merge(int_re, &re);
                int_im = merge(int_im, &im);
            }
            t.push(&int_re, 0.0);
            t.push(&int_im, 0.0);
            let (sre, sim) = inner_terms(h, n_ue, n_rows, two);
            t.push(&sre, 0.0);
            t.push(&sim, 0.0);
            cones.push(SupportedConeT::SecondOrderConeT(6));
        }
    }

    for r in 0..n_rows {
        t.push(&[], 1.0);
        for c in 0..n_cols {
            let base = 2 * (c * n_rows + r);
            t.push(&[(base, 1.0)], 0.0);
            t.push(&[(base + 1, 1.0)], 0.0);
        }
        cones.push(SupportedConeT::SecondOrderConeT(1 + 2 * n_cols));
    }

    let n_con = t.b.len();
    let a = CscMatrix::new_from_triplets(n_con, n_var, t.rows.clone(), t.cols.clone(), t.vals.clone());
    let p = CscMatrix::zeros((n_var, n_var));
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .tol_gap_abs(limits.tol)
        .tol_gap_rel(limits.tol)
        .tol_feas(limits.tol)
        .presolve_enable(false)
        .build()
        .map_err(|e| Error::Solver(e.to_string()))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &t.b, &cones, settings).map_err(|e| Error::Solver(e.to_string()))?;
    solver.solve();
    let sol = &solver.solution;
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => return Err(Error::Infeasible),
        SolverStatus::MaxIterations => return Err(Error::MaxIterations),
        other => return Err(Error::Solver(format!("{other:?}"))),
    }

    let kkt = residuals(&t, &q, &sol.x, &sol.s, &sol.z, n_var);
    let mut w = DMatrix::zeros(n_rows, n_cols);
    for c in 0..n_cols {
        for r in 0..n_rows {
            let base = 2 * (c * n_rows + r);
            w[(r, c)] = Complex64::new(sol.x[base], sol.x[base + 1]) * sqrt_p;
        }
    }
    Ok(SubproblemSolution {
        objective: objective.eval(&w),
        w,
        kkt,
        iterations: sol.iterations,
    })
}

fn residuals(t: &Triplets, q: &[f64], x: &[f64], s: &[f64], z: &[f64], n_var: usize) -> KktResiduals {
    let n_con = t.b.len();
    let mut ax = vec![0.0; n_con];
    let mut atz = vec![0.0; n_var];
    for k in 0..t.vals.len() {
        ax[t.rows[k]] += t.vals[k] * x[t.cols[k]];
        atz[t.cols[k]] += t.vals[k] * z[t.rows[k]];
    }
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let dual: Vec<f64> = (0..n_var).map(|i| q[i] + atz[i]).collect();
    let primal: Vec<f64> = (0..n_con).map(|i| ax[i] + s[i] - t.b[i]).collect();
    let gap: f64 = s.iter().zip(z).map(|(a, b)| a * b).sum();
    let qx: f64 = q.iter().zip(x).map(|(a, b)| a * b).sum();
    KktResiduals {
        stationarity: inf(&dual) / (1.0 + inf(q)),
        primal: inf(&primal) / (1.0 + inf(&t.b)),
        complementarity: gap.abs() / (1.0 + qx.abs()),
    }
}
