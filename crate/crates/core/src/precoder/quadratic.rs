use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::scenario::{array_response, sensing_geometry, Scenario, SensingLinks};
use crate::signals::SymbolFrame;

/// The per-receiver matrices `A_r` of the sensing SINR.
///
/// Every `A_r` is rank one: `A_r = M · g_r g_rᴴ` where block `j` of `g_r` is
/// `√β_{j,r} · conj(α_{j,r}) · conj(a(θ_j))` and `M = ‖a(θ_r)‖²`. Only the
/// factors are stored; [`SensingQuadratic::matrix`] rebuilds the dense
/// matrix block by block.
#[derive(Debug, Clone)]
pub struct SensingQuadratic {
    pub factors: Vec<DVector<Complex64>>,
    pub m_antennas: usize,
    blocks: Vec<BlockTerms>,
}

// Per-receiver ingredients of the block definition.
#[derive(Debug, Clone)]
struct BlockTerms {
    sqrt_beta: Vec<f64>,
    alpha: Vec<Complex64>,
    a_tx: Vec<DVector<Complex64>>,
    a_rx: DVector<Complex64>,
}

pub fn build_sensing_quadratic(scenario: &Scenario, links: &SensingLinks) -> SensingQuadratic {
    let m = scenario.m_antennas;
    let geo = sensing_geometry(scenario, links);
    let n_tx = links.transmitters.len();
    let a_tx: Vec<DVector<Complex64>> = geo.theta_tx.iter().map(|&t| array_response(t, m)).collect();
    let mut factors = Vec::with_capacity(links.receivers.len());
    let mut blocks = Vec::with_capacity(links.receivers.len());
    for r in 0..links.receivers.len() {
        let mut g = DVector::zeros(m * n_tx);
        let sqrt_beta: Vec<f64> = (0..n_tx).map(|b| geo.beta[(b, r)].sqrt()).collect();
        let alpha: Vec<Complex64> = (0..n_tx).map(|b| geo.rcs[(b, r)]).collect();
        for b in 0..n_tx {
            let scale = alpha[b].conj() * sqrt_beta[b];
            for p in 0..m {
                g[b * m + p] = a_tx[b][p].conj() * scale;
            }
        }
        factors.push(g);
        blocks.push(BlockTerms {
            sqrt_beta,
            alpha,
            a_tx: a_tx.clone(),
            a_rx: array_response(geo.theta_rx[r], m),
        });
    }
    SensingQuadratic {
        factors,
        m_antennas: m,
        blocks,
    }
}

impl SensingQuadratic {
    pub fn n_rx(&self) -> usize {
        self.factors.len()
    }

    /// Dense `A_r` assembled from its `M × M` blocks
    /// `A_{j,m} = √(β_j β_m) a(θ_j)* a(θ_r)ᴴ α_j* α_m a(θ_r) a(θ_m)ᵀ`.
    pub fn matrix(&self, r: usize) -> DMatrix<Complex64> {
        let t = &self.blocks[r];
        let m = self.m_antennas;
        let n_tx = t.a_tx.len();
        let mut a = DMatrix::zeros(m * n_tx, m * n_tx);
        let rr = t.a_rx.adjoint() * &t.a_rx;
        for j in 0..n_tx {
            for k in 0..n_tx {
                let coef = t.sqrt_beta[j] * t.sqrt_beta[k] * t.alpha[j].conj() * t.alpha[k] * rr[(0, 0)];
                let blk = t.a_tx[j].conjugate() * t.a_tx[k].transpose() * coef;
                a.view_mut((j * m, k * m), (m, m)).copy_from(&blk);
            }
        }
        a
    }

    /// `Σ_r Σ_n s[n]ᴴ Wᴴ A_r W s[n]`.
    pub fn quadratic_sum(&self, w: &DMatrix<Complex64>, frame: &SymbolFrame) -> f64 {
        let s = frame.correlation();
        let m = self.m_antennas as f64;
        self.factors
            .iter()
            .map(|g| {
                let v = g.adjoint() * w;
                (&v * &s * v.adjoint())[(0, 0)].re * m
            })
            .sum()
    }

    fn denominator(&self, frame: &SymbolFrame, noise_power: f64) -> f64 {
        (self.n_rx() * frame.len() * self.m_antennas) as f64 * noise_power
    }

    /// Sensing SINR (linear).
    pub fn sinr(&self, w: &DMatrix<Complex64>, frame: &SymbolFrame, noise_power: f64) -> f64 {
        if self.n_rx() == 0 {
            return 0.0;
        }
        self.quadratic_sum(w, frame) / self.denominator(frame, noise_power)
    }

    /// First-order expansion of the sensing SINR around `w_prev`, real part.
    pub fn linearize(&self, w_prev: &DMatrix<Complex64>, frame: &SymbolFrame, noise_power: f64) -> LinearObjective {
        let mut coeff = DMatrix::zeros(w_prev.nrows(), w_prev.ncols());
        if self.n_rx() == 0 {
            return LinearObjective { coeff, constant: 0.0 };
        }
        let s = frame.correlation();
        let d = self.denominator(frame, noise_power);
        let scale = Complex64::new(2.0 * self.m_antennas as f64 / d, 0.0);
        for g in &self.factors {
            let v = g.adjoint() * w_prev * &s;
            coeff += g * v * scale;
        }
        let constant = -self.sinr(w_prev, frame, noise_power);
        LinearObjective { coeff, constant }
    }
}

/// `W ↦ Re tr(Cᴴ W) + d`.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    pub coeff: DMatrix<Complex64>,
    pub constant: f64,
}

impl LinearObjective {
    pub fn eval(&self, w: &DMatrix<Complex64>) -> f64 {
        self.coeff.iter().zip(w.iter()).map(|(c, x)| (c.conj() * x).re).sum::<f64>() + self.constant
    }
}
