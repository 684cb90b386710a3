//! Symbols, precoded transmit signals, received samples and the two SINR
//! measures.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::precoder::SensingQuadratic;
use crate::rng::{complex_normal, complex_normal_vec, rng_from, stream, Stream};
use crate::scenario::{array_response, SensingGeometry, Scenario};

/// One frame of user data symbols plus the sensing probe.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    /// `user_symbols[i][n]`
    pub user_symbols: Vec<Vec<Complex64>>,
    pub sensing_symbols: Vec<Complex64>,
}

impl SymbolFrame {
    pub fn n_ue(&self) -> usize {
        self.user_symbols.len()
    }

    pub fn len(&self) -> usize {
        self.sensing_symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensing_symbols.is_empty()
    }

    /// `[s_1[n], …, s_{N_UE}[n], s_s[n]]`
    pub fn stacked(&self, n: usize) -> DVector<Complex64> {
        let k = self.n_ue();
        DVector::from_fn(k + 1, |i, _| {
            if i < k {
                self.user_symbols[i][n]
            } else {
                self.sensing_symbols[n]
            }
        })
    }

    /// Sample correlation `Σ_n s[n] s[n]ᴴ`.
    pub fn correlation(&self) -> DMatrix<Complex64> {
        let k = self.n_ue() + 1;
        let mut s = DMatrix::zeros(k, k);
        for n in 0..self.len() {
            let v = self.stacked(n);
            s += &v * v.adjoint();
        }
        s
    }

    /// Same frame with the probe replaced by zeros.
    pub fn without_sensing(&self) -> Self {
        Self {
            user_symbols: self.user_symbols.clone(),
            sensing_symbols: vec![Complex64::new(0.0, 0.0); self.len()],
        }
    }
}

/// Aggregate precoder: one `M`-row block per transmitting AP, one column per
/// user plus a final sensing column.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderMatrix {
    pub w: DMatrix<Complex64>,
    /// AP index of each row block.
    pub transmitters: Vec<usize>,
    pub m_antennas: usize,
}

impl PrecoderMatrix {
    pub fn zeros(transmitters: Vec<usize>, m: usize, n_ue: usize) -> Self {
        Self {
            w: DMatrix::zeros(m * transmitters.len(), n_ue + 1),
            transmitters,
            m_antennas: m,
        }
    }

    pub fn n_ue(&self) -> usize {
        self.w.ncols() - 1
    }

    pub fn sensing_index(&self) -> usize {
        self.w.ncols() - 1
    }

    /// `W_j` for the transmitter at block position `b`.
    pub fn block(&self, b: usize) -> DMatrix<Complex64> {
        self.w.rows(b * self.m_antennas, self.m_antennas).into_owned()
    }

    pub fn block_of_ap(&self, ap: usize) -> Option<DMatrix<Complex64>> {
        self.transmitters.iter().position(|&t| t == ap).map(|b| self.block(b))
    }

    /// Sensing precoder `w_{j,t}` of AP `ap`, if it transmits.
    pub fn sensing_precoder(&self, ap: usize) -> Option<DVector<Complex64>> {
        let c = self.sensing_index();
        let m = self.m_antennas;
        self.transmitters
            .iter()
            .position(|&t| t == ap)
            .map(|b| self.w.view((b * m, c), (m, 1)).column(0).into_owned())
    }

    /// Per-antenna transmit powers (squared row norms).
    pub fn row_powers(&self) -> Vec<f64> {
        self.w.row_iter().map(|r| r.norm_squared()).collect()
    }

    pub fn max_row_power(&self) -> f64 {
        self.row_powers().into_iter().fold(0.0, f64::max)
    }

    /// Precoder over all `n_ap` APs with zero rows for non-transmitters.
    pub fn expand(&self, n_ap: usize) -> DMatrix<Complex64> {
        let m = self.m_antennas;
        let mut full = DMatrix::zeros(n_ap * m, self.w.ncols());
        for (b, &ap) in self.transmitters.iter().enumerate() {
            full.rows_mut(ap * m, m).copy_from(&self.w.rows(b * m, m));
        }
        full
    }
}

/// Unit-average-power square QAM points.
pub fn qam_constellation(order: usize) -> Result<Vec<Complex64>> {
    let side = (order as f64).sqrt().round() as usize;
    if order < 4 || side * side != order {
        return Err(Error::Config(format!("mod_order {order} is not a square QAM order")));
    }
    let levels: Vec<f64> = (0..side).map(|i| 2.0 * i as f64 - (side as f64 - 1.0)).collect();
    let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
    let mut pts = Vec::with_capacity(order);
    for &re in &levels {
        for &im in &levels {
            pts.push(Complex64::new(re / scale, im / scale));
        }
    }
    Ok(pts)
}

pub fn generate_frame(n_ue: usize, n: usize, mod_order: usize, seed: u64) -> Result<SymbolFrame> {
    let constellation = qam_constellation(mod_order)?;
    let mut rng = stream(seed, Stream::Frame, 0);
    let user_symbols = (0..n_ue)
        .map(|_| {
            (0..n)
                .map(|_| constellation[rng.gen_range(0..constellation.len())])
                .collect()
        })
        .collect();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let sensing_symbols = (0..n)
        .map(|_| {
            let re = if rng.gen::<bool>() { h } else { -h };
            let im = if rng.gen::<bool>() { h } else { -h };
            Complex64::new(re, im)
        })
        .collect();
    Ok(SymbolFrame {
        user_symbols,
        sensing_symbols,
    })
}

/// `x_j[n] = W_j s[n]`.
pub fn transmit_signal(w_j: &DMatrix<Complex64>, s: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if w_j.ncols() != s.len() {
        return Err(Error::Dimension(format!(
            "precoder block has {} columns, symbol vector has {} entries",
            w_j.ncols(),
            s.len()
        )));
    }
    Ok(w_j * s)
}

/// Transmit signals of every transmitter: `[block][n]`.
pub fn transmit_all(w: &PrecoderMatrix, frame: &SymbolFrame) -> Vec<Vec<DVector<Complex64>>> {
    let stacked: Vec<_> = (0..frame.len()).map(|n| frame.stacked(n)).collect();
    (0..w.transmitters.len())
        .map(|b| {
            let wj = w.block(b);
            stacked.iter().map(|s| &wj * s).collect()
        })
        .collect()
}

/// Per-antenna received samples split into their four contributions.
#[derive(Debug, Clone)]
pub struct AntennaReception {
    pub desired: Vec<Complex64>,
    pub comm_interference: Vec<Complex64>,
    pub sensing_interference: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

impl AntennaReception {
    pub fn total(&self) -> Vec<Complex64> {
        (0..self.desired.len())
            .map(|n| self.desired[n] + self.comm_interference[n] + self.sensing_interference[n] + self.noise[n])
            .collect()
    }
}

/// Received samples at every antenna of user `ue`; each antenna sees its own
/// channel draw and its own noise.
pub fn received_user_signal(
    scenario: &Scenario,
    w: &PrecoderMatrix,
    frame: &SymbolFrame,
    ue: usize,
    noise_power: f64,
    noise_seed: u64,
) -> Vec<AntennaReception> {
    let mut rng = rng_from(noise_seed);
    let n_ue = w.n_ue();
    let t = w.sensing_index();
    (0..scenario.k_antennas())
        .map(|k| {
            // effective gains g_c = Σ_j h_{j,ue,k}ᴴ w_{j,c}
            let gains: Vec<Complex64> = (0..=n_ue)
                .map(|c| {
                    w.transmitters
                        .iter()
                        .enumerate()
                        .map(|(b, &j)| {
                            let h = &scenario.channels[j][ue][k];
                            let col = w.w.view((b * w.m_antennas, c), (w.m_antennas, 1));
                            h.dotc(&col.column(0))
                        })
                        .sum()
                })
                .collect();
            let len = frame.len();
            let desired = (0..len).map(|n| gains[ue] * frame.user_symbols[ue][n]).collect();
            let comm_interference = (0..len)
                .map(|n| {
                    (0..n_ue)
                        .filter(|&c| c != ue)
                        .map(|c| gains[c] * frame.user_symbols[c][n])
                        .sum()
                })
                .collect();
            let sensing_interference = (0..len).map(|n| gains[t] * frame.sensing_symbols[n]).collect();
            let noise = (0..len).map(|_| complex_normal(&mut rng, noise_power)).collect();
            AntennaReception {
                desired,
                comm_interference,
                sensing_interference,
                noise,
            }
        })
        .collect()
}

/// Echo samples at receiver position `rx` (index into the geometry's
/// receiver list): target reflections, optional clutter and noise.
pub fn received_sensing_signal(
    geometry: &SensingGeometry,
    tx_signals: &[Vec<DVector<Complex64>>],
    rx: usize,
    noise_power: f64,
    clutter_var: f64,
    noise_seed: u64,
) -> Vec<DVector<Complex64>> {
    let mut rng = rng_from(noise_seed);
    let m = tx_signals.first().and_then(|s| s.first()).map_or(0, |x| x.len());
    let n_len = tx_signals.first().map_or(0, |s| s.len());
    let a_rx = array_response(geometry.theta_rx[rx], m);
    let tx_resp: Vec<DVector<Complex64>> = geometry.theta_tx.iter().map(|&th| array_response(th, m)).collect();
    let clutter: Vec<DMatrix<Complex64>> = if clutter_var > 0.0 {
        (0..tx_signals.len())
            .map(|_| DMatrix::from_fn(m, m, |_, _| complex_normal(&mut rng, clutter_var)))
            .collect()
    } else {
        Vec::new()
    };
    (0..n_len)
        .map(|n| {
            let mut y = complex_normal_vec(&mut rng, m, noise_power);
            for (b, x) in tx_signals.iter().enumerate() {
                let gain = geometry.rcs[(b, rx)] * geometry.beta[(b, rx)].sqrt();
                let proj = tx_resp[b].transpose() * &x[n];
                y += &a_rx * (gain * proj[0]);
                if let Some(h) = clutter.get(b) {
                    y += h * &x[n];
                }
            }
            y
        })
        .collect()
}

/// Communication SINR of user `ue` from the concatenated channel and the
/// precoder columns.
pub fn user_sinr(w: &PrecoderMatrix, scenario: &Scenario, ue: usize, noise_power: f64) -> f64 {
    let h = scenario.stacked_channel(&w.transmitters, ue);
    let t = w.sensing_index();
    let desired = h.dotc(&w.w.column(ue)).norm_sqr();
    let mut interf = Complex64::new(0.0, 0.0);
    for k in 0..w.n_ue() {
        if k != ue {
            interf += h.dotc(&w.w.column(k));
        }
    }
    let sensing = h.dotc(&w.w.column(t)).norm_sqr();
    desired / (interf.norm_sqr() + sensing + noise_power)
}

/// Sensing SINR averaged over receivers and samples.
pub fn sensing_sinr(w: &PrecoderMatrix, quadratic: &SensingQuadratic, frame: &SymbolFrame, noise_power: f64) -> f64 {
    quadratic.sinr(&w.w, frame, noise_power)
}
