//! Random system realizations: node placement, fading channels, target
//! geometry and radar cross sections.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::{complex_normal, complex_normal_vec, stream, Stream};

pub type Point = Vector2<f64>;

const MIN_SEPARATION: f64 = 1.0;
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// One realized world.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub target: Point,
    /// `channels[j][i][k]`: AP `j` to antenna `k` of user `i`. Antenna 0 is the
    /// channel the centralized precoder designs against.
    pub channels: Vec<Vec<Vec<DVector<Complex64>>>>,
    /// Large-scale gain AP `j` to user `i`.
    pub beta_ue: Vec<Vec<f64>>,
    /// Swerling-I cross section of the path AP `j` → target → AP `r`.
    pub rcs: DMatrix<Complex64>,
    pub path_loss_exp: f64,
    pub m_antennas: usize,
}

impl Scenario {
    pub fn n_ap(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn n_ue(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn k_antennas(&self) -> usize {
        self.channels[0][0].len()
    }

    /// Channel from AP `ap` to the designated antenna of user `ue`.
    pub fn channel(&self, ap: usize, ue: usize) -> &DVector<Complex64> {
        &self.channels[ap][ue][0]
    }

    /// Concatenated channel to user `ue` over the given transmitters.
    pub fn stacked_channel(&self, transmitters: &[usize], ue: usize) -> DVector<Complex64> {
        let m = self.m_antennas;
        let mut h = DVector::zeros(m * transmitters.len());
        for (b, &j) in transmitters.iter().enumerate() {
            h.rows_mut(b * m, m).copy_from(self.channel(j, ue));
        }
        h
    }

    /// The `n_rx` APs closest to the target, ascending by index.
    pub fn nearest_to_target(&self, n_rx: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_ap()).collect();
        idx.sort_by(|&a, &b| {
            let da = (self.ap_positions[a] - self.target).norm();
            let db = (self.ap_positions[b] - self.target).norm();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let mut out = idx[..n_rx].to_vec();
        out.sort_unstable();
        out
    }
}

/// Which APs illuminate the target and which listen for the echo.
///
/// The two sets are normally disjoint; the bootstrap step of the alternating
/// design lets them overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingLinks {
    pub transmitters: Vec<usize>,
    pub receivers: Vec<usize>,
}

/// Angles and gains of every transmitter → target → receiver path.
#[derive(Debug, Clone)]
pub struct SensingGeometry {
    /// Departure angle per transmitter (links order).
    pub theta_tx: Vec<f64>,
    /// Target → receiver angle per receiver (links order).
    pub theta_rx: Vec<f64>,
    /// `beta[(t, r)]`: two-segment path gain.
    pub beta: DMatrix<f64>,
    /// `rcs[(t, r)]`: cross section of the same path.
    pub rcs: DMatrix<Complex64>,
}

/// Unit-reference-distance power law, clamped at 1 m.
pub fn path_gain(distance: f64, ple: f64) -> f64 {
    distance.max(1.0).powf(-ple)
}

/// Uniform-linear-array steering vector `[1, e^{jπcosθ}, …, e^{j(m-1)πcosθ}]`.
pub fn array_response(theta: f64, m: usize) -> DVector<Complex64> {
    let phase = PI * theta.cos();
    DVector::from_fn(m, |p, _| Complex64::from_polar(1.0, p as f64 * phase))
}

pub fn angle_of(from: &Point, to: &Point) -> f64 {
    let d = to - from;
    d.y.atan2(d.x)
}

pub fn sensing_geometry(scenario: &Scenario, links: &SensingLinks) -> SensingGeometry {
    let ple = scenario.path_loss_exp;
    let t = &scenario.target;
    let theta_tx = links
        .transmitters
        .iter()
        .map(|&j| angle_of(&scenario.ap_positions[j], t))
        .collect();
    let theta_rx = links
        .receivers
        .iter()
        .map(|&r| angle_of(t, &scenario.ap_positions[r]))
        .collect();
    let (nt, nr) = (links.transmitters.len(), links.receivers.len());
    let beta = DMatrix::from_fn(nt, nr, |a, b| {
        let j = links.transmitters[a];
        let r = links.receivers[b];
        path_gain((scenario.ap_positions[j] - t).norm(), ple)
            * path_gain((t - scenario.ap_positions[r]).norm(), ple)
    });
    let rcs = DMatrix::from_fn(nt, nr, |a, b| {
        scenario.rcs[(links.transmitters[a], links.receivers[b])]
    });
    SensingGeometry {
        theta_tx,
        theta_rx,
        beta,
        rcs,
    }
}

fn place<R: Rng>(rng: &mut R, side: f64, count: usize, placed: &mut Vec<Point>, attempts: &mut usize) -> Result<()> {
    for _ in 0..count {
        loop {
            *attempts += 1;
            if *attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::Config(format!(
                    "could not place {} nodes with {MIN_SEPARATION} m separation on a {side} m grid",
                    placed.len() + 1
                )));
            }
            let p = Point::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side);
            if placed.iter().all(|q| (p - q).norm() >= MIN_SEPARATION) {
                placed.push(p);
                break;
            }
        }
    }
    Ok(())
}

/// Draws one world; a pure function of `(config, seed)`.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = stream(seed, Stream::Scenario, 0);
    let side = config.grid_side;
    let mut placed = Vec::with_capacity(config.n_ap + config.n_ue + 1);
    let mut attempts = 0;
    place(&mut rng, side, config.n_ap, &mut placed, &mut attempts)?;
    place(&mut rng, side, config.n_ue, &mut placed, &mut attempts)?;
    place(&mut rng, side, 1, &mut placed, &mut attempts)?;
    let target = placed.pop().unwrap();
    let ue_positions = placed.split_off(config.n_ap);
    let ap_positions = placed;

    let m = config.m_antennas;
    let beta_ue: Vec<Vec<f64>> = ap_positions
        .iter()
        .map(|ap| {
            ue_positions
                .iter()
                .map(|ue| path_gain((ap - ue).norm(), config.path_loss_exp))
                .collect()
        })
        .collect();
    let channels = beta_ue
        .iter()
        .map(|row| {
            row.iter()
                .map(|&b| {
                    (0..config.k_antennas)
                        .map(|_| complex_normal_vec(&mut rng, m, b))
                        .collect()
                })
                .collect()
        })
        .collect();
    let alpha_var = config.alpha_var();
    let rcs = DMatrix::from_fn(config.n_ap, config.n_ap, |_, _| complex_normal(&mut rng, alpha_var));

    Ok(Scenario {
        ap_positions,
        ue_positions,
        target,
        channels,
        beta_ue,
        rcs,
        path_loss_exp: config.path_loss_exp,
        m_antennas: m,
    })
}
