//! Receiver selection from the per-AP sensing leakage towards users.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Scoring;
use crate::error::{Error, Result};
use crate::scenario::SensingLinks;

/// Partition of the APs into sensing receivers and ISAC transmitters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApConfiguration {
    /// Ascending AP indices.
    pub receivers: Vec<usize>,
    /// Ascending AP indices, the complement of `receivers`.
    pub transmitters: Vec<usize>,
}

impl ApConfiguration {
    pub fn from_receivers(n_ap: usize, receivers: &[usize]) -> Result<Self> {
        let mut rx = receivers.to_vec();
        rx.sort_unstable();
        rx.dedup();
        if rx.len() != receivers.len() || rx.iter().any(|&r| r >= n_ap) {
            return Err(Error::Config(format!("invalid receiver set {receivers:?} for {n_ap} APs")));
        }
        if rx.len() >= n_ap {
            return Err(Error::Config("at least one AP must transmit".into()));
        }
        let transmitters = (0..n_ap).filter(|a| !rx.contains(a)).collect();
        Ok(Self {
            receivers: rx,
            transmitters,
        })
    }

    pub fn links(&self) -> SensingLinks {
        SensingLinks {
            transmitters: self.transmitters.clone(),
            receivers: self.receivers.clone(),
        }
    }
}

/// Leakage matrix: entry `(i, l)` is `‖(x_lˢ)ᴴ h_{l,i}‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMatrix(pub DMatrix<f64>);

impl MiMatrix {
    pub fn column_norms(&self) -> Vec<f64> {
        self.0.column_iter().map(|c| c.norm()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.0.column_iter().map(|c| c.sum()).collect()
    }

    pub fn scores(&self, scoring: Scoring) -> Vec<f64> {
        match scoring {
            Scoring::ColumnNorm => self.column_norms(),
            Scoring::ColumnSum => self.column_sums(),
        }
    }
}

/// `x_lˢ = w_{l,t} s_sᴴ`.
pub fn sensing_block(w_lt: &DVector<Complex64>, s_s: &DVector<Complex64>) -> DMatrix<Complex64> {
    w_lt * s_s.adjoint()
}

/// `log₂(1 + ‖(x_lˢ)ᴴ h‖²)`.
pub fn mi_upper_bound(x_ls: &DMatrix<Complex64>, h: &DVector<Complex64>) -> f64 {
    (1.0 + (x_ls.adjoint() * h).norm_squared()).log2()
}

/// Leakage matrix over all APs from their sensing precoders.
///
/// `sensing_precoders[l]` is AP `l`'s sensing precoder and `channels[l][i]`
/// its channel to user `i`. Uses `‖(w sᴴ)ᴴ h‖² = ‖s‖² |wᴴh|²`.
pub fn build_mi_matrix(
    sensing_precoders: &[DVector<Complex64>],
    channels: &[Vec<DVector<Complex64>>],
    s_s: &DVector<Complex64>,
) -> MiMatrix {
    let n_ap = sensing_precoders.len();
    let n_ue = channels.first().map_or(0, Vec::len);
    let s2 = s_s.norm_squared();
    MiMatrix(DMatrix::from_fn(n_ue, n_ap, |i, l| {
        s2 * sensing_precoders[l].dotc(&channels[l][i]).norm_sqr()
    }))
}

/// Picks the `n_rx` highest-scoring APs as receivers; ties go to the lower
/// AP index.
pub fn select_receivers(mi: &MiMatrix, n_rx: usize, scoring: Scoring) -> Result<ApConfiguration> {
    let scores = mi.scores(scoring);
    let n_ap = scores.len();
    if n_rx >= n_ap {
        return Err(Error::Config(format!("cannot select {n_rx} receivers out of {n_ap} APs")));
    }
    let mut order: Vec<usize> = (0..n_ap).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ApConfiguration::from_receivers(n_ap, &order[..n_rx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal_vec, rng_from};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn configuration_partition() {
        let cfg = ApConfiguration::from_receivers(5, &[3, 1]).unwrap();
        assert_eq!(cfg.receivers, vec![1, 3]);
        assert_eq!(cfg.transmitters, vec![0, 2, 4]);
        assert!(ApConfiguration::from_receivers(3, &[1, 1]).is_err());
        assert!(ApConfiguration::from_receivers(3, &[3]).is_err());
        assert!(ApConfiguration::from_receivers(2, &[0, 1]).is_err());
    }

    #[test]
    fn sensing_block_cases() {
        let s = DVector::from_vec(vec![Complex64::new(0.0, 1.0), c(-1.0), c(1.0), Complex64::new(0.0, -1.0)]);
        assert_eq!(sensing_block(&DVector::zeros(3), &s), DMatrix::zeros(3, 4));
        let mut w = DVector::zeros(3);
        w[0] = c(1.0);
        assert!((sensing_block(&w, &s).norm_squared() - 4.0).abs() < 1e-15);

        let mut rng = rng_from(1);
        let w = complex_normal_vec(&mut rng, 4, 1.0);
        let s = complex_normal_vec(&mut rng, 6, 1.0);
        let x = sensing_block(&w, &s);
        let sv = x.singular_values();
        assert!(sv[1] < 1e-12 * sv[0]);
    }

    #[test]
    fn mi_bound_cases() {
        let h = DVector::from_vec(vec![c(1.0), c(0.0)]);
        assert_eq!(mi_upper_bound(&DMatrix::zeros(2, 3), &h), 0.0);
        let mut x = DMatrix::zeros(2, 3);
        x[(0, 0)] = c(1.0);
        assert!((mi_upper_bound(&x, &h) - 1.0).abs() < 1e-15);
        let a = mi_upper_bound(&x, &(&h * c(2.0)));
        assert!(a > 1.0);
    }

    #[test]
    fn mi_matrix_hand_value_and_identity() {
        let mut w = DVector::zeros(2);
        w[0] = c(1.0);
        let mut h = DVector::zeros(2);
        h[0] = c(2.0);
        let s = DVector::from_element(16, c(1.0));
        let mi = build_mi_matrix(&[w.clone()], &[vec![h.clone()]], &s);
        assert!((mi.0[(0, 0)] - 64.0).abs() < 1e-12);

        let zero = build_mi_matrix(&[DVector::zeros(2)], &[vec![h]], &s);
        assert_eq!(zero.0[(0, 0)], 0.0);

        let mut rng = rng_from(9);
        let ws: Vec<_> = (0..3).map(|_| complex_normal_vec(&mut rng, 4, 1.0)).collect();
        let hs: Vec<Vec<_>> = (0..3).map(|_| (0..2).map(|_| complex_normal_vec(&mut rng, 4, 1.0)).collect()).collect();
        let s = complex_normal_vec(&mut rng, 8, 1.0);
        let mi = build_mi_matrix(&ws, &hs, &s);
        for l in 0..3 {
            for i in 0..2 {
                let full = (sensing_block(&ws[l], &s).adjoint() * &hs[l][i]).norm_squared();
                assert!((full - mi.0[(i, l)]).abs() <= 1e-12 * full);
            }
        }
    }

    #[test]
    fn select_argmax_and_ties() {
        let mi = MiMatrix(DMatrix::from_row_slice(1, 3, &[3.0, 7.0, 2.0]));
        assert_eq!(select_receivers(&mi, 1, Scoring::ColumnNorm).unwrap().receivers, vec![1]);
        let flat = MiMatrix(DMatrix::from_element(2, 5, 1.0));
        assert_eq!(select_receivers(&flat, 2, Scoring::ColumnNorm).unwrap().receivers, vec![0, 1]);
        assert!(select_receivers(&flat, 5, Scoring::ColumnNorm).is_err());
    }

    fn exhaustive(scores: &[f64], n_rx: usize) -> Vec<usize> {
        // enumerate subsets in lexicographic order, keep the first strict maximum
        let n = scores.len();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n_rx {
                continue;
            }
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            // sum in a canonical order so equal multisets give equal totals
            let mut vals: Vec<f64> = set.iter().map(|&i| scores[i]).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            let total: f64 = vals.iter().sum();
            let better = match &best {
                None => true,
                Some((b, bs)) => total > *b || (total == *b && set < *bs),
            };
            if better {
                best = Some((total, set));
            }
        }
        best.unwrap().1
    }

    proptest! {
        #[test]
        fn top_k_equals_exhaustive(
            n_ap in 2usize..=8,
            raw in proptest::collection::vec(0u8..6, 3 * 8),
            k in 1usize..8,
        ) {
            let n_rx = 1 + k % (n_ap - 1);
            // small integer entries force frequent ties
            let m = DMatrix::from_fn(3, n_ap, |i, l| raw[i * 8 + l] as f64);
            let mi = MiMatrix(m);
            for scoring in [Scoring::ColumnNorm, Scoring::ColumnSum] {
                let got = select_receivers(&mi, n_rx, scoring).unwrap().receivers;
                let want = exhaustive(&mi.scores(scoring), n_rx);
                prop_assert_eq!(got, want);
            }
        }

        #[test]
        fn selection_invariant_to_symbol_scaling(seed in 0u64..1000, scale in 0.1f64..10.0) {
            let mut rng = rng_from(seed);
            let ws: Vec<_> = (0..6).map(|_| complex_normal_vec(&mut rng, 3, 1.0)).collect();
            let hs: Vec<Vec<_>> = (0..6).map(|_| (0..3).map(|_| complex_normal_vec(&mut rng, 3, 1.0)).collect()).collect();
            let s = complex_normal_vec(&mut rng, 4, 1.0);
            let a = select_receivers(&build_mi_matrix(&ws, &hs, &s), 2, Scoring::ColumnNorm).unwrap();
            let b = select_receivers(&build_mi_matrix(&ws, &hs, &(&s * c(scale))), 2, Scoring::ColumnNorm).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
