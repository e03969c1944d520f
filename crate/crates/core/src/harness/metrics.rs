//! Frame-level scoring against the generating truth.

use ndarray::{Array2, Array3};

use crate::linalg::C64;

/// Ground truth needed to score one frame.
#[derive(Debug, Clone, Copy)]
pub struct Reference<'a> {
    /// Sorted true active set.
    pub active_set: &'a [usize],
    /// Ka × (T · bits per symbol), rows in `active_set` order.
    pub bits: &'a Array2<u8>,
    /// Small-scale channel, (N, M, K).
    pub h: &'a Array3<C64>,
    /// Pre-equalization factors, (M, K). All ones for schemes without it.
    pub theta: &'a Array2<C64>,
    pub n_users: usize,
}

/// Misses and false alarms.
pub fn activity_errors(truth: &[usize], detected: &[usize]) -> (usize, usize) {
    let misses = truth.iter().filter(|k| !detected.contains(k)).count();
    let false_alarms = detected.iter().filter(|k| !truth.contains(k)).count();
    (misses, false_alarms)
}

/// `(misses + false alarms) / K`.
pub fn adep(reference: &Reference, detected: &[usize]) -> f64 {
    let (miss, fa) = activity_errors(reference.active_set, detected);
    (miss + fa) as f64 / reference.n_users as f64
}

/// Bit error rate over the true actives' bits. A missed UE contributes all
/// of its bits as errors; false alarms are not scored. Zero when no UE is
/// active.
pub fn ber(reference: &Reference, detected: &[usize], bits_hat: &Array2<u8>) -> f64 {
    let per_ue = reference.bits.ncols();
    let total = reference.active_set.len() * per_ue;
    if total == 0 {
        return 0.0;
    }
    let mut errors = 0usize;
    for (row, k) in reference.active_set.iter().enumerate() {
        match detected.iter().position(|d| d == k) {
            Some(kappa) => {
                errors += reference
                    .bits
                    .row(row)
                    .iter()
                    .zip(bits_hat.row(kappa).iter())
                    .filter(|(a, b)| a != b)
                    .count()
            }
            None => errors += per_ue,
        }
    }
    errors as f64 / total as f64
}

/// Linear NMSE of the equivalent CSI estimate `h_hat` (N, M, K̂a) against
/// `H ∘ θ`, over correctly detected UEs only; `+∞` when there are none.
pub fn csi_nmse(reference: &Reference, detected: &[usize], h_hat: &Array3<C64>) -> f64 {
    let (n, m, _) = reference.h.dim();
    let mut err = 0.0;
    let mut energy = 0.0;
    let mut any = false;
    for (kappa, &k) in detected.iter().enumerate() {
        if !reference.active_set.contains(&k) {
            continue;
        }
        any = true;
        for ant in 0..n {
            for sc in 0..m {
                let truth = reference.h[[ant, sc, k]] * reference.theta[[sc, k]];
                err += (h_hat[[ant, sc, kappa]] - truth).norm_sqr();
                energy += truth.norm_sqr();
            }
        }
    }
    if !any {
        return f64::INFINITY;
    }
    if energy == 0.0 {
        return if err == 0.0 { 0.0 } else { f64::INFINITY };
    }
    err / energy
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
