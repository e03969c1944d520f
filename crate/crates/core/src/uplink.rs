//! UE-side preprocessing and synthesis of the received tensor.
//!
//! Each UE inverts its beacon-antenna channel subcarrier by subcarrier
//! (nulling those weaker than `h0`), inverts its large-scale fading, and
//! spreads its symbols with its code. The BS sees
//!
//! ```text
//! Y[n, :, t] = Σ_k √p_k √g_k (H[n, :, k] ∘ θ_k ∘ s_k) α_k x_{k,t} + W[n, :, t]
//! ```
//!
//! Nulled subcarriers contribute nothing; the receiver's `Y_η = S X`
//! assumption is only approximately true.

use ndarray::{s, Array1, Array2, Array3, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;

use crate::channel::{typical_large_scale_gain, ChannelRealization};
use crate::error::{Error, Result};
use crate::linalg::{cn, C64, ZERO};
use crate::sysmodel::{Constellation, SpreadingCodes, SystemConfig};

/// Pre-equalization factors of all UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreEqualization {
    /// θ, shape (M, K).
    pub theta: Array2<C64>,
    /// True where the subcarrier was nulled.
    pub null_mask: Array2<bool>,
    /// Mean |θ|² over non-nulled entries.
    pub p_e: f64,
}

/// Ground truth of one transmitted frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    /// Active UE indices, increasing.
    pub active_set: Vec<usize>,
    pub alpha: Vec<bool>,
    /// Symbols, shape (K, T); rows of inactive UEs are zero.
    pub x: Array2<C64>,
    /// Constellation index of each active UE's symbols, shape (Ka, T),
    /// rows ordered as `active_set`.
    pub symbols: Array2<usize>,
    /// Bits of each active UE, shape (Ka, T·log2 L), rows ordered as
    /// `active_set`.
    pub bits: Array2<u8>,
    /// Received tensor, shape (N, M, T).
    pub y: Array3<C64>,
    /// Noise variance used, linear.
    pub sigma2: f64,
    /// Power-control factors `1/g_k`.
    pub p: Vec<f64>,
}

/// Symbols drawn for one frame, before propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSymbols {
    pub active_set: Vec<usize>,
    pub alpha: Vec<bool>,
    pub x: Array2<C64>,
    pub symbols: Array2<usize>,
    pub bits: Array2<u8>,
}

/// Per-subcarrier pre-equalization of one UE against its beacon channel.
/// Magnitudes at or above `h0` are inverted, smaller ones nulled.
pub fn pre_equalize(h_beacon: ArrayView1<C64>, h0: f64) -> (Array1<C64>, Vec<bool>) {
    let mut theta = Array1::from_elem(h_beacon.len(), ZERO);
    let mut nulled = vec![false; h_beacon.len()];
    for (m, &h) in h_beacon.iter().enumerate() {
        if h.norm() >= h0 {
            theta[m] = h.inv();
        } else {
            nulled[m] = true;
        }
    }
    (theta, nulled)
}

/// Pre-equalization of every UE against antenna `beacon` (0-based).
pub fn pre_equalize_all(channel: &ChannelRealization, beacon: usize, h0: f64) -> PreEqualization {
    let (_, m, k) = channel.h.dim();
    let mut theta = Array2::from_elem((m, k), ZERO);
    let mut null_mask = Array2::from_elem((m, k), false);
    let mut acc = 0.0;
    let mut count = 0usize;
    for ue in 0..k {
        let (t, nulled) = pre_equalize(channel.h.slice(s![beacon, .., ue]), h0);
        for sc in 0..m {
            theta[[sc, ue]] = t[sc];
            null_mask[[sc, ue]] = nulled[sc];
            if !nulled[sc] {
                acc += t[sc].norm_sqr();
                count += 1;
            }
        }
    }
    PreEqualization {
        theta,
        null_mask,
        p_e: if count > 0 { acc / count as f64 } else { 0.0 },
    }
}

/// Draws the active set (uniform without replacement) and i.i.d. uniform
/// constellation symbols for the active UEs.
pub fn draw_frame<R: Rng + ?Sized>(rng: &mut R, config: &SystemConfig, constellation: &Constellation) -> FrameSymbols {
    let (k, ka, t) = (config.n_users, config.n_active, config.n_slots);
    let mut active_set = sample(rng, k, ka).into_vec();
    active_set.sort_unstable();
    let mut alpha = vec![false; k];
    let mut x = Array2::from_elem((k, t), ZERO);
    let mut symbols = Array2::zeros((ka, t));
    let bps = constellation.bits_per_symbol();
    let mut bits = Array2::zeros((ka, t * bps));
    for (row, &ue) in active_set.iter().enumerate() {
        alpha[ue] = true;
        for slot in 0..t {
            let idx = rng.random_range(0..constellation.order());
            symbols[[row, slot]] = idx;
            x[[ue, slot]] = constellation.point(idx);
            for (b, bit) in constellation.bits(idx).enumerate() {
                bits[[row, slot * bps + b]] = bit;
            }
        }
    }
    FrameSymbols {
        active_set,
        alpha,
        x,
        symbols,
        bits,
    }
}

/// Per-subcarrier noise power in watts for a PSD in dBm/Hz spread evenly
/// over `n_sub` subcarriers.
pub fn noise_variance(bandwidth_hz: f64, noise_psd_dbm_hz: f64, n_sub: usize) -> f64 {
    assert!(bandwidth_hz > 0.0, "bandwidth must be positive");
    10f64.powf((noise_psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz / n_sub as f64
}

/// Noise variance of the power-normalized model at the configured
/// operating point.
///
/// Power control delivers every UE at a common per-subcarrier level equal
/// to what a typical UE, one at the cell-average path loss in dB, receives
/// when it radiates `tx_power_dbm`; the synthesized signal is scaled so
/// that this level is 1. `noise_variance` in the config overrides the link budget.
pub fn effective_noise_variance(config: &SystemConfig) -> f64 {
    if let Some(v) = config.noise_variance {
        return v;
    }
    let m = config.n_subcarriers;
    let per_sub_noise = noise_variance(config.bandwidth_hz, config.noise_psd_dbm_hz, m);
    let tx_w = 10f64.powf((config.tx_power_dbm - 30.0) / 10.0);
    let g_ref = typical_large_scale_gain(config.dist_min_km, config.dist_max_km).expect("validated distance range");
    per_sub_noise / (tx_w * g_ref / m as f64)
}

/// Realized transmit power of one UE in dBm, given its pre-equalization
/// column and large-scale gain, under the normalization of
/// [`effective_noise_variance`].
pub fn realized_tx_power_dbm(theta: ArrayView1<C64>, gain: f64, config: &SystemConfig) -> f64 {
    let g_ref = typical_large_scale_gain(config.dist_min_km, config.dist_max_km).expect("validated distance range");
    let tx_w = 10f64.powf((config.tx_power_dbm - 30.0) / 10.0);
    let mean_theta = theta.iter().map(|z| z.norm_sqr()).sum::<f64>() / theta.len() as f64;
    10.0 * (mean_theta * tx_w * g_ref / gain).log10() + 30.0
}

/// Received tensor (N × M × T) for the given channel, factors and symbols.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_uplink<R: Rng + ?Sized>(
    h: &Array3<C64>,
    gain: &[f64],
    theta: &Array2<C64>,
    codes: &Array2<C64>,
    alpha: &[bool],
    x: &Array2<C64>,
    sigma2: f64,
    rng: &mut R,
) -> Result<Array3<C64>> {
    let (n, m, k) = h.dim();
    let t = x.ncols();
    if gain.len() != k || theta.dim() != (m, k) || codes.dim() != (m, k) || alpha.len() != k || x.nrows() != k {
        return Err(Error::ShapeMismatch(format!(
            "synthesize_uplink: H {:?}, gains {}, theta {:?}, codes {:?}, alpha {}, X {:?}",
            h.dim(),
            gain.len(),
            theta.dim(),
            codes.dim(),
            alpha.len(),
            x.dim()
        )));
    }
    let mut y = Array3::from_elem((n, m, t), ZERO);
    let mut coef = Array2::from_elem((n, m), ZERO);
    for ue in (0..k).filter(|&ue| alpha[ue]) {
        let amp = (1.0 / gain[ue]).sqrt() * gain[ue].sqrt();
        for ant in 0..n {
            for sc in 0..m {
                coef[[ant, sc]] = h[[ant, sc, ue]] * theta[[sc, ue]] * codes[[sc, ue]] * amp;
            }
        }
        for slot in 0..t {
            let sym = x[[ue, slot]];
            if sym == ZERO {
                continue;
            }
            for ant in 0..n {
                for sc in 0..m {
                    y[[ant, sc, slot]] += coef[[ant, sc]] * sym;
                }
            }
        }
    }
    if sigma2 > 0.0 {
        for z in y.iter_mut() {
            *z += cn(rng, sigma2);
        }
    }
    Ok(y)
}

/// Draws symbols, pre-equalizes and propagates one frame.
pub fn transmit_frame<R: Rng + ?Sized>(
    rng: &mut R,
    config: &SystemConfig,
    constellation: &Constellation,
    channel: &ChannelRealization,
    codes: &SpreadingCodes,
) -> Result<(PreEqualization, FrameTruth)> {
    let pre = pre_equalize_all(channel, config.beacon(), config.h0);
    let sym = draw_frame(rng, config, constellation);
    let sigma2 = effective_noise_variance(config);
    let y = synthesize_uplink(&channel.h, &channel.gain, &pre.theta, &codes.matrix, &sym.alpha, &sym.x, sigma2, rng)?;
    let p = channel.gain.iter().map(|g| 1.0 / g).collect();
    Ok((
        pre,
        FrameTruth {
            active_set: sym.active_set,
            alpha: sym.alpha,
            x: sym.x,
            symbols: sym.symbols,
            bits: sym.bits,
            y,
            sigma2,
            p,
        },
    ))
}
