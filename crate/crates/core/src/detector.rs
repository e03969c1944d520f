//! Iterative receiver: coarse activity and data detection on the beacon
//! antenna, then `N_iter` rounds of data-aided channel estimation and
//! multi-antenna LMMSE refinement.
//!
//! The detected set is fixed once the coarse stage has run; the outer loop
//! only refines the data estimates, which are written back soft.

use ndarray::{s, Array2, Array3, ArrayView2};

use crate::ce_gmmv::{build_ce_problem, estimate_equivalent_csi, CePath, GmmvOptions};
use crate::coarse_dd::{coarse_detect, CoarseOptions, CoarseResult, NOISE_FLOOR};
use crate::error::{Error, Result};
use crate::harness::metrics::{ber, csi_nmse, Reference};
use crate::linalg::{ridge_solve, C64, ZERO};
use crate::sysmodel::{Constellation, SystemConfig};

/// Receiver tuning derived from a [`SystemConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct DetectOptions {
    pub coarse: CoarseOptions,
    pub gmmv: GmmvOptions,
    pub n_iter: usize,
    /// 0-based beacon antenna.
    pub beacon: usize,
}

impl DetectOptions {
    pub fn from_config(config: &SystemConfig) -> Self {
        let sparsity_init = if config.n_active > 0 {
            config.n_active as f64 / config.n_users as f64
        } else {
            0.1
        };
        Self {
            coarse: CoarseOptions {
                rho_damp: config.rho_damp,
                max_iter: config.n_coarse,
                sparsity_init,
                ..CoarseOptions::default()
            },
            gmmv: GmmvOptions {
                max_iter: config.n_gmmv,
                rho_damp: config.rho_damp,
                allow_overdetermined: !config.ce_ls_fallback,
                ..GmmvOptions::default()
            },
            n_iter: config.n_iter,
            beacon: config.beacon(),
        }
    }
}

/// Quality of the data estimate after one receiver stage, measured
/// against a known reference. Stage 0 is the coarse result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageDiagnostics {
    pub stage: usize,
    pub ber: f64,
    /// Linear NMSE of the equivalent CSI; NaN for the coarse stage and
    /// `+∞` when no UE was correctly detected.
    pub nmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub active_set: Vec<usize>,
    /// K × T soft estimates, zero outside the detected set.
    pub xhat: Array2<C64>,
    /// K̂a × T symbol indices of the hard decisions.
    pub xhard: Array2<usize>,
    /// K̂a × (T · bits per symbol).
    pub bits_hat: Array2<u8>,
    /// Equivalent CSI of the detected UEs, (N, M, K̂a); `None` when the
    /// outer loop did not run.
    pub h_equ: Option<Array3<C64>>,
    pub sigma2: f64,
    pub ce_path: Option<CePath>,
    pub coarse: CoarseResult,
    pub diagnostics: Vec<StageDiagnostics>,
}

/// Stacks the per-antenna DD problems: row `n·M + m` of the operator is
/// `H_equ(n, m, :) ∘ S̃(m, :)`, and the same row of the observation is
/// `Y(n, m, :)`.
pub fn build_dd_operator(
    h_equ: &Array3<C64>,
    s: &Array2<C64>,
    active_set: &[usize],
    y: &Array3<C64>,
) -> Result<(Array2<C64>, Array2<C64>)> {
    let (n, m, ka) = h_equ.dim();
    let (yn, ym, t) = y.dim();
    if ka != active_set.len() || s.nrows() != m || yn != n || ym != m || active_set.iter().any(|&k| k >= s.ncols()) {
        return Err(Error::ShapeMismatch(format!(
            "build_dd_operator: H_equ {:?}, S {:?}, {} detected, Y {:?}",
            h_equ.dim(),
            s.dim(),
            active_set.len(),
            y.dim()
        )));
    }
    let phi = Array2::from_shape_fn((n * m, ka), |(row, kappa)| {
        let (ant, sc) = (row / m, row % m);
        h_equ[[ant, sc, kappa]] * s[[sc, active_set[kappa]]]
    });
    let y_dd = Array2::from_shape_fn((n * m, t), |(row, ti)| y[[row / m, row % m, ti]]);
    Ok((phi, y_dd))
}

/// `(ΦᴴΦ + σ̂²I)⁻¹ Φᴴ Y` with `σ̂²` floored at the noise floor.
pub fn lmmse_detect(phi: &ArrayView2<C64>, y_dd: &ArrayView2<C64>, sigma2: f64) -> Result<Array2<C64>> {
    ridge_solve(phi, y_dd, sigma2.max(NOISE_FLOOR))
}

/// Nearest-point slicing with Gray-mapped bits, MSB first per symbol.
pub fn hard_decision(x: &ArrayView2<C64>, constellation: &Constellation) -> (Array2<usize>, Array2<u8>) {
    let (rows, t) = x.dim();
    let bps = constellation.bits_per_symbol();
    let idx = x.mapv(|z| constellation.nearest(z));
    let mut bits = Array2::zeros((rows, t * bps));
    for r in 0..rows {
        for ti in 0..t {
            for (b, bit) in constellation.bits(idx[[r, ti]]).enumerate() {
                bits[[r, ti * bps + b]] = bit;
            }
        }
    }
    (idx, bits)
}

fn detected_rows(xhat: &Array2<C64>, active_set: &[usize]) -> Array2<C64> {
    xhat.select(ndarray::Axis(0), active_set)
}

/// Runs the full receiver on `y` (N × M × T) with code matrix `s` (M × K).
///
/// With a `reference`, BER after every stage and the CSI NMSE after every
/// outer iteration are recorded in `diagnostics`.
pub fn iterative_detect(
    y: &Array3<C64>,
    s: &Array2<C64>,
    constellation: &Constellation,
    opts: &DetectOptions,
    reference: Option<&Reference>,
) -> Result<DetectionResult> {
    let (n, m, t) = y.dim();
    if opts.beacon >= n || s.nrows() != m {
        return Err(Error::ShapeMismatch(format!(
            "iterative_detect: Y {:?}, S {:?}, beacon {}",
            y.dim(),
            s.dim(),
            opts.beacon
        )));
    }
    let y_beacon = y.slice(s![opts.beacon, .., ..]);
    let coarse = coarse_detect(&y_beacon, &s.view(), constellation, &opts.coarse).map_err(|e| e.in_stage("coarse detection"))?;
    let active = coarse.active_set.clone();
    let mut xhat = Array2::from_elem((s.ncols(), t), ZERO);
    for &k in &active {
        xhat.row_mut(k).assign(&coarse.xhat.row(k));
    }
    let mut diagnostics = Vec::new();
    let record = |diag: &mut Vec<StageDiagnostics>, stage: usize, xhat: &Array2<C64>, h: Option<&Array3<C64>>| {
        if let Some(r) = reference {
            let (_, bits) = hard_decision(&detected_rows(xhat, &active).view(), constellation);
            diag.push(StageDiagnostics {
                stage,
                ber: ber(r, &active, &bits),
                nmse: h.map_or(f64::NAN, |h| csi_nmse(r, &active, h)),
            });
        }
    };
    record(&mut diagnostics, 0, &xhat, None);

    let mut sigma2 = coarse.mean_sigma2();
    let mut h_equ = None;
    let mut ce_path = None;
    if !active.is_empty() {
        for it in 1..=opts.n_iter {
            let problem = build_ce_problem(y, s, &xhat, &active).map_err(|e| e.in_stage("channel estimation"))?;
            let ce = estimate_equivalent_csi(&problem, &opts.gmmv, coarse.mean_sigma2()).map_err(|e| e.in_stage("channel estimation"))?;
            let (phi, y_dd) = build_dd_operator(&ce.h_equ, s, &active, y).map_err(|e| e.in_stage("data refinement"))?;
            let xt = lmmse_detect(&phi.view(), &y_dd.view(), ce.sigma2).map_err(|e| e.in_stage("data refinement"))?;
            for (kappa, &k) in active.iter().enumerate() {
                xhat.row_mut(k).assign(&xt.row(kappa));
            }
            sigma2 = ce.sigma2;
            ce_path = Some(ce.path);
            record(&mut diagnostics, it, &xhat, Some(&ce.h_equ));
            h_equ = Some(ce.h_equ);
        }
    }
    let (xhard, bits_hat) = hard_decision(&detected_rows(&xhat, &active).view(), constellation);
    Ok(DetectionResult {
        active_set: active,
        xhat,
        xhard,
        bits_hat,
        h_equ,
        sigma2,
        ce_path,
        coarse,
        diagnostics,
    })
}
