//! Reference schemes for comparison.
//!
//! * Pilot-based: known pilots over the same `T` slots and `M` subcarriers,
//!   joint activity and channel estimation (GMMV-AMP or SOMP), activity by
//!   channel-row energy, then coherent LMMSE detection of a data frame.
//! * Single-antenna pre-equalized: activity and data detection on the
//!   beacon antenna only (AMP or SOMP), no channel estimation.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, Array3, ArrayView2};
use rand::Rng;

use crate::ce_gmmv::{gmmv_amp, ls_fallback, to_angular, dft_matrix, CeProblem, GmmvOptions};
use crate::coarse_dd::coarse_detect;
use crate::detector::{build_dd_operator, hard_decision, lmmse_detect, DetectOptions};
use crate::error::{Error, Result};
use crate::linalg::{cn, herm, ridge_solve, select_cols, C64, ZERO};
use crate::sysmodel::Constellation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    PilotGmmvAmp,
    PilotSomp,
    SingleAntennaAmp,
    SingleAntennaSomp,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::PilotGmmvAmp,
        BaselineKind::PilotSomp,
        BaselineKind::SingleAntennaAmp,
        BaselineKind::SingleAntennaSomp,
    ];

    pub fn is_pilot(self) -> bool {
        matches!(self, BaselineKind::PilotGmmvAmp | BaselineKind::PilotSomp)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::PilotGmmvAmp => "pilot-gmmv",
            BaselineKind::PilotSomp => "pilot-somp",
            BaselineKind::SingleAntennaAmp => "single-amp",
            BaselineKind::SingleAntennaSomp => "single-somp",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pilot-gmmv" | "baseline1" => Ok(BaselineKind::PilotGmmvAmp),
            "pilot-somp" | "baseline2" => Ok(BaselineKind::PilotSomp),
            "single-amp" | "baseline3" => Ok(BaselineKind::SingleAntennaAmp),
            "single-somp" | "baseline4" => Ok(BaselineKind::SingleAntennaSomp),
            other => Err(Error::InvalidConfig(format!("unknown baseline `{other}`"))),
        }
    }
}

/// When SOMP stops adding atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SompStop {
    MaxSparsity(usize),
    /// Stop once the residual energy `Σ‖R‖²_F` falls to this level.
    Residual(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SompResult {
    /// Selected columns in order of selection.
    pub support: Vec<usize>,
    /// One `|support| × cols` coefficient block per measurement block.
    pub coef: Vec<Array2<C64>>,
    /// Residual Frobenius norm before the first and after every selection.
    pub residual_norms: Vec<f64>,
}

fn refit(ys: &[Array2<C64>], phis: &[Array2<C64>], support: &[usize]) -> Result<Vec<Array2<C64>>> {
    phis.iter()
        .zip(ys)
        .map(|(phi, y)| {
            let sub = select_cols(&phi.view(), support);
            let scale = sub.iter().map(|z| z.norm_sqr()).sum::<f64>() / support.len().max(1) as f64;
            ridge_solve(&sub.view(), &y.view(), 1e-12 * scale.max(1e-300))
        })
        .collect()
}

/// SOMP over several measurement blocks `Y_b = Φ_b X_b` that share one row
/// support. Each step picks the column with the largest summed correlation
/// magnitude `Σ_b Σ_j |φ_{b,k}ᴴ r_{b,j}| / ‖φ_{b,k}‖`, refits all blocks by
/// least squares on the support and updates the residuals.
pub fn somp_recover_blocks(ys: &[Array2<C64>], phis: &[Array2<C64>], stop: SompStop) -> Result<SompResult> {
    if ys.len() != phis.len() || ys.is_empty() {
        return Err(Error::ShapeMismatch("somp: block count mismatch".into()));
    }
    let k = phis[0].ncols();
    for (y, phi) in ys.iter().zip(phis) {
        if phi.nrows() != y.nrows() || phi.ncols() != k {
            return Err(Error::ShapeMismatch(format!("somp: Φ {:?} vs Y {:?}", phi.dim(), y.dim())));
        }
    }
    let col_norm: Vec<Vec<f64>> = phis
        .iter()
        .map(|phi| phi.columns().into_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect())
        .collect();
    let energy = |rs: &[Array2<C64>]| rs.iter().flat_map(|r| r.iter()).map(|z| z.norm_sqr()).sum::<f64>();
    let mut residual: Vec<Array2<C64>> = ys.to_vec();
    let mut support = Vec::new();
    let mut coef: Vec<Array2<C64>> = ys.iter().map(|y| Array2::zeros((0, y.ncols()))).collect();
    let e0 = energy(&residual);
    let mut norms = vec![e0.sqrt()];
    let limit = match stop {
        SompStop::MaxSparsity(s) => s.min(k),
        SompStop::Residual(_) => k,
    };
    let tiny = 1e-24 * e0.max(1e-300);
    while support.len() < limit {
        let e = energy(&residual);
        if let SompStop::Residual(th) = stop {
            if e <= th {
                break;
            }
        }
        if e <= tiny {
            break;
        }
        let mut score = vec![0.0; k];
        for (b, (phi, r)) in phis.iter().zip(&residual).enumerate() {
            let corr = herm(&phi.view()).dot(r);
            for (ki, row) in corr.rows().into_iter().enumerate() {
                if col_norm[b][ki] > 0.0 {
                    score[ki] += row.iter().map(|z| z.norm()).sum::<f64>() / col_norm[b][ki];
                }
            }
        }
        let best = (0..k)
            .filter(|c| !support.contains(c))
            .fold(None, |acc: Option<usize>, c| match acc {
                Some(a) if score[a] >= score[c] => Some(a),
                _ => Some(c),
            });
        let Some(best) = best else { break };
        if score[best] <= 0.0 {
            break;
        }
        support.push(best);
        let fit = match refit(ys, phis, &support) {
            Ok(f) => f,
            Err(Error::SingularSystem) => {
                support.pop();
                break;
            }
            Err(e) => return Err(e),
        };
        residual = ys
            .iter()
            .zip(phis)
            .zip(&fit)
            .map(|((y, phi), c)| y - &select_cols(&phi.view(), &support).dot(c))
            .collect();
        coef = fit;
        norms.push(energy(&residual).sqrt());
    }
    Ok(SompResult {
        support,
        coef,
        residual_norms: norms,
    })
}

/// Single-block SOMP, `Y = Φ X` with `X` row sparse.
pub fn somp_recover(y: &ArrayView2<C64>, phi: &ArrayView2<C64>, stop: SompStop) -> Result<SompResult> {
    somp_recover_blocks(&[y.to_owned()], &[phi.to_owned()], stop)
}

/// Known pilots: one `T × K` i.i.d. CN(0, 1) matrix per subcarrier.
pub fn pilot_matrices<R: Rng + ?Sized>(rng: &mut R, m: usize, t: usize, k: usize) -> Vec<Array2<C64>> {
    (0..m).map(|_| Array2::from_shape_fn((t, k), |_| cn(rng, 1.0))).collect()
}

/// Received pilot tensor (N × M × T) without pre-equalization; power
/// control makes every active UE arrive at unit large-scale level.
pub fn pilot_observation<R: Rng + ?Sized>(
    h: &Array3<C64>,
    alpha: &[bool],
    pilots: &[Array2<C64>],
    sigma2: f64,
    rng: &mut R,
) -> Result<Array3<C64>> {
    let (n, m, k) = h.dim();
    if pilots.len() != m || alpha.len() != k || pilots.iter().any(|p| p.ncols() != k) {
        return Err(Error::ShapeMismatch("pilot_observation: pilot shapes".into()));
    }
    let t = pilots.first().map_or(0, |p| p.nrows());
    let mut y = Array3::from_elem((n, m, t), ZERO);
    for ue in (0..k).filter(|&ue| alpha[ue]) {
        for sc in 0..m {
            for ti in 0..t {
                let p = pilots[sc][[ti, ue]];
                for ant in 0..n {
                    y[[ant, sc, ti]] += h[[ant, sc, ue]] * p;
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

/// UEs whose energy exceeds `fraction` times the median of the `ka`
/// largest energies.
pub fn threshold_activity(energy: &[f64], ka: usize, fraction: f64) -> Vec<usize> {
    let mut sorted: Vec<f64> = energy.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = ka.max(1).min(sorted.len());
    if top == 0 {
        return Vec::new();
    }
    let head = &sorted[..top];
    let median = if top % 2 == 1 {
        head[top / 2]
    } else {
        0.5 * (head[top / 2 - 1] + head[top / 2])
    };
    let th = fraction * median;
    energy.iter().enumerate().filter(|(_, &e)| e > th && e > 0.0).map(|(k, _)| k).collect()
}

/// Joint activity and channel estimation from the pilot tensor. Returns the
/// detected set and the channel estimate of those UEs, (N, M, K̂a).
pub fn pilot_jadce(
    kind: BaselineKind,
    y_pilot: &Array3<C64>,
    pilots: &[Array2<C64>],
    n_active: usize,
    fraction: f64,
    gmmv: &GmmvOptions,
    sigma2: f64,
) -> Result<(Vec<usize>, Array3<C64>)> {
    let (n, m, _) = y_pilot.dim();
    let k = pilots.first().map_or(0, |p| p.ncols());
    let obs: Vec<Array2<C64>> = (0..m).map(|sc| y_pilot.slice(s![.., sc, ..]).reversed_axes().to_owned()).collect();
    let h_all = match kind {
        BaselineKind::PilotGmmvAmp => {
            let u = dft_matrix(n);
            let problem = CeProblem {
                phi: pilots.to_vec(),
                r: obs.iter().map(|y| to_angular(&y.view(), &u)).collect(),
                u_bs: u,
            };
            match gmmv_amp(&problem, gmmv) {
                Err(Error::Overdetermined { .. }) => ls_fallback(&problem, sigma2)?.h_equ,
                other => other?.h_equ,
            }
        }
        BaselineKind::PilotSomp => {
            let res = somp_recover_blocks(&obs, pilots, SompStop::MaxSparsity(n_active))?;
            let mut h = Array3::from_elem((n, m, k), ZERO);
            for (sc, c) in res.coef.iter().enumerate() {
                for (row, &ue) in res.support.iter().enumerate() {
                    for ant in 0..n {
                        h[[ant, sc, ue]] = c[[row, ant]];
                    }
                }
            }
            h
        }
        other => return Err(Error::InvalidConfig(format!("{other} is not a pilot scheme"))),
    };
    let energy: Vec<f64> = (0..k)
        .map(|ue| h_all.slice(s![.., .., ue]).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let active = threshold_activity(&energy, n_active, fraction);
    let h_est = h_all.select(ndarray::Axis(2), &active);
    Ok((active, h_est))
}

/// Coherent LMMSE detection of a data frame with a known channel estimate.
pub fn coherent_detect(
    y_data: &Array3<C64>,
    s: &Array2<C64>,
    active: &[usize],
    h_est: &Array3<C64>,
    sigma2: f64,
) -> Result<Array2<C64>> {
    let t = y_data.dim().2;
    let mut xhat = Array2::from_elem((s.ncols(), t), ZERO);
    if active.is_empty() {
        return Ok(xhat);
    }
    let (phi, y_dd) = build_dd_operator(h_est, s, active, y_data)?;
    let xt = lmmse_detect(&phi.view(), &y_dd.view(), sigma2)?;
    for (kappa, &k) in active.iter().enumerate() {
        xhat.row_mut(k).assign(&xt.row(kappa));
    }
    Ok(xhat)
}

/// Activity and data detection on the beacon antenna only. Returns the
/// detected set and K × T soft estimates.
pub fn single_antenna_detect(
    kind: BaselineKind,
    y_beacon: &ArrayView2<C64>,
    s: &Array2<C64>,
    constellation: &Constellation,
    opts: &DetectOptions,
    n_active: usize,
) -> Result<(Vec<usize>, Array2<C64>)> {
    match kind {
        BaselineKind::SingleAntennaAmp => {
            let r = coarse_detect(y_beacon, &s.view(), constellation, &opts.coarse)?;
            Ok((r.active_set, r.xhat))
        }
        BaselineKind::SingleAntennaSomp => {
            let r = somp_recover(y_beacon, &s.view(), SompStop::MaxSparsity(n_active))?;
            let mut xhat = Array2::from_elem((s.ncols(), y_beacon.ncols()), ZERO);
            for (row, &k) in r.support.iter().enumerate() {
                xhat.row_mut(k).assign(&r.coef[0].row(row));
            }
            let mut active = r.support;
            active.sort_unstable();
            Ok((active, xhat))
        }
        other => Err(Error::InvalidConfig(format!("{other} is not a single-antenna scheme"))),
    }
}

/// Output of one baseline run, scored like a [`crate::detector::DetectionResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub active_set: Vec<usize>,
    pub xhat: Array2<C64>,
    pub bits_hat: Array2<u8>,
    /// Channel estimate of the detected UEs (pilot schemes only).
    pub h_est: Option<Array3<C64>>,
}

/// Everything a baseline needs from the frame generator.
#[derive(Debug, Clone, Copy)]
pub struct BaselineScenario<'a> {
    pub h: &'a Array3<C64>,
    pub gain: &'a [f64],
    pub alpha: &'a [bool],
    pub x: &'a Array2<C64>,
    /// Pre-equalization of the single-antenna schemes, (M, K).
    pub theta: &'a Array2<C64>,
    /// Data spreading codes of the pilot schemes.
    pub codes: &'a Array2<C64>,
    /// Spreading codes of the single-antenna schemes.
    pub baseline_codes: &'a Array2<C64>,
    pub pilots: &'a [Array2<C64>],
    pub sigma2: f64,
    pub n_active: usize,
    pub pilot_threshold: f64,
}

/// Synthesizes the scheme's own observations and runs its receiver.
pub fn run_baseline<R: Rng + ?Sized>(
    kind: BaselineKind,
    sc: &BaselineScenario,
    constellation: &Constellation,
    opts: &DetectOptions,
    rng: &mut R,
) -> Result<BaselineResult> {
    let (_, m, k) = sc.h.dim();
    if kind.is_pilot() {
        let y_p = pilot_observation(sc.h, sc.alpha, sc.pilots, sc.sigma2, rng)?;
        let (active, h_est) = pilot_jadce(kind, &y_p, sc.pilots, sc.n_active, sc.pilot_threshold, &opts.gmmv, sc.sigma2)
            .map_err(|e| e.in_stage("pilot estimation"))?;
        let ones = Array2::from_elem((m, k), C64::new(1.0, 0.0));
        let y_d = crate::uplink::synthesize_uplink(sc.h, sc.gain, &ones, sc.codes, sc.alpha, sc.x, sc.sigma2, rng)?;
        let xhat = coherent_detect(&y_d, sc.codes, &active, &h_est, sc.sigma2).map_err(|e| e.in_stage("coherent detection"))?;
        let (_, bits_hat) = hard_decision(&xhat.select(ndarray::Axis(0), &active).view(), constellation);
        Ok(BaselineResult {
            active_set: active,
            xhat,
            bits_hat,
            h_est: Some(h_est),
        })
    } else {
        let y = crate::uplink::synthesize_uplink(sc.h, sc.gain, sc.theta, sc.baseline_codes, sc.alpha, sc.x, sc.sigma2, rng)?;
        let yb = y.slice(s![opts.beacon, .., ..]);
        let (active, mut xhat) = single_antenna_detect(kind, &yb, sc.baseline_codes, constellation, opts, sc.n_active)
            .map_err(|e| e.in_stage("single-antenna detection"))?;
        for ue in 0..k {
            if !active.contains(&ue) {
                xhat.row_mut(ue).fill(ZERO);
            }
        }
        let (_, bits_hat) = hard_decision(&xhat.select(ndarray::Axis(0), &active).view(), constellation);
        Ok(BaselineResult {
            active_set: active,
            xhat,
            bits_hat,
            h_est: None,
        })
    }
}
