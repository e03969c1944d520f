//! Joint activity and coarse data detection from the beacon antenna.
//!
//! With the beacon channel pre-equalized away, the beacon antenna sees
//! `Y_η = S X + W`, where every column of `X` shares the sparsity pattern
//! of the active set. The detector runs AMP with a discrete spike-and-slab
//! prior (zero with probability `1 − γ`, otherwise uniform over the
//! constellation), learns the per-slot noise variance with EM, and shares
//! activity beliefs across slots (NNSPL): `γ_{k,t} = mean_t π_{k,t}`.
//!
//! The factor-node mean uses the standard Onsager form
//! `Z = S x̂ − V ∘ (Y − Z_prev) ⊘ (σ² + V_prev)`.

use std::io::Write;

use ndarray::{Array2, Array3, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::linalg::{herm, C64, ZERO};
use crate::sysmodel::Constellation;

pub const VAR_FLOOR: f64 = 1e-12;
pub const NOISE_FLOOR: f64 = 1e-15;
const GAMMA_MIN: f64 = 1e-12;

/// Tuning of one coarse detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseOptions {
    pub rho_damp: f64,
    pub max_iter: usize,
    /// Early exit when `max |x̂ⁱ − x̂ⁱ⁻¹|` drops below this.
    pub tol: f64,
    /// Initial sparsity ratio; `Ka/K` when the active count is configured.
    pub sparsity_init: f64,
    /// Record one [`IterTrace`] row per iteration.
    pub trace: bool,
}

impl Default for CoarseOptions {
    fn default() -> Self {
        Self {
            rho_damp: 0.3,
            max_iter: 50,
            tol: 1e-6,
            sparsity_init: 0.1,
            trace: false,
        }
    }
}

/// Message-passing state of one AMP run.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    /// Factor-node variances, (M, T).
    pub v_fac: Array2<f64>,
    /// Factor-node means, (M, T).
    pub z: Array2<C64>,
    /// Variable-node means, (K, T).
    pub c: Array2<C64>,
    /// Variable-node variances, (K, T).
    pub d: Array2<f64>,
    /// Posterior means, (K, T).
    pub xhat: Array2<C64>,
    /// Posterior variances, (K, T).
    pub v: Array2<f64>,
    /// Belief indicators, (K, T).
    pub pi: Array2<f64>,
    /// Normalized posterior symbol weights, (K, T, L).
    pub xi: Array3<f64>,
    /// Sparsity ratios, (K, T).
    pub gamma: Array2<f64>,
    /// Learned noise variance per slot.
    pub sigma2: Vec<f64>,
    pub iter: usize,
}

impl AmpState {
    /// Initialization: `V = 1`, `Z = Y`, `x̂ = 0`, `v = 1`,
    /// `γ = sparsity_init`, `σ²_t = ‖y_t‖² / (101·M)`.
    pub fn init(y: &ArrayView2<C64>, k: usize, order: usize, sparsity_init: f64) -> Self {
        let (m, t) = y.dim();
        let sigma2 = y
            .axis_iter(Axis(1))
            .map(|col| (col.iter().map(|z| z.norm_sqr()).sum::<f64>() / (101.0 * m as f64)).max(NOISE_FLOOR))
            .collect();
        Self {
            v_fac: Array2::ones((m, t)),
            z: y.to_owned(),
            c: Array2::from_elem((k, t), ZERO),
            d: Array2::ones((k, t)),
            xhat: Array2::from_elem((k, t), ZERO),
            v: Array2::ones((k, t)),
            pi: Array2::zeros((k, t)),
            xi: Array3::zeros((k, t, order)),
            gamma: Array2::from_elem((k, t), sparsity_init.clamp(0.0, 1.0)),
            sigma2,
            iter: 0,
        }
    }

    fn is_finite(&self) -> bool {
        self.v_fac.iter().all(|x| x.is_finite())
            && self.z.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.xhat.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.v.iter().all(|x| x.is_finite())
            && self.d.iter().all(|x| x.is_finite())
            && self.sigma2.iter().all(|x| x.is_finite())
    }
}

/// Output of coarse detection.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseResult {
    /// Posterior means, (K, T).
    pub xhat: Array2<C64>,
    /// Final beliefs, (K, T).
    pub pi: Array2<f64>,
    /// Detected-active UEs, increasing.
    pub active_set: Vec<usize>,
    /// Learned noise variance per slot.
    pub sigma2: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<IterTrace>,
}

impl CoarseResult {
    pub fn ka_hat(&self) -> usize {
        self.active_set.len()
    }

    /// Mean of the learned per-slot noise variances.
    pub fn mean_sigma2(&self) -> f64 {
        self.sigma2.iter().sum::<f64>() / self.sigma2.len().max(1) as f64
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterTrace {
    pub iter: usize,
    pub mean_belief: f64,
    pub mean_sigma2: f64,
    pub residual_norm: f64,
}

pub fn write_trace_csv<W: Write>(mut w: W, rows: &[IterTrace]) -> std::io::Result<()> {
    writeln!(w, "iter,mean_belief,sigma2,residual_norm")?;
    for r in rows {
        writeln!(w, "{},{:.9e},{:.9e},{:.9e}", r.iter, r.mean_belief, r.mean_sigma2, r.residual_norm)?;
    }
    Ok(())
}

fn abs2(s: &ArrayView2<C64>) -> Array2<f64> {
    s.mapv(|z| z.norm_sqr())
}

/// Factor-node update, undamped: returns `(V, Z)` from the current
/// posterior moments, noise estimate and previous factor state.
pub fn amp_factor_update(state: &AmpState, y: &ArrayView2<C64>, s: &ArrayView2<C64>) -> (Array2<f64>, Array2<C64>) {
    let v_new = abs2(s).dot(&state.v);
    let mut z_new = s.dot(&state.xhat);
    for ((m, t), z) in z_new.indexed_iter_mut() {
        let denom = state.sigma2[t] + state.v_fac[[m, t]];
        *z -= (y[[m, t]] - state.z[[m, t]]) * (v_new[[m, t]] / denom);
    }
    (v_new, z_new)
}

/// Variable-node update: returns `(C, D)`.
pub fn amp_variable_update(state: &AmpState, y: &ArrayView2<C64>, s: &ArrayView2<C64>) -> (Array2<C64>, Array2<f64>) {
    let (m, t) = y.dim();
    let mut inv = Array2::zeros((m, t));
    let mut resid = Array2::from_elem((m, t), ZERO);
    for mi in 0..m {
        for ti in 0..t {
            let w = 1.0 / (state.sigma2[ti] + state.v_fac[[mi, ti]]);
            inv[[mi, ti]] = w;
            resid[[mi, ti]] = (y[[mi, ti]] - state.z[[mi, ti]]) * w;
        }
    }
    let d = abs2(s).t().dot(&inv).mapv(|x| (1.0 / x).max(VAR_FLOOR));
    let corr = herm(s).dot(&resid);
    let mut c = state.xhat.clone();
    Zip::from(&mut c).and(&d).and(&corr).for_each(|c, &d, &g| *c += g * d);
    (c, d)
}

/// Posterior of the spike-and-slab prior given the Gaussian message
/// `CN(C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub pi: Array2<f64>,
    pub xi: Array3<f64>,
    pub xhat: Array2<C64>,
    pub v: Array2<f64>,
}

/// Scalar posterior: returns `(π, x̂, v)` and writes the normalized symbol
/// weights into `weights`.
pub fn scalar_posterior(c: C64, d: f64, gamma: f64, points: &[C64], weights: &mut [f64]) -> (f64, C64, f64) {
    let l = points.len();
    let mut max_log = f64::NEG_INFINITY;
    for (w, a) in weights.iter_mut().zip(points) {
        *w = (2.0 * (a.conj() * c).re - a.norm_sqr()) / d;
        max_log = max_log.max(*w);
    }
    let mut sum = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max_log).exp();
        sum += *w;
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    let pi = if gamma <= 0.0 {
        0.0
    } else if gamma >= 1.0 {
        1.0
    } else {
        // log(slab / spike), slab = (γ/L)·Σξ, spike = 1 − γ
        let log_ratio = (gamma / l as f64).ln() + max_log + sum.ln() - (1.0 - gamma).ln();
        if log_ratio >= 0.0 {
            1.0 / (1.0 + (-log_ratio).exp())
        } else {
            let e = log_ratio.exp();
            e / (1.0 + e)
        }
    };
    let mut mean = ZERO;
    let mut second = 0.0;
    for (w, a) in weights.iter().zip(points) {
        mean += a * *w;
        second += a.norm_sqr() * w;
    }
    let xhat = mean * pi;
    let v = (pi * second - xhat.norm_sqr()).max(0.0);
    (pi, xhat, v)
}

/// Posterior step over all `(k, t)`.
pub fn posterior_step(c: &Array2<C64>, d: &Array2<f64>, gamma: &Array2<f64>, constellation: &Constellation) -> Posterior {
    let (k, t) = c.dim();
    let l = constellation.order();
    let mut pi = Array2::zeros((k, t));
    let mut xi = Array3::zeros((k, t, l));
    let mut xhat = Array2::from_elem((k, t), ZERO);
    let mut v = Array2::zeros((k, t));
    let mut w = vec![0.0; l];
    for ki in 0..k {
        for ti in 0..t {
            let (p, x, var) = scalar_posterior(c[[ki, ti]], d[[ki, ti]], gamma[[ki, ti]], constellation.points(), &mut w);
            pi[[ki, ti]] = p;
            xhat[[ki, ti]] = x;
            v[[ki, ti]] = var;
            for li in 0..l {
                xi[[ki, ti, li]] = w[li];
            }
        }
    }
    Posterior { pi, xi, xhat, v }
}

/// EM step: per-slot noise variance and NNSPL sparsity ratios.
pub fn em_update(state: &AmpState, y: &ArrayView2<C64>) -> (Array2<f64>, Vec<f64>) {
    let (m, t) = y.dim();
    let sigma2 = (0..t)
        .map(|ti| {
            let prev = state.sigma2[ti];
            let acc: f64 = (0..m)
                .map(|mi| {
                    let vf = state.v_fac[[mi, ti]];
                    let r = (y[[mi, ti]] - state.z[[mi, ti]]).norm_sqr();
                    r / (1.0 + vf / prev).powi(2) + prev * vf / (prev + vf)
                })
                .sum();
            (acc / m as f64).max(NOISE_FLOOR)
        })
        .collect();
    let k = state.pi.nrows();
    let mean_pi = state.pi.mean_axis(Axis(1)).expect("T >= 1");
    let gamma = Array2::from_shape_fn((k, t), |(ki, _)| mean_pi[ki]);
    (gamma, sigma2)
}

/// UEs whose slot-averaged belief exceeds 0.5.
pub fn decide_activity(pi: &Array2<f64>) -> Vec<usize> {
    pi.mean_axis(Axis(1))
        .expect("T >= 1")
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > 0.5)
        .map(|(k, _)| k)
        .collect()
}

/// Runs coarse detection on the beacon-antenna signal `y` (M × T) with
/// code matrix `s` (M × K).
pub fn coarse_detect(
    y: &ArrayView2<C64>,
    s: &ArrayView2<C64>,
    constellation: &Constellation,
    opts: &CoarseOptions,
) -> Result<CoarseResult> {
    let (m, t) = y.dim();
    if s.nrows() != m {
        return Err(Error::ShapeMismatch(format!("coarse_detect: Y has {m} rows, S has {}", s.nrows())));
    }
    if t == 0 || opts.max_iter == 0 {
        return Err(Error::InvalidConfig("coarse_detect needs T >= 1 and N_coarse >= 1".into()));
    }
    let k = s.ncols();
    let rho = opts.rho_damp;
    let mut st = AmpState::init(y, k, constellation.order(), opts.sparsity_init);
    let mut trace = Vec::new();
    let mut iterations = 0;
    for i in 1..=opts.max_iter {
        let (v_new, z_new) = amp_factor_update(&st, y, s);
        Zip::from(&mut st.v_fac)
            .and(&v_new)
            .for_each(|v, &vn| *v = (rho * *v + (1.0 - rho) * vn).max(VAR_FLOOR));
        Zip::from(&mut st.z).and(&z_new).for_each(|z, &zn| *z = *z * rho + zn * (1.0 - rho));

        let (c, d) = amp_variable_update(&st, y, s);
        st.c = c;
        st.d = d;

        let post = posterior_step(&st.c, &st.d, &st.gamma, constellation);
        let delta = post
            .xhat
            .iter()
            .zip(st.xhat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        st.pi = post.pi;
        st.xi = post.xi;
        st.xhat = post.xhat;
        st.v = post.v;

        let (gamma, sigma2) = em_update(&st, y);
        st.gamma = gamma.mapv(|g| g.clamp(GAMMA_MIN, 1.0 - GAMMA_MIN));
        st.sigma2 = sigma2;
        st.iter = i;
        iterations = i;

        if !st.is_finite() {
            return Err(Error::NumericalDivergence {
                stage: "coarse detection",
                iteration: i,
            });
        }
        if opts.trace {
            let resid = (y - &s.dot(&st.xhat)).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            trace.push(IterTrace {
                iter: i,
                mean_belief: st.pi.mean().unwrap_or(0.0),
                mean_sigma2: st.sigma2.iter().sum::<f64>() / t as f64,
                residual_norm: resid,
            });
        }
        if delta < opts.tol {
            break;
        }
    }
    Ok(CoarseResult {
        active_set: decide_activity(&st.pi),
        xhat: st.xhat,
        pi: st.pi,
        sigma2: st.sigma2,
        iterations,
        trace,
    })
}
