//! Independent reference computations and the checks behind
//! `gfma oracle-check`.
//!
//! The references here share no code with the estimators they judge: the
//! posterior oracle enumerates every hypothesis, the least-squares oracle
//! solves the normal equations directly, and the Monte Carlo checks only
//! read the public outputs.

use std::fmt;

use ndarray::{s, Array1, Array2, Array3};
use rand::seq::index::sample;
use rand::Rng;

use crate::baselines::{pilot_jadce, pilot_matrices, pilot_observation, somp_recover, BaselineKind, SompStop};
use crate::ce_gmmv::{build_ce_problem, dft_matrix, from_angular, gmmv_amp, to_angular, GmmvOptions};
use crate::channel::{draw_paths, small_scale_channel, steering_vector};
use crate::coarse_dd::{coarse_detect, CoarseOptions};
use crate::detector::{iterative_detect, lmmse_detect, DetectOptions};
use crate::harness::metrics::{ber, Reference};
use crate::linalg::{cn, herm, C64, ZERO};
use crate::rng::seeded;
use crate::sysmodel::{generate_spreading_codes, make_constellation, CodeKind, Constellation, SystemConfig};
use crate::uplink::{draw_frame, pre_equalize_all, synthesize_uplink};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Noise variance for an SNR in dB with unit-power signal entries.
pub fn snr_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Exact per-entry MMSE posterior means of `y = S x + w` for one column,
/// under an i.i.d. prior `(1 − γ) δ₀ + γ/L Σ δ(a_l)` and `w ~ CN(0, σ²I)`,
/// by enumeration of all `(L + 1)^K` hypotheses.
pub fn brute_force_posterior_mean(y: &[C64], s: &Array2<C64>, points: &[C64], gamma: f64, sigma2: f64) -> Vec<C64> {
    let (m, k) = s.dim();
    let l = points.len();
    let alphabet: Vec<(C64, f64)> = std::iter::once((ZERO, (1.0 - gamma).ln()))
        .chain(points.iter().map(|&a| (a, (gamma / l as f64).ln())))
        .collect();
    let total = (l + 1).pow(k as u32);
    let mut logw = Vec::with_capacity(total);
    let mut hyps = Vec::with_capacity(total);
    let mut digits = vec![0usize; k];
    for _ in 0..total {
        let x: Vec<C64> = digits.iter().map(|&d| alphabet[d].0).collect();
        let prior: f64 = digits.iter().map(|&d| alphabet[d].1).sum();
        let mut dist = 0.0;
        for row in 0..m {
            let mut r = y[row];
            for col in 0..k {
                r -= s[[row, col]] * x[col];
            }
            dist += r.norm_sqr();
        }
        logw.push(prior - dist / sigma2);
        hyps.push(x);
        for d in digits.iter_mut() {
            *d += 1;
            if *d <= l {
                break;
            }
            *d = 0;
        }
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = w.iter().sum();
    (0..k)
        .map(|col| hyps.iter().zip(&w).map(|(x, wi)| x[col] * *wi).sum::<C64>() / z)
        .collect()
}

/// Direct normal-equation solve `(AᴴA)⁻¹AᴴB` by Gauss-Jordan elimination.
pub fn least_squares_oracle(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let ah = herm(&a.view());
    let mut g = ah.dot(a);
    let mut r = ah.dot(b);
    let n = g.nrows();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| g[[i, col]].norm().total_cmp(&g[[j, col]].norm())).unwrap();
        if piv != col {
            for c in 0..n {
                g.swap([col, c], [piv, c]);
            }
            for c in 0..r.ncols() {
                r.swap([col, c], [piv, c]);
            }
        }
        let d = g[[col, col]];
        for c in 0..n {
            g[[col, c]] /= d;
        }
        for c in 0..r.ncols() {
            r[[col, c]] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = g[[row, col]];
                if f != ZERO {
                    for c in 0..n {
                        let v = g[[col, c]];
                        g[[row, c]] -= f * v;
                    }
                    for c in 0..r.ncols() {
                        let v = r[[col, c]];
                        r[[row, c]] -= f * v;
                    }
                }
            }
        }
    }
    r
}

fn max_abs_diff<'a>(a: impl IntoIterator<Item = &'a C64>, b: impl IntoIterator<Item = &'a C64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Random matrix with orthonormal columns, via Gram-Schmidt.
pub fn orthonormal_columns<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<C64> {
    let mut q = Array2::from_shape_fn((rows, cols), |_| cn(rng, 1.0));
    for j in 0..cols {
        for i in 0..j {
            let proj: C64 = (0..rows).map(|r| q[[r, i]].conj() * q[[r, j]]).sum();
            for r in 0..rows {
                let v = q[[r, i]];
                q[[r, j]] -= proj * v;
            }
        }
        let norm = (0..rows).map(|r| q[[r, j]].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..rows {
            q[[r, j]] /= norm;
        }
    }
    q
}

/// Mean squared deviation between coarse AMP posterior means and the
/// enumerated MMSE posterior, averaged over `instances` problems at
/// M = 8, K = 4, T = 2, QPSK, 2 active UEs, `snr_db`.
pub fn amp_vs_enumeration(seed: u64, instances: usize, snr_db: f64) -> f64 {
    let (m, k, t, ka) = (8, 4, 2, 2);
    let q = make_constellation(4).expect("QPSK");
    let sigma2 = snr_to_sigma2(snr_db);
    let gamma = ka as f64 / k as f64;
    let mut rng = seeded(seed);
    let mut total = 0.0;
    for _ in 0..instances {
        let s = generate_spreading_codes(&mut rng, CodeKind::ComplexGaussian, m, k).matrix;
        let mut x = Array2::from_elem((k, t), ZERO);
        for ue in sample(&mut rng, k, ka).into_iter() {
            for ti in 0..t {
                x[[ue, ti]] = q.point(rng.random_range(0..q.order()));
            }
        }
        let y = s.dot(&x) + Array2::from_shape_fn((m, t), |_| cn(&mut rng, sigma2));
        let opts = CoarseOptions {
            sparsity_init: gamma,
            max_iter: 200,
            ..CoarseOptions::default()
        };
        let amp = coarse_detect(&y.view(), &s.view(), &q, &opts).expect("coarse detection");
        let mut dev = 0.0;
        for ti in 0..t {
            let col: Vec<C64> = y.column(ti).to_vec();
            let oracle = brute_force_posterior_mean(&col, &s, q.points(), gamma, sigma2);
            for (ki, o) in oracle.iter().enumerate() {
                dev += (amp.xhat[[ki, ti]] - o).norm_sqr();
            }
        }
        total += dev / (k * t) as f64;
    }
    total / instances as f64
}

/// Worst LMMSE recovery error over `systems` noiseless consistent systems
/// with orthonormal-column operators and a vanishing ridge.
pub fn lmmse_exactness(seed: u64, systems: usize) -> f64 {
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..systems {
        let rows = rng.random_range(8..64);
        let cols = rng.random_range(1..=rows.min(12));
        let t = rng.random_range(1..6);
        let phi = orthonormal_columns(&mut rng, rows, cols);
        let x = Array2::from_shape_fn((cols, t), |_| cn(&mut rng, 1.0));
        let y = phi.dot(&x);
        let est = lmmse_detect(&phi.view(), &y.view(), 1e-12).expect("well-posed system");
        worst = worst.max(max_abs_diff(est.iter(), x.iter()));
    }
    worst
}

/// Worst DFT unitarity defect and worst angular round-trip error over the
/// given sizes.
pub fn angular_invariants(seed: u64, sizes: &[usize]) -> (f64, f64) {
    let mut rng = seeded(seed);
    let (mut unit, mut trip): (f64, f64) = (0.0, 0.0);
    for &n in sizes {
        let u = dft_matrix(n);
        let g = herm(&u.view()).dot(&u);
        let eye = Array2::from_shape_fn((n, n), |(a, b)| if a == b { C64::new(1.0, 0.0) } else { ZERO });
        unit = unit.max(max_abs_diff(g.iter(), eye.iter()));
        let x = Array2::from_shape_fn((7, n), |_| cn(&mut rng, 1.0));
        let back = from_angular(&to_angular(&x.view(), &u).view(), &u);
        trip = trip.max(max_abs_diff(back.iter(), x.iter()));
    }
    (unit, trip)
}

/// Empirical `E|H(n, m, k)|²` over `ues` independent UE realizations.
pub fn channel_power(seed: u64, ues: usize, config: &SystemConfig) -> f64 {
    let mut rng = seeded(seed);
    let mut acc = 0.0;
    for _ in 0..ues {
        let center = rng.random_range(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2);
        let paths = draw_paths(&mut rng, config, center);
        let h = small_scale_channel(&paths, config.n_antennas, config.n_subcarriers, config.bandwidth_hz);
        acc += h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len() as f64;
    }
    acc / ues as f64
}

/// Fraction of noiseless row-sparse MMV instances whose support SOMP with
/// genie sparsity recovers exactly.
pub fn somp_support_rate(seed: u64, instances: usize, m: usize, k: usize, ka: usize, vectors: usize) -> f64 {
    let mut rng = seeded(seed);
    let mut hits = 0;
    for _ in 0..instances {
        let phi = Array2::from_shape_fn((m, k), |_| cn(&mut rng, 1.0 / m as f64));
        let mut support: Vec<usize> = sample(&mut rng, k, ka).into_vec();
        support.sort_unstable();
        let mut x = Array2::from_elem((k, vectors), ZERO);
        for &r in &support {
            for c in 0..vectors {
                x[[r, c]] = cn(&mut rng, 1.0);
            }
        }
        let y = phi.dot(&x);
        let res = somp_recover(&y.view(), &phi.view(), SompStop::MaxSparsity(ka)).expect("somp");
        let mut found = res.support.clone();
        found.sort_unstable();
        hits += usize::from(found == support);
    }
    hits as f64 / instances as f64
}

/// Mean NMSE of GMMV-AMP and of plain least squares on `trials` small CE
/// problems (one subcarrier, 2 UEs, T = 6, N = 4, one path per UE).
pub fn gmmv_vs_least_squares(seed: u64, trials: usize, snr_db: f64) -> (f64, f64) {
    let (n, t, ka) = (4, 6, 2);
    let sigma2 = snr_to_sigma2(snr_db);
    let mut rng = seeded(seed);
    let u = dft_matrix(n);
    let (mut e_amp, mut e_ls) = (0.0, 0.0);
    let opts = GmmvOptions {
        allow_overdetermined: true,
        max_iter: 100,
        ..GmmvOptions::default()
    };
    for _ in 0..trials {
        let h = Array3::from_shape_fn((n, 1, ka), |_| ZERO);
        let mut h = h;
        for kappa in 0..ka {
            let bin = rng.random_range(0..n) as f64;
            let phi = ((2.0 * bin / n as f64 + 1.0).rem_euclid(2.0) - 1.0).asin();
            let g = cn(&mut rng, 1.0);
            let a: Array1<C64> = steering_vector(phi, n);
            for ant in 0..n {
                h[[ant, 0, kappa]] = g * a[ant];
            }
        }
        let s = Array2::from_shape_fn((1, ka), |_| cn(&mut rng, 1.0));
        let x = Array2::from_shape_fn((ka, t), |_| cn(&mut rng, 1.0));
        let y = Array3::from_shape_fn((n, 1, t), |(ant, _, ti)| {
            (0..ka).map(|kappa| h[[ant, 0, kappa]] * s[[0, kappa]] * x[[kappa, ti]]).sum::<C64>() + cn(&mut rng, sigma2)
        });
        let active: Vec<usize> = (0..ka).collect();
        let problem = build_ce_problem(&y, &s, &x, &active).expect("problem");
        let amp = gmmv_amp(&problem, &opts).expect("gmmv");
        let a_ls = least_squares_oracle(&problem.phi[0], &problem.r[0]);
        let h_ls = from_angular(&a_ls.view(), &u);
        let energy: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        let mut err_amp = 0.0;
        let mut err_ls = 0.0;
        for ant in 0..n {
            for kappa in 0..ka {
                err_amp += (amp.h_equ[[ant, 0, kappa]] - h[[ant, 0, kappa]]).norm_sqr();
                err_ls += (h_ls[[kappa, ant]] - h[[ant, 0, kappa]]).norm_sqr();
            }
        }
        e_amp += err_amp / energy;
        e_ls += err_ls / energy;
    }
    (e_amp / trials as f64, e_ls / trials as f64)
}

/// Fraction of coarse-detection runs whose learned noise variance lies
/// within a factor of 2 of the injected value in every slot. Runs at the
/// desk profile with `noise_variance` forced to `snr_to_sigma2(snr_db)` and
/// nulling disabled.
pub fn em_noise_learning_rate(seed: u64, runs: usize, snr_db: f64) -> f64 {
    let mut cfg = SystemConfig::desk();
    cfg.noise_variance = Some(snr_to_sigma2(snr_db));
    cfg.h0 = 1e-300;
    let truth = snr_to_sigma2(snr_db);
    let q = make_constellation(cfg.mod_order).expect("constellation");
    let mut rng = seeded(seed);
    let s = generate_spreading_codes(&mut rng, cfg.code_kind, cfg.n_subcarriers, cfg.n_users).matrix;
    let opts = DetectOptions::from_config(&cfg);
    let mut good = 0;
    for _ in 0..runs {
        let yb = beacon_frame(&mut rng, &cfg, &q, &s).0;
        let r = coarse_detect(&yb.view(), &s.view(), &q, &opts.coarse).expect("coarse detection");
        good += usize::from(r.sigma2.iter().all(|&v| v >= truth / 2.0 && v <= truth * 2.0));
    }
    good as f64 / runs as f64
}

fn beacon_frame<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    q: &Constellation,
    s: &Array2<C64>,
) -> (Array2<C64>, Vec<usize>) {
    let channel = crate::channel::generate_channel(rng, cfg);
    let pre = pre_equalize_all(&channel, cfg.beacon(), cfg.h0);
    let sym = draw_frame(rng, cfg, q);
    let sigma2 = crate::uplink::effective_noise_variance(cfg);
    let y = synthesize_uplink(&channel.h, &channel.gain, &pre.theta, s, &sym.alpha, &sym.x, sigma2, rng).expect("shapes");
    (y.slice(s![cfg.beacon(), .., ..]).to_owned(), sym.active_set)
}

/// Whether pilot-based JADCE detects the active set exactly with T ≥ K and
/// noiseless pilots, over `trials` draws at K = 16, T = 20.
pub fn pilot_overdetermined_exact(seed: u64, trials: usize) -> usize {
    let (n, m, k, t, ka) = (8, 4, 16, 20, 4);
    let mut rng = seeded(seed);
    let mut exact = 0;
    for _ in 0..trials {
        let h = Array3::from_shape_fn((n, m, k), |_| cn(&mut rng, 1.0));
        let mut alpha = vec![false; k];
        for i in sample(&mut rng, k, ka).into_iter() {
            alpha[i] = true;
        }
        let pilots = pilot_matrices(&mut rng, m, t, k);
        let y = pilot_observation(&h, &alpha, &pilots, 0.0, &mut rng).expect("shapes");
        let (active, _) = pilot_jadce(BaselineKind::PilotGmmvAmp, &y, &pilots, ka, 0.1, &GmmvOptions::default(), 1e-12)
            .expect("jadce");
        let truth: Vec<usize> = (0..k).filter(|&i| alpha[i]).collect();
        exact += usize::from(active == truth);
    }
    exact
}

/// Noiseless end-to-end runs without nulling: returns, over `frames`, how
/// many had perfect coarse activity detection and how many of those reached
/// zero BER after one outer iteration.
pub fn noiseless_refinement(seed: u64, frames: usize) -> (usize, usize) {
    let mut cfg = SystemConfig::desk();
    cfg.n_antennas = 8;
    cfg.n_subcarriers = 32;
    cfg.n_users = 20;
    cfg.n_active = 4;
    cfg.n_slots = 8;
    cfg.n_iter = 1;
    cfg.h0 = 1e-300;
    cfg.noise_variance = Some(0.0);
    let q = make_constellation(cfg.mod_order).expect("constellation");
    let mut rng = seeded(seed);
    let s = generate_spreading_codes(&mut rng, cfg.code_kind, cfg.n_subcarriers, cfg.n_users).matrix;
    let opts = DetectOptions::from_config(&cfg);
    let (mut perfect_ad, mut zero_ber) = (0, 0);
    for _ in 0..frames {
        let channel = crate::channel::generate_channel(&mut rng, &cfg);
        let pre = pre_equalize_all(&channel, cfg.beacon(), cfg.h0);
        let sym = draw_frame(&mut rng, &cfg, &q);
        let y = synthesize_uplink(&channel.h, &channel.gain, &pre.theta, &s, &sym.alpha, &sym.x, 0.0, &mut rng).expect("shapes");
        let reference = Reference {
            active_set: &sym.active_set,
            bits: &sym.bits,
            h: &channel.h,
            theta: &pre.theta,
            n_users: cfg.n_users,
        };
        let det = iterative_detect(&y, &s, &q, &opts, Some(&reference)).expect("detection");
        if det.active_set == sym.active_set {
            perfect_ad += 1;
            zero_ber += usize::from(ber(&reference, &det.active_set, &det.bits_hat) == 0.0);
        }
    }
    (perfect_ad, zero_ber)
}

/// Runs every check at its documented tolerance.
pub fn run_all(seed: u64) -> Vec<OracleReport> {
    let mut out = Vec::new();
    let msd = amp_vs_enumeration(seed, 50, 15.0);
    out.push(OracleReport {
        name: "coarse AMP vs enumerated posterior",
        passed: msd < 1e-2,
        detail: format!("mean squared deviation {msd:.3e} (< 1e-2)"),
    });
    let e = lmmse_exactness(seed, 100);
    out.push(OracleReport {
        name: "LMMSE exactness",
        passed: e < 1e-6,
        detail: format!("max abs error {e:.3e} (< 1e-6)"),
    });
    let (unit, trip) = angular_invariants(seed, &[1, 2, 4, 32, 128]);
    out.push(OracleReport {
        name: "angular transform",
        passed: unit < 1e-10 && trip < 1e-9,
        detail: format!("unitarity {unit:.2e} (< 1e-10), round trip {trip:.2e} (< 1e-9)"),
    });
    let p = channel_power(seed, 1000, &SystemConfig::paper());
    out.push(OracleReport {
        name: "channel normalization",
        passed: (p - 1.0).abs() < 0.1,
        detail: format!("E|H|^2 = {p:.4} (within 10% of 1)"),
    });
    let rate = somp_support_rate(seed, 100, 64, 128, 8, 1);
    out.push(OracleReport {
        name: "SOMP support recovery",
        passed: rate >= 0.95,
        detail: format!("exact on {:.0}% of instances (>= 95%)", rate * 100.0),
    });
    let (amp, ls) = gmmv_vs_least_squares(seed, 100, 10.0);
    out.push(OracleReport {
        name: "GMMV-AMP vs least squares",
        passed: amp < ls,
        detail: format!("NMSE {:.2} dB vs {:.2} dB", 10.0 * amp.log10(), 10.0 * ls.log10()),
    });
    let rate = em_noise_learning_rate(seed, 100, 10.0);
    out.push(OracleReport {
        name: "EM noise learning",
        passed: rate >= 0.8,
        detail: format!("within 2x on {:.0}% of runs (>= 80%)", rate * 100.0),
    });
    let exact = pilot_overdetermined_exact(seed, 20);
    out.push(OracleReport {
        name: "pilot JADCE, overdetermined",
        passed: exact == 20,
        detail: format!("{exact}/20 exact activity"),
    });
    let (ad, zero) = noiseless_refinement(seed, 20);
    out.push(OracleReport {
        name: "noiseless refinement",
        passed: ad > 0 && zero == ad,
        detail: format!("{zero}/{ad} perfectly detected frames at zero BER"),
    });
    out
}
