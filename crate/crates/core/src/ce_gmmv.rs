//! Data-aided channel estimation in the virtual angular domain.
//!
//! The coarse symbol estimates of the detected UEs act as pilots. On
//! subcarrier `m`, with the detected set `κ = 0..K̂a`:
//!
//! ```text
//! Y[:, m, :]ᵀ = Φ_m H_equ[:, m, :]ᵀ + W,     Φ_m[t, κ] = S[m, k_κ] · X̂[k_κ, t]
//! R_m = Y[:, m, :]ᵀ U*  = Φ_m A_m + W'       A_m = H_equ[:, m, :]ᵀ U*
//! ```
//!
//! `H_equ[n, m, κ] = H[n, m, k_κ] · θ[m, k_κ]` is the channel as seen
//! through the UE's own pre-equalization. Far-field multipath makes each
//! row of `A_m` sparse, with a support that is common to all subcarriers.
//! [`gmmv_amp`] recovers the `A_m` jointly with a Bernoulli-Gaussian AMP
//! that shares activity beliefs across subcarriers; [`ls_fallback`] is a
//! per-subcarrier ridge estimate for the overdetermined regime.

use ndarray::{s, Array2, Array3, ArrayView2, Zip};

use crate::coarse_dd::{IterTrace, NOISE_FLOOR, VAR_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::{herm, ridge_solve, C64, ZERO};

const LAMBDA_MIN: f64 = 1e-8;

/// Unitary DFT matrix, `U[a, b] = exp(-j2πab/N)/√N`.
pub fn dft_matrix(n: usize) -> Array2<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    Array2::from_shape_fn((n, n), |(a, b)| {
        let phase = -std::f64::consts::TAU * ((a * b) % n) as f64 / n as f64;
        C64::from_polar(scale, phase)
    })
}

/// `X U*`: rows of spatial samples to angular bins.
pub fn to_angular(x: &ArrayView2<C64>, u: &Array2<C64>) -> Array2<C64> {
    x.dot(&u.mapv(|z| z.conj()))
}

/// `A Uᵀ`: inverse of [`to_angular`].
pub fn from_angular(a: &ArrayView2<C64>, u: &Array2<C64>) -> Array2<C64> {
    a.dot(&u.t())
}

/// The stacked per-subcarrier sensing problems.
#[derive(Debug, Clone, PartialEq)]
pub struct CeProblem {
    /// One `T × K̂a` sensing matrix per subcarrier.
    pub phi: Vec<Array2<C64>>,
    /// One `T × N` angular-domain observation per subcarrier.
    pub r: Vec<Array2<C64>>,
    pub u_bs: Array2<C64>,
}

impl CeProblem {
    pub fn subcarriers(&self) -> usize {
        self.phi.len()
    }

    pub fn slots(&self) -> usize {
        self.phi.first().map_or(0, |p| p.nrows())
    }

    pub fn users(&self) -> usize {
        self.phi.first().map_or(0, |p| p.ncols())
    }

    pub fn antennas(&self) -> usize {
        self.u_bs.nrows()
    }
}

/// How the channel estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CePath {
    GmmvAmp,
    RidgeLs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeResult {
    /// Equivalent CSI estimate, shape (N, M, K̂a).
    pub h_equ: Array3<C64>,
    /// Angular-domain estimates, one `K̂a × N` matrix per subcarrier.
    pub a_hat: Vec<Array2<C64>>,
    pub sigma2: f64,
    pub path: CePath,
    pub iterations: usize,
    pub trace: Vec<IterTrace>,
}

/// Assembles the sensing matrices and angular observations from the
/// received tensor `y` (N × M × T), codes `s` (M × K), symbol estimates
/// `xhat` (K × T) and the ordered detected set.
pub fn build_ce_problem(
    y: &Array3<C64>,
    s: &Array2<C64>,
    xhat: &Array2<C64>,
    active_set: &[usize],
) -> Result<CeProblem> {
    if active_set.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let (n, m, t) = y.dim();
    if s.nrows() != m || xhat.nrows() != s.ncols() || xhat.ncols() != t {
        return Err(Error::ShapeMismatch(format!(
            "build_ce_problem: Y {:?}, S {:?}, X̂ {:?}",
            y.dim(),
            s.dim(),
            xhat.dim()
        )));
    }
    if let Some(&bad) = active_set.iter().find(|&&k| k >= s.ncols()) {
        return Err(Error::ShapeMismatch(format!("active index {bad} out of range")));
    }
    let u = dft_matrix(n);
    let mut phi = Vec::with_capacity(m);
    let mut r = Vec::with_capacity(m);
    for sc in 0..m {
        phi.push(Array2::from_shape_fn((t, active_set.len()), |(ti, kappa)| {
            let k = active_set[kappa];
            s[[sc, k]] * xhat[[k, ti]]
        }));
        let y_m = y.slice(s![.., sc, ..]).reversed_axes();
        r.push(to_angular(&y_m, &u));
    }
    Ok(CeProblem { phi, r, u_bs: u })
}

fn spatial_from_angular(a_hat: &[Array2<C64>], u: &Array2<C64>) -> Array3<C64> {
    let m = a_hat.len();
    let (ka, n) = a_hat.first().map_or((0, u.nrows()), |a| a.dim());
    let mut h = Array3::from_elem((n, m, ka), ZERO);
    for (sc, a) in a_hat.iter().enumerate() {
        // (K̂a × N) → H_equ[:, sc, :] is its transpose
        let hs = from_angular(&a.view(), u);
        h.slice_mut(s![.., sc, ..]).assign(&hs.t());
    }
    h
}

/// Options of the GMMV-AMP solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmvOptions {
    pub max_iter: usize,
    pub rho_damp: f64,
    pub tol: f64,
    /// Run even when `T ≥ K̂a` instead of returning `Overdetermined`.
    pub allow_overdetermined: bool,
    pub trace: bool,
}

impl Default for GmmvOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            rho_damp: 0.3,
            tol: 1e-6,
            allow_overdetermined: false,
            trace: false,
        }
    }
}

/// Bernoulli-Gaussian denoiser for one entry: returns `(π, â, v, μ, ν)`
/// where `μ, ν` are the slab posterior mean and variance.
/// `prior_logit` is `ln(λ / (1 − λ))`.
fn bg_denoise(r: C64, sigma: f64, prior_logit: f64, psi: f64) -> (f64, C64, f64, C64, f64) {
    let tot = psi + sigma;
    let log_lr = (sigma / tot).ln() + r.norm_sqr() * psi / (sigma * tot);
    let logit = prior_logit + log_lr;
    let pi = if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    };
    let mu = r * (psi / tot);
    let nu = psi * sigma / tot;
    let mean = mu * pi;
    let var = (pi * (mu.norm_sqr() + nu) - mean.norm_sqr()).max(0.0);
    (pi, mean, var, mu, nu)
}

/// GMMV-AMP with a Bernoulli-Gaussian prior on every angular coefficient.
///
/// The sparsity `λ[κ, n]` and slab variance `ψ[κ, n]` are learned by EM
/// and shared by all subcarriers; the noise variance is a single scalar.
pub fn gmmv_amp(problem: &CeProblem, opts: &GmmvOptions) -> Result<CeResult> {
    let (mm, t, ka, n) = (problem.subcarriers(), problem.slots(), problem.users(), problem.antennas());
    if ka == 0 {
        return Err(Error::EmptyActiveSet);
    }
    if t == 0 || mm == 0 {
        return Err(Error::ShapeMismatch("gmmv_amp: empty problem".into()));
    }
    if t >= ka && !opts.allow_overdetermined {
        return Err(Error::Overdetermined { slots: t, users: ka });
    }
    let rho = opts.rho_damp;
    let energy: f64 = problem.r.iter().flat_map(|r| r.iter()).map(|z| z.norm_sqr()).sum();
    let cells = (t * n * mm) as f64;
    let mut sigma2 = (energy / (101.0 * cells)).max(NOISE_FLOOR);
    let phi_energy: f64 = problem.phi.iter().flat_map(|p| p.iter()).map(|z| z.norm_sqr()).sum();
    let lambda0 = 0.1;
    let psi0 = if phi_energy > 0.0 {
        ((energy - cells * sigma2) / (phi_energy * n as f64 * lambda0)).max(VAR_FLOOR)
    } else {
        1.0
    };
    let mut lambda = Array2::from_elem((ka, n), lambda0);
    let mut psi = Array2::from_elem((ka, n), psi0);

    let phi_abs2: Vec<Array2<f64>> = problem.phi.iter().map(|p| p.mapv(|z| z.norm_sqr())).collect();
    let phi_h: Vec<Array2<C64>> = problem.phi.iter().map(|p| herm(&p.view())).collect();

    let mut a_hat = vec![Array2::from_elem((ka, n), ZERO); mm];
    let mut v_hat = vec![Array2::from_elem((ka, n), psi0 * lambda0); mm];
    let mut v_fac = vec![Array2::from_elem((t, n), 1.0); mm];
    let mut z_fac: Vec<Array2<C64>> = problem.r.clone();

    let mut pi_m = vec![Array2::<f64>::zeros((ka, n)); mm];
    let mut mu_m = vec![Array2::from_elem((ka, n), ZERO); mm];
    let mut nu_m = vec![Array2::<f64>::zeros((ka, n)); mm];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        let prior_logit = lambda.mapv(|l| (l / (1.0 - l)).ln());
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut noise_acc = 0.0;
        for sc in 0..mm {
            let r = &problem.r[sc];
            let v_new = phi_abs2[sc].dot(&v_hat[sc]);
            let mut z_new = problem.phi[sc].dot(&a_hat[sc]);
            Zip::from(&mut z_new)
                .and(&v_new)
                .and(r)
                .and(&z_fac[sc])
                .and(&v_fac[sc])
                .for_each(|z, &vn, &rv, &zp, &vp| *z -= (rv - zp) * (vn / (sigma2 + vp)));
            Zip::from(&mut v_fac[sc])
                .and(&v_new)
                .for_each(|v, &vn| *v = (rho * *v + (1.0 - rho) * vn).max(VAR_FLOOR));
            Zip::from(&mut z_fac[sc]).and(&z_new).for_each(|z, &zn| *z = *z * rho + zn * (1.0 - rho));

            let inv = v_fac[sc].mapv(|v| 1.0 / (sigma2 + v));
            let mut resid = r - &z_fac[sc];
            Zip::from(&mut resid).and(&inv).for_each(|x, &w| *x *= w);
            let big_sigma = phi_abs2[sc].t().dot(&inv).mapv(|x| (1.0 / x).max(VAR_FLOOR));
            let corr = phi_h[sc].dot(&resid);

            for ki in 0..ka {
                for ni in 0..n {
                    let rhat = a_hat[sc][[ki, ni]] + corr[[ki, ni]] * big_sigma[[ki, ni]];
                    let (p, mean, var, mu, nu) = bg_denoise(rhat, big_sigma[[ki, ni]], prior_logit[[ki, ni]], psi[[ki, ni]]);
                    delta = delta.max((mean - a_hat[sc][[ki, ni]]).norm());
                    scale = scale.max(mean.norm());
                    a_hat[sc][[ki, ni]] = mean;
                    v_hat[sc][[ki, ni]] = var;
                    pi_m[sc][[ki, ni]] = p;
                    mu_m[sc][[ki, ni]] = mu;
                    nu_m[sc][[ki, ni]] = nu;
                }
            }
            for ((rv, zv), &vf) in r.iter().zip(z_fac[sc].iter()).zip(v_fac[sc].iter()) {
                noise_acc += (rv - zv).norm_sqr() / (1.0 + vf / sigma2).powi(2) + sigma2 * vf / (sigma2 + vf);
            }
        }

        // EM, with activity and slab variance shared across subcarriers
        for ki in 0..ka {
            for ni in 0..n {
                let mut sp = 0.0;
                let mut sv = 0.0;
                for sc in 0..mm {
                    let p = pi_m[sc][[ki, ni]];
                    sp += p;
                    sv += p * (mu_m[sc][[ki, ni]].norm_sqr() + nu_m[sc][[ki, ni]]);
                }
                lambda[[ki, ni]] = (sp / mm as f64).clamp(LAMBDA_MIN, 1.0 - LAMBDA_MIN);
                if sp > 1e-12 {
                    psi[[ki, ni]] = (sv / sp).max(VAR_FLOOR);
                }
            }
        }
        sigma2 = (noise_acc / cells).max(NOISE_FLOOR);
        iterations = it;

        let finite = sigma2.is_finite()
            && a_hat.iter().all(|a| a.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            && v_fac.iter().all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::NumericalDivergence {
                stage: "channel estimation",
                iteration: it,
            });
        }
        if opts.trace {
            let resid: f64 = (0..mm)
                .map(|sc| (&problem.r[sc] - &problem.phi[sc].dot(&a_hat[sc])).iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum();
            trace.push(IterTrace {
                iter: it,
                mean_belief: lambda.mean().unwrap_or(0.0),
                mean_sigma2: sigma2,
                residual_norm: resid.sqrt(),
            });
        }
        if delta <= opts.tol * scale.max(1e-300) {
            break;
        }
    }

    Ok(CeResult {
        h_equ: spatial_from_angular(&a_hat, &problem.u_bs),
        a_hat,
        sigma2,
        path: CePath::GmmvAmp,
        iterations,
        trace,
    })
}

/// Per-subcarrier ridge least squares, `Â_m = (ΦᴴΦ + σ²I)⁻¹ Φᴴ R_m`.
/// `sigma2` is both the regularizer and the reported noise variance.
pub fn ls_fallback(problem: &CeProblem, sigma2: f64) -> Result<CeResult> {
    if problem.users() == 0 {
        return Err(Error::EmptyActiveSet);
    }
    let a_hat = problem
        .phi
        .iter()
        .zip(&problem.r)
        .map(|(phi, r)| ridge_solve(&phi.view(), &r.view(), sigma2))
        .collect::<Result<Vec<_>>>()?;
    Ok(CeResult {
        h_equ: spatial_from_angular(&a_hat, &problem.u_bs),
        a_hat,
        sigma2: sigma2.max(NOISE_FLOOR),
        path: CePath::RidgeLs,
        iterations: 1,
        trace: Vec::new(),
    })
}

/// GMMV-AMP when the problem is underdetermined (`T < K̂a`), ridge least
/// squares otherwise.
pub fn estimate_equivalent_csi(problem: &CeProblem, opts: &GmmvOptions, coarse_sigma2: f64) -> Result<CeResult> {
    match gmmv_amp(problem, opts) {
        Err(Error::Overdetermined { .. }) => ls_fallback(problem, coarse_sigma2),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::steering_vector;
    use crate::linalg::{cn, ONE};
    use crate::rng::seeded;
    use ndarray::{Array1, Axis};
    use rand::Rng;

    fn max_abs(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn dft_examples() {
        assert_eq!(dft_matrix(1), ndarray::array![[ONE]]);
        let u = dft_matrix(2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = ndarray::array![[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]];
        assert!(max_abs(&u, &want) < 1e-15);
    }

    #[test]
    fn dft_is_unitary_up_to_256() {
        for n in [1, 2, 3, 7, 16, 100, 256] {
            let u = dft_matrix(n);
            let g = herm(&u.view()).dot(&u);
            assert!(max_abs(&g, &Array2::eye(n).mapv(|x: f64| C64::new(x, 0.0))) < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn angular_round_trip_and_energy() {
        let mut rng = seeded(1);
        let x = Array2::from_shape_fn((5, 32), |_| cn(&mut rng, 1.0));
        let u = dft_matrix(32);
        let a = to_angular(&x.view(), &u);
        let back = from_angular(&a.view(), &u);
        assert!(max_abs(&x, &back) < 1e-9);
        let ex: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let ea: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        assert!((ex - ea).abs() < 1e-9 * ex);
    }

    #[test]
    fn grid_aligned_steering_vector_hits_one_bin() {
        let n = 32;
        let b = 5;
        let phi = (2.0 * b as f64 / n as f64).asin();
        let a = steering_vector(phi, n).insert_axis(Axis(0));
        let ang = to_angular(&a.view(), &dft_matrix(n));
        let peak = ang[[0, b]].norm_sqr();
        let total: f64 = ang.iter().map(|z| z.norm_sqr()).sum();
        assert!(peak / total > 1.0 - 1e-12);
    }

    fn toy_tensor(n: usize, m: usize, t: usize, rng: &mut impl Rng) -> Array3<C64> {
        Array3::from_shape_fn((n, m, t), |_| cn(rng, 1.0))
    }

    #[test]
    fn build_problem_examples() {
        let mut rng = seeded(2);
        let (n, m, k, t) = (4, 3, 5, 6);
        let y = toy_tensor(n, m, t, &mut rng);
        let s = Array2::from_shape_fn((m, k), |_| cn(&mut rng, 1.0));
        let mut xhat = Array2::from_elem((k, t), ZERO);
        xhat.row_mut(2).fill(ONE);
        let p = build_ce_problem(&y, &s, &xhat, &[2]).unwrap();
        for sc in 0..m {
            assert!(p.phi[sc].iter().all(|&z| z == s[[sc, 2]]));
            let ym = y.slice(s![.., sc, ..]).reversed_axes().to_owned();
            let en: f64 = ym.iter().map(|z| z.norm_sqr()).sum();
            let er: f64 = p.r[sc].iter().map(|z| z.norm_sqr()).sum();
            assert!((en - er).abs() < 1e-9 * en.max(1.0));
        }
        let zero = Array3::from_elem((n, m, t), ZERO);
        let p = build_ce_problem(&zero, &s, &xhat, &[2]).unwrap();
        assert!(p.r.iter().all(|r| r.iter().all(|&z| z == ZERO)));
        assert_eq!(build_ce_problem(&y, &s, &xhat, &[]), Err(Error::EmptyActiveSet));
    }

    #[test]
    fn noiseless_model_is_self_consistent() {
        let mut rng = seeded(3);
        let (n, m, k, t) = (8, 4, 6, 5);
        let active = [1usize, 4];
        let s = Array2::from_shape_fn((m, k), |_| cn(&mut rng, 1.0));
        let x = Array2::from_shape_fn((k, t), |_| cn(&mut rng, 1.0));
        let h_equ = Array3::from_shape_fn((n, m, 2), |_| cn(&mut rng, 1.0));
        let mut y = Array3::from_elem((n, m, t), ZERO);
        for ant in 0..n {
            for sc in 0..m {
                for ti in 0..t {
                    for (kappa, &ue) in active.iter().enumerate() {
                        y[[ant, sc, ti]] += h_equ[[ant, sc, kappa]] * s[[sc, ue]] * x[[ue, ti]];
                    }
                }
            }
        }
        let p = build_ce_problem(&y, &s, &x, &active).unwrap();
        for sc in 0..m {
            let a = to_angular(&h_equ.slice(s![.., sc, ..]).reversed_axes(), &p.u_bs);
            assert!(max_abs(&p.phi[sc].dot(&a), &p.r[sc]) < 1e-9);
        }
        let est = ls_fallback(&p, 1e-14).unwrap();
        let err = est.h_equ.iter().zip(h_equ.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn ls_orthonormal_reduces_to_projection() {
        let mut rng = seeded(4);
        // orthonormal columns from a unitary DFT
        let u = dft_matrix(6);
        let phi = u.slice(s![.., ..3]).to_owned();
        let r = Array2::from_shape_fn((6, 4), |_| cn(&mut rng, 1.0));
        let p = CeProblem {
            phi: vec![phi.clone()],
            r: vec![r.clone()],
            u_bs: dft_matrix(4),
        };
        let est = ls_fallback(&p, 0.0).unwrap();
        assert!(max_abs(&est.a_hat[0], &herm(&phi.view()).dot(&r)) < 1e-12);
    }

    #[test]
    fn ls_square_noisy_is_finite() {
        let mut rng = seeded(5);
        let (t, ka, n) = (6, 6, 4);
        let phi = Array2::from_shape_fn((t, ka), |_| cn(&mut rng, 1.0));
        let a = Array2::from_shape_fn((ka, n), |_| cn(&mut rng, 1.0));
        let r = phi.dot(&a) + Array2::from_shape_fn((t, n), |_| cn(&mut rng, 0.01));
        let p = CeProblem {
            phi: vec![phi.clone()],
            r: vec![r.clone()],
            u_bs: dft_matrix(n),
        };
        let est = ls_fallback(&p, 0.01).unwrap();
        assert!(est.h_equ.iter().all(|z| z.re.is_finite()));
        let res: f64 = (&r - &phi.dot(&est.a_hat[0])).iter().map(|z| z.norm_sqr()).sum();
        let obs: f64 = r.iter().map(|z| z.norm_sqr()).sum();
        assert!(res < obs);
    }

    #[test]
    fn ls_singular_without_ridge() {
        let p = CeProblem {
            phi: vec![Array2::from_elem((3, 2), ONE)],
            r: vec![Array2::from_elem((3, 2), ONE)],
            u_bs: dft_matrix(2),
        };
        assert_eq!(ls_fallback(&p, 0.0), Err(Error::SingularSystem));
    }

    #[test]
    fn overdetermined_is_rejected_by_default() {
        let mut rng = seeded(6);
        let p = CeProblem {
            phi: vec![Array2::from_shape_fn((4, 2), |_| cn(&mut rng, 1.0))],
            r: vec![Array2::from_shape_fn((4, 3), |_| cn(&mut rng, 1.0))],
            u_bs: dft_matrix(3),
        };
        assert_eq!(gmmv_amp(&p, &GmmvOptions::default()), Err(Error::Overdetermined { slots: 4, users: 2 }));
        let est = estimate_equivalent_csi(&p, &GmmvOptions::default(), 0.1).unwrap();
        assert_eq!(est.path, CePath::RidgeLs);
    }

    #[test]
    fn zero_observation_gives_zero_estimate() {
        let mut rng = seeded(7);
        let p = CeProblem {
            phi: (0..3).map(|_| Array2::from_shape_fn((3, 5), |_| cn(&mut rng, 1.0))).collect(),
            r: vec![Array2::from_elem((3, 8), ZERO); 3],
            u_bs: dft_matrix(8),
        };
        let est = gmmv_amp(&p, &GmmvOptions::default()).unwrap();
        assert!(est.a_hat.iter().all(|a| a.iter().all(|z| z.norm() < 1e-12)));
    }

    #[test]
    fn single_grid_path_concentrates_in_one_bin() {
        let mut rng = seeded(8);
        let (n, m, t) = (32, 4, 3);
        let b = 7;
        let sv: Array1<C64> = steering_vector((2.0 * b as f64 / n as f64).asin(), n);
        let s = Array2::from_shape_fn((m, 1), |_| cn(&mut rng, 1.0));
        let x = Array2::from_shape_fn((1, t), |_| cn(&mut rng, 1.0));
        let gain = cn(&mut rng, 1.0);
        let y = Array3::from_shape_fn((n, m, t), |(ant, sc, ti)| gain * sv[ant] * s[[sc, 0]] * x[[0, ti]]);
        let p = build_ce_problem(&y, &s, &x, &[0]).unwrap();
        let opts = GmmvOptions {
            allow_overdetermined: true,
            max_iter: 200,
            ..Default::default()
        };
        let est = gmmv_amp(&p, &opts).unwrap();
        for a in &est.a_hat {
            let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let off: f64 = total - a[[0, b]].norm_sqr();
            assert!(off < 0.01 * total, "off-support fraction {}", off / total);
        }
    }
}
