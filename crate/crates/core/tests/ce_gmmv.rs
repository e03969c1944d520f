//! Equivalent-CSI estimation on synthetic frames built from the channel and
//! uplink modules.

use gfma::ce_gmmv::{build_ce_problem, dft_matrix, estimate_equivalent_csi, gmmv_amp, to_angular, CePath, GmmvOptions};
use gfma::channel::generate_channel;
use gfma::linalg::C64;
use gfma::rng::seeded;
use gfma::sysmodel::{generate_spreading_codes, make_constellation};
use gfma::uplink::{draw_frame, pre_equalize_all, synthesize_uplink};
use gfma::SystemConfig;
use ndarray::{s, Array2};

fn equivalent_csi_nmse(seed: u64, slots: usize) -> f64 {
    let mut cfg = SystemConfig::desk();
    cfg.n_slots = slots;
    cfg.h0 = 1e-300;
    let q = make_constellation(cfg.mod_order).unwrap();
    let mut rng = seeded(seed);
    let codes = generate_spreading_codes(&mut rng, cfg.code_kind, cfg.n_subcarriers, cfg.n_users).matrix;
    let ch = generate_channel(&mut rng, &cfg);
    let pre = pre_equalize_all(&ch, cfg.beacon(), cfg.h0);
    let sym = draw_frame(&mut rng, &cfg, &q);
    let y = synthesize_uplink(&ch.h, &ch.gain, &pre.theta, &codes, &sym.alpha, &sym.x, 0.0, &mut rng).unwrap();
    let problem = build_ce_problem(&y, &codes, &sym.x, &sym.active_set).unwrap();
    let opts = GmmvOptions {
        max_iter: 200,
        ..GmmvOptions::default()
    };
    let est = gmmv_amp(&problem, &opts).unwrap();
    let (mut err, mut energy) = (0.0, 0.0);
    for (kappa, &k) in sym.active_set.iter().enumerate() {
        for m in 0..cfg.n_subcarriers {
            for n in 0..cfg.n_antennas {
                let truth = ch.h[[n, m, k]] * pre.theta[[m, k]];
                err += (est.h_equ[[n, m, kappa]] - truth).norm_sqr();
                energy += truth.norm_sqr();
            }
        }
    }
    10.0 * (err / energy).log10()
}

#[test]
fn noiseless_equivalent_csi_is_recovered_below_active_count() {
    // perfect symbols, no nulling, T one short of the active count
    let mean: f64 = (0..3).map(|seed| equivalent_csi_nmse(seed, 9)).sum::<f64>() / 3.0;
    assert!(mean < -20.0, "NMSE {mean:.2} dB");
}

#[test]
fn pre_equalization_keeps_the_angular_profile() {
    let cfg = SystemConfig::desk();
    let ch = generate_channel(&mut seeded(4), &cfg);
    let pre = pre_equalize_all(&ch, cfg.beacon(), cfg.h0);
    let u = dft_matrix(cfg.n_antennas);
    for k in 0..cfg.n_users {
        for m in 0..cfg.n_subcarriers {
            let h = ch.h.slice(s![.., m, k]).to_owned();
            let heq = h.mapv(|z| z * pre.theta[[m, k]]);
            let a = to_angular(&h.insert_axis(ndarray::Axis(0)).view(), &u);
            let b = to_angular(&heq.insert_axis(ndarray::Axis(0)).view(), &u);
            let ip: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
            let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            // collinear: Cauchy-Schwarz holds with equality
            assert!((ip.norm() - na * nb).abs() <= 1e-9 * (na * nb).max(1e-300));
        }
    }
}

#[test]
fn overdetermined_problem_runs_amp_by_default_and_ls_on_request() {
    let (n, m, k, t) = (4, 3, 5, 8);
    let mut rng = seeded(11);
    let codes = generate_spreading_codes(&mut rng, gfma::sysmodel::CodeKind::ComplexGaussian, m, k).matrix;
    let x = Array2::from_shape_fn((k, t), |_| gfma::linalg::cn(&mut rng, 1.0));
    let h = ndarray::Array3::from_shape_fn((n, m, k), |_| gfma::linalg::cn(&mut rng, 1.0));
    let y = ndarray::Array3::from_shape_fn((n, m, t), |(a, b, c)| (0..k).map(|u| h[[a, b, u]] * codes[[b, u]] * x[[u, c]]).sum());
    let active: Vec<usize> = (0..3).collect();
    let problem = build_ce_problem(&y, &codes, &x, &active).unwrap();
    let run = |allow| {
        let opts = GmmvOptions {
            allow_overdetermined: allow,
            ..GmmvOptions::default()
        };
        estimate_equivalent_csi(&problem, &opts, 0.1).unwrap().path
    };
    assert_eq!(run(true), CePath::GmmvAmp);
    assert_eq!(run(false), CePath::RidgeLs);
}
