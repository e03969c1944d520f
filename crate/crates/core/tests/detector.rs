//! Iterative receiver on full simulated frames.

use gfma::channel::generate_channel;
use gfma::detector::{iterative_detect, DetectOptions};
use gfma::harness::metrics::{ber, Reference};
use gfma::rng::seeded;
use gfma::sysmodel::{generate_spreading_codes, make_constellation, SpreadingCodes};
use gfma::uplink::transmit_frame;
use gfma::SystemConfig;

fn config(noise: f64) -> SystemConfig {
    let mut cfg = SystemConfig::desk();
    cfg.n_antennas = 16;
    cfg.n_subcarriers = 24;
    cfg.n_users = 48;
    cfg.n_active = 5;
    cfg.n_slots = 8;
    cfg.n_iter = 2;
    cfg.noise_variance = Some(noise);
    cfg
}

#[test]
fn refinement_never_loses_to_the_coarse_stage_on_average() {
    let cfg = config(2.0);
    let q = make_constellation(cfg.mod_order).unwrap();
    let mut rng = seeded(21);
    let codes = generate_spreading_codes(&mut rng, cfg.code_kind, cfg.n_subcarriers, cfg.n_users);
    let opts = DetectOptions::from_config(&cfg);
    let (mut coarse, mut last) = (0.0, 0.0);
    for _ in 0..15 {
        let ch = generate_channel(&mut rng, &cfg);
        let (pre, truth) = transmit_frame(&mut rng, &cfg, &q, &ch, &codes).unwrap();
        let reference = Reference {
            active_set: &truth.active_set,
            bits: &truth.bits,
            h: &ch.h,
            theta: &pre.theta,
            n_users: cfg.n_users,
        };
        let det = iterative_detect(&truth.y, &codes.matrix, &q, &opts, Some(&reference)).unwrap();
        assert_eq!(det.diagnostics.len(), cfg.n_iter + 1);
        assert!(det.diagnostics[0].nmse.is_nan());
        let final_ber = ber(&reference, &det.active_set, &det.bits_hat);
        assert_eq!(det.diagnostics.last().unwrap().ber, final_ber);
        coarse += det.diagnostics[0].ber;
        last += final_ber;
    }
    assert!(last <= coarse, "refined {last} vs coarse {coarse}");
}

#[test]
fn detection_is_deterministic() {
    let cfg = config(1.0);
    let q = make_constellation(cfg.mod_order).unwrap();
    let codes: SpreadingCodes = generate_spreading_codes(&mut seeded(1), cfg.code_kind, cfg.n_subcarriers, cfg.n_users);
    let frame = || {
        let mut rng = seeded(2);
        let ch = generate_channel(&mut rng, &cfg);
        transmit_frame(&mut rng, &cfg, &q, &ch, &codes).unwrap().1
    };
    let opts = DetectOptions::from_config(&cfg);
    let a = iterative_detect(&frame().y, &codes.matrix, &q, &opts, None).unwrap();
    let b = iterative_detect(&frame().y, &codes.matrix, &q, &opts, None).unwrap();
    assert_eq!(a, b);
}
