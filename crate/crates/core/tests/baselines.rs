//! Reference receivers driven through the harness.

use gfma::baselines::BaselineKind;
use gfma::harness::{Scheme, Simulation};
use gfma::SystemConfig;

fn noiseless() -> SystemConfig {
    let mut cfg = SystemConfig::desk();
    cfg.n_antennas = 8;
    cfg.n_subcarriers = 16;
    cfg.n_users = 24;
    cfg.n_active = 3;
    cfg.n_slots = 6;
    cfg.h0 = 1e-300;
    cfg.noise_variance = Some(0.0);
    cfg
}

#[test]
fn every_baseline_is_exact_without_noise() {
    let sim = Simulation::new(noiseless()).unwrap();
    for kind in [
        BaselineKind::PilotGmmvAmp,
        BaselineKind::PilotSomp,
        BaselineKind::SingleAntennaAmp,
        BaselineKind::SingleAntennaSomp,
    ] {
        for trial in 0..5 {
            let m = sim.run_trial(Scheme::Baseline(kind), trial).unwrap();
            assert_eq!((m.adep, m.ber), (0.0, 0.0), "{kind} trial {trial}");
        }
    }
}

#[test]
fn only_pilot_baselines_report_csi_error() {
    let mut cfg = noiseless();
    cfg.noise_variance = Some(0.5);
    let sim = Simulation::new(cfg).unwrap();
    let pilot = sim.run_trial(Scheme::Baseline(BaselineKind::PilotSomp), 0).unwrap();
    assert!(pilot.nmse.is_finite() && pilot.nmse > 0.0);
    let single = sim.run_trial(Scheme::Baseline(BaselineKind::SingleAntennaAmp), 0).unwrap();
    assert!(single.nmse.is_nan());
}

#[test]
fn scheme_names_round_trip() {
    for scheme in Scheme::ALL {
        assert_eq!(scheme.to_string().parse::<Scheme>().unwrap(), scheme);
    }
    assert_eq!("pilot-somp".parse::<Scheme>().unwrap(), Scheme::Baseline(BaselineKind::PilotSomp));
    assert!("baseline9".parse::<Scheme>().is_err());
}
