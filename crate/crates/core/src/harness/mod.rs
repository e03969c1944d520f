//! Monte Carlo runner: deterministic per-trial streams, parallel trials,
//! metric aggregation, sweeps and CSV output.

pub mod metrics;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::baselines::{pilot_matrices, run_baseline, BaselineKind, BaselineScenario};
use crate::channel::generate_channel;
use crate::detector::{iterative_detect, DetectOptions};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::rng::{domain, substream};
use crate::sysmodel::{generate_spreading_codes, make_constellation, Constellation, SystemConfig};
use crate::uplink::{effective_noise_variance, transmit_frame, pre_equalize_all, draw_frame};

use metrics::{adep, ber, csi_nmse, Reference};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "GFMA_WORKERS";

/// Exact CSV header.
pub const CSV_HEADER: &str = "sweep_var,value,scheme,metric,mean,stderr,trials,seed";

/// A receiver under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Proposed,
    Baseline(BaselineKind),
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed,
        Scheme::Baseline(BaselineKind::PilotGmmvAmp),
        Scheme::Baseline(BaselineKind::PilotSomp),
        Scheme::Baseline(BaselineKind::SingleAntennaAmp),
        Scheme::Baseline(BaselineKind::SingleAntennaSomp),
    ];

    pub fn parse_list(s: &str) -> Result<Vec<Scheme>> {
        s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline(BaselineKind::PilotGmmvAmp) => "baseline1",
            Scheme::Baseline(BaselineKind::PilotSomp) => "baseline2",
            Scheme::Baseline(BaselineKind::SingleAntennaAmp) => "baseline3",
            Scheme::Baseline(BaselineKind::SingleAntennaSomp) => "baseline4",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            other => other
                .parse::<BaselineKind>()
                .map(Scheme::Baseline)
                .map_err(|_| Error::InvalidConfig(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Scores of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub trial: usize,
    pub seed: u64,
    pub adep: f64,
    pub ber: f64,
    /// Linear CSI NMSE; NaN when the scheme produces no CSI estimate,
    /// `+∞` when no UE was correctly detected.
    pub nmse: f64,
    pub ka_hat: usize,
    /// Proposed scheme only: BER of the coarse stage.
    pub coarse_ber: Option<f64>,
    /// Proposed scheme only: BER and NMSE after each outer iteration.
    pub ber_iter: Vec<f64>,
    pub nmse_iter: Vec<f64>,
}

impl TrialMetrics {
    pub fn nmse_db(&self) -> f64 {
        metrics::to_db(self.nmse)
    }
}

/// A trial that failed, kept so a sweep can report it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub error: Error,
}

/// Quantities shared by every trial of one configuration: validated
/// config, constellation, spreading codes and pilots.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SystemConfig,
    pub constellation: Constellation,
    pub codes: Array2<C64>,
    pub baseline_codes: Array2<C64>,
    pub pilots: Vec<Array2<C64>>,
    pub opts: DetectOptions,
}

impl Simulation {
    pub fn new(config: SystemConfig) -> Result<Self> {
        config.validate()?;
        let constellation = make_constellation(config.mod_order)?;
        let (m, k, t) = (config.n_subcarriers, config.n_users, config.n_slots);
        let codes = generate_spreading_codes(&mut substream(config.seed, domain::CODES, 0), config.code_kind, m, k).matrix;
        let baseline_codes =
            generate_spreading_codes(&mut substream(config.seed, domain::BASELINE_CODES, 0), config.baseline_code_kind, m, k)
                .matrix;
        let pilots = pilot_matrices(&mut substream(config.seed, domain::PILOTS, 0), m, t, k);
        let opts = DetectOptions::from_config(&config);
        Ok(Self {
            config,
            constellation,
            codes,
            baseline_codes,
            pilots,
            opts,
        })
    }

    /// One frame of `scheme` on the stream `(seed, trial)`. Every scheme
    /// sees the same channel, activity pattern, symbols and noise draws.
    pub fn run_trial(&self, scheme: Scheme, trial: usize) -> Result<TrialMetrics> {
        let cfg = &self.config;
        let mut rng = substream(cfg.seed, domain::TRIAL, trial as u64);
        let channel = generate_channel(&mut rng, cfg);
        let base = TrialMetrics {
            trial,
            seed: cfg.seed,
            adep: 0.0,
            ber: 0.0,
            nmse: f64::NAN,
            ka_hat: 0,
            coarse_ber: None,
            ber_iter: Vec::new(),
            nmse_iter: Vec::new(),
        };
        match scheme {
            Scheme::Proposed => {
                let codes = crate::sysmodel::SpreadingCodes {
                    matrix: self.codes.clone(),
                    kind: cfg.code_kind,
                };
                let (pre, truth) = transmit_frame(&mut rng, cfg, &self.constellation, &channel, &codes)?;
                let reference = Reference {
                    active_set: &truth.active_set,
                    bits: &truth.bits,
                    h: &channel.h,
                    theta: &pre.theta,
                    n_users: cfg.n_users,
                };
                let det = iterative_detect(&truth.y, &self.codes, &self.constellation, &self.opts, Some(&reference))?;
                let diag = &det.diagnostics;
                Ok(TrialMetrics {
                    adep: adep(&reference, &det.active_set),
                    ber: ber(&reference, &det.active_set, &det.bits_hat),
                    nmse: det.h_equ.as_ref().map_or(f64::NAN, |h| csi_nmse(&reference, &det.active_set, h)),
                    ka_hat: det.active_set.len(),
                    coarse_ber: diag.first().map(|d| d.ber),
                    ber_iter: diag.iter().skip(1).map(|d| d.ber).collect(),
                    nmse_iter: diag.iter().skip(1).map(|d| d.nmse).collect(),
                    ..base
                })
            }
            Scheme::Baseline(kind) => {
                let sym = draw_frame(&mut rng, cfg, &self.constellation);
                let pre = pre_equalize_all(&channel, cfg.beacon(), cfg.h0);
                let sigma2 = effective_noise_variance(cfg);
                let scenario = BaselineScenario {
                    h: &channel.h,
                    gain: &channel.gain,
                    alpha: &sym.alpha,
                    x: &sym.x,
                    theta: &pre.theta,
                    codes: &self.codes,
                    baseline_codes: &self.baseline_codes,
                    pilots: &self.pilots,
                    sigma2,
                    n_active: cfg.n_active,
                    pilot_threshold: cfg.pilot_threshold,
                };
                let out = run_baseline(kind, &scenario, &self.constellation, &self.opts, &mut rng)?;
                let ones = Array2::from_elem((cfg.n_subcarriers, cfg.n_users), C64::new(1.0, 0.0));
                let reference = Reference {
                    active_set: &sym.active_set,
                    bits: &sym.bits,
                    h: &channel.h,
                    theta: &ones,
                    n_users: cfg.n_users,
                };
                Ok(TrialMetrics {
                    adep: adep(&reference, &out.active_set),
                    ber: ber(&reference, &out.active_set, &out.bits_hat),
                    nmse: out.h_est.as_ref().map_or(f64::NAN, |h| csi_nmse(&reference, &out.active_set, h)),
                    ka_hat: out.active_set.len(),
                    ..base
                })
            }
        }
    }

    /// Trials `0..trials` in parallel, returned in trial order.
    pub fn run_trials(&self, scheme: Scheme, trials: usize) -> Vec<std::result::Result<TrialMetrics, TrialFailure>> {
        let job = || {
            (0..trials)
                .into_par_iter()
                .map(|i| self.run_trial(scheme, i).map_err(|error| TrialFailure { trial: i, error }))
                .collect::<Vec<_>>()
        };
        match worker_count() {
            Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(job),
                Err(_) => job(),
            },
            None => job(),
        }
    }
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Sample mean and standard error of the mean over the finite values.
pub fn mean_stderr(values: &[f64]) -> (f64, f64, usize) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = finite.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = finite.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0, 1);
    }
    let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

/// One aggregated CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_var: String,
    pub value: String,
    pub scheme: Scheme,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.6e}")
    }
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.sweep_var,
                r.value,
                r.scheme,
                r.metric,
                fmt_num(r.mean),
                fmt_num(r.stderr),
                r.trials,
                r.seed
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// Mean of `metric` for `scheme` at `value`.
    pub fn mean(&self, value: &str, scheme: Scheme, metric: &str) -> Option<f64> {
        self.find(value, scheme, metric).map(|r| r.mean)
    }

    pub fn find(&self, value: &str, scheme: Scheme, metric: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value && r.scheme == scheme && r.metric == metric)
    }
}

/// Aggregates trial outcomes into table rows.
pub fn summarize(
    sweep_var: &str,
    value: &str,
    scheme: Scheme,
    seed: u64,
    outcomes: &[std::result::Result<TrialMetrics, TrialFailure>],
) -> Vec<SweepRow> {
    let ok: Vec<&TrialMetrics> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let mut rows = Vec::new();
    let mut push = |metric: String, values: Vec<f64>| {
        let (mean, stderr, trials) = mean_stderr(&values);
        rows.push(SweepRow {
            sweep_var: sweep_var.to_string(),
            value: value.to_string(),
            scheme,
            metric,
            mean,
            stderr,
            trials,
            seed,
        });
    };
    push("adep".into(), ok.iter().map(|m| m.adep).collect());
    push("ber".into(), ok.iter().map(|m| m.ber).collect());
    if ok.iter().any(|m| !m.nmse.is_nan()) {
        push("nmse".into(), ok.iter().map(|m| m.nmse).collect());
        push("nmse_db".into(), ok.iter().map(|m| m.nmse_db()).collect());
    }
    push("ka_hat".into(), ok.iter().map(|m| m.ka_hat as f64).collect());
    if ok.iter().any(|m| m.coarse_ber.is_some()) {
        push("coarse_ber".into(), ok.iter().filter_map(|m| m.coarse_ber).collect());
    }
    let iters = ok.iter().map(|m| m.ber_iter.len()).max().unwrap_or(0);
    for i in 0..iters {
        push(format!("ber_iter{}", i + 1), ok.iter().filter_map(|m| m.ber_iter.get(i).copied()).collect());
        push(format!("nmse_iter{}", i + 1), ok.iter().filter_map(|m| m.nmse_iter.get(i).copied()).collect());
    }
    let failed = outcomes.len() - ok.len();
    rows.push(SweepRow {
        sweep_var: sweep_var.to_string(),
        value: value.to_string(),
        scheme,
        metric: "failed".into(),
        mean: failed as f64,
        stderr: 0.0,
        trials: outcomes.len(),
        seed,
    });
    rows
}

/// Runs `trials` frames of every scheme at the base configuration.
pub fn run(config: &SystemConfig, schemes: &[Scheme], trials: usize) -> Result<SweepTable> {
    let sim = Simulation::new(config.clone())?;
    let mut table = SweepTable::default();
    for &scheme in schemes {
        let out = sim.run_trials(scheme, trials);
        table.rows.extend(summarize("none", "-", scheme, config.seed, &out));
    }
    Ok(table)
}

/// Sweepable parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Time slots per frame.
    T,
    /// Subcarriers (code length).
    M,
    /// UE transmit power in dBm.
    Rho,
    NIter,
    Scheme,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::T => "T",
            SweepVar::M => "M",
            SweepVar::Rho => "rho",
            SweepVar::NIter => "N_iter",
            SweepVar::Scheme => "scheme",
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(SweepVar::T),
            "M" => Ok(SweepVar::M),
            "rho" | "tx_power_dbm" => Ok(SweepVar::Rho),
            "N_iter" => Ok(SweepVar::NIter),
            "scheme" => Ok(SweepVar::Scheme),
            other => Err(Error::InvalidConfig(format!("cannot sweep `{other}`"))),
        }
    }
}

/// Cartesian run over `values × schemes × trials`. Every point reuses the
/// same trial indices, so schemes and values are compared on common seeds.
pub fn sweep(config: &SystemConfig, var: SweepVar, values: &[String], schemes: &[Scheme], trials: usize) -> Result<SweepTable> {
    let mut table = SweepTable::default();
    for value in values {
        let mut cfg = config.clone();
        let point_schemes: Vec<Scheme> = match var {
            SweepVar::Scheme => vec![value.parse()?],
            SweepVar::T => {
                cfg.set("T", value)?;
                schemes.to_vec()
            }
            SweepVar::M => {
                cfg.set("M", value)?;
                schemes.to_vec()
            }
            SweepVar::Rho => {
                cfg.set("tx_power_dbm", value)?;
                schemes.to_vec()
            }
            SweepVar::NIter => {
                cfg.set("N_iter", value)?;
                schemes.to_vec()
            }
        };
        let sim = Simulation::new(cfg)?;
        for scheme in point_schemes {
            let out = sim.run_trials(scheme, trials);
            table.rows.extend(summarize(var.name(), value, scheme, config.seed, &out));
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names() {
        for s in Scheme::ALL {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("pilot-somp".parse::<Scheme>().unwrap(), Scheme::Baseline(BaselineKind::PilotSomp));
        assert_eq!(Scheme::parse_list("proposed, baseline3").unwrap().len(), 2);
    }

    #[test]
    fn mean_stderr_basics() {
        let (m, s, n) = mean_stderr(&[1.0, 2.0, 3.0, f64::INFINITY]);
        assert_eq!((m, n), (2.0, 3));
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_stderr(&[]).0.is_nan());
    }

    #[test]
    fn csv_formatting() {
        let t = SweepTable {
            rows: vec![SweepRow {
                sweep_var: "T".into(),
                value: "8".into(),
                scheme: Scheme::Proposed,
                metric: "ber".into(),
                mean: 0.015,
                stderr: f64::NAN,
                trials: 3,
                seed: 7,
            }],
        };
        assert_eq!(t.to_csv_string(), format!("{CSV_HEADER}\nT,8,proposed,ber,1.500000e-2,nan,3,7\n"));
    }
}
