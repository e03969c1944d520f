//! Scenario configuration and its flat `key = value` file format.
//!
//! ```text
//! # desk-scale run
//! profile = desk
//! T = 12
//! code_kind = ComplexGaussian
//! ```
//!
//! `profile` (if present) selects the base values and is applied before
//! any other key regardless of where it appears. Every other key overrides
//! one field. Unknown keys are an error.

use std::fmt::Write as _;
use std::path::Path;

use super::codes::CodeKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antennas.
    pub n_antennas: usize,
    /// OFDM subcarriers (spreading length).
    pub n_subcarriers: usize,
    /// Potential UEs.
    pub n_users: usize,
    /// Active UEs per frame.
    pub n_active: usize,
    /// OFDM symbols per frame.
    pub n_slots: usize,
    /// Modulation order.
    pub mod_order: usize,
    /// Beacon antenna, 1-based.
    pub eta: usize,
    /// Pre-equalization nulling threshold.
    pub h0: f64,
    /// Code family used by the proposed scheme and the pilot baselines.
    pub code_kind: CodeKind,
    /// Code family used by the single-antenna baselines.
    pub baseline_code_kind: CodeKind,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub tx_power_dbm: f64,
    pub angle_spread_deg: f64,
    pub paths_min: usize,
    pub paths_max: usize,
    pub dist_min_km: f64,
    pub dist_max_km: f64,
    /// Upper end of the uniform path-delay law, in microseconds.
    pub max_delay_us: f64,
    pub rho_damp: f64,
    pub n_coarse: usize,
    pub n_iter: usize,
    pub n_gmmv: usize,
    pub seed: u64,
    /// Overrides the normalized noise variance derived from the link budget.
    pub noise_variance: Option<f64>,
    /// Pilot baselines: activity threshold as a fraction of the reference
    /// row energy.
    pub pilot_threshold: f64,
    /// Channel estimation by ridge least squares instead of GMMV-AMP
    /// whenever `T ≥ K̂a`.
    pub ce_ls_fallback: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl SystemConfig {
    /// Full-scale scenario (N = 128, K = 500, Ka = 50).
    pub fn paper() -> Self {
        Self {
            n_antennas: 128,
            n_subcarriers: 60,
            n_users: 500,
            n_active: 50,
            n_slots: 20,
            mod_order: 4,
            eta: 1,
            h0: 0.2,
            code_kind: CodeKind::ComplexGaussian,
            baseline_code_kind: CodeKind::FourierRows,
            bandwidth_hz: 10e6,
            noise_psd_dbm_hz: -174.0,
            tx_power_dbm: 7.0,
            angle_spread_deg: 7.5,
            paths_min: 8,
            paths_max: 12,
            dist_min_km: 0.1,
            dist_max_km: 1.0,
            max_delay_us: 1.0,
            rho_damp: 0.3,
            n_coarse: 50,
            n_iter: 3,
            n_gmmv: 50,
            seed: 1,
            noise_variance: None,
            pilot_threshold: 0.1,
            ce_ls_fallback: false,
        }
    }

    /// Laptop-scale scenario (N = 32, M = 40, K = 100, Ka = 10, T = 16).
    pub fn desk() -> Self {
        Self {
            n_antennas: 32,
            n_subcarriers: 40,
            n_users: 100,
            n_active: 10,
            n_slots: 16,
            ..Self::paper()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "paper" | "full" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::InvalidConfig(format!("unknown profile `{other}`"))),
        }
    }

    /// 0-based beacon antenna index.
    pub fn beacon(&self) -> usize {
        self.eta - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("N", self.n_antennas),
            ("M", self.n_subcarriers),
            ("K", self.n_users),
            ("T", self.n_slots),
            ("N_coarse", self.n_coarse),
            ("N_gmmv", self.n_gmmv),
            ("paths_min", self.paths_min),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.n_active > self.n_users {
            return bad(format!("Ka = {} exceeds K = {}", self.n_active, self.n_users));
        }
        if self.eta == 0 || self.eta > self.n_antennas {
            return bad(format!("eta = {} outside 1..={}", self.eta, self.n_antennas));
        }
        if !matches!(self.mod_order, 2 | 4 | 8 | 16) {
            return Err(Error::UnsupportedOrder(self.mod_order));
        }
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return bad(format!("h0 must be positive, got {}", self.h0));
        }
        if !(0.0..1.0).contains(&self.rho_damp) {
            return bad(format!("rho_damp must lie in [0, 1), got {}", self.rho_damp));
        }
        if self.paths_min > self.paths_max {
            return bad("paths_min exceeds paths_max".into());
        }
        if !(self.dist_min_km > 0.0 && self.dist_min_km <= self.dist_max_km) {
            return bad("distance range must satisfy 0 < dist_min_km <= dist_max_km".into());
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("Bs must be positive".into());
        }
        if !(self.angle_spread_deg >= 0.0) || !(self.max_delay_us >= 0.0) {
            return bad("angle_spread_deg and max_delay_us must be non-negative".into());
        }
        if let Some(v) = self.noise_variance {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("noise_variance must be a finite non-negative number, got {v}"));
            }
        }
        if !(self.pilot_threshold >= 0.0) {
            return bad("pilot_threshold must be non-negative".into());
        }
        Ok(())
    }

    /// Sets one field from its file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{v}`")))
        }
        match key {
            "profile" => *self = Self::profile(value)?,
            "N" => self.n_antennas = num(key, value)?,
            "M" => self.n_subcarriers = num(key, value)?,
            "K" => self.n_users = num(key, value)?,
            "Ka" => self.n_active = num(key, value)?,
            "T" => self.n_slots = num(key, value)?,
            "L" => self.mod_order = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "h0" => self.h0 = num(key, value)?,
            "code_kind" => self.code_kind = value.parse()?,
            "baseline_code_kind" => self.baseline_code_kind = value.parse()?,
            "Bs" => self.bandwidth_hz = num(key, value)?,
            "noise_psd" => self.noise_psd_dbm_hz = num(key, value)?,
            "tx_power_dbm" => self.tx_power_dbm = num(key, value)?,
            "angle_spread_deg" => self.angle_spread_deg = num(key, value)?,
            "paths_min" => self.paths_min = num(key, value)?,
            "paths_max" => self.paths_max = num(key, value)?,
            "dist_min_km" => self.dist_min_km = num(key, value)?,
            "dist_max_km" => self.dist_max_km = num(key, value)?,
            "max_delay_us" => self.max_delay_us = num(key, value)?,
            "rho_damp" => self.rho_damp = num(key, value)?,
            "N_coarse" => self.n_coarse = num(key, value)?,
            "N_iter" => self.n_iter = num(key, value)?,
            "N_gmmv" => self.n_gmmv = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "noise_variance" => {
                self.noise_variance = match value {
                    "none" | "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "pilot_threshold" => self.pilot_threshold = num(key, value)?,
            "ce_ls_fallback" => self.ce_ls_fallback = num(key, value)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parses the `key = value` format and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(Error::ConfigParse {
                    line: idx + 1,
                    msg: "empty key or value".into(),
                });
            }
            entries.push((idx + 1, k, v));
        }
        let mut cfg = Self::default();
        // profile first, so that it never clobbers explicit overrides
        for &(line, k, v) in entries.iter().filter(|e| e.1 == "profile") {
            cfg.set(k, v).map_err(|e| attach_line(e, line))?;
        }
        for &(line, k, v) in entries.iter().filter(|e| e.1 != "profile") {
            cfg.set(k, v).map_err(|e| attach_line(e, line))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes every field in the file format; `parse` reads it back
    /// to an identical value.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("N", self.n_antennas.to_string());
        kv("M", self.n_subcarriers.to_string());
        kv("K", self.n_users.to_string());
        kv("Ka", self.n_active.to_string());
        kv("T", self.n_slots.to_string());
        kv("L", self.mod_order.to_string());
        kv("eta", self.eta.to_string());
        kv("h0", format!("{:?}", self.h0));
        kv("code_kind", self.code_kind.to_string());
        kv("baseline_code_kind", self.baseline_code_kind.to_string());
        kv("Bs", format!("{:?}", self.bandwidth_hz));
        kv("noise_psd", format!("{:?}", self.noise_psd_dbm_hz));
        kv("tx_power_dbm", format!("{:?}", self.tx_power_dbm));
        kv("angle_spread_deg", format!("{:?}", self.angle_spread_deg));
        kv("paths_min", self.paths_min.to_string());
        kv("paths_max", self.paths_max.to_string());
        kv("dist_min_km", format!("{:?}", self.dist_min_km));
        kv("dist_max_km", format!("{:?}", self.dist_max_km));
        kv("max_delay_us", format!("{:?}", self.max_delay_us));
        kv("rho_damp", format!("{:?}", self.rho_damp));
        kv("N_coarse", self.n_coarse.to_string());
        kv("N_iter", self.n_iter.to_string());
        kv("N_gmmv", self.n_gmmv.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "noise_variance",
            self.noise_variance.map_or("none".to_string(), |v| format!("{v:?}")),
        );
        kv("pilot_threshold", format!("{:?}", self.pilot_threshold));
        kv("ce_ls_fallback", self.ce_ls_fallback.to_string());
        s
    }
}

fn attach_line(e: Error, line: usize) -> Error {
    match e {
        Error::UnknownKey(_) => e,
        other => Error::ConfigParse {
            line,
            msg: other.to_string(),
        },
    }
}
