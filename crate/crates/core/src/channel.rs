//! One-ring spatial-frequency channel model.
//!
//! The small-scale channel of UE `k` on subcarrier `m` is a sum of `P`
//! plane waves impinging on a half-wavelength ULA:
//!
//! ```text
//! H[:, m, k] = Σ_p β_p · a(φ_p) · exp(-j2π τ_p (-Bs/2 + m·Bs/M)),   m = 0..M-1
//! a(φ)[n]    = exp(-jπ n sin φ)
//! ```
//!
//! Path gains are CN(0, 1/P) so that `E|H[n,m,k]|² = 1`; large-scale gain
//! follows the 128.1 + 37.6·log10(d) dB law.

use std::f64::consts::PI;
use std::io::{Read, Write};

use ndarray::{Array1, Array2, Array3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cn, C64, ZERO};
use crate::sysmodel::SystemConfig;

/// Multipath parameters of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    /// Angles of arrival, radians.
    pub phi: Vec<f64>,
    /// Delays, seconds.
    pub tau: Vec<f64>,
    pub beta: Vec<C64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Channel of every UE in the cell for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Small-scale fading, shape (N, M, K).
    pub h: Array3<C64>,
    /// Large-scale linear power gains.
    pub gain: Vec<f64>,
    pub dist_km: Vec<f64>,
    pub paths: Vec<PathSet>,
    pub phi_center: Vec<f64>,
}

/// ULA response with half-wavelength spacing; entry `n` is `exp(-jπ n sin φ)`.
pub fn steering_vector(phi: f64, n: usize) -> Array1<C64> {
    let step = -PI * phi.sin();
    Array1::from_shape_fn(n, |i| C64::from_polar(1.0, step * i as f64))
}

/// Draws the path set of one UE around `phi_center`.
pub fn draw_paths<R: Rng + ?Sized>(rng: &mut R, config: &SystemConfig, phi_center: f64) -> PathSet {
    let p = rng.random_range(config.paths_min..=config.paths_max);
    let spread = config.angle_spread_deg.to_radians();
    let max_delay = config.max_delay_us * 1e-6;
    let mut phi = Vec::with_capacity(p);
    let mut tau = Vec::with_capacity(p);
    let mut beta = Vec::with_capacity(p);
    for _ in 0..p {
        phi.push(if spread > 0.0 {
            phi_center + rng.random_range(-spread..=spread)
        } else {
            phi_center
        });
        tau.push(if max_delay > 0.0 { rng.random_range(0.0..max_delay) } else { 0.0 });
        beta.push(cn(rng, 1.0 / p as f64));
    }
    PathSet { phi, tau, beta }
}

/// Frequency of subcarrier `m` (0-based) relative to the carrier.
fn subcarrier_offset(m: usize, n_sub: usize, bandwidth: f64) -> f64 {
    -bandwidth / 2.0 + m as f64 * bandwidth / n_sub as f64
}

/// Spatial-frequency channel matrix (N × M) of one path set.
pub fn small_scale_channel(paths: &PathSet, n: usize, m: usize, bandwidth: f64) -> Array2<C64> {
    let mut h = Array2::from_elem((n, m), ZERO);
    for p in 0..paths.len() {
        let a = steering_vector(paths.phi[p], n);
        for col in 0..m {
            let f = subcarrier_offset(col, m, bandwidth);
            let w = paths.beta[p] * C64::from_polar(1.0, -2.0 * PI * paths.tau[p] * f);
            for row in 0..n {
                h[[row, col]] += w * a[row];
            }
        }
    }
    h
}

/// Path-loss in dB at distance `d_km`.
pub fn path_loss_db(d_km: f64) -> f64 {
    128.1 + 37.6 * d_km.log10()
}

/// Linear large-scale power gain `10^(-PL(d)/10)`.
pub fn large_scale_gain(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::NonPositiveDistance(d_km));
    }
    Ok(10f64.powf(-path_loss_db(d_km) / 10.0))
}

/// Gain of a typical UE: the large-scale gain at the cell-average path
/// loss in dB, for a distance uniform on `[d_min, d_max]`.
pub fn typical_large_scale_gain(d_min: f64, d_max: f64) -> Result<f64> {
    if !(d_min > 0.0) {
        return Err(Error::NonPositiveDistance(d_min));
    }
    if d_max <= d_min {
        return large_scale_gain(d_min);
    }
    // E[log10 d] for d ~ U[a, b]
    let mean_log = (d_max * d_max.log10() - d_min * d_min.log10()) / (d_max - d_min) - std::f64::consts::LOG10_E;
    Ok(10f64.powf(-(128.1 + 37.6 * mean_log) / 10.0))
}

/// Draws a full cell realization: K independent UEs with center angles
/// uniform on [-π/2, π/2] and distances uniform on the configured range.
pub fn generate_channel<R: Rng + ?Sized>(rng: &mut R, config: &SystemConfig) -> ChannelRealization {
    let (n, m, k) = (config.n_antennas, config.n_subcarriers, config.n_users);
    let mut h = Array3::from_elem((n, m, k), ZERO);
    let mut gain = Vec::with_capacity(k);
    let mut dist_km = Vec::with_capacity(k);
    let mut paths = Vec::with_capacity(k);
    let mut phi_center = Vec::with_capacity(k);
    for ue in 0..k {
        let center = rng.random_range(-PI / 2.0..=PI / 2.0);
        let d = if config.dist_max_km > config.dist_min_km {
            rng.random_range(config.dist_min_km..=config.dist_max_km)
        } else {
            config.dist_min_km
        };
        let ps = draw_paths(rng, config, center);
        let hk = small_scale_channel(&ps, n, m, config.bandwidth_hz);
        h.slice_mut(ndarray::s![.., .., ue]).assign(&hk);
        gain.push(large_scale_gain(d).expect("validated distance range"));
        dist_km.push(d);
        paths.push(ps);
        phi_center.push(center);
    }
    ChannelRealization {
        h,
        gain,
        dist_km,
        paths,
        phi_center,
    }
}

const DUMP_MAGIC: &[u8; 8] = b"GFMACH01";

impl ChannelRealization {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.h.dim()
    }

    /// Little-endian binary dump; [`ChannelRealization::load`] restores it
    /// bit-for-bit.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        let (n, m, k) = self.h.dim();
        w.write_all(DUMP_MAGIC)?;
        for d in [n, m, k] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let put = |w: &mut W, x: f64| w.write_all(&x.to_le_bytes());
        for ue in 0..k {
            put(&mut w, self.phi_center[ue])?;
            put(&mut w, self.dist_km[ue])?;
            put(&mut w, self.gain[ue])?;
            let ps = &self.paths[ue];
            w.write_all(&(ps.len() as u64).to_le_bytes())?;
            for p in 0..ps.len() {
                put(&mut w, ps.phi[p])?;
                put(&mut w, ps.tau[p])?;
                put(&mut w, ps.beta[p].re)?;
                put(&mut w, ps.beta[p].im)?;
            }
        }
        for z in self.h.iter() {
            put(&mut w, z.re)?;
            put(&mut w, z.im)?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Io("not a channel dump".into()));
        }
        let mut buf = [0u8; 8];
        let mut u = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut buf)?;
            Ok(u64::from_le_bytes(buf))
        };
        let n = u(&mut r)? as usize;
        let m = u(&mut r)? as usize;
        let k = u(&mut r)? as usize;
        let f = |r: &mut R| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let mut phi_center = Vec::with_capacity(k);
        let mut dist_km = Vec::with_capacity(k);
        let mut gain = Vec::with_capacity(k);
        let mut paths = Vec::with_capacity(k);
        for _ in 0..k {
            phi_center.push(f(&mut r)?);
            dist_km.push(f(&mut r)?);
            gain.push(f(&mut r)?);
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            let p = u64::from_le_bytes(b) as usize;
            let mut ps = PathSet {
                phi: Vec::with_capacity(p),
                tau: Vec::with_capacity(p),
                beta: Vec::with_capacity(p),
            };
            for _ in 0..p {
                ps.phi.push(f(&mut r)?);
                ps.tau.push(f(&mut r)?);
                let re = f(&mut r)?;
                let im = f(&mut r)?;
                ps.beta.push(C64::new(re, im));
            }
            paths.push(ps);
        }
        let mut h = Array3::from_elem((n, m, k), ZERO);
        for z in h.iter_mut() {
            let re = f(&mut r)?;
            let im = f(&mut r)?;
            *z = C64::new(re, im);
        }
        Ok(Self {
            h,
            gain,
            dist_km,
            paths,
            phi_center,
        })
    }
}
