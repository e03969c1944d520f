//! Link-level simulator for pre-equalization aided grant-free massive
//! access in massive MIMO-OFDM.
//!
//! UEs pre-equalize their uplink against the channel of a single beacon
//! antenna, which lets the BS detect activity and data from that antenna
//! alone without any CSI. The receiver then alternates data-aided channel
//! estimation over all antennas with LMMSE data detection.
//!
//! Stages, in pipeline order:
//!
//! - [`sysmodel`]: configuration, constellation, spreading codes
//! - [`channel`]: one-ring channel and path loss
//! - [`uplink`]: pre-equalization with nulling and received-signal synthesis
//! - [`coarse_dd`]: AMP joint activity / data detection on the beacon antenna
//! - [`ce_gmmv`]: data-aided angular-domain channel estimation
//! - [`detector`]: the iterative CE ↔ LMMSE receiver
//! - [`baselines`]: pilot-based and single-antenna reference schemes
//! - [`harness`]: Monte Carlo trials, metrics, sweeps and CSV output

// `!(a > b)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod ce_gmmv;
pub mod channel;
pub mod coarse_dd;
pub mod detector;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod sysmodel;
pub mod uplink;
pub mod validation;

pub use error::{Error, Result};
pub use sysmodel::SystemConfig;
