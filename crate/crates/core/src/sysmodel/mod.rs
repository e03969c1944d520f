//! Experiment configuration, modulation and spreading codes shared by
//! every stage of the link.

mod codes;
mod config;
mod constellation;

pub use codes::{generate_spreading_codes, CodeKind, SpreadingCodes};
pub use config::SystemConfig;
pub use constellation::{make_constellation, Constellation};
