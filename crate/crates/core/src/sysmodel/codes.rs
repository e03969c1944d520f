use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;

use crate::error::Error;
use crate::linalg::{cn, C64};

/// How UE spreading codes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeKind {
    /// Entries `exp(jψ)` with independent uniform phases.
    UnitModulusRandomPhase,
    /// Entries i.i.d. CN(0, 1).
    ComplexGaussian,
    /// Partial DFT: M distinct rows, chosen at random, of the unnormalized
    /// max(M, K)-point DFT matrix, restricted to its first K columns.
    FourierRows,
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeKind::UnitModulusRandomPhase => "UnitModulusRandomPhase",
            CodeKind::ComplexGaussian => "ComplexGaussian",
            CodeKind::FourierRows => "FourierRows",
        })
    }
}

impl FromStr for CodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "UnitModulusRandomPhase" => Ok(CodeKind::UnitModulusRandomPhase),
            "ComplexGaussian" => Ok(CodeKind::ComplexGaussian),
            "FourierRows" => Ok(CodeKind::FourierRows),
            other => Err(Error::InvalidConfig(format!("unknown code kind `{other}`"))),
        }
    }
}

/// Spreading code matrix, one column per UE.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingCodes {
    pub matrix: Array2<C64>,
    pub kind: CodeKind,
}

impl SpreadingCodes {
    pub fn subcarriers(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn users(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Draws an `m × k` code matrix of the given kind.
pub fn generate_spreading_codes<R: Rng + ?Sized>(rng: &mut R, kind: CodeKind, m: usize, k: usize) -> SpreadingCodes {
    let matrix = match kind {
        CodeKind::UnitModulusRandomPhase => Array2::from_shape_simple_fn((m, k), || {
            C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        }),
        CodeKind::ComplexGaussian => Array2::from_shape_simple_fn((m, k), || cn(rng, 1.0)),
        CodeKind::FourierRows => {
            // partial DFT: m distinct rows of a max(m, k)-point DFT, first k columns
            let size = m.max(k);
            let rows = rand::seq::index::sample(rng, size, m).into_vec();
            Array2::from_shape_fn((m, k), |(r, c)| {
                let phase = -std::f64::consts::TAU * ((rows[r] * c) % size) as f64 / size as f64;
                C64::from_polar(1.0, phase)
            })
        }
    };
    SpreadingCodes { matrix, kind }
}
