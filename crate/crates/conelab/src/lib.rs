//! Verification laboratory for finite-field harmonic analysis on cones.
//!
//! The crate implements exact arithmetic in `F_{p^ell}` (odd characteristic),
//! the canonical additive and quadratic characters with their Gauss-sum
//! closed forms, dense Fourier analysis on `F^n`, the cone variety `C_n`
//! together with the closed form of its inverse Fourier transform, an
//! empirical extension-estimate harness, weighted point-sphere incidence
//! machinery built on a lift into the cone `C_{d+2}`, and the constructive
//! witnesses (null systems, isotropic subspaces, zero-incidence families)
//! that show the incidence bounds are sharp.
//!
//! Every closed form is paired with an independent brute-force oracle and
//! checked at small field sizes; the `suites` module packages those checks
//! into reproducible, seeded experiment reports.

pub mod characters;
pub mod cone;
pub mod constructions;
pub mod field;
pub mod incidence;
pub mod report;
pub mod restriction;
pub mod spectral;
pub mod suites;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("characteristic must be odd, got {0}")]
    EvenCharacteristic(u64),
    #[error("invalid extension degree {0}")]
    BadDegree(u32),
    #[error("modulus polynomial is invalid: {0}")]
    BadModulus(String),
    #[error("modulus polynomial is reducible: divisible by {0}")]
    ReducibleModulus(String),
    #[error("division by zero in the field")]
    DivisionByZero,
    #[error("quadratic character domain error: argument is zero")]
    ZeroArgument,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("budget exceeded: needed {needed} cells, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("exponent must be at least 1, got {0}")]
    BadExponent(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Cell budget for dense-grid allocations and enumerations.
///
/// Every operation that walks or materializes a `q^n`-sized object checks
/// against this limit first, so a typo'd dimension fails fast instead of
/// eating all memory.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_cells: u64,
}

impl Budget {
    pub const fn new(max_cells: u64) -> Self {
        Budget { max_cells }
    }

    /// Checked `q^n`, also enforcing the budget.
    pub fn grid_len(&self, q: u64, n: usize) -> Result<usize> {
        let mut len: u128 = 1;
        for _ in 0..n {
            len = len
                .checked_mul(q as u128)
                .ok_or(Error::BudgetExceeded { needed: u128::MAX, budget: self.max_cells as u128 })?;
            if len > self.max_cells as u128 {
                return Err(Error::BudgetExceeded { needed: len, budget: self.max_cells as u128 });
            }
        }
        Ok(len as usize)
    }

    pub fn check(&self, needed: u64) -> Result<()> {
        if needed as u128 > self.max_cells as u128 {
            return Err(Error::BudgetExceeded { needed: needed as u128, budget: self.max_cells as u128 });
        }
        Ok(())
    }
}

impl Default for Budget {
    /// Default of 2^24 cells: enough for every grid this crate verifies
    /// (`19^4`, `3^8`, `7^5`) with headroom, small enough to catch mistakes.
    fn default() -> Self {
        Budget::new(1 << 24)
    }
}

/// Base relative tolerance for floating-point identity checks.
pub const REL_TOL: f64 = 1e-9;

/// Absolute tolerance for a sum of `terms` unit-scale summands.
pub fn sum_tol(terms: usize) -> f64 {
    REL_TOL * (terms.max(1) as f64)
}

/// `|a - b|` small relative to the magnitudes involved and the number of
/// summed terms that produced them.
pub fn close_c(a: num_complex::Complex64, b: num_complex::Complex64, terms: usize) -> bool {
    let scale = a.norm().max(b.norm()).max(1.0);
    (a - b).norm() <= sum_tol(terms) * scale
}

pub fn close_f(a: f64, b: f64, terms: usize) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= sum_tol(terms) * scale
}
