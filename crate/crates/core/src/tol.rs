use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative rank cutoff: singular values below tau_rank times the largest
/// singular value of the operand are treated as zero.
pub const DEFAULT_TAU_RANK: f64 = 1e-10;

/// Relative eigenvalue clustering radius, also the genericity margin for
/// distance of the spectrum from the bad axis (real axis in CR mode,
/// imaginary axis in Lagrangian mode).
pub const DEFAULT_TAU_EIG: f64 = 1e-7;

/// Relative residual bound for verified identities (K^2 = -Id and friends).
pub const DEFAULT_TAU_VERIFY: f64 = 1e-8;

/// The three working tolerances. Every threshold in the crate is relative:
/// a tolerance is always multiplied by the natural scale (largest singular
/// value) of the operand it guards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tau_rank: f64,
    pub tau_eig: f64,
    pub tau_verify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tau_rank: DEFAULT_TAU_RANK,
            tau_eig: DEFAULT_TAU_EIG,
            tau_verify: DEFAULT_TAU_VERIFY,
        }
    }
}

impl Tolerances {
    pub fn new(tau_rank: f64, tau_eig: f64, tau_verify: f64) -> Result<Self> {
        let t = Tolerances { tau_rank, tau_eig, tau_verify };
        t.validate()?;
        Ok(t)
    }

    /// tau_verify >= tau_rank is required: an identity cannot be verified
    /// more tightly than ranks are decided.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_rank", self.tau_rank),
            ("tau_eig", self.tau_eig),
            ("tau_verify", self.tau_verify),
        ] {
            if !(v.is_finite() && v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in (0, 1), got {v:e}"
                )));
            }
        }
        if self.tau_verify < self.tau_rank {
            return Err(Error::InvalidInput(format!(
                "tau_verify ({:e}) must be >= tau_rank ({:e})",
                self.tau_verify, self.tau_rank
            )));
        }
        Ok(())
    }
}
