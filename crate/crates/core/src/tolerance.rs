use crate::error::{DaeError, Result};

/// Numerical thresholds shared by every stage of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TolerancePolicy {
    /// Singular values at or below `rank_rel_tol * sigma_max` count as zero.
    pub rank_rel_tol: f64,
    /// Absolute threshold for "this matrix identity holds" (norm-scaled by callers).
    pub zero_abs_tol: f64,
    /// Constraint slack accepted from the LP kernel.
    pub feasibility_tol: f64,
    /// Max-norm bound on `Gamma V(0)` for an initial star to count as consistent.
    pub consistency_tol: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            rank_rel_tol: 1e-9,
            zero_abs_tol: 1e-10,
            feasibility_tol: 1e-9,
            consistency_tol: 1e-8,
        }
    }
}

impl TolerancePolicy {
    pub fn new(
        rank_rel_tol: f64,
        zero_abs_tol: f64,
        feasibility_tol: f64,
        consistency_tol: f64,
    ) -> Result<Self> {
        let policy = TolerancePolicy {
            rank_rel_tol,
            zero_abs_tol,
            feasibility_tol,
            consistency_tol,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rank_rel_tol", self.rank_rel_tol),
            ("zero_abs_tol", self.zero_abs_tol),
            ("feasibility_tol", self.feasibility_tol),
            ("consistency_tol", self.consistency_tol),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value < 1.0) {
                return Err(DaeError::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_consistency_tol(mut self, tol: f64) -> Result<Self> {
        self.consistency_tol = tol;
        self.validate()?;
        Ok(self)
    }
}
