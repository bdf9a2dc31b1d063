//! Global tolerance record.
//!
//! Every structural check in the crate reads its threshold from one
//! [`Tolerances`] value instead of scattering magic numbers. The defaults are
//! the accuracy contracts the test suites pin; callers (notably the CLI) may
//! override individual fields by name.

/// Named numerical thresholds used across the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Kernel accuracy contract for `expm` and the SPD square root (1e-12).
    pub kernel: f64,
    /// Structural validation: symmetry, skewness, compatibility residual,
    /// `J^2 = -I`, tangency of initial data (1e-10).
    pub structural: f64,
    /// Eigenvalue floor below which a nominally SPD matrix is rejected.
    pub spd_floor: f64,
    /// Relative agreement between the two volume densities det(g)^{1/2} and
    /// |Pf(omega)|, and between Pf^2 and det.
    pub volume_rel: f64,
    /// Monitored residual bound along trajectories; exceeding it flags a row.
    pub drift: f64,
    /// Hard bound on constraint residuals after an accepted integrator step.
    pub step_breach: f64,
    /// Frame determinant floor in seeded generation.
    pub frame_det_floor: f64,
    /// Agreement between the closed-form right-hand side and the stacked
    /// least-squares solution.
    pub oracle: f64,
    /// Residual bound for the stacked least-squares solve itself.
    pub lsq_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            kernel: 1e-12,
            structural: 1e-10,
            spd_floor: 1e-12,
            volume_rel: 1e-9,
            drift: 1e-8,
            step_breach: 1e-6,
            frame_det_floor: 1e-6,
            oracle: 1e-9,
            lsq_residual: 1e-10,
        }
    }
}

impl Tolerances {
    /// Overrides fields by name. Unknown names are reported back so callers
    /// can reject typos instead of silently ignoring them.
    pub fn apply_overrides<'a, I>(&mut self, overrides: I) -> Vec<String>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut unknown = Vec::new();
        for (name, value) in overrides {
            match name {
                "kernel" => self.kernel = value,
                "structural" => self.structural = value,
                "spd_floor" => self.spd_floor = value,
                "volume_rel" => self.volume_rel = value,
                "drift" => self.drift = value,
                "step_breach" => self.step_breach = value,
                "frame_det_floor" => self.frame_det_floor = value,
                "oracle" => self.oracle = value,
                "lsq_residual" => self.lsq_residual = value,
                other => unknown.push(other.to_string()),
            }
        }
        unknown
    }
}
