//! Compatible (metric, 2-form) pairs at a single fiber.
//!
//! A pair is compatible when the endomorphism `J = g^-1 omega` squares to
//! minus the identity; the equivalent residual form used for validation is
//! `F(g, omega) = g^-1 omega + omega^-1 g`. Construction validates, the polar
//! retraction repairs nearby pairs, and seeded generation produces pairs by
//! pulling the standard structure back along random frames.

use crate::error::{Error, Result};
use crate::matrix::{self, SquareMatrix};
use crate::rng::SplitMix64;
use crate::tol::Tolerances;

/// Validated compatible pair with the cached endomorphism `J = g^-1 omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPair {
    g: SquareMatrix,
    omega: SquareMatrix,
    j: SquareMatrix,
}

/// `F(g, omega) = g^-1 omega + omega^-1 g`; zero exactly on compatible pairs.
pub fn compatibility_residual(g: &SquareMatrix, omega: &SquareMatrix) -> Result<SquareMatrix> {
    let g_inv_om = g
        .solve(omega)
        .map_err(|_| Error::DegenerateInput("compatibility residual: singular metric".into()))?;
    let om_inv_g = omega
        .solve(g)
        .map_err(|_| Error::DegenerateInput("compatibility residual: singular 2-form".into()))?;
    Ok(g_inv_om.add(&om_inv_g))
}

impl HermitianPair {
    /// Validates every pair invariant under the default tolerances.
    pub fn new(g: SquareMatrix, omega: SquareMatrix) -> Result<Self> {
        Self::new_with(g, omega, &Tolerances::default())
    }

    /// Validates the pair invariants:
    /// symmetric positive definite metric, invertible skew 2-form,
    /// compatibility residual, `J^2 = -I`, and equality of the two volume
    /// densities.
    pub fn new_with(g: SquareMatrix, omega: SquareMatrix, tol: &Tolerances) -> Result<Self> {
        if g.dim() != omega.dim() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: metric {} vs 2-form {}",
                g.dim(),
                omega.dim()
            )));
        }
        if !g.is_finite() || !omega.is_finite() {
            return Err(Error::InvalidInput("non-finite entry in pair".into()));
        }
        let g_scale = g.frob_norm().max(1.0);
        let sym = g.symmetry_residual();
        if sym > tol.structural * g_scale {
            return Err(Error::CompatibilityViolation {
                invariant: "metric symmetric",
                residual: sym,
            });
        }
        let (eigs, _) = g.sym_eigen();
        if eigs[0] <= tol.spd_floor {
            return Err(Error::CompatibilityViolation {
                invariant: "metric positive definite",
                residual: eigs[0],
            });
        }
        let om_scale = omega.frob_norm().max(1.0);
        let skew = omega.skewness_residual();
        if skew > tol.structural * om_scale {
            return Err(Error::CompatibilityViolation {
                invariant: "2-form skew-symmetric",
                residual: skew,
            });
        }
        let det_om = omega.det();
        if det_om.abs() <= tol.spd_floor {
            return Err(Error::CompatibilityViolation {
                invariant: "2-form nondegenerate",
                residual: det_om,
            });
        }
        let compat = compatibility_residual(&g, &omega)?;
        let compat_norm = compat.frob_norm();
        if compat_norm > tol.structural * g_scale.max(om_scale) {
            return Err(Error::CompatibilityViolation {
                invariant: "compatibility residual",
                residual: compat_norm,
            });
        }
        let j = g
            .solve(&omega)
            .map_err(|_| Error::DegenerateInput("pair: singular metric".into()))?;
        let jj = j
            .mul(&j)
            .add(&SquareMatrix::identity(g.dim()))
            .frob_norm();
        if jj > tol.structural * j.frob_norm().max(1.0).powi(2) {
            return Err(Error::CompatibilityViolation {
                invariant: "J squares to -I",
                residual: jj,
            });
        }
        let det_g = g.det();
        if (det_g - det_om).abs() > tol.volume_rel * det_g.abs().max(1.0) {
            return Err(Error::CompatibilityViolation {
                invariant: "volume equality det(g) = det(omega)",
                residual: (det_g - det_om).abs(),
            });
        }
        Ok(Self { g, omega, j })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn metric(&self) -> &SquareMatrix {
        &self.g
    }

    pub fn form(&self) -> &SquareMatrix {
        &self.omega
    }

    /// Cached endomorphism `J = g^-1 omega`.
    pub fn acs(&self) -> &SquareMatrix {
        &self.j
    }

    /// The standard fiber: identity metric and block symplectic form.
    pub fn standard(n: usize) -> Self {
        Self::new(SquareMatrix::identity(n), SquareMatrix::std_symplectic(n))
            .expect("standard pair is compatible")
    }

    /// Pullback of both bilinear forms along an invertible frame:
    /// `(f^T g f, f^T omega f)`. Compatibility is preserved exactly.
    pub fn pullback(&self, frame: &SquareMatrix, tol: &Tolerances) -> Result<Self> {
        if frame.det().abs() <= tol.frame_det_floor * 1e-4 {
            return Err(Error::DegenerateInput("pullback: near-singular frame".into()));
        }
        let ft = frame.transpose();
        Self::new_with(ft.mul(&self.g).mul(frame), ft.mul(&self.omega).mul(frame), tol)
    }

    /// Volume densities `(det(g)^{1/2}, |Pf(omega)|)`; they agree on valid
    /// pairs up to the relative volume tolerance.
    pub fn vol_density(&self, tol: &Tolerances) -> Result<(f64, f64)> {
        let vol_g = self.g.det().sqrt();
        let vol_om = matrix::pfaffian(&self.omega, tol)?.abs();
        Ok((vol_g, vol_om))
    }
}

/// Polar retraction: keeps `g`, replaces `omega` by the 2-form of the nearest
/// compatible structure. With `A = g^-1 omega` and the g-symmetric positive
/// definite `S = -A A`, the output is `(g, g J)` where `J = A S^{-1/2}`.
/// Idempotent, and the identity on pairs that are already compatible.
pub fn canonical_compatible(
    g: &SquareMatrix,
    omega: &SquareMatrix,
    tol: &Tolerances,
) -> Result<HermitianPair> {
    let n = g.dim();
    let g_scale = g.frob_norm().max(1.0);
    if g.symmetry_residual() > tol.structural * g_scale {
        return Err(Error::InvalidInput("canonical_compatible: metric not symmetric".into()));
    }
    if omega.skewness_residual() > tol.structural * omega.frob_norm().max(1.0) {
        return Err(Error::InvalidInput(
            "canonical_compatible: 2-form not skew-symmetric".into(),
        ));
    }
    let g_half = matrix::sqrtm_spd(g, tol)?;
    let g_half_inv = g_half
        .inverse()
        .map_err(|_| Error::DegenerateInput("canonical_compatible: singular metric root".into()))?;
    let a = g
        .solve(omega)
        .map_err(|_| Error::DegenerateInput("canonical_compatible: singular metric".into()))?;
    // b = g^{1/2} A g^{-1/2} is plain skew; t = -b^2 = b^T b is symmetric PSD.
    let b = g_half.mul(&a).mul(&g_half_inv);
    let t = b.mul(&b).scale(-1.0);
    let t_inv_sqrt = matrix::inv_sqrtm_spd(&t, tol).map_err(|_| {
        Error::DegenerateInput(
            "canonical_compatible: 2-form too degenerate relative to the metric".into(),
        )
    })?;
    let s_inv_sqrt = g_half_inv.mul(&t_inv_sqrt).mul(&g_half);
    let j = a.mul(&s_inv_sqrt);
    let omega_new = g.mul(&j);
    let _ = n;
    HermitianPair::new_with(g.clone(), omega_new, tol)
}

/// Draws a compatible pair by pulling the standard structure back along the
/// random frame `f = I + spread * U` with `U` entrywise uniform in [-1, 1].
/// Retries (bounded at 100 attempts) until the frame determinant clears the
/// floor and the pulled-back pair passes validation; a frame near the
/// determinant floor can be ill-conditioned enough for rounding to push the
/// compatibility residual over its tolerance, and such draws are skipped.
/// Returns the pair together with the frame that produced it.
pub fn random_pair(
    seed: u64,
    n: usize,
    spread: f64,
    tol: &Tolerances,
) -> Result<(HermitianPair, SquareMatrix)> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "random_pair: dimension must be even and >= 2, got {n}"
        )));
    }
    if spread < 0.0 {
        return Err(Error::InvalidInput("random_pair: spread must be >= 0".into()));
    }
    let mut rng = SplitMix64::new(seed);
    for _ in 0..100 {
        let frame = SquareMatrix::identity(n)
            .add(&SquareMatrix::random_uniform(n, &mut rng).scale(spread));
        if frame.det() <= tol.frame_det_floor {
            continue;
        }
        if let Ok(pair) = HermitianPair::standard(n).pullback(&frame, tol) {
            return Ok((pair, frame));
        }
    }
    Err(Error::GenerationFailure(format!(
        "random_pair: no usable frame in 100 attempts (seed {seed}, spread {spread})"
    )))
}
