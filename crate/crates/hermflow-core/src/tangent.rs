//! Tangent vectors at a fiber, the tangency condition, the four-way
//! splitting, and the projectors onto the tangent and normal subspaces.
//!
//! Tangent vectors are stored in right-translated form `(H, A)` with
//! `H = g^-1 h` and `A = omega^-1 alpha`; conversions from the ambient
//! symmetric/skew representation happen at the boundary.

use crate::error::{Error, Result};
use crate::fiber::HermitianPair;
use crate::matrix::{comm_split, SquareMatrix};
use crate::tol::Tolerances;

/// Right-translated tangent vector anchored at a fiber point.
#[derive(Debug, Clone)]
pub struct TangentPair {
    anchor: HermitianPair,
    h_cap: SquareMatrix,
    a_cap: SquareMatrix,
}

/// The four-way decomposition of an ambient tangent vector. `n1 + n2 + n3`
/// spans the tangent space of the structure space, `n4` its orthogonal
/// complement.
#[derive(Debug, Clone)]
pub struct SplitComponents {
    pub n1: TangentPair,
    pub n2: TangentPair,
    pub n3: TangentPair,
    pub n4: TangentPair,
}

impl TangentPair {
    /// Builds the right-translated representation `(g^-1 h, omega^-1 alpha)`
    /// from an ambient symmetric tensor and 2-form.
    pub fn from_ambient(
        anchor: &HermitianPair,
        h: &SquareMatrix,
        alpha: &SquareMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let scale_h = h.frob_norm().max(1.0);
        if h.symmetry_residual() > tol.structural * scale_h {
            return Err(Error::InvalidInput(format!(
                "tangent: h not symmetric, residual {:.3e}",
                h.symmetry_residual()
            )));
        }
        let scale_a = alpha.frob_norm().max(1.0);
        if alpha.skewness_residual() > tol.structural * scale_a {
            return Err(Error::InvalidInput(format!(
                "tangent: alpha not skew, residual {:.3e}",
                alpha.skewness_residual()
            )));
        }
        let h_cap = anchor
            .metric()
            .solve(h)
            .map_err(|_| Error::DegenerateInput("tangent: singular metric".into()))?;
        let a_cap = anchor
            .form()
            .solve(alpha)
            .map_err(|_| Error::DegenerateInput("tangent: singular 2-form".into()))?;
        Ok(Self { anchor: anchor.clone(), h_cap, a_cap })
    }

    /// Wraps pre-translated caps, validating that `g H` is symmetric and
    /// `omega A` is skew.
    pub fn from_caps(
        anchor: &HermitianPair,
        h_cap: SquareMatrix,
        a_cap: SquareMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let gh = anchor.metric().mul(&h_cap);
        let scale_h = gh.frob_norm().max(1.0);
        if gh.symmetry_residual() > tol.structural * scale_h {
            return Err(Error::InvalidInput(format!(
                "tangent: g*H not symmetric, residual {:.3e}",
                gh.symmetry_residual()
            )));
        }
        let oa = anchor.form().mul(&a_cap);
        let scale_a = oa.frob_norm().max(1.0);
        if oa.skewness_residual() > tol.structural * scale_a {
            return Err(Error::InvalidInput(format!(
                "tangent: omega*A not skew, residual {:.3e}",
                oa.skewness_residual()
            )));
        }
        Ok(Self { anchor: anchor.clone(), h_cap, a_cap })
    }

    pub fn zero(anchor: &HermitianPair) -> Self {
        let n = anchor.dim();
        Self {
            anchor: anchor.clone(),
            h_cap: SquareMatrix::zeros(n),
            a_cap: SquareMatrix::zeros(n),
        }
    }

    pub fn anchor(&self) -> &HermitianPair {
        &self.anchor
    }

    pub fn h_cap(&self) -> &SquareMatrix {
        &self.h_cap
    }

    pub fn a_cap(&self) -> &SquareMatrix {
        &self.a_cap
    }

    pub fn norm(&self) -> f64 {
        (self.h_cap.frob_norm().powi(2) + self.a_cap.frob_norm().powi(2)).sqrt()
    }

    /// `R = J H + H J - J A - A J`; zero exactly when the vector is tangent
    /// to the space of compatible pairs.
    pub fn tangency_residual(&self) -> SquareMatrix {
        tangency_residual_raw(self.anchor.acs(), &self.h_cap, &self.a_cap)
    }

    /// Splits into the four components. With `(H_c, H_a)` and `(A_c, A_a)`
    /// the commutant splits of the caps:
    /// `n1 = (H_a, 0)`, `n2 = (0, A_a)`,
    /// `n3 = ((H_c + A_c)/2, (H_c + A_c)/2)`,
    /// `n4 = ((H_c - A_c)/2, -(H_c - A_c)/2)`.
    pub fn split4(&self, tol: &Tolerances) -> Result<SplitComponents> {
        let n = self.anchor.dim();
        let j = self.anchor.acs();
        let (h_c, h_a) = comm_split(j, &self.h_cap, tol)?;
        let (a_c, a_a) = comm_split(j, &self.a_cap, tol)?;
        let mean = h_c.add(&a_c).scale(0.5);
        let diff = h_c.sub(&a_c).scale(0.5);
        let zero = SquareMatrix::zeros(n);
        let wrap = |h: SquareMatrix, a: SquareMatrix| TangentPair {
            anchor: self.anchor.clone(),
            h_cap: h,
            a_cap: a,
        };
        Ok(SplitComponents {
            n1: wrap(h_a, zero.clone()),
            n2: wrap(zero, a_a),
            n3: wrap(mean.clone(), mean),
            n4: wrap(diff.clone(), diff.scale(-1.0)),
        })
    }

    /// Orthogonal projection onto the tangent space:
    /// `((3H + JHJ + A - JAJ)/4, (3A + JAJ + H - JHJ)/4)`.
    pub fn project_tangent(&self) -> TangentPair {
        let j = self.anchor.acs();
        let jhj = j.mul(&self.h_cap).mul(j);
        let jaj = j.mul(&self.a_cap).mul(j);
        let h = self
            .h_cap
            .scale(3.0)
            .add(&jhj)
            .add(&self.a_cap)
            .sub(&jaj)
            .scale(0.25);
        let a = self
            .a_cap
            .scale(3.0)
            .add(&jaj)
            .add(&self.h_cap)
            .sub(&jhj)
            .scale(0.25);
        TangentPair { anchor: self.anchor.clone(), h_cap: h, a_cap: a }
    }

    /// Orthogonal projection onto the normal complement:
    /// `((H - JHJ - A + JAJ)/4, (A - JAJ - H + JHJ)/4)`.
    pub fn project_normal(&self) -> TangentPair {
        let j = self.anchor.acs();
        let jhj = j.mul(&self.h_cap).mul(j);
        let jaj = j.mul(&self.a_cap).mul(j);
        let h = self
            .h_cap
            .sub(&jhj)
            .sub(&self.a_cap)
            .add(&jaj)
            .scale(0.25);
        let a = self
            .a_cap
            .sub(&jaj)
            .sub(&self.h_cap)
            .add(&jhj)
            .scale(0.25);
        TangentPair { anchor: self.anchor.clone(), h_cap: h, a_cap: a }
    }

    pub fn add(&self, other: &TangentPair) -> TangentPair {
        TangentPair {
            anchor: self.anchor.clone(),
            h_cap: self.h_cap.add(&other.h_cap),
            a_cap: self.a_cap.add(&other.a_cap),
        }
    }

    pub fn sub(&self, other: &TangentPair) -> TangentPair {
        TangentPair {
            anchor: self.anchor.clone(),
            h_cap: self.h_cap.sub(&other.h_cap),
            a_cap: self.a_cap.sub(&other.a_cap),
        }
    }

    pub fn scale(&self, s: f64) -> TangentPair {
        TangentPair {
            anchor: self.anchor.clone(),
            h_cap: self.h_cap.scale(s),
            a_cap: self.a_cap.scale(s),
        }
    }
}

/// Tangency residual in raw matrices, shared with the geodesic engine.
pub(crate) fn tangency_residual_raw(
    j: &SquareMatrix,
    h_cap: &SquareMatrix,
    a_cap: &SquareMatrix,
) -> SquareMatrix {
    j.mul(h_cap)
        .add(&h_cap.mul(j))
        .sub(&j.mul(a_cap))
        .sub(&a_cap.mul(j))
}

/// Fiber inner product `tr(H1 H2) + tr(A1 A2)` of two vectors anchored at
/// the same point. A pseudometric on the ambient space; nondegenerate (not
/// asserted definite) on the tangent subspace.
pub fn fiber_inner(t1: &TangentPair, t2: &TangentPair) -> Result<f64> {
    let same = t1.anchor.dim() == t2.anchor.dim()
        && t1.anchor.metric().sub(t2.anchor.metric()).max_abs() == 0.0
        && t1.anchor.form().sub(t2.anchor.form()).max_abs() == 0.0;
    if !same {
        return Err(Error::InvalidInput(
            "fiber_inner: vectors anchored at different fiber points".into(),
        ));
    }
    Ok(t1.h_cap.trace_mul(&t2.h_cap) + t1.a_cap.trace_mul(&t2.a_cap))
}

/// Draws a random ambient tangent vector (symmetrized / antisymmetrized
/// uniform entries, scaled) at the given anchor.
pub fn random_ambient(
    anchor: &HermitianPair,
    rng: &mut crate::rng::SplitMix64,
    scale: f64,
    tol: &Tolerances,
) -> Result<TangentPair> {
    let n = anchor.dim();
    let h = SquareMatrix::random_uniform(n, rng).sym_part().scale(scale);
    let alpha = SquareMatrix::random_uniform(n, rng).skew_part().scale(scale);
    TangentPair::from_ambient(anchor, &h, &alpha, tol)
}
