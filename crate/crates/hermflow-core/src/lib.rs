//! Fiberwise geometry of compatible metric / 2-form pairs.
//!
//! The crate models, at a single fiber of desk scale, the geometry of the
//! space of pairs `(g, omega)` whose composite `J = g^-1 omega` is an almost
//! complex structure: construction and validation, the tangent-space
//! splitting with its projectors, the constrained geodesic flow with
//! conservation-law monitoring, the frame-curve variational checks, and
//! weighted sample fields standing in for a base manifold.

pub mod error;
pub mod fiber;
pub mod field;
pub mod geodesic;
pub mod matrix;
pub mod rng;
pub mod tangent;
pub mod tol;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
pub use fiber::{canonical_compatible, compatibility_residual, random_pair, HermitianPair};
pub use field::{global_energy, FieldPoint, SampledField};
pub use geodesic::{
    conformal_geodesic, fixed_g_geodesic, fixed_omega_geodesic, geodesic_rhs, integrate,
    observables, projected_equation_residuals, rhs_oracle_lsq, step_rk4, GeodesicState,
    InitialData, MonitorRecord, Trajectory,
};
pub use matrix::{comm_split, expm, pfaffian, sqrtm_spd, SquareMatrix};
pub use rng::SplitMix64;
pub use tangent::{fiber_inner, SplitComponents, TangentPair};
pub use tol::Tolerances;
pub use variational::{
    criticality_probe, energy_curve, energy_frame_curve, equivalence_residual,
    first_variation_integrand, first_variation_probe, DiscreteCurve, FrameJet, ProbeReport,
    Quadrature,
};
