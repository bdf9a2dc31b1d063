//! Frame-curve parameterization and the variational side of the geodesic
//! equation.
//!
//! Compatible pairs are parameterized as pullbacks `(f^T g0 f, f^T omega0 f)`
//! of a fixed anchor along invertible frames. A [`FrameJet`] carries a frame
//! with its first two time derivatives, enough to evaluate velocities,
//! accelerations, and the first-variation integrand of the energy functional
//! analytically. [`DiscreteCurve`] plus the energy quadrature and the
//! finite-difference criticality probe close the loop against the integrator.

use crate::error::{Error, Result};
use crate::fiber::{canonical_compatible, HermitianPair};
use crate::geodesic::Trajectory;
use crate::matrix::{expm, SquareMatrix};
use crate::rng::SplitMix64;
use crate::tol::Tolerances;

/// Time quadrature rule for curve energies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Trapezoid,
    /// Composite Simpson; a trailing trapezoid panel absorbs an odd
    /// interval count.
    Simpson,
}

/// A frame with its 2-jet, anchored at a fixed compatible pair.
#[derive(Debug, Clone)]
pub struct FrameJet {
    anchor: HermitianPair,
    f: SquareMatrix,
    f_t: SquareMatrix,
    f_tt: SquareMatrix,
}

impl FrameJet {
    pub fn new(
        anchor: HermitianPair,
        f: SquareMatrix,
        f_t: SquareMatrix,
        f_tt: SquareMatrix,
    ) -> Result<Self> {
        let n = anchor.dim();
        if f.dim() != n || f_t.dim() != n || f_tt.dim() != n {
            return Err(Error::InvalidInput("frame jet: dimension mismatch".into()));
        }
        if !(f.is_finite() && f_t.is_finite() && f_tt.is_finite()) {
            return Err(Error::InvalidInput("frame jet: non-finite entry".into()));
        }
        if f.det() <= 1e-10 {
            return Err(Error::DegenerateInput(format!(
                "frame jet: det(f) = {:.3e} below floor",
                f.det()
            )));
        }
        Ok(Self { anchor, f, f_t, f_tt })
    }

    pub fn anchor(&self) -> &HermitianPair {
        &self.anchor
    }

    pub fn frame(&self) -> &SquareMatrix {
        &self.f
    }

    pub fn frame_t(&self) -> &SquareMatrix {
        &self.f_t
    }

    pub fn frame_tt(&self) -> &SquareMatrix {
        &self.f_tt
    }

    /// Pullback of the anchor along the frame: `(f^T g0 f, f^T omega0 f)`.
    /// Compatibility is preserved exactly, so the result always validates.
    pub fn push(&self, tol: &Tolerances) -> Result<HermitianPair> {
        self.anchor.pullback(&self.f, tol)
    }

    /// Right-translated velocities of the pushed curve and its structure:
    /// `X = f^-1 (g0^-1 P^T g0 + P) f` with `P = f_t f^-1`, the analogous
    /// `W`, and `J = f^-1 J0 f`.
    pub fn velocity(&self) -> Result<(SquareMatrix, SquareMatrix, SquareMatrix)> {
        let f_inv = self
            .f
            .inverse()
            .map_err(|_| Error::DegenerateInput("frame jet: singular frame".into()))?;
        let p = self.f_t.mul(&f_inv);
        let kg = conj_transpose(self.anchor.metric(), &p)?;
        let kw = conj_transpose(self.anchor.form(), &p)?;
        let x = f_inv.mul(&kg.add(&p)).mul(&self.f);
        let w = f_inv.mul(&kw.add(&p)).mul(&self.f);
        let j = f_inv.mul(self.anchor.acs()).mul(&self.f);
        Ok((x, w, j))
    }

    /// Analytic accelerations `(X_t, W_t)` of the pushed curve, obtained by
    /// differentiating the velocity formulas in `(f, f_t, f_tt)`.
    pub fn acceleration(&self) -> Result<(SquareMatrix, SquareMatrix)> {
        let f_inv = self
            .f
            .inverse()
            .map_err(|_| Error::DegenerateInput("frame jet: singular frame".into()))?;
        let p = self.f_t.mul(&f_inv);
        let q = self.f_tt.mul(&f_inv);
        let p_sq = p.mul(&p);
        let pt_sq = p.transpose().mul(&p.transpose());
        let d_right = q.sub(&p_sq);

        let accel = |b: &SquareMatrix| -> Result<SquareMatrix> {
            let k = conj_transpose(b, &p)?;
            let m = k.add(&p);
            let dk = conj(b, &q.transpose().sub(&pt_sq))?;
            let m_t = dk.add(&d_right);
            let bracket = m.mul(&p).sub(&p.mul(&m));
            Ok(f_inv.mul(&m_t.add(&bracket)).mul(&self.f))
        };
        Ok((accel(self.anchor.metric())?, accel(self.anchor.form())?))
    }
}

/// `b^-1 p^T b`.
fn conj_transpose(b: &SquareMatrix, p: &SquareMatrix) -> Result<SquareMatrix> {
    conj(b, &p.transpose())
}

/// `b^-1 m b`.
fn conj(b: &SquareMatrix, m: &SquareMatrix) -> Result<SquareMatrix> {
    b.solve(&m.mul(b))
        .map_err(|_| Error::DegenerateInput("singular bilinear form".into()))
}

/// The first-variation integrand of the curve energy, term by term as a
/// function of `(f, f_t, f_tt)` at the anchor: one ten-term half per
/// bilinear form, summed over the metric and the 2-form.
pub fn first_variation_integrand(jet: &FrameJet) -> Result<SquareMatrix> {
    let n = jet.anchor.dim();
    let f_inv = jet
        .f
        .inverse()
        .map_err(|_| Error::DegenerateInput("variation integrand: singular frame".into()))?;
    let p = jet.f_t.mul(&f_inv);
    let q = jet.f_tt.mul(&f_inv);
    let id = SquareMatrix::identity(n);
    let tr_p = p.trace();

    let half = |b: &SquareMatrix| -> Result<SquareMatrix> {
        let k = conj_transpose(b, &p)?;
        let qq = conj_transpose(b, &q)?;
        Ok(q
            .scale(-2.0)
            .sub(&qq.scale(2.0))
            .add(&p.mul(&p).scale(2.0))
            .sub(&p.scale(2.0 * tr_p))
            .add(&id.scale(p.trace_mul(&p)))
            .sub(&k.mul(&p).scale(2.0))
            .add(&k.mul(&k).scale(2.0))
            .add(&p.mul(&k).scale(2.0))
            .sub(&k.scale(2.0 * tr_p))
            .add(&id.scale(k.trace_mul(&p))))
    };

    Ok(half(jet.anchor.metric())?.add(&half(jet.anchor.form())?))
}

/// Both sides of the frame-to-flow comparison: the conjugated variation
/// integrand `f^-1 E f` and the sum-rule residual
/// `X_t + W_t + tr(X)X/2 + tr(W)W/2 - (tr X^2 + tr W^2) I / 4`
/// evaluated from the same jet. The two are proportional by one constant
/// across all jets; the constant is measured by tests, not assumed.
pub fn equivalence_residual(jet: &FrameJet) -> Result<(SquareMatrix, SquareMatrix)> {
    let e = first_variation_integrand(jet)?;
    let f_inv = jet
        .f
        .inverse()
        .map_err(|_| Error::DegenerateInput("equivalence: singular frame".into()))?;
    let lhs = f_inv.mul(&e).mul(&jet.f);

    let (x, w, _) = jet.velocity()?;
    let (xt, wt) = jet.acceleration()?;
    let n = jet.anchor.dim();
    let rhs = xt
        .add(&wt)
        .add(&x.scale(0.5 * x.trace()))
        .add(&w.scale(0.5 * w.trace()))
        .sub(&SquareMatrix::identity(n).scale(0.25 * (x.trace_mul(&x) + w.trace_mul(&w))));
    Ok((lhs, rhs))
}

/// A sampled curve of pairs on a uniform time grid. Velocities are either
/// supplied analytically or estimated by second-order differences on the
/// grid.
#[derive(Debug, Clone)]
pub struct DiscreteCurve {
    times: Vec<f64>,
    knots: Vec<HermitianPair>,
    velocities: Option<Vec<(SquareMatrix, SquareMatrix)>>,
    rule: Quadrature,
    reference_metric: SquareMatrix,
}

impl DiscreteCurve {
    pub fn from_pairs(
        t_start: f64,
        t_end: f64,
        knots: Vec<HermitianPair>,
        rule: Quadrature,
    ) -> Result<Self> {
        Self::build(t_start, t_end, knots, None, rule)
    }

    /// Pairs with analytic ambient velocities `(g_t, omega_t)` per knot.
    pub fn from_pairs_with_velocities(
        t_start: f64,
        t_end: f64,
        knots: Vec<HermitianPair>,
        velocities: Vec<(SquareMatrix, SquareMatrix)>,
        rule: Quadrature,
    ) -> Result<Self> {
        if velocities.len() != knots.len() {
            return Err(Error::InvalidInput(
                "discrete curve: one velocity per knot required".into(),
            ));
        }
        Self::build(t_start, t_end, knots, Some(velocities), rule)
    }

    /// Pushes a knot sequence of frame jets; velocities come from the jets,
    /// so downstream energies are exact in the frame data.
    pub fn from_frames(
        t_start: f64,
        t_end: f64,
        jets: &[FrameJet],
        rule: Quadrature,
        tol: &Tolerances,
    ) -> Result<Self> {
        let mut knots = Vec::with_capacity(jets.len());
        let mut velocities = Vec::with_capacity(jets.len());
        let mut reference = None;
        for jet in jets {
            let pair = jet.push(tol)?;
            let ft = jet.frame().transpose();
            let g_t = jet
                .frame_t()
                .transpose()
                .mul(jet.anchor().metric())
                .mul(jet.frame())
                .add(&ft.mul(jet.anchor().metric()).mul(jet.frame_t()));
            let om_t = jet
                .frame_t()
                .transpose()
                .mul(jet.anchor().form())
                .mul(jet.frame())
                .add(&ft.mul(jet.anchor().form()).mul(jet.frame_t()));
            reference.get_or_insert_with(|| jet.anchor().metric().clone());
            knots.push(pair);
            velocities.push((g_t, om_t));
        }
        let mut curve = Self::build(t_start, t_end, knots, Some(velocities), rule)?;
        if let Some(g0) = reference {
            curve.reference_metric = g0;
        }
        Ok(curve)
    }

    /// Wraps an integrator trajectory; the trajectory's right-translated
    /// velocities supply exact ambient derivatives.
    pub fn from_trajectory(traj: &Trajectory, rule: Quadrature) -> Result<Self> {
        let times = traj.times();
        if times.len() < 3 {
            return Err(Error::InvalidInput("discrete curve: need at least 3 knots".into()));
        }
        let h = times[1] - times[0];
        for w in times.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::GridMismatch(
                    "trajectory grid is not uniform; integrate with dt dividing t_end".into(),
                ));
            }
        }
        let knots: Vec<HermitianPair> = traj.states().iter().map(|s| s.pair().clone()).collect();
        let velocities: Vec<(SquareMatrix, SquareMatrix)> = traj
            .states()
            .iter()
            .map(|s| {
                (
                    s.pair().metric().mul(s.x_vel()),
                    s.pair().form().mul(s.w_vel()),
                )
            })
            .collect();
        Self::build(
            times[0],
            *times.last().unwrap(),
            knots,
            Some(velocities),
            rule,
        )
    }

    fn build(
        t_start: f64,
        t_end: f64,
        knots: Vec<HermitianPair>,
        velocities: Option<Vec<(SquareMatrix, SquareMatrix)>>,
        rule: Quadrature,
    ) -> Result<Self> {
        if knots.len() < 3 {
            return Err(Error::InvalidInput("discrete curve: need at least 3 knots".into()));
        }
        if t_end <= t_start {
            return Err(Error::InvalidInput("discrete curve: empty time interval".into()));
        }
        let m = knots.len();
        let h = (t_end - t_start) / (m - 1) as f64;
        let times: Vec<f64> = (0..m).map(|k| t_start + k as f64 * h).collect();
        let reference_metric = knots[0].metric().clone();
        Ok(Self { times, knots, velocities, rule, reference_metric })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn knots(&self) -> &[HermitianPair] {
        &self.knots
    }

    pub fn rule(&self) -> Quadrature {
        self.rule
    }

    fn spacing(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Ambient velocity at knot `k`: stored analytic value, or second-order
    /// differences (central inside, one-sided at the ends).
    fn velocity_at(&self, k: usize) -> (SquareMatrix, SquareMatrix) {
        if let Some(v) = &self.velocities {
            return v[k].clone();
        }
        let h = self.spacing();
        let m = self.knots.len();
        let diff = |take: &dyn Fn(&HermitianPair) -> SquareMatrix| {
            if k == 0 {
                take(&self.knots[0])
                    .scale(-3.0)
                    .add(&take(&self.knots[1]).scale(4.0))
                    .sub(&take(&self.knots[2]))
                    .scale(1.0 / (2.0 * h))
            } else if k == m - 1 {
                take(&self.knots[m - 1])
                    .scale(3.0)
                    .sub(&take(&self.knots[m - 2]).scale(4.0))
                    .add(&take(&self.knots[m - 3]))
                    .scale(1.0 / (2.0 * h))
            } else {
                take(&self.knots[k + 1])
                    .sub(&take(&self.knots[k - 1]))
                    .scale(1.0 / (2.0 * h))
            }
        };
        (
            diff(&|p: &HermitianPair| p.metric().clone()),
            diff(&|p: &HermitianPair| p.form().clone()),
        )
    }

    /// Pointwise energy integrand
    /// `(tr X^2 + tr W^2) det(g_ref^-1 g)^{1/2}` at knot `k`.
    fn integrand_at(&self, k: usize) -> Result<f64> {
        let pair = &self.knots[k];
        let (g_t, om_t) = self.velocity_at(k);
        let x = pair
            .metric()
            .solve(&g_t)
            .map_err(|_| Error::DegenerateInput("energy: singular metric".into()))?;
        let w = pair
            .form()
            .solve(&om_t)
            .map_err(|_| Error::DegenerateInput("energy: singular 2-form".into()))?;
        let rel = self
            .reference_metric
            .solve(pair.metric())
            .map_err(|_| Error::DegenerateInput("energy: singular reference metric".into()))?;
        Ok((x.trace_mul(&x) + w.trace_mul(&w)) * rel.det().sqrt())
    }
}

/// Applies the quadrature rule to sampled values on a uniform grid.
pub fn quadrature_values(values: &[f64], h: f64, rule: Quadrature) -> f64 {
    let m = values.len();
    match rule {
        Quadrature::Trapezoid => {
            let inner: f64 = values[1..m - 1].iter().sum();
            h * (0.5 * values[0] + inner + 0.5 * values[m - 1])
        }
        Quadrature::Simpson => {
            let intervals = m - 1;
            let even_intervals = if intervals % 2 == 0 { intervals } else { intervals - 1 };
            let mut acc = 0.0;
            if even_intervals > 0 {
                let mut s = values[0] + values[even_intervals];
                for (offset, v) in values[1..even_intervals].iter().enumerate() {
                    s += if offset % 2 == 0 { 4.0 * v } else { 2.0 * v };
                }
                acc += s * h / 3.0;
            }
            if even_intervals != intervals {
                acc += 0.5 * h * (values[m - 2] + values[m - 1]);
            }
            acc
        }
    }
}

/// Discrete energy of a curve with spatial weight `weight`:
/// time quadrature of `(tr X^2 + tr W^2) det(g_ref^-1 g)^{1/2} * weight`.
pub fn energy_curve(curve: &DiscreteCurve, weight: f64) -> Result<f64> {
    let m = curve.knots.len();
    let mut values = Vec::with_capacity(m);
    for k in 0..m {
        values.push(curve.integrand_at(k)? * weight);
    }
    Ok(quadrature_values(&values, curve.spacing(), curve.rule))
}

/// The same energy computed purely in frame variables: the integrand is
/// assembled from `(f, f_t)` with the volume factor `det(f) * weight`. On
/// the pushed curve of the same jets this agrees with [`energy_curve`] to
/// rounding, because the two expressions are algebraically identical.
pub fn energy_frame_curve(
    jets: &[FrameJet],
    t_start: f64,
    t_end: f64,
    rule: Quadrature,
    weight: f64,
) -> Result<f64> {
    if jets.len() < 3 {
        return Err(Error::InvalidInput("frame energy: need at least 3 knots".into()));
    }
    let m = jets.len();
    let h = (t_end - t_start) / (m - 1) as f64;
    let mut values = Vec::with_capacity(m);
    for jet in jets {
        let f_inv = jet
            .frame()
            .inverse()
            .map_err(|_| Error::DegenerateInput("frame energy: singular frame".into()))?;
        let ft_t = jet.frame_t().transpose();
        let half = |b: &SquareMatrix| -> Result<f64> {
            let db = ft_t.mul(b).mul(jet.frame()).add(
                &jet.frame().transpose().mul(b).mul(jet.frame_t()),
            );
            let binv_ftinv = b
                .solve(&jet.frame().transpose().inverse().map_err(|_| {
                    Error::DegenerateInput("frame energy: singular frame".into())
                })?)
                .map_err(|_| Error::DegenerateInput("frame energy: singular form".into()))?;
            let m = f_inv.mul(&binv_ftinv).mul(&db);
            Ok(m.trace_mul(&m))
        };
        let integrand = half(jet.anchor().metric())? + half(jet.anchor().form())?;
        values.push(integrand * jet.frame().det() * weight);
    }
    Ok(quadrature_values(&values, h, rule))
}

/// Outcome of a finite-difference first-variation probe.
#[derive(Debug, Clone, Copy)]
pub struct ProbeReport {
    /// Central finite-difference directional derivative of the discrete
    /// energy along the perturbation.
    pub delta_energy: f64,
    /// Largest knotwise norm of the perturbation direction.
    pub perturbation_norm: f64,
    /// Energy of the unperturbed curve.
    pub base_energy: f64,
}

/// Perturbs a curve along a seeded tangent field vanishing at both
/// endpoints and measures the first variation of the discrete energy by
/// central differences. Near zero on geodesics, order-one on generic
/// curves.
pub fn first_variation_probe(
    curve: &DiscreteCurve,
    weight: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<ProbeReport> {
    let m = curve.knots.len();
    let (a, b) = (curve.times[0], curve.times[m - 1]);
    let mut rng = SplitMix64::new(seed);

    // Smooth tangent field: a few fixed random ambient tensors, modulated
    // by sine profiles vanishing at the endpoints and projected onto the
    // tangent space at each knot. Smoothness in t matters: the energy reads
    // velocities off difference quotients, and a rough field would inject
    // O(norm / h) derivatives into the probe.
    let n = curve.knots[0].dim();
    let modes: Vec<(SquareMatrix, SquareMatrix)> = (0..3)
        .map(|_| {
            (
                SquareMatrix::random_uniform(n, &mut rng).sym_part(),
                SquareMatrix::random_uniform(n, &mut rng).skew_part(),
            )
        })
        .collect();
    let mut directions = Vec::with_capacity(m);
    let mut pert_norm = 0.0f64;
    for (k, pair) in curve.knots.iter().enumerate() {
        if k == 0 || k == m - 1 {
            directions.push(None);
            continue;
        }
        let tau = (curve.times[k] - a) / (b - a);
        let mut dir = crate::tangent::TangentPair::zero(pair);
        for (mode_idx, (h_amb, alpha_amb)) in modes.iter().enumerate() {
            let profile = (std::f64::consts::PI * (mode_idx + 1) as f64 * tau).sin();
            let component =
                crate::tangent::TangentPair::from_ambient(pair, h_amb, alpha_amb, tol)?
                    .project_tangent()
                    .scale(profile);
            dir = dir.add(&component);
        }
        pert_norm = pert_norm.max(dir.norm());
        directions.push(Some(dir));
    }

    let step = 1e-4;
    let shifted = |sign: f64| -> Result<f64> {
        let mut knots = Vec::with_capacity(m);
        for (k, pair) in curve.knots.iter().enumerate() {
            match &directions[k] {
                None => knots.push(pair.clone()),
                Some(dir) => {
                    let g = pair
                        .metric()
                        .mul(&expm(&dir.h_cap().scale(sign * step))?);
                    let om = pair.form().mul(&expm(&dir.a_cap().scale(sign * step))?);
                    // Symmetrize against rounding, then retract back onto
                    // the constraint surface.
                    knots.push(canonical_compatible(&g.sym_part(), &om.skew_part(), tol)?);
                }
            }
        }
        let shifted_curve = DiscreteCurve {
            times: curve.times.clone(),
            knots,
            velocities: None,
            rule: curve.rule,
            reference_metric: curve.reference_metric.clone(),
        };
        energy_curve(&shifted_curve, weight)
    };

    let e_plus = shifted(1.0)?;
    let e_minus = shifted(-1.0)?;
    let base = energy_curve(curve, weight)?;
    Ok(ProbeReport {
        delta_energy: ((e_plus - e_minus) / (2.0 * step)).abs(),
        perturbation_norm: pert_norm,
        base_energy: base,
    })
}

/// First-variation probe at an integrator trajectory. The trajectory must
/// match its initial data; endpoints stay fixed.
pub fn criticality_probe(
    init: &crate::geodesic::InitialData,
    traj: &Trajectory,
    perturbation_seed: u64,
    tol: &Tolerances,
) -> Result<ProbeReport> {
    let first = traj
        .states()
        .first()
        .ok_or_else(|| Error::InvalidInput("criticality probe: empty trajectory".into()))?;
    let matches = first
        .pair()
        .metric()
        .sub(init.pair0().metric())
        .frob_norm()
        .max(first.x_vel().sub(init.h0()).frob_norm())
        .max(first.w_vel().sub(init.a0()).frob_norm());
    if matches > 1e-9 {
        return Err(Error::InvalidInput(
            "criticality probe: trajectory does not start at the given initial data".into(),
        ));
    }
    let curve = DiscreteCurve::from_trajectory(traj, Quadrature::Trapezoid)?;
    first_variation_probe(&curve, 1.0, perturbation_seed, tol)
}
