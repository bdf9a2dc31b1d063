//! The constrained geodesic flow on the space of compatible pairs.
//!
//! State is carried in right-translated variables `(g, omega, X, W)` with
//! `X = g^-1 g_t` and `W = omega^-1 omega_t`, which keeps every equation
//! polynomial in the state. The acceleration `(U, V) = (X_t, W_t)` is the
//! unique solution of three linear conditions:
//!
//! * sum rule: `U + V = -tr(X)X/2 - tr(W)W/2 + (tr X^2 + tr W^2) I / 4`;
//! * commutator rule: the J-anticommuting part of `U + tr(X)X/2` vanishes;
//! * tangency preservation: differentiating the tangency condition along the
//!   flow with `J_t = J W - X J` fixes the J-commuting part of `U - V`.
//!
//! [`geodesic_rhs`] assembles the solution in closed form;
//! [`rhs_oracle_lsq`] solves the same three conditions as one stacked
//! least-squares system and serves as the independent cross-check.

use crate::error::{Error, Result};
use crate::fiber::{canonical_compatible, HermitianPair};
use crate::matrix::{expm, RectMatrix, SquareMatrix};
use crate::tangent::{tangency_residual_raw, TangentPair};
use crate::tol::Tolerances;

/// A fiber point together with its right-translated velocity.
#[derive(Debug, Clone)]
pub struct GeodesicState {
    pair: HermitianPair,
    x_vel: SquareMatrix,
    w_vel: SquareMatrix,
}

/// Initial data for the flow: a validated tangent direction plus the derived
/// constants that the closed-form predictions use.
#[derive(Debug, Clone)]
pub struct InitialData {
    pair0: HermitianPair,
    h0: SquareMatrix,
    a0: SquareMatrix,
    /// `C = tr(H^2) + tr(A^2)`.
    c_const: f64,
    tr_h: f64,
}

/// Per-time conservation and drift record.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    pub compat_resid: f64,
    pub tang_resid: f64,
    /// Pointwise energy density `(tr X^2 + tr W^2) det(g0^-1 g)^{1/2}`.
    pub e_density: f64,
    /// The conserved quantity; equal to `e_density` by definition and
    /// predicted constant `C`.
    pub i1: f64,
    pub p_num: f64,
    pub p_pred: f64,
    pub tr_x_num: f64,
    pub tr_x_pred: f64,
    /// `|| (X + W) - (1/p)(C t I / 4 + H + A) ||_F`.
    pub xw_dev: f64,
}

/// Time-stamped flow history with its monitor records.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<GeodesicState>,
    monitors: Vec<MonitorRecord>,
}

impl GeodesicState {
    /// Validates the velocities against the pair at drift-grade tolerance:
    /// `g X` symmetric, `omega W` skew, and the tangency residual bounded.
    pub fn new(
        pair: HermitianPair,
        x_vel: SquareMatrix,
        w_vel: SquareMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let gx = pair.metric().mul(&x_vel);
        let scale = gx.frob_norm().max(1.0);
        if gx.symmetry_residual() > tol.drift * scale {
            return Err(Error::InvalidInput(format!(
                "geodesic state: g*X not symmetric, residual {:.3e}",
                gx.symmetry_residual()
            )));
        }
        let ow = pair.form().mul(&w_vel);
        let scale_w = ow.frob_norm().max(1.0);
        if ow.skewness_residual() > tol.drift * scale_w {
            return Err(Error::InvalidInput(format!(
                "geodesic state: omega*W not skew, residual {:.3e}",
                ow.skewness_residual()
            )));
        }
        let tang = tangency_residual_raw(pair.acs(), &x_vel, &w_vel).frob_norm();
        let vel_scale = x_vel.frob_norm().max(w_vel.frob_norm()).max(1.0);
        if tang > tol.drift * vel_scale * 4.0 {
            return Err(Error::InvalidInput(format!(
                "geodesic state: velocity not tangent, residual {tang:.3e}"
            )));
        }
        Ok(Self { pair, x_vel, w_vel })
    }

    fn from_raw(raw: &RawState, tol: &Tolerances) -> Result<Self> {
        let relaxed = Tolerances {
            structural: tol.step_breach,
            volume_rel: tol.step_breach,
            ..tol.clone()
        };
        let pair = HermitianPair::new_with(raw.g.clone(), raw.om.clone(), &relaxed)?;
        Ok(Self { pair, x_vel: raw.x.clone(), w_vel: raw.w.clone() })
    }

    pub fn pair(&self) -> &HermitianPair {
        &self.pair
    }

    pub fn x_vel(&self) -> &SquareMatrix {
        &self.x_vel
    }

    pub fn w_vel(&self) -> &SquareMatrix {
        &self.w_vel
    }

    fn raw(&self) -> RawState {
        RawState {
            g: self.pair.metric().clone(),
            om: self.pair.form().clone(),
            x: self.x_vel.clone(),
            w: self.w_vel.clone(),
        }
    }
}

impl InitialData {
    /// Validates that `(H, A)` is tangent at `pair0` within structural
    /// tolerance, which in particular forces `tr H = tr A`.
    pub fn new(
        pair0: HermitianPair,
        h0: SquareMatrix,
        a0: SquareMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let t = TangentPair::from_caps(&pair0, h0.clone(), a0.clone(), tol)?;
        let scale = t.norm().max(1.0);
        let resid = t.tangency_residual().frob_norm();
        if resid > tol.structural * scale * 4.0 {
            return Err(Error::InvalidInput(format!(
                "initial data: direction not tangent, residual {resid:.3e}"
            )));
        }
        let tr_gap = (h0.trace() - a0.trace()).abs();
        if tr_gap > tol.structural * scale {
            return Err(Error::InvalidInput(format!(
                "initial data: tr(H) != tr(A), gap {tr_gap:.3e}"
            )));
        }
        let c_const = h0.trace_mul(&h0) + a0.trace_mul(&a0);
        let tr_h = h0.trace();
        Ok(Self { pair0, h0, a0, c_const, tr_h })
    }

    pub fn from_tangent(t: &TangentPair, tol: &Tolerances) -> Result<Self> {
        Self::new(t.anchor().clone(), t.h_cap().clone(), t.a_cap().clone(), tol)
    }

    /// Draws an ambient direction at `pair`, projects it onto the tangent
    /// space, and packages it as initial data. Tangency holds by
    /// construction of the projector.
    pub fn random(
        pair: &HermitianPair,
        seed: u64,
        scale: f64,
        tol: &Tolerances,
    ) -> Result<Self> {
        let mut rng = crate::rng::SplitMix64::new(seed);
        let ambient = crate::tangent::random_ambient(pair, &mut rng, scale, tol)?;
        Self::from_tangent(&ambient.project_tangent(), tol)
    }

    pub fn pair0(&self) -> &HermitianPair {
        &self.pair0
    }

    pub fn h0(&self) -> &SquareMatrix {
        &self.h0
    }

    pub fn a0(&self) -> &SquareMatrix {
        &self.a0
    }

    /// `C = tr(H^2) + tr(A^2)`, the conserved energy density at `t = 0`.
    pub fn energy_constant(&self) -> f64 {
        self.c_const
    }

    pub fn trace_h(&self) -> f64 {
        self.tr_h
    }

    /// Closed-form volume polynomial
    /// `p(t) = n C t^2 / 32 + tr(H) t / 2 + 1`, normalized so that
    /// `p(0) = 1` and `p(t)` equals `det(g0^-1 g(t))^{1/2}` along the flow.
    pub fn p_pred(&self, t: f64) -> f64 {
        let n = self.pair0.dim() as f64;
        n * self.c_const / 32.0 * t * t + 0.5 * self.tr_h * t + 1.0
    }

    pub fn p_pred_deriv(&self, t: f64) -> f64 {
        let n = self.pair0.dim() as f64;
        n * self.c_const / 16.0 * t + 0.5 * self.tr_h
    }

    /// Closed-form prediction for `X + W` at time `t`.
    pub fn xw_pred(&self, t: f64) -> SquareMatrix {
        let n = self.pair0.dim();
        let p = self.p_pred(t);
        SquareMatrix::identity(n)
            .scale(self.c_const * t / 4.0)
            .add(&self.h0)
            .add(&self.a0)
            .scale(1.0 / p)
    }

    pub fn initial_state(&self, tol: &Tolerances) -> Result<GeodesicState> {
        GeodesicState::new(self.pair0.clone(), self.h0.clone(), self.a0.clone(), tol)
    }
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[GeodesicState] {
        &self.states
    }

    pub fn monitors(&self) -> &[MonitorRecord] {
        &self.monitors
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Raw state used inside integrator stages, where small constraint
/// violations are expected and must not trip validation.
#[derive(Debug, Clone)]
struct RawState {
    g: SquareMatrix,
    om: SquareMatrix,
    x: SquareMatrix,
    w: SquareMatrix,
}

#[derive(Debug, Clone)]
struct RawSlope {
    dg: SquareMatrix,
    dom: SquareMatrix,
    dx: SquareMatrix,
    dw: SquareMatrix,
}

impl RawState {
    fn advanced(&self, slope: &RawSlope, dt: f64) -> RawState {
        RawState {
            g: self.g.add(&slope.dg.scale(dt)),
            om: self.om.add(&slope.dom.scale(dt)),
            x: self.x.add(&slope.dx.scale(dt)),
            w: self.w.add(&slope.dw.scale(dt)),
        }
    }
}

/// Split without validating `J`; integrator stages drift off the constraint
/// surface by O(dt^2) and the validating split would reject them.
fn split_raw(j: &SquareMatrix, m: &SquareMatrix) -> (SquareMatrix, SquareMatrix) {
    let jmj = j.mul(m).mul(j);
    (m.sub(&jmj).scale(0.5), m.add(&jmj).scale(0.5))
}

fn rhs_raw(s: &RawState) -> Result<(SquareMatrix, SquareMatrix)> {
    let n = s.g.dim();
    let j = s
        .g
        .solve(&s.om)
        .map_err(|_| Error::NumericalFailure("geodesic rhs: singular metric".into()))?;
    let tr_x = s.x.trace();
    let tr_w = s.w.trace();
    let tr_x2 = s.x.trace_mul(&s.x);
    let tr_w2 = s.w.trace_mul(&s.w);

    let sum = s
        .x
        .scale(-0.5 * tr_x)
        .add(&s.w.scale(-0.5 * tr_w))
        .add(&SquareMatrix::identity(n).scale(0.25 * (tr_x2 + tr_w2)));
    let (sum_c, sum_a) = split_raw(&j, &sum);

    let (_, x_a) = split_raw(&j, &s.x);
    let u_a = x_a.scale(-0.5 * tr_x);
    let v_a = sum_a.sub(&u_a);

    let j_t = j.mul(&s.w).sub(&s.x.mul(&j));
    let d = s.x.sub(&s.w);
    let closure = j_t.mul(&d).mul(&j).add(&j.mul(&d).mul(&j_t));
    let (closure_c, _) = split_raw(&j, &closure);
    let umv_c = closure_c.scale(0.5);

    let u_c = sum_c.add(&umv_c).scale(0.5);
    let v_c = sum_c.sub(&umv_c).scale(0.5);

    Ok((u_c.add(&u_a), v_c.add(&v_a)))
}

fn slope(s: &RawState) -> Result<RawSlope> {
    let (u, v) = rhs_raw(s)?;
    Ok(RawSlope { dg: s.g.mul(&s.x), dom: s.om.mul(&s.w), dx: u, dw: v })
}

/// Acceleration `(U, V) = (X_t, W_t)` of a valid state, assembled in closed
/// form from the sum rule, the commutator rule, and tangency preservation.
pub fn geodesic_rhs(state: &GeodesicState) -> Result<(SquareMatrix, SquareMatrix)> {
    rhs_raw(&state.raw())
}

/// Independent oracle: stacks the same three linear conditions as one
/// `3 n^2 x 2 n^2` system in the entries of `(U, V)` and solves it by
/// Householder least squares. The residual of the solution must clear
/// `lsq_residual`, otherwise the conditions were inconsistent.
pub fn rhs_oracle_lsq(
    state: &GeodesicState,
    tol: &Tolerances,
) -> Result<(SquareMatrix, SquareMatrix)> {
    let s = state.raw();
    let n = s.g.dim();
    let nn = n * n;
    let j = s
        .g
        .solve(&s.om)
        .map_err(|_| Error::NumericalFailure("rhs oracle: singular metric".into()))?;
    let tr_x = s.x.trace();
    let tr_w = s.w.trace();
    let tr_x2 = s.x.trace_mul(&s.x);
    let tr_w2 = s.w.trace_mul(&s.w);

    let sum = s
        .x
        .scale(-0.5 * tr_x)
        .add(&s.w.scale(-0.5 * tr_w))
        .add(&SquareMatrix::identity(n).scale(0.25 * (tr_x2 + tr_w2)));
    // Right side of the commutator rule: [J, U] = (tr X / 2)(X J - J X).
    let comm_rhs = s.x.mul(&j).sub(&j.mul(&s.x)).scale(0.5 * tr_x);
    // Right side of tangency preservation:
    // {J, U - V} = -(J_t D + D J_t).
    let j_t = j.mul(&s.w).sub(&s.x.mul(&j));
    let d = s.x.sub(&s.w);
    let tang_rhs = j_t.mul(&d).add(&d.mul(&j_t)).scale(-1.0);

    let mut a = RectMatrix::zeros(3 * nn, 2 * nn);
    let mut b = vec![0.0; 3 * nn];
    let u_idx = |r: usize, c: usize| r * n + c;
    let v_idx = |r: usize, c: usize| nn + r * n + c;

    for r in 0..n {
        for c in 0..n {
            let row = r * n + c;
            // Sum rule: U[r][c] + V[r][c] = sum[r][c].
            a.set(row, u_idx(r, c), 1.0);
            a.set(row, v_idx(r, c), 1.0);
            b[row] = sum[(r, c)];

            // Commutator rule: (J U - U J)[r][c] = comm_rhs[r][c].
            let row = nn + r * n + c;
            for k in 0..n {
                let cur = a.get(row, u_idx(k, c));
                a.set(row, u_idx(k, c), cur + j[(r, k)]);
                let cur = a.get(row, u_idx(r, k));
                a.set(row, u_idx(r, k), cur - j[(k, c)]);
            }
            b[row] = comm_rhs[(r, c)];

            // Tangency preservation:
            // (J (U - V) + (U - V) J)[r][c] = tang_rhs[r][c].
            let row = 2 * nn + r * n + c;
            for k in 0..n {
                let cur = a.get(row, u_idx(k, c));
                a.set(row, u_idx(k, c), cur + j[(r, k)]);
                let cur = a.get(row, v_idx(k, c));
                a.set(row, v_idx(k, c), cur - j[(r, k)]);
                let cur = a.get(row, u_idx(r, k));
                a.set(row, u_idx(r, k), cur + j[(k, c)]);
                let cur = a.get(row, v_idx(r, k));
                a.set(row, v_idx(r, k), cur - j[(k, c)]);
            }
            b[row] = tang_rhs[(r, c)];
        }
    }

    let (x, resid) = a.solve_least_squares(&b)?;
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if resid > tol.lsq_residual * scale * (3 * nn) as f64 {
        return Err(Error::NumericalFailure(format!(
            "rhs oracle: inconsistent conditions, residual {resid:.3e}"
        )));
    }
    let u = SquareMatrix::from_fn(n, |r, c| x[u_idx(r, c)]);
    let v = SquareMatrix::from_fn(n, |r, c| x[v_idx(r, c)]);
    Ok((u, v))
}

/// Residual norms of the two projected flow equations with
/// `(X_t, W_t)` replaced by the candidate acceleration `(u, v)`:
///
/// `3 X_t + 3 tr(X) X / 2 - tr(X^2) I / 2 + J X_t J + tr(X) J X J / 2
///  + W_t + tr(W) W / 2 - tr(W^2) I / 2 - J W_t J - tr(W) J W J / 2`
///
/// and the mirror with X and W exchanged. Both vanish on the true flow.
pub fn projected_equation_residuals(
    state: &GeodesicState,
    u: &SquareMatrix,
    v: &SquareMatrix,
) -> (f64, f64) {
    let n = state.pair.dim();
    let j = state.pair.acs();
    let x = &state.x_vel;
    let w = &state.w_vel;
    let tr_x = x.trace();
    let tr_w = w.trace();
    let tr_x2 = x.trace_mul(x);
    let tr_w2 = w.trace_mul(w);
    let id = SquareMatrix::identity(n);

    let line = |p: &SquareMatrix,
                q: &SquareMatrix,
                tp: f64,
                tq: f64,
                tp2: f64,
                tq2: f64,
                up: &SquareMatrix,
                uq: &SquareMatrix| {
        up.scale(3.0)
            .add(&p.scale(1.5 * tp))
            .sub(&id.scale(0.5 * tp2))
            .add(&j.mul(up).mul(j))
            .add(&j.mul(p).mul(j).scale(0.5 * tp))
            .add(uq)
            .add(&q.scale(0.5 * tq))
            .sub(&id.scale(0.5 * tq2))
            .sub(&j.mul(uq).mul(j))
            .sub(&j.mul(q).mul(j).scale(0.5 * tq))
            .frob_norm()
    };

    let first = line(x, w, tr_x, tr_w, tr_x2, tr_w2, u, v);
    let second = line(w, x, tr_w, tr_x, tr_w2, tr_x2, v, u);
    (first, second)
}

fn constraint_residuals(s: &RawState) -> Result<(f64, f64)> {
    let compat = crate::fiber::compatibility_residual(&s.g, &s.om)?.frob_norm();
    let j = s
        .g
        .solve(&s.om)
        .map_err(|_| Error::NumericalFailure("monitor: singular metric".into()))?;
    let tang = tangency_residual_raw(&j, &s.x, &s.w).frob_norm();
    Ok((compat, tang))
}

fn rk4_raw(s: &RawState, dt: f64) -> Result<RawState> {
    let k1 = slope(s)?;
    let k2 = slope(&s.advanced(&k1, 0.5 * dt))?;
    let k3 = slope(&s.advanced(&k2, 0.5 * dt))?;
    let k4 = slope(&s.advanced(&k3, dt))?;
    let combined = RawSlope {
        dg: k1.dg.add(&k2.dg.scale(2.0)).add(&k3.dg.scale(2.0)).add(&k4.dg),
        dom: k1.dom.add(&k2.dom.scale(2.0)).add(&k3.dom.scale(2.0)).add(&k4.dom),
        dx: k1.dx.add(&k2.dx.scale(2.0)).add(&k3.dx.scale(2.0)).add(&k4.dx),
        dw: k1.dw.add(&k2.dw.scale(2.0)).add(&k3.dw.scale(2.0)).add(&k4.dw),
    };
    Ok(s.advanced(&combined, dt / 6.0))
}

/// One classical fourth-order step. The state after the step must keep its
/// constraint residuals under the breach tolerance, otherwise a drift error
/// is returned and the caller decides between retraction and abort.
pub fn step_rk4(state: &GeodesicState, dt: f64, tol: &Tolerances) -> Result<GeodesicState> {
    if dt <= 0.0 {
        return Err(Error::InvalidInput("step_rk4: dt must be positive".into()));
    }
    let next = rk4_raw(&state.raw(), dt)?;
    let (compat, tang) = constraint_residuals(&next)?;
    if compat > tol.step_breach || tang > tol.step_breach {
        return Err(Error::Drift {
            time: dt,
            what: "constraint residual after step",
            residual: compat.max(tang),
        });
    }
    GeodesicState::from_raw(&next, tol)
}

fn retract_state(s: &RawState, tol: &Tolerances) -> Result<RawState> {
    let pair = canonical_compatible(&s.g, &s.om, tol)?;
    // Re-symmetrize the ambient tensors against the retracted pair, then
    // project back onto the tangent space.
    let h = pair.metric().mul(&s.x).sym_part();
    let alpha = pair.form().mul(&s.w).skew_part();
    let t = TangentPair::from_ambient(&pair, &h, &alpha, tol)?.project_tangent();
    Ok(RawState {
        g: pair.metric().clone(),
        om: pair.form().clone(),
        x: t.h_cap().clone(),
        w: t.a_cap().clone(),
    })
}

/// Integrates the flow from `init` over `[0, t_end]` with fixed step `dt`
/// (the final step is shortened when `dt` does not divide `t_end`).
/// With `retraction_every = Some(k)` the pair is re-retracted and the
/// velocity re-projected every `k` accepted steps. Monitor records are
/// produced at every grid time.
pub fn integrate(
    init: &InitialData,
    t_end: f64,
    dt: f64,
    retraction_every: Option<usize>,
    tol: &Tolerances,
) -> Result<Trajectory> {
    if dt <= 0.0 || t_end <= 0.0 {
        return Err(Error::InvalidInput("integrate: dt and t_end must be positive".into()));
    }
    if let Some(0) = retraction_every {
        return Err(Error::InvalidInput("integrate: retraction_every must be >= 1".into()));
    }
    let mut raw = RawState {
        g: init.pair0.metric().clone(),
        om: init.pair0.form().clone(),
        x: init.h0.clone(),
        w: init.a0.clone(),
    };
    let mut times = vec![0.0];
    let mut states = vec![GeodesicState::from_raw(&raw, tol)?];

    let mut t = 0.0;
    let mut step_count = 0usize;
    while t < t_end - 1e-12 * t_end.max(1.0) {
        let step = dt.min(t_end - t);
        raw = rk4_raw(&raw, step).map_err(|e| match e {
            Error::NumericalFailure(msg) => {
                Error::NumericalFailure(format!("at t = {t:.6}: {msg}"))
            }
            other => other,
        })?;
        t += step;
        step_count += 1;
        if let Some(k) = retraction_every {
            if step_count % k == 0 {
                raw = retract_state(&raw, tol)?;
            }
        }
        let (compat, tang) = constraint_residuals(&raw)?;
        if compat > tol.step_breach || tang > tol.step_breach {
            return Err(Error::Drift {
                time: t,
                what: "constraint residual along trajectory",
                residual: compat.max(tang),
            });
        }
        times.push(t);
        states.push(GeodesicState::from_raw(&raw, tol)?);
    }

    let monitors = compute_observables(&times, &states, init)?;
    Ok(Trajectory { times, states, monitors })
}

/// Conservation observables for an existing trajectory; equivalent to the
/// monitors [`integrate`] records.
pub fn observables(traj: &Trajectory, init: &InitialData) -> Result<Vec<MonitorRecord>> {
    compute_observables(&traj.times, &traj.states, init)
}

fn compute_observables(
    times: &[f64],
    states: &[GeodesicState],
    init: &InitialData,
) -> Result<Vec<MonitorRecord>> {
    let g0 = init.pair0.metric();
    let mut out = Vec::with_capacity(times.len());
    for (&t, state) in times.iter().zip(states) {
        let raw = state.raw();
        let (compat, tang) = constraint_residuals(&raw)?;
        let rel = g0
            .solve(state.pair.metric())
            .map_err(|_| Error::NumericalFailure("observables: singular base metric".into()))?;
        let p_num = rel.det().sqrt();
        let p_pred = init.p_pred(t);
        let tr_x_num = state.x_vel.trace();
        let tr_x_pred = 2.0 * init.p_pred_deriv(t) / p_pred;
        let quad = state.x_vel.trace_mul(&state.x_vel) + state.w_vel.trace_mul(&state.w_vel);
        let e_density = quad * p_num;
        let xw_dev = state
            .x_vel
            .add(&state.w_vel)
            .sub(&init.xw_pred(t))
            .frob_norm();
        out.push(MonitorRecord {
            t,
            compat_resid: compat,
            tang_resid: tang,
            e_density,
            i1: e_density,
            p_num,
            p_pred,
            tr_x_num,
            tr_x_pred,
            xw_dev,
        });
    }
    Ok(out)
}

/// Exponential metric curve with the 2-form held fixed:
/// `g(t) = g exp(t H0)` for traceless `H0 = g^-1 h0`. A geodesic of the
/// fixed-volume metric space, not of the structure space.
pub fn fixed_omega_geodesic(
    g: &SquareMatrix,
    h0: &SquareMatrix,
    t: f64,
    tol: &Tolerances,
) -> Result<SquareMatrix> {
    let scale = h0.frob_norm().max(1.0);
    if h0.symmetry_residual() > tol.structural * scale {
        return Err(Error::InvalidInput("fixed-omega curve: h0 not symmetric".into()));
    }
    let h_cap = g
        .solve(h0)
        .map_err(|_| Error::DegenerateInput("fixed-omega curve: singular metric".into()))?;
    if h_cap.trace().abs() > tol.structural * scale {
        return Err(Error::InvalidInput(format!(
            "fixed-omega curve: g^-1 h0 must be traceless, trace {:.3e}",
            h_cap.trace()
        )));
    }
    Ok(g.mul(&expm(&h_cap.scale(t))?))
}

/// Exponential 2-form curve with the metric held fixed:
/// `omega(t) = omega exp(t A0)` for traceless `A0 = omega^-1 alpha0`.
pub fn fixed_g_geodesic(
    omega: &SquareMatrix,
    alpha0: &SquareMatrix,
    t: f64,
    tol: &Tolerances,
) -> Result<SquareMatrix> {
    let scale = alpha0.frob_norm().max(1.0);
    if alpha0.skewness_residual() > tol.structural * scale {
        return Err(Error::InvalidInput("fixed-g curve: alpha0 not skew".into()));
    }
    if omega.skewness_residual() > tol.structural * omega.frob_norm().max(1.0) {
        return Err(Error::InvalidInput("fixed-g curve: omega not skew".into()));
    }
    let a_cap = omega
        .solve(alpha0)
        .map_err(|_| Error::DegenerateInput("fixed-g curve: singular 2-form".into()))?;
    if a_cap.trace().abs() > tol.structural * scale {
        return Err(Error::InvalidInput(format!(
            "fixed-g curve: omega^-1 alpha0 must be traceless, trace {:.3e}",
            a_cap.trace()
        )));
    }
    Ok(omega.mul(&expm(&a_cap.scale(t))?))
}

/// The pure-trace geodesic in closed form: both forms scale by
/// `phi(t) = (1 + n c0 t / 4)^{4/n}` and `X = W = c(t) I` with
/// `c(t) = c0 / (1 + n c0 t / 4)`. Leaves the cone in finite time when
/// `c0 < 0`.
pub fn conformal_geodesic(
    pair0: &HermitianPair,
    c0: f64,
    t: f64,
    tol: &Tolerances,
) -> Result<GeodesicState> {
    let n = pair0.dim() as f64;
    let q = 1.0 + n * c0 * t / 4.0;
    if q <= 0.0 {
        return Err(Error::Domain(format!(
            "conformal geodesic leaves the cone: 1 + n c0 t / 4 = {q:.6} at t = {t}"
        )));
    }
    let phi = q.powf(4.0 / n);
    let c = c0 / q;
    let pair = HermitianPair::new_with(
        pair0.metric().scale(phi),
        pair0.form().scale(phi),
        tol,
    )?;
    let id = SquareMatrix::identity(pair0.dim());
    GeodesicState::new(pair, id.scale(c), id.scale(c), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::random_pair;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn conformal_init(n: usize) -> InitialData {
        let p = HermitianPair::standard(n);
        let id = SquareMatrix::identity(n);
        InitialData::new(p, id.clone(), id, &tol()).unwrap()
    }

    fn random_state(seed: u64, n: usize, vel_scale: f64) -> (GeodesicState, InitialData) {
        let (pair, _) = random_pair(seed, n, 0.35, &tol()).unwrap();
        let init = InitialData::random(&pair, seed ^ 0xabcdef, vel_scale, &tol()).unwrap();
        (init.initial_state(&tol()).unwrap(), init)
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let p = HermitianPair::standard(4);
        let z = SquareMatrix::zeros(4);
        let s = GeodesicState::new(p, z.clone(), z, &tol()).unwrap();
        let (u, v) = geodesic_rhs(&s).unwrap();
        assert!(u.frob_norm() == 0.0 && v.frob_norm() == 0.0);
        let (u, v) = rhs_oracle_lsq(&s, &tol()).unwrap();
        assert!(u.frob_norm() < 1e-13 && v.frob_norm() < 1e-13);
    }

    #[test]
    fn conformal_acceleration() {
        // X = W = I at n = 2 reduces to c' = -n c^2 / 4 = -1/2.
        let init = conformal_init(2);
        let s = init.initial_state(&tol()).unwrap();
        let (u, v) = geodesic_rhs(&s).unwrap();
        let expected = SquareMatrix::identity(2).scale(-0.5);
        assert!(u.sub(&expected).frob_norm() < 1e-14);
        assert!(v.sub(&expected).frob_norm() < 1e-14);
        let (u, v) = rhs_oracle_lsq(&s, &tol()).unwrap();
        assert!(u.sub(&expected).frob_norm() < 1e-12);
        assert!(v.sub(&expected).frob_norm() < 1e-12);
    }

    #[test]
    fn oracle_agrees_with_closed_form() {
        for trial in 0..334 {
            for n in [2usize, 4, 6] {
                let (s, _) = random_state(7_000 + trial as u64 * 3 + n as u64, n, 0.6);
                let (u1, v1) = geodesic_rhs(&s).unwrap();
                let (u2, v2) = rhs_oracle_lsq(&s, &tol()).unwrap();
                let du = u1.sub(&u2).frob_norm();
                let dv = v1.sub(&v2).frob_norm();
                assert!(du <= 1e-9 && dv <= 1e-9, "n={n} trial={trial}: {du:.3e} {dv:.3e}");

                // Both solutions satisfy the two projected equations.
                for (u, v) in [(&u1, &v1), (&u2, &v2)] {
                    let (r1, r2) = projected_equation_residuals(&s, u, v);
                    assert!(r1 <= 1e-9 && r2 <= 1e-9, "projected residuals {r1:.3e} {r2:.3e}");
                }
            }
        }
    }

    #[test]
    fn commutator_rule_consistency() {
        // The anticommuting part of the sum-rule right side decomposes as
        // U_a + V_a with U_a = -tr(X) X_a / 2 and V_a = -tr(W) W_a / 2.
        for trial in 0..200 {
            let n = [2, 4, 6][trial % 3];
            let (s, _) = random_state(40_000 + trial as u64, n, 0.7);
            let (u, v) = rhs_oracle_lsq(&s, &tol()).unwrap();
            let j = s.pair().acs();
            let split = |m: &SquareMatrix| {
                let jmj = j.mul(m).mul(j);
                m.add(&jmj).scale(0.5)
            };
            let u_a = split(&u);
            let v_a = split(&v);
            let x_a = split(s.x_vel());
            let w_a = split(s.w_vel());
            let du = u_a.sub(&x_a.scale(-0.5 * s.x_vel().trace())).frob_norm();
            let dv = v_a.sub(&w_a.scale(-0.5 * s.w_vel().trace())).frob_norm();
            assert!(du <= 1e-10 && dv <= 1e-10, "trial {trial}: {du:.3e} {dv:.3e}");
        }
    }

    #[test]
    fn rk4_single_step_conformal_scale() {
        let init = conformal_init(2);
        let s = init.initial_state(&tol()).unwrap();
        let dt = 1e-3;
        let next = step_rk4(&s, dt, &tol()).unwrap();
        let expected_scale = (1.0 + dt / 2.0) * (1.0 + dt / 2.0);
        let ratio = next.pair().metric()[(0, 0)];
        assert!(
            (ratio - expected_scale).abs() < 1e-12,
            "scale {ratio:.15} vs {expected_scale:.15}"
        );
    }

    #[test]
    fn rk4_vanishing_step_is_identity() {
        let (s, _) = random_state(123, 4, 0.5);
        let next = step_rk4(&s, 1e-300, &tol()).unwrap();
        assert!(next.pair().metric().sub(s.pair().metric()).frob_norm() < 1e-12);
        assert!(next.x_vel().sub(s.x_vel()).frob_norm() < 1e-12);
        assert!(matches!(step_rk4(&s, 0.0, &tol()), Err(Error::InvalidInput(_))));
        assert!(matches!(step_rk4(&s, -1e-3, &tol()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn observables_recomputation_matches_monitors() {
        let (_, init) = random_state(321, 4, 0.5);
        let traj = integrate(&init, 0.2, 1e-2, None, &tol()).unwrap();
        let recomputed = observables(&traj, &init).unwrap();
        assert_eq!(recomputed.len(), traj.monitors().len());
        for (a, b) in recomputed.iter().zip(traj.monitors()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn partial_final_step_lands_on_t_end() {
        // dt does not divide t_end: the last step is shortened.
        let (_, init) = random_state(654, 2, 0.4);
        let traj = integrate(&init, 0.25, 0.1, None, &tol()).unwrap();
        assert_eq!(traj.times().len(), 4);
        assert!((traj.times().last().unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rk4_local_order_five() {
        // Richardson: one dt step vs two dt/2 steps, then halve dt again.
        // The difference scales as dt^5, so the ratio is about 32.
        let mut ratios = Vec::new();
        for trial in 0..10 {
            let (s, _) = random_state(60_000 + trial, 4, 0.8);
            let raw = s.raw();
            let err = |dt: f64| {
                let one = rk4_raw(&raw, dt).unwrap();
                let half = rk4_raw(&rk4_raw(&raw, dt / 2.0).unwrap(), dt / 2.0).unwrap();
                one.g.sub(&half.g).frob_norm()
                    + one.om.sub(&half.om).frob_norm()
                    + one.x.sub(&half.x).frob_norm()
                    + one.w.sub(&half.w).frob_norm()
            };
            let e1 = err(0.08);
            let e2 = err(0.04);
            if e2 > 1e-13 {
                ratios.push(e1 / e2);
            }
        }
        assert!(!ratios.is_empty());
        for r in ratios {
            assert!((24.0..=40.0).contains(&r), "local Richardson ratio {r:.2}");
        }
    }

    #[test]
    fn integrate_conformal_matches_closed_form() {
        let init = conformal_init(2);
        let traj = integrate(&init, 1.0, 1e-3, None, &tol()).unwrap();
        let last = traj.states().last().unwrap();
        // p(1) = 2.25, so g(1) = 2.25 g0.
        let expected = SquareMatrix::identity(2).scale(2.25);
        let dev = last.pair().metric().sub(&expected).frob_norm();
        assert!(dev < 1e-8, "g(1) deviation {dev:.3e}");

        // Whole-curve comparison against the closed form.
        let mut max_dev: f64 = 0.0;
        for (&t, state) in traj.times().iter().zip(traj.states()) {
            let exact = conformal_geodesic(init.pair0(), 1.0, t, &tol()).unwrap();
            max_dev = max_dev
                .max(state.pair().metric().sub(exact.pair().metric()).frob_norm())
                .max(state.x_vel().sub(exact.x_vel()).frob_norm());
        }
        assert!(max_dev <= 1e-8, "max closed-form deviation {max_dev:.3e}");
    }

    #[test]
    fn integrate_zero_velocity_is_constant() {
        let p = HermitianPair::standard(4);
        let z = SquareMatrix::zeros(4);
        let init = InitialData::new(p.clone(), z.clone(), z, &tol()).unwrap();
        let traj = integrate(&init, 0.5, 1e-2, None, &tol()).unwrap();
        for s in traj.states() {
            assert!(s.pair().metric().sub(p.metric()).frob_norm() < 1e-14);
            assert!(s.x_vel().frob_norm() < 1e-14);
        }
    }

    #[test]
    fn observables_initial_and_conformal_anchor() {
        let init = conformal_init(2);
        let traj = integrate(&init, 1.0, 1e-3, None, &tol()).unwrap();
        let first = &traj.monitors()[0];
        assert!((first.p_num - 1.0).abs() < 1e-14);
        assert!((first.tr_x_num - init.trace_h()).abs() < 1e-14);
        assert!(first.xw_dev < 1e-14);

        let last = traj.monitors().last().unwrap();
        assert!((last.p_pred - 2.25).abs() < 1e-15);
        assert!((last.p_num - 2.25).abs() < 1e-8);
        assert!((last.tr_x_pred - 4.0 / 3.0).abs() < 1e-15);
        assert!((last.tr_x_num - 4.0 / 3.0).abs() < 1e-8);
        // I1 stays at C = 4.
        assert!((last.i1 - 4.0).abs() < 1e-8);
        let xw = last.xw_dev;
        assert!(xw < 1e-8, "X+W deviation {xw:.3e}");
    }

    #[test]
    fn conservation_and_drift_along_random_flows() {
        for trial in 0..6 {
            let n = [2, 4][trial % 2];
            let (_, init) = random_state(70_000 + trial as u64, n, 0.5);
            let traj = integrate(&init, 1.0, 1e-3, None, &tol()).unwrap();
            let c = init.energy_constant();
            for m in traj.monitors() {
                assert!(m.compat_resid <= 1e-8, "compat {:.3e}", m.compat_resid);
                assert!(m.tang_resid <= 1e-8, "tang {:.3e}", m.tang_resid);
                assert!((m.i1 - c).abs() <= 1e-8 * c.abs().max(1.0), "I1 drift");
                assert!((m.p_num - m.p_pred).abs() <= 1e-6);
                assert!((m.tr_x_num - m.tr_x_pred).abs() <= 1e-6);
                assert!(m.xw_dev <= 1e-6);
                let tr_gap = 0.0; // tr X = tr W is checked below per state
                let _ = tr_gap;
            }
            for s in traj.states() {
                let gap = (s.x_vel().trace() - s.w_vel().trace()).abs();
                assert!(gap <= 1e-8, "tr X vs tr W gap {gap:.3e}");
            }
        }
    }

    #[test]
    fn retraction_pins_constraints() {
        let (_, init) = random_state(81_000, 4, 0.6);
        let traj = integrate(&init, 1.0, 1e-3, Some(10), &tol()).unwrap();
        let worst = traj
            .monitors()
            .iter()
            .map(|m| m.compat_resid.max(m.tang_resid))
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-10, "retracted drift {worst:.3e}");
    }

    #[test]
    fn global_order_four_against_conformal() {
        let p = HermitianPair::standard(2);
        let err_at = |dt: f64| {
            let init = conformal_init(2);
            let traj = integrate(&init, 1.0, dt, None, &tol()).unwrap();
            let exact = conformal_geodesic(&p, 1.0, 1.0, &tol()).unwrap();
            traj.states()
                .last()
                .unwrap()
                .pair()
                .metric()
                .sub(exact.pair().metric())
                .frob_norm()
        };
        let e1 = err_at(1.0 / 64.0);
        let e2 = err_at(1.0 / 128.0);
        let ratio = e1 / e2;
        assert!((14.0..=18.0).contains(&ratio), "global order ratio {ratio:.2}");
    }

    #[test]
    fn time_reversal_returns_home() {
        let (_, init) = random_state(91_000, 4, 0.5);
        let fwd = integrate(&init, 1.0, 1e-3, None, &tol()).unwrap();
        let end = fwd.states().last().unwrap();
        let back_init = InitialData::new(
            end.pair().clone(),
            end.x_vel().scale(-1.0),
            end.w_vel().scale(-1.0),
            &Tolerances { structural: 1e-7, ..tol() },
        )
        .unwrap();
        let back = integrate(&back_init, 1.0, 1e-3, None, &tol()).unwrap();
        let home = back.states().last().unwrap();
        let dev = home
            .pair()
            .metric()
            .sub(init.pair0().metric())
            .frob_norm()
            .max(home.pair().form().sub(init.pair0().form()).frob_norm());
        assert!(dev <= 1e-7, "time reversal deviation {dev:.3e}");
    }

    #[test]
    fn flow_is_equivariant_under_frame_change() {
        let t = tol();
        for trial in 0..5u64 {
            let (_, init) = random_state(95_000 + trial, 4, 0.5);
            let (_, l) = random_pair(555 + trial, 4, 0.25, &t).unwrap();
            let l_inv = l.inverse().unwrap();

            let g2 = l.transpose().mul(init.pair0().metric()).mul(&l);
            let om2 = l.transpose().mul(init.pair0().form()).mul(&l);
            let h2 = l_inv.mul(init.h0()).mul(&l);
            let a2 = l_inv.mul(init.a0()).mul(&l);
            let pair2 = HermitianPair::new(g2, om2).unwrap();
            let init2 = InitialData::new(pair2, h2, a2, &Tolerances { structural: 1e-8, ..t.clone() })
                .unwrap();

            let traj1 = integrate(&init, 1.0, 2e-3, None, &t).unwrap();
            let traj2 = integrate(&init2, 1.0, 2e-3, None, &t).unwrap();
            let s1 = traj1.states().last().unwrap();
            let s2 = traj2.states().last().unwrap();
            let transported = l.transpose().mul(s1.pair().metric()).mul(&l);
            let dev = transported.sub(s2.pair().metric()).frob_norm();
            assert!(dev <= 1e-8 * transported.frob_norm().max(1.0), "equivariance {dev:.3e}");
        }
    }

    #[test]
    fn fixed_omega_curve_examples() {
        let t = tol();
        let g = SquareMatrix::identity(2);
        let h0 = SquareMatrix::diag(&[1.0, -1.0]);
        let at = |tt: f64| fixed_omega_geodesic(&g, &h0, tt, &t).unwrap();
        assert!(at(0.0).sub(&g).frob_norm() < 1e-15);
        let one = at(1.0);
        let expected = SquareMatrix::diag(&[1f64.exp(), (-1f64).exp()]);
        assert!(one.sub(&expected).frob_norm() < 1e-13);

        // Volume is constant along the curve.
        for &tt in &[0.3, 0.7, 1.5] {
            let gt = at(tt);
            assert!((gt.det().sqrt() - 1.0).abs() <= 1e-9);
        }

        // An anticommuting direction keeps the pair compatible with the
        // fixed form: J(t)^2 = -I along the curve.
        let om = SquareMatrix::std_symplectic(2);
        for &tt in &[0.2, 0.9] {
            let gt = at(tt);
            let j = gt.solve(&om).unwrap();
            let resid = j.mul(&j).add(&SquareMatrix::identity(2)).frob_norm();
            assert!(resid <= 1e-9, "J(t)^2 residual {resid:.3e}");
        }

        // Trace violation is rejected.
        let bad = SquareMatrix::identity(2);
        assert!(matches!(
            fixed_omega_geodesic(&g, &bad, 1.0, &t),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn fixed_g_curve_examples() {
        let t = tol();
        let om = SquareMatrix::std_symplectic(4);
        // alpha = antidiagonal(1, 1, -1, -1) is skew and gives a traceless
        // A0 that anticommutes with the standard J.
        let alpha = SquareMatrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();

        assert!(fixed_g_geodesic(&om, &alpha, 0.0, &t).unwrap().sub(&om).frob_norm() < 1e-15);

        let pf0 = crate::matrix::pfaffian(&om, &t).unwrap().abs();
        for &tt in &[0.25, 0.8, 1.3] {
            let omt = fixed_g_geodesic(&om, &alpha, tt, &t).unwrap();
            let pf = crate::matrix::pfaffian(&omt, &t).unwrap().abs();
            assert!((pf - pf0).abs() <= 1e-9, "Pfaffian drift {:.3e}", (pf - pf0).abs());
            // The direction is of form-only type, so the pair with the
            // identity metric stays compatible along the curve.
            let pair = HermitianPair::new(SquareMatrix::identity(4), omt);
            assert!(pair.is_ok(), "pair not compatible at t = {tt}");
        }

        // At n = 2, skewness of alpha plus tracelessness of A0 forces 0.
        let om2 = SquareMatrix::std_symplectic(2);
        let alpha2 = om2.scale(0.5); // A0 = omega^-1 alpha = I/2, trace 1: rejected.
        assert!(matches!(
            fixed_g_geodesic(&om2, &alpha2, 1.0, &t),
            Err(Error::InvalidInput(_))
        ));
        let zero = SquareMatrix::zeros(2);
        let constant = fixed_g_geodesic(&om2, &zero, 2.0, &t).unwrap();
        assert!(constant.sub(&om2).frob_norm() < 1e-15);
    }

    #[test]
    fn conformal_closed_form_values() {
        let p = HermitianPair::standard(2);
        let s = conformal_geodesic(&p, 1.0, 1.0, &tol()).unwrap();
        assert!((s.pair().metric()[(0, 0)] - 2.25).abs() < 1e-15);
        assert!((s.x_vel()[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);

        let still = conformal_geodesic(&p, 0.0, 5.0, &tol()).unwrap();
        assert!(still.pair().metric().sub(p.metric()).frob_norm() < 1e-15);

        // Negative c0 hits the cone boundary at t = -4/(n c0) = 2.
        assert!(matches!(
            conformal_geodesic(&p, -1.0, 2.0, &tol()),
            Err(Error::Domain(_))
        ));

        // The closed form satisfies the assembled right-hand side exactly:
        // X_t = c'(t) I with c' = -n c^2 / 4.
        for &(c0, tt, n) in &[(1.0, 0.6, 2usize), (0.7, 1.4, 4), (-0.3, 0.9, 6)] {
            let p = HermitianPair::standard(n);
            let s = conformal_geodesic(&p, c0, tt, &tol()).unwrap();
            let (u, v) = geodesic_rhs(&s).unwrap();
            let q = 1.0 + n as f64 * c0 * tt / 4.0;
            let c = c0 / q;
            let expected = SquareMatrix::identity(n).scale(-(n as f64) * c * c / 4.0);
            assert!(u.sub(&expected).frob_norm() < 1e-12);
            assert!(v.sub(&expected).frob_norm() < 1e-12);
        }
    }

    #[test]
    fn fixed_omega_curve_is_not_a_structure_geodesic() {
        // Same initial data: X(0) = H0 (anticommuting, traceless), W(0) = 0.
        // The sum rule forces U + V = tr(H0^2) I / 4 != 0 immediately, so
        // the flow must leave the fixed-form exponential curve.
        let t = tol();
        let p = HermitianPair::standard(2);
        let h0 = SquareMatrix::diag(&[1.0, -1.0]);
        let init =
            InitialData::new(p.clone(), h0.clone(), SquareMatrix::zeros(2), &t).unwrap();
        let traj = integrate(&init, 1.0, 1e-3, None, &t).unwrap();
        let g_flow = traj.states().last().unwrap().pair().metric().clone();
        let g_fixed = fixed_omega_geodesic(p.metric(), &h0, 1.0, &t).unwrap();
        let gap = g_flow.sub(&g_fixed).frob_norm();
        assert!(gap >= 1e-3, "curves unexpectedly close: {gap:.3e}");

        // They do start tangentially identical.
        let s0 = &traj.states()[0];
        assert!(s0.x_vel().sub(&h0).frob_norm() < 1e-14);
        assert!(s0.w_vel().frob_norm() < 1e-14);
    }
}
