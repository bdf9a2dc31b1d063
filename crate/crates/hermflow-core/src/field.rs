//! Weighted sample-point fields standing in for a base manifold.
//!
//! The flow couples points only through the measure, never through spatial
//! derivatives, so per-point work is embarrassingly parallel. Maps write
//! results into pre-allocated slots indexed by input position, which makes
//! parallel and serial execution bit-identical, and aggregates always reduce
//! left to right in point order.

use crate::error::{Error, Result};
use crate::fiber::HermitianPair;
use crate::geodesic::Trajectory;
use crate::variational::{quadrature_values, Quadrature};

/// One sample point: identifier, fiber value, quadrature weight.
#[derive(Debug, Clone)]
pub struct FieldPoint {
    pub id: u64,
    pub pair: HermitianPair,
    pub weight: f64,
}

/// A finite weighted set of fiber points.
#[derive(Debug, Clone)]
pub struct SampledField {
    points: Vec<FieldPoint>,
}

impl SampledField {
    /// Requires unique ids and strictly positive weights.
    pub fn new(points: Vec<FieldPoint>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &points {
            if !seen.insert(p.id) {
                return Err(Error::InvalidInput(format!(
                    "sampled field: duplicate point id {}",
                    p.id
                )));
            }
            if !(p.weight > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "sampled field: weight of point {} must be positive",
                    p.id
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[FieldPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies a pure per-point operation, at most `threads` workers.
    /// Output order equals input order regardless of scheduling; per-point
    /// failures are collected with their point ids instead of aborting the
    /// rest of the field.
    pub fn map_pointwise<T, F>(&self, threads: usize, op: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&FieldPoint) -> Result<T> + Sync,
    {
        let results = parallel_map(&self.points, threads, |p| op(p));
        let mut out = Vec::with_capacity(results.len());
        let mut failures = Vec::new();
        for (point, result) in self.points.iter().zip(results) {
            match result {
                Ok(v) => out.push(v),
                Err(e) => failures.push((point.id, e)),
            }
        }
        if failures.is_empty() {
            Ok(out)
        } else {
            Err(Error::FieldPoints { failures })
        }
    }
}

/// Slot-indexed parallel map over a slice; results land at their input
/// positions, so the output is independent of worker scheduling.
pub fn parallel_map<I, T, F>(items: &[I], threads: usize, op: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync,
{
    let workers = threads.max(1).min(items.len().max(1));
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&op).collect();
    }
    let mut slots: Vec<Option<T>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(workers);
    let op_ref = &op;
    std::thread::scope(|scope| {
        for (slot_chunk, item_chunk) in slots.chunks_mut(chunk).zip(items.chunks(chunk)) {
            scope.spawn(move || {
                for (slot, item) in slot_chunk.iter_mut().zip(item_chunk) {
                    *slot = Some(op_ref(item));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("worker filled every slot")).collect()
}

/// Global energy of a field of trajectories:
/// the weighted left-to-right sum over points of the time quadrature of the
/// pointwise energy density. All trajectories must share the time grid.
pub fn global_energy(
    trajectories: &[(u64, Trajectory)],
    weights: &[f64],
    rule: Quadrature,
) -> Result<f64> {
    if trajectories.len() != weights.len() {
        return Err(Error::InvalidInput(
            "global energy: one weight per trajectory required".into(),
        ));
    }
    let Some((_, first)) = trajectories.first() else {
        return Ok(0.0);
    };
    let times = first.times();
    if times.len() < 2 {
        return Err(Error::InvalidInput("global energy: trajectory too short".into()));
    }
    let h = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::GridMismatch("global energy: non-uniform time grid".into()));
        }
    }
    // Fixed left-to-right reduction over ascending point id, independent of
    // the order the caller assembled the slice in.
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    order.sort_by_key(|&k| trajectories[k].0);
    let mut total = 0.0;
    for k in order {
        let (id, traj) = &trajectories[k];
        let weight = weights[k];
        if traj.times().len() != times.len() {
            return Err(Error::GridMismatch(format!(
                "global energy: point {id} has {} samples, expected {}",
                traj.times().len(),
                times.len()
            )));
        }
        for (a, b) in traj.times().iter().zip(times) {
            if (a - b).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::GridMismatch(format!(
                    "global energy: point {id} grid differs at t = {a}"
                )));
            }
        }
        let density: Vec<f64> = traj.monitors().iter().map(|m| m.e_density).collect();
        total += weight * quadrature_values(&density, h, rule);
    }
    Ok(total)
}

/// Worker cap from the `HERMFLOW_THREADS` environment variable, falling back
/// to the machine's available parallelism.
pub fn thread_cap_from_env() -> usize {
    match std::env::var("HERMFLOW_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => 1,
        },
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    }
}
