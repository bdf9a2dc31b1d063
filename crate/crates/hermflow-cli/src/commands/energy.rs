//! `energy`: global and per-point energies from emitted trajectories, plus
//! first-variation probes.

use std::collections::BTreeMap;
use std::path::Path;

use hermflow_core::variational::{
    first_variation_probe, quadrature_values, DiscreteCurve, Quadrature,
};
use hermflow_core::{HermitianPair, SplitMix64, SquareMatrix, Tolerances};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::atomic_write;
use crate::manifest::{now_unix_ms, write_manifest};

pub const ENERGY_FILE: &str = "energy.json";

/// Probe perturbations per point.
const PROBE_COUNT: usize = 3;
/// Stream tag for probe seeds.
const PROBE_STREAM: u64 = 0x70726f6265;

#[derive(Serialize)]
struct EnergyOutput {
    quadrature: crate::config::QuadratureSpec,
    global_energy: f64,
    per_point: Vec<PointEnergy>,
}

#[derive(Serialize)]
struct PointEnergy {
    point_id: u64,
    weight: f64,
    energy: f64,
    probes: Vec<ProbeOutput>,
}

#[derive(Serialize)]
struct ProbeOutput {
    delta_energy: f64,
    perturbation_norm: f64,
    base_energy: f64,
}

/// Reads `observables.csv` and `trajectory.csv` from the output directory,
/// weights from the field file, and writes `energy.json` with the global
/// energy, per-point (weighted) energies, and criticality probe values.
pub fn cmd_energy(config: &RunConfig, field_path: &Path) -> Result<(), CliError> {
    let started = now_unix_ms();
    let tol = config.tolerances()?;
    let rule: Quadrature = config.quadrature.into();

    let weights: BTreeMap<u64, f64> = super::load_field(field_path, &tol)?
        .into_iter()
        .map(|(record, _)| (record.point_id, record.weight))
        .collect();

    let observables = read_csv(&config.output_dir.join(super::integrate::OBSERVABLES_FILE))?;
    let obs_header =
        "point_id,t,compat_resid,tang_resid,e_density,I1,p_num,p_pred,trX_num,trX_pred,xw_dev";
    if observables.header != obs_header {
        return Err(CliError::Validation(format!(
            "unexpected observables.csv header: {}",
            observables.header
        )));
    }
    let trajectory = read_csv(&config.output_dir.join(super::integrate::TRAJECTORY_FILE))?;

    // Group rows by point id, preserving order.
    let mut densities: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in &observables.rows {
        let pid = row[0] as u64;
        let entry = densities.entry(pid).or_default();
        entry.0.push(row[1]);
        entry.1.push(row[4]);
    }
    let mut knots: BTreeMap<u64, (Vec<f64>, Vec<HermitianPair>)> = BTreeMap::new();
    let relaxed = Tolerances {
        structural: tol.step_breach,
        volume_rel: tol.step_breach,
        ..tol.clone()
    };
    let dim = config.dim;
    for row in &trajectory.rows {
        let pid = row[0] as u64;
        if row.len() != 2 + 2 * dim * dim {
            return Err(CliError::Validation(format!(
                "trajectory.csv row width {} does not match dim {dim}",
                row.len()
            )));
        }
        let g = SquareMatrix::from_fn(dim, |i, j| row[2 + i * dim + j]);
        let om = SquareMatrix::from_fn(dim, |i, j| row[2 + dim * dim + i * dim + j]);
        let pair = HermitianPair::new_with(g, om, &relaxed)
            .map_err(|e| CliError::Validation(format!("trajectory row for point {pid}: {e}")))?;
        let entry = knots.entry(pid).or_default();
        entry.0.push(row[1]);
        entry.1.push(pair);
    }

    // Shared uniform grid across points.
    let mut reference_times: Option<Vec<f64>> = None;
    for (pid, (times, _)) in &densities {
        check_uniform(times, *pid)?;
        match &reference_times {
            None => reference_times = Some(times.clone()),
            Some(reference) => {
                if reference.len() != times.len()
                    || reference.iter().zip(times).any(|(a, b)| (a - b).abs() > 1e-12)
                {
                    return Err(CliError::Validation(format!(
                        "grid mismatch: point {pid} does not share the time grid"
                    )));
                }
            }
        }
    }
    let times = reference_times
        .ok_or_else(|| CliError::Validation("observables.csv contains no rows".into()))?;
    let h = times[1] - times[0];

    let mut per_point = Vec::new();
    let mut global = 0.0;
    for (pid, (_, density)) in &densities {
        let weight = *weights.get(pid).ok_or_else(|| {
            CliError::Validation(format!("field file has no weight for point {pid}"))
        })?;
        let energy = weight * quadrature_values(density, h, rule);
        global += energy;

        let (knot_times, pairs) = knots.get(pid).ok_or_else(|| {
            CliError::Validation(format!("trajectory.csv has no rows for point {pid}"))
        })?;
        let curve = DiscreteCurve::from_pairs(
            knot_times[0],
            *knot_times.last().unwrap(),
            pairs.clone(),
            rule,
        )
        .map_err(CliError::from)?;
        let mut probes = Vec::with_capacity(PROBE_COUNT);
        for k in 0..PROBE_COUNT {
            let seed =
                SplitMix64::derive(config.seed ^ PROBE_STREAM, pid * PROBE_COUNT as u64 + k as u64)
                    .next_u64();
            let report = first_variation_probe(&curve, weight, seed, &tol)?;
            probes.push(ProbeOutput {
                delta_energy: report.delta_energy,
                perturbation_norm: report.perturbation_norm,
                base_energy: report.base_energy,
            });
        }
        per_point.push(PointEnergy { point_id: *pid, weight, energy, probes });
    }

    let output = EnergyOutput {
        quadrature: config.quadrature,
        global_energy: global,
        per_point,
    };
    let mut body = serde_json::to_string_pretty(&output)?;
    body.push('\n');
    atomic_write(&config.output_dir.join(ENERGY_FILE), body.as_bytes())?;
    write_manifest(&config.output_dir, "energy", config, started, &[ENERGY_FILE], None)?;
    Ok(())
}

fn check_uniform(times: &[f64], pid: u64) -> Result<(), CliError> {
    if times.len() < 3 {
        return Err(CliError::Validation(format!(
            "point {pid}: need at least 3 samples for energy quadrature"
        )));
    }
    let h = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(CliError::Validation(format!(
                "point {pid}: non-uniform time grid (dt must divide t_end)"
            )));
        }
    }
    Ok(())
}

struct Csv {
    header: String,
    rows: Vec<Vec<f64>>,
}

fn read_csv(path: &Path) -> Result<Csv, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Validation(format!("{} is empty", path.display())))?
        .to_string();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| {
            CliError::Validation(format!("{} line {}: {e}", path.display(), idx + 2))
        })?);
    }
    Ok(Csv { header, rows })
}
