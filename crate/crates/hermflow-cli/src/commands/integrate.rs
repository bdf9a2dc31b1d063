//! `integrate`: geodesic flow over a field with trajectory and observables
//! emission.

use std::fmt::Write as _;
use std::path::Path;

use hermflow_core::field::{thread_cap_from_env, FieldPoint, SampledField};
use hermflow_core::geodesic::{integrate, InitialData, Trajectory};
use hermflow_core::{SplitMix64, Tolerances};

use crate::config::{RunConfig, VelocitySpec};
use crate::error::CliError;
use crate::io::{atomic_write, fmt_float};
use crate::manifest::{now_unix_ms, write_manifest};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const OBSERVABLES_FILE: &str = "observables.csv";

/// Fixed stream tag for velocity draws, distinct from generation seeds.
const VELOCITY_STREAM: u64 = 0x76656c;
/// Scale of random velocity draws before projection.
const VELOCITY_SCALE: f64 = 0.5;

/// Integrates every field point from t = 0 to `t_end` and writes
/// `trajectory.csv` (states) and `observables.csv` (monitors). Rows whose
/// constraint residuals exceed the drift tolerance are flagged on standard
/// error and the command exits with the drift code after writing all files.
pub fn cmd_integrate(config: &RunConfig, field_path: &Path) -> Result<(), CliError> {
    let started = now_unix_ms();
    let tol = config.tolerances()?;
    let records = super::load_field(field_path, &tol)?;

    let points: Vec<FieldPoint> = records
        .iter()
        .map(|(record, pair)| FieldPoint {
            id: record.point_id,
            pair: pair.clone(),
            weight: record.weight,
        })
        .collect();
    let field = SampledField::new(points).map_err(CliError::from)?;

    let make_init = |point: &FieldPoint| -> hermflow_core::Result<InitialData> {
        match &config.velocity {
            VelocitySpec::Random => {
                let seed = SplitMix64::derive(config.seed ^ VELOCITY_STREAM, point.id).next_u64();
                InitialData::random(&point.pair, seed, VELOCITY_SCALE, &tol)
            }
            VelocitySpec::Explicit(list) => {
                let spec = list.iter().find(|v| v.point_id == point.id).ok_or_else(|| {
                    hermflow_core::Error::InvalidInput(format!(
                        "no explicit velocity for point {}",
                        point.id
                    ))
                })?;
                let h = hermflow_core::SquareMatrix::from_rows(&spec.h)?;
                let a = hermflow_core::SquareMatrix::from_rows(&spec.a)?;
                InitialData::new(point.pair.clone(), h, a, &tol)
            }
        }
    };

    let threads = thread_cap_from_env();
    let trajectories: Vec<Trajectory> = field
        .map_pointwise(threads, |p| {
            let init = make_init(p)?;
            integrate(&init, config.t_end, config.dt, config.retraction_every, &tol)
        })
        .map_err(CliError::from)?;

    let dim = config.dim;
    write_trajectory_csv(config, dim, field.points(), &trajectories)?;
    let flagged = write_observables_csv(config, field.points(), &trajectories, &tol)?;

    write_manifest(
        &config.output_dir,
        "integrate",
        config,
        started,
        &[TRAJECTORY_FILE, OBSERVABLES_FILE],
        None,
    )?;

    if !flagged.is_empty() {
        for (pid, t, resid) in &flagged {
            eprintln!(
                "drift flag: point {pid} at t = {t}: residual {resid:.3e} exceeds {:.1e}",
                tol.drift
            );
        }
        return Err(CliError::Drift(format!(
            "{} row(s) exceeded the drift tolerance",
            flagged.len()
        )));
    }
    Ok(())
}

fn write_trajectory_csv(
    config: &RunConfig,
    dim: usize,
    points: &[FieldPoint],
    trajectories: &[Trajectory],
) -> Result<(), CliError> {
    let mut csv = String::from("point_id,t");
    for i in 0..dim {
        for j in 0..dim {
            write!(csv, ",g_{i}_{j}").unwrap();
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            write!(csv, ",omega_{i}_{j}").unwrap();
        }
    }
    csv.push('\n');
    for (point, traj) in points.iter().zip(trajectories) {
        for (t, state) in traj.times().iter().zip(traj.states()) {
            write!(csv, "{},{}", point.id, fmt_float(*t)).unwrap();
            let g = state.pair().metric();
            let om = state.pair().form();
            for i in 0..dim {
                for j in 0..dim {
                    write!(csv, ",{}", fmt_float(g[(i, j)])).unwrap();
                }
            }
            for i in 0..dim {
                for j in 0..dim {
                    write!(csv, ",{}", fmt_float(om[(i, j)])).unwrap();
                }
            }
            csv.push('\n');
        }
    }
    atomic_write(&config.output_dir.join(TRAJECTORY_FILE), csv.as_bytes())
}

fn write_observables_csv(
    config: &RunConfig,
    points: &[FieldPoint],
    trajectories: &[Trajectory],
    tol: &Tolerances,
) -> Result<Vec<(u64, f64, f64)>, CliError> {
    let mut csv = String::from(
        "point_id,t,compat_resid,tang_resid,e_density,I1,p_num,p_pred,trX_num,trX_pred,xw_dev\n",
    );
    let mut flagged = Vec::new();
    for (point, traj) in points.iter().zip(trajectories) {
        for m in traj.monitors() {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                point.id,
                fmt_float(m.t),
                fmt_float(m.compat_resid),
                fmt_float(m.tang_resid),
                fmt_float(m.e_density),
                fmt_float(m.i1),
                fmt_float(m.p_num),
                fmt_float(m.p_pred),
                fmt_float(m.tr_x_num),
                fmt_float(m.tr_x_pred),
                fmt_float(m.xw_dev),
            )
            .unwrap();
            let worst = m.compat_resid.max(m.tang_resid);
            if worst > tol.drift {
                flagged.push((point.id, m.t, worst));
            }
        }
    }
    atomic_write(&config.output_dir.join(OBSERVABLES_FILE), csv.as_bytes())?;
    Ok(flagged)
}
