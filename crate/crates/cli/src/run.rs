//! Executes an experiment and writes its artifacts:
//! `trajectory.csv`, `report.json`, `summary.txt`, and `fields.csv` for PDE runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use evoinc_core::analysis::{stability_check, StabilityReport};
use evoinc_core::picard::{continue_maximal, picard_solve, PicardReport};
use evoinc_core::resolvent::solve_auxiliary;
use evoinc_core::{DVector, Error, Mode, Trajectory};
use log::info;
use serde_json::{json, Map, Value};

use crate::config::Experiment;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Ok,
    BlowUp { time: f64 },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub report: Value,
    pub summary: String,
}

impl RunOutcome {
    pub fn into_result(self) -> CliResult<()> {
        match self.status {
            Status::Ok => Ok(()),
            Status::BlowUp { time } => Err(CliError::BlowUp { time }),
        }
    }
}

/// Finite numbers pass through; anything else becomes `marker`.
fn num(x: f64, marker: &str) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(marker)
    }
}

fn nums(xs: impl IntoIterator<Item = f64>, marker: &str) -> Value {
    Value::Array(xs.into_iter().map(|x| num(x, marker)).collect())
}

fn picard_json(r: &PicardReport) -> Value {
    let max_ratio = r.measured_contraction.iter().copied().fold(0.0, f64::max);
    json!({
        "iterations": r.iterations,
        "final_residual": num(r.final_residual, "blowup"),
        "max_contraction_ratio": num(max_ratio, "blowup"),
        "measured_contraction": nums(r.measured_contraction.iter().copied(), "blowup"),
        "horizon_used": num(r.horizon_used, "blowup"),
        "t1": num(r.t1, "unbounded"),
        "t2": num(r.t2, "unbounded"),
        "l_tilde": num(r.l_tilde, "unbounded"),
    })
}

fn stability_json(r: &StabilityReport) -> Value {
    json!({
        "sup_diff_sq": num(r.sup_diff_sq, "blowup"),
        "data_gap": num(r.data_gap, "blowup"),
        "alpha_integral": num(r.alpha_integral, "unbounded"),
        "fitted_m": num(r.fitted_m, "blowup"),
        "m_max": num(r.m_max, "unbounded"),
        "bound_ok": r.bound_ok,
    })
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn write_trajectory(path: &Path, u: &Trajectory, v: &Trajectory, eta: &[DVector<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "component_index", "u", "v", "eta"])?;
    for (k, t) in u.grid().nodes().enumerate() {
        for (i, ((ui, vi), ei)) in u.at(k).iter().zip(v.at(k).iter()).zip(eta[k].iter()).enumerate() {
            w.write_record([fmt(t), i.to_string(), fmt(*ui), fmt(*vi), fmt(*ei)])?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Solved {
    u: Trajectory,
    v: Trajectory,
    /// One selection per node; node 0 carries the minimal-norm element at `v0`.
    eta: Vec<DVector<f64>>,
    report: PicardReport,
}

fn solve(exp: &Experiment) -> CliResult<Result<Solved, (f64, f64)>> {
    let spec = &exp.spec;
    let eta0 = spec.potential.subdiff_select(&spec.v0);
    if exp.continuation {
        let cfg = evoinc_core::SolverConfig {
            mode: Mode::LocalBall,
            ..exp.cfg.clone()
        };
        let sol = continue_maximal(spec, &cfg)?;
        let (_, sel) = solve_auxiliary(
            spec.potential.as_ref(),
            &spec.coupling,
            &spec.forcing,
            &sol.u,
            &spec.v0,
            &cfg,
        )?;
        let mut eta = vec![eta0];
        eta.extend(sel.values().iter().cloned());
        return Ok(Ok(Solved {
            u: sol.u,
            v: sol.v,
            eta,
            report: sol.report,
        }));
    }
    match picard_solve(spec, &exp.cfg) {
        Ok(sol) => {
            let mut eta = vec![eta0];
            eta.extend(sol.eta.values().iter().cloned());
            Ok(Ok(Solved {
                u: sol.u,
                v: sol.v,
                eta,
                report: sol.report,
            }))
        }
        Err(Error::BlowUp { time, norm }) => Ok(Err((time, norm))),
        Err(e) => Err(e.into()),
    }
}

/// Runs the experiment and writes every artifact into its output directory.
pub fn run(exp: &Experiment) -> CliResult<RunOutcome> {
    let dir = &exp.output.dir;
    fs::create_dir_all(dir)?;
    info!(
        "{}: solving (dim {}, {} steps)",
        exp.name,
        exp.spec.dim(),
        exp.cfg.n_steps
    );

    let mut report = Map::new();
    report.insert("experiment".into(), json!(exp.name));
    report.insert(
        "mode".into(),
        json!(match exp.cfg.mode {
            Mode::LocalBall => "local",
            Mode::GlobalWeighted => "global",
        }),
    );
    report.insert("continuation".into(), json!(exp.continuation));
    report.insert("dim".into(), json!(exp.spec.dim()));
    report.insert("horizon".into(), json!(exp.spec.horizon));
    report.insert("n_steps".into(), json!(exp.cfg.n_steps));
    report.insert("step".into(), json!(exp.spec.horizon / exp.cfg.n_steps as f64));

    let mut summary = String::new();
    writeln!(summary, "experiment: {}", exp.name).unwrap();
    writeln!(summary, "dimension: {}, horizon: {}", exp.spec.dim(), exp.spec.horizon).unwrap();

    let status = match solve(exp)? {
        Ok(s) => {
            let last = s.u.grid().n_nodes() - 1;
            let blowup = s.report.blowup;
            report.insert("status".into(), json!(if blowup.is_some() { "blowup" } else { "ok" }));
            report.insert("picard".into(), picard_json(&s.report));
            report.insert("t_final".into(), json!(s.u.grid().end()));
            report.insert("u_at_T".into(), nums(s.u.at(last).iter().copied(), "blowup"));
            report.insert("v_at_T".into(), nums(s.v.at(last).iter().copied(), "blowup"));
            report.insert(
                "blowup_time".into(),
                blowup.map_or(Value::Null, |b| num(b.time, "blowup")),
            );
            report.insert(
                "blowup_norm".into(),
                blowup.map_or(Value::Null, |b| num(b.norm, "blowup")),
            );

            writeln!(summary, "status: {}", if blowup.is_some() { "blowup" } else { "ok" }).unwrap();
            writeln!(
                summary,
                "picard iterations: {}, final residual: {:.3e}",
                s.report.iterations, s.report.final_residual
            )
            .unwrap();
            writeln!(summary, "solved on [0, {}]", s.u.grid().end()).unwrap();
            writeln!(
                summary,
                "|u(T)| = {:.6e}, |v(T)| = {:.6e}",
                s.u.at(last).norm(),
                s.v.at(last).norm()
            )
            .unwrap();
            if let Some(b) = blowup {
                writeln!(
                    summary,
                    "escaped past |u| = {} at t = {}",
                    exp.cfg.blowup_threshold, b.time
                )
                .unwrap();
            }

            if exp.output.trajectory {
                write_trajectory(&dir.join("trajectory.csv"), &s.u, &s.v, &s.eta)?;
            }
            if let Some(pde) = &exp.pde {
                let mut w = csv::Writer::from_path(dir.join("fields.csv"))?;
                w.write_record(["t", "x", "u", "v"])?;
                for row in pde.field_rows(&s.u, &s.v) {
                    w.write_record([fmt(row.t), fmt(row.x), fmt(row.u), fmt(row.v)])?;
                }
                w.flush()?;
                let energy: Vec<f64> = s.v.values().iter().map(|v| pde.kinetic_energy(v)).collect();
                report.insert("kinetic_energy".into(), nums(energy.iter().copied(), "blowup"));
            }
            match blowup {
                Some(b) => Status::BlowUp { time: b.time },
                None => Status::Ok,
            }
        }
        Err((time, norm)) => {
            report.insert("status".into(), json!("blowup"));
            report.insert("blowup_time".into(), num(time, "blowup"));
            report.insert("blowup_norm".into(), num(norm, "blowup"));
            writeln!(summary, "status: blowup at t = {time} (|u| = {norm:e})").unwrap();
            if exp.output.trajectory {
                let mut w = csv::Writer::from_path(dir.join("trajectory.csv"))?;
                w.write_record(["t", "component_index", "u", "v", "eta"])?;
                w.flush()?;
            }
            Status::BlowUp { time }
        }
    };

    if let Some((other, m_max)) = &exp.stability {
        let r = stability_check(&exp.spec, other, &exp.cfg, *m_max)?;
        writeln!(
            summary,
            "stability: sup|u1-u2|^2 = {:.3e}, data gap = {:.3e}, fitted M = {:.4} (ceiling {}) -> {}",
            r.sup_diff_sq,
            r.data_gap,
            r.fitted_m,
            r.m_max,
            if r.bound_ok { "ok" } else { "VIOLATED" }
        )
        .unwrap();
        report.insert("stability".into(), stability_json(&r));
    }

    let report = Value::Object(report);
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    if exp.output.summary {
        fs::write(dir.join("summary.txt"), &summary)?;
    }
    info!("{}: wrote artifacts to {}", exp.name, dir.display());
    Ok(RunOutcome {
        status,
        report,
        summary,
    })
}
