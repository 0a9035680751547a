//! Built-in verification suites. Each prints one row per check.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use evoinc_core::analysis::{convergence_order, stability_check};
use evoinc_core::picard::{continue_maximal, picard_solve};
use evoinc_core::{ConvexPotential, Coupling, DMatrix, DVector, Forcing, Mode, Potential, ProblemSpec, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

pub const SUITES: [&str; 5] = ["prox_oracle", "manufactured", "contraction", "stability", "blowup"];

/// Seed for every randomized suite; runs are reproducible.
pub const SEED: u64 = 20_240_601;

/// Pinned ceiling for the fitted stability constant on the linear testbed.
pub const STABILITY_CEILING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub measured: String,
    pub bound: String,
    pub pass: bool,
}

impl Row {
    fn new(name: impl Into<String>, measured: impl Into<String>, bound: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            measured: measured.into(),
            bound: bound.into(),
            pass,
        }
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<36} {:>14} {:>16}  {}",
            self.name,
            self.measured,
            self.bound,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

pub fn header() -> String {
    format!("{:<36} {:>14} {:>16}  {}", "check", "measured", "bound", "result")
}

pub fn run_suite(name: &str) -> CliResult<Vec<Row>> {
    match name {
        "prox_oracle" => Ok(prox_oracle()),
        "manufactured" => manufactured(),
        "contraction" => contraction(),
        "stability" => stability(),
        "blowup" => blowup(),
        other => Err(CliError::UnknownSuite(other.to_string(), SUITES.join(", "))),
    }
}

fn s(x: f64) -> DVector<f64> {
    DVector::from_vec(vec![x])
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc <= fd {
            (b, d, fd) = (d, c, fc);
            c = b - g * (b - a);
            fc = f(c);
        } else {
            (a, c, fc) = (c, d, fd);
            d = a + g * (b - a);
            fd = f(d);
        }
        if b - a < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Grid search between 0 and z, refined by golden section.
fn brute_prox(psi: &dyn Fn(f64) -> f64, lambda: f64, z: f64) -> f64 {
    let obj = |x: f64| psi(x) + (x - z) * (x - z) / (2.0 * lambda);
    let (lo, hi) = (z.min(0.0), z.max(0.0));
    if hi == lo {
        return 0.0;
    }
    let n = 4000;
    let dx = (hi - lo) / n as f64;
    let best = (0..=n)
        .map(|i| lo + i as f64 * dx)
        .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
        .unwrap();
    golden(obj, (best - dx).max(lo), (best + dx).min(hi))
}

type Profile = Box<dyn Fn(f64) -> f64>;

fn prox_oracle() -> Vec<Row> {
    let start = Instant::now();
    let catalog: Vec<(Potential, Profile)> = vec![
        (Potential::quadratic(1.5).unwrap(), Box::new(|x: f64| 0.75 * x * x)),
        (Potential::abs_value(), Box::new(|x: f64| x.abs())),
        (Potential::x_log_x(), Box::new(|x: f64| x.abs() * x.abs().ln_1p())),
        (Potential::x_exp_x(), Box::new(|x: f64| x.abs() * x.abs().exp())),
        (
            Potential::power_plus_abs(1.5).unwrap(),
            Box::new(|x: f64| x.abs().powf(1.5) / 1.5 + x.abs()),
        ),
        (
            Potential::exp_power(2.0).unwrap(),
            Box::new(|x: f64| (x * x / 2.0 + x.abs()).exp() - 1.0),
        ),
        (
            Potential::exp_x_log_x(),
            Box::new(|x: f64| (x.abs() * x.abs().ln_1p()).exp() - 1.0),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut rows = Vec::new();
    for (pot, psi) in &catalog {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let lambda = rng.gen_range(0.01..10.0);
            let z = rng.gen_range(-20.0..20.0);
            let err = match pot.prox(lambda, &s(z), 1e-12) {
                Ok(p) => (p.point[0] - brute_prox(psi.as_ref(), lambda, z)).abs(),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(err);
        }
        rows.push(Row::new(
            format!("prox {} (100 samples)", pot.name()),
            format!("{worst:.2e}"),
            "<= 1e-6",
            worst <= 1e-6,
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    rows.push(Row::new(
        "prox oracle runtime [s]",
        format!("{secs:.3}"),
        "< 10",
        secs < 10.0,
    ));
    rows
}

fn damped(u0: f64, v0: f64, coupling: Coupling) -> ProblemSpec {
    ProblemSpec::new(
        Arc::new(Potential::quadratic(1.0).unwrap()),
        coupling,
        Forcing::zero(1),
        s(u0),
        s(v0),
        1.0,
    )
    .unwrap()
}

fn manufactured() -> CliResult<Vec<Row>> {
    let exact = 1.0 - (-1.0f64).exp();
    let spec = damped(0.0, 1.0, Coupling::zero());
    let end_error = |n: usize| -> CliResult<f64> {
        let sol = picard_solve(
            &spec,
            &SolverConfig {
                n_steps: n,
                ..Default::default()
            },
        )?;
        Ok((sol.u.last()[0] - exact).abs())
    };
    let fine = end_error(1000)?;
    let order = convergence_order(&[
        (1e-2, end_error(100)?),
        (5e-3, end_error(200)?),
        (2.5e-3, end_error(400)?),
    ])?;

    let osc = damped(1.0, 0.0, Coupling::linear(DMatrix::from_element(1, 1, 2.0))?);
    let w = 7f64.sqrt() / 2.0;
    let closed = |t: f64| (-t / 2.0).exp() * ((w * t).cos() + (w * t).sin() / (2.0 * w));
    let sol = picard_solve(
        &osc,
        &SolverConfig {
            n_steps: 1000,
            ..Default::default()
        },
    )?;
    let osc_err = sol
        .u
        .grid()
        .nodes()
        .enumerate()
        .map(|(k, t)| (sol.u.at(k)[0] - closed(t)).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Row::new(
            "u'' + u' = 0: |u(1) - (1 - 1/e)|",
            format!("{fine:.3e}"),
            "<= 2e-3",
            fine <= 2e-3,
        ),
        Row::new(
            "observed order, h = 1e-2 .. 2.5e-3",
            format!("{order:.4}"),
            "in [0.9, 1.1]",
            (0.9..=1.1).contains(&order),
        ),
        Row::new(
            "u'' + u' + 2u = 0: sup error",
            format!("{osc_err:.3e}"),
            "<= 5e-3",
            osc_err <= 5e-3,
        ),
    ])
}

/// Quadratic dissipation, `B(u) = 2u`, two components.
pub fn linear_testbed() -> ProblemSpec {
    ProblemSpec::new(
        Arc::new(Potential::quadratic(1.0).unwrap()),
        Coupling::linear(DMatrix::identity(2, 2) * 2.0).unwrap(),
        Forcing::from_fn(2, Arc::new(|t: f64| DVector::from_vec(vec![t.sin(), 1.0]))),
        DVector::from_vec(vec![1.0, -0.5]),
        DVector::from_vec(vec![0.0, 0.3]),
        1.0,
    )
    .unwrap()
}

fn contraction() -> CliResult<Vec<Row>> {
    let spec = linear_testbed();
    let cfg = SolverConfig {
        n_steps: 1000,
        picard_max_iter: 5000,
        mode: Mode::GlobalWeighted,
        ..Default::default()
    };
    let r = picard_solve(&spec, &cfg)?.report;
    let q = 1.0 - (-r.l_tilde * spec.horizon).exp();
    let worst = r.measured_contraction.iter().copied().fold(0.0, f64::max);
    let cap = (cfg.picard_tol.ln() / q.ln()).ceil() as usize + 2;
    Ok(vec![
        Row::new(
            "max weighted-norm ratio",
            format!("{worst:.5}"),
            format!("<= {:.5}", q + 0.05),
            worst <= q + 0.05,
        ),
        Row::new(
            "picard iterations",
            r.iterations.to_string(),
            format!("<= {cap}"),
            r.iterations <= cap,
        ),
    ])
}

fn stability() -> CliResult<Vec<Row>> {
    let spec = linear_testbed();
    let cfg = SolverConfig {
        n_steps: 1000,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut fitted = Vec::new();
    for delta in [1e-1, 1e-2, 1e-3] {
        let shift = Forcing::from_fn(
            2,
            Arc::new(move |t: f64| DVector::from_vec(vec![delta * t.cos(), -delta])),
        );
        let other = spec.with_forcing(spec.forcing.plus(&shift))?.with_initial(
            &spec.u0 + DVector::from_vec(vec![delta, 0.0]),
            &spec.v0 + DVector::from_vec(vec![0.0, delta]),
        )?;
        let r = stability_check(&spec, &other, &cfg, STABILITY_CEILING)?;
        rows.push(Row::new(
            format!("fitted M, delta = {delta:e}"),
            format!("{:.6}", r.fitted_m),
            format!("<= {STABILITY_CEILING}"),
            r.bound_ok,
        ));
        fitted.push(r.fitted_m);
    }
    let lo = fitted.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fitted.iter().copied().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    rows.push(Row::new(
        "relative spread of M",
        format!("{spread:.2e}"),
        "<= 0.05",
        spread <= 0.05,
    ));
    Ok(rows)
}

/// Escape time of `u'' = u^3`, `u(0) = u'(0) = 1`, past `|u| = level`, from
/// conserved energy: `sqrt(2) ∫_{1/level}^1 ds / sqrt(1 + s^4)` by Simpson.
pub fn blowup_reference(level: f64) -> f64 {
    let f = |x: f64| 1.0 / (1.0 + x.powi(4)).sqrt();
    let (a, b) = (1.0 / level, 1.0);
    let n = 200_000;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2f64.sqrt() * sum * h / 3.0
}

fn blowup() -> CliResult<Vec<Row>> {
    let spec = ProblemSpec::new(
        Arc::new(Potential::zero()),
        Coupling::cubic(-1.0, 1.0)?,
        Forcing::zero(1),
        s(1.0),
        s(1.0),
        2.0,
    )?;
    let escape = |n: usize| -> CliResult<f64> {
        let cfg = SolverConfig {
            n_steps: n,
            mode: Mode::LocalBall,
            blowup_threshold: 1e6,
            ..Default::default()
        };
        Ok(continue_maximal(&spec, &cfg)?
            .report
            .blowup
            .map_or(f64::INFINITY, |b| b.time))
    };
    let (coarse, fine) = (escape(2000)?, escape(4000)?);
    let reference = blowup_reference(1e6);
    let drift = (coarse - fine).abs() / fine;
    let err = (fine - reference).abs() / reference;
    Ok(vec![
        Row::new(
            "escape time, h = 1e-3",
            format!("{coarse:.5}"),
            "finite",
            coarse.is_finite(),
        ),
        Row::new(
            "escape time, h = 5e-4",
            format!("{fine:.5}"),
            "finite",
            fine.is_finite(),
        ),
        Row::new(
            "relative drift under h halving",
            format!("{drift:.3e}"),
            "<= 0.02",
            drift <= 0.02,
        ),
        Row::new(
            format!("relative error vs {reference:.5}"),
            format!("{err:.3e}"),
            "<= 0.02",
            err <= 0.02,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        let err = run_suite("nope").unwrap_err();
        assert_eq!(err.exit_code(), 64);
    }

    #[test]
    fn reference_blowup_time() {
        // sqrt(2) * 0.927037... for an infinite level.
        assert!((blowup_reference(1e12) - 1.311028777).abs() < 1e-6);
    }

    #[test]
    fn contraction_suite_passes() {
        assert!(run_suite("contraction").unwrap().iter().all(|r| r.pass));
    }
}
