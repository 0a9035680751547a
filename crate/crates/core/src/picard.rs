//! Picard iteration for the trajectory map `F(u)(t) = u0 + ∫_0^t J(u)(s) ds`.
//!
//! Two regimes:
//! - [`Mode::GlobalWeighted`]: the whole horizon in the norm
//!   `sup_t e^{-L t} |u(t)|` with `L = 2 ∫ alpha`, under which `F` contracts
//!   with factor `1 - e^{-L T}`;
//! - [`Mode::LocalBall`]: sup-norm on a short horizon `min(T1, T2)` where `F`
//!   maps the ball of radius `R` around `u0` into itself and contracts.
//!
//! [`continue_maximal`] chains local windows until the horizon is covered or
//! the trajectory escapes past the blow-up threshold.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::{Mode, ProblemSpec, SolverConfig};
use crate::resolvent::solve_auxiliary;
use crate::trajectory::{SelectionTrajectory, TimeGrid, Trajectory};

/// Safety factor applied to the certified local horizon.
pub const HORIZON_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    pub time: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    pub iterations: usize,
    /// Last update size in the norm of the mode.
    pub final_residual: f64,
    /// Ratios of successive update sizes.
    pub measured_contraction: Vec<f64>,
    pub horizon_used: f64,
    pub t1: f64,
    pub t2: f64,
    pub l_tilde: f64,
    pub blowup: Option<BlowUp>,
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub u: Trajectory,
    pub v: Trajectory,
    pub eta: SelectionTrajectory,
    pub report: PicardReport,
}

#[derive(Debug, Clone)]
pub struct MaximalSolution {
    pub u: Trajectory,
    pub v: Trajectory,
    pub report: PicardReport,
}

/// Local existence horizons for a ball of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizons {
    /// Self-map horizon.
    pub t1: f64,
    /// Contraction horizon; `+∞` when the coupling has zero modulus.
    pub t2: f64,
}

impl Horizons {
    /// Usable horizon within `available`: the full length when the certified
    /// horizon covers it, otherwise the certified horizon times [`HORIZON_SAFETY`].
    pub fn usable(&self, available: f64) -> f64 {
        let certified = self.t1.min(self.t2);
        if HORIZON_SAFETY * certified >= available {
            available
        } else {
            HORIZON_SAFETY * certified
        }
    }
}

/// `F(u)_k = u0 + h Σ_{j<k} (v_j + v_{j+1}) / 2` with `v = J(u)`.
pub fn apply_fixed_point_map(spec: &ProblemSpec, cfg: &SolverConfig, u: &Trajectory) -> Result<Trajectory> {
    let (v, _) = velocity(spec, cfg, u, &spec.v0)?;
    integrate_velocity(&spec.u0, &v)
}

/// `T1 = R / (|v0| + 2 (|f|_1 + |alpha|_1 (R + |u0|) + |g|_1))` and
/// `T2 = 1 / (2 |alpha|_1)`, with the moduli taken at radius `R + |u0|` and
/// all `L^1` norms over the full horizon.
pub fn horizon_local(spec: &ProblemSpec, cfg: &SolverConfig, radius: f64) -> Result<Horizons> {
    let grid = TimeGrid::new(spec.horizon, cfg.n_steps)?;
    horizons_on(spec, &grid, &spec.u0, &spec.v0, radius)
}

fn horizons_on(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    u_start: &DVector<f64>,
    v_start: &DVector<f64>,
    radius: f64,
) -> Result<Horizons> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    let reach = radius + u_start.norm();
    let alpha_l1 = spec.coupling.lipschitz_budget(Some(reach), grid)?;
    let f_l1 = grid.integrate(|t| spec.forcing.eval(t).norm());
    let g_l1 = grid.integrate(|t| spec.coupling.zero_bound(t));
    let denom = v_start.norm() + 2.0 * (f_l1 + alpha_l1 * reach + g_l1);
    let t1 = if denom > 0.0 { radius / denom } else { f64::INFINITY };
    let t2 = if alpha_l1 > 0.0 {
        1.0 / (2.0 * alpha_l1)
    } else {
        f64::INFINITY
    };
    Ok(Horizons { t1, t2 })
}

/// Solves on the horizon dictated by `cfg.mode`, starting from `u ≡ u0`.
pub fn picard_solve(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<PicardSolution> {
    picard_run(spec, cfg, None)
}

/// Same as [`picard_solve`] but starting from a caller-supplied trajectory.
/// The guess must live on the grid the mode selects
/// (see [`solver_grid`]).
pub fn picard_solve_from(spec: &ProblemSpec, cfg: &SolverConfig, guess: Trajectory) -> Result<PicardSolution> {
    picard_run(spec, cfg, Some(guess))
}

/// Grid the Picard iteration runs on for `cfg.mode`.
pub fn solver_grid(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<TimeGrid> {
    spec.validate()?;
    cfg.validate(&spec.u0)?;
    let full = TimeGrid::new(spec.horizon, cfg.n_steps)?;
    match cfg.mode {
        Mode::GlobalWeighted => Ok(full),
        Mode::LocalBall => {
            let hz = horizons_on(spec, &full, &spec.u0, &spec.v0, cfg.ball_radius)?;
            let usable = hz.usable(spec.horizon);
            if usable >= spec.horizon {
                return Ok(full);
            }
            let h = full.step();
            let m = ((usable / h).floor() as usize).clamp(1, cfg.n_steps);
            TimeGrid::new(m as f64 * h, m)
        }
    }
}

fn picard_run(spec: &ProblemSpec, cfg: &SolverConfig, guess: Option<Trajectory>) -> Result<PicardSolution> {
    let grid = solver_grid(spec, cfg)?;
    let full = TimeGrid::new(spec.horizon, cfg.n_steps)?;
    let (norm, hz, l_tilde) = match cfg.mode {
        Mode::GlobalWeighted => {
            if !spec.coupling.is_global() {
                return Err(Error::GlobalModulusRequired);
            }
            let l_tilde = 2.0 * spec.coupling.lipschitz_budget(None, &full)?;
            let hz = horizons_on(spec, &full, &spec.u0, &spec.v0, cfg.ball_radius)?;
            (UpdateNorm::Weighted(l_tilde), hz, l_tilde)
        }
        Mode::LocalBall => {
            let hz = horizons_on(spec, &full, &spec.u0, &spec.v0, cfg.ball_radius)?;
            let reach = cfg.ball_radius + spec.u0.norm();
            let l_tilde = 2.0 * spec.coupling.lipschitz_budget(Some(reach), &full)?;
            (UpdateNorm::Sup, hz, l_tilde)
        }
    };
    let ball = match cfg.mode {
        Mode::LocalBall => Some(cfg.ball_radius),
        Mode::GlobalWeighted => None,
    };
    if let Some(g) = &guess {
        if g.grid() != &grid || g.dim() != spec.dim() {
            return Err(Error::InvalidParameter(
                "initial guess must live on the solver grid with the problem dimension".into(),
            ));
        }
    }
    let window = Window {
        grid,
        u_start: spec.u0.clone(),
        v_start: spec.v0.clone(),
        norm,
        ball,
    };
    let out = iterate(spec, cfg, &window, guess)?;
    Ok(PicardSolution {
        u: out.u,
        v: out.v,
        eta: out.eta,
        report: PicardReport {
            iterations: out.iterations,
            final_residual: out.residual,
            measured_contraction: out.ratios,
            horizon_used: grid.horizon(),
            t1: hz.t1,
            t2: hz.t2,
            l_tilde,
            blowup: None,
        },
    })
}

/// Maximal solution by local continuation.
///
/// Each window restarts from the terminal state of the previous one with
/// radius `R = 2 (|u| + 1)`, runs [`Mode::LocalBall`] iteration on the
/// certified horizon (at least one step), and the run stops when the horizon
/// is covered or `|u|` exceeds `cfg.blowup_threshold`.
pub fn continue_maximal(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<MaximalSolution> {
    spec.validate()?;
    cfg.validate(&spec.u0)?;
    let full = TimeGrid::new(spec.horizon, cfg.n_steps)?;
    let h = full.step();
    let n = cfg.n_steps;

    let mut u_vals = vec![spec.u0.clone()];
    let mut v_vals = vec![spec.v0.clone()];
    let mut iterations = 0;
    let mut final_residual: f64 = 0.0;
    let mut ratios = Vec::new();
    let mut first: Option<(Horizons, f64)> = None;
    let mut blowup = None;
    let mut k = 0;

    while k < n && blowup.is_none() {
        let u_cur = u_vals[k].clone();
        let v_cur = v_vals[k].clone();
        let radius = 2.0 * (u_cur.norm() + 1.0);
        let rest = TimeGrid::with_start(full.node(k), (n - k) as f64 * h, n - k)?;
        let hz = horizons_on(spec, &rest, &u_cur, &v_cur, radius)?;
        if first.is_none() {
            let reach = radius + u_cur.norm();
            first = Some((hz, 2.0 * spec.coupling.lipschitz_budget(Some(reach), &rest)?));
        }
        let usable = hz.usable(rest.horizon());
        let mut m = if usable >= rest.horizon() {
            n - k
        } else {
            ((usable / h).floor() as usize).clamp(1, n - k)
        };
        let out = loop {
            let window = Window {
                grid: TimeGrid::with_start(full.node(k), m as f64 * h, m)?,
                u_start: u_cur.clone(),
                v_start: v_cur.clone(),
                norm: UpdateNorm::Sup,
                // A single step depends only on the window's initial state, so it
                // is solved exactly and needs no self-map certificate.
                ball: (m > 1).then_some(radius),
            };
            match iterate(spec, cfg, &window, None) {
                Ok(out) => break Some(out),
                Err(Error::BallEscape { .. }) | Err(Error::BlowUp { .. }) if m > 1 => m = (m / 2).max(1),
                Err(Error::BlowUp { time, norm }) => {
                    blowup = Some(BlowUp { time, norm });
                    break None;
                }
                Err(e) => return Err(e),
            }
        };
        let Some(out) = out else { break };
        iterations += out.iterations;
        final_residual = final_residual.max(out.residual);
        ratios.extend(out.ratios);
        let (us, vs) = (out.u.into_values(), out.v.into_values());
        for (j, (uj, vj)) in us.into_iter().zip(vs).enumerate().skip(1) {
            let norm = uj.norm();
            let escaped = !norm.is_finite() || norm > cfg.blowup_threshold;
            u_vals.push(uj);
            v_vals.push(vj);
            if escaped {
                blowup = Some(BlowUp {
                    time: full.node(k + j),
                    norm,
                });
                break;
            }
        }
        k = u_vals.len() - 1;
    }

    let covered = u_vals.len() - 1;
    let (hz, l_tilde) = first.expect("at least one window runs");
    let (u, v) = if covered == 0 {
        // Blow-up detected inside the very first step; keep the initial state only.
        let g = TimeGrid::new(h, 1)?;
        (
            Trajectory::new(g, vec![spec.u0.clone(); 2])?,
            Trajectory::new(g, vec![spec.v0.clone(); 2])?,
        )
    } else {
        let g = TimeGrid::new(full.node(covered), covered)?;
        (Trajectory::new(g, u_vals)?, Trajectory::new(g, v_vals)?)
    };
    let horizon_used = blowup.map_or(full.node(covered), |b| b.time);
    Ok(MaximalSolution {
        u,
        v,
        report: PicardReport {
            iterations,
            final_residual,
            measured_contraction: ratios,
            horizon_used,
            t1: hz.t1,
            t2: hz.t2,
            l_tilde,
            blowup,
        },
    })
}

#[derive(Debug, Clone, Copy)]
enum UpdateNorm {
    Sup,
    Weighted(f64),
}

struct Window {
    grid: TimeGrid,
    u_start: DVector<f64>,
    v_start: DVector<f64>,
    norm: UpdateNorm,
    ball: Option<f64>,
}

struct WindowOutput {
    u: Trajectory,
    v: Trajectory,
    eta: SelectionTrajectory,
    iterations: usize,
    residual: f64,
    ratios: Vec<f64>,
}

fn velocity(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    u: &Trajectory,
    v_start: &DVector<f64>,
) -> Result<(Trajectory, SelectionTrajectory)> {
    solve_auxiliary(spec.potential.as_ref(), &spec.coupling, &spec.forcing, u, v_start, cfg)
}

fn integrate_velocity(u_start: &DVector<f64>, v: &Trajectory) -> Result<Trajectory> {
    let h = v.grid().step();
    let mut values = Vec::with_capacity(v.grid().n_nodes());
    let mut acc = u_start.clone();
    values.push(acc.clone());
    for w in v.values().windows(2) {
        acc += (&w[0] + &w[1]) * (0.5 * h);
        values.push(acc.clone());
    }
    Trajectory::new(*v.grid(), values)
}

fn iterate(spec: &ProblemSpec, cfg: &SolverConfig, window: &Window, guess: Option<Trajectory>) -> Result<WindowOutput> {
    let grid = window.grid;
    let mut u = guess.unwrap_or_else(|| Trajectory::constant(grid, &window.u_start));
    let mut ratios = Vec::new();
    let mut previous: Option<f64> = None;
    let mut iterations = 0;
    loop {
        let (v, _) = velocity(spec, cfg, &u, &window.v_start)?;
        let next = integrate_velocity(&window.u_start, &v)?;
        iterations += 1;
        if !next.is_finite() {
            let k = next
                .values()
                .iter()
                .position(|x| x.iter().any(|c| !c.is_finite()))
                .unwrap_or(0);
            return Err(Error::BlowUp {
                time: grid.node(k),
                norm: f64::INFINITY,
            });
        }
        if let Some(radius) = window.ball {
            let center = Trajectory::constant(grid, &window.u_start);
            let (k, distance) = next
                .values()
                .iter()
                .zip(center.values())
                .map(|(a, b)| (a - b).norm())
                .enumerate()
                .fold((0, 0.0), |acc, (k, d)| if d > acc.1 { (k, d) } else { acc });
            if distance > radius * (1.0 + 1e-12) {
                return Err(Error::BallEscape {
                    time: grid.node(k),
                    distance,
                    radius,
                });
            }
        }
        let update = match window.norm {
            UpdateNorm::Sup => next.sup_distance(&u),
            UpdateNorm::Weighted(l) => next.chi_distance(&u, l),
        };
        if let Some(prev) = previous {
            if prev > 0.0 {
                ratios.push(update / prev);
            }
        }
        previous = Some(update);
        u = next;
        if update <= cfg.picard_tol {
            let (v, eta) = velocity(spec, cfg, &u, &window.v_start)?;
            return Ok(WindowOutput {
                u,
                v,
                eta,
                iterations,
                residual: update,
                ratios,
            });
        }
        if iterations >= cfg.picard_max_iter {
            return Err(Error::MaxIterations {
                iterations,
                residual: update,
            });
        }
    }
}
