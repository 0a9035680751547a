//! Quantitative checks: discrete Gronwall bounds, the data-stability
//! estimate, and observed convergence orders.

use crate::error::{Error, Result};
use crate::picard::picard_solve;
use crate::problem::{Mode, ProblemSpec, SolverConfig};
use crate::trajectory::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallBound {
    /// `b exp(∫_0^t lambda)` per node.
    pub bound: Vec<f64>,
    /// Nodes where `a(t) > bound(t) (1 + rel_tol)`.
    pub violations: Vec<usize>,
}

/// Gronwall bound for `a(t) <= b + ∫_0^t lambda(s) a(s) ds`.
pub fn gronwall_bound(a: &[f64], b: f64, lambda: &[f64], grid: &TimeGrid, rel_tol: f64) -> Result<GronwallBound> {
    let n = grid.n_nodes();
    if a.len() != n || lambda.len() != n {
        return Err(Error::DimensionMismatch {
            what: "gronwall samples",
            expected: n,
            found: if a.len() != n { a.len() } else { lambda.len() },
        });
    }
    if let Some(bad) = lambda.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, found {bad}"
        )));
    }
    let bound: Vec<f64> = grid
        .cumulative_trapezoid(lambda)
        .into_iter()
        .map(|integral| b * integral.exp())
        .collect();
    let violations = a
        .iter()
        .zip(&bound)
        .enumerate()
        .filter(|(_, (a, bd))| **a > **bd * (1.0 + rel_tol))
        .map(|(k, _)| k)
        .collect();
    Ok(GronwallBound { bound, violations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `max_t |u1(t) - u2(t)|^2`.
    pub sup_diff_sq: f64,
    /// `|u0^1 - u0^2|^2 + |v0^1 - v0^2|^2 + |f - g|^2_{L^2}`.
    pub data_gap: f64,
    /// `∫_0^T alpha`.
    pub alpha_integral: f64,
    /// `sup_diff_sq / (e^{∫alpha} data_gap)`; 0 when the data coincide.
    pub fitted_m: f64,
    pub m_max: f64,
    /// `sup_diff_sq <= m_max e^{∫alpha} data_gap`.
    pub bound_ok: bool,
}

/// Solves both problems in the weighted-norm mode and measures how far the
/// solutions drift apart relative to the gap in their data.
///
/// The specs must share potential, coupling and horizon; they may differ in
/// forcing and initial data. The `L^2` gap of the forcings is the trapezoid
/// rule applied to `|f(t) - g(t)|^2`.
pub fn stability_check(
    spec1: &ProblemSpec,
    spec2: &ProblemSpec,
    cfg: &SolverConfig,
    m_max: f64,
) -> Result<StabilityReport> {
    if spec1.horizon != spec2.horizon {
        return Err(Error::InvalidParameter("stability check needs a common horizon".into()));
    }
    if spec1.dim() != spec2.dim() {
        return Err(Error::DimensionMismatch {
            what: "stability pair",
            expected: spec1.dim(),
            found: spec2.dim(),
        });
    }
    if !spec1.coupling.is_global() || !spec2.coupling.is_global() {
        return Err(Error::GlobalModulusRequired);
    }
    let cfg = SolverConfig {
        mode: Mode::GlobalWeighted,
        ..cfg.clone()
    };
    let s1 = picard_solve(spec1, &cfg)?;
    let s2 = picard_solve(spec2, &cfg)?;
    let grid = *s1.u.grid();

    let sup_diff_sq = s1.u.pointwise_distance_sq(&s2.u).into_iter().fold(0.0, f64::max);
    let forcing_gap = grid.integrate(|t| (spec1.forcing.eval(t) - spec2.forcing.eval(t)).norm_squared());
    let data_gap = (&spec1.u0 - &spec2.u0).norm_squared() + (&spec1.v0 - &spec2.v0).norm_squared() + forcing_gap;
    let alpha_integral = spec1.coupling.lipschitz_budget(None, &grid)?;
    let growth = alpha_integral.exp();
    let fitted_m = if data_gap > 0.0 {
        sup_diff_sq / (growth * data_gap)
    } else {
        0.0
    };
    Ok(StabilityReport {
        sup_diff_sq,
        data_gap,
        alpha_integral,
        fitted_m,
        m_max,
        bound_ok: sup_diff_sq <= m_max * growth * data_gap,
    })
}

/// Mean observed order `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` over
/// consecutive `(h, error)` pairs with decreasing `h`.
pub fn convergence_order(errors: &[(f64, f64)]) -> Result<f64> {
    if errors.len() < 2 {
        return Err(Error::DegenerateInput("need at least two (h, error) pairs".into()));
    }
    if errors.iter().any(|&(h, e)| !(h > 0.0) || !(e > 0.0) || !e.is_finite()) {
        return Err(Error::DegenerateInput("step sizes and errors must be positive".into()));
    }
    if errors.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(Error::DegenerateInput("step sizes must decrease".into()));
    }
    let orders: Vec<f64> = errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect();
    Ok(orders.iter().sum::<f64>() / orders.len() as f64)
}
