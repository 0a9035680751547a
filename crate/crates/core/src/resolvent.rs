//! Proximal implicit Euler for the velocity inclusion
//! `v' + dPsi(v) ∋ f(t) - B(t, u(t))` with `u` frozen.

use nalgebra::DVector;

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::potentials::ConvexPotential;
use crate::problem::{Forcing, SolverConfig};
use crate::trajectory::{SelectionTrajectory, Trajectory};

/// Relative slack allowed by [`contraction_estimate`] before a node is flagged.
pub const CONTRACTION_SLACK: f64 = 0.05;

/// Runs `v_{k+1} = prox_{h Psi}(v_k + h (f(t_{k+1}) - B(t_{k+1}, u_k)))` on the
/// grid of `u` and records `eta_k = (v_k + h ftilde_k - v_{k+1}) / h`, the
/// subgradient in `dPsi(v_{k+1})` selected by the step.
pub fn solve_auxiliary(
    potential: &dyn ConvexPotential,
    coupling: &Coupling,
    forcing: &Forcing,
    u: &Trajectory,
    v0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(Trajectory, SelectionTrajectory)> {
    if v0.len() != u.dim() {
        return Err(Error::DimensionMismatch {
            what: "v0",
            expected: u.dim(),
            found: v0.len(),
        });
    }
    let grid = *u.grid();
    let h = grid.step();
    let mut v = Vec::with_capacity(grid.n_nodes());
    let mut eta = Vec::with_capacity(grid.n_steps());
    v.push(v0.clone());
    for k in 0..grid.n_steps() {
        let t = grid.node(k + 1);
        let ftilde = forcing.eval(t) - coupling.eval(t, u.at(k));
        let shifted = &v[k] + ftilde * h;
        let next = potential.prox(h, &shifted, cfg.prox_tol)?.point;
        eta.push((&shifted - &next) / h);
        v.push(next);
    }
    Ok((Trajectory::new(grid, v)?, SelectionTrajectory::new(grid, eta)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionNode {
    pub t: f64,
    /// `|v1 - v2|^2`.
    pub lhs: f64,
    /// `e^t ∫_0^t alpha^2 |u1 - u2|^2`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub nodes: Vec<ContractionNode>,
    /// Indices of nodes with `lhs > (1 + CONTRACTION_SLACK) rhs`.
    pub violations: Vec<usize>,
}

impl ContractionReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the Gronwall estimate for the velocity map at every node:
/// `|v1(t) - v2(t)|^2 <= e^t ∫_0^t alpha(s)^2 |u1(s) - u2(s)|^2 ds`
/// where `v_i = J(u_i)` share the forcing and initial velocity.
///
/// The modulus enters squared: the estimate follows from
/// `2 |dB| |dv| <= |dv|^2 + alpha^2 |du|^2`.
pub fn contraction_estimate(
    v1: &Trajectory,
    v2: &Trajectory,
    u1: &Trajectory,
    u2: &Trajectory,
    coupling: &Coupling,
    radius: Option<f64>,
) -> Result<ContractionReport> {
    let grid = *u1.grid();
    for other in [v1, v2, u2] {
        if other.grid() != &grid {
            return Err(Error::InvalidParameter("trajectories must share a grid".into()));
        }
    }
    let gap = u1.pointwise_distance_sq(u2);
    let weighted = grid
        .nodes()
        .zip(&gap)
        .map(|(t, g)| coupling.modulus(radius, t).map(|a| a * a * g))
        .collect::<Result<Vec<_>>>()?;
    let integral = grid.cumulative_trapezoid(&weighted);
    let lhs = v1.pointwise_distance_sq(v2);
    let mut nodes = Vec::with_capacity(grid.n_nodes());
    let mut violations = Vec::new();
    for (k, t) in grid.nodes().enumerate() {
        let rhs = (t - grid.t0()).exp() * integral[k];
        if lhs[k] > (1.0 + CONTRACTION_SLACK) * rhs + 1e-12 {
            violations.push(k);
        }
        nodes.push(ContractionNode { t, lhs: lhs[k], rhs });
    }
    Ok(ContractionReport { nodes, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;
    use crate::trajectory::TimeGrid;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn zero_potential_keeps_velocity() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let u = Trajectory::constant(g, &s(5.0));
        let (v, eta) = solve_auxiliary(
            &Potential::zero(),
            &Coupling::zero(),
            &Forcing::zero(1),
            &u,
            &s(1.0),
            &cfg(),
        )
        .unwrap();
        assert!(v.values().iter().all(|x| x[0] == 1.0));
        assert!(eta.values().iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn quadratic_decays_geometrically() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let u = Trajectory::constant(g, &s(0.0));
        let q = Potential::quadratic(1.0).unwrap();
        let (v, _) = solve_auxiliary(&q, &Coupling::zero(), &Forcing::zero(1), &u, &s(1.0), &cfg()).unwrap();
        assert_abs_diff_eq!(v.at(1)[0], 1.0 / 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v.at(2)[0], 1.0 / 2.25, epsilon = 1e-15);
    }

    #[test]
    fn abs_value_stops_in_finite_time() {
        let g = TimeGrid::new(0.6, 3).unwrap();
        let u = Trajectory::constant(g, &s(0.0));
        let (v, eta) = solve_auxiliary(
            &Potential::abs_value(),
            &Coupling::zero(),
            &Forcing::zero(1),
            &u,
            &s(0.3),
            &cfg(),
        )
        .unwrap();
        // Soft-threshold cascade max(v - h, 0).
        let mut expected = 0.3f64;
        for k in 1..=3 {
            expected = (expected - 0.2).max(0.0);
            assert_abs_diff_eq!(v.at(k)[0], expected, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(v.at(1)[0], 0.1, epsilon = 1e-15);
        assert_eq!(v.at(2)[0], 0.0);
        // While stopped, eta sits strictly inside Sgn(0) = [-1, 1].
        assert_eq!(eta.at(2)[0], 0.0);
        assert_abs_diff_eq!(eta.at(0)[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scheme_identity_holds() {
        let g = TimeGrid::new(1.0, 50).unwrap();
        let u = Trajectory::from_fn(g, |t| DVector::from_vec(vec![t.sin(), t * t])).unwrap();
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 2.0]);
        let c = Coupling::linear(k).unwrap();
        let f = Forcing::from_fn(2, std::sync::Arc::new(|t: f64| DVector::from_vec(vec![t.cos(), 1.0])));
        let pot = Potential::x_log_x();
        let v0 = DVector::from_vec(vec![0.5, -1.0]);
        let (v, eta) = solve_auxiliary(&pot, &c, &f, &u, &v0, &cfg()).unwrap();
        let h = g.step();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kk in 0..g.n_steps() {
            let t = g.node(kk + 1);
            let res = (v.at(kk + 1) - v.at(kk)) / h + eta.at(kk) + c.eval(t, u.at(kk)) - f.eval(t);
            assert!(res.norm() <= 1e-9, "step {kk}: {}", res.norm());
            let probes: Vec<_> = (0..20)
                .map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0)))
                .collect();
            assert!(pot.subgradient_gap(v.at(kk + 1), eta.at(kk), &probes) >= -1e-8);
        }
    }

    #[test]
    fn dissipates_energy_and_contracts_initial_data() {
        let g = TimeGrid::new(2.0, 200).unwrap();
        let u = Trajectory::constant(g, &s(0.0));
        for pot in [
            Potential::abs_value(),
            Potential::x_exp_x(),
            Potential::power_plus_abs(1.5).unwrap(),
        ] {
            let run = |v0: f64| {
                solve_auxiliary(&pot, &Coupling::zero(), &Forcing::zero(1), &u, &s(v0), &cfg())
                    .unwrap()
                    .0
            };
            let (a, b) = (run(3.0), run(-1.5));
            for k in 0..g.n_steps() {
                assert!(pot.value(a.at(k + 1)) <= pot.value(a.at(k)));
                assert!((a.at(k) - b.at(k)).norm() <= 4.5 + 1e-12);
            }
        }
    }

    #[test]
    fn first_order_in_time() {
        let q = Potential::quadratic(1.0).unwrap();
        let err = |n: usize| {
            let g = TimeGrid::new(1.0, n).unwrap();
            let u = Trajectory::constant(g, &s(0.0));
            let (v, _) = solve_auxiliary(&q, &Coupling::zero(), &Forcing::zero(1), &u, &s(1.0), &cfg()).unwrap();
            g.nodes()
                .zip(v.values())
                .map(|(t, x)| (x[0] - (-t).exp()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(100), err(200));
        assert!((e1 / e2).log2() >= 0.9);
    }

    #[test]
    fn contraction_examples() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let lin = Coupling::linear(DMatrix::identity(1, 1)).unwrap();
        let zero_u = Trajectory::constant(g, &s(0.0));
        let one_u = Trajectory::constant(g, &s(1.0));
        let run = |c: &Coupling, u: &Trajectory| {
            solve_auxiliary(&Potential::zero(), c, &Forcing::zero(1), u, &s(0.0), &cfg())
                .unwrap()
                .0
        };
        // Identical inputs.
        let v = run(&lin, &one_u);
        let rep = contraction_estimate(&v, &v, &one_u, &one_u, &lin, None).unwrap();
        assert!(rep.holds());
        assert!(rep.nodes.iter().all(|n| n.rhs == 0.0 && n.lhs <= 1e-12));
        // No coupling.
        let z = Coupling::zero();
        let rep = contraction_estimate(&run(&z, &zero_u), &run(&z, &one_u), &zero_u, &one_u, &z, None).unwrap();
        assert!(rep.nodes.iter().all(|n| n.lhs <= 1e-12));
        // v1 - v2 = t.
        let (v1, v2) = (run(&lin, &zero_u), run(&lin, &one_u));
        let rep = contraction_estimate(&v1, &v2, &zero_u, &one_u, &lin, None).unwrap();
        let last = rep.nodes.last().unwrap();
        assert_abs_diff_eq!(last.lhs, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(last.rhs, 1f64.exp(), epsilon = 1e-12);
        assert!(rep.holds());
    }

    #[test]
    fn modulus_enters_squared() {
        // alpha = 3, undamped: |dv(1)|^2 = 9 exceeds e * ∫ alpha |du|^2 = 3e,
        // but stays below e * ∫ alpha^2 |du|^2 = 9e.
        let g = TimeGrid::new(1.0, 100).unwrap();
        let lin = Coupling::linear(DMatrix::identity(1, 1) * 3.0).unwrap();
        let zero_u = Trajectory::constant(g, &s(0.0));
        let one_u = Trajectory::constant(g, &s(1.0));
        let run = |u: &Trajectory| {
            solve_auxiliary(&Potential::zero(), &lin, &Forcing::zero(1), u, &s(0.0), &cfg())
                .unwrap()
                .0
        };
        let (v1, v2) = (run(&zero_u), run(&one_u));
        let lhs = (v1.last() - v2.last()).norm_squared();
        assert!(lhs > 3.0 * 1f64.exp());
        let rep = contraction_estimate(&v1, &v2, &zero_u, &one_u, &lin, None).unwrap();
        assert!(rep.holds());
    }

    #[test]
    fn contraction_requires_shared_grid() {
        let g1 = TimeGrid::new(1.0, 10).unwrap();
        let g2 = TimeGrid::new(1.0, 20).unwrap();
        let a = Trajectory::constant(g1, &s(0.0));
        let b = Trajectory::constant(g2, &s(0.0));
        assert!(contraction_estimate(&a, &a, &a, &b, &Coupling::zero(), None).is_err());
    }
}
