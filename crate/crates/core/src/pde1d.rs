//! Damped-wave instance on an interval:
//!
//! ```text
//! u_tt - (p)_x + b(t, x, u) = f,   p ∈ dpsi(u_tx),   u = Dirichlet data on the boundary.
//! ```
//!
//! Unknowns are the interior nodal values; the dissipation is
//! `Psi(v) = Σ_e h psi((v_{e+1} - v_e) / h)` over the cell edges with the
//! boundary velocities fixed at zero. The state space is plain `R^{n-1}`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::potentials::{ConvexPotential, Potential, PotentialKind, ProxResult};
use crate::problem::{Forcing, ProblemSpec};
use crate::trajectory::Trajectory;

const ADMM_MAX_ITER: usize = 50_000;
const DUAL_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    n_cells: usize,
    length: f64,
    left: f64,
    right: f64,
}

impl Mesh1D {
    /// Uniform mesh of `[0, length]` with Dirichlet values `left`, `right`.
    pub fn new(n_cells: usize, length: f64, left: f64, right: f64) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 cells, got {n_cells}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "length must be positive, got {length}"
            )));
        }
        if !(left.is_finite() && right.is_finite()) {
            return Err(Error::InvalidParameter("boundary values must be finite".into()));
        }
        Ok(Self {
            n_cells,
            length,
            left,
            right,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn boundary(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn interior_dim(&self) -> usize {
        self.n_cells - 1
    }

    /// Coordinate of mesh node `j`, `0 <= j <= n_cells`.
    pub fn node_x(&self, j: usize) -> f64 {
        if j == self.n_cells {
            self.length
        } else {
            j as f64 * self.spacing()
        }
    }

    /// Coordinate of interior unknown `i` (mesh node `i + 1`).
    pub fn interior_x(&self, i: usize) -> f64 {
        self.node_x(i + 1)
    }

    /// Edge difference quotients `(V_{e+1} - V_e) / h` of interior values
    /// padded with zero boundary values.
    pub fn gradient(&self, v: &DVector<f64>) -> Vec<f64> {
        let h = self.spacing();
        let n = self.n_cells;
        let node = |j: usize| if j == 0 || j == n { 0.0 } else { v[j - 1] };
        (0..n).map(|e| (node(e + 1) - node(e)) / h).collect()
    }

    /// Adjoint of [`Mesh1D::gradient`]: `(D^T p)_i = (p_i - p_{i+1}) / h`.
    pub fn gradient_adjoint(&self, p: &[f64]) -> DVector<f64> {
        let h = self.spacing();
        DVector::from_fn(self.interior_dim(), |i, _| (p[i] - p[i + 1]) / h)
    }

    /// Solves `(I + c L) x = b` with `L = tridiag(-1, 2, -1)`, `c >= 0`.
    fn solve_shifted_laplacian(&self, c: f64, b: &DVector<f64>) -> DVector<f64> {
        let m = self.interior_dim();
        let diag = 1.0 + 2.0 * c;
        let off = -c;
        // Thomas algorithm.
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        cp[0] = off / diag;
        dp[0] = b[0] / diag;
        for i in 1..m {
            let denom = diag - off * cp[i - 1];
            cp[i] = off / denom;
            dp[i] = (b[i] - off * dp[i - 1]) / denom;
        }
        let mut x = DVector::zeros(m);
        x[m - 1] = dp[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    }
}

/// `Psi(v) = Σ_e h psi((Dv)_e)` for a radial catalog profile `psi`.
#[derive(Debug, Clone)]
pub struct DiscretePotentialPsi {
    mesh: Mesh1D,
    psi: Potential,
}

impl DiscretePotentialPsi {
    pub fn new(mesh: Mesh1D, psi: Potential) -> Result<Self> {
        if !psi.is_radial() {
            return Err(Error::InvalidParameter(
                "edge potential must be a radial profile, not a separable composition".into(),
            ));
        }
        Ok(Self { mesh, psi })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn psi(&self) -> &Potential {
        &self.psi
    }

    fn edge_slope(&self, w: f64) -> f64 {
        if w == 0.0 {
            0.0
        } else {
            self.psi.profile_slope(w.abs()).copysign(w)
        }
    }

    #[cfg(test)]
    fn objective(&self, v: &DVector<f64>, lambda: f64, z: &DVector<f64>) -> f64 {
        self.value(v) + (v - z).norm_squared() / (2.0 * lambda)
    }

    /// Minimal-norm `h D^T p` over the free edge multipliers in `[-s0, s0]`.
    fn min_norm_flux(&self, p: &mut [f64], free: &[usize], s0: f64) {
        let h = self.mesh.spacing();
        let m = self.mesh.interior_dim();
        // r = h D^T p, r_i = p_i - p_{i+1}; column of edge e has +1 at e and -1 at e-1.
        let mut r = self.mesh.gradient_adjoint(p) * h;
        for _sweep in 0..10_000 {
            let mut change: f64 = 0.0;
            for &e in free {
                let mut dot = 0.0;
                let mut norm = 0.0;
                if e >= 1 {
                    dot -= r[e - 1];
                    norm += 1.0;
                }
                if e < m {
                    dot += r[e];
                    norm += 1.0;
                }
                let old = p[e];
                let target = (old - dot / norm).clamp(-s0, s0);
                let delta = target - old;
                if delta != 0.0 {
                    if e >= 1 {
                        r[e - 1] -= delta;
                    }
                    if e < m {
                        r[e] += delta;
                    }
                    p[e] = target;
                    change = change.max(delta.abs());
                }
            }
            if change <= 1e-15 * (1.0 + s0) {
                break;
            }
        }
    }

    /// Direct solve for quadratic profiles.
    fn prox_quadratic(&self, scale: f64, lambda: f64, z: &DVector<f64>) -> ProxResult {
        let c = lambda * scale / self.mesh.spacing();
        ProxResult {
            point: self.mesh.solve_shifted_laplacian(c, z),
            inner_iterations: 1,
            residual: 0.0,
        }
    }

    /// Scaled ADMM on `min |v - z|^2/(2 lambda) + Σ h psi(w_e)` s.t. `Dv = w`,
    /// with residual balancing of the penalty.
    fn prox_admm(&self, lambda: f64, z: &DVector<f64>, tol: f64) -> Result<ProxResult> {
        let mesh = &self.mesh;
        let h = mesh.spacing();
        let n = mesh.n_cells();
        let inner_tol = (0.1 * tol).max(1e-15);
        let mut rho = h * h / lambda;
        let mut v = z.clone();
        let mut w = mesh.gradient(&v);
        let mut y = vec![0.0; n];
        let mut inner = 0;
        let mut residual = f64::INFINITY;
        for it in 1..=ADMM_MAX_ITER {
            let target: Vec<f64> = w.iter().zip(&y).map(|(a, b)| a - b).collect();
            let rhs = z + mesh.gradient_adjoint(&target) * (lambda * rho);
            v = mesh.solve_shifted_laplacian(lambda * rho / (h * h), &rhs);
            let dv = mesh.gradient(&v);
            let w_old = std::mem::take(&mut w);
            w = Vec::with_capacity(n);
            for e in 0..n {
                let (we, k) = self.psi.prox_scalar(h / rho, dv[e] + y[e], inner_tol)?;
                inner += k;
                w.push(we);
            }
            let mut primal: f64 = 0.0;
            for e in 0..n {
                let gap = dv[e] - w[e];
                y[e] += gap;
                primal += gap * gap;
            }
            let primal = primal.sqrt();
            let dw: Vec<f64> = w.iter().zip(&w_old).map(|(a, b)| a - b).collect();
            let dual = rho * mesh.gradient_adjoint(&dw).norm();
            let primal_scale = 1.0 + norm(&dv).max(norm(&w));
            let dual_scale = 1.0 + rho * mesh.gradient_adjoint(&y).norm();
            residual = (primal / primal_scale).max(dual / dual_scale);
            if residual <= tol {
                return Ok(ProxResult {
                    point: v,
                    inner_iterations: it + inner,
                    residual,
                });
            }
            if it % 10 == 0 {
                let (p_rel, d_rel) = (primal / primal_scale, dual / dual_scale);
                if p_rel > 10.0 * d_rel {
                    rho *= 2.0;
                    y.iter_mut().for_each(|x| *x *= 0.5);
                } else if d_rel > 10.0 * p_rel {
                    rho *= 0.5;
                    y.iter_mut().for_each(|x| *x *= 2.0);
                }
            }
        }
        let fallback = self.prox_dual_gradient(lambda, z, tol)?;
        if fallback.residual <= tol {
            Ok(fallback)
        } else {
            Err(Error::NonConvergence {
                iterations: ADMM_MAX_ITER + fallback.inner_iterations,
                residual: residual.min(fallback.residual),
            })
        }
    }

    /// Proximal gradient on the dual `max_p -G*(p) - lambda/2 |D^T p|^2 + <p, Dz>`,
    /// `G(w) = Σ h psi(w_e)`. The smooth part has gradient Lipschitz constant
    /// at most `4 lambda / h^2`, so the fixed step `h^2 / (4 lambda)` decreases
    /// the dual objective monotonically. The primal point is
    /// `v = z - lambda D^T p`.
    fn prox_dual_gradient(&self, lambda: f64, z: &DVector<f64>, tol: f64) -> Result<ProxResult> {
        let mesh = &self.mesh;
        let h = mesh.spacing();
        let n = mesh.n_cells();
        let step = h * h / (4.0 * lambda);
        let inner_tol = (0.1 * tol).max(1e-15);
        // Cold start: slopes of exponential profiles at a rough primal guess overflow.
        let mut p = vec![0.0; n];
        let mut v = z.clone();
        let mut inner = 0;
        let scale = 1.0 + z.norm();
        let mut change = f64::INFINITY;
        for it in 1..=DUAL_MAX_ITER {
            let g = mesh.gradient(&v);
            let mut next = Vec::with_capacity(n);
            for e in 0..n {
                let q = p[e] + step * g[e];
                // Moreau: prox_{step G*}(q) = q - step prox_{G/step}(q / step).
                let (x, k) = self.psi.prox_scalar(h / step, q / step, inner_tol)?;
                inner += k;
                next.push(q - step * x);
            }
            p = next;
            let v_next = z - mesh.gradient_adjoint(&p) * lambda;
            change = (&v_next - &v).norm() / scale;
            v = v_next;
            if change <= tol {
                return Ok(ProxResult {
                    point: v,
                    inner_iterations: it + inner,
                    residual: change,
                });
            }
        }
        Ok(ProxResult {
            point: v,
            inner_iterations: DUAL_MAX_ITER + inner,
            residual: change,
        })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl ConvexPotential for DiscretePotentialPsi {
    fn value(&self, v: &DVector<f64>) -> f64 {
        let h = self.mesh.spacing();
        self.mesh
            .gradient(v)
            .iter()
            .map(|w| h * self.psi.profile(w.abs()))
            .sum()
    }

    fn subdiff_select(&self, v: &DVector<f64>) -> DVector<f64> {
        let h = self.mesh.spacing();
        let grad = self.mesh.gradient(v);
        let mut p: Vec<f64> = grad.iter().map(|w| self.edge_slope(*w)).collect();
        let s0 = self.psi.profile_slope(0.0);
        if s0 > 0.0 {
            let free: Vec<usize> = (0..grad.len()).filter(|&e| grad[e] == 0.0).collect();
            if !free.is_empty() {
                self.min_norm_flux(&mut p, &free, s0);
            }
        }
        self.mesh.gradient_adjoint(&p) * h
    }

    fn prox(&self, lambda: f64, z: &DVector<f64>, tol: f64) -> Result<ProxResult> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prox parameter must be positive, got {lambda}"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prox tolerance must be positive, got {tol}"
            )));
        }
        if z.len() != self.mesh.interior_dim() {
            return Err(Error::DimensionMismatch {
                what: "discrete potential argument",
                expected: self.mesh.interior_dim(),
                found: z.len(),
            });
        }
        if z.iter().all(|x| *x == 0.0) {
            return Ok(ProxResult {
                point: z.clone(),
                inner_iterations: 0,
                residual: 0.0,
            });
        }
        match self.psi.kind() {
            PotentialKind::Zero => Ok(ProxResult {
                point: z.clone(),
                inner_iterations: 0,
                residual: 0.0,
            }),
            PotentialKind::Quadratic { scale } => Ok(self.prox_quadratic(*scale, lambda, z)),
            _ => self.prox_admm(lambda, z, tol),
        }
    }

    fn dim(&self) -> Option<usize> {
        Some(self.mesh.interior_dim())
    }
}

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type ReactionFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Pointwise reaction `b(t, x, u)` with Lipschitz constant `c_b` in `u`.
#[derive(Clone)]
pub struct Reaction {
    pub b: ReactionFn,
    pub c_b: f64,
}

/// An assembled PDE instance: the mesh plus the ODE-level problem on the interior.
#[derive(Debug, Clone)]
pub struct Pde1dProblem {
    pub mesh: Mesh1D,
    pub spec: ProblemSpec,
}

/// One output row `(t, x, u, v)` of a nodal field, boundary nodes included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRow {
    pub t: f64,
    pub x: f64,
    pub u: f64,
    pub v: f64,
}

/// Builds the interior problem for the given data. `u0` must match the
/// Dirichlet values and `v0` must vanish at both ends.
pub fn assemble_problem(
    mesh: Mesh1D,
    psi: Potential,
    reaction: Option<Reaction>,
    forcing: SpaceTimeFn,
    u0: &dyn Fn(f64) -> f64,
    v0: &dyn Fn(f64) -> f64,
    horizon: f64,
) -> Result<Pde1dProblem> {
    let (left, right) = mesh.boundary();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    let (ul, ur) = (u0(0.0), u0(mesh.length()));
    if !close(ul, left) || !close(ur, right) {
        return Err(Error::BoundaryMismatch(format!(
            "u0 has boundary values ({ul}, {ur}) but the Dirichlet data are ({left}, {right})"
        )));
    }
    let (vl, vr) = (v0(0.0), v0(mesh.length()));
    if !close(vl, 0.0) || !close(vr, 0.0) {
        return Err(Error::BoundaryMismatch(format!(
            "v0 must vanish on the boundary, got ({vl}, {vr})"
        )));
    }
    let dim = mesh.interior_dim();
    let xs: Vec<f64> = (0..dim).map(|i| mesh.interior_x(i)).collect();
    let u_init = DVector::from_iterator(dim, xs.iter().map(|&x| u0(x)));
    let v_init = DVector::from_iterator(dim, xs.iter().map(|&x| v0(x)));
    let coupling = match reaction {
        Some(Reaction { b, c_b }) => {
            let sites = xs.clone();
            Coupling::nemytskii(dim, Arc::new(move |t, i, u| b(t, sites[i], u)), c_b)?
        }
        None => Coupling::zero(),
    };
    let sites = xs;
    let forcing = Forcing::from_fn(
        dim,
        Arc::new(move |t| DVector::from_iterator(sites.len(), sites.iter().map(|&x| forcing(t, x)))),
    );
    let potential = DiscretePotentialPsi::new(mesh, psi)?;
    let spec = ProblemSpec::new(Arc::new(potential), coupling, forcing, u_init, v_init, horizon)?;
    Ok(Pde1dProblem { mesh, spec })
}

impl Pde1dProblem {
    /// Nodal rows for every time node, boundary values included.
    pub fn field_rows(&self, u: &Trajectory, v: &Trajectory) -> Vec<FieldRow> {
        let (left, right) = self.mesh.boundary();
        let n = self.mesh.n_cells();
        let mut rows = Vec::with_capacity(u.grid().n_nodes() * (n + 1));
        for (k, t) in u.grid().nodes().enumerate() {
            for j in 0..=n {
                let (uj, vj) = match j {
                    0 => (left, 0.0),
                    j if j == n => (right, 0.0),
                    j => (u.at(k)[j - 1], v.at(k)[j - 1]),
                };
                rows.push(FieldRow {
                    t,
                    x: self.mesh.node_x(j),
                    u: uj,
                    v: vj,
                });
            }
        }
        rows
    }

    /// Discrete kinetic energy `h/2 Σ v_i^2`.
    pub fn kinetic_energy(&self, v: &DVector<f64>) -> f64 {
        0.5 * self.mesh.spacing() * v.norm_squared()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::picard::picard_solve;
    use crate::problem::SolverConfig;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..120 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) <= f(d) {
                b = d
            } else {
                a = c
            }
        }
        0.5 * (a + b)
    }

    /// Cyclic coordinate descent with golden-section line minimization.
    fn coordinate_descent(obj: impl Fn(&DVector<f64>) -> f64, start: &DVector<f64>, radius: f64) -> DVector<f64> {
        let mut x = start.clone();
        for _ in 0..400 {
            let prev = x.clone();
            for i in 0..x.len() {
                let c = x[i];
                let best = golden(
                    |t| {
                        let mut y = x.clone();
                        y[i] = t;
                        obj(&y)
                    },
                    c - radius,
                    c + radius,
                );
                x[i] = best;
            }
            if (&x - &prev).norm() < 1e-13 {
                break;
            }
        }
        x
    }

    #[test]
    fn quadratic_two_cell_example() {
        let mesh = Mesh1D::new(2, 1.0, 0.0, 0.0).unwrap();
        let pot = DiscretePotentialPsi::new(mesh, Potential::quadratic(1.0).unwrap()).unwrap();
        let z = DVector::from_vec(vec![1.0]);
        let p = pot.prox(1.0, &z, 1e-12).unwrap();
        assert_abs_diff_eq!(p.point[0], 0.2, epsilon = 1e-15);
        let xb = golden(
            |x| pot.value(&DVector::from_vec(vec![x])) + (x - 1.0).powi(2) / 2.0,
            -2.0,
            2.0,
        );
        assert_abs_diff_eq!(p.point[0], xb, epsilon = 1e-7);
        assert!(pot.prox(1.0, &DVector::zeros(1), 1e-12).unwrap().point[0] == 0.0);
    }

    #[test]
    fn abs_value_two_cell_example() {
        let mesh = Mesh1D::new(2, 1.0, 0.0, 0.0).unwrap();
        let pot = DiscretePotentialPsi::new(mesh, Potential::abs_value()).unwrap();
        let p = pot.prox(1.0, &DVector::from_vec(vec![3.0]), 1e-12).unwrap();
        assert_abs_diff_eq!(p.point[0], 1.0, epsilon = 1e-9);
        let xb = golden(|x| 2.0 * x.abs() + (x - 3.0).powi(2) / 2.0, -5.0, 5.0);
        assert_abs_diff_eq!(p.point[0], xb, epsilon = 1e-7);
    }

    #[test]
    fn value_expands_edgewise() {
        let mesh = Mesh1D::new(3, 1.5, 0.0, 0.0).unwrap();
        let h = mesh.spacing();
        let pot = DiscretePotentialPsi::new(mesh, Potential::abs_value()).unwrap();
        let v = DVector::from_vec(vec![0.7, -0.2]);
        let expected = h * ((0.7 / h).abs() + ((-0.2 - 0.7) / h).abs() + (0.2 / h).abs());
        assert_abs_diff_eq!(pot.value(&v), expected, epsilon = 1e-14);
    }

    #[test]
    fn quadratic_subgradient_is_scaled_laplacian() {
        let mesh = Mesh1D::new(5, 2.0, 0.0, 0.0).unwrap();
        let h = mesh.spacing();
        let pot = DiscretePotentialPsi::new(mesh, Potential::quadratic(1.0).unwrap()).unwrap();
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        let mut lap = DMatrix::zeros(4, 4);
        for i in 0..4 {
            lap[(i, i)] = 2.0;
            if i > 0 {
                lap[(i, i - 1)] = -1.0;
                lap[(i - 1, i)] = -1.0;
            }
        }
        let expected = &lap * &v * (h / (h * h));
        let got = pot.subdiff_select(&v);
        assert!((got - expected).norm() < 1e-12);
    }

    #[test]
    fn min_norm_subgradient_uses_free_edges() {
        // Flat field: every edge multiplier is free, the minimal-norm choice is 0.
        let mesh = Mesh1D::new(4, 1.0, 0.0, 0.0).unwrap();
        let pot = DiscretePotentialPsi::new(mesh, Potential::abs_value()).unwrap();
        assert_eq!(pot.subdiff_select(&DVector::zeros(3)), DVector::zeros(3));
        // Plateau between two ramps: the free middle edge balances the neighbours.
        let v = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let s = pot.subdiff_select(&v);
        // Edges: +, 0, -, 0. Fixed p = [1, ?, -1, ?]; p_1 = 0 and p_3 = -1 zero out
        // the last entry.
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2], 0.0, epsilon = 1e-12);
        // s must be a subgradient.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let y = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
            assert!(pot.value(&y) >= pot.value(&v) + s.dot(&(&y - &v)) - 1e-12);
        }
    }

    #[test]
    fn admm_matches_coordinate_descent_for_smooth_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for psi in [
            Potential::quadratic(1.3).unwrap(),
            Potential::x_log_x(),
            Potential::exp_x_log_x(),
            Potential::radial(
                crate::potentials::RadialOracle::from_slope_table(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap(),
            ),
        ] {
            for cells in 2..=6 {
                let mesh = Mesh1D::new(cells, 1.0, 0.0, 0.0).unwrap();
                let pot = DiscretePotentialPsi::new(mesh, psi.clone()).unwrap();
                for _ in 0..5 {
                    let lambda = rng.gen_range(0.01..2.0);
                    let z = DVector::from_fn(cells - 1, |_, _| rng.gen_range(-3.0..3.0));
                    let got = pot.prox(lambda, &z, 1e-12).unwrap().point;
                    let obj = |v: &DVector<f64>| pot.objective(v, lambda, &z);
                    let reference = coordinate_descent(obj, &z, 6.0);
                    assert!((&got - &reference).norm() < 1e-5, "{} cells {cells}", psi.name());
                }
            }
        }
    }

    #[test]
    fn admm_is_optimal_for_kinked_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for psi in [
            Potential::abs_value(),
            Potential::power_plus_abs(1.5).unwrap(),
            Potential::x_exp_x(),
        ] {
            let mesh = Mesh1D::new(5, 1.0, 0.0, 0.0).unwrap();
            let pot = DiscretePotentialPsi::new(mesh, psi.clone()).unwrap();
            for _ in 0..10 {
                let lambda = rng.gen_range(0.01..1.0);
                let z = DVector::from_fn(4, |_, _| rng.gen_range(-3.0..3.0));
                let x = pot.prox(lambda, &z, 1e-10).unwrap().point;
                let fx = pot.objective(&x, lambda, &z);
                // Convex objective: no nearby improvement in any probe direction.
                for _ in 0..200 {
                    let d = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
                    for eps in [1e-2, 1e-4] {
                        assert!(
                            pot.objective(&(&x + &d * eps), lambda, &z) >= fx - 1e-9,
                            "{}",
                            psi.name()
                        );
                    }
                }
                let dual = pot.prox_dual_gradient(lambda, &z, 1e-12).unwrap();
                assert!((&dual.point - &x).norm() < 1e-6, "{}", psi.name());
            }
        }
    }

    #[test]
    fn boundary_data_are_checked() {
        let mesh = Mesh1D::new(4, 1.0, 1.0, 0.0).unwrap();
        let zero: SpaceTimeFn = Arc::new(|_, _| 0.0);
        let ok = assemble_problem(
            mesh,
            Potential::abs_value(),
            None,
            zero.clone(),
            &|x| 1.0 - x,
            &|_| 0.0,
            1.0,
        );
        assert!(ok.is_ok());
        let bad = assemble_problem(
            mesh,
            Potential::abs_value(),
            None,
            zero.clone(),
            &|_| 0.0,
            &|_| 0.0,
            1.0,
        );
        assert!(matches!(bad, Err(Error::BoundaryMismatch(_))));
        let bad_v = assemble_problem(mesh, Potential::abs_value(), None, zero, &|x| 1.0 - x, &|_| 1.0, 1.0);
        assert!(matches!(bad_v, Err(Error::BoundaryMismatch(_))));
        assert!(Mesh1D::new(1, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rest_state_is_preserved() {
        let mesh = Mesh1D::new(6, 1.0, 0.0, 0.0).unwrap();
        let prob = assemble_problem(
            mesh,
            Potential::quadratic(1.0).unwrap(),
            None,
            Arc::new(|_, _| 0.0),
            &|_| 0.0,
            &|_| 0.0,
            1.0,
        )
        .unwrap();
        let sol = picard_solve(
            &prob.spec,
            &SolverConfig {
                n_steps: 50,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(sol.u.values().iter().all(|u| u.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn dirichlet_values_are_kept_in_output() {
        let mesh = Mesh1D::new(4, 2.0, 1.0, -1.0).unwrap();
        let prob = assemble_problem(
            mesh,
            Potential::x_log_x(),
            Some(Reaction {
                b: Arc::new(|_, _, u| u.sin()),
                c_b: 1.0,
            }),
            Arc::new(|t, x| t * x),
            &|x| 1.0 - x,
            &|x| (std::f64::consts::PI * x / 2.0).sin(),
            0.5,
        )
        .unwrap();
        let sol = picard_solve(
            &prob.spec,
            &SolverConfig {
                n_steps: 20,
                prox_tol: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        let rows = prob.field_rows(&sol.u, &sol.v);
        assert_eq!(rows.len(), 21 * 5);
        for r in rows.iter().filter(|r| r.x == 0.0) {
            assert_eq!((r.u, r.v), (1.0, 0.0));
        }
        for r in rows.iter().filter(|r| r.x == 2.0) {
            assert_eq!((r.u, r.v), (-1.0, 0.0));
        }
    }
}
