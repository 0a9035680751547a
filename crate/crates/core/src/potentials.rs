//! Convex dissipation potentials with value, minimal-norm subgradient and
//! proximal-map oracles.
//!
//! Every catalog member except [`PotentialKind::Separable`] is radial,
//! `Psi(x) = psi(|x|)` for a convex nondecreasing profile `psi` on `[0, ∞)`
//! with `psi(0) = 0`. Its subdifferential is `psi'(|x|) x/|x|` away from the
//! origin and the ball `B(0, psi'(0+))` at the origin, so the proximal map
//! reduces to the scalar stationarity equation `r + λ psi'(r) = |z|` together
//! with the threshold `|z| <= λ psi'(0+)` under which the prox is exactly 0.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Default tolerance of the scalar prox root-finder.
pub const DEFAULT_PROX_TOL: f64 = 1e-12;
/// Iteration cap of the scalar prox root-finder.
pub const PROX_MAX_ITER: usize = 200;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Output of a proximal evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub point: DVector<f64>,
    pub inner_iterations: usize,
    /// Certified distance to the exact minimizer, relative to `max(1, |z|)`.
    pub residual: f64,
}

/// Proper convex lower-semicontinuous functional on `R^n` accessed through
/// its oracles.
pub trait ConvexPotential: fmt::Debug + Send + Sync {
    /// `Psi(x)`; may be `+∞` outside the effective domain.
    fn value(&self, x: &DVector<f64>) -> f64;

    /// Minimal-norm element of `dPsi(x)`.
    fn subdiff_select(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `argmin_y Psi(y) + |y - z|^2 / (2 lambda)`.
    fn prox(&self, lambda: f64, z: &DVector<f64>, tol: f64) -> Result<ProxResult>;

    /// Fixed dimension, if the potential only makes sense in one.
    fn dim(&self) -> Option<usize> {
        None
    }

    /// Moreau envelope `min_y Psi(y) + |y - z|^2 / (2 lambda)`, evaluated at the prox point.
    fn moreau_envelope(&self, lambda: f64, z: &DVector<f64>) -> Result<f64> {
        let p = self.prox(lambda, z, DEFAULT_PROX_TOL)?;
        Ok(self.value(&p.point) + (&p.point - z).norm_squared() / (2.0 * lambda))
    }
}

/// User-supplied radial profile `psi` with its right derivative.
///
/// `slope(0.0)` must return `psi'(0+)`, the radius of the subdifferential ball
/// at the origin.
#[derive(Clone)]
pub struct RadialOracle {
    value: ScalarFn,
    slope: ScalarFn,
    curvature: Option<ScalarFn>,
}

impl RadialOracle {
    pub fn new(value: ScalarFn, slope: ScalarFn) -> Self {
        Self {
            value,
            slope,
            curvature: None,
        }
    }

    /// Second derivative, enables Newton steps in the prox solve.
    pub fn with_curvature(mut self, curvature: ScalarFn) -> Self {
        self.curvature = Some(curvature);
        self
    }

    /// Profile whose derivative is the piecewise-linear interpolant of
    /// `(knots[i], slopes[i])`, extended linearly past the last knot.
    /// `knots` must start at 0 and increase; `slopes` must be nonnegative and
    /// nondecreasing.
    pub fn from_slope_table(knots: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != slopes.len() {
            return Err(Error::InvalidParameter(
                "slope table needs matching, nonempty knot and slope lists".into(),
            ));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidParameter("slope table must start at r = 0".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("slope table knots must increase".into()));
        }
        if slopes[0] < 0.0 || slopes.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "slope table values must be nonnegative and nondecreasing".into(),
            ));
        }
        if knots.iter().chain(&slopes).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("slope table entries must be finite".into()));
        }
        let table = Arc::new(SlopeTable { knots, slopes });
        let (tv, ts, tc) = (table.clone(), table.clone(), table);
        Ok(
            Self::new(Arc::new(move |r| tv.value(r)), Arc::new(move |r| ts.slope(r)))
                .with_curvature(Arc::new(move |r| tc.curvature(r))),
        )
    }
}

impl fmt::Debug for RadialOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialOracle")
            .field("has_curvature", &self.curvature.is_some())
            .finish()
    }
}

struct SlopeTable {
    knots: Vec<f64>,
    slopes: Vec<f64>,
}

impl SlopeTable {
    fn segment(&self, r: f64) -> usize {
        let n = self.knots.len();
        if n < 2 {
            return 0;
        }
        match self.knots.partition_point(|&k| k <= r) {
            0 => 0,
            i => (i - 1).min(n - 2),
        }
    }

    fn gradient(&self, i: usize) -> f64 {
        if self.knots.len() < 2 {
            0.0
        } else {
            (self.slopes[i + 1] - self.slopes[i]) / (self.knots[i + 1] - self.knots[i])
        }
    }

    fn slope(&self, r: f64) -> f64 {
        let i = self.segment(r);
        self.slopes[i] + self.gradient(i) * (r - self.knots[i])
    }

    fn curvature(&self, r: f64) -> f64 {
        self.gradient(self.segment(r))
    }

    fn value(&self, r: f64) -> f64 {
        let i = self.segment(r);
        let mut acc = 0.0;
        for j in 0..i {
            let dr = self.knots[j + 1] - self.knots[j];
            acc += 0.5 * dr * (self.slopes[j] + self.slopes[j + 1]);
        }
        let dr = r - self.knots[i];
        acc + dr * (self.slopes[i] + 0.5 * self.gradient(i) * dr)
    }
}

/// One block of a separable potential: `potential` acts on `coords`.
#[derive(Debug, Clone)]
pub struct SeparableBlock {
    pub potential: Potential,
    pub coords: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    Zero,
    /// `scale/2 |x|^2`.
    Quadratic {
        scale: f64,
    },
    /// `|x|`.
    AbsValue,
    /// `|x| log(1 + |x|)`.
    XLogX,
    /// `|x| exp(|x|)`.
    XExpX,
    /// `|x|^p / p + |x|`.
    PowerPlusAbs {
        p: f64,
    },
    /// `exp(|x|^p / p + |x|) - 1`.
    ExpPower {
        p: f64,
    },
    /// `exp(|x| log(1 + |x|)) - 1`.
    ExpXLogX,
    /// Sum of potentials acting on disjoint coordinate blocks of `R^dim`.
    Separable {
        dim: usize,
        blocks: Vec<SeparableBlock>,
    },
    Radial1DTable(RadialOracle),
}

/// A catalog dissipation potential.
#[derive(Clone)]
pub struct Potential {
    kind: PotentialKind,
    coercivity_minorant: Option<ScalarFn>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("kind", &self.kind)
            .field("coercivity_minorant", &self.coercivity_minorant.is_some())
            .finish()
    }
}

fn check_exponent(p: f64) -> Result<f64> {
    if p > 1.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(Error::InvalidParameter(format!("exponent p must be > 1, got {p}")))
    }
}

impl Potential {
    pub fn new(kind: PotentialKind) -> Result<Self> {
        match &kind {
            PotentialKind::Quadratic { scale } if !(*scale > 0.0 && scale.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "quadratic scale must be positive, got {scale}"
                )))
            }
            PotentialKind::PowerPlusAbs { p } | PotentialKind::ExpPower { p } => {
                check_exponent(*p)?;
            }
            PotentialKind::Separable { dim, blocks } => {
                let mut seen = vec![false; *dim];
                for block in blocks {
                    if matches!(block.potential.kind, PotentialKind::Separable { .. }) {
                        return Err(Error::InvalidParameter("separable blocks cannot nest".into()));
                    }
                    if block.coords.is_empty() {
                        return Err(Error::InvalidParameter("empty separable block".into()));
                    }
                    for &c in &block.coords {
                        if c >= *dim || seen[c] {
                            return Err(Error::InvalidParameter(format!(
                                "separable coordinate {c} out of range or repeated"
                            )));
                        }
                        seen[c] = true;
                    }
                }
            }
            _ => {}
        }
        Ok(Self {
            kind,
            coercivity_minorant: None,
        })
    }

    pub fn zero() -> Self {
        Self::from_kind(PotentialKind::Zero)
    }

    pub fn quadratic(scale: f64) -> Result<Self> {
        Self::new(PotentialKind::Quadratic { scale })
    }

    pub fn abs_value() -> Self {
        Self::from_kind(PotentialKind::AbsValue)
    }

    pub fn x_log_x() -> Self {
        Self::from_kind(PotentialKind::XLogX)
    }

    pub fn x_exp_x() -> Self {
        Self::from_kind(PotentialKind::XExpX)
    }

    pub fn power_plus_abs(p: f64) -> Result<Self> {
        Self::new(PotentialKind::PowerPlusAbs { p })
    }

    pub fn exp_power(p: f64) -> Result<Self> {
        Self::new(PotentialKind::ExpPower { p })
    }

    pub fn exp_x_log_x() -> Self {
        Self::from_kind(PotentialKind::ExpXLogX)
    }

    pub fn separable(dim: usize, blocks: Vec<SeparableBlock>) -> Result<Self> {
        Self::new(PotentialKind::Separable { dim, blocks })
    }

    pub fn radial(oracle: RadialOracle) -> Self {
        Self::from_kind(PotentialKind::Radial1DTable(oracle))
    }

    fn from_kind(kind: PotentialKind) -> Self {
        Self {
            kind,
            coercivity_minorant: None,
        }
    }

    /// Attaches a superlinear minorant `Phi(|x|) <= Psi(x)`. Stored only.
    pub fn with_coercivity_minorant(mut self, phi: ScalarFn) -> Self {
        self.coercivity_minorant = Some(phi);
        self
    }

    pub fn coercivity_minorant(&self) -> Option<&ScalarFn> {
        self.coercivity_minorant.as_ref()
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PotentialKind::Zero => "zero",
            PotentialKind::Quadratic { .. } => "quadratic",
            PotentialKind::AbsValue => "abs_value",
            PotentialKind::XLogX => "x_log_x",
            PotentialKind::XExpX => "x_exp_x",
            PotentialKind::PowerPlusAbs { .. } => "power_plus_abs",
            PotentialKind::ExpPower { .. } => "exp_power",
            PotentialKind::ExpXLogX => "exp_x_log_x",
            PotentialKind::Separable { .. } => "separable",
            PotentialKind::Radial1DTable(_) => "radial_table",
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, PotentialKind::Separable { .. })
    }

    /// Radial profile `psi(r)`, `r >= 0`.
    ///
    /// # Panics
    /// On separable potentials, which have no radial profile.
    pub fn profile(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Quadratic { scale } => 0.5 * scale * r * r,
            PotentialKind::AbsValue => r,
            PotentialKind::XLogX => r * r.ln_1p(),
            PotentialKind::XExpX => r * r.exp(),
            PotentialKind::PowerPlusAbs { p } => r.powf(*p) / p + r,
            PotentialKind::ExpPower { p } => (r.powf(*p) / p + r).exp_m1(),
            PotentialKind::ExpXLogX => (r * r.ln_1p()).exp_m1(),
            PotentialKind::Radial1DTable(o) => (o.value)(r),
            PotentialKind::Separable { .. } => panic!("separable potential has no radial profile"),
        }
    }

    /// Right derivative `psi'(r)`.
    pub fn profile_slope(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Quadratic { scale } => scale * r,
            PotentialKind::AbsValue => 1.0,
            PotentialKind::XLogX => r.ln_1p() + r / (1.0 + r),
            PotentialKind::XExpX => (1.0 + r) * r.exp(),
            PotentialKind::PowerPlusAbs { p } => 1.0 + r.powf(p - 1.0),
            PotentialKind::ExpPower { p } => (r.powf(*p) / p + r).exp() * (1.0 + r.powf(p - 1.0)),
            PotentialKind::ExpXLogX => (r * r.ln_1p()).exp() * (r.ln_1p() + r / (1.0 + r)),
            PotentialKind::Radial1DTable(o) => (o.slope)(r),
            PotentialKind::Separable { .. } => panic!("separable potential has no radial profile"),
        }
    }

    /// `psi''(r)`, `None` when the oracle does not provide it.
    fn profile_curvature(&self, r: f64) -> Option<f64> {
        let c = match &self.kind {
            PotentialKind::Zero | PotentialKind::AbsValue => 0.0,
            PotentialKind::Quadratic { scale } => *scale,
            PotentialKind::XLogX => {
                let q = 1.0 / (1.0 + r);
                q + q * q
            }
            PotentialKind::XExpX => (2.0 + r) * r.exp(),
            PotentialKind::PowerPlusAbs { p } => (p - 1.0) * r.powf(p - 2.0),
            PotentialKind::ExpPower { p } => {
                let e = (r.powf(*p) / p + r).exp();
                let s = 1.0 + r.powf(p - 1.0);
                e * (s * s + (p - 1.0) * r.powf(p - 2.0))
            }
            PotentialKind::ExpXLogX => {
                let q = 1.0 / (1.0 + r);
                let d = r.ln_1p() + r * q;
                (r * r.ln_1p()).exp() * (d * d + q + q * q)
            }
            PotentialKind::Radial1DTable(o) => return o.curvature.as_ref().map(|c| c(r)),
            PotentialKind::Separable { .. } => return None,
        };
        Some(c)
    }

    /// `(ln psi'(r), d/dr ln psi'(r))` for the exponential kinds, whose
    /// stationarity equation is solved in log scale to stay clear of overflow.
    fn log_slope(&self, r: f64) -> Option<(f64, f64)> {
        match &self.kind {
            PotentialKind::XExpX => Some((r.ln_1p() + r, 1.0 / (1.0 + r) + 1.0)),
            PotentialKind::ExpPower { p } => {
                let rp1 = r.powf(p - 1.0);
                let value = r.powf(*p) / p + r + rp1.ln_1p();
                let deriv = rp1 + 1.0 + (p - 1.0) * r.powf(p - 2.0) / (1.0 + rp1);
                Some((value, deriv))
            }
            PotentialKind::ExpXLogX => {
                let q = 1.0 / (1.0 + r);
                let d = r.ln_1p() + r * q;
                Some((r * r.ln_1p() + d.ln(), d + (q + q * q) / d))
            }
            _ => None,
        }
    }

    /// Radius `r >= 0` of the prox of `lambda psi(|.|)` at a point of norm `s`.
    fn prox_radius(&self, lambda: f64, s: f64, tol: f64) -> Result<(f64, usize, f64)> {
        if s <= lambda * self.profile_slope(0.0) {
            return Ok((0.0, 0, 0.0));
        }
        match &self.kind {
            PotentialKind::Zero => return Ok((s, 0, 0.0)),
            PotentialKind::Quadratic { scale } => return Ok((s / (1.0 + lambda * scale), 0, 0.0)),
            PotentialKind::AbsValue => return Ok((s - lambda, 0, 0.0)),
            _ => {}
        }
        if self.log_slope(0.0).is_some() {
            let ln_lambda = lambda.ln();
            bracketed_newton(
                |r| {
                    let (ls, dls) = self.log_slope(r).expect("log-scaled kind");
                    let gap = s - r;
                    (ln_lambda + ls - gap.ln(), dls + 1.0 / gap)
                },
                0.0,
                s,
                tol,
            )
        } else {
            bracketed_newton(
                |r| {
                    let f = r + lambda * self.profile_slope(r) - s;
                    let df = self.profile_curvature(r).map_or(f64::NAN, |c| 1.0 + lambda * c);
                    (f, df)
                },
                0.0,
                s,
                tol,
            )
        }
    }

    /// Scalar prox of `lambda psi(|.|)`; used by the edge-wise splitting of
    /// the discretized gradient potential.
    pub(crate) fn prox_scalar(&self, lambda: f64, z: f64, tol: f64) -> Result<(f64, usize)> {
        let (r, it, _) = self.prox_radius(lambda, z.abs(), tol)?;
        Ok((r.copysign(z), it))
    }

    /// Subgradient-inequality slack `min_y Psi(y) - Psi(x) - s.(y - x)` over
    /// the supplied probes; nonnegative (up to rounding) iff `s ∈ dPsi(x)`
    /// as far as the probes can tell.
    pub fn subgradient_gap(&self, x: &DVector<f64>, s: &DVector<f64>, probes: &[DVector<f64>]) -> f64 {
        let fx = self.value(x);
        probes
            .iter()
            .map(|y| self.value(y) - fx - s.dot(&(y - x)))
            .fold(f64::INFINITY, f64::min)
    }
}

impl ConvexPotential for Potential {
    fn value(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            PotentialKind::Separable { blocks, .. } => {
                blocks.iter().map(|b| b.potential.value(&gather(x, &b.coords))).sum()
            }
            _ => self.profile(x.norm()),
        }
    }

    fn subdiff_select(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            PotentialKind::Separable { blocks, .. } => {
                let mut out = DVector::zeros(x.len());
                for b in blocks {
                    let s = b.potential.subdiff_select(&gather(x, &b.coords));
                    scatter(&mut out, &b.coords, &s);
                }
                out
            }
            PotentialKind::Quadratic { scale } => x * *scale,
            _ => {
                let r = x.norm();
                if r == 0.0 {
                    return DVector::zeros(x.len());
                }
                let slope = self.profile_slope(r);
                x.map(|xi| xi / r * slope)
            }
        }
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
        match &self.kind {
            PotentialKind::Separable { blocks, .. } => {
                let mut point = z.clone();
                let mut inner_iterations = 0;
                let mut residual: f64 = 0.0;
                for b in blocks {
                    let res = b.potential.prox(lambda, &gather(z, &b.coords), tol)?;
                    scatter(&mut point, &b.coords, &res.point);
                    inner_iterations += res.inner_iterations;
                    residual = residual.max(res.residual);
                }
                Ok(ProxResult {
                    point,
                    inner_iterations,
                    residual,
                })
            }
            _ => {
                let s = z.norm();
                let (r, inner_iterations, residual) = self.prox_radius(lambda, s, tol)?;
                let point = if r == 0.0 {
                    DVector::zeros(z.len())
                } else {
                    z.map(|zi| zi / s * r)
                };
                Ok(ProxResult {
                    point,
                    inner_iterations,
                    residual,
                })
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        match self.kind {
            PotentialKind::Separable { dim, .. } => Some(dim),
            _ => None,
        }
    }
}

fn gather(x: &DVector<f64>, coords: &[usize]) -> DVector<f64> {
    DVector::from_iterator(coords.len(), coords.iter().map(|&c| x[c]))
}

fn scatter(out: &mut DVector<f64>, coords: &[usize], values: &DVector<f64>) {
    for (&c, &v) in coords.iter().zip(values.iter()) {
        out[c] = v;
    }
}

/// Root of an increasing function on `[lo, hi]` with `F(lo) < 0 <= F(hi)`.
///
/// Newton steps are taken when they land strictly inside the current bracket,
/// bisection otherwise. Returns `(root, iterations, residual)` where the
/// residual bounds the distance to the root relative to `max(1, hi)`.
fn bracketed_newton<F>(mut residual: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, usize, f64)>
where
    F: FnMut(f64) -> (f64, f64),
{
    let scale = hi.abs().max(1.0);
    let abs_tol = tol * scale;
    let mut x = 0.5 * (lo + hi);
    for it in 1..=PROX_MAX_ITER {
        let (f, df) = residual(x);
        if f == 0.0 {
            return Ok((x, it, 0.0));
        }
        if f < 0.0 {
            lo = x;
        } else {
            // NaN lands here: treat as overshoot.
            hi = x;
        }
        let newton = x - f / df;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        let width = hi - lo;
        if step <= abs_tol || width <= abs_tol || next == lo || next == hi {
            return Ok((next, it, step.min(width) / scale));
        }
        x = next;
    }
    Err(Error::NonConvergence {
        iterations: PROX_MAX_ITER,
        residual: (hi - lo) / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    fn catalog() -> Vec<Potential> {
        vec![
            Potential::zero(),
            Potential::quadratic(1.0).unwrap(),
            Potential::quadratic(2.5).unwrap(),
            Potential::abs_value(),
            Potential::x_log_x(),
            Potential::x_exp_x(),
            Potential::power_plus_abs(1.5).unwrap(),
            Potential::power_plus_abs(3.0).unwrap(),
            Potential::exp_power(1.5).unwrap(),
            Potential::exp_power(2.0).unwrap(),
            Potential::exp_x_log_x(),
        ]
    }

    /// Grid scan plus golden-section refinement of a 1-D objective.
    fn brute_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let n = 2000;
        let h = (hi - lo) / n as f64;
        let best = (0..=n)
            .map(|i| lo + i as f64 * h)
            .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
            .unwrap();
        let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) <= f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn values_match_closed_forms() {
        assert_eq!(Potential::x_log_x().value(&v1(0.0)), 0.0);
        assert_abs_diff_eq!(Potential::x_log_x().value(&v1(1.0)), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            Potential::power_plus_abs(2.0).unwrap().value(&v1(3.0)),
            7.5,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(Potential::x_exp_x().value(&v1(-2.0)), 2.0 * 2f64.exp(), epsilon = 1e-13);
    }

    #[test]
    fn catalog_vanishes_at_origin() {
        for p in catalog() {
            let zero = DVector::zeros(3);
            assert_eq!(p.value(&zero), 0.0, "{}", p.name());
            let s = p.subdiff_select(&zero);
            assert!(s.iter().all(|x| x.is_finite() && *x == 0.0), "{}", p.name());
        }
    }

    #[test]
    fn subdiff_selection_examples() {
        assert_eq!(Potential::abs_value().subdiff_select(&v1(0.0))[0], 0.0);
        assert_abs_diff_eq!(
            Potential::x_log_x().subdiff_select(&v1(1.0))[0],
            2f64.ln() + 0.5,
            epsilon = 1e-15
        );
        assert_eq!(Potential::quadratic(1.0).unwrap().subdiff_select(&v1(4.0))[0], 4.0);
        // Radial direction in 2-D.
        let s = Potential::abs_value().subdiff_select(&DVector::from_vec(vec![3.0, 4.0]));
        assert_abs_diff_eq!(s[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn prox_examples() {
        let p = Potential::abs_value().prox(1.0, &v1(3.0), 1e-10).unwrap();
        assert_eq!(p.point[0], 2.0);
        for pot in catalog() {
            let p = pot.prox(0.7, &DVector::zeros(2), 1e-12).unwrap();
            assert!(p.point.iter().all(|x| *x == 0.0));
        }
        let q = Potential::quadratic(1.0).unwrap().prox(1.0, &v1(4.0), 1e-12).unwrap();
        assert_eq!(q.point[0], 2.0);
        // x + log(1+x) + x/(1+x) = 2, bisection reference.
        let g = |x: f64| x + x.ln_1p() + x / (1.0 + x) - 2.0;
        let (mut a, mut b) = (0.0, 2.0);
        while b - a > 1e-14 {
            let m = 0.5 * (a + b);
            if g(m) < 0.0 {
                a = m
            } else {
                b = m
            }
        }
        let x = Potential::x_log_x().prox(1.0, &v1(2.0), 1e-12).unwrap();
        assert_abs_diff_eq!(x.point[0], 0.5 * (a + b), epsilon = 1e-11);
        assert_abs_diff_eq!(x.point[0], 0.89140, epsilon = 1e-4);
        assert!(x.residual <= 1e-12);
    }

    #[test]
    fn prox_thresholds_exactly() {
        // |z| <= lambda psi'(0+) gives exactly zero.
        for pot in [
            Potential::abs_value(),
            Potential::x_exp_x(),
            Potential::power_plus_abs(1.5).unwrap(),
            Potential::exp_power(1.5).unwrap(),
        ] {
            let p = pot.prox(2.0, &DVector::from_vec(vec![1.2, -1.6]), 1e-12).unwrap();
            assert!(p.point.iter().all(|x| *x == 0.0), "{}", pot.name());
        }
        let p = Potential::x_log_x().prox(2.0, &v1(1e-3), 1e-12).unwrap();
        assert!(p.point[0] > 0.0);
    }

    #[test]
    fn exponential_prox_survives_large_inputs() {
        for pot in [
            Potential::x_exp_x(),
            Potential::exp_power(2.0).unwrap(),
            Potential::exp_x_log_x(),
        ] {
            let p = pot.prox(1e-3, &v1(5000.0), 1e-12).unwrap();
            let r = p.point[0];
            assert!(r.is_finite() && r > 0.0 && r < 5000.0, "{} -> {r}", pot.name());
            // Check stationarity in log form.
            let lhs = (1e-3f64).ln() + pot.log_slope(r).unwrap().0;
            assert_abs_diff_eq!(lhs, (5000.0 - r).ln(), epsilon = 1e-8);
        }
    }

    #[test]
    fn prox_matches_brute_force() {
        let pots = catalog();
        for (i, pot) in pots.iter().enumerate() {
            for &(lambda, z) in &[(0.3, 2.5), (4.0, -7.0), (0.05, 11.0), (1.0, -0.4)] {
                let x = pot.prox(lambda, &v1(z), 1e-12).unwrap().point[0];
                let obj = |y: f64| pot.value(&v1(y)) + (y - z).powi(2) / (2.0 * lambda);
                let (lo, hi) = if z > 0.0 { (0.0, z) } else { (z, 0.0) };
                let xb = brute_min(obj, lo, hi);
                assert!(
                    (x - xb).abs() < 1e-6,
                    "potential #{i} lambda {lambda} z {z}: {x} vs {xb}"
                );
            }
        }
    }

    #[test]
    fn moreau_envelope_examples() {
        let q = Potential::quadratic(1.0).unwrap();
        assert_abs_diff_eq!(q.moreau_envelope(1.0, &v1(4.0)).unwrap(), 4.0, epsilon = 1e-14);
        let a = Potential::abs_value();
        assert_abs_diff_eq!(a.moreau_envelope(1.0, &v1(3.0)).unwrap(), 2.5, epsilon = 1e-14);
        for pot in catalog() {
            assert_eq!(pot.moreau_envelope(0.4, &DVector::zeros(2)).unwrap(), 0.0);
        }
    }

    #[test]
    fn prox_rejects_bad_parameters() {
        let p = Potential::abs_value();
        assert!(p.prox(0.0, &v1(1.0), 1e-12).is_err());
        assert!(p.prox(1.0, &v1(1.0), 0.0).is_err());
        assert!(Potential::power_plus_abs(1.0).is_err());
        assert!(Potential::quadratic(-1.0).is_err());
    }

    #[test]
    fn separable_applies_blockwise() {
        let pot = Potential::separable(
            3,
            vec![
                SeparableBlock {
                    potential: Potential::abs_value(),
                    coords: vec![0],
                },
                SeparableBlock {
                    potential: Potential::quadratic(1.0).unwrap(),
                    coords: vec![2, 1],
                },
            ],
        )
        .unwrap();
        let z = DVector::from_vec(vec![3.0, 4.0, -2.0]);
        let p = pot.prox(1.0, &z, 1e-12).unwrap();
        assert_eq!(p.point.as_slice(), &[2.0, 2.0, -1.0]);
        assert_abs_diff_eq!(pot.value(&z), 3.0 + 0.5 * 20.0, epsilon = 1e-14);
        assert_eq!(pot.dim(), Some(3));
        let overlapping = Potential::separable(
            2,
            vec![
                SeparableBlock {
                    potential: Potential::abs_value(),
                    coords: vec![0],
                },
                SeparableBlock {
                    potential: Potential::abs_value(),
                    coords: vec![0, 1],
                },
            ],
        );
        assert!(overlapping.is_err());
    }

    #[test]
    fn slope_table_profile() {
        // psi'(r) = r on [0, 1], then 1 + 3 (r - 1).
        let oracle = RadialOracle::from_slope_table(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 4.0]).unwrap();
        let pot = Potential::radial(oracle);
        assert_abs_diff_eq!(pot.profile(1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pot.profile(2.0), 0.5 + 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pot.profile_slope(3.0), 7.0, epsilon = 1e-15);
        // r + psi'(r) = 3 -> on second segment: r + 1 + 3(r-1) = 3 -> r = 1.25
        let p = pot.prox(1.0, &v1(3.0), 1e-12).unwrap();
        assert_abs_diff_eq!(p.point[0], 1.25, epsilon = 1e-11);
        assert!(RadialOracle::from_slope_table(vec![0.0, 1.0], vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn custom_oracle_without_curvature_bisects() {
        let oracle = RadialOracle::new(Arc::new(|r: f64| r.powi(4) / 4.0), Arc::new(|r: f64| r.powi(3)));
        let pot = Potential::radial(oracle);
        let p = pot.prox(1.0, &v1(2.0), 1e-12).unwrap();
        // r + r^3 = 2 -> r = 1
        assert_abs_diff_eq!(p.point[0], 1.0, epsilon = 1e-11);
    }

    fn arb_potential() -> impl Strategy<Value = Potential> {
        (0..catalog().len()).prop_map(|i| catalog()[i].clone())
    }

    fn arb_vec(dim: usize, r: f64) -> impl Strategy<Value = DVector<f64>> {
        proptest::collection::vec(-r..r, dim).prop_map(DVector::from_vec)
    }

    proptest! {
        #[test]
        fn convexity(pot in arb_potential(), x in arb_vec(2, 4.0), y in arb_vec(2, 4.0), th in 0.0..1.0f64) {
            let mid = &x * th + &y * (1.0 - th);
            let lhs = pot.value(&mid);
            let rhs = th * pot.value(&x) + (1.0 - th) * pot.value(&y);
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn subdifferential_is_monotone(pot in arb_potential(), x in arb_vec(2, 4.0), y in arb_vec(2, 4.0)) {
            let d = (pot.subdiff_select(&x) - pot.subdiff_select(&y)).dot(&(&x - &y));
            prop_assert!(d >= -1e-12);
        }

        #[test]
        fn prox_is_firmly_nonexpansive(pot in arb_potential(), lambda in 0.01..10.0f64,
                                       z1 in arb_vec(2, 20.0), z2 in arb_vec(2, 20.0)) {
            let p1 = pot.prox(lambda, &z1, 1e-12).unwrap().point;
            let p2 = pot.prox(lambda, &z2, 1e-12).unwrap().point;
            let dp = &p1 - &p2;
            prop_assert!(dp.norm_squared() <= dp.dot(&(&z1 - &z2)) + 1e-9);
        }

        #[test]
        fn prox_residual_is_a_subgradient(pot in arb_potential(), lambda in 0.01..10.0f64,
                                          z in arb_vec(2, 20.0), probes in proptest::collection::vec(arb_vec(2, 20.0), 100)) {
            let res = pot.prox(lambda, &z, 1e-12).unwrap();
            prop_assert!(res.residual <= 1e-12);
            let s = (&z - &res.point) / lambda;
            let gap = pot.subgradient_gap(&res.point, &s, &probes);
            let scale = 1.0 + probes.iter().map(|y| pot.value(y).abs()).fold(0.0, f64::max);
            prop_assert!(gap >= -1e-9 * scale, "gap {gap}");
        }

        #[test]
        fn envelope_lies_below_probes(pot in arb_potential(), lambda in 0.01..10.0f64,
                                      z in arb_vec(2, 10.0), m in arb_vec(2, 10.0)) {
            let env = pot.moreau_envelope(lambda, &z).unwrap();
            prop_assert!(env <= pot.value(&z) + 1e-9 * (1.0 + pot.value(&z)));
            let probe = pot.value(&m) + (&z - &m).norm_squared() / (2.0 * lambda);
            prop_assert!(env <= probe + 1e-9 * (1.0 + probe));
        }
    }
}
