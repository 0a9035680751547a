//! The nonlinear coupling `B(t, u)` together with its Lipschitz data.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::trajectory::TimeGrid;

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type RadiusTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SiteFn = Arc<dyn Fn(f64, usize, f64) -> f64 + Send + Sync>;
pub type CouplingFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Lipschitz modulus of a coupling.
#[derive(Clone)]
pub enum Lipschitz {
    /// `|B(t,u) - B(t,v)| <= alpha(t) |u - v|` everywhere.
    Global(TimeFn),
    /// `|B(t,u) - B(t,v)| <= alpha(R, t) |u - v|` on the ball of radius `R`.
    Local(RadiusTimeFn),
}

impl fmt::Debug for Lipschitz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lipschitz::Global(_) => f.write_str("Global(..)"),
            Lipschitz::Local(_) => f.write_str("Local(..)"),
        }
    }
}

#[derive(Clone)]
enum Kind {
    Zero,
    Linear {
        matrix: DMatrix<f64>,
        norm: f64,
    },
    Nemytskii {
        dim: usize,
        b: SiteFn,
        c_b: f64,
    },
    Cubic {
        sign: f64,
        coeff: f64,
    },
    Custom {
        dim: Option<usize>,
        eval: CouplingFn,
        lipschitz: Lipschitz,
        zero_bound: TimeFn,
    },
}

/// Coupling operator `B : [0, T] x R^n -> R^n`. Evaluation is pure.
#[derive(Clone)]
pub struct Coupling {
    kind: Kind,
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Zero => f.write_str("Coupling::Zero"),
            Kind::Linear { matrix, norm } => f
                .debug_struct("Coupling::Linear")
                .field("shape", &matrix.shape())
                .field("norm", norm)
                .finish(),
            Kind::Nemytskii { dim, c_b, .. } => f
                .debug_struct("Coupling::Nemytskii")
                .field("dim", dim)
                .field("c_b", c_b)
                .finish(),
            Kind::Cubic { sign, coeff } => f
                .debug_struct("Coupling::Cubic")
                .field("sign", sign)
                .field("coeff", coeff)
                .finish(),
            Kind::Custom { dim, lipschitz, .. } => f
                .debug_struct("Coupling::Custom")
                .field("dim", dim)
                .field("lipschitz", lipschitz)
                .finish(),
        }
    }
}

impl Coupling {
    pub fn zero() -> Self {
        Self { kind: Kind::Zero }
    }

    /// `B(t, u) = K u`; the declared modulus is the spectral norm of `K`.
    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "linear coupling needs a nonempty square matrix, got {:?}",
                matrix.shape()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("linear coupling matrix must be finite".into()));
        }
        let norm = operator_norm(&matrix);
        Ok(Self {
            kind: Kind::Linear { matrix, norm },
        })
    }

    /// Coordinatewise `B(t, u)_i = b(t, i, u_i)` with `|b(t,i,x) - b(t,i,y)| <= c_b |x - y|`.
    pub fn nemytskii(dim: usize, b: SiteFn, c_b: f64) -> Result<Self> {
        if !(c_b >= 0.0 && c_b.is_finite()) {
            return Err(Error::InvalidParameter(format!("C_b must be nonnegative, got {c_b}")));
        }
        Ok(Self {
            kind: Kind::Nemytskii { dim, b, c_b },
        })
    }

    /// Coordinatewise `B(t, u)_i = sign * coeff * u_i^3`; only locally Lipschitz.
    pub fn cubic(sign: f64, coeff: f64) -> Result<Self> {
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::InvalidParameter(format!("cubic sign must be ±1, got {sign}")));
        }
        if !(coeff >= 0.0 && coeff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cubic coefficient must be nonnegative, got {coeff}"
            )));
        }
        Ok(Self {
            kind: Kind::Cubic { sign, coeff },
        })
    }

    pub fn custom(dim: Option<usize>, eval: CouplingFn, lipschitz: Lipschitz, zero_bound: TimeFn) -> Self {
        Self {
            kind: Kind::Custom {
                dim,
                eval,
                lipschitz,
                zero_bound,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Zero => "zero",
            Kind::Linear { .. } => "linear",
            Kind::Nemytskii { .. } => "nemytskii",
            Kind::Cubic { .. } => "cubic",
            Kind::Custom { .. } => "custom",
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            Kind::Linear { matrix, .. } => Some(matrix.nrows()),
            Kind::Nemytskii { dim, .. } => Some(*dim),
            Kind::Custom { dim, .. } => *dim,
            Kind::Zero | Kind::Cubic { .. } => None,
        }
    }

    pub fn eval(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            Kind::Zero => DVector::zeros(u.len()),
            Kind::Linear { matrix, .. } => matrix * u,
            Kind::Nemytskii { b, .. } => {
                DVector::from_iterator(u.len(), u.iter().enumerate().map(|(i, &x)| b(t, i, x)))
            }
            Kind::Cubic { sign, coeff } => u.map(|x| sign * coeff * x * x * x),
            Kind::Custom { eval, .. } => eval(t, u),
        }
    }

    pub fn lipschitz(&self) -> Lipschitz {
        match &self.kind {
            Kind::Zero => Lipschitz::Global(Arc::new(|_| 0.0)),
            Kind::Linear { norm, .. } => {
                let n = *norm;
                Lipschitz::Global(Arc::new(move |_| n))
            }
            Kind::Nemytskii { c_b, .. } => {
                let c = *c_b;
                Lipschitz::Global(Arc::new(move |_| c))
            }
            Kind::Cubic { coeff, .. } => {
                let c = *coeff;
                Lipschitz::Local(Arc::new(move |r, _| 3.0 * r * r * c))
            }
            Kind::Custom { lipschitz, .. } => lipschitz.clone(),
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self.lipschitz(), Lipschitz::Global(_))
    }

    /// `alpha(t)` for global couplings, `alpha_R(t)` for local ones.
    pub fn modulus(&self, radius: Option<f64>, t: f64) -> Result<f64> {
        match self.lipschitz() {
            Lipschitz::Global(alpha) => Ok(alpha(t)),
            Lipschitz::Local(alpha) => radius.map(|r| alpha(r, t)).ok_or(Error::ModulusUnavailable),
        }
    }

    /// Bound `g(t) >= |B(t, 0)|`.
    pub fn zero_bound(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Zero | Kind::Linear { .. } | Kind::Cubic { .. } => 0.0,
            Kind::Nemytskii { dim, b, .. } => (0..*dim).map(|i| b(t, i, 0.0).powi(2)).sum::<f64>().sqrt(),
            Kind::Custom { zero_bound, .. } => zero_bound(t),
        }
    }

    /// Trapezoid approximation of `∫ alpha` over the grid.
    pub fn lipschitz_budget(&self, radius: Option<f64>, grid: &TimeGrid) -> Result<f64> {
        if let Some(r) = radius {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
            }
        }
        let samples = grid
            .nodes()
            .map(|t| self.modulus(radius, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(grid.trapezoid(&samples))
    }
}

/// Spectral norm of `K` by power iteration on `K^T K`.
pub fn operator_norm(matrix: &DMatrix<f64>) -> f64 {
    let gram = matrix.transpose() * matrix;
    let n = gram.ncols();
    if gram.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    // Deterministic start with weight on every coordinate.
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    x /= x.norm();
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let y = &gram * &x;
        let ny = y.norm();
        if ny == 0.0 {
            break;
        }
        let next = x.dot(&y);
        x = y / ny;
        if (next - estimate).abs() <= 1e-15 * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate.max(0.0).sqrt()
}
