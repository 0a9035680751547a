//! Problem data and solver settings.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::potentials::{ConvexPotential, DEFAULT_PROX_TOL};

pub type VectorFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// External force `f : [0, T] -> R^n`.
#[derive(Clone)]
pub struct Forcing {
    dim: usize,
    f: VectorFn,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing").field("dim", &self.dim).finish()
    }
}

impl Forcing {
    pub fn zero(dim: usize) -> Self {
        Self::constant(DVector::zeros(dim))
    }

    pub fn constant(value: DVector<f64>) -> Self {
        let dim = value.len();
        Self {
            dim,
            f: Arc::new(move |_| value.clone()),
        }
    }

    pub fn from_fn(dim: usize, f: VectorFn) -> Self {
        Self { dim, f }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        (self.f)(t)
    }

    /// `f + other`.
    pub fn plus(&self, other: &Forcing) -> Forcing {
        let (a, b) = (self.f.clone(), other.f.clone());
        Forcing::from_fn(self.dim, Arc::new(move |t| a(t) + b(t)))
    }
}

/// The Cauchy problem `u'' + dPsi(u') + B(t,u) ∋ f`, `u(0) = u0`, `u'(0) = v0` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub potential: Arc<dyn ConvexPotential>,
    pub coupling: Coupling,
    pub forcing: Forcing,
    pub u0: DVector<f64>,
    pub v0: DVector<f64>,
    pub horizon: f64,
}

impl ProblemSpec {
    pub fn new(
        potential: Arc<dyn ConvexPotential>,
        coupling: Coupling,
        forcing: Forcing,
        u0: DVector<f64>,
        v0: DVector<f64>,
        horizon: f64,
    ) -> Result<Self> {
        let spec = Self {
            potential,
            coupling,
            forcing,
            u0,
            v0,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.u0.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("problem dimension must be positive".into()));
        }
        let check = |what, found| {
            if found != dim {
                Err(Error::DimensionMismatch {
                    what,
                    expected: dim,
                    found,
                })
            } else {
                Ok(())
            }
        };
        check("v0", self.v0.len())?;
        check("forcing", self.forcing.dim())?;
        if let Some(d) = self.potential.dim() {
            check("potential", d)?;
        }
        if let Some(d) = self.coupling.dim() {
            check("coupling", d)?;
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.u0.iter().chain(self.v0.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("initial data must be finite".into()));
        }
        Ok(())
    }

    pub fn with_initial(&self, u0: DVector<f64>, v0: DVector<f64>) -> Result<Self> {
        Self::new(
            self.potential.clone(),
            self.coupling.clone(),
            self.forcing.clone(),
            u0,
            v0,
            self.horizon,
        )
    }

    pub fn with_forcing(&self, forcing: Forcing) -> Result<Self> {
        Self::new(
            self.potential.clone(),
            self.coupling.clone(),
            forcing,
            self.u0.clone(),
            self.v0.clone(),
            self.horizon,
        )
    }
}

/// Norm and domain used by the Picard iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Sup-norm on a certified short horizon, iterates confined to a ball around `u0`.
    LocalBall,
    /// Exponentially weighted sup-norm on the full horizon; needs a global modulus.
    GlobalWeighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n_steps: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub prox_tol: f64,
    pub ball_radius: f64,
    pub blowup_threshold: f64,
    pub mode: Mode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_steps: 1000,
            picard_tol: 1e-10,
            picard_max_iter: 500,
            prox_tol: DEFAULT_PROX_TOL,
            ball_radius: 1.0,
            blowup_threshold: 1e6,
            mode: Mode::GlobalWeighted,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, u0: &DVector<f64>) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::InvalidParameter("picard_max_iter must be positive".into()));
        }
        positive("picard_tol", self.picard_tol)?;
        positive("prox_tol", self.prox_tol)?;
        positive("ball_radius", self.ball_radius)?;
        positive("blowup_threshold", self.blowup_threshold)?;
        if self.blowup_threshold <= u0.norm() {
            return Err(Error::InvalidParameter(format!(
                "blowup_threshold {} must exceed |u0| = {}",
                self.blowup_threshold,
                u0.norm()
            )));
        }
        Ok(())
    }
}
