//! Scalar expressions from config files.
//!
//! Arithmetic with `+ - * / ^`, parentheses, `sin cos tan abs min max`,
//! plus `exp`, `ln`, `sqrt` and the constant `pi`. Free variables are fixed
//! per use site (`t`, or `t, x`, or `t, x, u`).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use fasteval::{Compiler, Evaler, Instruction, Parser, Slab};

use crate::error::{CliError, CliResult};

#[derive(Clone)]
pub struct Expr {
    source: String,
    vars: &'static [&'static str],
    compiled: Arc<(Slab, Instruction)>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

fn lookup(vars: &[&str], values: &[f64], name: &str, args: &[f64]) -> Option<f64> {
    if let Some(i) = vars.iter().position(|v| *v == name) {
        return args.is_empty().then(|| values[i]);
    }
    match (name, args) {
        ("pi", []) => Some(PI),
        ("exp", [x]) => Some(x.exp()),
        ("ln", [x]) => Some(x.ln()),
        ("sqrt", [x]) => Some(x.sqrt()),
        _ => None,
    }
}

impl Expr {
    /// Parses and compiles `source` over the given variable names. Unknown
    /// identifiers are rejected here, not at evaluation time.
    pub fn parse(source: &str, vars: &'static [&'static str]) -> CliResult<Self> {
        let mut slab = Slab::new();
        let compiled = Parser::new()
            .parse(source, &mut slab.ps)
            .map(|e| e.from(&slab.ps).compile(&slab.ps, &mut slab.cs))
            .map_err(|e| CliError::Config(format!("cannot parse expression `{source}`: {e}")))?;
        let expr = Self {
            source: source.to_string(),
            vars,
            compiled: Arc::new((slab, compiled)),
        };
        let probe = vec![0.5; vars.len()];
        expr.try_eval(&probe)
            .map_err(|e| CliError::Config(format!("expression `{source}` over ({}): {e}", vars.join(", "))))?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn try_eval(&self, values: &[f64]) -> Result<f64, fasteval::Error> {
        let (slab, instr) = &*self.compiled;
        let mut ns = |name: &str, args: Vec<f64>| lookup(self.vars, values, name, &args);
        instr.eval(slab, &mut ns)
    }

    /// Evaluates with `values` bound positionally to the variables. Runtime
    /// failures (none are expected after parsing) yield NaN, which the
    /// solver reports as a non-finite state.
    pub fn eval(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.vars.len());
        self.try_eval(values).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_grammar() {
        let e = Expr::parse("2*t^2 - 3*sin(t) + exp(-t) + cos(pi*t)", &["t"]).unwrap();
        let t: f64 = 0.7;
        let expected = 2.0 * t * t - 3.0 * t.sin() + (-t).exp() + (PI * t).cos();
        assert!((e.eval(&[t]) - expected).abs() < 1e-14);
        let e = Expr::parse("x*(1-x) + t*u", &["t", "x", "u"]).unwrap();
        assert_eq!(e.eval(&[2.0, 0.25, 3.0]), 0.1875 + 6.0);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(matches!(Expr::parse("y + 1", &["t"]), Err(CliError::Config(_))));
        assert!(matches!(Expr::parse("sin(", &["t"]), Err(CliError::Config(_))));
        assert!(matches!(Expr::parse("exp(1, 2)", &["t"]), Err(CliError::Config(_))));
    }
}
