use std::collections::BTreeMap;

use super::{Expr, Func, Var};
use crate::Error;

/// Source of numeric values for variables during evaluation.
pub trait Env {
    fn lookup(&self, v: &Var) -> Option<f64>;
}

/// Explicit map from variables to values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Binding {
    values: BTreeMap<Var, f64>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, v: Var, value: f64) -> Self {
        self.set(v, value);
        self
    }

    pub fn set(&mut self, v: Var, value: f64) {
        let v = match v {
            Var::W(i, j) => Var::w(i, j),
            other => other,
        };
        self.values.insert(v, value);
    }

    pub fn get(&self, v: &Var) -> Option<f64> {
        self.values.get(v).copied()
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.values.contains_key(v)
    }

    /// Adds every entry of `other`, overwriting duplicates.
    pub fn extend(&mut self, other: &Binding) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, f64)> {
        self.values.iter().map(|(k, v)| (k, *v))
    }

    pub fn from_params(params: &BTreeMap<String, f64>) -> Self {
        let mut b = Binding::new();
        for (name, value) in params {
            b.set(Var::Param(name.clone()), *value);
        }
        b
    }
}

impl Env for Binding {
    fn lookup(&self, v: &Var) -> Option<f64> {
        self.get(v)
    }
}

impl<E: Env + ?Sized> Env for &E {
    fn lookup(&self, v: &Var) -> Option<f64> {
        (**self).lookup(v)
    }
}

fn domain(what: impl Into<String>) -> Error {
    Error::Domain(what.into())
}

fn finite(v: f64, what: &str) -> Result<f64, Error> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!("non-finite value in {what}")))
    }
}

/// Floating-point value of `e`.
///
/// Fails with [`Error::UnboundVariable`] when `env` lacks a variable and with
/// [`Error::Domain`] at singularities: log or sqrt outside their domain,
/// division by zero, or overflow.
pub fn evaluate<E: Env + ?Sized>(e: &Expr, env: &E) -> Result<f64, Error> {
    match e {
        Expr::Const(c) => Ok(c.to_f64()),
        Expr::Var(v) => env.lookup(v).ok_or_else(|| Error::UnboundVariable(v.to_string())),
        Expr::Sum(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += evaluate(t, env)?;
            }
            finite(acc, "sum")
        }
        Expr::Product(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= evaluate(f, env)?;
            }
            finite(acc, "product")
        }
        Expr::Pow(b, n) => {
            let base = evaluate(b, env)?;
            if base == 0.0 && *n < 0 {
                return Err(domain("division by zero in negative power"));
            }
            let exp = i32::try_from(*n).map_err(|_| domain("exponent out of range"))?;
            finite(base.powi(exp), "power")
        }
        Expr::Quotient(a, b) => {
            let num = evaluate(a, env)?;
            let den = evaluate(b, env)?;
            if den == 0.0 {
                return Err(domain("division by zero"));
            }
            finite(num / den, "quotient")
        }
        Expr::Fn(f, a) => {
            let x = evaluate(a, env)?;
            let v = match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Tanh => x.tanh(),
                Func::Log if x > 0.0 => x.ln(),
                Func::Log => return Err(domain(format!("log of non-positive value {x}"))),
                Func::Sqrt if x >= 0.0 => x.sqrt(),
                Func::Sqrt => return Err(domain(format!("sqrt of negative value {x}"))),
            };
            finite(v, f.name())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn simple_values() {
        let b = Binding::new().with(Var::Z(1), 3.0);
        assert_eq!(evaluate(&parse("z1^2").unwrap(), &b).unwrap(), 9.0);

        let e = parse("1/2*(z1^2 + z2^2) - 1/2*u^2").unwrap();
        let b = Binding::new().with(Var::U, 1.0).with(Var::Z(1), 1.0).with(Var::Z(2), 1.0);
        assert_eq!(evaluate(&e, &b).unwrap(), 0.5);
    }

    #[test]
    fn singularities_are_domain_errors() {
        let b = Binding::new().with(Var::U, 0.0);
        for text in ["log(u)", "1/u", "u^-2", "sqrt(u - 1)"] {
            let err = evaluate(&parse(text).unwrap(), &b).unwrap_err();
            assert!(matches!(err, Error::Domain(_)), "{text}: {err:?}");
        }
    }

    #[test]
    fn unbound_variable() {
        let err = evaluate(&parse("u + z2").unwrap(), &Binding::new().with(Var::U, 1.0)).unwrap_err();
        assert_eq!(err, Error::UnboundVariable("z2".into()));
    }

    #[test]
    fn symmetric_hessian_binding() {
        let b = Binding::new().with(Var::W(2, 1), 4.0);
        assert_eq!(evaluate(&parse("w12").unwrap(), &b).unwrap(), 4.0);
    }
}
