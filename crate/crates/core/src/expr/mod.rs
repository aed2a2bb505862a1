//! A small computer-algebra engine over the variables of a first-order
//! variational problem: coordinates `x_i`, the field value `u`, gradient
//! slots `z_i`, Hessian slots `w_ij` and named parameters.
//!
//! Expressions are immutable trees. [`simplify`] puts them in a canonical
//! form (flattened, constants folded, like terms collected, products of sums
//! expanded), [`differentiate`] returns simplified partial derivatives and
//! [`evaluate`] computes values against any [`Env`].

mod diff;
mod display;
mod eval;
mod number;
pub(crate) mod parse;
mod simplify;
mod zero;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use diff::differentiate;
pub use eval::{evaluate, Binding, Env};
pub use number::{Number, Rational};
pub use parse::parse;
pub use simplify::simplify;
pub use zero::{is_identically_zero, DecisionPath, ZeroTest, ZeroVerdict, DEFAULT_SEED};

/// A variable slot.
///
/// Hessian slots are symmetric: `W(i, j)` and `W(j, i)` are the same
/// variable, which [`Var::w`] enforces by storing the smaller index first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(usize),
    U,
    Z(usize),
    W(usize, usize),
    Param(String),
}

impl Var {
    pub fn w(i: usize, j: usize) -> Var {
        Var::W(i.min(j), i.max(j))
    }

    pub fn param(name: impl Into<String>) -> Var {
        Var::Param(name.into())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{i}"),
            Var::U => write!(f, "u"),
            Var::Z(i) => write!(f, "z{i}"),
            Var::W(i, j) if *i < 10 && *j < 10 => write!(f, "w{i}{j}"),
            Var::W(i, j) => write!(f, "w{i}_{j}"),
            Var::Param(name) => f.write_str(name),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

/// Expression tree. Power exponents are integers; other powers go through
/// `exp`/`log` or `sqrt`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expr {
    Const(Number),
    Var(Var),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, i64),
    Quotient(Box<Expr>, Box<Expr>),
    Fn(Func, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(Number::ZERO)
    }

    pub fn one() -> Expr {
        Expr::Const(Number::ONE)
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(Number::int(n))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::Const(Number::ratio(num, den))
    }

    pub fn float(v: f64) -> Expr {
        Expr::Const(Number::Float(v))
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn x(i: usize) -> Expr {
        Expr::Var(Var::X(i))
    }

    pub fn u() -> Expr {
        Expr::Var(Var::U)
    }

    pub fn z(i: usize) -> Expr {
        Expr::Var(Var::Z(i))
    }

    pub fn w(i: usize, j: usize) -> Expr {
        Expr::Var(Var::w(i, j))
    }

    pub fn param(name: &str) -> Expr {
        Expr::Var(Var::param(name))
    }

    pub fn pow(self, n: i64) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    pub fn apply(self, f: Func) -> Expr {
        Expr::Fn(f, Box::new(self))
    }

    pub fn sin(self) -> Expr {
        self.apply(Func::Sin)
    }

    pub fn cos(self) -> Expr {
        self.apply(Func::Cos)
    }

    pub fn exp(self) -> Expr {
        self.apply(Func::Exp)
    }

    pub fn ln(self) -> Expr {
        self.apply(Func::Log)
    }

    pub fn sqrt(self) -> Expr {
        self.apply(Func::Sqrt)
    }

    pub fn tanh(self) -> Expr {
        self.apply(Func::Tanh)
    }

    /// `Σ_{i=1..n} z_i²`.
    pub fn grad_norm_sq(n: usize) -> Expr {
        Expr::Sum((1..=n).map(|i| Expr::z(i).pow(2)).collect())
    }

    pub fn as_const(&self) -> Option<Number> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => Vec::new(),
            Expr::Sum(v) | Expr::Product(v) => v.iter().collect(),
            Expr::Pow(b, _) | Expr::Fn(_, b) => vec![b],
            Expr::Quotient(a, b) => vec![a, b],
        }
    }

    /// Does `v` occur anywhere in the tree?
    pub fn contains(&self, v: &Var) -> bool {
        match self {
            Expr::Var(x) => x == v,
            _ => self.children().into_iter().any(|c| c.contains(v)),
        }
    }

    pub fn contains_where(&self, pred: &impl Fn(&Var) -> bool) -> bool {
        match self {
            Expr::Var(x) => pred(x),
            _ => self.children().into_iter().any(|c| c.contains_where(pred)),
        }
    }

    /// Every variable occurring in the expression, in canonical order.
    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            _ => self.children().into_iter().for_each(|c| c.collect_vars(out)),
        }
    }

    /// Replaces every occurrence of variables accepted by `f` with the
    /// returned expression. The result is not simplified.
    pub fn substitute_with(&self, f: &impl Fn(&Var) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| t.substitute_with(f)).collect()),
            Expr::Product(fs) => Expr::Product(fs.iter().map(|t| t.substitute_with(f)).collect()),
            Expr::Pow(b, n) => Expr::Pow(Box::new(b.substitute_with(f)), *n),
            Expr::Quotient(a, b) => {
                Expr::Quotient(Box::new(a.substitute_with(f)), Box::new(b.substitute_with(f)))
            }
            Expr::Fn(func, a) => Expr::Fn(*func, Box::new(a.substitute_with(f))),
        }
    }

    /// Substitutes `value` for `var` and simplifies.
    pub fn substitute(&self, var: &Var, value: &Expr) -> Expr {
        simplify(&self.substitute_with(&|v| (v == var).then(|| value.clone())))
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Self {
        Expr::Var(v)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match self {
            Expr::Sum(mut ts) => {
                ts.push(rhs);
                Expr::Sum(ts)
            }
            lhs => Expr::Sum(vec![lhs, rhs]),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match self {
            Expr::Product(mut fs) => {
                fs.push(rhs);
                Expr::Product(fs)
            }
            lhs => Expr::Product(vec![lhs, rhs]),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Quotient(Box::new(self), Box::new(rhs))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Product(vec![Expr::int(-1), self])
    }
}

impl std::str::FromStr for Expr {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
