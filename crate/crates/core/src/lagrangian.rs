//! Operators derived from a scalar Lagrangian `L(x, u, z)`.
//!
//! Sign conventions, fixed once for the whole crate:
//!
//! * Euler-Lagrange residual: `δL = L_u - D_j L_{z_j}`, so the nonlinear
//!   Poisson equation reads `F'(u) - Δu = 0`.
//! * Noether component `i`: `D_j T_ij + L_{x_i}` with
//!   `T_ij = z_i L_{z_j} - δ_ij L`.
//!
//! `D_j` is the total derivative along a field, expanded by the chain rule:
//! `D_j e = e_{x_j} + e_u z_j + Σ_k e_{z_k} w_{kj}`. With these conventions
//! `noether_i + δL · z_i` vanishes identically.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::expr::{
    differentiate, evaluate, is_identically_zero, parse, simplify, Binding, Expr, Var, ZeroTest,
    ZeroVerdict,
};
use crate::{Error, Result};

/// A first-order scalar Lagrangian on `N` space dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Lagrangian {
    dim: usize,
    body: Expr,
    params: BTreeMap<String, f64>,
}

impl Lagrangian {
    /// Fails if `body` mentions Hessian slots or indices above `dim`.
    pub fn new(dim: usize, body: Expr) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLagrangian("dimension must be at least 1".into()));
        }
        for v in body.variables() {
            match v {
                Var::W(..) => {
                    return Err(Error::InvalidLagrangian(format!(
                        "Hessian slot {v} is not allowed in a first-order Lagrangian"
                    )))
                }
                Var::X(i) | Var::Z(i) if i == 0 || i > dim => {
                    return Err(Error::InvalidLagrangian(format!(
                        "variable {v} exceeds dimension {dim}"
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { dim, body, params: BTreeMap::new() })
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params.extend(params);
        self
    }

    /// Parses the Lagrangian file format:
    ///
    /// ```text
    /// dim = 2
    /// param eps = 1e-3
    /// L = 1/2*(z1^2 + z2^2) + u
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut params = BTreeMap::new();
        let mut body = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let indent = raw.len() - raw.trim_start().len();
            if body.is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    column: indent + 1,
                    message: "nothing may follow the `L = ...` line".into(),
                });
            }
            let (key, value, value_col) = split_assignment(raw, line_no)?;
            if key == "dim" {
                let n = value.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    column: value_col,
                    message: format!("dimension must be a positive integer, found '{}'", value.trim()),
                })?;
                dim = Some(n);
            } else if let Some(name) = key.strip_prefix("param ") {
                let name = name.trim().to_string();
                params.insert(name, parse_constant(value, line_no, value_col)?);
            } else if key == "L" {
                if dim.is_none() {
                    return Err(Error::Parse {
                        line: line_no,
                        column: indent + 1,
                        message: "`dim = N` must precede the Lagrangian".into(),
                    });
                }
                body = Some(crate::expr::parse::parse_at(value, line_no, value_col)?);
            } else {
                return Err(Error::Parse {
                    line: line_no,
                    column: indent + 1,
                    message: format!("unknown key '{key}'"),
                });
            }
        }
        let dim = dim.ok_or_else(|| Error::InvalidLagrangian("missing `dim = N` line".into()))?;
        let body = body.ok_or_else(|| Error::InvalidLagrangian("missing `L = ...` line".into()))?;
        Ok(Lagrangian::new(dim, body)?.with_params(params))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param_binding(&self) -> Binding {
        Binding::from_params(&self.params)
    }

    /// Zero test with this Lagrangian's parameters held fixed.
    pub fn zero_test(&self, base: &ZeroTest) -> ZeroTest {
        let mut fixed = base.fixed.clone();
        fixed.extend(&self.param_binding());
        base.clone().with_fixed(fixed)
    }

    pub fn is_position_independent(&self) -> bool {
        !self.body.contains_where(&|v| matches!(v, Var::X(_)))
    }

    /// `∂L/∂v`, simplified.
    pub fn partial(&self, v: &Var) -> Expr {
        differentiate(&self.body, v)
    }

    /// Value of `L` at the given binding (parameters are added automatically).
    pub fn eval(&self, binding: &Binding) -> Result<f64> {
        let mut b = self.param_binding();
        b.extend(binding);
        evaluate(&self.body, &b)
    }
}

impl fmt::Display for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dim = {}", self.dim)?;
        for (name, value) in &self.params {
            writeln!(f, "param {name} = {value:?}")?;
        }
        writeln!(f, "L = {}", self.body)
    }
}

pub(crate) fn split_assignment(raw: &str, line: usize) -> Result<(&str, &str, usize)> {
    let eq = raw.find('=').ok_or_else(|| Error::Parse {
        line,
        column: raw.len() - raw.trim_start().len() + 1,
        message: "expected `key = value`".into(),
    })?;
    let key = raw[..eq].trim();
    let value = &raw[eq + 1..];
    Ok((key, value, raw[..eq + 1].chars().count() + 1))
}

pub(crate) fn parse_constant(text: &str, line: usize, column: usize) -> Result<f64> {
    let e = crate::expr::parse::parse_at(text, line, column)?;
    evaluate(&e, &Binding::new()).map_err(|err| Error::Parse {
        line,
        column,
        message: format!("parameter value must be a constant expression ({err})"),
    })
}

/// Total derivative `D_j e = e_{x_j} + e_u z_j + Σ_k e_{z_k} w_{kj}` of an
/// expression in `(x, u, z)` along a field.
pub fn total_derivative(e: &Expr, j: usize, dim: usize) -> Expr {
    let mut terms = vec![differentiate(e, &Var::X(j)), differentiate(e, &Var::U) * Expr::z(j)];
    for k in 1..=dim {
        terms.push(differentiate(e, &Var::Z(k)) * Expr::w(k, j));
    }
    simplify(&Expr::Sum(terms))
}

/// Euler-Lagrange residual `δL` as an expression in `(x, u, z, w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerLagrangeOperator {
    pub dim: usize,
    pub residual: Expr,
}

impl EulerLagrangeOperator {
    /// Second-order quasilinear structure: the residual is affine in every
    /// Hessian slot.
    pub fn is_affine_in_hessian(&self) -> bool {
        hessian_slots(self.dim).iter().all(|a| {
            let first = differentiate(&self.residual, a);
            hessian_slots(self.dim).iter().all(|b| differentiate(&first, b).is_zero())
        })
    }
}

pub(crate) fn hessian_slots(dim: usize) -> Vec<Var> {
    let mut out = Vec::new();
    for i in 1..=dim {
        for j in i..=dim {
            out.push(Var::w(i, j));
        }
    }
    out
}

/// `N × N` matrix of expressions, indexed from 1 like the variables.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicTensor {
    dim: usize,
    entries: Vec<Expr>,
}

impl SymbolicTensor {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 1..=dim {
            for j in 1..=dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)` with `1 <= i, j <= dim`.
    pub fn get(&self, i: usize, j: usize) -> &Expr {
        assert!((1..=self.dim).contains(&i) && (1..=self.dim).contains(&j), "index out of range");
        &self.entries[(i - 1) * self.dim + (j - 1)]
    }

    pub fn trace(&self) -> Expr {
        simplify(&Expr::Sum((1..=self.dim).map(|i| self.get(i, i).clone()).collect()))
    }

    /// Checks symmetry entry by entry after simplification.
    pub fn is_symmetric(&self) -> bool {
        (1..=self.dim).all(|i| (i + 1..=self.dim).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn simplified(&self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(simplify).collect() }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Expr]> {
        self.entries.chunks(self.dim)
    }
}

/// Noether system: component `i` is `D_j T_ij + L_{x_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoetherOperator {
    pub components: Vec<Expr>,
}

impl NoetherOperator {
    /// Component `i`, 1-based.
    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i - 1]
    }
}

pub fn euler_lagrange(l: &Lagrangian) -> EulerLagrangeOperator {
    let n = l.dim();
    let mut terms = vec![l.partial(&Var::U)];
    for j in 1..=n {
        terms.push(-total_derivative(&l.partial(&Var::Z(j)), j, n));
    }
    EulerLagrangeOperator { dim: n, residual: simplify(&Expr::Sum(terms)) }
}

pub fn energy_momentum(l: &Lagrangian) -> SymbolicTensor {
    let grads: Vec<Expr> = (1..=l.dim()).map(|j| l.partial(&Var::Z(j))).collect();
    SymbolicTensor::from_fn(l.dim(), |i, j| {
        let mut e = Expr::z(i) * grads[j - 1].clone();
        if i == j {
            e = e - l.body().clone();
        }
        simplify(&e)
    })
}

pub fn noether(l: &Lagrangian) -> NoetherOperator {
    let n = l.dim();
    let t = energy_momentum(l);
    let components = (1..=n)
        .map(|i| {
            let mut terms: Vec<Expr> = (1..=n).map(|j| total_derivative(t.get(i, j), j, n)).collect();
            terms.push(l.partial(&Var::X(i)));
            simplify(&Expr::Sum(terms))
        })
        .collect();
    NoetherOperator { components }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentVerdict {
    pub index: usize,
    /// The expression that was tested, after simplification.
    pub expression: String,
    pub verdict: ZeroVerdict,
}

/// Outcome of checking `noether_i + δL · z_i = 0` for every `i`.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub holds: bool,
    pub components: Vec<ComponentVerdict>,
}

/// Checks the identity `D_j T_ij + L_{x_i} = -δL · z_i` component by component.
pub fn check_identity(l: &Lagrangian, test: &ZeroTest) -> Result<IdentityReport> {
    let el = euler_lagrange(l);
    let no = noether(l);
    let test = l.zero_test(test);
    let mut components = Vec::with_capacity(l.dim());
    for i in 1..=l.dim() {
        let defect = simplify(&(no.component(i).clone() + el.residual.clone() * Expr::z(i)));
        let verdict = is_identically_zero(&defect, &test)?;
        components.push(ComponentVerdict { index: i, expression: defect.to_string(), verdict });
    }
    Ok(IdentityReport { holds: components.iter().all(|c| c.verdict.is_zero), components })
}

/// How the first line of condition (H), `L_{x_i z_i}(x, u, 0) = 0`, is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HMode {
    /// Summed over `i` (the contracted form).
    #[default]
    Trace,
    /// Each `i` separately.
    PerIndex,
}

impl std::str::FromStr for HMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(HMode::Trace),
            "per_index" | "per-index" => Ok(HMode::PerIndex),
            other => Err(Error::InvalidInput(format!("unknown (H) mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HCheck {
    pub label: String,
    pub expression: String,
    pub verdict: ZeroVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionHReport {
    pub mode: HMode,
    pub satisfied: bool,
    pub checks: Vec<HCheck>,
    /// First expression that fails to vanish.
    pub offending: Option<String>,
}

/// Condition (H): `L_{x_i z_i}(x, u, 0) = 0` and `L_{x_i u}(x, u, 0) = 0`
/// for every `i`.
pub fn check_condition_h(l: &Lagrangian, mode: HMode, test: &ZeroTest) -> Result<ConditionHReport> {
    let n = l.dim();
    let at_zero_gradient = |e: &Expr| {
        simplify(&e.substitute_with(&|v| matches!(v, Var::Z(_)).then(Expr::zero)))
    };
    let mixed = |i: usize, v: Var| differentiate(&l.partial(&Var::X(i)), &v);

    let mut candidates = Vec::new();
    match mode {
        HMode::Trace => {
            let sum = Expr::Sum((1..=n).map(|i| mixed(i, Var::Z(i))).collect());
            candidates.push(("sum_i L_{x_i z_i}(x,u,0)".to_string(), at_zero_gradient(&sum)));
        }
        HMode::PerIndex => {
            for i in 1..=n {
                candidates.push((format!("L_{{x{i} z{i}}}(x,u,0)"), at_zero_gradient(&mixed(i, Var::Z(i)))));
            }
        }
    }
    for i in 1..=n {
        candidates.push((format!("L_{{x{i} u}}(x,u,0)"), at_zero_gradient(&mixed(i, Var::U))));
    }

    let test = l.zero_test(test);
    let mut checks = Vec::with_capacity(candidates.len());
    for (label, e) in candidates {
        let verdict = is_identically_zero(&e, &test)?;
        checks.push(HCheck { label, expression: e.to_string(), verdict });
    }
    let offending = checks.iter().find(|c| !c.verdict.is_zero).map(|c| c.expression.clone());
    Ok(ConditionHReport { mode, satisfied: offending.is_none(), checks, offending })
}

/// Parses an expression and wraps it as an `N`-dimensional Lagrangian.
pub fn lagrangian(dim: usize, text: &str) -> Result<Lagrangian> {
    Lagrangian::new(dim, parse(text)?)
}

/// Named Lagrangians used by the verification scenarios and tests.
pub mod corpus {
    use super::*;

    /// `½|z|² + F(u)` in two dimensions.
    pub fn nonlinear_poisson(potential: &str) -> Lagrangian {
        lagrangian(2, &format!("1/2*(z1^2 + z2^2) + {potential}")).expect("corpus expression")
    }

    /// `F(u)` alone, no gradient dependence.
    pub fn potential_only(potential: &str) -> Lagrangian {
        lagrangian(2, potential).expect("corpus expression")
    }

    /// Regularized p-Laplacian `½ (eps + |z|²)^{p/2} + F(u)`, written through
    /// `exp`/`log` with `p` and `eps` as parameters.
    pub fn p_laplacian(p: f64, eps: f64, potential: &str) -> Lagrangian {
        lagrangian(2, &format!("1/2*exp(p/2*log(eps + z1^2 + z2^2)) + {potential}"))
            .expect("corpus expression")
            .with_param("p", p)
            .with_param("eps", eps)
    }

    /// `½ φ(|z|²) + F(u)` with `φ(s) = (eps + s)²`.
    pub fn squared_p_laplacian(potential: &str) -> Lagrangian {
        lagrangian(2, &format!("1/2*(eps + z1^2 + z2^2)^2 + {potential}"))
            .expect("corpus expression")
            .with_param("eps", 1e-3)
    }

    /// `½ (1 + x1²) |z|² + u³`.
    pub fn weighted() -> Lagrangian {
        lagrangian(2, "1/2*(1 + x1^2)*(z1^2 + z2^2) + u^3").expect("corpus expression")
    }

    /// `½ φ(x, u) |z|² + F(u)` with `φ = 1 + x1² u²`.
    pub fn position_weighted(potential: &str) -> Lagrangian {
        lagrangian(2, &format!("1/2*(1 + x1^2*u^2)*(z1^2 + z2^2) + {potential}"))
            .expect("corpus expression")
    }

    /// Every Lagrangian the identity and trace checks run over.
    pub fn all() -> Vec<(String, Lagrangian)> {
        let mut out = Vec::new();
        for f in ["u", "u^2", "u^3 - u", "cos(u)"] {
            out.push((format!("1/2|z|^2 + {f}"), nonlinear_poisson(f)));
        }
        out.push(("F(u) = u".into(), potential_only("u")));
        out.push(("F(u) = u^2".into(), potential_only("u^2")));
        out.push(("p-Laplacian p=3".into(), p_laplacian(3.0, 1e-3, "u^2")));
        out.push(("(eps + |z|^2)^2 p-Laplacian".into(), squared_p_laplacian("u^2")));
        out.push(("1/2(1+x1^2)|z|^2 + u^3".into(), weighted()));
        out.push(("1/2(1+x1^2 u^2)|z|^2 + u^3 - u".into(), position_weighted("u^3 - u")));
        out
    }
}
