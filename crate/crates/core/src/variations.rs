//! Inner and admissible variations of `J(u) = ∫ L(x, u, Du) dx` for fields
//! given as expressions in `x1, x2`.
//!
//! An inner variation deforms the domain along `ξᵗ(x) = x + t h(x)`. Its
//! derivative at `t = 0` is computed two ways: by the closed formula
//! `∫ (u_{,i} L_{z_j} h_{i,j} - L div h - L_{x_i} h_i)` and by a central
//! difference of `t ↦ J(u ∘ ξᵗ)`. The admissible variation in direction `v`
//! is `∫ (L_u v + L_{z_j} v_{,j})`.

use serde::Serialize;

use crate::expr::{differentiate, evaluate, Binding, Expr, Number, Var};
use crate::fields::{Grid, JetEnv, JetPoint};
use crate::lagrangian::Lagrangian;
use crate::{Error, Result};

/// Nodes per direction used for the diffeomorphism bound and edge checks.
pub const PROBE_NODES: usize = 129;
/// Default quadrature nodes per direction over a support rectangle.
pub const QUADRATURE_NODES: usize = 129;
pub const DEFAULT_T_STEP: f64 = 1e-3;
pub const EDGE_TOL: f64 = 1e-10;

/// Closed rectangle `[a1, b1] × [a2, b2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Support {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Support {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self> {
        if !(a1 < b1 && a2 < b2) || ![a1, b1, a2, b2].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("empty support [{a1}, {b1}] x [{a2}, {b2}]")));
        }
        Ok(Self { a1, b1, a2, b2 })
    }

    /// Open interior.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0] > self.a1 && x[0] < self.b1 && x[1] > self.a2 && x[1] < self.b2
    }

    fn strictly_inside(&self, g: &Grid) -> bool {
        self.a1 > g.a1 && self.b1 < g.b1 && self.a2 > g.a2 && self.b2 < g.b2
    }

    /// Quadrature grid with `n` nodes per direction.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        Grid::new(n, n, (self.a1, self.b1), (self.a2, self.b2))
    }

    /// `n` points on each edge, corners included.
    fn edge_points(&self, n: usize) -> Vec<[f64; 2]> {
        let lerp = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / (n - 1) as f64;
        let mut pts = Vec::with_capacity(4 * n);
        for k in 0..n {
            pts.push([lerp(self.a1, self.b1, k), self.a2]);
            pts.push([lerp(self.a1, self.b1, k), self.b2]);
            pts.push([self.a1, lerp(self.a2, self.b2, k)]);
            pts.push([self.b1, lerp(self.a2, self.b2, k)]);
        }
        pts
    }

    /// Moves an edge point a relative `1e-9` towards the centre.
    fn nudge(&self, x: [f64; 2]) -> [f64; 2] {
        let c = [(self.a1 + self.b1) / 2.0, (self.a2 + self.b2) / 2.0];
        [x[0] + (c[0] - x[0]) * 1e-9, x[1] + (c[1] - x[1]) * 1e-9]
    }
}

fn point_binding(params: &Binding, x: [f64; 2]) -> Binding {
    let mut b = params.clone();
    b.set(Var::X(1), x[0]);
    b.set(Var::X(2), x[1]);
    b
}

fn check_spatial(e: &Expr, what: &str) -> Result<()> {
    for v in e.variables() {
        match v {
            Var::X(1 | 2) | Var::Param(_) => {}
            other => {
                return Err(Error::InvalidInput(format!("{what} may only depend on x1, x2 and parameters, found {other}")))
            }
        }
    }
    Ok(())
}

/// A scalar expression cut off to zero on and outside a support rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactField {
    expr: Expr,
    gradient: [Expr; 2],
    support: Support,
}

impl CompactField {
    fn build(expr: Expr, support: Support) -> Result<Self> {
        let expr = crate::expr::simplify(&expr);
        check_spatial(&expr, "a compactly supported field")?;
        let gradient = [differentiate(&expr, &Var::X(1)), differentiate(&expr, &Var::X(2))];
        Ok(Self { expr, gradient, support })
    }

    /// Validated: value and gradient below [`EDGE_TOL`] on the edge of the
    /// support, which must lie strictly inside `domain`.
    pub fn new(expr: Expr, support: Support, domain: &Grid, params: &Binding) -> Result<Self> {
        if !support.strictly_inside(domain) {
            return Err(Error::SupportTouchesBoundary);
        }
        let f = Self::build(expr, support)?;
        f.check_edges(params)?;
        Ok(f)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    fn raw(&self, e: &Expr, x: [f64; 2], params: &Binding) -> Result<f64> {
        evaluate(e, &point_binding(params, x))
    }

    fn check_edges(&self, params: &Binding) -> Result<()> {
        for x in self.support.edge_points(PROBE_NODES) {
            for e in std::iter::once(&self.expr).chain(&self.gradient) {
                let v = match self.raw(e, x, params) {
                    Ok(v) => v,
                    Err(Error::Domain(_)) => self.raw(e, self.support.nudge(x), params)?,
                    Err(other) => return Err(other),
                };
                if v.abs() > EDGE_TOL {
                    return Err(Error::InvalidInput(format!(
                        "{} does not vanish on the support edge: {v:e} at ({}, {})",
                        e, x[0], x[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: [f64; 2], params: &Binding) -> Result<f64> {
        if !self.support.contains(x) {
            return Ok(0.0);
        }
        self.raw(&self.expr, x, params)
    }

    pub fn grad(&self, x: [f64; 2], params: &Binding) -> Result<[f64; 2]> {
        if !self.support.contains(x) {
            return Ok([0.0, 0.0]);
        }
        Ok([self.raw(&self.gradient[0], x, params)?, self.raw(&self.gradient[1], x, params)?])
    }
}

/// A compactly supported vector field `h = (h_1, h_2)` with the bound
/// `M_h = max_x max_i Σ_j |∂_j h_i|` measured on a [`PROBE_NODES`]² grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationDirection {
    components: [CompactField; 2],
    derivative_bound: f64,
}

impl VariationDirection {
    pub fn new(components: [Expr; 2], support: Support, domain: &Grid, params: &Binding) -> Result<Self> {
        let [h1, h2] = components;
        let components =
            [CompactField::new(h1, support, domain, params)?, CompactField::new(h2, support, domain, params)?];
        let probe = Grid::new(PROBE_NODES, PROBE_NODES, (domain.a1, domain.b1), (domain.a2, domain.b2))?;
        let mut bound = 0.0f64;
        for (i, j) in probe.nodes() {
            let x = [probe.x1(i), probe.x2(j)];
            for c in &components {
                let g = c.grad(x, params)?;
                bound = bound.max(g[0].abs() + g[1].abs());
            }
        }
        Ok(Self { components, derivative_bound: bound })
    }

    pub fn support(&self) -> &Support {
        self.components[0].support()
    }

    pub fn component(&self, i: usize) -> &CompactField {
        &self.components[i - 1]
    }

    pub fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    /// Largest admissible `|t|`, `1 / (2 M_h)`.
    pub fn max_step(&self) -> f64 {
        if self.derivative_bound == 0.0 {
            f64::INFINITY
        } else {
            0.5 / self.derivative_bound
        }
    }

    pub fn value(&self, x: [f64; 2], params: &Binding) -> Result<[f64; 2]> {
        Ok([self.components[0].value(x, params)?, self.components[1].value(x, params)?])
    }

    /// `Dh` with `[i][j] = ∂_j h_i`.
    pub fn jacobian(&self, x: [f64; 2], params: &Binding) -> Result<[[f64; 2]; 2]> {
        Ok([self.components[0].grad(x, params)?, self.components[1].grad(x, params)?])
    }
}

/// `ξᵗ(x) = x + t h(x)` for an admissible `t`.
pub struct DiffeoFamily<'a> {
    h: &'a VariationDirection,
    t: f64,
}

impl<'a> DiffeoFamily<'a> {
    pub fn new(h: &'a VariationDirection, t: f64) -> Result<Self> {
        if t.abs() > h.max_step() {
            return Err(Error::StepTooLarge { t, bound: h.max_step() });
        }
        Ok(Self { h, t })
    }

    pub fn map(&self, x: [f64; 2], params: &Binding) -> Result<[f64; 2]> {
        let hx = self.h.value(x, params)?;
        Ok([x[0] + self.t * hx[0], x[1] + self.t * hx[1]])
    }

    /// `Dξᵗ = I + t Dh`.
    pub fn jacobian(&self, x: [f64; 2], params: &Binding) -> Result<[[f64; 2]; 2]> {
        let d = self.h.jacobian(x, params)?;
        Ok([[1.0 + self.t * d[0][0], self.t * d[0][1]], [self.t * d[1][0], 1.0 + self.t * d[1][1]]])
    }
}

fn literal(v: f64) -> Expr {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        return Expr::int(v as i64);
    }
    let text = format!("{v}");
    let n = Number::from_decimal(&text, 0);
    if n.to_f64() == v {
        Expr::Const(n)
    } else {
        Expr::float(v)
    }
}

/// `B(s) = exp(1 - 1/(1 - s²))` for the affine map of `[a, b]` onto `[-1, 1]`.
fn bump_factor(x: Expr, a: f64, b: f64) -> Expr {
    let s = (Expr::int(2) * x - literal(a + b)) / literal(b - a);
    (Expr::one() - Expr::one() / (Expr::one() - s.pow(2))).exp()
}

/// `h_i = amplitude_i B(s_1) B(s_2)` on the support rectangle.
pub fn make_bump(support: Support, amplitude: [f64; 2], domain: &Grid) -> Result<VariationDirection> {
    if !support.strictly_inside(domain) {
        return Err(Error::SupportTouchesBoundary);
    }
    let profile = bump_factor(Expr::x(1), support.a1, support.b1) * bump_factor(Expr::x(2), support.a2, support.b2);
    let comp = |a: f64| if a == 0.0 { Expr::zero() } else { literal(a) * profile.clone() };
    VariationDirection::new([comp(amplitude[0]), comp(amplitude[1])], support, domain, &Binding::new())
}

/// A field `u(x1, x2)` with its exact symbolic gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticField {
    expr: Expr,
    gradient: [Expr; 2],
}

impl AnalyticField {
    pub fn new(expr: Expr) -> Result<Self> {
        check_spatial(&expr, "the field")?;
        let gradient = [differentiate(&expr, &Var::X(1)), differentiate(&expr, &Var::X(2))];
        Ok(Self { expr, gradient })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn gradient(&self) -> &[Expr; 2] {
        &self.gradient
    }

    fn jet(&self, x: [f64; 2], params: &Binding) -> Result<(f64, [f64; 2])> {
        let b = point_binding(params, x);
        Ok((evaluate(&self.expr, &b)?, [evaluate(&self.gradient[0], &b)?, evaluate(&self.gradient[1], &b)?]))
    }
}

/// Partial derivatives of `L` needed by the quadratures.
struct Partials {
    body: Expr,
    lu: Expr,
    lz: [Expr; 2],
    lx: [Expr; 2],
    params: Binding,
}

impl Partials {
    fn new(l: &Lagrangian) -> Result<Self> {
        if l.dim() != 2 {
            return Err(Error::InvalidLagrangian(format!("variations need dim = 2, got {}", l.dim())));
        }
        Ok(Self {
            body: l.body().clone(),
            lu: l.partial(&Var::U),
            lz: [l.partial(&Var::Z(1)), l.partial(&Var::Z(2))],
            lx: [l.partial(&Var::X(1)), l.partial(&Var::X(2))],
            params: l.param_binding(),
        })
    }

    fn at<'a>(&'a self, point: &'a JetPoint) -> JetEnv<'a> {
        JetEnv { point, params: &self.params }
    }
}

fn jet_point(x: [f64; 2], u: f64, z: [f64; 2]) -> JetPoint {
    JetPoint { i: 0, j: 0, x, u, z, w: [[0.0; 2]; 2] }
}

/// Trapezoidal rule over a support rectangle in fixed row-major order.
fn quadrature(support: &Support, nodes: usize, mut f: impl FnMut([f64; 2]) -> Result<f64>) -> Result<f64> {
    let g = support.grid(nodes)?;
    let (h1, h2) = (g.h1(), g.h2());
    let weight = |k: usize, n: usize, h: f64| if k == 0 || k == n - 1 { 0.5 * h } else { h };
    let mut total = 0.0;
    for j in 0..g.n2 {
        let mut row = 0.0;
        for i in 0..g.n1 {
            row += weight(i, g.n1, h1) * f([g.x1(i), g.x2(j)])?;
        }
        total += weight(j, g.n2, h2) * row;
    }
    Ok(total)
}

/// Closed-form inner variation `∫ (u_{,i} L_{z_j} h_{i,j} - L div h - L_{x_i} h_i)`.
pub fn inner_variation_formula(l: &Lagrangian, u: &AnalyticField, h: &VariationDirection, nodes: usize) -> Result<f64> {
    let p = Partials::new(l)?;
    let params = &p.params;
    quadrature(h.support(), nodes, |x| {
        if !h.support().contains(x) {
            return Ok(0.0);
        }
        let (uv, z) = u.jet(x, params)?;
        let point = jet_point(x, uv, z);
        let env = p.at(&point);
        let hv = h.value(x, params)?;
        let dh = h.jacobian(x, params)?;
        let lz = [evaluate(&p.lz[0], &env)?, evaluate(&p.lz[1], &env)?];
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += z[i] * lz[j] * dh[i][j];
            }
        }
        s -= evaluate(&p.body, &env)? * (dh[0][0] + dh[1][1]);
        for i in 0..2 {
            if !p.lx[i].is_zero() {
                s -= evaluate(&p.lx[i], &env)? * hv[i];
            }
        }
        Ok(s)
    })
}

/// `J(u ∘ ξᵗ)` over the support of `h`, where `u ∘ ξᵗ` is outside.
fn deformed_energy(p: &Partials, u: &AnalyticField, family: &DiffeoFamily<'_>, nodes: usize) -> Result<f64> {
    let params = &p.params;
    quadrature(family.h.support(), nodes, |x| {
        let y = family.map(x, params)?;
        let (uv, du) = u.jet(y, params)?;
        let d = family.jacobian(x, params)?;
        let z = [d[0][0] * du[0] + d[1][0] * du[1], d[0][1] * du[0] + d[1][1] * du[1]];
        let point = jet_point(x, uv, z);
        evaluate(&p.body, &p.at(&point))
    })
}

/// `[J(u ∘ ξᵗ) - J(u ∘ ξ⁻ᵗ)] / 2t` with quadrature over the support of `h`.
/// Outside the support `u ∘ ξᵗ = u`, so that part cancels exactly.
pub fn inner_variation_direct(
    l: &Lagrangian,
    u: &AnalyticField,
    h: &VariationDirection,
    nodes: usize,
    t_step: f64,
) -> Result<f64> {
    if !(t_step > 0.0) {
        return Err(Error::InvalidInput(format!("t step must be positive, got {t_step}")));
    }
    let p = Partials::new(l)?;
    let plus = DiffeoFamily::new(h, t_step)?;
    let minus = DiffeoFamily::new(h, -t_step)?;
    let jp = deformed_energy(&p, u, &plus, nodes)?;
    let jm = deformed_energy(&p, u, &minus, nodes)?;
    Ok((jp - jm) / (2.0 * t_step))
}

/// First variation `∫ (L_u v + L_{z_j} v_{,j})` over the support of `v`.
pub fn first_variation(l: &Lagrangian, u: &AnalyticField, v: &CompactField, nodes: usize) -> Result<f64> {
    let p = Partials::new(l)?;
    let params = &p.params;
    quadrature(v.support(), nodes, |x| {
        if !v.support().contains(x) {
            return Ok(0.0);
        }
        let (uv, z) = u.jet(x, params)?;
        let point = jet_point(x, uv, z);
        let env = p.at(&point);
        let dv = v.grad(x, params)?;
        Ok(evaluate(&p.lu, &env)? * v.value(x, params)?
            + evaluate(&p.lz[0], &env)? * dv[0]
            + evaluate(&p.lz[1], &env)? * dv[1])
    })
}

/// The admissible direction `w = Σ_i u_{x_i} h_i` induced by `h`.
pub fn admissible_from_inner(u: &AnalyticField, h: &VariationDirection) -> CompactField {
    let w = Expr::Sum((0..2).map(|i| u.gradient[i].clone() * h.components[i].expr.clone()).collect());
    CompactField::build(w, *h.support()).expect("products of spatial expressions are spatial")
}

/// Both inner-variation values side by side.
#[derive(Clone, Debug, Serialize)]
pub struct InnerVariationReport {
    pub formula: f64,
    pub direct: f64,
    pub abs_diff: f64,
    /// `|direct - formula| / max(|formula|, 1e-6)`.
    pub rel_diff: f64,
    pub t_step: f64,
    pub max_step: f64,
    pub derivative_bound: f64,
    pub quadrature_nodes: usize,
}

pub fn compare_inner_variations(
    l: &Lagrangian,
    u: &AnalyticField,
    h: &VariationDirection,
    nodes: usize,
    t_step: f64,
) -> Result<InnerVariationReport> {
    let formula = inner_variation_formula(l, u, h, nodes)?;
    let direct = inner_variation_direct(l, u, h, nodes, t_step)?;
    let abs_diff = (direct - formula).abs();
    Ok(InnerVariationReport {
        formula,
        direct,
        abs_diff,
        rel_diff: abs_diff / formula.abs().max(1e-6),
        t_step,
        max_step: h.max_step(),
        derivative_bound: h.derivative_bound(),
        quadrature_nodes: nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::lagrangian::lagrangian;

    fn domain() -> Grid {
        Grid::unit_square(33).unwrap()
    }

    fn centre_bump(amplitude: [f64; 2]) -> VariationDirection {
        make_bump(Support::new(0.25, 0.75, 0.25, 0.75).unwrap(), amplitude, &domain()).unwrap()
    }

    #[test]
    fn bump_shape() {
        let h = centre_bump([1.0, 0.0]);
        let p = Binding::new();
        assert_eq!(h.value([0.5, 0.5], &p).unwrap(), [1.0, 0.0]);
        assert_eq!(h.value([0.25, 0.4], &p).unwrap(), [0.0, 0.0]);
        assert_eq!(h.value([0.9, 0.5], &p).unwrap(), [0.0, 0.0]);
        assert!(h.component(2).expr().is_zero());
        assert!(h.derivative_bound() > 0.0 && h.derivative_bound().is_finite());
    }

    #[test]
    fn support_must_be_strictly_inside() {
        let s = Support::new(0.0, 0.5, 0.25, 0.75).unwrap();
        assert_eq!(make_bump(s, [1.0, 0.0], &domain()).unwrap_err(), Error::SupportTouchesBoundary);
    }

    #[test]
    fn non_vanishing_direction_is_rejected() {
        let s = Support::new(0.25, 0.75, 0.25, 0.75).unwrap();
        let err = VariationDirection::new([parse("x1").unwrap(), Expr::zero()], s, &domain(), &Binding::new());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn step_guard() {
        let h = centre_bump([1.0, 1.0]);
        let l = lagrangian(2, "1/2*(z1^2 + z2^2)").unwrap();
        let u = AnalyticField::new(parse("x1").unwrap()).unwrap();
        let t = 2.0 * h.max_step();
        assert!(matches!(inner_variation_direct(&l, &u, &h, 33, t), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn zero_direction_gives_zero() {
        let h = centre_bump([0.0, 0.0]);
        let l = lagrangian(2, "1/2*(z1^2 + z2^2) + u^3").unwrap();
        let u = AnalyticField::new(parse("x1*x2").unwrap()).unwrap();
        assert_eq!(inner_variation_formula(&l, &u, &h, 33).unwrap(), 0.0);
        assert_eq!(inner_variation_direct(&l, &u, &h, 33, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn bridge_for_linear_and_constant_fields() {
        let h = centre_bump([1.0, 0.0]);
        let u = AnalyticField::new(parse("x1").unwrap()).unwrap();
        assert_eq!(admissible_from_inner(&u, &h).expr(), h.component(1).expr());
        let c = AnalyticField::new(parse("7").unwrap()).unwrap();
        assert!(admissible_from_inner(&c, &h).expr().is_zero());
    }
}
