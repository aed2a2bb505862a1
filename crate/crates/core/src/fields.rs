//! Scalar fields on uniform rectangular grids in two dimensions.
//!
//! Derivatives are second-order central differences. A [`JetField`] holds
//! `(x, u, Du, D²u)` at every node one ring inside the boundary; quantities
//! built from jets by a further difference (the discrete divergence of the
//! energy-momentum tensor) live two rings inside.

use std::fmt::Write as _;

use serde::Serialize;

use crate::expr::{evaluate, Binding, Env, Expr, Var};
use crate::{Error, Result};

/// Uniform tensor-product grid on `[a1, b1] × [a2, b2]`, boundary nodes
/// included. Node `(i, j)` sits at `(a1 + i h1, a2 + j h2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Grid {
    pub const MIN_NODES: usize = 5;

    pub fn new(n1: usize, n2: usize, (a1, b1): (f64, f64), (a2, b2): (f64, f64)) -> Result<Self> {
        if n1 < Self::MIN_NODES || n2 < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {} nodes per direction, got {n1}x{n2}",
                Self::MIN_NODES
            )));
        }
        if !(a1.is_finite() && b1.is_finite() && a2.is_finite() && b2.is_finite()) || b1 <= a1 || b2 <= a2 {
            return Err(Error::InvalidGrid(format!("empty or non-finite extent [{a1}, {b1}] x [{a2}, {b2}]")));
        }
        Ok(Self { n1, n2, a1, b1, a2, b2 })
    }

    /// `n × n` nodes on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, (0.0, 1.0), (0.0, 1.0))
    }

    pub fn h1(&self) -> f64 {
        (self.b1 - self.a1) / (self.n1 - 1) as f64
    }

    pub fn h2(&self) -> f64 {
        (self.b2 - self.a2) / (self.n2 - 1) as f64
    }

    /// Larger of the two spacings.
    pub fn h(&self) -> f64 {
        self.h1().max(self.h2())
    }

    pub fn x1(&self, i: usize) -> f64 {
        if i == self.n1 - 1 {
            self.b1
        } else {
            self.a1 + i as f64 * self.h1()
        }
    }

    pub fn x2(&self, j: usize) -> f64 {
        if j == self.n2 - 1 {
            self.b2
        } else {
            self.a2 + j as f64 * self.h2()
        }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n1 * j
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n1 - 1 || j == self.n2 - 1
    }

    pub fn area(&self) -> f64 {
        (self.b1 - self.a1) * (self.b2 - self.a2)
    }

    /// All `(i, j)` in row-major order (low `x2` first).
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n2).flat_map(move |j| (0..self.n1).map(move |i| (i, j)))
    }
}

/// Nodal values of `u` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.nodes().map(|(i, j)| f(grid.x1(i), grid.x2(j))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples an expression in `x1, x2` (and parameters from `params`).
    pub fn from_expr(grid: Grid, e: &Expr, params: &Binding) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (i, j) in grid.nodes() {
            let mut b = params.clone();
            b.set(Var::X(1), grid.x1(i));
            b.set(Var::X(2), grid.x2(j));
            values.push(evaluate(e, &b).map_err(|err| node_error(&grid, i, j, err))?);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Plain-text matrix format: `grid n1 n2 a1 b1 a2 b2` then `n2` rows of
    /// `n1` values, lowest `x2` first.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!("grid {} {} {:?} {:?} {:?} {:?}\n", g.n1, g.n2, g.a1, g.b1, g.a2, g.b2);
        for row in self.values.chunks(g.n1) {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                write!(out, "{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, message: String| Error::Parse { line: line + 1, column: 1, message };
        let (hl, header) = lines.next().ok_or_else(|| bad(0, "empty field file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 7 || parts[0] != "grid" {
            return Err(bad(hl, "expected `grid n1 n2 a1 b1 a2 b2`".into()));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(hl, format!("bad node count '{s}'")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(hl, format!("bad extent '{s}'")));
        let grid = Grid::new(
            int(parts[1])?,
            int(parts[2])?,
            (num(parts[3])?, num(parts[4])?),
            (num(parts[5])?, num(parts[6])?),
        )?;
        let mut values = Vec::with_capacity(grid.len());
        let mut rows = 0;
        for (ln, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| bad(ln, format!("bad value '{s}'"))))
                .collect::<Result<_>>()?;
            if row.len() != grid.n1 {
                return Err(bad(ln, format!("expected {} values, found {}", grid.n1, row.len())));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != grid.n2 {
            return Err(bad(hl, format!("expected {} rows, found {rows}", grid.n2)));
        }
        ScalarField::new(grid, values)
    }
}

fn node_error(grid: &Grid, i: usize, j: usize, err: Error) -> Error {
    match err {
        Error::Domain(message) => Error::DomainAtNode { i, j, x1: grid.x1(i), x2: grid.x2(j), message },
        other => other,
    }
}

/// Values on the nodes at least `margin` rings inside the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct InteriorField {
    grid: Grid,
    margin: usize,
    values: Vec<f64>,
}

impl InteriorField {
    pub fn from_fn(grid: Grid, margin: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::new();
        for j in margin..grid.n2 - margin {
            for i in margin..grid.n1 - margin {
                values.push(f(i, j));
            }
        }
        Self { grid, margin, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    fn width(&self) -> usize {
        self.grid.n1 - 2 * self.margin
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let m = self.margin;
        i >= m && j >= m && i + m < self.grid.n1 && j + m < self.grid.n2
    }

    /// Value at global node `(i, j)`; panics outside the stored region.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(self.contains(i, j), "node ({i}, {j}) outside margin {}", self.margin);
        self.values[(i - self.margin) + self.width() * (j - self.margin)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(i, j, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let (m, w) = (self.margin, self.width());
        self.values.iter().enumerate().map(move |(k, v)| (m + k % w, m + k / w, *v))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Max magnitude over nodes at least `margin` rings inside the boundary.
    pub fn max_abs_within(&self, margin: usize) -> f64 {
        self.iter()
            .filter(|&(i, j, _)| i >= margin && j >= margin && i + margin < self.grid.n1 && j + margin < self.grid.n2)
            .fold(0.0, |acc, (_, _, v)| acc.max(v.abs()))
    }

    /// Pointwise combination of two fields on the same region.
    pub fn zip_with(&self, other: &InteriorField, f: impl Fn(f64, f64) -> f64) -> InteriorField {
        assert_eq!(self.margin, other.margin);
        assert_eq!(self.grid, other.grid);
        InteriorField {
            grid: self.grid,
            margin: self.margin,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Restriction to a larger margin.
    pub fn shrink(&self, margin: usize) -> InteriorField {
        assert!(margin >= self.margin);
        InteriorField::from_fn(self.grid, margin, |i, j| self.get(i, j))
    }

    /// Extension by zero to every node.
    pub fn to_nodal(&self) -> ScalarField {
        let mut values = vec![0.0; self.grid.len()];
        for (i, j, v) in self.iter() {
            values[self.grid.index(i, j)] = v;
        }
        ScalarField { grid: self.grid, values }
    }
}

/// Discrete jet at one interior node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JetPoint {
    pub i: usize,
    pub j: usize,
    pub x: [f64; 2],
    pub u: f64,
    pub z: [f64; 2],
    /// Symmetric by construction: `w[0][1] == w[1][0]`.
    pub w: [[f64; 2]; 2],
}

impl JetPoint {
    pub fn grad_norm(&self) -> f64 {
        self.z[0].hypot(self.z[1])
    }
}

/// Evaluation environment: a jet plus parameter values.
pub struct JetEnv<'a> {
    pub point: &'a JetPoint,
    pub params: &'a Binding,
}

impl Env for JetEnv<'_> {
    fn lookup(&self, v: &Var) -> Option<f64> {
        let p = self.point;
        match v {
            Var::X(k @ 1..=2) => Some(p.x[k - 1]),
            Var::U => Some(p.u),
            Var::Z(k @ 1..=2) => Some(p.z[k - 1]),
            Var::W(a @ 1..=2, b @ 1..=2) => Some(p.w[a - 1][b - 1]),
            Var::Param(_) => self.params.get(v),
            _ => None,
        }
    }
}

/// Jets on every node one ring inside the boundary.
#[derive(Clone, Debug)]
pub struct JetField {
    grid: Grid,
    points: Vec<JetPoint>,
}

impl JetField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn points(&self) -> &[JetPoint] {
        &self.points
    }

    pub fn get(&self, i: usize, j: usize) -> &JetPoint {
        let w = self.grid.n1 - 2;
        &self.points[(i - 1) + w * (j - 1)]
    }
}

/// Second-order central-difference jet of `u`.
pub fn jet(u: &ScalarField) -> JetField {
    let g = *u.grid();
    let (h1, h2) = (g.h1(), g.h2());
    let mut points = Vec::with_capacity((g.n1 - 2) * (g.n2 - 2));
    for j in 1..g.n2 - 1 {
        for i in 1..g.n1 - 1 {
            let c = u.get(i, j);
            let (e, wv) = (u.get(i + 1, j), u.get(i - 1, j));
            let (n, s) = (u.get(i, j + 1), u.get(i, j - 1));
            let cross = (u.get(i + 1, j + 1) - u.get(i + 1, j - 1) - u.get(i - 1, j + 1) + u.get(i - 1, j - 1))
                / (4.0 * h1 * h2);
            points.push(JetPoint {
                i,
                j,
                x: [g.x1(i), g.x2(j)],
                u: c,
                z: [(e - wv) / (2.0 * h1), (n - s) / (2.0 * h2)],
                w: [[(e - 2.0 * c + wv) / (h1 * h1), cross], [cross, (n - 2.0 * c + s) / (h2 * h2)]],
            });
        }
    }
    JetField { grid: g, points }
}

/// Evaluates an operator in `(x, u, z, w)` at every jet node.
pub fn eval_on_jet(op: &Expr, jets: &JetField, params: &Binding) -> Result<InteriorField> {
    let g = *jets.grid();
    let mut values = Vec::with_capacity(jets.points.len());
    for p in &jets.points {
        let env = JetEnv { point: p, params };
        values.push(evaluate(op, &env).map_err(|err| node_error(&g, p.i, p.j, err))?);
    }
    Ok(InteriorField { grid: g, margin: 1, values })
}

/// Evaluates an operator along `u`: `op(x, u(x), Du(x), D²u(x))` on the interior.
pub fn eval_operator(op: &Expr, u: &ScalarField, params: &Binding) -> Result<InteriorField> {
    eval_on_jet(op, &jet(u), params)
}

/// Discrete divergence `Σ_j δ_j T_ij` of a 2 × 2 tensor field given on the
/// jet interior, by central differences. Defined two rings inside.
pub fn divergence(tensor: &[[InteriorField; 2]; 2], row: usize) -> InteriorField {
    let g = *tensor[0][0].grid();
    let (h1, h2) = (g.h1(), g.h2());
    let (t1, t2) = (&tensor[row][0], &tensor[row][1]);
    InteriorField::from_fn(g, 2, |i, j| {
        (t1.get(i + 1, j) - t1.get(i - 1, j)) / (2.0 * h1) + (t2.get(i, j + 1) - t2.get(i, j - 1)) / (2.0 * h2)
    })
}

fn trapezoid_weight(k: usize, n: usize, h: f64) -> f64 {
    if k == 0 || k == n - 1 {
        0.5 * h
    } else {
        h
    }
}

/// Composite trapezoidal rule over the rectangle.
pub fn integrate(f: &ScalarField) -> f64 {
    let g = f.grid();
    let (h1, h2) = (g.h1(), g.h2());
    let mut total = 0.0;
    for j in 0..g.n2 {
        let mut row = 0.0;
        for i in 0..g.n1 {
            row += trapezoid_weight(i, g.n1, h1) * f.get(i, j);
        }
        total += trapezoid_weight(j, g.n2, h2) * row;
    }
    total
}

/// Trapezoidal rule for an interior field extended by zero.
pub fn integrate_interior(f: &InteriorField) -> f64 {
    integrate(&f.to_nodal())
}

/// `J(u) = ∫ L(x, u, Du) dx` with jets on the interior and zero extension.
pub fn functional_value(body: &Expr, u: &ScalarField, params: &Binding) -> Result<f64> {
    Ok(integrate_interior(&eval_operator(body, u, params)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlateauVerdict {
    pub eps: f64,
    pub radius_nodes: usize,
    /// Number of jet nodes with `|Du| <= eps`.
    pub flat_nodes: usize,
    pub has_interior_point: bool,
    /// Centre `(i, j, x1, x2)` of a fully flat disc, if one exists.
    pub witness: Option<(usize, usize, f64, f64)>,
}

/// Looks for a discrete disc of the given node radius inside
/// `{ |Du| <= eps }`, using jet gradients.
pub fn plateau_check(u: &ScalarField, eps: f64, radius_nodes: usize) -> PlateauVerdict {
    assert!(eps > 0.0 && radius_nodes >= 1, "plateau check needs eps > 0 and radius >= 1");
    let jets = jet(u);
    let g = *u.grid();
    let flat = InteriorField::from_fn(g, 1, |i, j| f64::from(u8::from(jets.get(i, j).grad_norm() <= eps)));
    let r = radius_nodes as i64;
    let offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|di| (-r..=r).map(move |dj| (di, dj)))
        .filter(|(di, dj)| di * di + dj * dj <= r * r)
        .collect();
    let margin = 1 + radius_nodes;
    let mut witness = None;
    if g.n1 > 2 * margin && g.n2 > 2 * margin {
        'search: for j in margin..g.n2 - margin {
            for i in margin..g.n1 - margin {
                let all = offsets.iter().all(|(di, dj)| {
                    flat.get((i as i64 + di) as usize, (j as i64 + dj) as usize) == 1.0
                });
                if all {
                    witness = Some((i, j, g.x1(i), g.x2(j)));
                    break 'search;
                }
            }
        }
    }
    PlateauVerdict {
        eps,
        radius_nodes,
        flat_nodes: flat.values().iter().filter(|v| **v == 1.0).count(),
        has_interior_point: witness.is_some(),
        witness,
    }
}
