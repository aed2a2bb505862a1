//! Damped Newton solver for the Euler-Lagrange equation with Dirichlet data,
//! and the paired evaluation of Euler-Lagrange and Noether residuals.

use serde::Serialize;

use crate::banded::{solve_refined, BandMatrix};
use crate::expr::{differentiate, evaluate, Binding, Expr, Var};
use crate::fields::{divergence, eval_on_jet, jet, Grid, InteriorField, JetEnv, JetField, ScalarField};
use crate::lagrangian::{energy_momentum, euler_lagrange, Lagrangian};
use crate::{Error, Result};

/// Relative residual required of every linear solve.
pub const LINEAR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonParams {
    /// Target for the residual ∞-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// First trial step length, in `(0, 1]`.
    pub damping: f64,
    /// Backtracking gives up below this step length.
    pub min_step: f64,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50, damping: 1.0, min_step: 0.5f64.powi(20) }
    }
}

#[derive(Clone, Debug)]
pub struct DirichletProblem {
    lagrangian: Lagrangian,
    grid: Grid,
    boundary: Expr,
    initial: Option<ScalarField>,
    newton: NewtonParams,
}

impl DirichletProblem {
    pub fn new(lagrangian: Lagrangian, grid: Grid, boundary: Expr) -> Result<Self> {
        if lagrangian.dim() != 2 {
            return Err(Error::InvalidLagrangian(format!(
                "grid solves need dim = 2, got {}",
                lagrangian.dim()
            )));
        }
        if !euler_lagrange(&lagrangian).is_affine_in_hessian() {
            return Err(Error::InvalidLagrangian("Euler-Lagrange operator is not affine in D²u".into()));
        }
        let problem = Self { lagrangian, grid, boundary, initial: None, newton: NewtonParams::default() };
        problem.boundary_values()?;
        Ok(problem)
    }

    /// Starting field; its boundary values are replaced by `g`.
    pub fn with_initial(mut self, u0: ScalarField) -> Result<Self> {
        if u0.grid() != &self.grid {
            return Err(Error::InvalidInput("initial guess lives on a different grid".into()));
        }
        self.initial = Some(u0);
        Ok(self)
    }

    pub fn with_newton(mut self, newton: NewtonParams) -> Result<Self> {
        if !(newton.tol > 0.0) || !(newton.damping > 0.0 && newton.damping <= 1.0) || !(newton.min_step > 0.0) {
            return Err(Error::InvalidInput(format!("invalid Newton parameters {newton:?}")));
        }
        self.newton = newton;
        Ok(self)
    }

    pub fn lagrangian(&self) -> &Lagrangian {
        &self.lagrangian
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn newton(&self) -> &NewtonParams {
        &self.newton
    }

    /// `g` on every node; only boundary entries are meaningful.
    fn boundary_values(&self) -> Result<ScalarField> {
        let g = self.grid;
        let params = self.lagrangian.param_binding();
        let mut values = vec![0.0; g.len()];
        for (i, j) in g.nodes().filter(|&(i, j)| g.is_boundary(i, j)) {
            let mut b = params.clone();
            b.set(Var::X(1), g.x1(i));
            b.set(Var::X(2), g.x2(j));
            values[g.index(i, j)] = evaluate(&self.boundary, &b).map_err(|e| match e {
                Error::Domain(message) => Error::DomainAtNode { i, j, x1: g.x1(i), x2: g.x2(j), message },
                Error::UnboundVariable(v) => {
                    Error::InvalidInput(format!("boundary expression uses '{v}', only x1, x2 and parameters allowed"))
                }
                other => other,
            })?;
        }
        ScalarField::new(g, values)
    }
}

/// Transfinite (Coons) blend of the boundary values into the interior.
pub fn boundary_blend(g: &ScalarField) -> ScalarField {
    let grid = *g.grid();
    let (n1, n2) = (grid.n1 - 1, grid.n2 - 1);
    let mut out = g.clone();
    for j in 1..n2 {
        let t = (grid.x2(j) - grid.a2) / (grid.b2 - grid.a2);
        for i in 1..n1 {
            let s = (grid.x1(i) - grid.a1) / (grid.b1 - grid.a1);
            let edges = (1.0 - s) * g.get(0, j) + s * g.get(n1, j) + (1.0 - t) * g.get(i, 0) + t * g.get(i, n2);
            let corners = (1.0 - s) * (1.0 - t) * g.get(0, 0)
                + s * (1.0 - t) * g.get(n1, 0)
                + (1.0 - s) * t * g.get(0, n2)
                + s * t * g.get(n1, n2);
            out.values_mut()[grid.index(i, j)] = edges - corners;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Residual ∞-norm of the returned field, boundary rows included.
    pub residual: f64,
    /// Residual ∞-norm before each iteration and after the last.
    pub history: Vec<f64>,
    /// `r_{k+1} / r_k²` once `r_k < 1e-3`.
    pub tail_ratios: Vec<f64>,
    /// Largest relative residual among the linear solves.
    pub linear_residual: f64,
    #[serde(skip)]
    pub solution: ScalarField,
    #[serde(skip)]
    pub residuals: ResidualPair,
}

/// Symbolic Jacobian of the EL residual with respect to each jet slot.
struct Linearisation {
    residual: Expr,
    slots: Vec<(Var, Expr)>,
}

impl Linearisation {
    fn new(l: &Lagrangian) -> Self {
        let residual = euler_lagrange(l).residual;
        let slots = [Var::U, Var::Z(1), Var::Z(2), Var::w(1, 1), Var::w(1, 2), Var::w(2, 2)]
            .into_iter()
            .map(|v| {
                let d = differentiate(&residual, &v);
                (v, d)
            })
            .collect();
        Self { residual, slots }
    }
}

fn interior_index(grid: &Grid, i: usize, j: usize) -> Option<usize> {
    (!grid.is_boundary(i, j)).then(|| (i - 1) + (grid.n1 - 2) * (j - 1))
}

fn max_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn residual_norm(el: &InteriorField, u: &ScalarField, g: &ScalarField) -> f64 {
    let grid = u.grid();
    let boundary = grid
        .nodes()
        .filter(|&(i, j)| grid.is_boundary(i, j))
        .map(|(i, j)| u.get(i, j) - g.get(i, j));
    max_norm(boundary).max(el.max_abs())
}

fn assemble(lin: &Linearisation, jets: &JetField, params: &Binding) -> Result<BandMatrix> {
    let grid = *jets.grid();
    let m = grid.n1 - 2;
    let n = m * (grid.n2 - 2);
    let (h1, h2) = (grid.h1(), grid.h2());
    let mut a = BandMatrix::zeros(n, m + 1, m + 1);
    for p in jets.points() {
        let env = JetEnv { point: p, params };
        let mut d = [0.0; 6];
        for (k, (_, e)) in lin.slots.iter().enumerate() {
            d[k] = if e.is_zero() {
                0.0
            } else {
                evaluate(e, &env).map_err(|err| match err {
                    Error::Domain(message) => Error::DomainAtNode { i: p.i, j: p.j, x1: p.x[0], x2: p.x[1], message },
                    other => other,
                })?
            };
        }
        let [du, dz1, dz2, dw11, dw12, dw22] = d;
        let (i, j) = (p.i as i64, p.j as i64);
        let stencil = [
            (0, 0, du - 2.0 * dw11 / (h1 * h1) - 2.0 * dw22 / (h2 * h2)),
            (1, 0, dz1 / (2.0 * h1) + dw11 / (h1 * h1)),
            (-1, 0, -dz1 / (2.0 * h1) + dw11 / (h1 * h1)),
            (0, 1, dz2 / (2.0 * h2) + dw22 / (h2 * h2)),
            (0, -1, -dz2 / (2.0 * h2) + dw22 / (h2 * h2)),
            (1, 1, dw12 / (4.0 * h1 * h2)),
            (-1, -1, dw12 / (4.0 * h1 * h2)),
            (1, -1, -dw12 / (4.0 * h1 * h2)),
            (-1, 1, -dw12 / (4.0 * h1 * h2)),
        ];
        let row = interior_index(&grid, p.i, p.j).expect("jet nodes are interior");
        for (di, dj, v) in stencil {
            let (ni, nj) = ((i + di) as usize, (j + dj) as usize);
            if let Some(col) = interior_index(&grid, ni, nj) {
                a.add(row, col, v);
            }
        }
    }
    Ok(a)
}

/// Newton iteration on the discrete EL residual. Boundary rows are identity
/// rows, so starting from `u = g` on the boundary keeps them satisfied.
pub fn solve(problem: &DirichletProblem) -> Result<SolveReport> {
    let grid = problem.grid;
    let params = problem.lagrangian.param_binding();
    let newton = problem.newton;
    let g = problem.boundary_values()?;
    let mut u = match &problem.initial {
        Some(u0) => {
            let mut u = u0.clone();
            for (i, j) in grid.nodes().filter(|&(i, j)| grid.is_boundary(i, j)) {
                u.values_mut()[grid.index(i, j)] = g.get(i, j);
            }
            u
        }
        None => boundary_blend(&g),
    };
    let lin = Linearisation::new(&problem.lagrangian);

    let mut jets = jet(&u);
    let mut el = eval_on_jet(&lin.residual, &jets, &params)?;
    let mut r = residual_norm(&el, &u, &g);
    let mut history = vec![r];
    let mut tail_ratios = Vec::new();
    let mut linear_residual = 0.0f64;
    let mut iterations = 0;

    while r > newton.tol {
        if iterations == newton.max_iter {
            return Err(Error::NonConvergence { iterations, residual: r });
        }
        let a = assemble(&lin, &jets, &params)?;
        let rhs: Vec<f64> = el.values().iter().map(|v| -v).collect();
        let (delta, rel) = solve_refined(&a, &rhs)?;
        linear_residual = linear_residual.max(rel);

        let mut step = newton.damping;
        let accepted = loop {
            let mut trial = u.clone();
            for j in 1..grid.n2 - 1 {
                for i in 1..grid.n1 - 1 {
                    let k = interior_index(&grid, i, j).unwrap();
                    trial.values_mut()[grid.index(i, j)] += step * delta[k];
                }
            }
            let trial_jets = jet(&trial);
            if let Ok(trial_el) = eval_on_jet(&lin.residual, &trial_jets, &params) {
                let trial_r = residual_norm(&trial_el, &trial, &g);
                if trial_r < r {
                    break Some((trial, trial_jets, trial_el, trial_r));
                }
            }
            step *= 0.5;
            if step < newton.min_step {
                break None;
            }
        };
        let Some((next, next_jets, next_el, next_r)) = accepted else {
            return Err(Error::NonConvergence { iterations, residual: r });
        };
        if r < 1e-3 {
            tail_ratios.push(next_r / (r * r));
        }
        u = next;
        jets = next_jets;
        el = next_el;
        r = next_r;
        history.push(r);
        iterations += 1;
    }

    let residuals = residual_pair(&problem.lagrangian, &u)?;
    Ok(SolveReport {
        converged: true,
        iterations,
        residual: r,
        history,
        tail_ratios,
        linear_residual,
        solution: u,
        residuals,
    })
}

/// Euler-Lagrange and Noether residuals of a field.
///
/// `el` lives on the jet interior. The Noether components are
/// `Σ_j δ_j T_ij + L_{x_i}` with `T` evaluated at the jet nodes and `δ_j`
/// the central difference, so they and the identity defect
/// `noether_i + el·z_i` live one ring further in.
#[derive(Clone, Debug)]
pub struct ResidualPair {
    pub el: InteriorField,
    pub noether: Vec<InteriorField>,
    pub defect: Vec<InteriorField>,
}

impl ResidualPair {
    pub fn el_norm(&self) -> f64 {
        self.el.max_abs_within(2)
    }

    pub fn noether_norm(&self) -> f64 {
        max_norm(self.noether.iter().map(InteriorField::max_abs))
    }

    pub fn defect_norm(&self) -> f64 {
        max_norm(self.defect.iter().map(InteriorField::max_abs))
    }
}

pub fn residual_pair(l: &Lagrangian, u: &ScalarField) -> Result<ResidualPair> {
    if l.dim() != 2 {
        return Err(Error::InvalidLagrangian(format!("grid evaluation needs dim = 2, got {}", l.dim())));
    }
    let params = l.param_binding();
    let jets = jet(u);
    let el = eval_on_jet(&euler_lagrange(l).residual, &jets, &params)?;
    let t = energy_momentum(l);
    let tensor = [
        [eval_on_jet(t.get(1, 1), &jets, &params)?, eval_on_jet(t.get(1, 2), &jets, &params)?],
        [eval_on_jet(t.get(2, 1), &jets, &params)?, eval_on_jet(t.get(2, 2), &jets, &params)?],
    ];
    let mut noether = Vec::with_capacity(2);
    let mut defect = Vec::with_capacity(2);
    for i in 0..2 {
        let lx = eval_on_jet(&l.partial(&Var::X(i + 1)), &jets, &params)?.shrink(2);
        let n = divergence(&tensor, i).zip_with(&lx, |a, b| a + b);
        let d = InteriorField::from_fn(*u.grid(), 2, |a, b| n.get(a, b) + el.get(a, b) * jets.get(a, b).z[i]);
        noether.push(n);
        defect.push(d);
    }
    Ok(ResidualPair { el, noether, defect })
}

/// `max_i |N_i + EL z_i|` with the symbolic Noether operator evaluated
/// pointwise on the jet. The two sides cancel as expressions, so this is
/// rounding noise rather than a discretisation error.
pub fn pointwise_defect(l: &Lagrangian, u: &ScalarField) -> Result<f64> {
    let params = l.param_binding();
    let jets = jet(u);
    let el = eval_on_jet(&euler_lagrange(l).residual, &jets, &params)?;
    let mut worst = 0.0f64;
    for (i, c) in crate::lagrangian::noether(l).components.iter().enumerate() {
        let n = eval_on_jet(c, &jets, &params)?;
        for ((a, b, v), e) in n.iter().zip(el.values()) {
            worst = worst.max((v + e * jets.get(a, b).z[i]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::lagrangian::lagrangian;

    fn problem(l: &str, n: usize, g: &str) -> DirichletProblem {
        DirichletProblem::new(lagrangian(2, l).unwrap(), Grid::unit_square(n).unwrap(), parse(g).unwrap()).unwrap()
    }

    #[test]
    fn blend_reproduces_separable_boundary_data() {
        let grid = Grid::unit_square(9).unwrap();
        let g = ScalarField::from_fn(grid, |x, y| 1.0 + 2.0 * x - y + x * y);
        let b = boundary_blend(&g);
        assert!(b.max_abs_diff(&g) < 1e-14);
    }

    #[test]
    fn trivial_problem_needs_no_work() {
        let report = solve(&problem("1/2*(z1^2 + z2^2) + 1/2*u^2", 17, "0")).unwrap();
        assert!(report.iterations <= 1);
        assert!(report.solution.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_problem_converges_in_one_step() {
        let p = problem("1/2*(z1^2 + z2^2) + u", 17, "x1*x2");
        let report = solve(&p).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.residual <= p.newton().tol);
        assert!(report.linear_residual <= LINEAR_TOL);
    }

    #[test]
    fn nonlinear_problem_converges() {
        let report = solve(&problem("1/2*(1 + u^2)*(z1^2 + z2^2) + u^3 - u", 17, "sin(x1) + x2")).unwrap();
        assert!(report.converged && report.residual <= 1e-8);
        assert!(report.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn unbounded_boundary_expression_is_rejected() {
        let err = DirichletProblem::new(
            lagrangian(2, "1/2*z1^2").unwrap(),
            Grid::unit_square(9).unwrap(),
            parse("u + x1").unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err:?}");
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let p = problem("1/2*(z1^2 + z2^2) + exp(u)", 17, "3*x1")
            .with_newton(NewtonParams { max_iter: 0, ..NewtonParams::default() })
            .unwrap();
        assert!(matches!(solve(&p), Err(Error::NonConvergence { iterations: 0, .. })));
    }

    #[test]
    fn constant_field_residuals() {
        let l = lagrangian(2, "1/2*(z1^2 + z2^2) + u").unwrap();
        let u = ScalarField::constant(Grid::unit_square(9).unwrap(), 5.0);
        let pair = residual_pair(&l, &u).unwrap();
        assert!(pair.el.values().iter().all(|v| *v == 1.0));
        assert_eq!(pair.noether_norm(), 0.0);
    }
}
