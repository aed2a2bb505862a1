//! Recovering a Lagrangian from a prescribed energy-momentum tensor.
//!
//! The unknown Lagrangian is a linear combination `L = Σ_m c_m B_m(u, z)` of
//! basis expressions. The defining system `z_i L_{z_j} - δ_ij L = T_ij` is
//! then linear in the coefficients and is solved in the least-squares sense
//! over seeded random samples of `(u, z)`. Feasibility is judged on a fresh
//! set of samples. Uniqueness is only ever relative to the chosen basis.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::expr::{differentiate, evaluate, is_identically_zero, simplify, Binding, Expr, Var, ZeroTest, ZeroVerdict};
use crate::lagrangian::{energy_momentum, parse_constant, split_assignment, Lagrangian};
use crate::{Error, Result};

/// Sampling interval for `u` and every `z_i`.
pub const SAMPLE_RANGE: (f64, f64) = (-2.0, 2.0);

/// A prescribed `N × N` tensor in `u`, `z` and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorTarget {
    dim: usize,
    entries: Vec<Vec<Expr>>,
    params: BTreeMap<String, f64>,
}

impl TensorTarget {
    pub fn new(dim: usize, entries: Vec<Vec<Expr>>) -> Result<Self> {
        if dim == 0 || entries.len() != dim || entries.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidInput(format!("target must be a {dim} x {dim} array")));
        }
        for (i, row) in entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                for v in e.variables() {
                    let ok = match &v {
                        Var::U | Var::Param(_) => true,
                        Var::Z(k) => (1..=dim).contains(k),
                        _ => false,
                    };
                    if !ok {
                        return Err(Error::InvalidInput(format!(
                            "T{} {} mentions {v}; targets may only use u, z1..z{dim} and parameters",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        let entries = entries.into_iter().map(|row| row.iter().map(simplify).collect()).collect();
        Ok(Self { dim, entries, params: BTreeMap::new() })
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// `T_ij = z_i z_j - δ_ij ½(|z|² - α u²)`.
    pub fn alpha_family(dim: usize, alpha: f64) -> Self {
        let half = Expr::ratio(1, 2) * (Expr::grad_norm_sq(dim) - Expr::param("alpha") * Expr::u().pow(2));
        let entries = (1..=dim)
            .map(|i| {
                (1..=dim)
                    .map(|j| {
                        let zz = Expr::z(i) * Expr::z(j);
                        if i == j {
                            zz - half.clone()
                        } else {
                            zz
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(dim, entries).expect("well-formed").with_param("alpha", alpha)
    }

    /// The energy-momentum tensor of a position-independent Lagrangian.
    pub fn from_lagrangian(l: &Lagrangian) -> Result<Self> {
        let t = energy_momentum(l);
        let entries = t.rows().map(|r| r.to_vec()).collect();
        let mut target = Self::new(l.dim(), entries)?;
        target.params = l.params().clone();
        Ok(target)
    }

    /// Replaces entry `(i, j)` (1-based).
    pub fn with_entry(mut self, i: usize, j: usize, e: Expr) -> Result<Self> {
        self.entries[i - 1][j - 1] = e;
        let params = self.params.clone();
        let mut t = Self::new(self.dim, self.entries)?;
        t.params = params;
        Ok(t)
    }

    /// File format: `dim = N`, optional `param name = value` lines, then
    /// `T i j = expr` for every pair. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut params = BTreeMap::new();
        let mut cells: BTreeMap<(usize, usize), Expr> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let indent = raw.len() - raw.trim_start().len() + 1;
            let (key, value, col) = split_assignment(raw, line)?;
            let bad = |message: String| Error::Parse { line, column: indent, message };
            if key == "dim" {
                let n = value.trim().parse::<usize>().ok().filter(|n| *n >= 1);
                dim = Some(n.ok_or_else(|| Error::Parse {
                    line,
                    column: col,
                    message: format!("dimension must be a positive integer, found '{}'", value.trim()),
                })?);
            } else if let Some(name) = key.strip_prefix("param ") {
                params.insert(name.trim().to_string(), parse_constant(value, line, col)?);
            } else if let Some(rest) = key.strip_prefix("T ") {
                let n = dim.ok_or_else(|| bad("`dim = N` must precede the tensor entries".into()))?;
                let idx: Vec<usize> = rest.split_whitespace().filter_map(|s| s.parse().ok()).collect();
                let (i, j) = match idx.as_slice() {
                    [i, j] if (1..=n).contains(i) && (1..=n).contains(j) => (*i, *j),
                    _ => return Err(bad(format!("expected `T i j` with indices in 1..={n}, found '{key}'"))),
                };
                let e = crate::expr::parse::parse_at(value, line, col)?;
                if cells.insert((i, j), e).is_some() {
                    return Err(bad(format!("entry T {i} {j} given twice")));
                }
            } else {
                return Err(bad(format!("unknown key '{key}'")));
            }
        }
        let n = dim.ok_or_else(|| Error::InvalidInput("missing `dim = N` line".into()))?;
        let mut entries = Vec::with_capacity(n);
        for i in 1..=n {
            let mut row = Vec::with_capacity(n);
            for j in 1..=n {
                row.push(cells.remove(&(i, j)).ok_or_else(|| Error::InvalidInput(format!("missing entry T {i} {j}")))?);
            }
            entries.push(row);
        }
        let mut t = Self::new(n, entries)?;
        t.params = params;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)`, 1-based.
    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i - 1][j - 1]
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }
}

/// `L = Σ_m c_m B_m` with unknown coefficients `c_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianAnsatz {
    dim: usize,
    basis: Vec<Expr>,
}

impl LagrangianAnsatz {
    pub fn new(dim: usize, basis: Vec<Expr>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidInput("the basis is empty".into()));
        }
        for b in &basis {
            for v in b.variables() {
                let ok = match &v {
                    Var::U => true,
                    Var::Z(k) => (1..=dim).contains(k),
                    Var::Param(name) => !is_coefficient_name(name),
                    _ => false,
                };
                if !ok {
                    return Err(Error::InvalidInput(format!("basis element {b} mentions {v}")));
                }
            }
        }
        Ok(Self { dim, basis: basis.iter().map(simplify).collect() })
    }

    /// `{|z|², z1², z1 z2, u, u², u³, 1}` in two dimensions; in general
    /// `|z|²`, every `z_i z_j` with `i <= j` except `z_N²`, then `u, u², u³, 1`.
    pub fn default_basis(dim: usize) -> Self {
        let mut basis = vec![Expr::grad_norm_sq(dim)];
        for i in 1..=dim {
            for j in i..=dim {
                if !(i == dim && j == dim) {
                    basis.push(Expr::z(i) * Expr::z(j));
                }
            }
        }
        basis.extend([Expr::u(), Expr::u().pow(2), Expr::u().pow(3), Expr::one()]);
        Self::new(dim, basis).expect("default basis is well-formed")
    }

    /// Comma-separated basis expressions.
    pub fn parse_basis(dim: usize, text: &str) -> Result<Self> {
        let basis = text
            .split(',')
            .map(|s| crate::expr::parse(s.trim()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[Expr] {
        &self.basis
    }

    pub fn coefficient(m: usize) -> Var {
        Var::param(format!("coef{}", m + 1))
    }

    /// `Σ_m c_m B_m` with symbolic coefficients.
    pub fn body(&self) -> Expr {
        Expr::Sum(
            self.basis.iter().enumerate().map(|(m, b)| Expr::var(Self::coefficient(m)) * b.clone()).collect(),
        )
    }

    /// The Lagrangian for concrete coefficients.
    pub fn instantiate(&self, coefficients: &[f64]) -> Result<Lagrangian> {
        let body = Expr::Sum(
            self.basis.iter().zip(coefficients).map(|(b, c)| Expr::float(*c) * b.clone()).collect(),
        );
        Lagrangian::new(self.dim, simplify(&body))
    }
}

fn is_coefficient_name(name: &str) -> bool {
    name.strip_prefix("coef").is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// The residuals `z_i L_{z_j} - δ_ij L - T_ij`, linear in the coefficients.
#[derive(Clone, Debug)]
pub struct DefiningSystem {
    pub dim: usize,
    pub entries: Vec<Vec<Expr>>,
    pub coefficients: Vec<Var>,
}

fn defining_residual(body: &Expr, target: &TensorTarget, i: usize, j: usize) -> Expr {
    let mut e = Expr::z(i) * differentiate(body, &Var::Z(j)) - target.get(i, j).clone();
    if i == j {
        e = e - body.clone();
    }
    simplify(&e)
}

pub fn assemble_defining_residuals(ansatz: &LagrangianAnsatz, target: &TensorTarget) -> Result<DefiningSystem> {
    if ansatz.dim != target.dim {
        return Err(Error::InvalidInput(format!(
            "ansatz has dim {}, target has dim {}",
            ansatz.dim, target.dim
        )));
    }
    let body = ansatz.body();
    let coefficients: Vec<Var> = (0..ansatz.basis.len()).map(LagrangianAnsatz::coefficient).collect();
    let n = ansatz.dim;
    let entries: Vec<Vec<Expr>> =
        (1..=n).map(|i| (1..=n).map(|j| defining_residual(&body, target, i, j)).collect()).collect();
    for row in &entries {
        for e in row {
            for a in &coefficients {
                let d = differentiate(e, a);
                if coefficients.iter().any(|b| !differentiate(&d, b).is_zero()) {
                    return Err(Error::InvalidInput(format!("defining residual {e} is not linear in {a}")));
                }
            }
        }
    }
    Ok(DefiningSystem { dim: n, entries, coefficients })
}

#[derive(Clone, Debug, Serialize)]
pub struct Coefficient {
    pub basis: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub coefficients: Vec<Coefficient>,
    /// `sup |residual_ij|` over the validation samples, per entry.
    pub entry_residuals: Vec<Vec<f64>>,
    pub training_residual: f64,
    pub validation_residual: f64,
    pub feasible: bool,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    /// Ratio of extreme singular values of the stacked system.
    pub condition_number: f64,
    /// Condition number of the sampled basis Gram matrix.
    pub gram_condition: f64,
    pub uniqueness: String,
}

impl FitResult {
    pub fn coefficient(&self, basis: &str) -> Option<f64> {
        self.coefficients.iter().find(|c| c.basis == basis).map(|c| c.value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.value).collect()
    }
}

/// Linear model `r_ij(c) = a_ij · c - b_ij` evaluated at samples.
struct Sampler<'a> {
    columns: Vec<Vec<Vec<Expr>>>,
    offsets: &'a [Vec<Expr>],
    basis: &'a [Expr],
    params: Binding,
    dim: usize,
}

impl Sampler<'_> {
    fn binding(&self, rng: &mut ChaCha8Rng) -> Binding {
        let mut b = self.params.clone();
        b.set(Var::U, rng.gen_range(SAMPLE_RANGE.0..=SAMPLE_RANGE.1));
        for k in 1..=self.dim {
            b.set(Var::Z(k), rng.gen_range(SAMPLE_RANGE.0..=SAMPLE_RANGE.1));
        }
        b
    }

    /// Rows of the stacked system (one per entry), the right-hand sides and
    /// the basis values at one sample.
    fn rows(&self, b: &Binding) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        let mut rows = Vec::with_capacity(self.dim * self.dim);
        let mut rhs = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                rows.push(self.columns.iter().map(|col| evaluate(&col[i][j], b)).collect::<Result<Vec<_>>>()?);
                rhs.push(-evaluate(&self.offsets[i][j], b)?);
            }
        }
        let basis = self.basis.iter().map(|e| evaluate(e, b)).collect::<Result<Vec<_>>>()?;
        Ok((rows, rhs, basis))
    }
}

fn singular_range(m: &DMatrix<f64>) -> (f64, f64, usize) {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let thresh = max * f64::EPSILON * (m.nrows().max(m.ncols()) as f64);
    let rank = sv.iter().filter(|s| **s > thresh).count();
    (max, sv.min(), rank)
}

/// Least-squares fit of the ansatz to the target over `samples` seeded
/// training points, validated on `samples` fresh points.
pub fn fit(ansatz: &LagrangianAnsatz, target: &TensorTarget, samples: usize, tol: f64, seed: u64) -> Result<FitResult> {
    let m = ansatz.basis.len();
    if samples < 3 * m {
        return Err(Error::InvalidInput(format!("need at least {} samples for {m} coefficients", 3 * m)));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let system = assemble_defining_residuals(ansatz, target)?;
    let zero_coefs = |e: &Expr| simplify(&e.substitute_with(&|v| system.coefficients.contains(v).then(Expr::zero)));
    let offsets: Vec<Vec<Expr>> = system.entries.iter().map(|row| row.iter().map(zero_coefs).collect()).collect();
    let columns = system
        .coefficients
        .iter()
        .map(|c| system.entries.iter().map(|row| row.iter().map(|e| differentiate(e, c)).collect()).collect())
        .collect();
    let sampler = Sampler {
        columns,
        offsets: &offsets,
        basis: &ansatz.basis,
        params: Binding::from_params(&target.params),
        dim: ansatz.dim,
    };

    let n2 = ansatz.dim * ansatz.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(samples * n2, m);
    let mut b = DVector::zeros(samples * n2);
    let mut gram = DMatrix::zeros(samples, m);
    for k in 0..samples {
        let (rows, rhs, basis) = sampler.rows(&sampler.binding(&mut rng))?;
        for (r, (row, y)) in rows.iter().zip(&rhs).enumerate() {
            for (c, v) in row.iter().enumerate() {
                a[(k * n2 + r, c)] = *v;
            }
            b[k * n2 + r] = *y;
        }
        for (c, v) in basis.iter().enumerate() {
            gram[(k, c)] = *v;
        }
    }

    let (gmax, gmin, grank) = singular_range(&gram);
    if grank < m {
        return Err(Error::InvalidInput(format!(
            "basis elements are linearly dependent on the samples (rank {grank} of {m})"
        )));
    }
    let (smax, smin, rank) = singular_range(&a);
    if rank < m {
        return Err(Error::RankDeficient { null_dim: m - rank });
    }
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 0.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let training_residual = (&a * &coef - &b).amax();

    let mut entry_residuals = vec![vec![0.0f64; ansatz.dim]; ansatz.dim];
    for _ in 0..samples {
        let (rows, rhs, _) = sampler.rows(&sampler.binding(&mut rng))?;
        for (r, (row, y)) in rows.iter().zip(&rhs).enumerate() {
            let v: f64 = row.iter().zip(coef.iter()).map(|(a, c)| a * c).sum::<f64>() - y;
            let slot = &mut entry_residuals[r / ansatz.dim][r % ansatz.dim];
            *slot = slot.max(v.abs());
        }
    }
    let validation_residual = entry_residuals.iter().flatten().fold(0.0f64, |m, v| m.max(*v));

    Ok(FitResult {
        coefficients: ansatz
            .basis
            .iter()
            .zip(coef.iter())
            .map(|(e, v)| Coefficient { basis: e.to_string(), value: *v })
            .collect(),
        entry_residuals,
        training_residual,
        validation_residual,
        feasible: validation_residual <= tol,
        tol,
        samples,
        seed,
        condition_number: smax / smin,
        gram_condition: gmax / gmin,
        uniqueness: format!("unique within the {m}-element basis; other Lagrangians outside it are not excluded"),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EntryVerdict {
    pub i: usize,
    pub j: usize,
    pub expression: String,
    pub verdict: ZeroVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub holds: bool,
    pub entries: Vec<EntryVerdict>,
}

/// Substitutes `L` into the defining system and decides every entry.
pub fn verify_solution(l: &Lagrangian, target: &TensorTarget, test: &ZeroTest) -> Result<VerificationReport> {
    if l.dim() != target.dim {
        return Err(Error::InvalidInput(format!("Lagrangian has dim {}, target has dim {}", l.dim(), target.dim)));
    }
    let mut fixed = test.fixed.clone();
    fixed.extend(&l.param_binding());
    fixed.extend(&Binding::from_params(&target.params));
    let test = test.clone().with_fixed(fixed);
    let mut entries = Vec::new();
    for i in 1..=l.dim() {
        for j in 1..=l.dim() {
            let e = defining_residual(l.body(), target, i, j);
            let verdict = is_identically_zero(&e, &test)?;
            entries.push(EntryVerdict { i, j, expression: e.to_string(), verdict });
        }
    }
    Ok(VerificationReport { holds: entries.iter().all(|e| e.verdict.is_zero), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, DEFAULT_SEED};
    use crate::lagrangian::lagrangian;

    #[test]
    fn alpha_target_residuals_vanish_at_known_coefficients() {
        let ansatz = LagrangianAnsatz::default_basis(2);
        let sys = assemble_defining_residuals(&ansatz, &TensorTarget::alpha_family(2, 1.0)).unwrap();
        let mut values = vec![0.0; 7];
        values[0] = 0.5;
        values[4] = -0.5;
        let coefs = |v: &Var| {
            sys.coefficients.iter().position(|c| c == v).map(|k| Expr::float(values[k]))
        };
        for row in &sys.entries {
            for e in row {
                let s = simplify(&e.substitute_with(&coefs).substitute(&Var::param("alpha"), &Expr::one()));
                assert!(s.is_zero(), "{s}");
            }
        }
    }

    #[test]
    fn off_diagonal_entry_has_no_lagrangian_term() {
        let ansatz = LagrangianAnsatz::new(2, vec![parse("u^2").unwrap(), parse("z1*z2").unwrap()]).unwrap();
        let t = TensorTarget::alpha_family(2, 1.0);
        let sys = assemble_defining_residuals(&ansatz, &t).unwrap();
        let expected = simplify(&parse("z1*coef2*z1 - z1*z2").unwrap());
        assert_eq!(sys.entries[0][1], expected);
    }

    #[test]
    fn potential_target_with_single_basis_element() {
        let t = TensorTarget::from_lagrangian(&lagrangian(2, "u^2").unwrap()).unwrap();
        let ansatz = LagrangianAnsatz::new(2, vec![parse("u^2").unwrap()]).unwrap();
        let r = fit(&ansatz, &t, 30, 1e-8, DEFAULT_SEED).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-12);
        assert!(r.feasible);
    }

    #[test]
    fn duplicated_basis_is_rejected() {
        let ansatz = LagrangianAnsatz::new(2, vec![parse("u^2").unwrap(), parse("2*u^2").unwrap()]).unwrap();
        let t = TensorTarget::alpha_family(2, 1.0);
        assert!(matches!(fit(&ansatz, &t, 30, 1e-8, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn invisible_basis_element_is_rank_deficient() {
        // in one dimension z1 L_{z1} - L annihilates L = z1
        let ansatz = LagrangianAnsatz::new(1, vec![parse("u").unwrap(), parse("z1").unwrap()]).unwrap();
        let t = TensorTarget::new(1, vec![vec![parse("-u").unwrap()]]).unwrap();
        assert_eq!(fit(&ansatz, &t, 30, 1e-8, 1).unwrap_err(), Error::RankDeficient { null_dim: 1 });
    }

    #[test]
    fn target_file_round_trip() {
        let text = "# alpha family\ndim = 2\nparam alpha = 1\nT 1 1 = 1/2*(z1^2 - z2^2) + alpha/2*u^2\nT 1 2 = z1*z2\nT 2 1 = z1*z2\nT 2 2 = 1/2*(z2^2 - z1^2) + alpha/2*u^2\n";
        let t = TensorTarget::parse(text).unwrap();
        let reference = TensorTarget::alpha_family(2, 1.0);
        for i in 1..=2 {
            for j in 1..=2 {
                assert_eq!(t.get(i, j), reference.get(i, j));
            }
        }
        assert_eq!(t.params().get("alpha"), Some(&1.0));
        assert!(TensorTarget::parse("dim = 2\nT 1 1 = u\n").is_err());
        assert!(matches!(TensorTarget::parse("dim = 1\nT 1 1 = x1\n"), Err(Error::InvalidInput(_))));
        assert!(matches!(TensorTarget::parse("dim = 1\nT 1 1 = u +\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn verification_examples() {
        let t = TensorTarget::alpha_family(2, 1.0);
        let good = lagrangian(2, "1/2*(z1^2 + z2^2) - 1/2*u^2").unwrap();
        assert!(verify_solution(&good, &t, &ZeroTest::default()).unwrap().holds);
        let bad = lagrangian(2, "1/2*(z1^2 + z2^2) + 1/2*u^2").unwrap();
        let r = verify_solution(&bad, &t, &ZeroTest::default()).unwrap();
        let diag: Vec<bool> = r.entries.iter().filter(|e| e.i == e.j).map(|e| e.verdict.is_zero).collect();
        assert_eq!(diag, vec![false, false]);
        let lin = lagrangian(2, "u").unwrap();
        let t = TensorTarget::new(2, vec![vec![parse("-u").unwrap(), Expr::zero()], vec![Expr::zero(), parse("-u").unwrap()]]).unwrap();
        assert!(verify_solution(&lin, &t, &ZeroTest::default()).unwrap().holds);
    }
}
