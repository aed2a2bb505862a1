//! Banded LU factorisation with partial pivoting.

use crate::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals. Row `r` stores
/// columns `r - kl ..= r + kl + ku`; the extra `kl` columns absorb pivoting
/// fill-in.
#[derive(Clone, Debug)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + (c + self.kl - r)
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(c + self.kl >= r && c <= r + self.ku, "entry ({r}, {c}) outside band");
        let k = self.slot(r, c);
        self.data[k] += v;
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[self.slot(r, c)]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * 1e-3;
        let mut pivots = Vec::with_capacity(n);
        let mut lower = vec![0.0; n * kl];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            for r in k + 1..=last {
                if self.get(r, k).abs() > self.get(p, k).abs() {
                    p = r;
                }
            }
            let pivot = self.get(p, k);
            if !pivot.is_finite() || pivot.abs() <= tiny {
                return Err(Error::SingularJacobian { column: k });
            }
            let right = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=right {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            pivots.push(p);
            for r in k + 1..=last {
                let m = self.get(r, k) / pivot;
                lower[k * kl + (r - k - 1)] = m;
                if m != 0.0 {
                    for c in k + 1..=right {
                        let s = self.slot(r, c);
                        self.data[s] -= m * self.data[self.slot(k, c)];
                    }
                }
            }
        }
        Ok(BandLu { upper: self, lower, pivots })
    }
}

#[derive(Debug)]
pub(crate) struct BandLu {
    upper: BandMatrix,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let u = &self.upper;
        let (n, kl, ku) = (u.n, u.kl, u.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                x[r] -= self.lower[k * kl + (r - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let right = (k + kl + ku).min(n - 1);
            let mut s = x[k];
            for c in k + 1..=right {
                s -= u.get(k, c) * x[c];
            }
            x[k] = s / u.get(k, k);
        }
        x
    }
}

/// Solves `a x = b` with one step of iterative refinement and returns `x`
/// with the relative residual `|b - a x|∞ / |b|∞`.
pub(crate) fn solve_refined(a: &BandMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let lu = a.clone().factor()?;
    let mut x = lu.solve(b);
    let residual = |x: &[f64]| -> Vec<f64> { a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let r = residual(&x);
    let dx = lu.solve(&r);
    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rnorm = residual(&x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((x, if bnorm > 0.0 { rnorm / bnorm } else { rnorm }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_banded_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, kl, ku) = (40, 3, 2);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                a.add(r, c, rng.gen_range(-1.0..1.0));
            }
        }
        let x: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let b = a.matvec(&x);
        let (sol, rel) = solve_refined(&a, &b).unwrap();
        assert!(rel < 1e-12, "{rel}");
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-8);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        let (x, _) = solve_refined(&a, &[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        assert_eq!(a.factor().unwrap_err(), Error::SingularJacobian { column: 2 });
    }
}
