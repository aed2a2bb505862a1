use std::collections::BTreeMap;

use super::{Expr, Func, Number};

/// Products of sums are only distributed when the expansion stays below
/// this many terms.
const EXPAND_LIMIT: usize = 4096;

/// Canonical simplification.
///
/// Flattens nested sums and products, folds constants exactly where
/// possible, drops zero terms and unit factors, merges powers of equal
/// bases, collects identical monomials and distributes products over sums.
/// Quotients are rewritten as products with negative powers. The result
/// agrees with the input wherever both are defined.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Sum(ts) => sum(ts.iter().map(simplify).collect()),
        Expr::Product(fs) => product(fs.iter().map(simplify).collect()),
        Expr::Pow(b, n) if *n < 0 => reciprocal_power(b, *n),
        Expr::Pow(b, n) => power(simplify(b), *n),
        Expr::Quotient(a, b) => product(vec![simplify(a), reciprocal_power(b, -1)]),
        Expr::Fn(f, a) => function(*f, simplify(a)),
    }
}

/// `base^n` for `n < 0`, pushing the exponent inside before the base is
/// simplified so that denominators are not expanded into polynomials.
fn reciprocal_power(base: &Expr, n: i64) -> Expr {
    match base {
        Expr::Pow(inner, m) => match m.checked_mul(n) {
            Some(k) if k < 0 => reciprocal_power(inner, k),
            Some(k) => power(simplify(inner), k),
            None => power(simplify(base), n),
        },
        Expr::Product(fs) => product(fs.iter().map(|f| reciprocal_power(f, n)).collect()),
        Expr::Quotient(a, b) => product(vec![reciprocal_power(a, n), power(simplify(b), -n)]),
        _ => power(simplify(base), n),
    }
}

/// Splits a canonical term into its numeric coefficient and the rest.
pub(crate) fn split_coefficient(e: Expr) -> (Number, Expr) {
    match e {
        Expr::Const(c) => (c, Expr::one()),
        Expr::Product(mut fs) if matches!(fs.first(), Some(Expr::Const(_))) => {
            let c = match fs.remove(0) {
                Expr::Const(c) => c,
                _ => unreachable!(),
            };
            let rest = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Product(fs) };
            (c, rest)
        }
        other => (Number::ONE, other),
    }
}

fn scale(key: Expr, c: Number) -> Expr {
    if c.is_one() {
        return key;
    }
    match key {
        Expr::Product(mut fs) => {
            fs.insert(0, Expr::Const(c));
            Expr::Product(fs)
        }
        other => Expr::Product(vec![Expr::Const(c), other]),
    }
}

fn sum(terms: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(terms.len());
    for t in terms {
        match t {
            Expr::Sum(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }

    let mut constant = Number::ZERO;
    let mut collected: BTreeMap<Expr, Number> = BTreeMap::new();
    for t in flat {
        if let Expr::Const(c) = t {
            constant = constant.add(c);
            continue;
        }
        let (c, key) = split_coefficient(t);
        let slot = collected.entry(key).or_insert(Number::ZERO);
        *slot = slot.add(c);
    }

    let mut out = Vec::with_capacity(collected.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::Const(constant));
    }
    out.extend(
        collected
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(key, c)| scale(key, c)),
    );
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Sum(out),
    }
}

fn product(factors: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(factors.len());
    for f in factors {
        match f {
            Expr::Product(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }

    let mut coef = Number::ONE;
    let mut powers: BTreeMap<Expr, i64> = BTreeMap::new();
    for f in flat {
        match f {
            Expr::Const(c) => {
                if c.is_zero() {
                    return Expr::zero();
                }
                coef = coef.mul(c);
            }
            Expr::Pow(b, n) => *powers.entry(*b).or_insert(0) += n,
            other => *powers.entry(other).or_insert(0) += 1,
        }
    }
    if coef.is_zero() {
        return Expr::zero();
    }

    let mut rest = Vec::new();
    let mut sums = Vec::new();
    let mut reprocess = false;
    for (base, n) in powers {
        match (base, n) {
            (_, 0) => {}
            (Expr::Sum(ts), n) if n > 0 => sums.extend(std::iter::repeat_n(ts, n as usize)),
            (base, 1) => rest.push(base),
            (base, n) => {
                let p = power(base, n);
                match p {
                    Expr::Pow(..) | Expr::Fn(..) | Expr::Var(_) => {}
                    _ => reprocess = true,
                }
                rest.push(p);
            }
        }
    }

    if reprocess {
        rest.push(Expr::Const(coef));
        rest.extend(sums.into_iter().map(Expr::Sum));
        return product(rest);
    }

    if !sums.is_empty() {
        let count = sums.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len()));
        if matches!(count, Some(c) if c <= EXPAND_LIMIT) {
            let mut terms: Vec<Vec<Expr>> = vec![{
                let mut base = rest;
                base.push(Expr::Const(coef));
                base
            }];
            for s in &sums {
                let mut next = Vec::with_capacity(terms.len() * s.len());
                for t in &terms {
                    for part in s {
                        let mut fs = t.clone();
                        fs.push(part.clone());
                        next.push(fs);
                    }
                }
                terms = next;
            }
            return sum(terms.into_iter().map(product).collect());
        }
        // too large to distribute: keep the powers of sums as factors
        let mut grouped: BTreeMap<Vec<Expr>, i64> = BTreeMap::new();
        for s in sums {
            *grouped.entry(s).or_insert(0) += 1;
        }
        for (s, n) in grouped {
            rest.push(if n == 1 { Expr::Sum(s) } else { Expr::Pow(Box::new(Expr::Sum(s)), n) });
        }
    }

    rest.sort();
    if !coef.is_one() {
        rest.insert(0, Expr::Const(coef));
    }
    match rest.len() {
        0 => Expr::Const(coef),
        1 => rest.pop().unwrap(),
        _ => Expr::Product(rest),
    }
}

fn power(base: Expr, n: i64) -> Expr {
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return base;
    }
    match base {
        Expr::Const(c) => match c.powi(n) {
            Some(v) => Expr::Const(v),
            None => Expr::Pow(Box::new(Expr::Const(c)), n),
        },
        Expr::Pow(inner, m) => match m.checked_mul(n) {
            Some(k) => power(*inner, k),
            None => Expr::Pow(Box::new(Expr::Pow(inner, m)), n),
        },
        Expr::Product(fs) => product(fs.into_iter().map(|f| power(f, n)).collect()),
        Expr::Fn(Func::Sqrt, a) if n % 2 == 0 => power(*a, n / 2),
        Expr::Fn(Func::Exp, a) => function(Func::Exp, product(vec![Expr::int(n), *a])),
        Expr::Sum(ts) if n > 0 => product(vec![Expr::Sum(ts); n as usize]),
        other => Expr::Pow(Box::new(other), n),
    }
}

fn function(f: Func, a: Expr) -> Expr {
    if let Expr::Const(c) = a {
        if let Some(v) = fold_constant(f, c) {
            return Expr::Const(v);
        }
        return Expr::Fn(f, Box::new(a));
    }
    match (f, a) {
        (Func::Log, Expr::Fn(Func::Exp, inner)) => *inner,
        (Func::Exp, Expr::Fn(Func::Log, inner)) => *inner,
        (Func::Exp, Expr::Product(fs)) => match fs.as_slice() {
            [Expr::Const(c), Expr::Fn(Func::Log, inner)] if c.as_integer().is_some() => {
                power((**inner).clone(), c.as_integer().unwrap())
            }
            _ => Expr::Fn(Func::Exp, Box::new(Expr::Product(fs))),
        },
        (f, a) => Expr::Fn(f, Box::new(a)),
    }
}

fn fold_constant(f: Func, c: Number) -> Option<Number> {
    if c.is_exact() {
        return match f {
            Func::Sin | Func::Tanh if c.is_zero() => Some(Number::ZERO),
            Func::Cos | Func::Exp if c.is_zero() => Some(Number::ONE),
            Func::Log if c.is_one() => Some(Number::ZERO),
            Func::Sqrt => c.exact_sqrt(),
            _ => None,
        };
    }
    let x = c.to_f64();
    let v = match f {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Exp => x.exp(),
        Func::Log if x > 0.0 => x.ln(),
        Func::Sqrt if x >= 0.0 => x.sqrt(),
        Func::Tanh => x.tanh(),
        _ => return None,
    };
    v.is_finite().then_some(Number::Float(v))
}
