use super::{simplify, Expr, Func, Var};

/// Exact partial derivative of `e` with respect to `v`, simplified.
///
/// Hessian slots are symmetric, so `W(1, 2)` and `W(2, 1)` name the same
/// variable. The result is the literal `0` whenever `v` does not occur in `e`.
pub fn differentiate(e: &Expr, v: &Var) -> Expr {
    let v = match v {
        Var::W(i, j) => Var::w(*i, *j),
        other => other.clone(),
    };
    if !e.contains(&v) {
        return Expr::zero();
    }
    simplify(&raw(e, &v))
}

fn raw(e: &Expr, v: &Var) -> Expr {
    if !e.contains(v) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(x) => {
            if x == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| raw(t, v)).collect()),
        Expr::Product(fs) => Expr::Sum(
            fs.iter()
                .enumerate()
                .filter(|(_, f)| f.contains(v))
                .map(|(k, f)| {
                    let mut factors = fs.clone();
                    factors[k] = raw(f, v);
                    Expr::Product(factors)
                })
                .collect(),
        ),
        Expr::Pow(b, n) => Expr::Product(vec![Expr::int(*n), b.as_ref().clone().pow(n - 1), raw(b, v)]),
        Expr::Quotient(a, b) => {
            let num = Expr::Product(vec![raw(a, v), (**b).clone()])
                - Expr::Product(vec![(**a).clone(), raw(b, v)]);
            num / (**b).clone().pow(2)
        }
        Expr::Fn(f, a) => Expr::Product(vec![outer(*f, a), raw(a, v)]),
    }
}

fn outer(f: Func, a: &Expr) -> Expr {
    let a = a.clone();
    match f {
        Func::Sin => a.cos(),
        Func::Cos => -a.sin(),
        Func::Exp => a.exp(),
        Func::Log => a.pow(-1),
        Func::Sqrt => Expr::ratio(1, 2) * a.sqrt().pow(-1),
        Func::Tanh => Expr::one() - a.tanh().pow(2),
    }
}
