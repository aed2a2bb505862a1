//! Printing in the same grammar the parser accepts.

use std::fmt::{self, Write};

use super::{Expr, Number};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 3;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f, 0)
    }
}

/// A term that reads better with a leading minus: returns its negation.
fn negated(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Const(c) if c.is_negative() => Some(Expr::Const(c.neg())),
        Expr::Product(fs) => match fs.first() {
            Some(Expr::Const(c)) if c.is_negative() => {
                let c = c.neg();
                let mut rest = fs[1..].to_vec();
                if !c.is_one() {
                    rest.insert(0, Expr::Const(c));
                }
                Some(if rest.len() == 1 { rest.pop().unwrap() } else { Expr::Product(rest) })
            }
            _ => None,
        },
        _ => None,
    }
}

fn paren(f: &mut fmt::Formatter<'_>, open: bool, body: impl FnOnce(&mut fmt::Formatter<'_>) -> fmt::Result) -> fmt::Result {
    if open {
        f.write_char('(')?;
    }
    body(f)?;
    if open {
        f.write_char(')')?;
    }
    Ok(())
}

fn write_const(c: &Number, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
    let compound = match c {
        Number::Rational(r) => c.is_negative() || !r.is_integer(),
        Number::Float(x) => *x < 0.0,
    };
    let needs = compound && prec > PRODUCT || (c.is_negative() && prec >= PRODUCT);
    paren(f, needs, |f| write!(f, "{c}"))
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
    match e {
        Expr::Const(c) => write_const(c, f, prec),
        Expr::Var(v) => write!(f, "{v}"),
        Expr::Fn(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(a, f, 0)?;
            f.write_char(')')
        }
        Expr::Sum(ts) => paren(f, prec > SUM, |f| {
            for (k, t) in ts.iter().enumerate() {
                match (k, negated(t)) {
                    (0, _) => write_expr(t, f, SUM)?,
                    (_, Some(n)) => {
                        f.write_str(" - ")?;
                        write_expr(&n, f, PRODUCT)?;
                    }
                    (_, None) => {
                        f.write_str(" + ")?;
                        write_expr(t, f, SUM)?;
                    }
                }
            }
            Ok(())
        }),
        Expr::Product(fs) => {
            if let Some(n) = negated(e) {
                return paren(f, prec > SUM, |f| {
                    f.write_char('-')?;
                    write_expr(&n, f, PRODUCT)
                });
            }
            paren(f, prec > PRODUCT, |f| write_product(fs, f))
        }
        Expr::Pow(b, n) if *n < 0 => paren(f, prec > PRODUCT, |f| {
            f.write_str("1/")?;
            write_power(b, -n, f)
        }),
        Expr::Pow(b, n) => write_power(b, *n, f),
        Expr::Quotient(a, b) => paren(f, prec > PRODUCT, |f| {
            write_expr(a, f, PRODUCT)?;
            f.write_char('/')?;
            write_expr(b, f, POWER)
        }),
    }
}

fn write_power(b: &Expr, n: i64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let atomic = match b {
        Expr::Var(_) | Expr::Fn(..) => true,
        Expr::Const(Number::Rational(r)) => r.is_integer() && *r.numer() >= 0,
        Expr::Const(Number::Float(x)) => *x >= 0.0,
        _ => false,
    };
    paren(f, !atomic, |f| write_expr(b, f, 0))?;
    if n != 1 {
        write!(f, "^{n}")?;
    }
    Ok(())
}

/// `coef*a*b^2/c/d^3`. Called only when the leading coefficient is non-negative.
fn write_product(fs: &[Expr], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mut numer = Vec::new();
    let mut denom = Vec::new();
    for factor in fs {
        match factor {
            Expr::Pow(b, n) if *n < 0 => denom.push((b.as_ref(), -n)),
            other => numer.push(other),
        }
    }
    if numer.is_empty() {
        f.write_char('1')?;
    }
    for (k, factor) in numer.iter().enumerate() {
        if k > 0 {
            f.write_char('*')?;
        }
        write_expr(factor, f, if k == 0 { PRODUCT } else { POWER })?;
    }
    for (b, n) in denom {
        f.write_char('/')?;
        write_power(b, n, f)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, simplify};

    fn show(text: &str) -> String {
        simplify(&parse(text).unwrap()).to_string()
    }

    #[test]
    fn readable_output() {
        assert_eq!(show("z1*1 + 0"), "z1");
        assert_eq!(show("1/2*(z1^2 + z2^2)"), "1/2*z1^2 + 1/2*z2^2");
        assert_eq!(show("u - 3*z1"), "u - 3*z1");
        assert_eq!(show("-u"), "-u");
        assert_eq!(show("z1/(1 + u)^2"), "z1/(1 + u)^2");
        assert_eq!(show("sin(-u)"), "sin(-u)");
    }
}
