use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{evaluate, simplify, Binding, Expr};
use crate::Error;

/// Seed used by every randomized probe unless overridden.
pub const DEFAULT_SEED: u64 = 0x4e6f_6574_6865_7221;

/// Parameters of the zero test: structural simplification first, then
/// seeded random probing.
#[derive(Clone, Debug)]
pub struct ZeroTest {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    /// Free variables are drawn uniformly from this interval.
    pub range: (f64, f64),
    /// Total number of redraws tolerated after domain errors.
    pub max_redraws: usize,
    /// Variables held at fixed values instead of being sampled.
    pub fixed: Binding,
}

impl Default for ZeroTest {
    fn default() -> Self {
        Self {
            samples: 100,
            tol: 1e-10,
            seed: DEFAULT_SEED,
            range: (-2.0, 2.0),
            max_redraws: 1000,
            fixed: Binding::new(),
        }
    }
}

impl ZeroTest {
    pub fn with_fixed(mut self, fixed: Binding) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPath {
    Structural,
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroVerdict {
    pub is_zero: bool,
    pub path: DecisionPath,
    /// Bindings evaluated on the numeric path.
    pub samples_evaluated: usize,
    /// Largest magnitude seen on the numeric path.
    pub max_abs: f64,
}

/// Decides whether `e` vanishes identically.
///
/// Returns a structural verdict when simplification reduces `e` to a
/// constant; otherwise evaluates at `samples` seeded random bindings and
/// declares zero iff every value is within `tol`.
pub fn is_identically_zero(e: &Expr, test: &ZeroTest) -> Result<ZeroVerdict, Error> {
    assert!(test.samples >= 1 && test.tol > 0.0, "zero test needs samples >= 1 and tol > 0");
    let simplified = simplify(e);
    if let Some(c) = simplified.as_const() {
        return Ok(ZeroVerdict {
            is_zero: c.is_zero(),
            path: DecisionPath::Structural,
            samples_evaluated: 0,
            max_abs: c.to_f64().abs(),
        });
    }

    let free: Vec<_> = simplified
        .variables()
        .into_iter()
        .filter(|v| !test.fixed.contains(v))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(test.seed);
    let mut redraws = 0;
    let mut evaluated = 0;
    let mut max_abs: f64 = 0.0;
    while evaluated < test.samples {
        let mut binding = test.fixed.clone();
        for v in &free {
            binding.set(v.clone(), rng.gen_range(test.range.0..=test.range.1));
        }
        match evaluate(&simplified, &binding) {
            Ok(value) => {
                evaluated += 1;
                max_abs = max_abs.max(value.abs());
                if value.abs() > test.tol {
                    return Ok(ZeroVerdict {
                        is_zero: false,
                        path: DecisionPath::Numeric,
                        samples_evaluated: evaluated,
                        max_abs,
                    });
                }
            }
            Err(Error::Domain(_)) => {
                redraws += 1;
                if redraws > test.max_redraws {
                    return Err(Error::UnableToDecide {
                        expr: simplified.to_string(),
                        redraws,
                    });
                }
            }
            Err(other) => return Err(other),
        }
    }
    Ok(ZeroVerdict {
        is_zero: true,
        path: DecisionPath::Numeric,
        samples_evaluated: evaluated,
        max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Var};

    fn zero(text: &str) -> ZeroVerdict {
        is_identically_zero(&parse(text).unwrap(), &ZeroTest::default()).unwrap()
    }

    #[test]
    fn structural_path() {
        let v = zero("u - u");
        assert!(v.is_zero);
        assert_eq!(v.path, DecisionPath::Structural);
    }

    #[test]
    fn numeric_rejects_nonzero() {
        let v = zero("z1*z2");
        assert!(!v.is_zero);
        assert_eq!(v.path, DecisionPath::Numeric);
    }

    #[test]
    fn numeric_accepts_trig_identity() {
        let v = zero("sin(u)^2 + cos(u)^2 - 1");
        assert!(v.is_zero);
        assert_eq!(v.path, DecisionPath::Numeric);
        assert_eq!(v.samples_evaluated, 100);
    }

    #[test]
    fn fixed_parameters_are_respected() {
        let e = parse("a - 1").unwrap();
        let t = ZeroTest::default().with_fixed(Binding::new().with(Var::param("a"), 1.0));
        assert!(is_identically_zero(&e, &t).unwrap().is_zero);
    }

    #[test]
    fn everywhere_singular_is_undecidable() {
        let err = is_identically_zero(&parse("log(-1 - u^2) - u").unwrap(), &ZeroTest::default())
            .unwrap_err();
        assert!(matches!(err, Error::UnableToDecide { .. }));
    }
}
