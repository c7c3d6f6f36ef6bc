use serde::{Deserialize, Serialize};

use crate::bigcount::{BigCount, Budget};

/// A finitely described g : ℕ → ℕ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GFunction {
    Constant { value: u64 },
    /// g(n) = a·n + b
    Affine { a: u64, b: u64 },
    /// values[n] for n < len, `default` beyond.
    Table { values: Vec<u64>, default: u64 },
}

impl GFunction {
    pub fn identity() -> Self {
        GFunction::Affine { a: 1, b: 0 }
    }

    pub fn eval(&self, n: &BigCount, b: &Budget) -> BigCount {
        match self {
            GFunction::Constant { value } => BigCount::from_u64(*value),
            GFunction::Affine { a, b: c } => {
                if *a == 0 {
                    BigCount::from_u64(*c)
                } else {
                    n.mul_u64(*a, b).add_u64(*c, b)
                }
            }
            GFunction::Table { values, default } => match n.to_u64() {
                Some(k) if (k as usize) < values.len() => BigCount::from_u64(values[k as usize]),
                _ => BigCount::from_u64(*default),
            },
        }
    }

    /// g(n) in machine integers, saturating.
    pub fn eval_u64(&self, n: u64) -> u64 {
        match self {
            GFunction::Constant { value } => *value,
            GFunction::Affine { a, b } => a.saturating_mul(n).saturating_add(*b),
            GFunction::Table { values, default } => values.get(n as usize).copied().unwrap_or(*default),
        }
    }

    /// g̃^k(0) with g̃(n) = n + g(n), in closed form.
    pub fn tilde_iterate(&self, k: &BigCount, b: &Budget) -> BigCount {
        match self {
            GFunction::Constant { value } => k.mul_u64(*value, b),
            GFunction::Affine { a: 0, b: c } => k.mul_u64(*c, b),
            // g̃(n) = (1+a)n + c, so g̃^k(0) = c·((1+a)^k − 1)/a
            GFunction::Affine { a, b: c } => {
                let p = BigCount::pow_base(a + 1, k, b).saturating_sub(&BigCount::one());
                p.mul_u64(*c, b).div_ceil_u64(*a)
            }
            GFunction::Table { values, default } => {
                let mut n = 0u64;
                let mut left = k.clone();
                // inside the table n strictly increases or stops at a fixed point
                while !left.is_zero() && (n as usize) < values.len() {
                    let g = values[n as usize];
                    if g == 0 {
                        return BigCount::from_u64(n);
                    }
                    n += g;
                    left = left.saturating_sub(&BigCount::one());
                }
                BigCount::from_u64(n).add(&left.mul_u64(*default, b), b)
            }
        }
    }
}
