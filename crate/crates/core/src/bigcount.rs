//! Nonnegative integer counts for rate functionals: exact big integers while
//! they fit a digit budget, flagged magnitude estimates beyond it.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

pub const DEFAULT_DIGIT_BUDGET: u64 = 1_000_000;
/// Relative width of the band around integers inside which a ceiling is
/// snapped to the nearest integer and reported.
pub const GUARD_BAND: f64 = 1e-12;

const LIFT_EXP: f64 = 1000.0;
const LIFT: f64 = 1.0715086071862673e301; // 2^1000

/// Magnitude in level-index form: `top` after `height` exponentiations base 2.
///
/// Canonical form keeps `top ≤ 2^1000`, and `top ≥ 1000` whenever
/// `height > 0`, so the lexicographic order on (height, top) is the order of
/// the represented values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tower {
    height: u64,
    top: f64,
}

impl Tower {
    fn norm(mut height: u64, mut top: f64) -> Tower {
        if top.is_nan() || top < 0.0 {
            top = 0.0;
        }
        if top.is_infinite() {
            // only reachable through overflow of a caller-supplied real
            top = LIFT;
        }
        while top > LIFT {
            top = top.log2();
            height += 1;
        }
        while height > 0 && top < LIFT_EXP {
            top = top.exp2();
            height -= 1;
        }
        Tower { height, top }
    }

    /// The value 2^2^…^top with `height` exponentiations.
    pub fn from_parts(height: u64, top: f64) -> Tower {
        Tower::norm(height, top)
    }

    pub fn from_f64(v: f64) -> Tower {
        Tower::norm(0, v)
    }

    pub fn from_biguint(n: &BigUint) -> Tower {
        let bits = n.bits();
        if bits <= 1000 {
            return Tower::from_f64(n.to_f64().unwrap_or(f64::INFINITY));
        }
        let shift = bits - 64;
        let lead = (n >> shift).to_u64().unwrap_or(u64::MAX) as f64;
        Tower::norm(1, lead.log2() + shift as f64)
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn is_zero(&self) -> bool {
        self.height == 0 && self.top == 0.0
    }

    /// Value as a float, infinite when it does not fit.
    pub fn to_f64(&self) -> f64 {
        if self.height == 0 {
            self.top
        } else {
            f64::INFINITY
        }
    }

    /// log₂ of the value as a float when it fits.
    pub fn log2_f64(&self) -> Option<f64> {
        match self.height {
            0 => Some(self.top.max(1.0).log2()),
            1 => Some(self.top),
            2 if self.top < 1023.0 => Some(self.top.exp2()),
            _ => None,
        }
    }

    pub fn log2(&self) -> Tower {
        if self.height == 0 {
            Tower::from_f64(self.top.max(1.0).log2())
        } else {
            Tower::norm(self.height - 1, self.top)
        }
    }

    pub fn exp2(&self) -> Tower {
        Tower::norm(self.height + 1, self.top)
    }

    pub fn add(&self, o: &Tower) -> Tower {
        if self.height == 0 && o.height == 0 {
            return Tower::from_f64(self.top + o.top);
        }
        let (big, small) = if self >= o { (self, o) } else { (o, self) };
        if big.height == 1 {
            let lb = big.top;
            let ls = small.log2_f64().unwrap_or(lb);
            return Tower::norm(1, lb + (1.0 + (ls - lb).exp2()).log2());
        }
        *big
    }

    /// Difference, assuming `self ≥ o`; saturates at zero.
    pub fn sub(&self, o: &Tower) -> Tower {
        if self <= o {
            return Tower::from_f64(0.0);
        }
        if self.height == 0 {
            return Tower::from_f64(self.top - o.top);
        }
        if self.height == 1 {
            let la = self.top;
            let lb = o.log2_f64().unwrap_or(f64::NEG_INFINITY);
            let r = 1.0 - (lb - la).exp2();
            if r > 0.0 {
                return Tower::norm(1, la + r.log2());
            }
        }
        *self
    }

    pub fn mul(&self, o: &Tower) -> Tower {
        if self.is_zero() || o.is_zero() {
            return Tower::from_f64(0.0);
        }
        if self.height == 0 && o.height == 0 && self.top * o.top <= LIFT {
            return Tower::from_f64(self.top * o.top);
        }
        self.log2().add(&o.log2()).exp2()
    }
}

impl PartialOrd for Tower {
    fn partial_cmp(&self, o: &Tower) -> Option<Ordering> {
        Some(self.height.cmp(&o.height).then(self.top.total_cmp(&o.top)))
    }
}

impl fmt::Display for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.height {
            0 => write!(f, "{:e}", self.top),
            1 => write!(f, "2^({:e})", self.top),
            2 => write!(f, "2^(2^({:e}))", self.top),
            h => write!(f, "2^^{h}({:e})", self.top),
        }
    }
}

/// Limits on exact evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Budget {
    pub max_digits: u64,
    /// Track magnitudes only, never exact values.
    pub force_estimate: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_digits: DEFAULT_DIGIT_BUDGET, force_estimate: false }
    }
}

impl Budget {
    pub fn with_digits(max_digits: u64) -> Self {
        Budget { max_digits, force_estimate: false }
    }

    pub fn max_bits(&self) -> u64 {
        (self.max_digits as f64 * std::f64::consts::LOG2_10).ceil() as u64
    }
}

/// A ceiling whose argument landed inside the guard band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GuardHit {
    pub argument: f64,
    pub result: u64,
}

/// Evaluation context shared by a family of rate computations.
#[derive(Debug, Default)]
pub struct Ctx {
    pub budget: Budget,
    hits: RefCell<Vec<GuardHit>>,
}

impl Ctx {
    pub fn new(budget: Budget) -> Self {
        Ctx { budget, hits: RefCell::new(Vec::new()) }
    }

    pub fn guard_hits(&self) -> Vec<GuardHit> {
        self.hits.borrow().clone()
    }

    fn note(&self, argument: f64, result: u64) {
        let mut h = self.hits.borrow_mut();
        if h.len() < 64 {
            h.push(GuardHit { argument, result });
        }
    }

    /// ⌈x⌉ for a finite real, snapping to the nearest integer inside the guard band.
    pub fn ceil(&self, x: f64) -> i64 {
        let r = x.round();
        if x != r && (x - r).abs() <= GUARD_BAND * x.abs().max(1.0) {
            self.note(x, r.max(0.0) as u64);
            return r as i64;
        }
        x.ceil() as i64
    }

    /// max{⌈x⌉, 1}, as used for every logarithmic term.
    pub fn ceil_at_least_one(&self, x: f64) -> BigCount {
        BigCount::from_u64(self.ceil(x).max(1) as u64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BigCount {
    Exact(BigUint),
    Estimate(Tower),
}

fn split_f64(x: f64) -> (u64, i32) {
    // x = mantissa · 2^exp for finite x ≥ 0
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

impl BigCount {
    pub fn zero() -> Self {
        BigCount::Exact(BigUint::zero())
    }

    pub fn one() -> Self {
        BigCount::Exact(BigUint::one())
    }

    pub fn from_u64(n: u64) -> Self {
        BigCount::Exact(BigUint::from(n))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, BigCount::Exact(_))
    }

    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            BigCount::Exact(n) => Some(n),
            BigCount::Estimate(_) => None,
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.exact().and_then(|n| n.to_u64())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BigCount::Exact(n) => n.is_zero(),
            BigCount::Estimate(t) => t.is_zero(),
        }
    }

    pub fn tower(&self) -> Tower {
        match self {
            BigCount::Exact(n) => Tower::from_biguint(n),
            BigCount::Estimate(t) => *t,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            BigCount::Exact(n) => n.to_f64().unwrap_or(f64::INFINITY),
            BigCount::Estimate(t) => t.to_f64(),
        }
    }

    /// log₂ of the value as a float, when representable.
    pub fn log2_f64(&self) -> Option<f64> {
        self.tower().log2_f64()
    }

    /// Number of decimal digits of an exact value.
    pub fn decimal_digits(&self) -> Option<u64> {
        self.exact().map(|n| if n.is_zero() { 1 } else { n.to_string().len() as u64 })
    }

    /// Downgrades an exact value that exceeds the budget.
    pub fn fit(self, b: &Budget) -> Self {
        match self {
            BigCount::Exact(n) if b.force_estimate || n.bits() > b.max_bits() => BigCount::Estimate(Tower::from_biguint(&n)),
            other => other,
        }
    }

    pub fn add(&self, o: &BigCount, b: &Budget) -> BigCount {
        match (self, o) {
            (BigCount::Exact(x), BigCount::Exact(y)) => BigCount::Exact(x + y).fit(b),
            _ => BigCount::Estimate(self.tower().add(&o.tower())),
        }
    }

    pub fn add_u64(&self, k: u64, b: &Budget) -> BigCount {
        self.add(&BigCount::from_u64(k), b)
    }

    /// max(self − o, 0).
    pub fn saturating_sub(&self, o: &BigCount) -> BigCount {
        match (self, o) {
            (BigCount::Exact(x), BigCount::Exact(y)) => {
                if x > y {
                    BigCount::Exact(x - y)
                } else {
                    BigCount::zero()
                }
            }
            _ => BigCount::Estimate(self.tower().sub(&o.tower())),
        }
    }

    pub fn mul(&self, o: &BigCount, b: &Budget) -> BigCount {
        match (self, o) {
            (BigCount::Exact(x), BigCount::Exact(y)) => {
                if x.bits() + y.bits() > b.max_bits() + 1 {
                    BigCount::Estimate(self.tower().mul(&o.tower()))
                } else {
                    BigCount::Exact(x * y).fit(b)
                }
            }
            _ => BigCount::Estimate(self.tower().mul(&o.tower())),
        }
    }

    pub fn mul_u64(&self, k: u64, b: &Budget) -> BigCount {
        self.mul(&BigCount::from_u64(k), b)
    }

    /// ⌈self / d⌉ for d ≥ 1.
    pub fn div_ceil_u64(&self, d: u64) -> BigCount {
        assert!(d > 0, "division by zero");
        match self {
            BigCount::Exact(n) => BigCount::Exact(n.div_ceil(&BigUint::from(d))),
            BigCount::Estimate(t) => BigCount::Estimate(t.mul(&Tower::from_f64(1.0 / d as f64))),
        }
    }

    /// ⌈self · x⌉ for a finite real x ≥ 0, computed exactly from the binary
    /// value of x, with the guard band applied to moderate results.
    pub fn mul_f64_ceil(&self, x: f64, ctx: &Ctx) -> BigCount {
        assert!(x.is_finite() && x >= 0.0, "multiplier must be a finite nonnegative real");
        match self {
            BigCount::Exact(n) => {
                let (m, e) = split_f64(x);
                let p = n * BigUint::from(m);
                let v = if e >= 0 {
                    p << (e as u64)
                } else {
                    let sh = (-e) as u64;
                    let floor = &p >> sh;
                    let rem = &p - (&floor << sh);
                    if rem.is_zero() {
                        floor
                    } else {
                        let approx = p.to_f64().unwrap_or(f64::INFINITY) * (-(sh as f64)).exp2();
                        let frac = if sh <= 1000 { rem.to_f64().unwrap_or(0.0) / (sh as f64).exp2() } else { 0.5 };
                        let band = GUARD_BAND * approx.max(1.0);
                        if approx < 4.5e15 && frac <= band {
                            ctx.note(approx, floor.to_u64().unwrap_or(u64::MAX));
                            floor
                        } else {
                            if approx < 4.5e15 && 1.0 - frac <= band {
                                ctx.note(approx, floor.to_u64().unwrap_or(u64::MAX).saturating_add(1));
                            }
                            floor + 1u32
                        }
                    }
                };
                BigCount::Exact(v).fit(&ctx.budget)
            }
            BigCount::Estimate(t) => BigCount::Estimate(t.mul(&Tower::from_f64(x))),
        }
    }

    /// base^exp. Estimated when the result would exceed the budget.
    pub fn pow_base(base: u64, exp: &BigCount, b: &Budget) -> BigCount {
        assert!(base >= 2, "base must be at least 2");
        let lb = (base as f64).log2();
        if let Some(e) = exp.to_u64() {
            let bits = e as f64 * lb;
            if !b.force_estimate && bits <= b.max_bits() as f64 {
                return if base.is_power_of_two() {
                    BigCount::Exact(BigUint::one() << (e * base.trailing_zeros() as u64))
                } else {
                    BigCount::Exact(BigUint::from(base).pow(e as u32))
                };
            }
        }
        BigCount::Estimate(exp.tower().mul(&Tower::from_f64(lb)).exp2())
    }

    pub fn pow_u32(&self, p: u32, b: &Budget) -> BigCount {
        match self {
            BigCount::Exact(n) if (n.bits() as u128) * (p as u128) <= b.max_bits() as u128 + 1 => {
                BigCount::Exact(n.pow(p)).fit(b)
            }
            _ => {
                let t = self.tower();
                if t.is_zero() {
                    return BigCount::zero();
                }
                BigCount::Estimate(t.log2().mul(&Tower::from_f64(p as f64)).exp2())
            }
        }
    }

    /// max{⌈ln(a·self)⌉, 1} for a real a > 0 and self ≥ 1.
    pub fn ln_ceil_at_least_one(&self, a: f64, ctx: &Ctx) -> BigCount {
        match self {
            BigCount::Exact(n) if n.bits() <= 52 => {
                ctx.ceil_at_least_one((a * n.to_f64().unwrap_or(0.0)).ln())
            }
            BigCount::Exact(n) => {
                let l2 = Tower::from_biguint(n).log2().to_f64();
                ctx.ceil_at_least_one(l2 * std::f64::consts::LN_2 + a.ln())
            }
            BigCount::Estimate(t) => {
                let ln = t.log2().mul(&Tower::from_f64(std::f64::consts::LN_2));
                let v = ln.add(&Tower::from_f64(a.ln().max(0.0)));
                BigCount::Estimate(Tower::from_f64(1.0).add(&v).max_with(&Tower::from_f64(1.0)))
            }
        }
    }

    pub fn max(&self, o: &BigCount) -> BigCount {
        if self >= o {
            self.clone()
        } else {
            o.clone()
        }
    }

    /// Rendering used in reports: decimal digits for exact values.
    pub fn render(&self) -> String {
        match self {
            BigCount::Exact(n) => n.to_string(),
            BigCount::Estimate(t) => format!("~{t}"),
        }
    }

    /// Like `render`, but long exact values keep only their leading digits.
    pub fn render_short(&self) -> String {
        let s = self.render();
        if !self.is_exact() || s.len() <= 40 {
            return s;
        }
        format!("{}…({} digits)", &s[..12], s.len())
    }
}

impl Tower {
    fn max_with(self, o: &Tower) -> Tower {
        if self >= *o {
            self
        } else {
            *o
        }
    }
}

impl From<u64> for BigCount {
    fn from(n: u64) -> Self {
        BigCount::from_u64(n)
    }
}

impl PartialOrd for BigCount {
    fn partial_cmp(&self, o: &BigCount) -> Option<Ordering> {
        match (self, o) {
            (BigCount::Exact(x), BigCount::Exact(y)) => Some(x.cmp(y)),
            _ => self.tower().partial_cmp(&o.tower()),
        }
    }
}

impl fmt::Display for BigCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Serialize for BigCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BigCount::Exact(n) => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("value", &n.to_string())?;
                m.serialize_entry("estimate", &false)?;
                m.end()
            }
            BigCount::Estimate(t) => {
                let mut m = s.serialize_map(Some(5))?;
                m.serialize_entry("value", &format!("~{t}"))?;
                m.serialize_entry("estimate", &true)?;
                m.serialize_entry("log2", &t.log2_f64().map(|l| format!("{l:e}")))?;
                m.serialize_entry("tower_height", &t.height)?;
                m.serialize_entry("tower_top", &format!("{:e}", t.top))?;
                m.end()
            }
        }
    }
}
