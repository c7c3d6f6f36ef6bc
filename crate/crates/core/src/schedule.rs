//! Step sizes (λ_n) with their moduli α, γ, θ, and finite-prefix checks of
//! the three conditions they certify.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::bigcount::{BigCount, Budget, Ctx};
use crate::error::{Error, Result};
use crate::model_space::Curvature;

/// λ_n for n ≥ 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lambda {
    /// 1/(n+1)
    Harmonic,
    /// scale·(n+1)^(−exponent)
    Power { scale: f64, exponent: f64 },
    Constant { value: f64 },
}

impl Lambda {
    pub fn at(&self, n: u64) -> f64 {
        match self {
            Lambda::Harmonic => 1.0 / (n as f64 + 1.0),
            Lambda::Power { scale, exponent } => scale * (n as f64 + 1.0).powf(-exponent),
            Lambda::Constant { value } => *value,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Lambda::Harmonic => true,
            Lambda::Power { scale, exponent } => *scale > 0.0 && *scale <= 2f64.powf(*exponent) && *exponent > 0.0,
            Lambda::Constant { value } => (0.0..=1.0).contains(value),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("step sizes {self:?} leave [0,1]")))
        }
    }
}

/// A real ε > 0 given through its reciprocal 1/ε = factor·count, so that
/// arguments far below the float range stay representable.
#[derive(Clone, Debug, PartialEq)]
pub struct InvEps {
    pub factor: f64,
    pub count: BigCount,
}

impl InvEps {
    pub fn real(eps: f64) -> Self {
        InvEps { factor: 1.0 / eps, count: BigCount::one() }
    }
}

/// ε ↦ positive integer, nonincreasing in ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsModulus {
    /// max{⌈scale·ε^(−power)⌉, 1}
    Reciprocal { scale: f64, power: u32 },
    Constant { value: u64 },
}

impl EpsModulus {
    pub fn eval(&self, eps: f64, ctx: &Ctx) -> BigCount {
        self.eval_inv(&InvEps::real(eps), ctx)
    }

    pub fn eval_inv(&self, inv: &InvEps, ctx: &Ctx) -> BigCount {
        match self {
            EpsModulus::Reciprocal { scale, power } => {
                let k = scale * inv.factor.powi(*power as i32);
                let v = inv.count.pow_u32(*power, &ctx.budget).mul_f64_ceil(k, ctx);
                v.max(&BigCount::one())
            }
            EpsModulus::Constant { value } => BigCount::from_u64(*value),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EpsModulus::Reciprocal { scale, power } if *scale > 0.0 && scale.is_finite() && *power >= 1 => Ok(()),
            EpsModulus::Constant { value } if *value >= 1 => Ok(()),
            other => Err(Error::Config(format!("invalid ε-modulus {other:?}"))),
        }
    }
}

/// n ↦ positive integer: a rate of divergence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceRate {
    /// base^(n + shift)
    Exponential { base: u64, shift: u64 },
    /// ⌈coef·(n + shift)^power / divisor⌉
    Polynomial { coef: u64, shift: u64, power: u32, divisor: u64 },
    /// values[n−1] for 1 ≤ n ≤ len, then `tail`.
    Table { values: Vec<u64>, tail: Box<DivergenceRate> },
}

impl DivergenceRate {
    pub fn identity() -> Self {
        DivergenceRate::Polynomial { coef: 1, shift: 0, power: 1, divisor: 1 }
    }

    pub fn eval(&self, n: &BigCount, b: &Budget) -> BigCount {
        match self {
            DivergenceRate::Exponential { base, shift } => BigCount::pow_base(*base, &n.add_u64(*shift, b), b),
            DivergenceRate::Polynomial { coef, shift, power, divisor } => {
                n.add_u64(*shift, b).pow_u32(*power, b).mul_u64(*coef, b).div_ceil_u64(*divisor)
            }
            DivergenceRate::Table { values, tail } => match n.to_u64() {
                Some(k) if (k as usize) <= values.len() => BigCount::from_u64(values[(k.max(1) - 1) as usize]),
                _ => tail.eval(n, b),
            },
        }
    }

    pub fn eval_u64(&self, n: u64, b: &Budget) -> BigCount {
        self.eval(&BigCount::from_u64(n), b)
    }

    /// θ⁺(n) = max_{1≤i≤n} θ(i).
    pub fn sup_prefix(&self, n: &BigCount, b: &Budget) -> BigCount {
        match self {
            DivergenceRate::Table { values, tail } => {
                let len = values.len() as u64;
                let upto = n.to_u64().map_or(len, |k| k.min(len)) as usize;
                let head = values[..upto.max(1).min(values.len())].iter().copied().max().unwrap_or(0);
                let head = BigCount::from_u64(head);
                if n.to_u64().is_some_and(|k| k <= len) {
                    head
                } else {
                    head.max(&tail.eval(n, b))
                }
            }
            // closed forms are nondecreasing in n
            _ => self.eval(n, b),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DivergenceRate::Exponential { base, .. } if *base >= 2 => Ok(()),
            DivergenceRate::Polynomial { coef, power, divisor, .. } if *coef >= 1 && *power >= 1 && *divisor >= 1 => Ok(()),
            DivergenceRate::Table { values, tail } if !values.is_empty() && !matches!(**tail, DivergenceRate::Table { .. }) => {
                tail.validate()
            }
            other => Err(Error::Config(format!("invalid rate of divergence {other:?}"))),
        }
    }
}

/// (λ_n) with moduli α (λ_{n+1} → 0), γ (Cauchy modulus of Σ|λ_{n+1} − λ_n|)
/// and θ (divergence of Σλ_{n+1}).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuliSchedule {
    pub lambda: Lambda,
    pub alpha: EpsModulus,
    pub gamma: EpsModulus,
    pub theta: DivergenceRate,
}

/// ⌈1/cos x⌉.
pub fn ceil_inv_cos(x: f64, ctx: &Ctx) -> u64 {
    ctx.ceil(1.0 / x.cos()) as u64
}

/// Rejects M√κ outside (0, π/2).
pub fn check_scaled_diameter(m: f64, c: &Curvature) -> Result<f64> {
    let x = m * c.sqrt_kappa();
    if !(x > 0.0 && x < FRAC_PI_2) {
        return Err(Error::Domain(format!("M√κ = {x} outside (0, π/2)")));
    }
    Ok(x)
}

/// μ = 1 − sin((1−λ)x)/sin(x) with x = M√κ.
pub fn mu_of(lambda: f64, x: f64) -> f64 {
    1.0 - ((1.0 - lambda) * x).sin() / x.sin()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClauseCheck {
    pub eps: f64,
    pub modulus: String,
    pub checked: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModuliReport {
    pub horizon: u64,
    pub alpha: Vec<ClauseCheck>,
    pub gamma: Vec<ClauseCheck>,
    pub theta_checked: Vec<u64>,
    pub theta_failed: Vec<u64>,
    /// First n with θ(n) beyond the horizon.
    pub theta_unchecked_from: u64,
    pub monotone: bool,
}

impl ModuliReport {
    pub fn alpha_pass(&self) -> bool {
        self.alpha.iter().all(|c| c.pass)
    }

    pub fn gamma_pass(&self) -> bool {
        self.gamma.iter().all(|c| c.pass)
    }

    pub fn theta_pass(&self) -> bool {
        self.theta_failed.is_empty()
    }
}

impl ModuliSchedule {
    /// λ_n = 1/(n+1), α(ε) = γ(ε) = ⌈1/ε⌉, θ(n) = 4^(n+1).
    pub fn harmonic() -> Self {
        ModuliSchedule {
            lambda: Lambda::Harmonic,
            alpha: EpsModulus::Reciprocal { scale: 1.0, power: 1 },
            gamma: EpsModulus::Reciprocal { scale: 1.0, power: 1 },
            theta: DivergenceRate::Exponential { base: 4, shift: 1 },
        }
    }

    /// λ_n = (n+1)^(−1/2), α(ε) = γ(ε) = ⌈ε^(−2)⌉, θ(n) = ⌈(n+4)²/4⌉.
    ///
    /// Σ_{k≤m} (k+2)^(−1/2) ≥ 2(√(m+3) − √3), which exceeds n at m = (n+4)²/4.
    pub fn inverse_sqrt() -> Self {
        ModuliSchedule {
            lambda: Lambda::Power { scale: 1.0, exponent: 0.5 },
            alpha: EpsModulus::Reciprocal { scale: 1.0, power: 2 },
            gamma: EpsModulus::Reciprocal { scale: 1.0, power: 2 },
            theta: DivergenceRate::Polynomial { coef: 1, shift: 4, power: 2, divisor: 4 },
        }
    }

    pub fn custom(lambda: Lambda, alpha: EpsModulus, gamma: EpsModulus, theta: DivergenceRate) -> Result<Self> {
        let s = ModuliSchedule { lambda, alpha, gamma, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.lambda.validate()?;
        self.alpha.validate()?;
        self.gamma.validate()?;
        self.theta.validate()
    }

    pub fn lambda(&self, n: u64) -> f64 {
        self.lambda.at(n)
    }

    /// μ_n = 1 − sin((1−λ_n)M√κ)/sin(M√κ).
    pub fn mu(&self, n: u64, m: f64, c: &Curvature) -> Result<f64> {
        let x = check_scaled_diameter(m, c)?;
        let l = self.lambda(n);
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::Domain(format!("λ_{n} = {l} outside [0,1]")));
        }
        Ok(mu_of(l, x))
    }

    /// θ̃(n) = θ(⌈1/cos(M√κ)⌉·n), a rate of divergence for Σμ_{n+1}.
    pub fn theta_tilde(&self, n: u64, m: f64, c: &Curvature, ctx: &Ctx) -> Result<BigCount> {
        let x = check_scaled_diameter(m, c)?;
        let k = ceil_inv_cos(x, ctx);
        Ok(self.theta.eval(&BigCount::from_u64(k * n), &ctx.budget))
    }

    /// Checks the three clauses on λ_1 … λ_{horizon+1}.
    pub fn verify_moduli_prefix(&self, horizon: u64, eps_grid: &[f64]) -> ModuliReport {
        let ctx = Ctx::new(Budget::default());
        let h = horizon as usize;
        // lam[i] = λ_i for 1 ≤ i ≤ h+1
        let lam: Vec<f64> = (0..=h + 1).map(|i| if i == 0 { 0.0 } else { self.lambda(i as u64) }).collect();
        let tol = 1e-12;

        let mut alpha = Vec::new();
        let mut gamma = Vec::new();
        for &eps in eps_grid {
            let a = self.alpha.eval(eps, &ctx);
            let (checked, pass) = match a.to_u64() {
                Some(a) if a <= horizon => (true, (a..=horizon).all(|n| lam[n as usize + 1] <= eps + tol)),
                _ => (false, true),
            };
            alpha.push(ClauseCheck { eps, modulus: a.render(), checked, pass });

            let g = self.gamma.eval(eps, &ctx);
            let (checked, pass) = match g.to_u64() {
                Some(g) if g < horizon => {
                    let mut sum = 0.0;
                    let mut ok = true;
                    for i in (g + 1)..=horizon {
                        sum += (lam[i as usize + 1] - lam[i as usize]).abs();
                        ok &= sum <= eps + tol;
                    }
                    (true, ok)
                }
                _ => (false, true),
            };
            gamma.push(ClauseCheck { eps, modulus: g.render(), checked, pass });
        }

        // prefix[k] = Σ_{j=1}^{k} λ_{j+1}
        let mut prefix = vec![0.0; h + 1];
        for k in 1..=h {
            prefix[k] = prefix[k - 1] + lam[k + 1];
        }
        let mut theta_checked = Vec::new();
        let mut theta_failed = Vec::new();
        let mut prev = BigCount::zero();
        let mut monotone = true;
        let mut n = 1u64;
        let theta_unchecked_from = loop {
            let t = self.theta.eval_u64(n, &ctx.budget);
            monotone &= t >= prev;
            prev = t.clone();
            match t.to_u64() {
                Some(t) if t <= horizon => {
                    theta_checked.push(n);
                    if prefix[t as usize] + tol < n as f64 {
                        theta_failed.push(n);
                    }
                }
                _ => break n,
            }
            n += 1;
        };

        let mut sorted: Vec<f64> = eps_grid.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        for w in sorted.windows(2) {
            monotone &= self.alpha.eval(w[0], &ctx) >= self.alpha.eval(w[1], &ctx);
            monotone &= self.gamma.eval(w[0], &ctx) >= self.gamma.eval(w[1], &ctx);
        }
        ModuliReport { horizon, alpha, gamma, theta_checked, theta_failed, theta_unchecked_from, monotone }
    }
}
