//! Closed-form rate functionals: asymptotic regularity, the sequence lemma,
//! the limsup rate, the Browder metastability bound K and the quantitative
//! recurrence lemma (Θ, Δ).

use serde::Serialize;

use crate::bigcount::{BigCount, Ctx};
use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::model_space::Curvature;
use crate::schedule::{ceil_inv_cos, check_scaled_diameter, DivergenceRate, EpsModulus, InvEps};

/// num / den with a big denominator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ratio {
    pub num: f64,
    pub den: BigCount,
}

impl Ratio {
    pub fn to_f64(&self) -> f64 {
        self.num / self.den.to_f64()
    }

    /// log₂ of the value, usable when it underflows.
    pub fn log2(&self) -> f64 {
        self.num.log2() - self.den.log2_f64().unwrap_or(f64::INFINITY)
    }

    /// The denominator is a finite natural number even when its logarithm
    /// overflows a float, so the sign is decided structurally.
    pub fn is_positive(&self) -> bool {
        self.num > 0.0 && !self.den.is_zero()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("ε = {eps} must be positive")))
    }
}

/// θ(k·(a + l)) for the repeated pattern of a modulus applied to a sum.
fn theta_of_sum(theta: &DivergenceRate, k: u64, a: &BigCount, l: &BigCount, ctx: &Ctx) -> BigCount {
    let b = &ctx.budget;
    theta.eval(&a.add(l, b).mul_u64(k, b), b)
}

/// Φ̃ = θ(⌈1/cos(M√κ)⌉·(γ(ε/2M) + max{⌈ln(2M/ε)⌉, 1})).
pub fn phi_tilde(eps: f64, c: &Curvature, m: f64, gamma: &EpsModulus, theta: &DivergenceRate, ctx: &Ctx) -> Result<BigCount> {
    check_eps(eps)?;
    let x = check_scaled_diameter(m, c)?;
    let k = ceil_inv_cos(x, ctx);
    let g = gamma.eval(eps / (2.0 * m), ctx);
    let l = ctx.ceil_at_least_one((2.0 * m / eps).ln());
    Ok(theta_of_sum(theta, k, &g, &l, ctx))
}

/// Φ = max{Φ̃(ε/2), α(ε/2M)}: rate of asymptotic regularity.
pub fn phi(
    eps: f64,
    c: &Curvature,
    m: f64,
    gamma: &EpsModulus,
    theta: &DivergenceRate,
    alpha: &EpsModulus,
    ctx: &Ctx,
) -> Result<BigCount> {
    let t = phi_tilde(eps / 2.0, c, m, gamma, theta, ctx)?;
    Ok(t.max(&alpha.eval(eps / (2.0 * m), ctx)))
}

/// Ψ = 4^(⌈1/cos(M√κ)⌉·⌈8M/ε + 2⌉), the rate for λ_n = 1/(n+1).
pub fn psi_harmonic(eps: f64, c: &Curvature, m: f64, ctx: &Ctx) -> Result<BigCount> {
    check_eps(eps)?;
    let x = check_scaled_diameter(m, c)?;
    let k = ceil_inv_cos(x, ctx);
    let inner = ctx.ceil(8.0 * m / eps + 2.0) as u64;
    let e = BigCount::from_u64(inner).mul_u64(k, &ctx.budget);
    Ok(BigCount::pow_base(4, &e, &ctx.budget))
}

/// θ(γ(ε/2) + max{⌈ln(2P/ε)⌉, 1}) + 1, the rate for sequences
/// s_{n+1} ≤ (1−a_n)s_n + a_n b_n with s_n ≤ P.
pub fn sigma_sequence_lemma(eps: f64, p: f64, gamma: &EpsModulus, theta: &DivergenceRate, ctx: &Ctx) -> Result<BigCount> {
    check_eps(eps)?;
    if !(p > 0.0) {
        return Err(Error::Domain(format!("bound P = {p} must be positive")));
    }
    let g = gamma.eval(eps / 2.0, ctx);
    let l = ctx.ceil_at_least_one((2.0 * p / eps).ln());
    Ok(theta_of_sum(theta, 1, &g, &l, ctx).add_u64(1, &ctx.budget))
}

/// max{θ(⌈1/cos(M√κ)⌉(γ(L) + max{⌈ln(1/L)⌉,1})), α(2L)} with
/// L = cos(M√κ)·t·ε/(4M√κ): rate for limsup γ_n^t ≤ 0.
#[allow(clippy::too_many_arguments)]
pub fn limsup_rate(
    eps: f64,
    c: &Curvature,
    m: f64,
    t: f64,
    gamma: &EpsModulus,
    theta: &DivergenceRate,
    alpha: &EpsModulus,
    ctx: &Ctx,
) -> Result<BigCount> {
    check_eps(eps)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("t = {t} outside (0,1)")));
    }
    let x = check_scaled_diameter(m, c)?;
    let inv = InvEps::real(x.cos() * t * eps / (4.0 * x));
    Ok(limsup_rate_inv(&inv, x, gamma, theta, alpha, ctx))
}

/// The limsup rate with 1/L given as a (factor, count) product.
pub(crate) fn limsup_rate_inv(
    inv_l: &InvEps,
    x: f64,
    gamma: &EpsModulus,
    theta: &DivergenceRate,
    alpha: &EpsModulus,
    ctx: &Ctx,
) -> BigCount {
    let k = ceil_inv_cos(x, ctx);
    let g = gamma.eval_inv(inv_l, ctx);
    let l = inv_l.count.ln_ceil_at_least_one(inv_l.factor, ctx);
    let first = theta_of_sum(theta, k, &g, &l, ctx);
    let half = InvEps { factor: inv_l.factor / 2.0, count: inv_l.count.clone() };
    first.max(&alpha.eval_inv(&half, ctx))
}

/// ⌈M√κ·tan(M√κ)/(1 − cos ε)⌉, the number of g̃-steps in K.
pub fn browder_exponent(eps: f64, c: &Curvature, m: f64, ctx: &Ctx) -> Result<BigCount> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("ε = {eps} outside (0,1)")));
    }
    let x = check_scaled_diameter(m, c)?;
    let half = (eps / 2.0).sin();
    Ok(ceil_real(x * x.tan() / (2.0 * half * half), ctx))
}

/// K(ε, g, M) = g̃^e(0) with g̃(n) = n + g(n) and e the Browder exponent.
pub fn browder_k(eps: f64, g: &GFunction, m: f64, c: &Curvature, ctx: &Ctx) -> Result<BigCount> {
    let e = browder_exponent(eps, c, m, ctx)?;
    Ok(g.tilde_iterate(&e, &ctx.budget))
}

/// ⌈x⌉ for a finite real x ≥ 0 of any magnitude.
pub(crate) fn ceil_real(x: f64, ctx: &Ctx) -> BigCount {
    assert!(x.is_finite() && x >= 0.0, "ceiling of {x}");
    if x < 4.0e18 {
        BigCount::from_u64(ctx.ceil(x) as u64)
    } else {
        // floats this large are integers
        BigCount::one().mul_f64_ceil(x, ctx)
    }
}

/// Θ and Δ of the quantitative recurrence lemma.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AoyamaBounds {
    pub theta: BigCount,
    pub delta: Ratio,
    pub psi: BigCount,
}

/// Θ = θ(ψ(ε/3) − 1 + max{⌈ln(3L/ε)⌉,1}) + 1 and Δ = ε/(3·g_ε(Θ − ψ(ε/3)))
/// with g_ε(n) = n + g(n + ψ(ε/3)).
pub fn aoyama_theta_delta(
    eps: f64,
    l: f64,
    theta: &DivergenceRate,
    psi: &EpsModulus,
    g: &GFunction,
    ctx: &Ctx,
) -> Result<AoyamaBounds> {
    if !(eps > 0.0 && eps < 2.0) {
        return Err(Error::Domain(format!("ε = {eps} outside (0,2)")));
    }
    if !(l > 0.0) {
        return Err(Error::Domain(format!("bound L = {l} must be positive")));
    }
    let b = &ctx.budget;
    let p = psi.eval(eps / 3.0, ctx);
    let lt = ctx.ceil_at_least_one((3.0 * l / eps).ln());
    let arg = p.add(&lt, b).saturating_sub(&BigCount::one());
    let big_theta = theta.eval(&arg, b).add_u64(1, b);
    if big_theta <= p {
        return Err(Error::Contract(format!(
            "Θ = {} does not exceed ψ(ε/3) = {}",
            big_theta.render(),
            p.render()
        )));
    }
    let n = big_theta.saturating_sub(&p);
    // g_ε(n) = n + g(n + ψ) = n + g(Θ)
    let ge = n.add(&g.eval(&big_theta, b), b);
    Ok(AoyamaBounds { theta: big_theta, delta: Ratio { num: eps, den: ge.mul_u64(3, b) }, psi: p })
}

/// h(δ) = sin(δ/2)(sin(δ/2) + 2 sin(x/2)) + sin(δx/2)(sin(δx/2) + 2), x = M√κ.
pub fn h_delta(delta: f64, c: &Curvature, m: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ = {delta} outside (0,1)")));
    }
    let x = check_scaled_diameter(m, c)?;
    let a = (delta / 2.0).sin();
    let b = (delta * x / 2.0).sin();
    Ok(a * (a + 2.0 * (x / 2.0).sin()) + b * (b + 2.0))
}
