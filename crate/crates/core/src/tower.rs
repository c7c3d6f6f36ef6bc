//! The nested metastability bound Σ(ε, g, κ, M, θ, α, γ) and every
//! intermediate it is assembled from.

use serde::Serialize;

use crate::bigcount::{BigCount, Budget, Ctx, GuardHit, Tower};
use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::model_space::Curvature;
use crate::rates::{ceil_real, limsup_rate_inv, Ratio};
use crate::schedule::{ceil_inv_cos, check_scaled_diameter, DivergenceRate, InvEps, ModuliSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TowerOptions {
    pub budget: Budget,
    /// Orbit steps evaluated one by one before extrapolating.
    pub max_orbit_steps: u64,
    /// Largest index range that Γ enumerates for non-monotone families.
    pub gamma_enumeration_limit: u64,
}

impl Default for TowerOptions {
    fn default() -> Self {
        TowerOptions { budget: Budget::default(), max_orbit_steps: 1_000_000, gamma_enumeration_limit: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Family {
    General(ModuliSchedule),
    /// λ_n = 1/(n+1), using the closed exponential forms directly.
    Harmonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// The family is nondecreasing in i, so only i = n is evaluated.
    Monotone,
    Enumerated,
    /// max{θ⁺(·), α(·)} at i = n, an upper bound on the maximum.
    Bound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitStatus {
    Complete,
    /// The last steps grew by a fixed pattern that was continued to step B.
    Extrapolated,
    /// Iteration stopped at the step limit without a pattern; the value is
    /// the orbit at that step, a lower bound for the true iterate.
    Truncated,
}

/// One step i ↦ f̃*(i) of the orbit from 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitEntry {
    pub step: u64,
    pub i: BigCount,
    /// i + ⌈1/ε₀⌉, the index at which χ*, Θ and Δ* are evaluated.
    pub index: BigCount,
    /// L at the argument of χ*, as 1/(factor·count).
    #[serde(rename = "L")]
    pub l: Ratio,
    #[serde(rename = "χ*")]
    pub chi_star: BigCount,
    #[serde(rename = "Θ")]
    pub theta: BigCount,
    #[serde(rename = "Δ*")]
    pub delta_star: Ratio,
    pub f: BigCount,
    #[serde(rename = "f*")]
    pub f_star: BigCount,
    #[serde(rename = "f̃*")]
    pub f_tilde_star: BigCount,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateTowerReport {
    pub family: &'static str,
    pub eps: f64,
    pub kappa: f64,
    pub m: f64,
    pub g: GFunction,
    /// sin²(ε√κ/4), the argument of Θ, Δ* and f.
    pub e4: f64,
    /// Argument of χ in χ*_i(e4/3).
    pub chi_argument: f64,
    pub ceil_inv_cos: u64,
    #[serde(rename = "ε₀")]
    pub eps0: f64,
    pub ceil_inv_eps0: BigCount,
    #[serde(rename = "B")]
    pub b: BigCount,
    #[serde(rename = "S")]
    pub s: i64,
    /// T at e4.
    #[serde(rename = "T")]
    pub t: i64,
    pub orbit: Vec<OrbitEntry>,
    pub orbit_steps_evaluated: u64,
    pub orbit_status: OrbitStatus,
    /// f̃*^B(0).
    pub orbit_end: BigCount,
    /// Bounds of the index range holding K₀.
    pub k0_range: [BigCount; 2],
    /// N at the smallest admissible K₀.
    pub n_at_lower_k0: BigCount,
    pub gamma_argument: BigCount,
    #[serde(rename = "Γ")]
    pub gamma: BigCount,
    pub gamma_mode: GammaMode,
    #[serde(rename = "θ⁺")]
    pub theta_plus: BigCount,
    #[serde(rename = "A")]
    pub a: BigCount,
    #[serde(rename = "Σ")]
    pub sigma: BigCount,
    pub sigma_is_estimate: bool,
    pub guard_hits: Vec<GuardHit>,
}

pub struct MetastabilityTower {
    family: Family,
    eps: f64,
    m: f64,
    curvature: Curvature,
    g: GFunction,
    opts: TowerOptions,
    ctx: Ctx,
    x: f64,
    k: u64,
    e4: f64,
    eps0: f64,
    k0: BigCount,
    b: BigCount,
    s: i64,
}

impl MetastabilityTower {
    pub fn new(eps: f64, g: &GFunction, c: &Curvature, m: f64, moduli: &ModuliSchedule, opts: TowerOptions) -> Result<Self> {
        moduli.validate()?;
        Self::build(Family::General(moduli.clone()), eps, g, c, m, opts)
    }

    pub fn harmonic(eps: f64, g: &GFunction, c: &Curvature, m: f64, opts: TowerOptions) -> Result<Self> {
        Self::build(Family::Harmonic, eps, g, c, m, opts)
    }

    fn build(family: Family, eps: f64, g: &GFunction, c: &Curvature, m: f64, opts: TowerOptions) -> Result<Self> {
        if !(eps > 0.0 && eps < 2.0) {
            return Err(Error::Domain(format!("ε = {eps} outside (0,2)")));
        }
        let x = check_scaled_diameter(m, c)?;
        let ctx = Ctx::new(opts.budget);
        let k = ceil_inv_cos(x, &ctx);
        let e4 = (eps * c.sqrt_kappa() / 4.0).sin().powi(2);
        let eps0 = x.cos() / 36.0 * e4;
        let k0 = ceil_real(1.0 / eps0, &ctx);
        // 1 − cos ε₀ = 2 sin²(ε₀/2) without cancellation
        let half = (eps0 / 2.0).sin();
        let b = ceil_real(x * x.tan() / (2.0 * half * half), &ctx);
        let s = ctx.ceil((3.0 * (x / 2.0).sin().powi(2) / e4).ln());
        Ok(MetastabilityTower { family, eps, m, curvature: *c, g: g.clone(), opts, ctx, x, k, e4, eps0, k0, b, s })
    }

    fn budget(&self) -> &Budget {
        &self.ctx.budget
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    /// ⌈1/ε₀⌉
    pub fn k0(&self) -> &BigCount {
        &self.k0
    }

    #[allow(non_snake_case)]
    pub fn B(&self) -> &BigCount {
        &self.b
    }

    #[allow(non_snake_case)]
    pub fn S(&self) -> i64 {
        self.s
    }

    /// sin²(ε√κ/4)
    pub fn e4(&self) -> f64 {
        self.e4
    }

    /// ⌈ln((3/δ)·sin²(M√κ/2))⌉
    #[allow(non_snake_case)]
    pub fn T(&self, delta: f64) -> i64 {
        self.ctx.ceil((3.0 / delta * (self.x / 2.0).sin().powi(2)).ln())
    }

    /// 1/L_i(δ) = 4M√κ(i+1)/(cos(M√κ)·δ) as a factor times a count.
    pub fn inv_l(&self, i: &BigCount, delta: f64) -> InvEps {
        InvEps { factor: 4.0 * self.x / (self.x.cos() * delta), count: i.add_u64(1, self.budget()) }
    }

    pub fn chi(&self, i: &BigCount, delta: f64) -> BigCount {
        let inv = self.inv_l(i, delta);
        match &self.family {
            Family::General(s) => limsup_rate_inv(&inv, self.x, &s.gamma, &s.theta, &s.alpha, &self.ctx),
            Family::Harmonic => {
                // 4^(k(⌈1/L⌉ + max{⌈ln(1/L)⌉,1}) + 1)
                let b = self.budget();
                let r = inv.count.mul_f64_ceil(inv.factor, &self.ctx);
                let l = inv.count.ln_ceil_at_least_one(inv.factor, &self.ctx);
                BigCount::pow_base(4, &r.add(&l, b).mul_u64(self.k, b).add_u64(1, b), b)
            }
        }
    }

    /// χ*_i(δ) = χ_i(δ·cos(M√κ)/2)
    pub fn chi_star(&self, i: &BigCount, delta: f64) -> BigCount {
        self.chi(i, delta * self.x.cos() / 2.0)
    }

    /// Θ_i(δ) = θ(k(χ*_i(δ/3) − 1 + max{T(δ),1})) + 1.
    pub fn big_theta(&self, i: &BigCount, delta: f64) -> BigCount {
        let cs = self.chi_star(i, delta / 3.0);
        self.big_theta_from(&cs, delta)
    }

    fn big_theta_from(&self, chi_star: &BigCount, delta: f64) -> BigCount {
        let b = self.budget();
        let t = BigCount::from_u64(self.T(delta).max(1) as u64);
        let arg = chi_star.saturating_sub(&BigCount::one()).add(&t, b).mul_u64(self.k, b);
        self.theta_fn(&arg).add_u64(1, b)
    }

    fn theta_fn(&self, n: &BigCount) -> BigCount {
        match &self.family {
            Family::General(s) => s.theta.eval(n, self.budget()),
            Family::Harmonic => BigCount::pow_base(4, &n.add_u64(1, self.budget()), self.budget()),
        }
    }

    /// θ⁺(n) = max_{1≤i≤n} θ(i).
    pub fn theta_plus(&self, n: &BigCount) -> BigCount {
        match &self.family {
            Family::General(s) => s.theta.sup_prefix(n, self.budget()),
            Family::Harmonic => self.theta_fn(n),
        }
    }

    /// Δ*_i(δ, g) = δ/(3Θ_i(δ) − 3χ*_i(δ/3) + 3g(Θ_i(δ))).
    pub fn delta_star(&self, i: &BigCount, delta: f64) -> Ratio {
        let cs = self.chi_star(i, delta / 3.0);
        let th = self.big_theta_from(&cs, delta);
        self.delta_star_from(&cs, &th, delta)
    }

    fn delta_star_from(&self, chi_star: &BigCount, theta: &BigCount, delta: f64) -> Ratio {
        let b = self.budget();
        let d = theta.saturating_sub(chi_star).add(&self.g.eval(theta, b), b);
        Ratio { num: delta, den: d.mul_u64(3, b) }
    }

    /// f(i) = max{⌈M√κ/Δ*_i(e4, g)⌉, i} − i.
    pub fn f(&self, i: &BigCount) -> BigCount {
        self.entry(0, &BigCount::zero(), i).f
    }

    /// f*(i) = f(i + ⌈1/ε₀⌉) + ⌈1/ε₀⌉.
    pub fn f_star(&self, i: &BigCount) -> BigCount {
        let j = i.add(&self.k0, self.budget());
        self.f(&j).add(&self.k0, self.budget())
    }

    /// f̃*(i) = i + f*(i).
    pub fn f_tilde_star(&self, i: &BigCount) -> BigCount {
        self.f_star(i).add(i, self.budget())
    }

    // all intermediates of one orbit step at orbit value `i`, evaluated at
    // index j (j = i + ⌈1/ε₀⌉ along the orbit)
    fn entry(&self, step: u64, i: &BigCount, j: &BigCount) -> OrbitEntry {
        let b = self.budget();
        let arg = self.e4 / 3.0;
        let inv = self.inv_l(j, arg * self.x.cos() / 2.0);
        let cs = self.chi_star(j, arg);
        let th = self.big_theta_from(&cs, self.e4);
        let ds = self.delta_star_from(&cs, &th, self.e4);
        // M√κ/Δ* = (M√κ/e4)·den
        let q = ds.den.mul_f64_ceil(self.x / self.e4, &self.ctx);
        let f = q.max(j).saturating_sub(j);
        let f_star = f.add(&self.k0, b);
        let f_tilde_star = f_star.add(i, b);
        OrbitEntry {
            step,
            i: i.clone(),
            index: j.clone(),
            l: Ratio { num: 1.0 / inv.factor, den: inv.count },
            chi_star: cs,
            theta: th,
            delta_star: ds,
            f,
            f_star,
            f_tilde_star,
        }
    }

    /// Γ(n) = max{χ*_i(e4/3) : ⌈1/ε₀⌉ ≤ i ≤ n}, defined for n ≥ ⌈1/ε₀⌉.
    pub fn gamma(&self, n: &BigCount) -> Result<(BigCount, GammaMode)> {
        if *n < self.k0 {
            return Err(Error::Domain(format!("Γ({}) below ⌈1/ε₀⌉ = {}", n.render(), self.k0.render())));
        }
        let arg = self.e4 / 3.0;
        let monotone = match &self.family {
            Family::Harmonic => true,
            Family::General(s) => !matches!(s.theta, DivergenceRate::Table { .. }),
        };
        if monotone {
            return Ok((self.chi_star(n, arg), GammaMode::Monotone));
        }
        if let (Some(lo), Some(hi)) = (self.k0.to_u64(), n.to_u64()) {
            if hi - lo < self.opts.gamma_enumeration_limit {
                let mut best = BigCount::zero();
                for i in lo..=hi {
                    best = best.max(&self.chi_star(&BigCount::from_u64(i), arg));
                }
                return Ok((best, GammaMode::Enumerated));
            }
        }
        // γ, α and the logarithm are nondecreasing in 1/L, which grows with i
        let Family::General(s) = &self.family else { unreachable!() };
        let b = self.budget();
        let inv = self.inv_l(n, arg * self.x.cos() / 2.0);
        let g = s.gamma.eval_inv(&inv, &self.ctx);
        let l = inv.count.ln_ceil_at_least_one(inv.factor, &self.ctx);
        let first = s.theta.sup_prefix(&g.add(&l, b).mul_u64(self.k, b), b);
        let half = InvEps { factor: inv.factor / 2.0, count: inv.count.clone() };
        Ok((first.max(&s.alpha.eval_inv(&half, &self.ctx)), GammaMode::Bound))
    }

    /// A(n) = θ⁺(k(Γ(n) − 1 + max{S,1})) + 1.
    #[allow(non_snake_case)]
    pub fn A(&self, n: &BigCount) -> Result<(BigCount, BigCount, GammaMode)> {
        let (gam, mode) = self.gamma(n)?;
        let b = self.budget();
        let arg = gam
            .saturating_sub(&BigCount::one())
            .add_u64(self.s.max(1) as u64, b)
            .mul_u64(self.k, b);
        Ok((self.theta_plus(&arg).add_u64(1, b), gam, mode))
    }

    /// Evaluates Σ = A(f̃*^B(0) + ⌈1/ε₀⌉), recording the intermediates.
    pub fn report(&self) -> Result<RateTowerReport> {
        const HEAD: usize = 16;
        let b = self.budget();
        let mut orbit = Vec::new();
        let mut i = BigCount::zero();
        let mut step = 0u64;
        let mut history: Vec<BigCount> = Vec::new();
        let mut status = OrbitStatus::Complete;
        let mut last = None;
        while BigCount::from_u64(step) < self.b {
            if step >= self.opts.max_orbit_steps {
                let remaining = self.b.saturating_sub(&BigCount::from_u64(step));
                match extrapolate(&history, &remaining, b) {
                    Some(v) => {
                        i = v;
                        status = OrbitStatus::Extrapolated;
                    }
                    None => status = OrbitStatus::Truncated,
                }
                break;
            }
            let j = i.add(&self.k0, b);
            let e = self.entry(step, &i, &j);
            i = e.f_tilde_star.clone();
            history.push(i.clone());
            if history.len() > 4 {
                history.remove(0);
            }
            if orbit.len() < HEAD {
                orbit.push(e);
            } else {
                last = Some(e);
            }
            step += 1;
            if step >= 4 && step < self.opts.max_orbit_steps && self.b.to_u64().map_or(true, |bb| bb > step) {
                // an estimate orbit that has settled into a fixed pattern is continued directly
                if !i.is_exact() {
                    let remaining = self.b.saturating_sub(&BigCount::from_u64(step));
                    if let Some(v) = extrapolate(&history, &remaining, b) {
                        i = v;
                        status = OrbitStatus::Extrapolated;
                        break;
                    }
                }
            }
        }
        orbit.extend(last);

        let end = i.clone();
        let n = end.add(&self.k0, b);
        let (a, gamma, gamma_mode) = self.A(&n)?;
        let tp_arg = gamma
            .saturating_sub(&BigCount::one())
            .add_u64(self.s.max(1) as u64, b)
            .mul_u64(self.k, b);
        let theta_plus = self.theta_plus(&tp_arg);
        let n_low = self.big_theta(&self.k0, self.e4);
        let sigma_is_estimate = !a.is_exact() || status != OrbitStatus::Complete || gamma_mode == GammaMode::Bound;
        Ok(RateTowerReport {
            family: match self.family {
                Family::General(_) => "general",
                Family::Harmonic => "harmonic",
            },
            eps: self.eps,
            kappa: self.curvature.kappa(),
            m: self.m,
            g: self.g.clone(),
            e4: self.e4,
            chi_argument: self.e4 / 3.0 * self.x.cos() / 2.0,
            ceil_inv_cos: self.k,
            eps0: self.eps0,
            ceil_inv_eps0: self.k0.clone(),
            b: self.b.clone(),
            s: self.s,
            t: self.T(self.e4),
            orbit,
            orbit_steps_evaluated: step,
            orbit_status: status,
            orbit_end: end,
            k0_range: [self.k0.clone(), n.clone()],
            n_at_lower_k0: n_low,
            gamma_argument: n,
            gamma,
            gamma_mode,
            theta_plus,
            a: a.clone(),
            sigma: a,
            sigma_is_estimate,
            guard_hits: self.ctx.guard_hits(),
        })
    }
}

/// Continues an orbit whose last values grow by a fixed pattern: a constant
/// exact increment, or a constant number of tower levels with a settled top.
fn extrapolate(history: &[BigCount], remaining: &BigCount, b: &Budget) -> Option<BigCount> {
    if history.len() < 4 {
        return None;
    }
    let h = &history[history.len() - 4..];
    if h.iter().all(|v| v.is_exact()) {
        let d1 = h[1].saturating_sub(&h[0]);
        if d1 == h[2].saturating_sub(&h[1]) && d1 == h[3].saturating_sub(&h[2]) {
            return Some(h[3].add(&d1.mul(remaining, b), b));
        }
        return None;
    }
    let t: Vec<Tower> = h.iter().map(|v| v.tower()).collect();
    let dh = t[3].height().checked_sub(t[2].height())?;
    let settled = (1..4).all(|k| t[k].height() == t[k - 1].height() + dh) && t[1].top() == t[2].top() && t[2].top() == t[3].top();
    if !settled || dh == 0 {
        return None;
    }
    let r = remaining.to_u64().unwrap_or(u64::MAX);
    let height = t[3].height().saturating_add(dh.saturating_mul(r));
    Some(BigCount::Estimate(Tower::from_parts(height, t[3].top())))
}

/// Σ for general moduli.
pub fn table1_tower(
    eps: f64,
    g: &GFunction,
    c: &Curvature,
    m: f64,
    moduli: &ModuliSchedule,
    opts: TowerOptions,
) -> Result<RateTowerReport> {
    MetastabilityTower::new(eps, g, c, m, moduli, opts)?.report()
}

/// Σ for λ_n = 1/(n+1) through the closed exponential forms.
pub fn sigma_harmonic(eps: f64, g: &GFunction, c: &Curvature, m: f64, opts: TowerOptions) -> Result<RateTowerReport> {
    MetastabilityTower::harmonic(eps, g, c, m, opts)?.report()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::h_delta;
    use crate::schedule::EpsModulus;

    fn unit() -> Curvature {
        Curvature::unit_sphere()
    }

    fn stub() -> ModuliSchedule {
        ModuliSchedule::custom(
            crate::schedule::Lambda::Harmonic,
            EpsModulus::Reciprocal { scale: 1.0, power: 1 },
            EpsModulus::Reciprocal { scale: 1.0, power: 1 },
            DivergenceRate::identity(),
        )
        .unwrap()
    }

    #[test]
    fn constants_for_reference_configuration() {
        let t = MetastabilityTower::harmonic(1.0, &GFunction::identity(), &unit(), 0.1, TowerOptions::default()).unwrap();
        let want = 0.1f64.cos() / 36.0 * 0.25f64.sin().powi(2);
        assert!((t.eps0() - want).abs() < 1e-18);
        assert!((t.eps0() - 1.692e-3).abs() < 1e-6);
        let naive_b = (0.1 * 0.1f64.tan() / (1.0 - want.cos())).ceil() as u64;
        let b = t.B().to_u64().unwrap();
        assert!(b.abs_diff(naive_b) <= 1, "{b} vs {naive_b}");
        assert!((7000..7020).contains(&b));
        assert!(h_delta(t.eps0(), &unit(), 0.1).unwrap() <= 0.1f64.cos() / 6.0 * t.e4());
    }

    #[test]
    fn gamma_rejects_small_arguments() {
        let t = MetastabilityTower::new(1.5, &GFunction::identity(), &unit(), 0.02, &stub(), TowerOptions::default()).unwrap();
        let k0 = t.k0().clone();
        assert!(t.gamma(&k0.saturating_sub(&BigCount::one())).is_err());
        assert!(t.gamma(&k0).is_ok());
    }

    #[test]
    fn toy_tower_is_exact_and_consistent() {
        let r = table1_tower(1.5, &GFunction::Constant { value: 2 }, &unit(), 0.02, &stub(), TowerOptions::default()).unwrap();
        assert!(!r.sigma_is_estimate);
        assert_eq!(r.orbit_status, OrbitStatus::Complete);
        for e in &r.orbit {
            assert!(e.delta_star.is_positive());
            assert!(e.f_tilde_star > e.i);
        }
        assert!(r.sigma >= r.n_at_lower_k0);
    }

    #[test]
    fn harmonic_specialization_agrees() {
        let g = GFunction::Constant { value: 1 };
        let opts = TowerOptions::default();
        let m = 0.0005;
        let a = sigma_harmonic(1.9, &g, &unit(), m, opts).unwrap();
        let b = table1_tower(1.9, &g, &unit(), m, &ModuliSchedule::harmonic(), opts).unwrap();
        assert_eq!(a.b, b.b);
        assert_eq!(a.orbit.len(), b.orbit.len());
        for (x, y) in a.orbit.iter().zip(&b.orbit) {
            assert_eq!(x.chi_star, y.chi_star);
            assert_eq!(x.theta.tower().height(), y.theta.tower().height());
        }
        assert_eq!(a.gamma, b.gamma);
    }

    #[test]
    fn estimates_are_flagged() {
        let r = sigma_harmonic(0.5, &GFunction::identity(), &unit(), 0.1, TowerOptions::default()).unwrap();
        assert!(r.sigma_is_estimate);
        assert!(!r.sigma.is_exact());
    }
}
