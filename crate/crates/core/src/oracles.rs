//! Executable checks of the trigonometric inequalities on geodesic triangles
//! in M^n_κ and along Halpern traces. Every check reports LHS − RHS, so a value
//! at or below the tolerance means the inequality holds on that input.

use serde::Serialize;

use crate::bigcount::Budget;
use crate::browder::BrowderPoint;
use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::halpern::IterationTrace;
use crate::model_space::{comparison_triangle, distance, geodesic_point, vertex_angle, Curvature, ModelPoint};
use crate::rates::AoyamaBounds;
use crate::schedule::{check_scaled_diameter, DivergenceRate};

pub const TRIG_TOL: f64 = 1e-9;
pub const SIN_SUM_TOL: f64 = 1e-12;
/// Used once approximants with certified residuals enter.
pub const APPROX_TOL: f64 = 1e-8;
pub const ANGLE_TOL: f64 = 1e-6;
pub const SEGMENT_TOL: f64 = 1e-10;
/// Distances below this (relative to M) count as coincident points.
pub const DISTINCT_REL: f64 = 1e-9;
pub const RECURRENCE_TOL: f64 = 1e-12;

fn sin2h(a: f64) -> f64 {
    let s = (a / 2.0).sin();
    s * s
}

/// Triangle (x, y, z) with w = rx+(1−r)y on [x, y] and v = sx+(1−s)z on
/// [x, z]. In that notation w sits at parameter 1−r from x, so d(w, y) =
/// r·d(x, y) and d(v, z) = s·d(x, z).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangleConfig {
    pub x: ModelPoint,
    pub y: ModelPoint,
    pub z: ModelPoint,
    pub w: ModelPoint,
    pub v: ModelPoint,
    pub r: f64,
    pub s: f64,
    pub m: f64,
    pub curvature: Curvature,
}

/// Scaled distances d(·,·)√κ.
#[derive(Clone, Copy, Debug)]
struct Sides {
    xy: f64,
    xz: f64,
    yz: f64,
    xw: f64,
    yw: f64,
    xv: f64,
    zv: f64,
    wv: f64,
    yv: f64,
}

impl TriangleConfig {
    pub fn new(x: ModelPoint, y: ModelPoint, z: ModelPoint, r: f64, s: f64, m: f64, c: &Curvature) -> Result<Self> {
        check_scaled_diameter(m, c)?;
        for (name, p) in [("r", r), ("s", s)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} = {p} outside [0,1]")));
            }
        }
        let floor = DISTINCT_REL * m;
        for (a, b) in [(&x, &y), (&y, &z), (&x, &z)] {
            if distance(a, b, c)? <= floor {
                return Err(Error::DegenerateTriangle("vertices are not pairwise distinct".into()));
            }
        }
        let w = geodesic_point(&x, &y, 1.0 - r, c)?;
        let v = geodesic_point(&x, &z, 1.0 - s, c)?;
        let cfg = TriangleConfig { x, y, z, w, v, r, s, m, curvature: *c };
        let pts = [&cfg.x, &cfg.y, &cfg.z, &cfg.w, &cfg.v];
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = distance(pts[i], pts[j], c)?;
                if d > m * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!("pairwise distance {d} exceeds M = {m}")));
                }
            }
        }
        on_segment(&cfg.x, &cfg.w, &cfg.y, c)?;
        on_segment(&cfg.x, &cfg.v, &cfg.z, c)?;
        Ok(cfg)
    }

    /// M√κ.
    pub fn scaled_m(&self) -> f64 {
        self.m * self.curvature.sqrt_kappa()
    }

    fn sides(&self) -> Sides {
        let c = &self.curvature;
        let sk = c.sqrt_kappa();
        let d = |a: &ModelPoint, b: &ModelPoint| distance(a, b, c).expect("points validated") * sk;
        Sides {
            xy: d(&self.x, &self.y),
            xz: d(&self.x, &self.z),
            yz: d(&self.y, &self.z),
            xw: d(&self.x, &self.w),
            yw: d(&self.y, &self.w),
            xv: d(&self.x, &self.v),
            zv: d(&self.z, &self.v),
            wv: d(&self.w, &self.v),
            yv: d(&self.y, &self.v),
        }
    }

    /// All five points as coordinate lists, in the order x, y, z, w, v.
    pub fn coords(&self) -> Vec<Vec<f64>> {
        [&self.x, &self.y, &self.z, &self.w, &self.v].iter().map(|p| p.coords().to_vec()).collect()
    }
}

fn on_segment(a: &ModelPoint, p: &ModelPoint, b: &ModelPoint, c: &Curvature) -> Result<()> {
    let gap = distance(a, p, c)? + distance(p, b, c)? - distance(a, b, c)?;
    if gap.abs() > SEGMENT_TOL {
        return Err(Error::Domain(format!("point is off its segment by {gap:e}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SCQuantities {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub s5: f64,
    pub c1: f64,
    pub c2: f64,
    /// sin(d(x,v)√κ)/sin(d(x,z)√κ), present when v ∉ {x, z}.
    pub l1: Option<f64>,
    /// sin(d(v,z)√κ)/sin(d(x,z)√κ), present when v ∉ {x, z}.
    pub l2: Option<f64>,
}

pub fn compute_sc(cfg: &TriangleConfig) -> SCQuantities {
    sc_from(&cfg.sides(), cfg.scaled_m() * DISTINCT_REL)
}

fn sc_from(d: &Sides, floor: f64) -> SCQuantities {
    let sn = f64::sin;
    let interior = d.xv > floor && d.zv > floor;
    SCQuantities {
        s1: sn(d.xw) * sn(d.xv),
        s2: sn(d.xy) * sn(d.xz),
        s3: sn(d.xw) * sn(d.xz),
        s4: sn(d.yw) * sn(d.xz),
        s5: sn(d.xw) * sn(d.zv),
        c1: d.xw.cos() * d.xv.cos(),
        c2: d.xy.cos() * d.xz.cos(),
        l1: interior.then(|| sn(d.xv) / sn(d.xz)),
        l2: interior.then(|| sn(d.zv) / sn(d.xz)),
    }
}

/// Residuals of the five product inequalities; `e16` belongs to an identity
/// and is checked two-sided.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SResiduals {
    pub e14: f64,
    pub e15: f64,
    pub e16: f64,
    pub e17: f64,
    pub e18: f64,
}

impl SResiduals {
    pub fn worst(&self) -> f64 {
        [self.e14, self.e15, self.e16.abs(), self.e17, self.e18].into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn check_s_inequalities(cfg: &TriangleConfig) -> SResiduals {
    let d = cfg.sides();
    let q = compute_sc(cfg);
    SResiduals {
        e14: q.s2 - q.s3 - q.s4 * d.xw.cos(),
        e15: q.s3 - q.s1 - q.s5 * d.xv.cos(),
        e16: q.s2 * q.c1 - q.s1 * q.c2 - (q.s4 * d.xv.cos() + q.s5 * d.xy.cos()),
        e17: q.s2 - q.s3 - q.s4 * d.xv.cos() - 2.0 * q.s4 * (sin2h(d.xv) - sin2h(d.xw)),
        e18: q.s3 - q.s1 - q.s5 * d.xy.cos() - 2.0 * q.s5 * (sin2h(d.xy) - sin2h(d.xv)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonResiduals {
    /// Bound through S₁/S₂ and the cosine products.
    pub sc_form: f64,
    /// Bound through the sine ratios of the actual side lengths.
    pub sine_form: f64,
    /// Bound through r, s and M alone, middle term clamped at 0.
    pub uniform_form: f64,
}

impl ComparisonResiduals {
    pub fn worst(&self) -> f64 {
        self.sc_form.max(self.sine_form).max(self.uniform_form)
    }
}

/// Upper bounds on sin²(d(w,v)√κ/2).
pub fn check_comparison_props(cfg: &TriangleConfig) -> ComparisonResiduals {
    let d = cfg.sides();
    let q = compute_sc(cfg);
    let lhs = sin2h(d.wv);
    let sc = q.s1 / q.s2 * sin2h(d.yz) + 0.5 * (1.0 - q.c1) - q.s1 / (2.0 * q.s2) * (1.0 - q.c2);
    let sn = f64::sin;
    let gap = sin2h(d.xv) - sin2h(d.xw);
    let sine = sn(d.xw) / sn(d.xy) * sin2h(d.yz) + sn(d.yw) / sn(d.xy) * gap + sn(d.zv) / sn(d.xz) * sin2h(d.xy);
    let x = cfg.scaled_m();
    let uniform =
        sn((1.0 - cfg.r) * x) / sn(x) * sin2h(d.yz) + sn(cfg.r * x) / sn(x) * gap.max(0.0) + sn(cfg.s * x) / sn(x) * sin2h(x);
    ComparisonResiduals { sc_form: lhs - sc, sine_form: lhs - sine, uniform_form: lhs - uniform }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContractionResiduals {
    /// LHS − sin((1−t)M√κ)/sin(M√κ)·d(x,y)
    pub scaled: f64,
    /// LHS − d(x,y)
    pub plain: f64,
}

/// d((1−t)x+tz, (1−t)y+tz) against the sine-ratio bound.
pub fn check_lemma_contraction(
    x: &ModelPoint,
    y: &ModelPoint,
    z: &ModelPoint,
    t: f64,
    m: f64,
    c: &Curvature,
) -> Result<ContractionResiduals> {
    let big_x = check_scaled_diameter(m, c)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("t = {t} outside (0,1)")));
    }
    let dxy = distance(x, y, c)?;
    for d in [dxy, distance(y, z, c)?, distance(x, z, c)?] {
        if d > m * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("side {d} exceeds M = {m}")));
        }
    }
    let a = geodesic_point(x, z, t, c)?;
    let b = geodesic_point(y, z, t, c)?;
    let lhs = distance(&a, &b, c)?;
    let q = ((1.0 - t) * big_x).sin() / big_x.sin();
    Ok(ContractionResiduals { scaled: lhs - q * dxy, plain: lhs - dxy })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    HypothesisFails,
    /// w = z makes the hypothesis an equality while the distance conclusion
    /// can still fail, so the configuration carries no information.
    WAtZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Meta1Verdict {
    Skipped { reason: SkipReason },
    /// `angle` is π/2 − ∠_w̄(ȳ, x̄); absent when w = x.
    Checked { distance: f64, angle: Option<f64> },
}

/// Triangle (x, y, z) with w on [x, z]: if cos d(y,z)√κ ≥ cos d(y,w)√κ·cos d(w,z)√κ
/// then d(x,w) ≤ d(x,y) and the comparison angle at w̄ is at least π/2.
pub fn check_lemma_meta1(x: &ModelPoint, y: &ModelPoint, z: &ModelPoint, w: &ModelPoint, c: &Curvature) -> Result<Meta1Verdict> {
    on_segment(x, w, z, c)?;
    let (dxy, dyz, dxz) = (distance(x, y, c)?, distance(y, z, c)?, distance(x, z, c)?);
    if dxy + dyz + dxz >= 2.0 * c.d_kappa() {
        return Err(Error::InfeasibleTriangle("perimeter is not below 2·D_κ".into()));
    }
    let (dyw, dwz, dxw) = (distance(y, w, c)?, distance(w, z, c)?, distance(x, w, c)?);
    let floor = 1e-9;
    if dwz < floor {
        return Ok(Meta1Verdict::Skipped { reason: SkipReason::WAtZ });
    }
    let sk = c.sqrt_kappa();
    if (dyz * sk).cos() < (dyw * sk).cos() * (dwz * sk).cos() {
        return Ok(Meta1Verdict::Skipped { reason: SkipReason::HypothesisFails });
    }
    let angle = if dxw < floor {
        None
    } else {
        let tri = comparison_triangle(dxy, dyz, dxz, c)?;
        let wbar = geodesic_point(&tri.xbar, &tri.zbar, (dxw / dxz).min(1.0), &tri.curvature)?;
        Some(std::f64::consts::FRAC_PI_2 - vertex_angle(&wbar, &tri.ybar, &tri.xbar, &tri.curvature)?)
    };
    Ok(Meta1Verdict::Checked { distance: dxw - dxy, angle })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioResiduals {
    /// −(1 − L₁); negative means strict positivity holds.
    pub positivity: f64,
    /// (1 − L₁) − L₂ cos(d(x,v)√κ)
    pub gap: f64,
    /// L₁/(1 − L₁) − 1/(s cos(M√κ))
    pub ratio: f64,
}

impl RatioResiduals {
    pub fn worst(&self) -> f64 {
        self.gap.max(self.ratio)
    }
}

/// Bounds on L₁ and L₂ for v strictly inside [x, z].
pub fn check_lemma_e(cfg: &TriangleConfig) -> Result<RatioResiduals> {
    if !(cfg.s > 0.0 && cfg.s < 1.0) {
        return Err(Error::Domain(format!("s = {} outside (0,1)", cfg.s)));
    }
    let d = cfg.sides();
    let q = compute_sc(cfg);
    let (l1, l2) = match (q.l1, q.l2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::DegenerateTriangle("v coincides with an endpoint of [x, z]".into())),
    };
    let x = cfg.scaled_m();
    Ok(RatioResiduals {
        positivity: -(1.0 - l1),
        gap: (1.0 - l1) - l2 * d.xv.cos(),
        ratio: l1 / (1.0 - l1) - 1.0 / (cfg.s * x.cos()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prop47Residuals {
    pub first: f64,
    /// None when the second item's hypotheses fail for this q.
    pub second: Option<f64>,
}

/// Bounds on sin²(d(y,v)√κ/2); the second needs d(q,z) ≤ d(y,v) and
/// sin²(d(x,y)√κ/2) ≤ sin²(d(x,v)√κ/2).
pub fn check_prop47(cfg: &TriangleConfig, q: &ModelPoint) -> Result<Prop47Residuals> {
    let c = &cfg.curvature;
    let d = cfg.sides();
    let sc = compute_sc(cfg);
    let (l1, l2) = match (sc.l1, sc.l2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::DegenerateTriangle("v coincides with an endpoint of [x, z]".into())),
    };
    let lhs = sin2h(d.yv);
    let first = lhs - (l1 * sin2h(d.yz) + (1.0 - l1) / 2.0 - 0.5 * d.xy.cos() * l2);
    let sk = c.sqrt_kappa();
    let dqz = distance(q, &cfg.z, c)? * sk;
    let gap = sin2h(d.xy) - sin2h(d.xv);
    let second = (dqz <= d.yv && gap <= 0.0).then(|| {
        let dyq = distance(&cfg.y, q, c).expect("q validated") * sk;
        lhs - (gap + (sin2h(dyq) + (dyq / 2.0).sin()) / (cfg.s * cfg.scaled_m().cos()))
    });
    Ok(Prop47Residuals { first, second })
}

/// sin²((a+b)/2) − sin²(a/2) − sin²(b/2) − ½ sin a for a, b ∈ [0, π].
pub fn check_sin_sum(a: f64, b: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    if !((0.0..=pi).contains(&a) && (0.0..=pi).contains(&b)) {
        return Err(Error::Domain(format!("arguments ({a}, {b}) outside [0, π]")));
    }
    Ok(sin2h(a + b) - sin2h(a) - sin2h(b) - 0.5 * a.sin())
}

/// γ_n^t = sin²(d(u,z_t)√κ/2) − sin²(d(u,x_{n+1})√κ/2).
pub fn gamma_nt(u: &ModelPoint, z_t: &ModelPoint, x_next: &ModelPoint, c: &Curvature) -> Result<f64> {
    let sk = c.sqrt_kappa();
    Ok(sin2h(distance(u, z_t, c)? * sk) - sin2h(distance(u, x_next, c)? * sk))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop71Report {
    pub t: f64,
    /// Indices n ≥ 1 with x_{n+1} in the trace.
    pub checked: usize,
    /// How many of them had γ_n^t ≥ 0, the hypothesis of the first bound.
    pub with_nonnegative_gamma: usize,
    pub first: Option<f64>,
    pub second: f64,
    pub recursion: f64,
}

impl Prop71Report {
    pub fn worst(&self) -> f64 {
        self.first.unwrap_or(f64::NEG_INFINITY).max(self.second).max(self.recursion)
    }
}

fn require_points(tr: &IterationTrace) -> Result<&[ModelPoint]> {
    tr.points().ok_or_else(|| Error::UnsupportedAnalysis("trace was streamed; points are needed".into()))
}

/// Bounds on γ_n^t and on sin²(d(x_{n+1},z_t)√κ/2) along a trace, n ≥ 1.
pub fn check_prop71(tr: &IterationTrace, bp: &BrowderPoint, m: f64, c: &Curvature) -> Result<Prop71Report> {
    let x = check_scaled_diameter(m, c)?;
    let pts = require_points(tr)?;
    let map = tr.map();
    let u = tr.start();
    let (t, z) = (bp.t, &bp.z);
    let sk = c.sqrt_kappa();
    let mut rep = Prop71Report {
        t,
        checked: 0,
        with_nonnegative_gamma: 0,
        first: None,
        second: f64::NEG_INFINITY,
        recursion: f64::NEG_INFINITY,
    };
    for n in 1..pts.len().saturating_sub(1) {
        let (xn, xn1) = (&pts[n], &pts[n + 1]);
        let g = gamma_nt(u, z, xn1, c)?;
        let r = distance(xn1, &map.apply(xn1)?, c)? * sk;
        let a_n = (sin2h(r) + (r / 2.0).sin()) / x.cos();
        let to_z = sin2h(distance(xn1, z, c)? * sk);
        if g >= 0.0 {
            rep.with_nonnegative_gamma += 1;
            let v = g - (a_n / t - to_z);
            rep.first = Some(rep.first.map_or(v, |f| f.max(v)));
        }
        rep.second = rep.second.max(g - a_n / t);
        let lam = tr.schedule().lambda(n as u64 + 1);
        let rhs = ((1.0 - lam) * x).sin() / x.sin() * sin2h(distance(xn, z, c)? * sk)
            + (lam * x).sin() / x.sin() * g.max(0.0)
            + (t * x).sin() / x.sin() * sin2h(x);
        rep.recursion = rep.recursion.max(to_z - rhs);
        rep.checked += 1;
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Lemma73Verdict {
    Skipped,
    Checked { worst: f64, indices: usize },
}

/// Comparison of γ_n^i with γ_n^j when d(u,Tz_i) − d(u,Tz_j) ≤ δ/√κ, for every
/// n with x_{n+1} in the trace.
pub fn check_lemma73(
    family: &[BrowderPoint],
    i: usize,
    j: usize,
    delta: f64,
    tr: &IterationTrace,
    m: f64,
) -> Result<Lemma73Verdict> {
    let map = tr.map();
    let c = map.ball().curvature();
    let x = check_scaled_diameter(m, c)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ = {delta} outside (0,1)")));
    }
    let (zi, zj) = match (family.get(i), family.get(j)) {
        (Some(a), Some(b)) => (&a.z, &b.z),
        _ => return Err(Error::Domain(format!("indices ({i}, {j}) outside the family"))),
    };
    let u = tr.start();
    let sk = c.sqrt_kappa();
    let gap = distance(u, &map.apply(zi)?, c)? - distance(u, &map.apply(zj)?, c)?;
    if gap > delta / sk {
        return Ok(Lemma73Verdict::Skipped);
    }
    let pts = require_points(tr)?;
    let h = x / (2.0 * (j as f64 + 1.0));
    let slack = h.sin().powi(2) + 2.0 * h.sin() + (delta / 2.0).sin().powi(2) + 2.0 * (delta / 2.0).sin() * (x / 2.0).sin();
    let mut worst = f64::NEG_INFINITY;
    for xn1 in &pts[1..] {
        let v = gamma_nt(u, zi, xn1, c)? - (gamma_nt(u, zj, xn1, c)? + slack);
        worst = worst.max(v);
    }
    Ok(Lemma73Verdict::Checked { worst, indices: pts.len() - 1 })
}

/// Sequences for the recurrence s_{n+1} ≤ (1−α_n)s_n + α_n t_n + Δ. Element
/// k of each vector holds the value at n = k + 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RecurrenceInstance {
    pub s: Vec<f64>,
    pub alpha: Vec<f64>,
    pub t: Vec<f64>,
}

impl RecurrenceInstance {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AoyamaVerdict {
    pub window_start: u64,
    pub window_end: u64,
    pub max_in_window: f64,
    pub eps: f64,
    /// Largest recurrence residual over the supplied prefix.
    pub recurrence_residual: f64,
    /// Divergence-rate clauses Σ_{n≤θ(k)} α_n ≥ k that fit in the prefix.
    pub divergence_checked: u64,
    pub holds: bool,
}

/// Checks the sequences against the recurrence and the lemma's hypotheses
/// (contract errors on failure), then reports whether s_n ≤ ε on
/// [Θ, Θ + g(Θ)].
pub fn check_aoyama(
    inst: &RecurrenceInstance,
    bounds: &AoyamaBounds,
    l: f64,
    theta: &DivergenceRate,
    g: &GFunction,
    eps: f64,
) -> Result<AoyamaVerdict> {
    let n = inst.len();
    if inst.alpha.len() != n || inst.t.len() != n {
        return Err(Error::Contract("sequences differ in length".into()));
    }
    let big_theta = bounds.theta.to_u64().ok_or_else(|| Error::Exhausted("Θ is not a machine integer".into()))?;
    let psi = bounds.psi.to_u64().unwrap_or(u64::MAX);
    let delta = bounds.delta.to_f64();
    if let Some(k) = inst.alpha.iter().position(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::Contract(format!("α_{} = {} outside [0,1]", k + 1, inst.alpha[k])));
    }
    if let Some(k) = inst.s.iter().position(|&s| s > l + RECURRENCE_TOL) {
        return Err(Error::Contract(format!("s_{} = {} exceeds L = {l}", k + 1, inst.s[k])));
    }
    for (k, &tk) in inst.t.iter().enumerate() {
        if k as u64 + 1 >= psi && tk > eps / 3.0 + RECURRENCE_TOL {
            return Err(Error::Contract(format!("t_{} = {tk} exceeds ε/3 past ψ(ε/3) = {psi}", k + 1)));
        }
    }
    let b = Budget::default();
    let mut divergence_checked = 0;
    let mut partial = 0.0;
    let mut upto = 0usize;
    for k in 1u64.. {
        let Some(tk) = theta.eval_u64(k, &b).to_u64() else { break };
        if tk as usize > n {
            break;
        }
        while upto < tk as usize {
            partial += inst.alpha[upto];
            upto += 1;
        }
        if partial < k as f64 - RECURRENCE_TOL {
            return Err(Error::Contract(format!("Σ_{{n ≤ θ({k})}} α_n = {partial} is below {k}")));
        }
        divergence_checked += 1;
    }
    let mut recurrence_residual = f64::NEG_INFINITY;
    for k in 0..n.saturating_sub(1) {
        let rhs = (1.0 - inst.alpha[k]) * inst.s[k] + inst.alpha[k] * inst.t[k] + delta;
        let r = inst.s[k + 1] - rhs;
        recurrence_residual = recurrence_residual.max(r);
        if r > RECURRENCE_TOL * (1.0 + rhs.abs()) {
            return Err(Error::Contract(format!("recurrence fails at n = {} by {r:e}", k + 1)));
        }
    }
    let end = big_theta.saturating_add(g.eval_u64(big_theta));
    if big_theta == 0 || end as usize > n {
        return Err(Error::Exhausted(format!("window [{big_theta}, {end}] passes the supplied prefix of length {n}")));
    }
    let max_in_window = inst.s[big_theta as usize - 1..end as usize].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AoyamaVerdict {
        window_start: big_theta,
        window_end: end,
        max_in_window,
        eps,
        recurrence_residual,
        divergence_checked,
        holds: max_in_window <= eps,
    })
}
