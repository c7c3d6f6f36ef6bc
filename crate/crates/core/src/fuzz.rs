//! Randomized campaigns driving the oracles over sampled configurations.
//! Trial i of a campaign draws from its own stream, so reports do not depend
//! on thread scheduling.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigcount::{Budget, Ctx};
use crate::browder::{resolvent_family, solve_fixed_point};
use crate::domain::{ConvexBall, NonexpansiveMap};
use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::halpern::iterate;
use crate::model_space::{geodesic_point, Curvature, ModelPoint};
use crate::oracles::{self, Lemma73Verdict, Meta1Verdict, RecurrenceInstance, TriangleConfig};
use crate::rates::aoyama_theta_delta;
use crate::rng::trial_rng;
use crate::schedule::{DivergenceRate, EpsModulus, ModuliSchedule};

pub const MAX_ATTEMPTS: u32 = 1000;
const TRACE_LEN: u64 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Oracle {
    /// S₂−S₃ ≤ S₄cos d(x,w)√κ and its three companions.
    SProducts,
    /// S₂C₁ − S₁C₂ = S₄cos d(x,v)√κ + S₅cos d(x,y)√κ, two-sided.
    SIdentity,
    ComparisonSc,
    ComparisonSine,
    ComparisonUniform,
    Contraction,
    FootOfSegment,
    RatioBounds,
    YvBound,
    YvBoundNearQ,
    SinSum,
    GammaFirst,
    GammaSecond,
    GammaRecursion,
    GammaShift,
    RecurrenceWindow,
    /// A deliberately reversed inequality, used to confirm that violations
    /// are detected and reported.
    SelftestFlipped,
}

impl Oracle {
    /// Every genuine oracle; the self-test is never part of a default run.
    pub const ALL: [Oracle; 16] = [
        Oracle::SProducts,
        Oracle::SIdentity,
        Oracle::ComparisonSc,
        Oracle::ComparisonSine,
        Oracle::ComparisonUniform,
        Oracle::Contraction,
        Oracle::FootOfSegment,
        Oracle::RatioBounds,
        Oracle::YvBound,
        Oracle::YvBoundNearQ,
        Oracle::SinSum,
        Oracle::GammaFirst,
        Oracle::GammaSecond,
        Oracle::GammaRecursion,
        Oracle::GammaShift,
        Oracle::RecurrenceWindow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Oracle::SProducts => "s-products",
            Oracle::SIdentity => "s-identity",
            Oracle::ComparisonSc => "comparison-sc",
            Oracle::ComparisonSine => "comparison-sine",
            Oracle::ComparisonUniform => "comparison-uniform",
            Oracle::Contraction => "contraction",
            Oracle::FootOfSegment => "foot-of-segment",
            Oracle::RatioBounds => "ratio-bounds",
            Oracle::YvBound => "yv-bound",
            Oracle::YvBoundNearQ => "yv-bound-near-q",
            Oracle::SinSum => "sin-sum",
            Oracle::GammaFirst => "gamma-first",
            Oracle::GammaSecond => "gamma-second",
            Oracle::GammaRecursion => "gamma-recursion",
            Oracle::GammaShift => "gamma-shift",
            Oracle::RecurrenceWindow => "recurrence-window",
            Oracle::SelftestFlipped => "selftest-flipped",
        }
    }

    pub fn from_name(s: &str) -> Option<Oracle> {
        Oracle::ALL.into_iter().chain([Oracle::SelftestFlipped]).find(|o| o.name() == s)
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Oracle::SinSum => oracles::SIN_SUM_TOL,
            Oracle::GammaFirst | Oracle::GammaSecond | Oracle::GammaRecursion | Oracle::GammaShift => oracles::APPROX_TOL,
            Oracle::RecurrenceWindow => 0.0,
            _ => oracles::TRIG_TOL,
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzSettings {
    pub seed: u64,
    pub kappa: f64,
    /// M√κ, in (0, π/2).
    pub scaled_m: f64,
    pub dim: usize,
    /// Trials to run; each yields one accepted configuration unless its
    /// attempts run out.
    pub trials: u64,
}

/// The sampled configuration behind a residual.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Witness {
    pub trial: u64,
    pub points: Vec<Vec<f64>>,
    pub params: BTreeMap<&'static str, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuzzReport {
    pub oracle: &'static str,
    pub seed: u64,
    pub kappa: f64,
    pub scaled_m: f64,
    pub tolerance: f64,
    pub trials: u64,
    pub accepted: u64,
    /// Trials whose attempts all failed the hypothesis filter.
    pub skipped: u64,
    /// Sampled candidates rejected by the filter, over all trials.
    pub rejected: u64,
    /// Individual inequality instances evaluated (several per trace).
    pub instances: u64,
    pub violations: u64,
    pub max_residual: f64,
    pub worst: Option<Witness>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Sample {
    residual: f64,
    instances: u64,
    witness: Witness,
}

enum Trial {
    Accepted { sample: Sample, rejected: u64 },
    Skipped { rejected: u64 },
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one campaign, so different oracles and curvatures see unrelated
/// streams under the same user seed.
fn campaign_seed(st: &FuzzSettings, o: Oracle) -> u64 {
    let mut h = splitmix(st.seed);
    for v in [o.tag(), st.kappa.to_bits(), st.scaled_m.to_bits(), st.dim as u64] {
        h = splitmix(h ^ v);
    }
    h
}

pub fn run_campaign(oracle: Oracle, st: &FuzzSettings) -> Result<FuzzReport> {
    let c = Curvature::new(st.kappa, st.dim)?;
    if !(st.scaled_m > 0.0 && st.scaled_m < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("M√κ = {} outside (0, π/2)", st.scaled_m)));
    }
    let m = st.scaled_m / c.sqrt_kappa();
    let ball = ConvexBall::new(ModelPoint::pole(st.dim), m / 2.0, c)?;
    let seed = campaign_seed(st, oracle);
    let outcomes: Vec<Trial> = (0..st.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut rejected = 0;
            for _ in 0..MAX_ATTEMPTS {
                match attempt(oracle, &ball, m, &mut rng) {
                    Ok(Some(mut sample)) => {
                        sample.witness.trial = i;
                        return Trial::Accepted { sample, rejected };
                    }
                    _ => rejected += 1,
                }
            }
            Trial::Skipped { rejected }
        })
        .collect();
    let tol = oracle.tolerance();
    let mut rep = FuzzReport {
        oracle: oracle.name(),
        seed: st.seed,
        kappa: st.kappa,
        scaled_m: st.scaled_m,
        tolerance: tol,
        trials: st.trials,
        accepted: 0,
        skipped: 0,
        rejected: 0,
        instances: 0,
        violations: 0,
        max_residual: f64::NEG_INFINITY,
        worst: None,
    };
    for t in outcomes {
        match t {
            Trial::Accepted { sample, rejected } => {
                rep.accepted += 1;
                rep.rejected += rejected;
                rep.instances += sample.instances;
                // NaN must count against the oracle
                let r = if sample.residual.is_nan() { f64::INFINITY } else { sample.residual };
                if r > tol {
                    rep.violations += 1;
                }
                if r > rep.max_residual {
                    rep.max_residual = r;
                    rep.worst = Some(sample.witness);
                }
            }
            Trial::Skipped { rejected } => {
                rep.skipped += 1;
                rep.rejected += rejected;
            }
        }
    }
    Ok(rep)
}

fn triangle(ball: &ConvexBall, m: f64, rng: &mut ChaCha8Rng) -> Result<TriangleConfig> {
    let (x, y, z) = (ball.sample(rng), ball.sample(rng), ball.sample(rng));
    TriangleConfig::new(x, y, z, rng.gen(), rng.gen(), m, ball.curvature())
}

fn tri_witness(cfg: &TriangleConfig) -> Witness {
    Witness { trial: 0, points: cfg.coords(), params: BTreeMap::from([("r", cfg.r), ("s", cfg.s)]) }
}

fn one(residual: f64, witness: Witness) -> Option<Sample> {
    Some(Sample { residual, instances: 1, witness })
}

fn random_map(ball: &ConvexBall, rng: &mut ChaCha8Rng) -> Result<(NonexpansiveMap, &'static str)> {
    let rot = |rng: &mut ChaCha8Rng| NonexpansiveMap::rotation(ball, rng.gen_range(-3.0..3.0));
    let pull = |rng: &mut ChaCha8Rng| NonexpansiveMap::pull(ball, &ball.sample(rng), rng.gen_range(0.05..0.95));
    Ok(match rng.gen_range(0..3) {
        0 => (rot(rng)?, "rotation"),
        1 => (pull(rng)?, "pull"),
        _ => (NonexpansiveMap::composition(&[rot(rng)?, pull(rng)?])?, "composition"),
    })
}

fn random_schedule(rng: &mut ChaCha8Rng) -> ModuliSchedule {
    if rng.gen_bool(0.5) {
        ModuliSchedule::harmonic()
    } else {
        ModuliSchedule::inverse_sqrt()
    }
}

fn attempt(o: Oracle, ball: &ConvexBall, m: f64, rng: &mut ChaCha8Rng) -> Result<Option<Sample>> {
    let c = ball.curvature();
    match o {
        Oracle::SProducts => {
            let cfg = triangle(ball, m, rng)?;
            let e = oracles::check_s_inequalities(&cfg);
            Ok(one(e.e14.max(e.e15).max(e.e17).max(e.e18), tri_witness(&cfg)))
        }
        Oracle::SIdentity => {
            let cfg = triangle(ball, m, rng)?;
            Ok(one(oracles::check_s_inequalities(&cfg).e16.abs(), tri_witness(&cfg)))
        }
        Oracle::SelftestFlipped => {
            let cfg = triangle(ball, m, rng)?;
            Ok(one(-oracles::check_s_inequalities(&cfg).e14, tri_witness(&cfg)))
        }
        Oracle::ComparisonSc | Oracle::ComparisonSine | Oracle::ComparisonUniform => {
            let cfg = triangle(ball, m, rng)?;
            let r = oracles::check_comparison_props(&cfg);
            let v = match o {
                Oracle::ComparisonSc => r.sc_form,
                Oracle::ComparisonSine => r.sine_form,
                _ => r.uniform_form,
            };
            Ok(one(v, tri_witness(&cfg)))
        }
        Oracle::Contraction => {
            let cfg = triangle(ball, m, rng)?;
            let t = rng.gen_range(1e-6..1.0 - 1e-6);
            let r = oracles::check_lemma_contraction(&cfg.x, &cfg.y, &cfg.z, t, m, c)?;
            let mut w = tri_witness(&cfg);
            w.params.insert("t", t);
            Ok(one(r.scaled.max(r.plain), w))
        }
        Oracle::FootOfSegment => {
            let cfg = triangle(ball, m, rng)?;
            let a = rng.gen::<f64>();
            let w = geodesic_point(&cfg.x, &cfg.z, a, c)?;
            match oracles::check_lemma_meta1(&cfg.x, &cfg.y, &cfg.z, &w, c)? {
                Meta1Verdict::Skipped { .. } => Ok(None),
                Meta1Verdict::Checked { distance, angle } => {
                    // the angle carries its own looser tolerance
                    let ang = angle.map_or(f64::NEG_INFINITY, |v| v - oracles::ANGLE_TOL + oracles::TRIG_TOL);
                    let points = vec![cfg.x.coords().to_vec(), cfg.y.coords().to_vec(), cfg.z.coords().to_vec(), w.coords().to_vec()];
                    Ok(one(distance.max(ang), Witness { trial: 0, points, params: BTreeMap::from([("a", a)]) }))
                }
            }
        }
        Oracle::RatioBounds => {
            let cfg = triangle(ball, m, rng)?;
            if !(cfg.s > 0.0 && cfg.s < 1.0) {
                return Ok(None);
            }
            let r = oracles::check_lemma_e(&cfg)?;
            // strict positivity failing is a violation of any size
            let pos = if r.positivity < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
            Ok(one(r.worst().max(pos), tri_witness(&cfg)))
        }
        Oracle::YvBound | Oracle::YvBoundNearQ => {
            let cfg = triangle(ball, m, rng)?;
            if !(cfg.s > 0.0 && cfg.s < 1.0) {
                return Ok(None);
            }
            let q = ball.sample(rng);
            let r = oracles::check_prop47(&cfg, &q)?;
            let v = if o == Oracle::YvBound { Some(r.first) } else { r.second };
            Ok(v.and_then(|v| {
                let mut w = tri_witness(&cfg);
                w.points.push(q.coords().to_vec());
                one(v, w)
            }))
        }
        Oracle::SinSum => {
            let pi = std::f64::consts::PI;
            let (a, b) = (rng.gen_range(0.0..=pi), rng.gen_range(0.0..=pi));
            let wit = Witness { trial: 0, points: vec![], params: BTreeMap::from([("a", a), ("b", b)]) };
            Ok(one(oracles::check_sin_sum(a, b)?, wit))
        }
        Oracle::GammaFirst | Oracle::GammaSecond | Oracle::GammaRecursion => {
            let (map, kind) = random_map(ball, rng)?;
            let u = ball.sample(rng);
            let sched = random_schedule(rng);
            let i = rng.gen_range(1..=24u32);
            let t = 1.0 / (i as f64 + 1.0);
            let tr = iterate(&u, &map, &sched, TRACE_LEN)?;
            let bp = solve_fixed_point(&u, t, &map, 1e-13 * m)?;
            let rep = oracles::check_prop71(&tr, &bp, m, c)?;
            let (v, n) = match o {
                Oracle::GammaFirst => match rep.first {
                    Some(v) => (v, rep.with_nonnegative_gamma),
                    None => return Ok(None),
                },
                Oracle::GammaSecond => (rep.second, rep.checked),
                _ => (rep.recursion, rep.checked),
            };
            let mut w = trace_witness(&u, &map, kind, &sched);
            w.params.insert("t", t);
            Ok(Some(Sample { residual: v, instances: n as u64, witness: w }))
        }
        Oracle::GammaShift => {
            let (map, kind) = random_map(ball, rng)?;
            let u = ball.sample(rng);
            let sched = random_schedule(rng);
            let (i, j) = (rng.gen_range(0..=12usize), rng.gen_range(0..=12usize));
            let delta = rng.gen_range(1e-6..1.0);
            let fam = resolvent_family(&u, &map, i.max(j) as u64, 1e-13 * m)?;
            let tr = iterate(&u, &map, &sched, TRACE_LEN)?;
            match oracles::check_lemma73(&fam, i, j, delta, &tr, m)? {
                Lemma73Verdict::Skipped => Ok(None),
                Lemma73Verdict::Checked { worst, indices } => {
                    let mut w = trace_witness(&u, &map, kind, &sched);
                    w.params.extend([("i", i as f64), ("j", j as f64), ("delta", delta)]);
                    Ok(Some(Sample { residual: worst, instances: indices as u64, witness: w }))
                }
            }
        }
        Oracle::RecurrenceWindow => recurrence_trial(rng),
    }
}

fn trace_witness(u: &ModelPoint, map: &NonexpansiveMap, kind: &'static str, s: &ModuliSchedule) -> Witness {
    let harmonic = *s == ModuliSchedule::harmonic();
    let mut params = BTreeMap::from([("harmonic_schedule", if harmonic { 1.0 } else { 0.0 })]);
    params.insert(
        match kind {
            "rotation" => "map_rotation",
            "pull" => "map_pull",
            _ => "map_composition",
        },
        map.lipschitz_bound(),
    );
    Witness { trial: 0, points: vec![u.coords().to_vec()], params }
}

/// Synthetic instance: α_n ≡ 1/k, t_n ≤ ε/3 after ψ, s driven by the
/// recurrence with a random share of the Δ slack.
fn recurrence_trial(rng: &mut ChaCha8Rng) -> Result<Option<Sample>> {
    let k = rng.gen_range(1..=4u64);
    let eps = rng.gen_range(0.05..1.9);
    let l = rng.gen_range(0.1..1.0);
    let psi_v = rng.gen_range(1..=20u64);
    let theta = DivergenceRate::Polynomial { coef: k, shift: 0, power: 1, divisor: 1 };
    let psi = EpsModulus::Constant { value: psi_v };
    let g = GFunction::Affine { a: rng.gen_range(0..=3), b: rng.gen_range(0..=10) };
    let ctx = Ctx::new(Budget::default());
    let bd = aoyama_theta_delta(eps, l, &theta, &psi, &g, &ctx)?;
    let big = bd.theta.to_u64().ok_or_else(|| Error::Exhausted("Θ too large".into()))?;
    let end = big + g.eval_u64(big);
    let delta = bd.delta.to_f64();
    let alpha = 1.0 / k as f64;
    let n = end as usize + 1;
    let mut s = vec![rng.gen_range(0.0..=l)];
    let mut t = Vec::with_capacity(n);
    for idx in 0..n {
        let cap = if idx as u64 + 1 >= psi_v { eps / 3.0 } else { l };
        let tn = rng.gen_range(-l..=cap.min(l));
        t.push(tn);
        if idx + 1 < n {
            let next = (1.0 - alpha) * s[idx] + alpha * tn + delta * rng.gen::<f64>();
            s.push(next.clamp(0.0, l));
        }
    }
    let inst = RecurrenceInstance { s, alpha: vec![alpha; n], t };
    let v = oracles::check_aoyama(&inst, &bd, l, &theta, &g, eps)?;
    let params = BTreeMap::from([("k", k as f64), ("eps", eps), ("L", l), ("psi", psi_v as f64), ("theta", big as f64)]);
    let instances = v.window_end - v.window_start + 1;
    Ok(Some(Sample { residual: v.max_in_window - eps, instances, witness: Witness { trial: 0, points: vec![], params } }))
}
