//! Acceptance suite: one PASS/FAIL line per criterion, with the tolerances
//! and runtime limits pinned below. Values are cross-checked against the
//! naive evaluator in `common` wherever one exists.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common as r;
use halpern_catk::bigcount::{BigCount, Budget, Ctx};
use halpern_catk::browder::{empirical_browder_metastability, resolvent_family, solve_fixed_point};
use halpern_catk::config::ExperimentConfig;
use halpern_catk::domain::{ConvexBall, NonexpansiveMap};
use halpern_catk::experiments::{run_meta, Verdict};
use halpern_catk::fuzz::{run_campaign, FuzzSettings, Oracle};
use halpern_catk::gfunction::GFunction;
use halpern_catk::halpern::{empirical_metastability, iterate};
use halpern_catk::model_space::{Curvature, ModelPoint};
use halpern_catk::oracles::{check_aoyama, RecurrenceInstance};
use halpern_catk::rates::{aoyama_theta_delta, browder_k, limsup_rate, phi, phi_tilde, psi_harmonic, sigma_sequence_lemma};
use halpern_catk::rng::trial_rng;
use halpern_catk::schedule::{DivergenceRate, EpsModulus, Lambda, ModuliSchedule};
use halpern_catk::tower::{sigma_harmonic, table1_tower, MetastabilityTower, OrbitStatus, TowerOptions};
use rand::Rng;

const RECURRENCE_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-9;
const FUZZ_ACCEPTED_PER_KAPPA: u64 = 10_000;
const FUZZ_KAPPAS: [f64; 3] = [0.5, 1.0, 4.0];
const FUZZ_SCALED_M: [f64; 3] = [0.2, 0.8, 1.4];
const IDENTITY_CONFIGS: u64 = 100_000;
const AOYAMA_THETA_CAP: u64 = 100_000;
const TOY_VALUE_CAP: u128 = 1_000_000_000;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, notes: Vec::new() }
    }
}

fn ctx() -> Ctx {
    Ctx::new(Budget::default())
}

fn unit() -> Curvature {
    Curvature::unit_sphere()
}

fn ball(radius: f64, c: Curvature) -> ConvexBall {
    ConvexBall::new(ModelPoint::pole(c.dim()), radius, c).unwrap()
}

fn nat(v: &BigCount) -> Option<u128> {
    v.to_u64().map(u128::from)
}

/// Smallest n with seq[k] ≤ ε for every k ≥ n.
fn stable_index(seq: &[f64], eps: f64) -> usize {
    seq.iter().rposition(|&v| v > eps).map_or(0, |k| k + 1)
}

fn catalog_maps(b: &ConvexBall) -> Vec<(&'static str, NonexpansiveMap)> {
    let anchor = b.point_at(&[-0.6, 0.8, 0.0], 0.6 * b.radius());
    vec![
        ("pull(0.5)", NonexpansiveMap::pull(b, &anchor, 0.5).unwrap()),
        ("rotation(0.3)", NonexpansiveMap::rotation(b, 0.3).unwrap()),
    ]
}

// ------------------------------------------------------------------ 1

fn golden_values() -> Outcome {
    let (c, ctx, m) = (unit(), ctx(), 0.1);
    let h = ModuliSchedule::harmonic();
    let rh = r::harmonic();
    let rows = [
        ("Φ̃(0.2)", nat(&phi_tilde(0.2, &c, m, &h.gamma, &h.theta, &ctx).unwrap()), r::phi_tilde(0.2, 1.0, m, &rh), 1024),
        ("Φ(0.2)", nat(&phi(0.2, &c, m, &h.gamma, &h.theta, &h.alpha, &ctx).unwrap()), r::phi(0.2, 1.0, m, &rh), 16384),
        ("Ψ(0.5)", nat(&psi_harmonic(0.5, &c, m, &ctx).unwrap()), r::psi_harmonic(0.5, 1.0, m), 65536),
        ("θ(1)", nat(&h.theta.eval_u64(1, &ctx.budget)), (rh.theta)(1), 16),
        ("Σ(ε=1,P=1)", nat(&sigma_sequence_lemma(1.0, 1.0, &h.gamma, &h.theta, &ctx).unwrap()), r::sequence_lemma(1.0, 1.0, &rh), 257),
    ];
    let pass = rows.iter().all(|(_, lib, slow, want)| *lib == Some(*want) && slow == want);
    let detail = rows
        .iter()
        .map(|(n, lib, slow, _)| format!("{n}={} (slow {slow})", lib.map_or("?".into(), |v| v.to_string())))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(pass, detail)
}

// ------------------------------------------------------------------ 2

fn asymptotic_regularity() -> Outcome {
    const HORIZON: u64 = 300_000;
    let eps_grid = [0.09, 0.2, 0.4, 0.8];
    let c = unit();
    let b = ball(0.05, c);
    let m = b.diameter_bound();
    let (h, rh, ctx) = (ModuliSchedule::harmonic(), r::harmonic(), ctx());
    let mut pass = true;
    let mut bounds = Vec::new();
    for &eps in &eps_grid {
        let pt = nat(&phi_tilde(eps, &c, m, &h.gamma, &h.theta, &ctx).unwrap()).unwrap();
        let p = phi(eps, &c, m, &h.gamma, &h.theta, &h.alpha, &ctx).unwrap();
        pass &= pt == r::phi_tilde(eps, 1.0, m, &rh);
        let p = nat(&p);
        if let Some(p) = p {
            pass &= p == r::phi(eps, 1.0, m, &rh);
        }
        bounds.push((eps, pt, p));
    }
    let mut starts: Vec<ModelPoint> = (0..3).map(|i| b.sample_boundary(&mut trial_rng(2, i))).collect();
    starts.push(b.point_at(&[0.6, -0.8, 0.0], 0.05));
    let (mut checks, mut exceptions, mut nonzero) = (0, 0, 0);
    for (_, map) in catalog_maps(&b) {
        for u in &starts {
            let tr = iterate(u, &map, &h, HORIZON).unwrap();
            let pts = tr.points().unwrap();
            let steps: Vec<f64> = pts.windows(2).map(|w| r::dist(w[0].coords(), w[1].coords(), 1.0)).collect();
            let residuals: Vec<f64> =
                pts.iter().map(|p| r::dist(p.coords(), map.apply(p).unwrap().coords(), 1.0)).collect();
            for &(eps, pt, p) in &bounds {
                if pt <= HORIZON as u128 {
                    let n = stable_index(&steps, eps) as u128;
                    checks += 1;
                    exceptions += (n > pt) as u32;
                    nonzero += (n > 0) as u32;
                }
                if let Some(p) = p.filter(|&p| p <= HORIZON as u128) {
                    let n = stable_index(&residuals, eps) as u128;
                    checks += 1;
                    exceptions += (n > p) as u32;
                    nonzero += (n > 0) as u32;
                }
            }
        }
    }
    pass &= exceptions == 0 && checks > 0;
    let table = bounds
        .iter()
        .map(|(e, pt, p)| format!("ε={e}: Φ̃={pt} Φ={}", p.map_or("beyond u64".into(), |v| v.to_string())))
        .collect::<Vec<_>>()
        .join("; ");
    let mut o = Outcome::new(pass, format!("{checks} index checks, {exceptions} exceptions, {nonzero} nonzero indices"));
    o.notes.push(table);
    o
}

// ------------------------------------------------------------------ 3

fn recurrence_residual() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut traces = 0;
    for kappa in [1.0, 4.0] {
        let c = Curvature::new(kappa, 2).unwrap();
        for scaled_m in [0.1, 1.0] {
            let b = ball(scaled_m / (2.0 * c.sqrt_kappa()), c);
            let m = b.diameter_bound();
            let x = m * c.sqrt_kappa();
            for (_, map) in catalog_maps(&b) {
                for (s, lambda) in [
                    (ModuliSchedule::harmonic(), (|n: u64| 1.0 / (n as f64 + 1.0)) as fn(u64) -> f64),
                    (ModuliSchedule::inverse_sqrt(), |n: u64| 1.0 / (n as f64 + 1.0).sqrt()),
                ] {
                    let u = b.sample_boundary(&mut trial_rng(3, traces));
                    let tr = iterate(&u, &map, &s, 1000).unwrap();
                    let pts = tr.points().unwrap();
                    let d = |i: usize| r::dist(pts[i].coords(), pts[i + 1].coords(), kappa);
                    for n in 1..1000usize {
                        let (l1, l0) = (lambda(n as u64 + 1), lambda(n as u64));
                        let mu = 1.0 - ((1.0 - l1) * x).sin() / x.sin();
                        worst = worst.max(d(n) - (1.0 - mu) * d(n - 1) - m * (l1 - l0).abs());
                    }
                    worst = worst.max(tr.check_recurrence(m, &c).unwrap());
                    traces += 1;
                }
            }
        }
    }
    Outcome::new(worst <= RECURRENCE_TOL, format!("{traces} traces of 1000 steps, max residual {worst:.3e} (tolerance {RECURRENCE_TOL:e})"))
}

// ------------------------------------------------------------------ 4

fn fuzz_campaigns() -> Outcome {
    let per_cell = FUZZ_ACCEPTED_PER_KAPPA.div_ceil(FUZZ_SCALED_M.len() as u64);
    let mut pass = true;
    let mut notes = Vec::new();
    let mut total = 0;
    for oracle in Oracle::ALL {
        let mut line = format!("{:<19} tol {:.0e}:", oracle.name(), oracle.tolerance());
        let mut worst = f64::NEG_INFINITY;
        let mut violations = 0;
        for kappa in FUZZ_KAPPAS {
            let (mut acc, mut skip, mut rej) = (0, 0, 0);
            for scaled_m in FUZZ_SCALED_M {
                let st = FuzzSettings { seed: 4, kappa, scaled_m, dim: 2, trials: per_cell };
                let rep = run_campaign(oracle, &st).unwrap();
                acc += rep.accepted;
                skip += rep.skipped;
                rej += rep.rejected;
                violations += rep.violations;
                worst = worst.max(rep.max_residual);
            }
            pass &= acc >= FUZZ_ACCEPTED_PER_KAPPA;
            total += acc;
            line += &format!(" κ={kappa} accepted {acc} skipped {skip} rejected {rej};");
        }
        pass &= violations == 0;
        line += &format!(" violations {violations}, max residual {worst:.2e}");
        notes.push(line);
    }
    // the harness must notice a reversed inequality
    let flipped = run_campaign(Oracle::SelftestFlipped, &FuzzSettings { seed: 4, kappa: 1.0, scaled_m: 0.8, dim: 2, trials: 200 }).unwrap();
    pass &= flipped.violations > 0;
    notes.push(format!("self-test with a reversed inequality: {} of {} flagged", flipped.violations, flipped.accepted));
    let mut o = Outcome::new(pass, format!("{} oracles, {total} accepted configurations", Oracle::ALL.len()));
    o.notes = notes;
    o
}

// ------------------------------------------------------------------ 5

/// Random point of the ball of radius ρ about the pole of the radius-1/√κ sphere.
fn ball_point<R: Rng>(rng: &mut R, rho: f64, kappa: f64) -> Vec<f64> {
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let a = rng.gen_range(0.0..rho) * kappa.sqrt();
    vec![a.sin() * phi.cos(), a.sin() * phi.sin(), a.cos()]
}

fn s_identity() -> Outcome {
    let mut lib_worst = 0.0f64;
    let mut lib_accepted = 0;
    for kappa in FUZZ_KAPPAS {
        let st = FuzzSettings { seed: 5, kappa, scaled_m: 1.4, dim: 2, trials: IDENTITY_CONFIGS };
        let rep = run_campaign(Oracle::SIdentity, &st).unwrap();
        lib_worst = lib_worst.max(rep.max_residual);
        lib_accepted += rep.accepted;
    }
    let mut rng = trial_rng(55, 0);
    let mut slow_worst = 0.0f64;
    let mut n = 0;
    while n < IDENTITY_CONFIGS {
        let kappa = FUZZ_KAPPAS[(n % 3) as usize];
        let x_s = FUZZ_SCALED_M[((n / 3) % 3) as usize];
        let rho = x_s / (2.0 * kappa.sqrt());
        let (x, y, z) = (ball_point(&mut rng, rho, kappa), ball_point(&mut rng, rho, kappa), ball_point(&mut rng, rho, kappa));
        let d = |a: &[f64], b: &[f64]| r::dist(a, b, kappa) * kappa.sqrt();
        if d(&x, &y) < 1e-6 || d(&x, &z) < 1e-6 || d(&y, &z) < 1e-6 {
            continue;
        }
        let w = r::arc_point(&x, &y, rng.gen_range(0.0..1.0));
        let v = r::arc_point(&x, &z, rng.gen_range(0.0..1.0));
        let (xw, xv, xy, xz, yw, zv) = (d(&x, &w), d(&x, &v), d(&x, &y), d(&x, &z), d(&y, &w), d(&z, &v));
        let s1 = xw.sin() * xv.sin();
        let s2 = xy.sin() * xz.sin();
        let s4 = yw.sin() * xz.sin();
        let s5 = xw.sin() * zv.sin();
        let c1 = xw.cos() * xv.cos();
        let c2 = xy.cos() * xz.cos();
        slow_worst = slow_worst.max((s2 * c1 - s1 * c2 - s4 * xv.cos() - s5 * xy.cos()).abs());
        n += 1;
    }
    let pass = lib_worst <= IDENTITY_TOL && slow_worst <= IDENTITY_TOL && lib_accepted == 3 * IDENTITY_CONFIGS;
    Outcome::new(
        pass,
        format!(
            "library: {lib_accepted} configurations, max |residual| {lib_worst:.2e}; independent: {n} configurations, max |residual| {slow_worst:.2e} (tolerance {IDENTITY_TOL:e})"
        ),
    )
}

// ------------------------------------------------------------------ 6

fn browder_bound() -> Outcome {
    let c = unit();
    let b = ball(0.05, c);
    let m = b.diameter_bound();
    let ctx = ctx();
    let one = GFunction::Constant { value: 1 };
    let k = nat(&browder_k(0.5, &one, m, &c, &ctx).unwrap());
    let mut pass = k == Some(1) && r::browder_k(0.5, 1.0, m, &|_| 1) == 1;
    let mut emp = Vec::new();
    let tol = 1e-11 * m;
    for (i, (name, map)) in catalog_maps(&b).into_iter().enumerate() {
        let u = b.sample_boundary(&mut trial_rng(6, i as u64));
        let fam = resolvent_family(&u, &map, 32, tol).unwrap();
        let w = empirical_browder_metastability(&fam, 0.5, &one, &c, tol).unwrap();
        let window = &fam[w.k as usize..=w.window_end as usize];
        let spread = window
            .iter()
            .flat_map(|p| window.iter().map(move |q| r::dist(p.z.coords(), q.z.coords(), 1.0)))
            .fold(0.0, f64::max);
        pass &= w.k <= 1 && spread <= 0.5;
        emp.push(format!("{name} K_emp={}", w.k));
    }
    // g(n) = n + 1: g̃(n) = 2n + 1, so g̃^k(0) = 2^k − 1
    let g = GFunction::Affine { a: 1, b: 1 };
    let mut closed = true;
    for kk in 0..=20u32 {
        let want = (1u128 << kk) - 1;
        let mut n = 0u128;
        for _ in 0..kk {
            n += n + 1;
        }
        closed &= nat(&g.tilde_iterate(&BigCount::from_u64(kk as u64), &ctx.budget)) == Some(want) && n == want;
    }
    // the same through K(ε, g, M), choosing ε so the exponent is each e ≤ 20
    let x = m;
    let mut via_k = 0;
    for e in 1..=20u32 {
        let eps = (1.0 - x * x.tan() / (e as f64 - 0.5)).acos();
        let want = (1u128 << e) - 1;
        let lib = nat(&browder_k(eps, &g, m, &c, &ctx).unwrap());
        let slow = r::browder_k(eps, 1.0, m, &|n| n + 1);
        closed &= lib == Some(want) && slow == want;
        via_k += 1;
    }
    pass &= closed;
    Outcome::new(
        pass,
        format!("K(0.5, 1, 0.1)={}, {}; g(n)=n+1 closed form for k ≤ 20 and {via_k} exponents through K: {}", k.unwrap_or(0), emp.join(", "), if closed { "match" } else { "mismatch" }),
    )
}

// ------------------------------------------------------------------ 7

fn tower_json(rep: &halpern_catk::tower::RateTowerReport) -> serde_json::Value {
    let mut v = serde_json::to_value(rep).unwrap();
    v.as_object_mut().unwrap().remove("family");
    v
}

struct Toy {
    name: &'static str,
    eps: f64,
    kappa: f64,
    m: f64,
    moduli: ModuliSchedule,
    slow: r::Moduli,
    g: GFunction,
    slow_g: fn(r::Nat) -> r::Nat,
}

fn toys() -> Vec<Toy> {
    let table = vec![2, 3, 5, 4, 7, 9, 8, 12];
    let table_slow = table.clone();
    vec![
        Toy {
            name: "identity θ, constant moduli",
            eps: 1.9,
            kappa: 1.0,
            m: 0.001,
            moduli: ModuliSchedule::custom(
                Lambda::Harmonic,
                EpsModulus::Constant { value: 1 },
                EpsModulus::Constant { value: 1 },
                DivergenceRate::identity(),
            )
            .unwrap(),
            slow: r::Moduli { theta: Box::new(|n| n), alpha: Box::new(|_| 1), gamma: Box::new(|_| 1) },
            g: GFunction::identity(),
            slow_g: |n| n,
        },
        Toy {
            name: "affine θ, reciprocal α",
            eps: 0.9,
            kappa: 4.0,
            m: 0.05,
            moduli: ModuliSchedule::custom(
                Lambda::Harmonic,
                EpsModulus::Reciprocal { scale: 1e-3, power: 1 },
                EpsModulus::Constant { value: 2 },
                DivergenceRate::Polynomial { coef: 2, shift: 1, power: 1, divisor: 1 },
            )
            .unwrap(),
            slow: r::Moduli {
                theta: Box::new(|n| 2 * (n + 1)),
                alpha: Box::new(|e| r::ceil_nat(1e-3 / e).max(1)),
                gamma: Box::new(|_| 2),
            },
            g: GFunction::Constant { value: 3 },
            slow_g: |_| 3,
        },
        Toy {
            name: "tabulated θ, reciprocal γ",
            eps: 1.5,
            kappa: 1.0,
            m: 0.01,
            moduli: ModuliSchedule::custom(
                Lambda::Harmonic,
                EpsModulus::Constant { value: 1 },
                EpsModulus::Reciprocal { scale: 1e-2, power: 1 },
                DivergenceRate::Table {
                    values: table,
                    tail: Box::new(DivergenceRate::Polynomial { coef: 3, shift: 0, power: 1, divisor: 2 }),
                },
            )
            .unwrap(),
            slow: r::Moduli {
                theta: Box::new(move |n| match n {
                    0 => table_slow[0] as r::Nat,
                    n if n as usize <= table_slow.len() => table_slow[n as usize - 1] as r::Nat,
                    n => (3 * n).div_ceil(2),
                }),
                alpha: Box::new(|_| 1),
                gamma: Box::new(|e| r::ceil_nat(1e-2 / e).max(1)),
            },
            g: GFunction::Affine { a: 1, b: 2 },
            slow_g: |n| n + 2,
        },
    ]
}

fn tower_consistency() -> Outcome {
    let opts = TowerOptions::default();
    let mut pass = true;
    let mut notes = Vec::new();

    // harmonic closed forms against the general route
    let harmonic_cases = [
        (0.5, 1.0, 0.1, GFunction::identity()),
        (1.0, 1.0, 0.1, GFunction::Constant { value: 1 }),
        (1.9, 1.0, 0.001, GFunction::identity()),
        (1.2, 4.0, 0.15, GFunction::Affine { a: 2, b: 1 }),
    ];
    let mut agree = 0;
    for (eps, kappa, m, g) in &harmonic_cases {
        let c = Curvature::new(*kappa, 2).unwrap();
        let a = sigma_harmonic(*eps, g, &c, *m, opts).unwrap();
        let b = table1_tower(*eps, g, &c, *m, &ModuliSchedule::harmonic(), opts).unwrap();
        let same = tower_json(&a) == tower_json(&b);
        agree += same as u32;
        let t = MetastabilityTower::harmonic(*eps, g, &c, *m, opts).unwrap();
        let e4 = t.e4();
        let checks = [
            ("field agreement", same),
            ("ε₀ > 0", a.eps0 > 0.0),
            ("orbit Δ* > 0", a.orbit.iter().all(|e| e.delta_star.is_positive())),
            ("Θ ≥ χ*", a.orbit.iter().all(|e| e.theta >= e.chi_star)),
            ("f̃*(i) > i", a.orbit.iter().all(|e| e.f_tilde_star > e.i)),
            ("Δ*_i > 0 for i < 32", (0..32u64).map(BigCount::from_u64).all(|i| t.delta_star(&i, e4).is_positive())),
        ];
        let bad: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
        if !bad.is_empty() {
            pass = false;
            notes.push(format!("harmonic ε={eps} κ={kappa} M={m} g={g:?}: failed {}", bad.join(", ")));
        }
    }
    notes.push(format!("harmonic closed forms ≡ general moduli on {agree}/{} configurations field by field", harmonic_cases.len()));

    // toy moduli against the naive evaluator
    let mut largest = 0u128;
    for toy in toys() {
        let c = Curvature::new(toy.kappa, 2).unwrap();
        let rep = table1_tower(toy.eps, &toy.g, &c, toy.m, &toy.moduli, opts).unwrap();
        let slow = r::TowerInput { eps: toy.eps, kappa: toy.kappa, m: toy.m, md: &toy.slow, g: &toy.slow_g }.evaluate();
        let orbit_ok = rep.orbit.iter().all(|e| {
            let s = e.step as usize;
            nat(&e.i) == Some(slow.orbit[s]) && nat(&e.f_tilde_star) == Some(slow.orbit[s + 1])
        });
        let checks = [
            ("ε₀", (rep.eps0 - slow.eps0).abs() <= 1e-15 * slow.eps0),
            ("⌈1/ε₀⌉", nat(&rep.ceil_inv_eps0) == Some(slow.k0)),
            ("B", nat(&rep.b) == Some(slow.b)),
            ("S", rep.s as i128 == slow.s),
            ("T", rep.t as i128 == slow.t),
            ("orbit", orbit_ok && rep.orbit_status == OrbitStatus::Complete),
            ("f̃*^B(0)", nat(&rep.orbit_end) == slow.orbit.last().copied()),
            ("Γ argument", nat(&rep.gamma_argument) == Some(slow.gamma_arg)),
            ("Γ", nat(&rep.gamma) == Some(slow.gamma)),
            ("θ⁺", nat(&rep.theta_plus) == Some(slow.theta_plus)),
            ("Σ", nat(&rep.sigma) == Some(slow.sigma) && !rep.sigma_is_estimate),
        ];
        let bad: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
        let peak = [slow.b, slow.gamma_arg, slow.gamma, slow.theta_plus, slow.sigma, *slow.orbit.last().unwrap()]
            .into_iter()
            .max()
            .unwrap();
        largest = largest.max(peak);
        pass &= bad.is_empty() && peak < TOY_VALUE_CAP && rep.eps0 > 0.0;
        pass &= rep.orbit.iter().all(|e| e.delta_star.is_positive());
        // f̃* as a function of i, and along the orbit
        let t = MetastabilityTower::new(toy.eps, &toy.g, &c, toy.m, &toy.moduli, opts).unwrap();
        let vals: Vec<BigCount> = (0..200u64).map(|i| t.f_tilde_star(&BigCount::from_u64(i))).collect();
        let orbit_strict = slow.orbit.windows(2).all(|w| w[1] > w[0]) && vals.iter().enumerate().all(|(i, v)| *v > BigCount::from_u64(i as u64));
        let pointwise_weak = vals.windows(2).all(|w| w[1] >= w[0]);
        let pointwise_strict = vals.windows(2).all(|w| w[1] > w[0]);
        pass &= orbit_strict && pointwise_weak;
        notes.push(format!(
            "{}: B={} Σ={} mode {:?}, f̃*(i) > i and orbit strictly increasing: {orbit_strict}, f̃* nondecreasing in i: {pointwise_weak} (strictly: {pointwise_strict}), mismatches: {}",
            toy.name,
            slow.b,
            slow.sigma,
            rep.gamma_mode,
            if bad.is_empty() { "none".to_string() } else { bad.join(", ") }
        ));
    }
    let mut o = Outcome::new(pass, format!("harmonic agreement {agree}/{}, toy configurations peak value {largest}", harmonic_cases.len()));
    o.notes = notes;
    o
}

// ------------------------------------------------------------------ 8

fn dual_path() -> Outcome {
    let (c, m, ctx) = (unit(), 0.1, ctx());
    let x = m;
    let eps_grid = [0.3, 0.6, 0.9, 1.2, 1.5];
    let t_grid = [0.2, 0.35, 0.5, 0.65, 0.8];
    let mut cells = 0;
    let mut equal = 0;
    for (s, slow) in [(ModuliSchedule::harmonic(), r::harmonic()), (ModuliSchedule::inverse_sqrt(), r::inverse_sqrt())] {
        for &eps in &eps_grid {
            for &t in &t_grid {
                let a = limsup_rate(eps, &c, m, t, &s.gamma, &s.theta, &s.alpha, &ctx).unwrap();
                let b = phi(x.cos() * t * eps, &c, m, &s.gamma, &s.theta, &s.alpha, &ctx).unwrap();
                let ref_a = r::limsup(eps, 1.0, m, t, &slow);
                let ref_b = r::phi(x.cos() * t * eps, 1.0, m, &slow);
                cells += 1;
                equal += (a == b && nat(&a) == Some(ref_a) && ref_a == ref_b) as u32;
            }
        }
    }
    Outcome::new(equal == cells, format!("{equal}/{cells} grid cells equal over two schedules (5×5 each)"))
}

// ------------------------------------------------------------------ 9

struct AoyamaTally {
    tested: u32,
    held: u32,
    out_of_scope: u32,
    nonvacuous: u32,
}

fn synthetic_recurrences(tally: &mut AoyamaTally) -> bool {
    let ctx = ctx();
    let mut ok = true;
    let gs = [GFunction::Constant { value: 0 }, GFunction::Constant { value: 10 }, GFunction::identity()];
    let slow_gs: [fn(r::Nat) -> r::Nat; 3] = [|_| 0, |_| 10, |n| n];
    // constant α = 1/d with θ(n) = d·n, and α_n = 1/(n+1) with θ(n) = 3^(n+1)
    let families: Vec<(String, DivergenceRate, Box<dyn Fn(usize) -> f64>, Box<dyn Fn(r::Nat) -> r::Nat>)> = {
        let mut v: Vec<(String, DivergenceRate, Box<dyn Fn(usize) -> f64>, Box<dyn Fn(r::Nat) -> r::Nat>)> = Vec::new();
        for d in [1u64, 2, 4] {
            v.push((
                format!("α=1/{d}"),
                DivergenceRate::Polynomial { coef: d, shift: 0, power: 1, divisor: 1 },
                Box::new(move |_| 1.0 / d as f64),
                Box::new(move |n| d as r::Nat * n),
            ));
        }
        v.push((
            "α_n=1/(n+1)".into(),
            DivergenceRate::Exponential { base: 3, shift: 1 },
            Box::new(|k| 1.0 / (k as f64 + 2.0)),
            Box::new(|n| 3u128.pow(n as u32 + 1)),
        ));
        v
    };
    for (eps, l) in [(0.3, 1.0), (0.1, 1.0), (0.5, 2.0), (1.0, 1.5), (1.8, 1.9)] {
        for (_, theta, alpha, slow_theta) in &families {
            for psi in [1u64, 3, 8] {
                for (g, slow_g) in gs.iter().zip(slow_gs) {
                    let bounds = aoyama_theta_delta(eps, l, theta, &EpsModulus::Constant { value: psi }, g, &ctx).unwrap();
                    let (big, num, den) = r::recurrence_bounds(eps, l, slow_theta, psi as r::Nat, &slow_g);
                    ok &= nat(&bounds.theta) == Some(big) && bounds.delta.num == num && nat(&bounds.delta.den) == Some(den);
                    let Some(th) = bounds.theta.to_u64().filter(|&t| t <= AOYAMA_THETA_CAP) else {
                        tally.out_of_scope += 1;
                        continue;
                    };
                    let n = (th + g.eval_u64(th) + 2) as usize;
                    let delta = bounds.delta.to_f64();
                    let al: Vec<f64> = (0..n).map(alpha).collect();
                    let t: Vec<f64> = (0..n).map(|k| if (k as u64) + 1 < psi { l } else { eps / 3.0 }).collect();
                    // the extremal sequence: equality in the recurrence, capped at L
                    let mut s = vec![l];
                    for k in 0..n - 1 {
                        s.push(l.min((1.0 - al[k]) * s[k] + al[k] * t[k] + delta));
                    }
                    let window_max = s[th as usize - 1..(th + g.eval_u64(th)) as usize].iter().copied().fold(f64::MIN, f64::max);
                    let inst = RecurrenceInstance { s, alpha: al, t };
                    let v = check_aoyama(&inst, &bounds, l, theta, g, eps).unwrap();
                    tally.tested += 1;
                    tally.nonvacuous += (l > eps) as u32;
                    let held = v.holds && window_max <= eps;
                    tally.held += held as u32;
                    ok &= held;
                }
            }
        }
    }
    ok
}

/// s_n = sin²(d(x_n, z_J)√κ/2) along a Halpern trace, α_n = μ_{n+1},
/// t_n = max{γ_n^J/cos(M√κ), 0}, for λ_n = (n+1)^(−1/2).
fn halpern_recurrences(tally: &mut AoyamaTally, notes: &mut Vec<String>) -> bool {
    const HORIZON: u64 = 1_200_000;
    let ctx = ctx();
    let c = unit();
    let b = ball(0.5, c);
    let m = b.diameter_bound();
    let x = m;
    assert_eq!(r::k_of(x), 2);
    // θ̃(n) = θ(2n) = (n+2)² for θ(n) = ⌈(n+4)²/4⌉
    let theta = DivergenceRate::Polynomial { coef: 1, shift: 2, power: 2, divisor: 1 };
    let lambda = |n: u64| 1.0 / (n as f64 + 1.0).sqrt();
    let l = (x / 2.0).sin().powi(2);
    let u = b.point_at(&[1.0, 0.0, 0.0], 0.5);
    let anchor = b.point_at(&[-1.0, 0.0, 0.0], 0.4);
    let maps = [
        ("pull", NonexpansiveMap::pull(&b, &anchor, 0.5).unwrap()),
        (
            "pull∘rotation",
            NonexpansiveMap::composition(&[
                NonexpansiveMap::pull(&b, &anchor, 0.5).unwrap(),
                NonexpansiveMap::rotation(&b, 0.4).unwrap(),
            ])
            .unwrap(),
        ),
    ];
    let mut ok = true;
    for (name, map) in &maps {
        let tr = iterate(&u, map, &ModuliSchedule::inverse_sqrt(), HORIZON).unwrap();
        let pts = tr.points().unwrap();
        let n = pts.len() - 2;
        let du: Vec<f64> = pts.iter().map(|p| r::dist(u.coords(), p.coords(), 1.0)).collect();
        for eps in [1.0, 1.5] {
            let e = (eps / 4.0f64).sin().powi(2);
            for g in [GFunction::Constant { value: 10 }, GFunction::identity()] {
                let mut j = 1000u64;
                let mut found = None;
                for _ in 0..8 {
                    let z = solve_fixed_point(&u, 1.0 / (j as f64 + 1.0), map, 1e-15).unwrap().z;
                    let duz = (r::dist(u.coords(), z.coords(), 1.0) / 2.0).sin().powi(2);
                    // t[k] = t_{k+1}, which involves x_{k+2}
                    let t: Vec<f64> = (0..n).map(|k| ((duz - (du[k + 2] / 2.0).sin().powi(2)) / x.cos()).max(0.0)).collect();
                    let psi = t.iter().rposition(|&v| v > e / 3.0).map_or(1, |k| k as u64 + 2);
                    let bounds = aoyama_theta_delta(e, l, &theta, &EpsModulus::Constant { value: psi }, &g, &ctx).unwrap();
                    let need = (2.0 * x * l / (x.sin() * bounds.delta.to_f64())).ceil() as u64;
                    if j >= need {
                        found = Some((z, t, psi, bounds));
                        break;
                    }
                    j = need;
                }
                let Some((z, t, psi, bounds)) = found else {
                    ok = false;
                    continue;
                };
                let Some(th) = bounds.theta.to_u64().filter(|&v| v + g.eval_u64(v) < n as u64) else {
                    tally.out_of_scope += 1;
                    notes.push(format!("{name} ε={eps} g={g:?}: Θ = {} beyond the {HORIZON}-step trace", bounds.theta.render()));
                    continue;
                };
                let s: Vec<f64> = (0..n).map(|k| (r::dist(pts[k + 1].coords(), z.coords(), 1.0) / 2.0).sin().powi(2)).collect();
                let alpha: Vec<f64> = (0..n).map(|k| 1.0 - ((1.0 - lambda(k as u64 + 2)) * x).sin() / x.sin()).collect();
                let early = s[..th as usize - 1].iter().copied().fold(0.0, f64::max);
                let inst = RecurrenceInstance { s, alpha, t };
                match check_aoyama(&inst, &bounds, l, &theta, &g, e) {
                    Ok(v) => {
                        tally.tested += 1;
                        tally.held += v.holds as u32;
                        tally.nonvacuous += (early > e) as u32;
                        ok &= v.holds;
                        notes.push(format!(
                            "{name} ε={eps} g={g:?}: J={j} ψ={psi} Θ={th} max s before Θ {early:.3} > ε'={e:.3}: {}, max in window {:.2e}, recurrence slack {:.2e}",
                            early > e,
                            v.max_in_window,
                            -v.recurrence_residual
                        ));
                    }
                    Err(err) => {
                        ok = false;
                        notes.push(format!("{name} ε={eps} g={g:?}: {err}"));
                    }
                }
            }
        }
    }
    ok
}

fn recurrence_lemma() -> Outcome {
    let mut tally = AoyamaTally { tested: 0, held: 0, out_of_scope: 0, nonvacuous: 0 };
    let mut notes = Vec::new();
    let syn = synthetic_recurrences(&mut tally);
    let synthetic = (tally.tested, tally.held);
    let hal = halpern_recurrences(&mut tally, &mut notes);
    let halpern = (tally.tested - synthetic.0, tally.held - synthetic.1);
    let mut o = Outcome::new(
        syn && hal && halpern.0 > 0,
        format!(
            "synthetic {}/{} hold, Halpern-derived {}/{} hold, {} with L > ε or s above ε before Θ, {} out of scope (synthetic Θ > {AOYAMA_THETA_CAP} or window past the trace)",
            synthetic.1, synthetic.0, halpern.1, halpern.0, tally.nonvacuous, tally.out_of_scope
        ),
    );
    o.notes = notes;
    o
}

// ----------------------------------------------------------------- 10

fn metastability_bound() -> Outcome {
    const HORIZON: u64 = 2000;
    let opts = TowerOptions::default();
    let c = unit();
    let mut pass = true;
    let mut notes = Vec::new();
    let mut exact = 0;
    for radius in [0.0005, 0.00025] {
        let b = ball(radius, c);
        let m = b.diameter_bound();
        for (name, map) in catalog_maps(&b) {
            for g in [GFunction::identity(), GFunction::Constant { value: 5 }] {
                let rep = table1_tower(1.9, &g, &c, m, &ModuliSchedule::inverse_sqrt(), opts).unwrap();
                if rep.sigma_is_estimate {
                    notes.push(format!("M={m} {name} g={g:?}: Σ is an estimate, outside the exact branch"));
                    continue;
                }
                let u = b.sample_boundary(&mut trial_rng(10, exact));
                let tr = iterate(&u, &map, &ModuliSchedule::inverse_sqrt(), HORIZON).unwrap();
                let w = empirical_metastability(tr.points().unwrap(), 1.9, &g, &c).unwrap();
                let respected = w.as_ref().is_some_and(|w| BigCount::from_u64(w.n) <= rep.sigma);
                pass &= respected;
                exact += 1;
                notes.push(format!(
                    "M={m} {name} g={g:?}: N_emp={} Σ={} exact, N_emp ≤ Σ: {respected}",
                    w.map_or("none".into(), |w| w.n.to_string()),
                    rep.sigma.render_short()
                ));
            }
        }
    }
    pass &= exact > 0;

    // an estimate: the report must say so and the empirical index must exist
    let cfg = r#"
seed = 10
eps = [0.5]
[space]
kappa = 1.0
[ball]
radius = 0.05
[map]
kind = "rotation"
angle = 0.3
[horizon]
iterations = 2000
"#;
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::parse(cfg, false).unwrap();
    cfg.out = dir.path().to_path_buf();
    let out = run_meta(&cfg).unwrap();
    let row = &out.report.rows[0];
    let direct = sigma_harmonic(0.5, &GFunction::identity(), &c, 0.1, opts).unwrap();
    let flagged = row.sigma_is_estimate && !row.sigma.is_exact() && direct.sigma_is_estimate && row.verdict == "estimate";
    let finite = row.window.is_some();
    pass &= flagged && finite && out.verdict == Verdict::Pass;
    notes.push(format!(
        "harmonic M=0.1 ε=0.5 g=n: Σ={} flagged estimate: {flagged}, N_emp={}",
        row.sigma.render_short(),
        row.window.as_ref().map_or("none".into(), |w| w.n.to_string())
    ));
    let mut o = Outcome::new(pass, format!("{exact} exact configurations with N_emp ≤ Σ, estimate case flagged: {flagged}, N_emp finite: {finite}"));
    o.notes = notes;
    o
}

// ---------------------------------------------------------------------

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 10] = [
        (1, "golden rate values", Duration::from_secs(1), golden_values),
        (2, "asymptotic-regularity domination", Duration::from_secs(300), asymptotic_regularity),
        (3, "step recurrence residual", Duration::from_secs(30), recurrence_residual),
        (4, "inequality fuzz campaigns", Duration::from_secs(600), fuzz_campaigns),
        (5, "two-sided S identity", Duration::from_secs(60), s_identity),
        (6, "Browder bound K", Duration::from_secs(60), browder_bound),
        (7, "tower internal consistency", Duration::from_secs(60), tower_consistency),
        (8, "limsup rate dual path", Duration::from_secs(1), dual_path),
        (9, "quantitative recurrence lemma", Duration::from_secs(120), recurrence_lemma),
        (10, "metastability bound Σ", Duration::from_secs(600), metastability_bound),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::new(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let ok = out.pass && took <= limit;
        failed += (!ok) as u32;
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.2}s, limit {}s]",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
        for n in &out.notes {
            println!("    {n}");
        }
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
