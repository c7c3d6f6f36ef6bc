//! The five experiments behind the command line: each runs from an
//! [`ExperimentConfig`], writes its CSV/JSON files atomically under the
//! output directory and returns a report with an overall verdict.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bigcount::{BigCount, Ctx};
use crate::browder::{empirical_browder_metastability, resolvent_family, write_family_csv, BrowderWindow};
use crate::config::{ExperimentConfig, Setup};
use crate::error::{Error, Result};
use crate::fuzz::{run_campaign, FuzzReport, FuzzSettings, Oracle};
use crate::halpern::{empirical_metastability, first_stable_index, iterate, MetaWindow};
use crate::model_space::distance;
use crate::rates::{aoyama_theta_delta, browder_k, limsup_rate, phi, phi_tilde, psi_harmonic, AoyamaBounds};
use crate::tower::{sigma_harmonic, table1_tower, RateTowerReport, TowerOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Inconclusive,
    BoundViolated,
    InequalityViolated,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::InequalityViolated => 3,
            Verdict::BoundViolated => 4,
            Verdict::Inconclusive => 5,
        }
    }
}

/// Process exit code for a failed run.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Contract(_) => 3,
        _ => 1,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome<R> {
    pub verdict: Verdict,
    pub report: R,
    pub files: Vec<PathBuf>,
}

/// Writes through a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    files.push(path);
    Ok(())
}

fn write_bytes(dir: &Path, name: &str, bytes: Vec<u8>, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, &bytes)?;
    files.push(path);
    Ok(())
}

fn ctx_of(cfg: &ExperimentConfig) -> Ctx {
    Ctx::new(cfg.budget())
}

fn tower_opts(cfg: &ExperimentConfig) -> TowerOptions {
    TowerOptions { budget: cfg.budget(), ..TowerOptions::default() }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

// ---------------------------------------------------------------- asreg

#[derive(Clone, Debug, Serialize)]
pub struct AsregRow {
    pub eps: f64,
    pub phi_tilde: BigCount,
    pub phi: BigCount,
    /// First n after which d(x_k, x_{k+1}) ≤ ε up to the horizon, recorded
    /// when Φ̃ fits inside the horizon.
    pub step_index: Option<u64>,
    /// First n after which d(x_k, Tx_k) ≤ ε up to the horizon, recorded when
    /// Φ fits inside the horizon.
    pub residual_index: Option<u64>,
    pub verdict: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsregReport {
    pub kappa: f64,
    pub m: f64,
    pub horizon: u64,
    pub rows: Vec<AsregRow>,
}

fn stable(seq: &[f64], eps: f64) -> u64 {
    first_stable_index(seq, eps).unwrap_or(seq.len()) as u64
}

fn within(v: &BigCount, horizon: u64) -> bool {
    v.to_u64().is_some_and(|v| v <= horizon)
}

pub fn run_asreg(cfg: &ExperimentConfig) -> Result<Outcome<AsregReport>> {
    cfg.check_eps(&cfg.eps, f64::INFINITY)?;
    let Setup { curvature: c, ball, u, schedule: s, m } = cfg.setup()?;
    let map = cfg.build_map(&ball)?;
    let ctx = ctx_of(cfg);
    let horizon = cfg.horizon.iterations;
    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let pt = phi_tilde(eps, &c, m, &s.gamma, &s.theta, &ctx).map_err(config_err)?;
        let p = phi(eps, &c, m, &s.gamma, &s.theta, &s.alpha, &ctx).map_err(config_err)?;
        rows.push(AsregRow { eps, phi_tilde: pt, phi: p, step_index: None, residual_index: None, verdict: "infeasible" });
    }
    if !rows.iter().any(|r| within(&r.phi_tilde, horizon) || within(&r.phi, horizon)) {
        let smallest = rows.iter().map(|r| r.phi.clone()).min_by(|a, b| a.partial_cmp(b).unwrap()).expect("grid is nonempty");
        return Err(Error::Config(format!("no ε has Φ within the horizon {horizon}; smallest Φ = {}", smallest.render())));
    }
    let tr = iterate(&u, &map, &s, horizon)?;
    let (steps, residuals) = tr.regularity_indices();
    let mut verdict = Verdict::Pass;
    for r in rows.iter_mut() {
        let mut ok = true;
        let mut any = false;
        if within(&r.phi_tilde, horizon) {
            let si = stable(steps, r.eps);
            r.step_index = Some(si);
            ok &= BigCount::from_u64(si) <= r.phi_tilde;
            any = true;
        }
        if within(&r.phi, horizon) {
            let ri = stable(residuals, r.eps);
            r.residual_index = Some(ri);
            ok &= BigCount::from_u64(ri) <= r.phi;
            any = true;
        }
        if !any {
            continue;
        }
        r.verdict = if ok { "bound respected" } else { "bound violated" };
        if !ok {
            verdict = Verdict::BoundViolated;
        }
    }
    let report = AsregReport { kappa: c.kappa(), m, horizon, rows };
    let mut files = Vec::new();
    let mut csv = Vec::new();
    tr.write_csv(&mut csv)?;
    write_bytes(&cfg.out, "asreg_trace.csv", csv, &mut files)?;
    write_json(&cfg.out, "asreg.json", &report, &mut files)?;
    Ok(Outcome { verdict, report, files })
}

// ----------------------------------------------------------------- meta

#[derive(Clone, Debug, Serialize)]
pub struct MetaRow {
    pub eps: f64,
    pub window: Option<MetaWindow>,
    pub sigma: BigCount,
    pub sigma_is_estimate: bool,
    /// log₂ Σ ≥ log₂ N_emp, the only comparison made for estimates.
    pub log_magnitude_consistent: Option<bool>,
    pub verdict: &'static str,
    pub tower: RateTowerReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetaReport {
    pub kappa: f64,
    pub m: f64,
    pub horizon: u64,
    pub g: crate::gfunction::GFunction,
    pub rows: Vec<MetaRow>,
}

pub fn tower_for(cfg: &ExperimentConfig, eps: f64, setup: &Setup) -> Result<RateTowerReport> {
    let opts = tower_opts(cfg);
    if cfg.schedule.is_harmonic() {
        sigma_harmonic(eps, &cfg.g, &setup.curvature, setup.m, opts)
    } else {
        table1_tower(eps, &cfg.g, &setup.curvature, setup.m, &setup.schedule, opts)
    }
}

pub fn run_meta(cfg: &ExperimentConfig) -> Result<Outcome<MetaReport>> {
    cfg.check_eps(&cfg.eps, 2.0)?;
    let setup = cfg.setup()?;
    let map = cfg.build_map(&setup.ball)?;
    let c = setup.curvature;
    let horizon = cfg.horizon.iterations;
    let tr = iterate(&setup.u, &map, &setup.schedule, horizon)?;
    let pts = tr
        .points()
        .ok_or_else(|| Error::Config(format!("horizon {horizon} exceeds the stored trace length; lower it")))?;
    let towers: Vec<Result<RateTowerReport>> = cfg.eps.par_iter().map(|&e| tower_for(cfg, e, &setup)).collect();
    let mut rows = Vec::new();
    let mut verdict = Verdict::Pass;
    for (&eps, tower) in cfg.eps.iter().zip(towers) {
        let tower = tower?;
        let window = empirical_metastability(pts, eps, &cfg.g, &c)?;
        let est = tower.sigma_is_estimate;
        let (row_verdict, logc) = match (&window, est) {
            (None, _) => ("inconclusive", None),
            (Some(w), true) => {
                let ln = (w.n.max(1) as f64).log2();
                ("estimate", Some(tower.sigma.log2_f64().is_none_or(|s| s >= ln)))
            }
            (Some(w), false) => {
                if BigCount::from_u64(w.n) <= tower.sigma {
                    ("bound respected", None)
                } else {
                    ("bound violated", None)
                }
            }
        };
        let v = match row_verdict {
            "bound violated" => Verdict::BoundViolated,
            "inconclusive" => Verdict::Inconclusive,
            _ => Verdict::Pass,
        };
        verdict = verdict.max(v);
        rows.push(MetaRow {
            eps,
            window,
            sigma: tower.sigma.clone(),
            sigma_is_estimate: est,
            log_magnitude_consistent: logc,
            verdict: row_verdict,
            tower,
        });
    }
    let report = MetaReport { kappa: c.kappa(), m: setup.m, horizon, g: cfg.g.clone(), rows };
    let mut files = Vec::new();
    let mut csv = Vec::new();
    tr.write_csv(&mut csv)?;
    write_bytes(&cfg.out, "meta_trace.csv", csv, &mut files)?;
    write_json(&cfg.out, "meta.json", &report, &mut files)?;
    Ok(Outcome { verdict, report, files })
}

// -------------------------------------------------------------- browder

#[derive(Clone, Debug, Serialize)]
pub struct BrowderRow {
    pub eps: f64,
    pub k_bound: BigCount,
    pub window: Option<BrowderWindow>,
    pub verdict: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct BrowderReport {
    pub kappa: f64,
    pub m: f64,
    pub family_depth: u64,
    pub tolerance: f64,
    /// d(u, z_i) nondecreasing in i, up to twice the solver tolerance.
    pub monotone: bool,
    pub rows: Vec<BrowderRow>,
}

pub fn run_browder(cfg: &ExperimentConfig) -> Result<Outcome<BrowderReport>> {
    cfg.check_eps(&cfg.eps, 1.0)?;
    let setup = cfg.setup()?;
    let map = cfg.build_map(&setup.ball)?;
    let (c, m) = (setup.curvature, setup.m);
    let ctx = ctx_of(cfg);
    let tol = cfg.horizon.browder_rel_tol * m;
    let depth = cfg.horizon.family;
    let fam = resolvent_family(&setup.u, &map, depth, tol)?;
    let dists: Vec<f64> = fam.iter().map(|p| distance(&setup.u, &p.z, &c)).collect::<Result<_>>()?;
    let monotone = dists.windows(2).all(|w| w[1] >= w[0] - 2.0 * tol);
    let mut rows = Vec::new();
    let mut verdict = Verdict::Pass;
    for &eps in &cfg.eps {
        let k = browder_k(eps, &cfg.g, m, &c, &ctx)?;
        let window = match empirical_browder_metastability(&fam, eps, &cfg.g, &c, tol) {
            Ok(w) => Some(w),
            Err(Error::Exhausted(_)) => None,
            Err(e) => return Err(e),
        };
        let row_verdict = match &window {
            None => "inconclusive",
            Some(_) if !k.is_exact() => "estimate",
            Some(w) if BigCount::from_u64(w.k) <= k => "bound respected",
            Some(_) => "bound violated",
        };
        verdict = verdict.max(match row_verdict {
            "bound violated" => Verdict::BoundViolated,
            "inconclusive" => Verdict::Inconclusive,
            _ => Verdict::Pass,
        });
        rows.push(BrowderRow { eps, k_bound: k, window, verdict: row_verdict });
    }
    let report = BrowderReport { kappa: c.kappa(), m, family_depth: depth, tolerance: tol, monotone, rows };
    let mut files = Vec::new();
    let mut csv = Vec::new();
    write_family_csv(&fam, &setup.u, &c, &mut csv)?;
    write_bytes(&cfg.out, "browder_family.csv", csv, &mut files)?;
    write_json(&cfg.out, "browder.json", &report, &mut files)?;
    Ok(Outcome { verdict, report, files })
}

// ----------------------------------------------------------------- fuzz

#[derive(Clone, Debug, Serialize)]
pub struct FuzzSummary {
    pub seed: u64,
    pub trials: u64,
    pub reports: Vec<FuzzReport>,
    pub violations: u64,
}

pub fn selected_oracles(names: &[String]) -> Result<Vec<Oracle>> {
    if names.is_empty() {
        return Err(Error::Config("the oracle list is empty".into()));
    }
    let mut out = Vec::new();
    for n in names {
        if n == "all" {
            out.extend(Oracle::ALL);
        } else {
            out.push(Oracle::from_name(n).ok_or_else(|| Error::Config(format!("unknown oracle {n:?}")))?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn run_fuzz(cfg: &ExperimentConfig) -> Result<Outcome<FuzzSummary>> {
    let f = &cfg.fuzz;
    let oracles = selected_oracles(&f.oracles)?;
    if f.kappas.is_empty() || f.scaled_m.is_empty() {
        return Err(Error::Config("fuzz needs at least one κ and one M√κ".into()));
    }
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for o in oracles {
        let mut per = Vec::new();
        for &kappa in &f.kappas {
            for &x in &f.scaled_m {
                let st = FuzzSettings { seed: cfg.seed, kappa, scaled_m: x, dim: f.dim, trials: f.trials };
                per.push(run_campaign(o, &st).map_err(config_err)?);
            }
        }
        write_json(&cfg.out, &format!("fuzz_{}.json", o.name()), &per, &mut files)?;
        reports.extend(per);
    }
    let violations = reports.iter().map(|r| r.violations).sum();
    let summary = FuzzSummary { seed: cfg.seed, trials: f.trials, reports, violations };
    write_json(&cfg.out, "fuzz.json", &summary, &mut files)?;
    let verdict = if violations > 0 { Verdict::InequalityViolated } else { Verdict::Pass };
    Ok(Outcome { verdict, report: summary, files })
}

// ---------------------------------------------------------------- rates

#[derive(Clone, Debug, Serialize)]
pub struct EpsValue {
    pub eps: f64,
    pub value: BigCount,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimsupValue {
    pub eps: f64,
    pub t: f64,
    pub value: BigCount,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceValue {
    pub eps: f64,
    pub l: f64,
    pub bounds: AoyamaBounds,
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatesReport {
    pub kappa: f64,
    pub m: f64,
    pub phi_tilde: Vec<EpsValue>,
    pub phi: Vec<EpsValue>,
    /// Only for λ_n = 1/(n+1).
    pub psi: Vec<EpsValue>,
    pub limsup: Vec<LimsupValue>,
    pub browder_k: Vec<EpsValue>,
    pub recurrence: Vec<RecurrenceValue>,
    pub towers: Vec<RateTowerReport>,
    /// For the harmonic schedule: whether the closed-form tower and the
    /// general tower agree on every field but the family label.
    pub harmonic_agreement: Vec<bool>,
    pub any_estimate: bool,
}

fn agree(a: &RateTowerReport, b: &RateTowerReport) -> bool {
    let strip = |r: &RateTowerReport| {
        let mut v = serde_json::to_value(r).expect("report serializes");
        v.as_object_mut().expect("object").remove("family");
        v
    };
    strip(a) == strip(b)
}

pub fn run_rates(cfg: &ExperimentConfig) -> Result<Outcome<RatesReport>> {
    let setup = cfg.setup()?;
    let (c, m, s) = (setup.curvature, setup.m, &setup.schedule);
    let ctx = ctx_of(cfg);
    let ce = config_err;
    let mut rep = RatesReport {
        kappa: c.kappa(),
        m,
        phi_tilde: vec![],
        phi: vec![],
        psi: vec![],
        limsup: vec![],
        browder_k: vec![],
        recurrence: vec![],
        towers: vec![],
        harmonic_agreement: vec![],
        any_estimate: false,
    };
    for &eps in &cfg.eps {
        rep.phi_tilde.push(EpsValue { eps, value: phi_tilde(eps, &c, m, &s.gamma, &s.theta, &ctx).map_err(ce)? });
        rep.phi.push(EpsValue { eps, value: phi(eps, &c, m, &s.gamma, &s.theta, &s.alpha, &ctx).map_err(ce)? });
        if cfg.schedule.is_harmonic() {
            rep.psi.push(EpsValue { eps, value: psi_harmonic(eps, &c, m, &ctx).map_err(ce)? });
        }
        for &t in &cfg.rates.limsup_t {
            let value = limsup_rate(eps, &c, m, t, &s.gamma, &s.theta, &s.alpha, &ctx).map_err(ce)?;
            rep.limsup.push(LimsupValue { eps, t, value });
        }
    }
    cfg.check_eps(&cfg.rates.browder_eps, 1.0).or_else(|e| if cfg.rates.browder_eps.is_empty() { Ok(()) } else { Err(e) })?;
    for &eps in &cfg.rates.browder_eps {
        rep.browder_k.push(EpsValue { eps, value: browder_k(eps, &cfg.g, m, &c, &ctx).map_err(ce)? });
    }
    for st in &cfg.rates.recurrence {
        let b = aoyama_theta_delta(st.eps, st.l, &st.theta, &st.psi, &st.g, &ctx).map_err(ce)?;
        let delta = b.delta.to_f64();
        rep.recurrence.push(RecurrenceValue { eps: st.eps, l: st.l, bounds: b, delta });
    }
    if cfg.rates.tower {
        cfg.check_eps(&cfg.eps, 2.0)?;
        let towers: Vec<Result<RateTowerReport>> = cfg.eps.par_iter().map(|&e| tower_for(cfg, e, &setup)).collect();
        for (&eps, t) in cfg.eps.iter().zip(towers) {
            let t = t?;
            if cfg.schedule.is_harmonic() {
                let general = table1_tower(eps, &cfg.g, &c, m, s, tower_opts(cfg))?;
                rep.harmonic_agreement.push(agree(&t, &general));
            }
            rep.towers.push(t);
        }
    }
    let all = rep.phi_tilde.iter().chain(&rep.phi).chain(&rep.psi).chain(&rep.browder_k).map(|v| &v.value);
    rep.any_estimate = all.chain(rep.limsup.iter().map(|v| &v.value)).any(|v| !v.is_exact())
        || rep.towers.iter().any(|t| t.sigma_is_estimate)
        || rep.recurrence.iter().any(|r| !r.bounds.theta.is_exact());
    let mut files = Vec::new();
    write_json(&cfg.out, "rates.json", &rep, &mut files)?;
    let verdict = if rep.harmonic_agreement.iter().all(|&a| a) { Verdict::Pass } else { Verdict::Inconclusive };
    Ok(Outcome { verdict, report: rep, files })
}
