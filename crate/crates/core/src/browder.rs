//! Resolvent-type approximants z_t^u = tu + (1−t)Tz_t^u and their
//! empirical metastability.

use std::io::Write;

use serde::Serialize;

use crate::domain::{contraction_factor, NonexpansiveMap};
use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::model_space::{distance, geodesic_point, Curvature, ModelPoint};

pub const DEFAULT_PICARD_CAP: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrowderPoint {
    pub t: f64,
    pub z: ModelPoint,
    /// Certified bound on d(z, z_t^u).
    pub residual: f64,
    pub q_t: f64,
    pub iterations: u64,
}

/// T_t^u(y) = tu + (1−t)Ty.
pub fn contraction_apply(u: &ModelPoint, t: f64, map: &NonexpansiveMap, y: &ModelPoint) -> Result<ModelPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0,1]")));
    }
    let ball = map.ball();
    if !ball.contains(u) {
        return Err(Error::Domain("anchor u lies outside the ball".into()));
    }
    let ty = map.apply(y)?;
    geodesic_point(u, &ty, 1.0 - t, ball.curvature())
}

/// Picard iteration from u, stopped by the a-posteriori bound
/// q/(1−q)·d(y_k, y_{k−1}) ≤ tol.
pub fn solve_fixed_point(u: &ModelPoint, t: f64, map: &NonexpansiveMap, tol: f64) -> Result<BrowderPoint> {
    solve_fixed_point_capped(u, t, map, tol, DEFAULT_PICARD_CAP)
}

pub fn solve_fixed_point_capped(u: &ModelPoint, t: f64, map: &NonexpansiveMap, tol: f64, cap: u64) -> Result<BrowderPoint> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("t = {t} outside (0,1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let ball = map.ball();
    let c = ball.curvature();
    // T is q-Lipschitz with q ≤ 1 and the geodesic step scales by the sine ratio
    let q = contraction_factor(1.0 - t, ball.scaled_diameter()) * map.lipschitz_bound().min(1.0);
    let mut y = u.clone();
    let mut last_step = f64::INFINITY;
    for k in 1..=cap {
        let next = contraction_apply(u, t, map, &y)?;
        let d = distance(&y, &next, c)?;
        y = next;
        last_step = d;
        let bound = q / (1.0 - q) * d;
        if bound <= tol {
            return Ok(BrowderPoint { t, z: y, residual: bound, q_t: q, iterations: k });
        }
    }
    Err(Error::NonConvergence { iterations: cap, last_step })
}

/// z_i^u for t_i = 1/(i+1), i = 0 … i_max, with z_0 = u.
pub fn resolvent_family(u: &ModelPoint, map: &NonexpansiveMap, i_max: u64, tol: f64) -> Result<Vec<BrowderPoint>> {
    use rayon::prelude::*;
    if !map.ball().contains(u) {
        return Err(Error::Domain("anchor u lies outside the ball".into()));
    }
    let q0 = contraction_factor(0.0, map.ball().scaled_diameter());
    let first = BrowderPoint { t: 1.0, z: u.clone(), residual: 0.0, q_t: q0, iterations: 0 };
    let rest: Result<Vec<BrowderPoint>> =
        (1..=i_max).into_par_iter().map(|i| solve_fixed_point(u, 1.0 / (i as f64 + 1.0), map, tol)).collect();
    let mut out = vec![first];
    out.extend(rest?);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrowderWindow {
    pub k: u64,
    pub window_end: u64,
    /// Largest pairwise distance inside [k, k + g(k)].
    pub spread: f64,
    pub threshold: f64,
}

/// Smallest K with d(z_i, z_j) ≤ ε/√κ − 4·tol for all i, j ∈ [K, K + g(K)].
pub fn empirical_browder_metastability(
    family: &[BrowderPoint],
    eps: f64,
    g: &GFunction,
    c: &Curvature,
    tol: f64,
) -> Result<BrowderWindow> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("ε = {eps} outside (0,1)")));
    }
    let thr = eps / c.sqrt_kappa() - 4.0 * tol;
    let n = family.len() as u64;
    for k in 0..n {
        let end = k.saturating_add(g.eval_u64(k));
        if end >= n {
            return Err(Error::Exhausted(format!("window [{k}, {end}] passes the family end {}", n - 1)));
        }
        let w = &family[k as usize..=end as usize];
        let mut spread = 0.0f64;
        let mut ok = true;
        'pairs: for (a, p) in w.iter().enumerate() {
            for q in &w[a + 1..] {
                let d = distance(&p.z, &q.z, c)?;
                spread = spread.max(d);
                if d > thr {
                    ok = false;
                    break 'pairs;
                }
            }
        }
        if ok {
            return Ok(BrowderWindow { k, window_end: end, spread, threshold: thr });
        }
    }
    Err(Error::Exhausted("empty family".into()))
}

/// CSV with columns i, t_i, d(u, z_i), residual.
pub fn write_family_csv<W: Write>(family: &[BrowderPoint], u: &ModelPoint, c: &Curvature, mut w: W) -> Result<()> {
    writeln!(w, "# resolvent family: {} points", family.len())?;
    writeln!(w, "i,t,dist_u,residual")?;
    for (i, p) in family.iter().enumerate() {
        writeln!(w, "{i},{:.17e},{:.17e},{:.17e}", p.t, distance(u, &p.z, c)?, p.residual)?;
    }
    Ok(())
}
