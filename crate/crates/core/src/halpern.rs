//! The Halpern iteration x_{n+1} = λ_{n+1}u + (1−λ_{n+1})Tx_n, its trace and
//! the empirical regularity indices.

use std::io::Write;

use serde::Serialize;

use crate::domain::NonexpansiveMap;
use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::model_space::{distance, geodesic_point, Curvature, ModelPoint};
use crate::schedule::{check_scaled_diameter, mu_of, ModuliSchedule};

pub const DEFAULT_TRACE_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterateOptions {
    /// Traces longer than this keep only their last two points.
    pub cap: usize,
    pub streaming: bool,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions { cap: DEFAULT_TRACE_CAP, streaming: false }
    }
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    u: ModelPoint,
    schedule: ModuliSchedule,
    map: NonexpansiveMap,
    points: Vec<ModelPoint>,
    streaming: bool,
    len: usize,
    /// λ_{n+1}, n = 0..=N
    lambda_next: Vec<f64>,
    /// d(x_n, x_{n+1}), n = 0..N
    step: Vec<f64>,
    /// d(x_n, Tx_n), n = 0..=N
    residual: Vec<f64>,
    /// d(x_n, p) for the map's known fixed point p
    fixed: Option<Vec<f64>>,
}

pub fn iterate(u: &ModelPoint, map: &NonexpansiveMap, s: &ModuliSchedule, n: u64) -> Result<IterationTrace> {
    iterate_with(u, map, s, n, IterateOptions::default())
}

pub fn iterate_with(
    u: &ModelPoint,
    map: &NonexpansiveMap,
    s: &ModuliSchedule,
    n: u64,
    opts: IterateOptions,
) -> Result<IterationTrace> {
    let ball = map.ball();
    if !ball.contains(u) {
        return Err(Error::Domain("starting point lies outside the ball".into()));
    }
    let c = *ball.curvature();
    let total = n as usize + 1;
    let streaming = opts.streaming || total > opts.cap;
    let fp = map.fixed_point().ok();
    let mut tr = IterationTrace {
        u: u.clone(),
        schedule: s.clone(),
        map: map.clone(),
        points: vec![u.clone()],
        streaming,
        len: 1,
        lambda_next: Vec::with_capacity(total),
        step: Vec::with_capacity(total),
        residual: Vec::with_capacity(total),
        fixed: fp.as_ref().map(|_| Vec::with_capacity(total)),
    };
    let mut x = u.clone();
    for k in 0..=n {
        let tx = map.apply(&x)?;
        let l = s.lambda(k + 1);
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::Domain(format!("λ_{} = {l} outside [0,1]", k + 1)));
        }
        tr.lambda_next.push(l);
        tr.residual.push(distance(&x, &tx, &c)?);
        if let (Some(p), Some(f)) = (&fp, tr.fixed.as_mut()) {
            f.push(distance(&x, p, &c)?);
        }
        if k == n {
            break;
        }
        let next = geodesic_point(u, &tx, 1.0 - l, &c)?;
        tr.step.push(distance(&x, &next, &c)?);
        x = next;
        if streaming {
            if tr.points.len() == 2 {
                tr.points.remove(0);
            }
        }
        tr.points.push(x.clone());
        tr.len += 1;
    }
    Ok(tr)
}

impl IterationTrace {
    pub fn start(&self) -> &ModelPoint {
        &self.u
    }

    pub fn map(&self) -> &NonexpansiveMap {
        &self.map
    }

    pub fn schedule(&self) -> &ModuliSchedule {
        &self.schedule
    }

    /// Number of points x_0 … x_N.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_streaming(&self) -> bool {
        self.streaming
    }

    /// All points, unless the trace was streamed.
    pub fn points(&self) -> Option<&[ModelPoint]> {
        (!self.streaming).then_some(&self.points[..])
    }

    pub fn last(&self) -> &ModelPoint {
        self.points.last().expect("trace holds x_0")
    }

    /// (d(x_n, x_{n+1}))_{n<N} and (d(x_n, Tx_n))_{n≤N}.
    pub fn regularity_indices(&self) -> (&[f64], &[f64]) {
        (&self.step, &self.residual)
    }

    pub fn fixed_point_distances(&self) -> Option<&[f64]> {
        self.fixed.as_deref()
    }

    /// max_n [d(x_n,x_{n+1}) − (1−μ_{n+1})d(x_{n−1},x_n) − M|λ_{n+1} − λ_n|] over 1 ≤ n < N.
    pub fn check_recurrence(&self, m: f64, c: &Curvature) -> Result<f64> {
        let x = check_scaled_diameter(m, c)?;
        let mut worst = f64::NEG_INFINITY;
        for n in 1..self.step.len() {
            let ln1 = self.lambda_next[n];
            let ln = self.lambda_next[n - 1];
            let rhs = (1.0 - mu_of(ln1, x)) * self.step[n - 1] + m * (ln1 - ln).abs();
            worst = worst.max(self.step[n] - rhs);
        }
        Ok(worst)
    }

    /// CSV with columns n, λ_{n+1}, d(x_n,x_{n+1}), d(x_n,Tx_n), d(x_n,p).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# halpern trace: {} points, fixed point {}", self.len, if self.fixed.is_some() { "known" } else { "unknown" })?;
        writeln!(w, "n,lambda_next,step,residual,fixed_dist")?;
        for n in 0..self.residual.len() {
            let step = self.step.get(n).map(|v| format!("{v:.17e}")).unwrap_or_default();
            let fd = self.fixed.as_ref().map(|f| format!("{:.17e}", f[n])).unwrap_or_default();
            writeln!(w, "{n},{:.17e},{step},{:.17e},{fd}", self.lambda_next[n], self.residual[n])?;
        }
        Ok(())
    }
}

/// Smallest n with seq[k] ≤ ε for every later k in the trace.
pub fn first_stable_index(seq: &[f64], eps: f64) -> Option<usize> {
    let mut n = seq.len();
    while n > 0 && seq[n - 1] <= eps {
        n -= 1;
    }
    if n == seq.len() && !seq.is_empty() {
        None
    } else {
        Some(n)
    }
}

/// A window [n, n + g(n)] on which the trace has diameter at most ε.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetaWindow {
    pub n: u64,
    pub window_end: u64,
    /// Upper bound on the window diameter.
    pub spread: f64,
}

/// Smallest n with d(x_i, x_j) ≤ ε for all i, j ∈ [n, n + g(n)], among the
/// windows that fit inside the trace.
pub fn empirical_metastability(points: &[ModelPoint], eps: f64, g: &GFunction, c: &Curvature) -> Result<Option<MetaWindow>> {
    let len = points.len() as u64;
    for n in 0..len {
        let end = n.saturating_add(g.eval_u64(n));
        if end >= len {
            continue;
        }
        let w = &points[n as usize..=end as usize];
        let mut radius = 0.0f64;
        for p in &w[1..] {
            radius = radius.max(distance(&w[0], p, c)?);
            if radius > eps {
                break;
            }
        }
        if radius > eps {
            continue;
        }
        if 2.0 * radius <= eps {
            return Ok(Some(MetaWindow { n, window_end: end, spread: 2.0 * radius }));
        }
        let mut spread = radius;
        'pairs: for (a, p) in w.iter().enumerate().skip(1) {
            for q in &w[a + 1..] {
                spread = spread.max(distance(p, q, c)?);
                if spread > eps {
                    break 'pairs;
                }
            }
        }
        if spread <= eps {
            return Ok(Some(MetaWindow { n, window_end: end, spread }));
        }
    }
    Ok(None)
}
