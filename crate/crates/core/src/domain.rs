//! Geodesic balls and a closed catalog of nonexpansive self-maps on them.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_space::{distance, dot, geodesic_point, norm, Curvature, ModelPoint};
use crate::rng::trial_rng;

pub const CONTAINMENT_TOL: f64 = 1e-12;
pub const NONEXPANSIVE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexBall {
    center: ModelPoint,
    radius: f64,
    curvature: Curvature,
}

impl ConvexBall {
    /// Requires radius < D_κ/4 so that the diameter bound M = 2·radius stays
    /// below D_κ/2.
    pub fn new(center: ModelPoint, radius: f64, curvature: Curvature) -> Result<Self> {
        center.check(&curvature)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
        }
        let limit = curvature.d_kappa() / 4.0;
        if radius >= limit {
            return Err(Error::Domain(format!("ball radius {radius} is not below D_κ/4 = {limit}")));
        }
        Ok(ConvexBall { center, radius, curvature })
    }

    pub fn center(&self) -> &ModelPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn curvature(&self) -> &Curvature {
        &self.curvature
    }

    /// M = 2·radius.
    pub fn diameter_bound(&self) -> f64 {
        2.0 * self.radius
    }

    /// M√κ.
    pub fn scaled_diameter(&self) -> f64 {
        self.diameter_bound() * self.curvature.sqrt_kappa()
    }

    pub fn contains(&self, p: &ModelPoint) -> bool {
        match distance(&self.center, p, &self.curvature) {
            Ok(d) => d <= self.radius + CONTAINMENT_TOL,
            Err(_) => false,
        }
    }

    fn require(&self, p: &ModelPoint) -> Result<()> {
        p.check(&self.curvature)?;
        if !self.contains(p) {
            return Err(Error::Domain("point lies outside the ball".into()));
        }
        Ok(())
    }

    /// Random unit tangent direction at the center.
    pub fn random_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let c = self.center.coords();
        loop {
            let g: Vec<f64> = (0..c.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let gc = dot(&g, c);
            let v: Vec<f64> = g.iter().zip(c).map(|(a, b)| a - gc * b).collect();
            let n = norm(&v);
            if n > 1e-6 {
                return v.into_iter().map(|a| a / n).collect();
            }
        }
    }

    /// Point at distance `r` from the center along the unit tangent `dir`.
    pub fn point_at(&self, dir: &[f64], r: f64) -> ModelPoint {
        let a = r * self.curvature.sqrt_kappa();
        let v = self.center.coords().iter().zip(dir).map(|(c, d)| a.cos() * c + a.sin() * d).collect();
        ModelPoint::from_unnormalized(v)
    }

    /// Random point: uniform direction, radius with density ∝ sin(r√κ)^(n−1).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelPoint {
        let dir = self.random_direction(rng);
        let n = self.curvature.dim() as i32;
        let sk = self.curvature.sqrt_kappa();
        let r = loop {
            let r = self.radius * rng.gen::<f64>().powf(1.0 / n as f64);
            let a = r * sk;
            let accept = if a == 0.0 { 1.0 } else { (a.sin() / a).powi(n - 1) };
            if rng.gen::<f64>() <= accept {
                break r;
            }
        };
        self.point_at(&dir, r)
    }

    /// Random point on the boundary sphere of the ball.
    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelPoint {
        let dir = self.random_direction(rng);
        self.point_at(&dir, self.radius)
    }
}

/// Configuration-level description of a catalog map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Rotation { angle: f64 },
    Pull { anchor: Vec<f64>, factor: f64 },
    Composition { steps: Vec<MapSpec> },
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// Rotation by `angle` in every plane of `planes`, all orthogonal to the
    /// axis through the ball center.
    Rotation { angle: f64, planes: Vec<(Vec<f64>, Vec<f64>)> },
    Pull { anchor: ModelPoint, factor: f64 },
    Composition(Vec<Kind>),
}

/// A nonexpansive self-map of a ball.
#[derive(Clone, Debug, PartialEq)]
pub struct NonexpansiveMap {
    ball: ConvexBall,
    kind: Kind,
}

fn complement_planes(axis: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let m = axis.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        for b in std::iter::once(axis).chain(basis.iter().map(|b| b.as_slice())) {
            let p = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
        if basis.len() == m - 1 {
            break;
        }
    }
    if m == 3 {
        // right-handed pair, so the rotation agrees with Rodrigues' formula
        let e1 = basis[0].clone();
        let e2 = vec![
            axis[1] * e1[2] - axis[2] * e1[1],
            axis[2] * e1[0] - axis[0] * e1[2],
            axis[0] * e1[1] - axis[1] * e1[0],
        ];
        return vec![(e1, e2)];
    }
    basis.chunks_exact(2).map(|p| (p[0].clone(), p[1].clone())).collect()
}

impl Kind {
    fn build(spec: &MapSpec, ball: &ConvexBall) -> Result<Kind> {
        match spec {
            MapSpec::Rotation { angle } => {
                if !angle.is_finite() {
                    return Err(Error::Domain("rotation angle must be finite".into()));
                }
                Ok(Kind::Rotation { angle: *angle, planes: complement_planes(ball.center.coords()) })
            }
            MapSpec::Pull { anchor, factor } => {
                let anchor = ModelPoint::normalized(anchor.clone())?;
                ball.require(&anchor)?;
                if !(*factor > 0.0 && *factor < 1.0) {
                    return Err(Error::Domain(format!("pull factor {factor} outside (0,1)")));
                }
                Ok(Kind::Pull { anchor, factor: *factor })
            }
            MapSpec::Composition { steps } => {
                if steps.is_empty() {
                    return Err(Error::Domain("composition needs at least one map".into()));
                }
                Ok(Kind::Composition(steps.iter().map(|s| Kind::build(s, ball)).collect::<Result<_>>()?))
            }
        }
    }

    fn apply(&self, p: &ModelPoint, ball: &ConvexBall) -> Result<ModelPoint> {
        match self {
            Kind::Rotation { angle, planes } => {
                let (co, si) = (angle.cos(), angle.sin());
                let mut v = p.coords().to_vec();
                for (e1, e2) in planes {
                    let (a, b) = (dot(p.coords(), e1), dot(p.coords(), e2));
                    for k in 0..v.len() {
                        v[k] += (co - 1.0) * (a * e1[k] + b * e2[k]) + si * (a * e2[k] - b * e1[k]);
                    }
                }
                Ok(ModelPoint::from_unnormalized(v))
            }
            Kind::Pull { anchor, factor } => geodesic_point(p, anchor, *factor, &ball.curvature),
            Kind::Composition(steps) => {
                let mut q = p.clone();
                for s in steps {
                    q = s.apply(&q, ball)?;
                }
                Ok(q)
            }
        }
    }

    fn fixes(&self, p: &ModelPoint, c: &Curvature) -> bool {
        match self {
            Kind::Rotation { .. } => true,
            Kind::Pull { anchor, .. } => distance(anchor, p, c).map(|d| d <= CONTAINMENT_TOL).unwrap_or(false),
            Kind::Composition(steps) => steps.iter().all(|s| s.fixes(p, c)),
        }
    }

    fn lipschitz(&self, ball: &ConvexBall) -> f64 {
        match self {
            Kind::Rotation { .. } => 1.0,
            Kind::Pull { factor, .. } => contraction_factor(1.0 - factor, ball.scaled_diameter()),
            Kind::Composition(steps) => steps.iter().map(|s| s.lipschitz(ball)).product(),
        }
    }
}

/// sin(s·x)/sin(x): the contraction factor of moving to parameter 1 − s
/// toward a common point, for triangles with sides at most x/√κ.
pub fn contraction_factor(s: f64, x: f64) -> f64 {
    (s * x).sin() / x.sin()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonexpansiveReport {
    pub max_expansion_ratio: f64,
    pub violations: u64,
    pub pairs_evaluated: u64,
}

impl NonexpansiveMap {
    pub fn from_spec(spec: &MapSpec, ball: &ConvexBall) -> Result<Self> {
        Ok(NonexpansiveMap { ball: ball.clone(), kind: Kind::build(spec, ball)? })
    }

    /// Rotation by `angle` about the axis through the ball center.
    pub fn rotation(ball: &ConvexBall, angle: f64) -> Result<Self> {
        Self::from_spec(&MapSpec::Rotation { angle }, ball)
    }

    /// p ↦ geodesic_point(p, anchor, factor).
    pub fn pull(ball: &ConvexBall, anchor: &ModelPoint, factor: f64) -> Result<Self> {
        Self::from_spec(&MapSpec::Pull { anchor: anchor.coords().to_vec(), factor }, ball)
    }

    /// Applies `maps` left to right. All maps must live on the same ball.
    pub fn composition(maps: &[NonexpansiveMap]) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::Domain("composition needs at least one map".into()))?;
        if maps.iter().any(|m| m.ball != first.ball) {
            return Err(Error::Domain("composed maps act on different balls".into()));
        }
        Ok(NonexpansiveMap { ball: first.ball.clone(), kind: Kind::Composition(maps.iter().map(|m| m.kind.clone()).collect()) })
    }

    pub fn ball(&self) -> &ConvexBall {
        &self.ball
    }

    pub fn apply(&self, p: &ModelPoint) -> Result<ModelPoint> {
        self.ball.require(p)?;
        self.kind.apply(p, &self.ball)
    }

    /// Analytic Lipschitz bound: 1 for rotations, the sine-ratio factor for pulls.
    pub fn lipschitz_bound(&self) -> f64 {
        self.kind.lipschitz(&self.ball)
    }

    /// The known fixed point in the ball.
    pub fn fixed_point(&self) -> Result<ModelPoint> {
        match &self.kind {
            Kind::Rotation { .. } => Ok(self.ball.center.clone()),
            Kind::Pull { anchor, .. } => Ok(anchor.clone()),
            Kind::Composition(_) => {
                if self.kind.fixes(&self.ball.center, &self.ball.curvature) {
                    Ok(self.ball.center.clone())
                } else {
                    Err(Error::UnsupportedAnalysis("composition does not fix the ball center".into()))
                }
            }
        }
    }

    /// Ratio d(Tx,Ty)/d(x,y) over `samples` random pairs with d(x,y) > 1e-8.
    pub fn verify_nonexpansive(&self, samples: u64, tol: f64, seed: u64) -> Result<NonexpansiveReport> {
        let ratios: Vec<Option<f64>> = (0..samples)
            .into_par_iter()
            .map(|i| -> Result<Option<f64>> {
                let mut rng = trial_rng(seed, i);
                let (x, y) = (self.ball.sample(&mut rng), self.ball.sample(&mut rng));
                let c = &self.ball.curvature;
                let d = distance(&x, &y, c)?;
                if d <= 1e-8 {
                    return Ok(None);
                }
                Ok(Some(distance(&self.apply(&x)?, &self.apply(&y)?, c)? / d))
            })
            .collect::<Result<_>>()?;
        let mut report = NonexpansiveReport { max_expansion_ratio: 0.0, violations: 0, pairs_evaluated: 0 };
        for r in ratios.into_iter().flatten() {
            report.pairs_evaluated += 1;
            report.max_expansion_ratio = report.max_expansion_ratio.max(r);
            if r > 1.0 + tol {
                report.violations += 1;
            }
        }
        Ok(report)
    }
}
