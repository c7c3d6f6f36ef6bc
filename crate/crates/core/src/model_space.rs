//! Geometry of the model spaces M^n_κ: the unit sphere of R^{n+1} with all
//! distances multiplied by 1/√κ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-norm tolerance accepted for stored points.
pub const UNIT_TOL: f64 = 1e-12;
/// Below this angular separation two points are treated as one.
pub const COINCIDENT: f64 = 1e-12;
/// Angular slack to π under which a geodesic is considered non-unique.
const ANTIPODAL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    kappa: f64,
    dim: usize,
}

impl Curvature {
    pub fn new(kappa: f64, dim: usize) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Domain(format!("curvature must be positive, got {kappa}")));
        }
        if dim < 2 {
            return Err(Error::Domain(format!("sphere dimension must be at least 2, got {dim}")));
        }
        Ok(Curvature { kappa, dim })
    }

    /// S² with κ = 1.
    pub fn unit_sphere() -> Self {
        Curvature { kappa: 1.0, dim: 2 }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sqrt_kappa(&self) -> f64 {
        self.kappa.sqrt()
    }

    /// Diameter D_κ = π/√κ.
    pub fn d_kappa(&self) -> f64 {
        PI / self.kappa.sqrt()
    }

    /// Same curvature on the 2-sphere, where comparison triangles live.
    pub fn planar(&self) -> Self {
        Curvature { kappa: self.kappa, dim: 2 }
    }
}

/// A point of M^n_κ stored as a unit vector of R^{n+1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ModelPoint(Vec<f64>);

impl TryFrom<Vec<f64>> for ModelPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ModelPoint::new(v)
    }
}

impl From<ModelPoint> for Vec<f64> {
    fn from(p: ModelPoint) -> Self {
        p.0
    }
}

impl ModelPoint {
    /// Accepts a vector whose Euclidean norm is 1 within [`UNIT_TOL`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidPoint { norm: n });
        }
        Ok(ModelPoint(coords))
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalized(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidPoint { norm: n });
        }
        Ok(ModelPoint(coords.into_iter().map(|c| c / n).collect()))
    }

    /// The standard basis vector e_i of R^{dim+1}.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim + 1];
        v[i] = 1.0;
        ModelPoint(v)
    }

    /// The pole (0, …, 0, 1).
    pub fn pole(dim: usize) -> Self {
        Self::basis(dim, dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Wraps a vector already known to be close to unit norm, renormalizing it.
    pub(crate) fn from_unnormalized(mut v: Vec<f64>) -> Self {
        let n = norm(&v);
        for c in v.iter_mut() {
            *c /= n;
        }
        ModelPoint(v)
    }

    pub(crate) fn check(&self, c: &Curvature) -> Result<()> {
        if self.0.len() != c.dim + 1 {
            return Err(Error::DimensionMismatch { expected: c.dim + 1, got: self.0.len() });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sum_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum::<f64>().sqrt()
}

/// Angle between unit vectors. Uses the half-chord form, which stays accurate
/// near 0 and π where arccos of the inner product loses half the digits.
pub(crate) fn angle(p: &[f64], q: &[f64]) -> f64 {
    2.0 * diff_norm(p, q).atan2(sum_norm(p, q))
}

fn pair_check(p: &ModelPoint, q: &ModelPoint, c: &Curvature) -> Result<()> {
    p.check(c)?;
    q.check(c)?;
    Ok(())
}

/// Distance d(p, q) = (1/√κ)·∠(p, q).
pub fn distance(p: &ModelPoint, q: &ModelPoint, c: &Curvature) -> Result<f64> {
    pair_check(p, q, c)?;
    Ok(angle(&p.0, &q.0) / c.sqrt_kappa())
}

/// Spherical interpolation on unit vectors at angular fraction t of the way
/// from p to q. Callers guarantee the angle is below π.
pub(crate) fn slerp(p: &[f64], q: &[f64], t: f64) -> Vec<f64> {
    let th = angle(p, q);
    if th < COINCIDENT {
        return p.to_vec();
    }
    let s = th.sin();
    let a = ((1.0 - t) * th).sin() / s;
    let b = (t * th).sin() / s;
    p.iter().zip(q).map(|(x, y)| a * x + b * y).collect()
}

/// The point at parameter t from p on the geodesic [p, q], so that
/// d(p, w) = t·d(p, q).
pub fn geodesic_point(p: &ModelPoint, q: &ModelPoint, t: f64, c: &Curvature) -> Result<ModelPoint> {
    pair_check(p, q, c)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("geodesic parameter {t} outside [0,1]")));
    }
    let th = angle(&p.0, &q.0);
    if th < COINCIDENT || t == 0.0 {
        return Ok(p.clone());
    }
    if PI - th < ANTIPODAL_SLACK {
        return Err(Error::Domain("points are antipodal, geodesic is not unique".into()));
    }
    if t == 1.0 {
        return Ok(q.clone());
    }
    Ok(ModelPoint::from_unnormalized(slerp(&p.0, &q.0, t)))
}

/// Unit tangent at x pointing toward y, or None when y coincides with x.
fn tangent(x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let xy = dot(x, y);
    let u: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - xy * b).collect();
    let n = norm(&u);
    if n < 1e-300 {
        None
    } else {
        Some(u.into_iter().map(|a| a / n).collect())
    }
}

/// Angle at x of the triangle (x, y, z).
pub fn vertex_angle(x: &ModelPoint, y: &ModelPoint, z: &ModelPoint, c: &Curvature) -> Result<f64> {
    pair_check(x, y, c)?;
    z.check(c)?;
    let (axy, axz, ayz) = (angle(&x.0, &y.0), angle(&x.0, &z.0), angle(&y.0, &z.0));
    if axy < COINCIDENT || axz < COINCIDENT {
        return Err(Error::DegenerateTriangle("vertex coincides with an endpoint".into()));
    }
    if [axy, axz, ayz].iter().any(|a| PI - a < ANTIPODAL_SLACK) {
        return Err(Error::Domain("a side reaches the diameter D_κ".into()));
    }
    let (u, v) = match (tangent(&x.0, &y.0), tangent(&x.0, &z.0)) {
        (Some(u), Some(v)) => (u, v),
        _ => return Err(Error::DegenerateTriangle("vertex coincides with an endpoint".into())),
    };
    Ok(angle(&u, &v).clamp(0.0, PI))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTriangle {
    pub xbar: ModelPoint,
    pub ybar: ModelPoint,
    pub zbar: ModelPoint,
    pub curvature: Curvature,
}

fn hav(a: f64) -> f64 {
    let s = (a / 2.0).sin();
    s * s
}

/// Triangle in M²_κ with sides |x̄ȳ| = dxy, |ȳz̄| = dyz, |z̄x̄| = dzx, placed with
/// x̄ at the pole, ȳ in the x–z coordinate plane (first coordinate ≥ 0) and z̄
/// with nonnegative second coordinate.
pub fn comparison_triangle(dxy: f64, dyz: f64, dzx: f64, c: &Curvature) -> Result<ComparisonTriangle> {
    let dk = c.d_kappa();
    for d in [dxy, dyz, dzx] {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::InfeasibleTriangle(format!("side length {d} is not a nonnegative number")));
        }
        if d >= dk {
            return Err(Error::InfeasibleTriangle(format!("side {d} is not below D_κ = {dk}")));
        }
    }
    if dxy + dyz + dzx >= 2.0 * dk {
        return Err(Error::InfeasibleTriangle("perimeter is not below 2·D_κ".into()));
    }
    let slack = 1e-12 * (1.0 + dxy + dyz + dzx);
    if dyz > dxy + dzx + slack || dxy > dyz + dzx + slack || dzx > dxy + dyz + slack {
        return Err(Error::InfeasibleTriangle("triangle inequality fails".into()));
    }
    let sk = c.sqrt_kappa();
    let (a, b, e) = (dxy * sk, dzx * sk, dyz * sk);
    let denom = a.sin() * b.sin();
    let gamma = if denom <= 0.0 {
        0.0
    } else {
        let h = ((hav(e) - hav(a - b)) / denom).clamp(0.0, 1.0);
        2.0 * h.sqrt().asin()
    };
    let xbar = ModelPoint(vec![0.0, 0.0, 1.0]);
    let ybar = ModelPoint::from_unnormalized(vec![a.sin(), 0.0, a.cos()]);
    let zbar = ModelPoint::from_unnormalized(vec![b.sin() * gamma.cos(), b.sin() * gamma.sin(), b.cos()]);
    Ok(ComparisonTriangle { xbar, ybar, zbar, curvature: c.planar() })
}

/// d(p̄, q̄) − d(p, q) for p at parameter s on [x, y] and q at parameter t on
/// [x, z], with p̄, q̄ the corresponding points of the comparison triangle.
pub fn cat_inequality_residual(
    x: &ModelPoint,
    y: &ModelPoint,
    z: &ModelPoint,
    s: f64,
    t: f64,
    c: &Curvature,
) -> Result<f64> {
    let (dxy, dyz, dzx) = (distance(x, y, c)?, distance(y, z, c)?, distance(z, x, c)?);
    let tri = comparison_triangle(dxy, dyz, dzx, c)?;
    let p = geodesic_point(x, y, s, c)?;
    let q = geodesic_point(x, z, t, c)?;
    let cc = tri.curvature;
    let pb = geodesic_point(&tri.xbar, &tri.ybar, s, &cc)?;
    let qb = geodesic_point(&tri.xbar, &tri.zbar, t, &cc)?;
    Ok(distance(&pb, &qb, &cc)? - distance(&p, &q, c)?)
}
