//! A slow, naive re-derivation of the rate functionals and the tower, written
//! against the formulas directly: machine integers, plain ceilings, no
//! closed forms and no sharing with the library's evaluation code.

#![allow(dead_code)]

pub type Nat = u128;

/// ⌈x⌉ of a finite real.
pub fn ceil(x: f64) -> i128 {
    assert!(x.is_finite(), "ceiling of {x}");
    x.ceil() as i128
}

pub fn ceil_nat(x: f64) -> Nat {
    assert!(x >= 0.0, "negative ceiling argument {x}");
    ceil(x) as Nat
}

pub fn max1(v: i128) -> Nat {
    v.max(1) as Nat
}

/// Step-size moduli as plain closures.
pub struct Moduli {
    pub theta: Box<dyn Fn(Nat) -> Nat>,
    pub alpha: Box<dyn Fn(f64) -> Nat>,
    pub gamma: Box<dyn Fn(f64) -> Nat>,
}

pub fn pow4(e: Nat) -> Nat {
    4u128.checked_pow(e as u32).expect("4^e overflows u128")
}

/// λ_n = 1/(n+1): α = γ = ⌈1/ε⌉, θ(n) = 4^(n+1).
pub fn harmonic() -> Moduli {
    Moduli {
        theta: Box::new(|n| pow4(n + 1)),
        alpha: Box::new(|e| ceil_nat(1.0 / e).max(1)),
        gamma: Box::new(|e| ceil_nat(1.0 / e).max(1)),
    }
}

/// λ_n = (n+1)^(−1/2): α = γ = ⌈ε^(−2)⌉, θ(n) = ⌈(n+4)²/4⌉.
pub fn inverse_sqrt() -> Moduli {
    Moduli {
        theta: Box::new(|n| ((n + 4) * (n + 4)).div_ceil(4)),
        alpha: Box::new(|e| ceil_nat(1.0 / (e * e)).max(1)),
        gamma: Box::new(|e| ceil_nat(1.0 / (e * e)).max(1)),
    }
}

pub fn k_of(x: f64) -> Nat {
    ceil_nat(1.0 / x.cos())
}

pub fn phi_tilde(eps: f64, kappa: f64, m: f64, md: &Moduli) -> Nat {
    let x = m * kappa.sqrt();
    let inner = (md.gamma)(eps / (2.0 * m)) + max1(ceil((2.0 * m / eps).ln()));
    (md.theta)(k_of(x) * inner)
}

pub fn phi(eps: f64, kappa: f64, m: f64, md: &Moduli) -> Nat {
    phi_tilde(eps / 2.0, kappa, m, md).max((md.alpha)(eps / (2.0 * m)))
}

pub fn psi_harmonic(eps: f64, kappa: f64, m: f64) -> Nat {
    let x = m * kappa.sqrt();
    pow4(k_of(x) * ceil_nat(8.0 * m / eps + 2.0))
}

pub fn sequence_lemma(eps: f64, p: f64, md: &Moduli) -> Nat {
    (md.theta)((md.gamma)(eps / 2.0) + max1(ceil((2.0 * p / eps).ln()))) + 1
}

/// The limsup rate at L = cos(x)·t·ε/(4x).
pub fn limsup(eps: f64, kappa: f64, m: f64, t: f64, md: &Moduli) -> Nat {
    let x = m * kappa.sqrt();
    let l = x.cos() * t * eps / (4.0 * x);
    let first = (md.theta)(k_of(x) * ((md.gamma)(l) + max1(ceil((1.0 / l).ln()))));
    first.max((md.alpha)(2.0 * l))
}

/// K(ε, g, M) with g̃ iterated one step at a time.
pub fn browder_k(eps: f64, kappa: f64, m: f64, g: &dyn Fn(Nat) -> Nat) -> Nat {
    let x = m * kappa.sqrt();
    let steps = ceil_nat(x * x.tan() / (1.0 - eps.cos()));
    let mut n = 0;
    for _ in 0..steps {
        n += g(n);
    }
    n
}

/// Θ and Δ of the recurrence lemma, Δ as (numerator, denominator).
pub fn recurrence_bounds(eps: f64, l: f64, theta: &dyn Fn(Nat) -> Nat, psi: Nat, g: &dyn Fn(Nat) -> Nat) -> (Nat, f64, Nat) {
    let big = theta(psi - 1 + max1(ceil((3.0 * l / eps).ln()))) + 1;
    let n = big - psi;
    let g_eps = n + g(n + psi);
    (big, eps, 3 * g_eps)
}

/// Every scalar and the final value of the metastability tower.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerRef {
    pub eps0: f64,
    pub k0: Nat,
    pub b: Nat,
    pub s: i128,
    pub t: i128,
    /// f̃*^j(0) for j = 0..=B.
    pub orbit: Vec<Nat>,
    pub gamma_arg: Nat,
    pub gamma: Nat,
    pub theta_plus: Nat,
    pub sigma: Nat,
}

pub struct TowerInput<'a> {
    pub eps: f64,
    pub kappa: f64,
    pub m: f64,
    pub md: &'a Moduli,
    pub g: &'a dyn Fn(Nat) -> Nat,
}

impl TowerInput<'_> {
    fn x(&self) -> f64 {
        self.m * self.kappa.sqrt()
    }

    fn e4(&self) -> f64 {
        (self.eps * self.kappa.sqrt() / 4.0).sin().powi(2)
    }

    /// χ_i(δ): the limsup rate at t = 1/(i+1).
    pub fn chi(&self, i: Nat, delta: f64) -> Nat {
        let x = self.x();
        let l = x.cos() * delta / (4.0 * x * (i as f64 + 1.0));
        let first = (self.md.theta)(k_of(x) * ((self.md.gamma)(l) + max1(ceil((1.0 / l).ln()))));
        first.max((self.md.alpha)(2.0 * l))
    }

    pub fn chi_star(&self, i: Nat, delta: f64) -> Nat {
        self.chi(i, delta * self.x().cos() / 2.0)
    }

    pub fn t_of(&self, delta: f64) -> i128 {
        ceil((3.0 / delta * (self.x() / 2.0).sin().powi(2)).ln())
    }

    pub fn big_theta(&self, i: Nat, delta: f64) -> Nat {
        let cs = self.chi_star(i, delta / 3.0);
        (self.md.theta)(k_of(self.x()) * (cs - 1 + max1(self.t_of(delta)))) + 1
    }

    /// Denominator of Δ*_i(δ, g) = δ/denominator.
    pub fn delta_star_den(&self, i: Nat, delta: f64) -> Nat {
        let th = self.big_theta(i, delta);
        3 * th - 3 * self.chi_star(i, delta / 3.0) + 3 * (self.g)(th)
    }

    pub fn f(&self, i: Nat) -> Nat {
        let e4 = self.e4();
        let q = ceil_nat(self.x() * self.delta_star_den(i, e4) as f64 / e4);
        q.max(i) - i
    }

    pub fn f_tilde_star(&self, i: Nat, k0: Nat) -> Nat {
        i + self.f(i + k0) + k0
    }

    pub fn evaluate(&self) -> TowerRef {
        let x = self.x();
        let e4 = self.e4();
        let eps0 = x.cos() / 36.0 * e4;
        let k0 = ceil_nat(1.0 / eps0);
        let b = ceil_nat(x * x.tan() / (2.0 * (eps0 / 2.0).sin().powi(2)));
        let s = ceil((3.0 * (x / 2.0).sin().powi(2) / e4).ln());
        let mut orbit = vec![0];
        for _ in 0..b {
            let i = *orbit.last().unwrap();
            orbit.push(self.f_tilde_star(i, k0));
        }
        let n = orbit.last().unwrap() + k0;
        let gamma = (k0..=n).map(|i| self.chi_star(i, e4 / 3.0)).max().unwrap();
        let arg = k_of(x) * (gamma - 1 + max1(s));
        let theta_plus = (1..=arg).map(|i| (self.md.theta)(i)).max().unwrap();
        TowerRef { eps0, k0, b, s, t: self.t_of(e4), orbit, gamma_arg: n, gamma, theta_plus, sigma: theta_plus + 1 }
    }
}

// Sphere geometry from raw coordinates.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Great-circle distance on the radius-1/√κ sphere, via the chord length.
pub fn dist(a: &[f64], b: &[f64], kappa: f64) -> f64 {
    let chord = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    2.0 * (chord / 2.0).min(1.0).asin() / kappa.sqrt()
}

/// The point at fraction `t` of the great-circle arc from a to b.
pub fn arc_point(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let w = dist(a, b, 1.0);
    if w < 1e-15 {
        return a.to_vec();
    }
    let (ca, cb) = (((1.0 - t) * w).sin() / w.sin(), (t * w).sin() / w.sin());
    a.iter().zip(b).map(|(p, q)| ca * p + cb * q).collect()
}
