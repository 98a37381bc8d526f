//! Weierstrass functions for the lattice `Λ = ℤ + ℤτ` (periods `1` and `τ`,
//! not the classical `2ω₁, 2ω₂`), the Hecke function, and the analytic objects
//! of the Lamé ansatz.
//!
//! `σ`, `ζ`, `℘` and `℘'` come from the Jacobi `θ₁` series at `q = e^{iπτ}`
//! after reducing `z` into the period parallelogram centred at 0. The
//! quasi-period `η₁` and the invariants `g₂, g₃` come from Eisenstein series
//! in `e^{2πiτ}`, and `η₂` from `η₁` at `-1/τ`. The two routes are independent,
//! so the Legendre relation and `℘'² = 4℘³ - g₂℘ - g₃` are genuine checks.
//! `τ` is never moved by the modular group: the monodromy parameters refer to the
//! marked basis `(1, τ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// Points closer than this to a pole are rejected.
pub const POLE_RADIUS: f64 = 1e-8;
/// Smallest admissible `Im τ`.
pub const MIN_IM_TAU: f64 = 0.1;
/// Default series truncation tolerance.
pub const DEFAULT_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeierError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("evaluation at {z} is within {radius:e} of a pole")]
    Pole { z: C, radius: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

/// `Σ_{k≥1} k^p x^k / (1 - x^k)` for `|x| < 1`.
fn lambert(x: C, power: i32, tol: f64) -> Result<C, WeierError> {
    const MAX_TERMS: usize = 50_000;
    let mut sum = C::new(0.0, 0.0);
    let mut xk = C::new(1.0, 0.0);
    let mut small = 0;
    for k in 1..=MAX_TERMS {
        xk *= x;
        let term = xk * (k as f64).powi(power) / (C::new(1.0, 0.0) - xk);
        sum += term;
        if term.norm() <= tol * sum.norm().max(1.0) {
            small += 1;
            if small >= 2 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(WeierError::Numeric(format!(
        "Lambert series in |x| = {} did not converge",
        x.norm()
    )))
}

fn nome_squared(tau: C) -> C {
    (2.0 * PI * I * tau).exp()
}

/// `η₁(τ) = ζ(z+1) - ζ(z) = (π²/3)·E₂(τ)`.
fn eta1_series(tau: C, tol: f64) -> Result<C, WeierError> {
    let e2 = 1.0 - 24.0 * lambert(nome_squared(tau), 1, tol)?;
    Ok(PI * PI / 3.0 * e2)
}

/// Jacobi `θ₁` and its first three derivatives at `u` for nome `q = e^{iπτ}`.
fn theta1_derivs(tau: C, u: C, tol: f64) -> [C; 4] {
    let mut acc = [C::new(0.0, 0.0); 4];
    let mut lead = 0.0;
    for k in 0..400usize {
        let half = k as f64 + 0.5;
        let m = 2.0 * k as f64 + 1.0;
        let coef = (I * PI * tau * half * half).exp() * if k % 2 == 0 { 1.0 } else { -1.0 };
        let bound = coef.norm() * m.powi(3) * (m * u.im.abs()).exp();
        if k == 0 {
            lead = bound;
        } else if bound < tol * 1e-4 * lead {
            break;
        }
        let (sin, cos) = ((m * u).sin(), (m * u).cos());
        acc[0] += coef * sin;
        acc[1] += coef * m * cos;
        acc[2] -= coef * m * m * sin;
        acc[3] -= coef * m * m * m * cos;
    }
    acc.map(|v| 2.0 * v)
}

/// Lattice `ℤ + ℤτ` with its quasi-periods and invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeData {
    #[serde(serialize_with = "ser_complex")]
    pub tau: C,
    #[serde(serialize_with = "ser_complex")]
    pub eta1: C,
    #[serde(serialize_with = "ser_complex")]
    pub eta2: C,
    #[serde(serialize_with = "ser_complex")]
    pub g2: C,
    #[serde(serialize_with = "ser_complex")]
    pub g3: C,
    pub tol: f64,
    #[serde(skip)]
    theta1_prime0: C,
}

pub(crate) fn ser_complex<S: serde::Serializer>(z: &C, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

impl LatticeData {
    /// Tolerance of the Legendre check `η₁τ - η₂ = 2πi`, scaled by the size of the terms.
    pub fn legendre_tolerance(&self) -> f64 {
        10.0 * self.tol * (1.0 + (self.eta1 * self.tau).norm() + self.eta2.norm())
    }

    pub fn legendre_defect(&self) -> f64 {
        (self.eta1 * self.tau - self.eta2 - 2.0 * PI * I).norm()
    }

    /// Reduces `z = z₀ + m + kτ` with `z₀` in the parallelogram centred at 0.
    pub fn reduce(&self, z: C) -> (C, i64, i64) {
        let y = z.im / self.tau.im;
        let x = z.re - y * self.tau.re;
        let (m, k) = (x.round(), y.round());
        (z - m - k * self.tau, m as i64, k as i64)
    }

    /// Distance from `z` to the nearest lattice point.
    pub fn lattice_distance(&self, z: C) -> f64 {
        let (z0, _, _) = self.reduce(z);
        let mut best = f64::INFINITY;
        for i in -1..=1 {
            for j in -1..=1 {
                best = best.min((z0 - i as f64 - j as f64 * self.tau).norm());
            }
        }
        best
    }

    fn check_pole(&self, z: C) -> Result<(), WeierError> {
        if self.lattice_distance(z) < POLE_RADIUS {
            Err(WeierError::Pole {
                z,
                radius: POLE_RADIUS,
            })
        } else {
            Ok(())
        }
    }

    fn theta_at(&self, z0: C) -> [C; 4] {
        theta1_derivs(self.tau, PI * z0, self.tol)
    }

    pub fn period(&self, direction: Direction) -> C {
        match direction {
            Direction::One => C::new(1.0, 0.0),
            Direction::Two => self.tau,
        }
    }
}

/// Builds the lattice data and validates the Legendre relation.
pub fn lattice_constants(tau: C, tol: f64) -> Result<LatticeData, WeierError> {
    if !(tau.im.is_finite() && tau.re.is_finite()) || tau.im < MIN_IM_TAU {
        return Err(WeierError::Domain(format!(
            "need Im τ >= {MIN_IM_TAU}, got τ = {tau}"
        )));
    }
    if !(tol > 0.0) {
        return Err(WeierError::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let eta1 = eta1_series(tau, tol)?;
    // homogeneity: Λ = τ·(ℤ + ℤ(-1/τ)), so η₂(τ) = η₁(-1/τ)/τ
    let eta2 = eta1_series(-1.0 / tau, tol)? / tau;
    let q2 = nome_squared(tau);
    let pi4 = PI.powi(4);
    let g2 = 4.0 * pi4 / 3.0 * (1.0 + 240.0 * lambert(q2, 3, tol)?);
    let g3 = 8.0 * pi4 * PI * PI / 27.0 * (1.0 - 504.0 * lambert(q2, 5, tol)?);
    let theta1_prime0 = theta1_derivs(tau, C::new(0.0, 0.0), tol)[1];
    let lattice = LatticeData {
        tau,
        eta1,
        eta2,
        g2,
        g3,
        tol,
        theta1_prime0,
    };
    let defect = lattice.legendre_defect();
    if defect > lattice.legendre_tolerance() {
        return Err(WeierError::Numeric(format!(
            "Legendre relation fails at τ = {tau}: |η₁τ - η₂ - 2πi| = {defect:e}"
        )));
    }
    Ok(lattice)
}

pub fn wp(z: C, lattice: &LatticeData) -> Result<C, WeierError> {
    lattice.check_pole(z)?;
    let (z0, _, _) = lattice.reduce(z);
    let [t0, t1, t2, _] = lattice.theta_at(z0);
    Ok(-lattice.eta1 - PI * PI * (t2 * t0 - t1 * t1) / (t0 * t0))
}

pub fn wp_prime(z: C, lattice: &LatticeData) -> Result<C, WeierError> {
    lattice.check_pole(z)?;
    let (z0, _, _) = lattice.reduce(z);
    let [t0, t1, t2, t3] = lattice.theta_at(z0);
    let r1 = t1 / t0;
    let r2 = t2 / t0;
    let r3 = t3 / t0;
    Ok(-PI.powi(3) * (r3 - 3.0 * r2 * r1 + 2.0 * r1 * r1 * r1))
}

pub fn zeta_w(z: C, lattice: &LatticeData) -> Result<C, WeierError> {
    lattice.check_pole(z)?;
    let (z0, m, k) = lattice.reduce(z);
    let [t0, t1, _, _] = lattice.theta_at(z0);
    Ok(lattice.eta1 * z0 + PI * t1 / t0 + m as f64 * lattice.eta1 + k as f64 * lattice.eta2)
}

pub fn sigma_w(z: C, lattice: &LatticeData) -> C {
    let (z0, m, k) = lattice.reduce(z);
    let [t0, _, _, _] = lattice.theta_at(z0);
    let base = (lattice.eta1 * z0 * z0 / 2.0).exp() * t0 / (PI * lattice.theta1_prime0);
    if m == 0 && k == 0 {
        return base;
    }
    // σ(z₀ + w) = ±exp(η_w(z₀ + w/2))σ(z₀), sign + iff w/2 ∈ Λ
    let w = m as f64 + k as f64 * lattice.tau;
    let eta_w = m as f64 * lattice.eta1 + k as f64 * lattice.eta2;
    let sign = if m % 2 == 0 && k % 2 == 0 { 1.0 } else { -1.0 };
    sign * (eta_w * (z0 + w / 2.0)).exp() * base
}

/// Hecke function `Z(t + sτ) = ζ(t + sτ) - tη₁ - sη₂`.
pub fn hecke_z(t: f64, s: f64, lattice: &LatticeData) -> Result<C, WeierError> {
    let a = t + s * lattice.tau;
    Ok(zeta_w(a, lattice)? - t * lattice.eta1 - s * lattice.eta2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    One,
    Two,
}

/// One ansatz point `a = t + sτ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnsatzPoint {
    pub t: f64,
    pub s: f64,
    #[serde(serialize_with = "ser_complex")]
    pub a: C,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzData {
    pub n: usize,
    pub points: Vec<AnsatzPoint>,
    pub lattice: LatticeData,
}

impl AnsatzData {
    /// Points given as `(t_μ, s_μ)`; none may lie on the lattice.
    pub fn new(lattice: LatticeData, coords: &[(f64, f64)]) -> Result<Self, WeierError> {
        if coords.is_empty() {
            return Err(WeierError::Domain(
                "the ansatz needs at least one point".into(),
            ));
        }
        let points: Vec<AnsatzPoint> = coords
            .iter()
            .map(|&(t, s)| AnsatzPoint {
                t,
                s,
                a: t + s * lattice.tau,
            })
            .collect();
        for p in &points {
            lattice.check_pole(p.a)?;
        }
        Ok(AnsatzData {
            n: points.len(),
            points,
            lattice,
        })
    }

    pub fn s_total(&self) -> f64 {
        self.points.iter().map(|p| p.s).sum()
    }

    pub fn t_total(&self) -> f64 {
        self.points.iter().map(|p| p.t).sum()
    }

    /// `Σ_μ Z(a_μ)`.
    pub fn hecke_sum(&self) -> Result<C, WeierError> {
        self.points
            .iter()
            .map(|p| hecke_z(p.t, p.s, &self.lattice))
            .sum()
    }

    /// Poles of `g`: the points `±a_μ`.
    pub fn g_poles(&self) -> Vec<C> {
        self.points.iter().flat_map(|p| [p.a, -p.a]).collect()
    }
}

/// `g = (log f)' = Σ_μ ℘'(a_μ) / (℘(z) - ℘(a_μ))` for `f = w_a / w_{-a}`.
pub fn g_fn(z: C, ansatz: &AnsatzData) -> Result<C, WeierError> {
    let lattice = &ansatz.lattice;
    for pole in ansatz.g_poles() {
        if lattice.lattice_distance(z - pole) < POLE_RADIUS {
            return Err(WeierError::Pole {
                z,
                radius: POLE_RADIUS,
            });
        }
    }
    let wz = wp(z, lattice)?;
    let mut acc = C::new(0.0, 0.0);
    for p in &ansatz.points {
        acc += wp_prime(p.a, lattice)? / (wz - wp(p.a, lattice)?);
    }
    Ok(acc)
}

/// Hard lower bound on the distance between the integration path and the poles of `g`.
pub const QUAD_POLE_GUARD: f64 = 1e-3;
const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_DEPTH: u32 = 48;

fn segment_distance(p: C, a: C, b: C) -> f64 {
    let d = b - a;
    let lam = ((p - a) * d.conj()).re / d.norm_sqr();
    let lam = lam.clamp(0.0, 1.0);
    (p - (a + lam * d)).norm()
}

fn path_clearance(ansatz: &AnsatzData, start: C, end: C) -> f64 {
    let tau = ansatz.lattice.tau;
    let mut best = f64::INFINITY;
    for pole in ansatz
        .g_poles()
        .into_iter()
        .chain(std::iter::once(C::new(0.0, 0.0)))
    {
        let (p0, _, _) = ansatz.lattice.reduce(pole - start);
        for i in -2..=2 {
            for j in -2..=2 {
                let p = start + p0 + i as f64 + j as f64 * tau;
                best = best.min(segment_distance(p, start, end));
            }
        }
    }
    best
}

struct Simpson<'a> {
    f: &'a dyn Fn(f64) -> Result<C, WeierError>,
    evals: usize,
}

impl Simpson<'_> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        a: f64,
        b: f64,
        fa: C,
        fm: C,
        fb: C,
        whole: C,
        tol: f64,
        depth: u32,
    ) -> Result<C, WeierError> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let flm = (self.f)(lm)?;
        let frm = (self.f)(rm)?;
        self.evals += 2;
        let h = b - a;
        let left = h / 12.0 * (fa + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.norm() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(WeierError::Numeric(format!(
                "adaptive Simpson did not converge on [{a}, {b}] (|delta| = {:e})",
                delta.norm()
            )));
        }
        Ok(self.recurse(a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + self.recurse(m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
}

/// Adaptive Simpson quadrature of a complex function over `[0, 1]`.
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> Result<C, WeierError>,
    tol: f64,
) -> Result<C, WeierError> {
    let mut s = Simpson { f, evals: 0 };
    // split into a few panels so a narrow peak cannot hide between the first samples
    let panels = 8;
    let mut total = C::new(0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let b = (p + 1) as f64 / panels as f64;
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += s.recurse(a, b, fa, fm, fb, whole, tol / panels as f64, QUAD_MAX_DEPTH)?;
    }
    Ok(total)
}

/// `∫ g` along `basepoint → basepoint + ω_dir`; `f(z + ω) = exp(∫g)·f(z)`.
///
/// Poles of `g` have residues `±1`, so any parallel displacement of the path
/// changes the value by a multiple of `2πi` only. The path is offset when a
/// pole comes within reach, and re-based on quadrature failure.
pub fn monodromy_exponent(
    direction: Direction,
    ansatz: &AnsatzData,
    basepoint: C,
) -> Result<C, WeierError> {
    let omega = ansatz.lattice.period(direction);
    let normal = I * omega / omega.norm();
    let offsets = [
        0.0, 0.1, -0.1, 0.2, -0.2, 0.3, -0.3, 0.05, -0.05, 0.15, -0.15, 0.25, -0.25,
    ];
    let mut candidates: Vec<(f64, C)> = offsets
        .iter()
        .map(|&o| {
            let start = basepoint + o * normal;
            (path_clearance(ansatz, start, start + omega), start)
        })
        .collect();
    // prefer the first candidate with comfortable clearance, then by clearance
    let comfortable = 0.05;
    candidates.sort_by(|a, b| {
        let ka = a.0 >= comfortable;
        let kb = b.0 >= comfortable;
        kb.cmp(&ka).then(b.0.total_cmp(&a.0))
    });
    if let Some(pos) = candidates.iter().position(|c| c.0 >= comfortable) {
        let first = candidates.remove(pos);
        candidates.insert(0, first);
    }
    let mut last_err = None;
    for (clearance, start) in candidates {
        if clearance < QUAD_POLE_GUARD {
            continue;
        }
        let integrand =
            |lam: f64| -> Result<C, WeierError> { Ok(g_fn(start + lam * omega, ansatz)? * omega) };
        match adaptive_simpson(&integrand, QUAD_TOL) {
            Ok(v) => return Ok(v),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        WeierError::Numeric(format!(
            "no integration path from {basepoint} stays {QUAD_POLE_GUARD:e} away from the poles of g"
        ))
    }))
}

/// Distance of `x` from the nearest point of `2πiℤ`.
pub fn distance_mod_2pi_i(x: C) -> f64 {
    let two_pi = 2.0 * PI;
    let im = x.im - two_pi * (x.im / two_pi).round();
    C::new(x.re, im).norm()
}

/// `w_a(z) = exp(z·Σζ(a_μ))·Π σ(z - a_μ)/σ(z)`.
pub fn ansatz_value(z: C, ansatz: &AnsatzData) -> Result<C, WeierError> {
    let lattice = &ansatz.lattice;
    lattice.check_pole(z)?;
    let mut zeta_sum = C::new(0.0, 0.0);
    let mut prod = C::new(1.0, 0.0);
    let sz = sigma_w(z, lattice);
    for p in &ansatz.points {
        zeta_sum += zeta_w(p.a, lattice)?;
        prod *= sigma_w(z - p.a, lattice) / sz;
    }
    Ok((z * zeta_sum).exp() * prod)
}

/// `B = (2n - 1)·Σ ℘(a_μ)`.
pub fn accessory_b(ansatz: &AnsatzData) -> Result<C, WeierError> {
    let sum: Result<C, WeierError> = ansatz.points.iter().map(|p| wp(p.a, &ansatz.lattice)).sum();
    Ok((2.0 * ansatz.n as f64 - 1.0) * sum?)
}

/// Step of the finite-difference second derivative in [`ode_residual`].
pub const ODE_FD_STEP: f64 = 2e-3;

/// `|w'' - (n(n+1)℘(z) + B)·w| / |w|`, with `w''` from a sixth-order central difference.
pub fn ode_residual(z: C, ansatz: &AnsatzData) -> Result<f64, WeierError> {
    let h = ODE_FD_STEP;
    const W: [f64; 7] = [
        1.0 / 90.0,
        -3.0 / 20.0,
        3.0 / 2.0,
        -49.0 / 18.0,
        3.0 / 2.0,
        -3.0 / 20.0,
        1.0 / 90.0,
    ];
    let mut second = C::new(0.0, 0.0);
    let mut w0 = C::new(0.0, 0.0);
    for (i, weight) in W.iter().enumerate() {
        let offset = i as f64 - 3.0;
        let v = ansatz_value(z + offset * h, ansatz)?;
        if i == 3 {
            w0 = v;
        }
        second += *weight * v;
    }
    second /= h * h;
    let n = ansatz.n as f64;
    let b = accessory_b(ansatz)?;
    let potential = n * (n + 1.0) * wp(z, &ansatz.lattice)? + b;
    Ok((second - potential * w0).norm() / w0.norm())
}
