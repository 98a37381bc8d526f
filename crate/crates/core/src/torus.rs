//! Spherical tori with one conical singularity of angle `2π(2n+1)`, and the
//! census oracle built on them.
//!
//! A torus with a labelled 2-torsion point is fixed by an integer angle triple
//! `θ` with `θ₁+θ₂+θ₃ = 2n+1` and a length triple `λ = ℓ/2π` of the basic
//! triangle. Monodromy parameters are derived from `(θ, λ)`, never enumerated
//! on their own. Lamé equations are the orbits of the cyclic relabelling
//! `(θᵢ, λᵢ) → (θᵢ₊₁, λᵢ₊₁)`, counted by Burnside's lemma.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{gcd3, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TorusError {
    #[error("invalid angle triple {0:?}: {1}")]
    InvalidTheta([u64; 3], &'static str),
    #[error("invalid length triple: {0}")]
    InvalidLengths(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Projective monodromy (parameters `2s, 2t`) or ordinary monodromy (`s, t`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Projective,
    Ordinary,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Projective => "proj",
            Mode::Ordinary => "ord",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proj" | "projective" => Ok(Mode::Projective),
            "ord" | "ordinary" => Ok(Mode::Ordinary),
            other => Err(format!("unknown mode {other:?} (expected proj or ord)")),
        }
    }
}

/// Integer angles `(θ₁, θ₂, θ₃)` of the two isometric triangles, in units of `π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u64; 3]", into = "[u64; 3]")]
pub struct ThetaTriple([u64; 3]);

impl ThetaTriple {
    /// Validates `θᵢ ≥ 1`, odd sum `2n+1 ≥ 3`, and `θᵢ ≤ n`.
    pub fn new(theta: [u64; 3]) -> Result<Self, TorusError> {
        if theta.contains(&0) {
            return Err(TorusError::InvalidTheta(theta, "angles must be positive"));
        }
        let sum: u64 = theta.iter().sum();
        if sum.is_multiple_of(2) {
            return Err(TorusError::InvalidTheta(theta, "angle sum must be odd"));
        }
        let n = (sum - 1) / 2;
        if theta.iter().any(|&t| t > n) {
            return Err(TorusError::InvalidTheta(
                theta,
                "each angle must be at most n",
            ));
        }
        Ok(ThetaTriple(theta))
    }

    pub fn get(&self) -> [u64; 3] {
        self.0
    }

    /// The Lamé degree `n = (θ₁+θ₂+θ₃-1)/2`.
    pub fn n(&self) -> u64 {
        (self.0.iter().sum::<u64>() - 1) / 2
    }

    pub fn rotate(&self) -> Self {
        let [a, b, c] = self.0;
        ThetaTriple([b, c, a])
    }

    pub fn is_symmetric(&self) -> bool {
        self.0[0] == self.0[1] && self.0[1] == self.0[2]
    }

    pub fn satisfies_triangle_inequalities(&self) -> bool {
        let [a, b, c] = self.0;
        let ok = |x: u64, y: u64, z: u64| x.abs_diff(y) <= z && z <= x + y;
        ok(a, b, c) && ok(b, c, a) && ok(c, a, b)
    }
}

impl TryFrom<[u64; 3]> for ThetaTriple {
    type Error = TorusError;
    fn try_from(value: [u64; 3]) -> Result<Self, Self::Error> {
        ThetaTriple::new(value)
    }
}

impl From<ThetaTriple> for [u64; 3] {
    fn from(value: ThetaTriple) -> Self {
        value.0
    }
}

impl fmt::Display for ThetaTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "({a},{b},{c})")
    }
}

/// All ordered triples in `{1..n}³` with sum `2n+1`, lexicographic.
pub fn enumerate_theta_triples(n: u64) -> Vec<ThetaTriple> {
    let total = 2 * n + 1;
    let mut out = Vec::with_capacity((n * (n + 1) / 2) as usize);
    for a in 1..=n {
        for b in 1..=n {
            if a + b >= total {
                continue;
            }
            let c = total - a - b;
            if (1..=n).contains(&c) {
                out.push(ThetaTriple([a, b, c]));
            }
        }
    }
    out
}

/// Edge lengths of the basic triangle divided by `2π`: positive, summing to 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LengthTriple([Rational; 3]);

impl LengthTriple {
    pub fn new(lengths: [Rational; 3]) -> Result<Self, TorusError> {
        if lengths.iter().any(|l| !l.is_positive()) {
            return Err(TorusError::InvalidLengths(format!(
                "lengths must be positive, got {lengths:?}"
            )));
        }
        let sum: Rational = lengths.iter().cloned().sum();
        if sum != Rational::one() {
            return Err(TorusError::InvalidLengths(format!(
                "lengths must sum to 1, got {sum}"
            )));
        }
        Ok(LengthTriple(lengths))
    }

    /// `λᵢ = cᵢ/N` for a composition `c₁+c₂+c₃ = N`.
    pub fn from_parts(parts: [u64; 3], denom: u64) -> Result<Self, TorusError> {
        let d = denom as i64;
        LengthTriple::new(parts.map(|c| Rational::new(c as i64, d)))
    }

    pub fn get(&self) -> &[Rational; 3] {
        &self.0
    }

    pub fn rotate(&self) -> Self {
        let [a, b, c] = self.0.clone();
        LengthTriple([b, c, a])
    }
}

/// One spherical torus `S_θ(ℓ)` with its labelled 2-torsion on `L₁`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TorusConfig {
    pub theta: ThetaTriple,
    pub lengths: LengthTriple,
}

impl TorusConfig {
    pub fn new(theta: ThetaTriple, lengths: LengthTriple) -> Self {
        TorusConfig { theta, lengths }
    }

    pub fn n(&self) -> u64 {
        self.theta.n()
    }
}

pub fn cyclic_rotate(c: &TorusConfig) -> TorusConfig {
    TorusConfig {
        theta: c.theta.rotate(),
        lengths: c.lengths.rotate(),
    }
}

/// Monodromy parameter pair modulo 1 and modulo the sign `(x,y) ~ (-x,-y)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MonodromyClass {
    pub mode: Mode,
    pub x: Rational,
    pub y: Rational,
}

impl MonodromyClass {
    /// Reduces mod 1 and picks the lexicographic minimum of the pair and its negation.
    pub fn canonical(mode: Mode, x: &Rational, y: &Rational) -> Self {
        let plus = (x.frac(), y.frac());
        let minus = ((-x).frac(), (-y).frac());
        let (x, y) = if minus < plus { minus } else { plus };
        MonodromyClass { mode, x, y }
    }

    /// Order of the generated cyclic group: lcm of the two denominators.
    pub fn order(&self) -> u64 {
        crate::arith::lcm(self.x.denom_u64(), self.y.denom_u64())
    }
}

impl fmt::Display for MonodromyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.mode, self.x, self.y)
    }
}

/// Inverts [`projective_from_lengths`] for `u = 2s`, `v = 2t`:
/// `λ = (1-u, 1-v, u+v-1)`, so that `λ₂+λ₃ = u` and `λ₁+λ₃ = v`.
/// Needs `0 < u, v < 1` and `u+v > 1`.
pub fn lengths_from_projective(u: &Rational, v: &Rational) -> Result<LengthTriple, TorusError> {
    let one = Rational::one();
    let inside = |r: &Rational| r.is_positive() && r < &one;
    if !inside(u) || !inside(v) {
        return Err(TorusError::Domain(format!(
            "projective parameters must lie in (0,1), got ({u}, {v})"
        )));
    }
    if (u + v) <= one {
        return Err(TorusError::Domain(format!(
            "need u+v > 1 (use the sign-flipped representative), got ({u}, {v})"
        )));
    }
    LengthTriple::new([&one - u, &one - v, u + v - 1])
}

/// `±(λ₂+λ₃, λ₁+λ₃)` mod 1. Hemispheres do not change this, so `θ` is ignored.
pub fn projective_from_lengths(c: &TorusConfig) -> MonodromyClass {
    let [l1, l2, l3] = c.lengths.get();
    MonodromyClass::canonical(Mode::Projective, &(l2 + l3), &(l1 + l3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Ordinary parameters of the ansatz `w_{±a}`: the half-lengths shifted by
/// `(θ₁-1)/2` and `(θ₂-1)/2` for the attached hemispheres.
pub fn ordinary_from_config(c: &TorusConfig, sign: Sign) -> (Rational, Rational) {
    let [l1, l2, l3] = c.lengths.get();
    let [th1, th2, _] = c.theta.get();
    let half_s = (l2 + l3) / 2;
    let half_t = (l1 + l3) / 2;
    let (half_s, half_t) = match sign {
        Sign::Plus => (half_s, half_t),
        Sign::Minus => (-half_s, -half_t),
    };
    let s = half_s + Rational::new(th1 as i64 - 1, 2);
    let t = half_t + Rational::new(th2 as i64 - 1, 2);
    (s.frac(), t.frac())
}

pub fn class_of(c: &TorusConfig, mode: Mode) -> MonodromyClass {
    match mode {
        Mode::Projective => projective_from_lengths(c),
        Mode::Ordinary => {
            let (s, t) = ordinary_from_config(c, Sign::Plus);
            MonodromyClass::canonical(Mode::Ordinary, &s, &t)
        }
    }
}

/// Number of developing maps over projective parameters `(u, v) = (2s, 2t)` mod 1.
pub fn region_weight_proj(u: &Rational, v: &Rational, n: u64) -> u64 {
    if u.is_integer() || v.is_integer() || (u + v).is_integer() {
        0
    } else {
        n * (n + 1) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// Centre of the first triangle mapped to 0.
    A,
    /// Centre mapped to ∞; the negated system.
    B,
}

/// Whether ordinary parameters `(s, t)` mod 1 lie in the region belonging to `θ`.
pub fn ord_region_member(
    theta: &ThetaTriple,
    s: &Rational,
    t: &Rational,
    alt: Alternative,
) -> bool {
    match alt {
        Alternative::A => {
            let [th1, th2, _] = theta.get();
            let s = (s + Rational::new(1 - th1 as i64, 2)).frac();
            let t = (t + Rational::new(1 - th2 as i64, 2)).frac();
            let half = Rational::new(1, 2);
            s < half && t < half && (&s + &t) > half
        }
        Alternative::B => ord_region_member(theta, &(-s).frac(), &(-t).frac(), Alternative::A),
    }
}

/// Number of ansatz solutions with unitary monodromy and parameters `(s, t)` mod 1.
pub fn region_weight_ord(s: &Rational, t: &Rational, n: u64) -> u64 {
    enumerate_theta_triples(n)
        .iter()
        .map(|theta| {
            ord_region_member(theta, s, t, Alternative::A) as u64
                + ord_region_member(theta, s, t, Alternative::B) as u64
        })
        .sum()
}

/// Order of the monodromy class of `(θ, c/N)`, computed on integer numerators.
fn config_order(theta: &ThetaTriple, parts: [u64; 3], denom: u64, mode: Mode) -> u64 {
    let [c1, c2, _] = parts;
    match mode {
        // (λ₂+λ₃, λ₁+λ₃) = ((N-c₁)/N, (N-c₂)/N)
        Mode::Projective => denom / gcd3(c1, c2, denom),
        Mode::Ordinary => {
            let [th1, th2, _] = theta.get();
            let two_n = 2 * denom;
            let s = ((denom - c1) + denom * (th1 - 1)) % two_n;
            let t = ((denom - c2) + denom * (th2 - 1)) % two_n;
            two_n / gcd3(s, t, two_n)
        }
    }
}

fn enumerate_configs(
    n: u64,
    denom: u64,
    mode: Mode,
    keep: impl Fn(u64) -> bool,
) -> Vec<TorusConfig> {
    let mut out = Vec::new();
    if denom < 3 {
        return out;
    }
    let thetas = enumerate_theta_triples(n);
    for theta in &thetas {
        for c1 in 1..denom - 1 {
            for c2 in 1..denom - c1 {
                let parts = [c1, c2, denom - c1 - c2];
                if keep(config_order(theta, parts, denom, mode)) {
                    let lengths = LengthTriple::from_parts(parts, denom)
                        .expect("positive composition gives valid lengths");
                    out.push(TorusConfig::new(*theta, lengths));
                }
            }
        }
    }
    out
}

/// Every configuration with lengths in `(1/N)ℤ` whose monodromy class has order exactly `N`.
pub fn configs_for_order(n: u64, order: u64, mode: Mode) -> Vec<TorusConfig> {
    enumerate_configs(n, order, mode, |o| o == order)
}

/// Same enumeration with the order only required to divide `N`.
pub fn configs_with_order_dividing(n: u64, modulus: u64, mode: Mode) -> Vec<TorusConfig> {
    enumerate_configs(n, modulus, mode, |o| modulus.is_multiple_of(o))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BurnsideCount {
    pub orbits: u64,
    pub fixed: u64,
    pub configs: u64,
}

impl BurnsideCount {
    /// `3·orbits - 2·fixed`, i.e. the number of configurations.
    pub fn labelled(&self) -> u64 {
        self.configs
    }
}

/// Orbits of the cyclic relabelling on `configs_for_order(n, N, mode)`.
pub fn burnside_count(n: u64, order: u64, mode: Mode) -> BurnsideCount {
    let configs = configs_for_order(n, order, mode);
    let fixed = configs.iter().filter(|c| cyclic_rotate(c) == **c).count() as u64;
    let total = configs.len() as u64 + 2 * fixed;
    assert!(
        total.is_multiple_of(3),
        "Burnside average not integral for n={n}, N={order}, {mode}: {total}/3"
    );
    BurnsideCount {
        orbits: total / 3,
        fixed,
        configs: configs.len() as u64,
    }
}

/// Number of Lamé equations of degree `n` with cyclic monodromy `C_N`.
pub fn oracle_l(n: u64, order: u64, mode: Mode) -> Result<u64, TorusError> {
    if order < 3 {
        return Err(TorusError::Domain(format!(
            "the census counts N >= 3, got N={order}"
        )));
    }
    Ok(burnside_count(n, order, mode).orbits)
}

/// Configurations fixed by the relabelling.
pub fn epsilon_oracle(n: u64, order: u64, mode: Mode) -> u64 {
    burnside_count(n, order, mode).fixed
}
