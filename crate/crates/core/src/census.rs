//! Closed-form census formulas and the divisor-sum identities behind them.
//!
//! Values are exact rationals and are never rounded. A non-integral formula
//! value means the printed `ε` term is wrong for that cell, and it is flagged.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::arith::{divisors, euler_phi, moebius_invert, psi, Rational};
use crate::torus::{burnside_count, BurnsideCount, Mode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CensusError {
    #[error("the census formulas hold for N >= 3, got N={0}")]
    OrderTooSmall(u64),
    #[error("degree n must be positive")]
    ZeroDegree,
}

/// Which correction term `ε(n, N)` a formula uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonVariant {
    /// `1` iff `n = 3` and `3 | N-1`, as printed.
    Printed,
    /// The number of configurations fixed by the relabelling.
    Oracle,
}

impl EpsilonVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            EpsilonVariant::Printed => "printed",
            EpsilonVariant::Oracle => "oracle",
        }
    }

    pub fn epsilon(self, n: u64, order: u64, mode: Mode) -> u64 {
        match self {
            EpsilonVariant::Printed => epsilon_printed(n, order),
            EpsilonVariant::Oracle => burnside_count(n, order, mode).fixed,
        }
    }
}

impl fmt::Display for EpsilonVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EpsilonVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "printed" => Ok(EpsilonVariant::Printed),
            "oracle" => Ok(EpsilonVariant::Oracle),
            other => Err(format!(
                "unknown epsilon variant {other:?} (expected printed or oracle)"
            )),
        }
    }
}

pub fn epsilon_printed(n: u64, order: u64) -> u64 {
    (n == 3 && order % 3 == 1) as u64
}

/// `(a_n, b_n)` with `a_{2l} = a_{2l+1} = l(l+1)/2` and `b_{2l-1} = b_{2l} = l²`.
pub fn coeff_ab(n: u64) -> (Rational, Rational) {
    let la = (n / 2) as i64;
    let lb = n.div_ceil(2) as i64;
    (
        Rational::new(la * (la + 1), 2),
        Rational::from_integer(lb * lb),
    )
}

fn check_domain(n: u64, order: u64) -> Result<(), CensusError> {
    if n == 0 {
        return Err(CensusError::ZeroDegree);
    }
    if order < 3 {
        return Err(CensusError::OrderTooSmall(order));
    }
    Ok(())
}

fn tri(n: u64) -> i64 {
    (n * (n + 1)) as i64
}

/// `n(n+1)/12·(Ψ(N) - 3φ(N)) + (2/3)·ε(n, N)`.
pub fn l_proj_formula(
    n: u64,
    order: u64,
    variant: EpsilonVariant,
) -> Result<Rational, CensusError> {
    check_domain(n, order)?;
    let eps = variant.epsilon(n, order, Mode::Projective) as i64;
    let core = psi(order) as i64 - 3 * euler_phi(order) as i64;
    Ok(Rational::new(tri(n) * core, 12) + Rational::new(2 * eps, 3))
}

/// `(1/2)·(n(n+1)/24·Ψ(N) - a_n·φ(N) - b_n·φ(N/2)) + (2/3)·ε(n, N)`, `φ(N/2) = 0` for odd `N`.
pub fn l_ord_formula(n: u64, order: u64, variant: EpsilonVariant) -> Result<Rational, CensusError> {
    check_domain(n, order)?;
    let eps = variant.epsilon(n, order, Mode::Ordinary) as i64;
    let (a, b) = coeff_ab(n);
    let phi_half = if order.is_multiple_of(2) {
        euler_phi(order / 2) as i64
    } else {
        0
    };
    let inner =
        Rational::new(tri(n) * psi(order) as i64, 24) - a * euler_phi(order) as i64 - b * phi_half;
    Ok(inner / 2 + Rational::new(2 * eps, 3))
}

pub fn formula(
    n: u64,
    order: u64,
    mode: Mode,
    variant: EpsilonVariant,
) -> Result<Rational, CensusError> {
    match mode {
        Mode::Projective => l_proj_formula(n, order, variant),
        Mode::Ordinary => l_ord_formula(n, order, variant),
    }
}

/// Right side of `Σ_{d|N}(3L_n(d) - 2ε(n,d))`. The printed form is
/// `n(n+1)/2·(N²-3N+2)`; the corrected form halves it.
pub fn proj_divisor_sum_closed(n: u64, modulus: u64, corrected: bool) -> Rational {
    let m = modulus as i64;
    let poly = m * m - 3 * m + 2;
    let den = if corrected { 4 } else { 2 };
    Rational::new(tri(n) * poly, den)
}

/// Printed right side of `Σ_{d|N}(3L'_n(d) - 2ε(n,d))`:
/// odd `N`: `n(n+1)/16·(N²-1) - (3/2)·a_n·(N+1)`;
/// even `N`: `n(n+1)/16·N² - (2a_n+b_n)·(3N/4 - 1)`.
pub fn ord_divisor_sum_closed(n: u64, modulus: u64) -> Rational {
    let (a, b) = coeff_ab(n);
    let m = modulus as i64;
    if m % 2 == 1 {
        Rational::new(tri(n) * (m * m - 1), 16) - a * Rational::new(3 * (m + 1), 2)
    } else {
        Rational::new(tri(n) * m * m, 16) - (a * 2 + b) * Rational::new(3 * m - 4, 4)
    }
}

/// Odd-`N` line re-derived from the unsimplified lattice count
/// `a_n·3(m-1)(m-2)/2 + (b_n-a_n)·m(m-1)/2`, which gives `-(3/2)·a_n·(N-1)`.
/// Even `N` agrees with the printed form.
pub fn ord_divisor_sum_corrected(n: u64, modulus: u64) -> Rational {
    let m = modulus as i64;
    if m % 2 == 1 {
        let (a, _) = coeff_ab(n);
        Rational::new(tri(n) * (m * m - 1), 16) - a * Rational::new(3 * (m - 1), 2)
    } else {
        ord_divisor_sum_closed(n, modulus)
    }
}

/// The unsimplified lattice count in `m`, for `N = 2m-1` or `N = 2m`:
/// `a_n·3(m-1)(m-2)/2 + (b_n-a_n)·m(m-1)/2` (odd) or
/// `a_n·3(m-1)(m-2)/2 + (b_n-a_n)·(m-1)(m-2)/2` (even).
pub fn ord_divisor_sum_lattice(n: u64, modulus: u64) -> Rational {
    let (a, b) = coeff_ab(n);
    let m = modulus.div_ceil(2) as i64;
    let tail = if modulus % 2 == 1 {
        m * (m - 1)
    } else {
        (m - 1) * (m - 2)
    };
    &a * Rational::new(3 * (m - 1) * (m - 2), 2) + (b - a) * Rational::new(tail, 2)
}

/// One census row: formula against oracle for a single `(n, N, mode)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusReport {
    pub n: u64,
    #[serde(rename = "N")]
    pub order: u64,
    pub mode: Mode,
    pub variant: EpsilonVariant,
    pub formula_value: Rational,
    pub formula_printed: Rational,
    pub formula_oracle: Rational,
    pub oracle_value: u64,
    pub fixed_count: u64,
    pub configs: u64,
    pub discrepancy: bool,
    pub notes: String,
}

pub fn census_row(
    n: u64,
    order: u64,
    mode: Mode,
    variant: EpsilonVariant,
) -> Result<CensusReport, CensusError> {
    check_domain(n, order)?;
    let burnside = burnside_count(n, order, mode);
    let printed = formula(n, order, mode, EpsilonVariant::Printed)?;
    let oracle = formula(n, order, mode, EpsilonVariant::Oracle)?;
    let value = match variant {
        EpsilonVariant::Printed => printed.clone(),
        EpsilonVariant::Oracle => oracle.clone(),
    };
    let discrepancy =
        !value.is_integer() || value != Rational::from_integer(burnside.orbits as i64);
    let mut notes = Vec::new();
    if !printed.is_integer() {
        notes.push("printed-eps non-integral".to_string());
    }
    let eps_printed = epsilon_printed(n, order);
    if eps_printed != burnside.fixed {
        notes.push(format!(
            "eps printed={} oracle={}",
            eps_printed, burnside.fixed
        ));
    }
    Ok(CensusReport {
        n,
        order,
        mode,
        variant,
        formula_value: value,
        formula_printed: printed,
        formula_oracle: oracle,
        oracle_value: burnside.orbits,
        fixed_count: burnside.fixed,
        configs: burnside.configs,
        discrepancy,
        notes: notes.join("; "),
    })
}

/// Cells in the grid where the printed `ε` differs from the oracle fixed count.
pub fn epsilon_disagreements(
    ns: impl IntoIterator<Item = u64> + Clone,
    orders: impl IntoIterator<Item = u64> + Clone,
    mode: Mode,
) -> Vec<(u64, u64, u64, u64)> {
    let mut out = Vec::new();
    for n in ns {
        for order in orders.clone() {
            let printed = epsilon_printed(n, order);
            let oracle = burnside_count(n, order, mode).fixed;
            if printed != oracle {
                out.push((n, order, printed, oracle));
            }
        }
    }
    out
}

/// Divisor-sum identity check for one `(n, N, mode)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivisorIdentityReport {
    pub n: u64,
    #[serde(rename = "N")]
    pub modulus: u64,
    pub mode: Mode,
    /// `Σ_{d|N}(3·orbits(d) - 2·fixed(d))`, enumerated.
    pub lhs: u64,
    pub closed_printed: Rational,
    pub closed_corrected: Rational,
    pub matches_printed: bool,
    pub matches_corrected: bool,
    /// `closed_printed / lhs` when `lhs ≠ 0`.
    pub printed_ratio: Option<Rational>,
    /// Möbius inversion of the enumerated divisor sums, i.e. `3L(N) - 2ε(N)`.
    pub inverted: Rational,
    /// `3·orbits(N) - 2·fixed(N)` at `N` itself.
    pub direct: u64,
    pub notes: String,
}

pub fn verify_divisor_identity(n: u64, modulus: u64, mode: Mode) -> DivisorIdentityReport {
    let counts: BTreeMap<u64, BurnsideCount> = divisors(modulus)
        .iter()
        .map(|d| (d, burnside_count(n, d, mode)))
        .collect();
    let labelled = |b: &BurnsideCount| 3 * b.orbits - 2 * b.fixed;

    // divisor sums of the labelled counts, for every divisor of N
    let sums: BTreeMap<u64, Rational> = counts
        .keys()
        .map(|&d| {
            let s: u64 = counts
                .iter()
                .filter(|(e, _)| d % **e == 0)
                .map(|(_, b)| labelled(b))
                .sum();
            (d, Rational::from_integer(s as i64))
        })
        .collect();
    let lhs = sums[&modulus].to_i64().expect("integral") as u64;
    let inverted = moebius_invert(&sums, modulus).expect("all divisors present");
    let direct = labelled(&counts[&modulus]);

    let (closed_printed, closed_corrected) = match mode {
        Mode::Projective => (
            proj_divisor_sum_closed(n, modulus, false),
            proj_divisor_sum_closed(n, modulus, true),
        ),
        Mode::Ordinary => (
            ord_divisor_sum_closed(n, modulus),
            ord_divisor_sum_corrected(n, modulus),
        ),
    };
    let lhs_r = Rational::from_integer(lhs as i64);
    let matches_printed = closed_printed == lhs_r;
    let matches_corrected = closed_corrected == lhs_r;
    let printed_ratio = (lhs != 0).then(|| &closed_printed / &lhs_r);

    let mut notes = Vec::new();
    if !matches_printed {
        match &printed_ratio {
            Some(ratio) => notes.push(format!("printed/enumerated = {ratio}")),
            None => notes.push(format!("enumerated 0, printed {closed_printed}")),
        }
        if mode == Mode::Ordinary {
            notes.push(format!(
                "printed - enumerated = {}",
                &closed_printed - &lhs_r
            ));
        }
    }
    if !matches_corrected {
        notes.push("corrected form mismatch".to_string());
    }
    DivisorIdentityReport {
        n,
        modulus,
        mode,
        lhs,
        closed_printed,
        closed_corrected,
        matches_printed,
        matches_corrected,
        printed_ratio,
        inverted,
        direct,
        notes: notes.join("; "),
    }
}
