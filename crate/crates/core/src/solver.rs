//! Newton solves of the unitary-monodromy conditions at desk scale.
//!
//! For `n = 1` the condition is a single Hecke zero `Z(t + sτ; τ) = 0`, which is
//! holomorphic in `τ` for fixed real `(s, t)`. For `n = 2` the unknowns are
//! `(t₁, s₁, Re τ, Im τ)` with `a₂ = (t - t₁) + (s - s₁)τ`, and the equations
//! are the first ansatz constraint together with `Z(a₁) + Z(a₂) = 0`.
//! Jacobians are finite differences throughout.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arith::Rational;
use crate::weier::{
    accessory_b, distance_mod_2pi_i, lattice_constants, monodromy_exponent, ode_residual, zeta_w,
    AnsatzData, Direction, LatticeData, WeierError,
};

type C = Complex64;

const I: C = C::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Rectangle `[x0, x1] × [y0, y1]` in the `τ` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    /// Slack applied to the window edges when deciding whether a root is inside.
    pub const EDGE_SLACK: f64 = 1e-8;

    pub fn contains(&self, tau: C) -> bool {
        let e = Self::EDGE_SLACK;
        tau.re >= self.x0 - e
            && tau.re <= self.x1 + e
            && tau.im >= self.y0 - e
            && tau.im <= self.y1 + e
    }

    /// Region Newton iterates may wander through before a seed is abandoned.
    fn roaming(&self, tau: C) -> bool {
        let w = self.x1 - self.x0;
        tau.re >= self.x0 - w
            && tau.re <= self.x1 + w
            && tau.im >= (0.5 * self.y0).max(crate::weier::MIN_IM_TAU)
            && tau.im <= 2.0 * self.y1
    }
}

impl Default for Window {
    fn default() -> Self {
        Window {
            x0: -0.5,
            x1: 0.5,
            y0: 0.3,
            y1: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRequest {
    pub n: u32,
    pub s: Rational,
    pub t: Rational,
    pub window: Window,
    pub seed_grid: (usize, usize),
    pub tol: f64,
    pub max_iter: usize,
}

impl SolveRequest {
    pub fn new(n: u32, s: Rational, t: Rational) -> Self {
        SolveRequest {
            n,
            s,
            t,
            window: Window::default(),
            seed_grid: (12, 12),
            tol: 1e-12,
            max_iter: 60,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.n == 1 || self.n == 2) {
            return Err(SolverError::InvalidRequest(format!(
                "only n = 1, 2 are supported, got {}",
                self.n
            )));
        }
        let w = &self.window;
        if !(w.x0 < w.x1 && w.y0 < w.y1 && w.y0 >= 0.3) {
            return Err(SolverError::InvalidRequest(format!(
                "window must be a nonempty rectangle inside Im τ >= 0.3, got {w:?}"
            )));
        }
        if self.tol < 1e-14 || !self.tol.is_finite() {
            return Err(SolverError::InvalidRequest(format!(
                "tolerance must be >= 1e-14, got {}",
                self.tol
            )));
        }
        if self.seed_grid.0 == 0 || self.seed_grid.1 == 0 || self.max_iter == 0 {
            return Err(SolverError::InvalidRequest(
                "seed grid and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }

    fn seeds(&self) -> Vec<C> {
        let (rows, cols) = self.seed_grid;
        let w = &self.window;
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let y = w.y0 + (i as f64 + 0.5) / rows as f64 * (w.y1 - w.y0);
                let x = w.x0 + (j as f64 + 0.5) / cols as f64 * (w.x1 - w.x0);
                out.push(C::new(x, y));
            }
        }
        out
    }
}

/// Rejects `(s, t)` with `2s`, `2t` or `2s + 2t` integral, before any numerics.
pub fn check_admissible(s: &Rational, t: &Rational) -> Result<(), SolverError> {
    let two_s = s * 2;
    let two_t = t * 2;
    let reason = if two_s.is_integer() {
        Some("2s is an integer")
    } else if two_t.is_integer() {
        Some("2t is an integer")
    } else if (&two_s + &two_t).is_integer() {
        Some("2s + 2t is an integer")
    } else {
        None
    };
    match reason {
        Some(why) => Err(SolverError::Degenerate(format!(
            "(s, t) = ({s}, {t}): {why}; the ansatz point is fixed by a -> -a up to the lattice \
             (a Lamé-function case), and Z vanishes identically or the projective monodromy has no unitary realization"
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `|Σ Z(a_μ)|`.
    pub hecke: f64,
    /// `|Σ_{ν≠1}(ζ(a_ν) - ζ(a₁) + ζ(a₁ - a_ν))|`; zero for `n = 1`.
    pub system: f64,
    /// Max ODE residual over the sample points.
    pub ode: f64,
    /// Max distance of the monodromy exponents from their targets mod `2πi`.
    pub monodromy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvedConfig {
    pub n: u32,
    #[serde(serialize_with = "crate::weier::ser_complex")]
    pub tau: C,
    pub ansatz: AnsatzData,
    #[serde(rename = "B", serialize_with = "crate::weier::ser_complex")]
    pub b: C,
    pub residuals: Residuals,
    /// Step sizes of the Newton run that produced this root.
    pub newton_deltas: Vec<f64>,
    /// Largest `|F_μ=1 + F_μ=2|` over the iterates (n = 2 only).
    pub antisymmetry_defect: f64,
    /// `j(τ)`, for spotting roots related by the modular group.
    #[serde(serialize_with = "crate::weier::ser_complex")]
    pub j_invariant: C,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCheck {
    pub direction: u8,
    #[serde(serialize_with = "crate::weier::ser_complex")]
    pub computed: C,
    #[serde(serialize_with = "crate::weier::ser_complex")]
    pub expected: C,
    pub deviation: f64,
    pub real_part: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub monodromy: Vec<ExponentCheck>,
    pub ode_samples: usize,
    pub ode_max_residual: f64,
    pub ode_pass: bool,
    #[serde(rename = "B", serialize_with = "crate::weier::ser_complex")]
    pub b: C,
    pub b_consistent: bool,
    pub hecke_residual: f64,
    pub hecke_pass: bool,
    pub error: Option<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.monodromy.iter().all(|c| c.pass)
            && self.ode_pass
            && self.b_consistent
            && self.hecke_pass
    }
}

/// Tolerance on monodromy exponents mod `2πi`.
pub const MONODROMY_TOL: f64 = 1e-6;
/// Tolerance on the finite-difference ODE residual.
pub const ODE_TOL: f64 = 1e-6;
/// Roots closer than this are the same root.
pub const DEDUP_TOL: f64 = 1e-6;
const ODE_SAMPLES: usize = 20;
const HECKE_VERIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub request: SolveRequest,
    pub roots: Vec<SolvedConfig>,
    pub seeds_tried: usize,
    pub seeds_converged: usize,
    pub rejected_outside_window: usize,
    pub rejected_unverified: usize,
}

fn j_invariant(lattice: &LatticeData) -> C {
    let g2c = lattice.g2 * lattice.g2 * lattice.g2;
    let disc = g2c - 27.0 * lattice.g3 * lattice.g3;
    1728.0 * g2c / disc
}

/// Low-discrepancy points in the period parallelogram kept away from `0` and the `a_μ`.
fn ode_sample_points(ansatz: &AnsatzData, count: usize) -> Vec<C> {
    let lattice = &ansatz.lattice;
    // R2 sequence (plastic number)
    let g = 1.324_717_957_244_746_f64;
    let (a1, a2) = (1.0 / g, 1.0 / (g * g));
    let mut out = Vec::with_capacity(count);
    let mut k = 0u64;
    while out.len() < count && k < 10_000 {
        k += 1;
        let u = (0.5 + a1 * k as f64).fract() - 0.5;
        let v = (0.5 + a2 * k as f64).fract() - 0.5;
        let z = u + v * lattice.tau;
        let clear = lattice.lattice_distance(z) > 0.15
            && ansatz
                .points
                .iter()
                .all(|p| lattice.lattice_distance(z - p.a) > 0.15);
        if clear {
            out.push(z);
        }
    }
    out
}

fn system_residual(ansatz: &AnsatzData, mu: usize) -> Result<C, WeierError> {
    let lattice = &ansatz.lattice;
    let am = ansatz.points[mu].a;
    let zm = zeta_w(am, lattice)?;
    let mut acc = C::new(0.0, 0.0);
    for (nu, p) in ansatz.points.iter().enumerate() {
        if nu != mu {
            acc += zeta_w(p.a, lattice)? - zm + zeta_w(am - p.a, lattice)?;
        }
    }
    Ok(acc)
}

/// Recomputes monodromy, ODE residuals and `B` for a solved configuration.
pub fn verify_solution(config: &SolvedConfig) -> VerificationReport {
    let ansatz = &config.ansatz;
    let s = ansatz.s_total();
    let t = ansatz.t_total();
    let mut report = VerificationReport {
        monodromy: Vec::new(),
        ode_samples: 0,
        ode_max_residual: f64::NAN,
        ode_pass: false,
        b: C::new(f64::NAN, f64::NAN),
        b_consistent: false,
        hecke_residual: f64::NAN,
        hecke_pass: false,
        error: None,
    };
    let result: Result<(), WeierError> = (|| {
        let targets = [
            (
                Direction::One,
                1u8,
                -4.0 * PI * I * s,
                C::new(0.0, 0.37 * config.tau.im),
            ),
            (Direction::Two, 2u8, 4.0 * PI * I * t, C::new(0.13, 0.0)),
        ];
        for (direction, label, expected, basepoint) in targets {
            let computed = monodromy_exponent(direction, ansatz, basepoint)?;
            let deviation = distance_mod_2pi_i(computed - expected);
            report.monodromy.push(ExponentCheck {
                direction: label,
                computed,
                expected,
                deviation,
                real_part: computed.re,
                pass: deviation < MONODROMY_TOL && computed.re.abs() < MONODROMY_TOL,
            });
        }
        let points = ode_sample_points(ansatz, ODE_SAMPLES);
        let mut worst: f64 = 0.0;
        for z in &points {
            worst = worst.max(ode_residual(*z, ansatz)?);
        }
        report.ode_samples = points.len();
        report.ode_max_residual = worst;
        report.ode_pass = points.len() == ODE_SAMPLES && worst < ODE_TOL;
        report.b = accessory_b(ansatz)?;
        report.b_consistent = (report.b - config.b).norm() <= 1e-9 * (1.0 + config.b.norm());
        report.hecke_residual = ansatz.hecke_sum()?.norm();
        report.hecke_pass = report.hecke_residual < HECKE_VERIFY_TOL;
        Ok(())
    })();
    if let Err(e) = result {
        report.error = Some(e.to_string());
    }
    report
}

fn build_config(
    n: u32,
    lattice: LatticeData,
    coords: &[(f64, f64)],
    newton_deltas: Vec<f64>,
    antisymmetry_defect: f64,
) -> Result<SolvedConfig, WeierError> {
    let ansatz = AnsatzData::new(lattice, coords)?;
    let hecke = ansatz.hecke_sum()?.norm();
    let system = if n == 2 {
        system_residual(&ansatz, 0)?.norm()
    } else {
        0.0
    };
    let b = accessory_b(&ansatz)?;
    let mut config = SolvedConfig {
        n,
        tau: lattice.tau,
        ansatz,
        b,
        residuals: Residuals {
            hecke,
            system,
            ode: f64::NAN,
            monodromy: f64::NAN,
        },
        newton_deltas,
        antisymmetry_defect,
        j_invariant: j_invariant(&lattice),
    };
    let report = verify_solution(&config);
    config.residuals.ode = report.ode_max_residual;
    config.residuals.monodromy = report
        .monodromy
        .iter()
        .map(|c| c.deviation.max(c.real_part.abs()))
        .fold(0.0, f64::max);
    Ok(config)
}

struct NewtonRun {
    tau: C,
    coords: Vec<(f64, f64)>,
    deltas: Vec<f64>,
    antisymmetry_defect: f64,
}

fn newton_hecke(req: &SolveRequest, s: f64, t: f64, seed: C) -> Option<NewtonRun> {
    let tol = crate::weier::DEFAULT_TOL;
    let f = |tau: C| -> Option<C> {
        let lattice = lattice_constants(tau, tol).ok()?;
        crate::weier::hecke_z(t, s, &lattice).ok()
    };
    let mut tau = seed;
    let mut deltas = Vec::new();
    for _ in 0..req.max_iter {
        let value = f(tau)?;
        let h = 1e-7 * tau.norm().max(1.0);
        let deriv = (f(tau + h)? - f(tau - h)?) / (2.0 * h);
        if deriv.norm() == 0.0 || !deriv.is_finite() {
            return None;
        }
        let step = value / deriv;
        tau -= step;
        deltas.push(step.norm());
        if !req.window.roaming(tau) {
            return None;
        }
        if step.norm() < 1e-14 * tau.norm().max(1.0)
            || (value.norm() < req.tol * 1e-2 && step.norm() < 1e-12)
        {
            break;
        }
    }
    let residual = f(tau)?;
    (residual.norm() < req.tol).then(|| NewtonRun {
        tau,
        coords: vec![(t, s)],
        deltas,
        antisymmetry_defect: 0.0,
    })
}

/// Four real equations in `(t₁, s₁, Re τ, Im τ)` for `n = 2`, plus the `μ = 2` residual.
fn n2_equations(x: &Vector4<f64>, s: f64, t: f64) -> Option<(Vector4<f64>, C, C)> {
    let tau = C::new(x[2], x[3]);
    let lattice = lattice_constants(tau, crate::weier::DEFAULT_TOL).ok()?;
    let coords = [(x[0], x[1]), (t - x[0], s - x[1])];
    let ansatz = AnsatzData::new(lattice, &coords).ok()?;
    // the two points must stay distinct modulo the lattice
    if lattice.lattice_distance(ansatz.points[0].a - ansatz.points[1].a) < 1e-6 {
        return None;
    }
    let f1 = system_residual(&ansatz, 0).ok()?;
    let f2 = system_residual(&ansatz, 1).ok()?;
    let hecke = ansatz.hecke_sum().ok()?;
    let v = Vector4::new(f1.re, f1.im, hecke.re, hecke.im);
    v.iter().all(|c| c.is_finite()).then_some((v, f1, f2))
}

fn newton_n2(
    req: &SolveRequest,
    s: f64,
    t: f64,
    seed_tau: C,
    seed_ts: (f64, f64),
) -> Option<NewtonRun> {
    let mut x = Vector4::new(seed_ts.0, seed_ts.1, seed_tau.re, seed_tau.im);
    let mut deltas = Vec::new();
    let mut antisymmetry: f64 = 0.0;
    let mut converged = false;
    for _ in 0..req.max_iter {
        let (fx, f1, f2) = n2_equations(&x, s, t)?;
        antisymmetry = antisymmetry.max((f1 + f2).norm());
        let mut jac = Matrix4::zeros();
        for k in 0..4 {
            let h = 1e-7 * x[k].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (fp, _, _) = n2_equations(&xp, s, t)?;
            let (fm, _, _) = n2_equations(&xm, s, t)?;
            jac.set_column(k, &((fp - fm) / (2.0 * h)));
        }
        let step = jac.lu().solve(&fx)?;
        // damp very long steps so a seed cannot jump across the window
        let len = step.norm();
        let step = if len > 0.25 {
            step * (0.25 / len)
        } else {
            step
        };
        x -= step;
        deltas.push(step.norm());
        if !req.window.roaming(C::new(x[2], x[3])) {
            return None;
        }
        if step.norm() < 1e-13 {
            converged = true;
            break;
        }
    }
    let (fx, f1, f2) = n2_equations(&x, s, t)?;
    antisymmetry = antisymmetry.max((f1 + f2).norm());
    let ok = converged || fx.norm() < req.tol;
    (ok && fx.norm() < req.tol).then(|| NewtonRun {
        tau: C::new(x[2], x[3]),
        coords: vec![(x[0], x[1]), (t - x[0], s - x[1])],
        deltas,
        antisymmetry_defect: antisymmetry,
    })
}

/// Reduced `(t, s)` pairs of the ansatz points, sorted, for deduplication.
fn point_key(coords: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let wrap = |v: f64| {
        let r = v - v.floor();
        if r > 1.0 - 1e-9 {
            0.0
        } else {
            r
        }
    };
    let mut key: Vec<(f64, f64)> = coords.iter().map(|&(t, s)| (wrap(t), wrap(s))).collect();
    key.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    key
}

fn same_root(a: &NewtonRun, b: &NewtonRun) -> bool {
    if (a.tau - b.tau).norm() >= DEDUP_TOL {
        return false;
    }
    let (ka, kb) = (point_key(&a.coords), point_key(&b.coords));
    ka.iter().zip(&kb).all(|(p, q)| {
        let d = |x: f64, y: f64| {
            let e = (x - y).abs();
            e.min(1.0 - e)
        };
        d(p.0, q.0) < DEDUP_TOL && d(p.1, q.1) < DEDUP_TOL
    })
}

fn assemble(req: &SolveRequest, runs: Vec<Option<NewtonRun>>) -> SolveOutcome {
    let seeds_tried = runs.len();
    let converged: Vec<NewtonRun> = runs.into_iter().flatten().collect();
    let seeds_converged = converged.len();
    let mut unique: Vec<NewtonRun> = Vec::new();
    let mut rejected_outside_window = 0;
    for run in converged {
        if !req.window.contains(run.tau) {
            rejected_outside_window += 1;
            continue;
        }
        if !unique.iter().any(|u| same_root(u, &run)) {
            unique.push(run);
        }
    }
    unique.sort_by(|a, b| {
        a.tau
            .re
            .total_cmp(&b.tau.re)
            .then(a.tau.im.total_cmp(&b.tau.im))
    });
    let built: Vec<Option<SolvedConfig>> = unique
        .into_par_iter()
        .map(|run| {
            let lattice = lattice_constants(run.tau, crate::weier::DEFAULT_TOL).ok()?;
            build_config(
                req.n,
                lattice,
                &run.coords,
                run.deltas,
                run.antisymmetry_defect,
            )
            .ok()
        })
        .collect();
    let mut roots = Vec::new();
    let mut rejected_unverified = 0;
    for config in built {
        match config {
            Some(c)
                if verify_solution(&c).passed()
                    && c.residuals.hecke < 10.0 * req.tol.max(1e-12) =>
            {
                roots.push(c)
            }
            _ => rejected_unverified += 1,
        }
    }
    SolveOutcome {
        request: req.clone(),
        roots,
        seeds_tried,
        seeds_converged,
        rejected_outside_window,
        rejected_unverified,
    }
}

/// Hecke zeros `Z(t + sτ; τ) = 0` for `n = 1`, one Newton run per grid seed.
pub fn solve_hecke_zero(req: &SolveRequest) -> Result<SolveOutcome, SolverError> {
    req.validate()?;
    if req.n != 1 {
        return Err(SolverError::InvalidRequest(
            "solve_hecke_zero needs n = 1".into(),
        ));
    }
    check_admissible(&req.s, &req.t)?;
    let (s, t) = (req.s.to_f64(), req.t.to_f64());
    let runs: Vec<Option<NewtonRun>> = req
        .seeds()
        .into_par_iter()
        .map(|seed| newton_hecke(req, s, t, seed))
        .collect();
    Ok(assemble(req, runs))
}

/// Seeds for the first ansatz point of the `n = 2` system.
fn point_seeds() -> Vec<(f64, f64)> {
    let vals = [0.125, 0.375, 0.625, 0.875];
    vals.iter()
        .flat_map(|&t| vals.iter().map(move |&s| (t, s)))
        .collect()
}

/// Solutions of the `n = 2` ansatz system with unitary monodromy.
pub fn solve_ansatz_n2(req: &SolveRequest) -> Result<SolveOutcome, SolverError> {
    req.validate()?;
    if req.n != 2 {
        return Err(SolverError::InvalidRequest(
            "solve_ansatz_n2 needs n = 2".into(),
        ));
    }
    check_admissible(&req.s, &req.t)?;
    let (s, t) = (req.s.to_f64(), req.t.to_f64());
    let seeds: Vec<(C, (f64, f64))> = req
        .seeds()
        .into_iter()
        .flat_map(|tau| point_seeds().into_iter().map(move |p| (tau, p)))
        .collect();
    let runs: Vec<Option<NewtonRun>> = seeds
        .into_par_iter()
        .map(|(tau, p)| newton_n2(req, s, t, tau, p))
        .collect();
    Ok(assemble(req, runs))
}

pub fn solve(req: &SolveRequest) -> Result<SolveOutcome, SolverError> {
    match req.n {
        1 => solve_hecke_zero(req),
        2 => solve_ansatz_n2(req),
        n => Err(SolverError::InvalidRequest(format!(
            "only n = 1, 2 are supported, got {n}"
        ))),
    }
}

/// A hand-built configuration, e.g. for verifying degenerate data.
pub fn config_from_points(
    n: u32,
    lattice: LatticeData,
    coords: &[(f64, f64)],
) -> Result<SolvedConfig, WeierError> {
    build_config(n, lattice, coords, Vec::new(), 0.0)
}
