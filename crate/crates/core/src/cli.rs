//! Command-line front end: census tables, oracle runs, reconciliation reports,
//! solver runs and dessin export.
//!
//! Every option may also come from a `key=value` file given with `--config`;
//! keys are the long flag names without the leading dashes, and flags win.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::arith::Rational;
use crate::census::{
    census_row, epsilon_printed, formula, verify_divisor_identity, EpsilonVariant,
};
use crate::dessin::{dessin_from_config, quotient_dessin, DessinError};
use crate::solver::{solve, verify_solution, SolveOutcome, SolveRequest, SolverError, Window};
use crate::torus::{burnside_count, Mode, ThetaTriple};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error("{0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Degenerate(_) => EXIT_DEGENERATE,
            CliError::Numeric(_) | CliError::Io(_) => EXIT_NUMERIC,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "lame-census",
    version,
    about = "Census of Lamé equations with finite cyclic monodromy"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form counts against the orbit oracle, one row per (n, N).
    Census(GridArgs),
    /// Raw orbit counts: configurations, fixed configurations and orbits.
    Oracle(GridArgs),
    /// Divisor-sum identities, Möbius inversion and epsilon cross-checks.
    Reconcile(GridArgs),
    /// Solve the unitary-monodromy conditions for n = 1 or 2.
    Solve(SolveArgs),
    /// Export the dessin of one configuration as DOT or JSON.
    Dessin(DessinArgs),
    /// Pass/fail check of formula, divisor identity and inversion on a grid.
    VerifyIdentities(GridArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// key=value file supplying defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress the run-metadata header line
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args, Clone)]
pub struct GridArgs {
    #[arg(long)]
    pub n: Option<u64>,
    /// Inclusive range A..B
    #[arg(long = "n-range")]
    pub n_range: Option<String>,
    /// Inclusive range A..B of monodromy orders
    #[arg(long = "N-range")]
    pub order_range: Option<String>,
    /// proj or ord
    #[arg(long)]
    pub mode: Option<String>,
    /// printed or oracle
    #[arg(long)]
    pub eps: Option<String>,
    /// csv, json or md
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Clone)]
pub struct SolveArgs {
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<String>,
    /// x0,x1,y0,y1
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// RxC seed grid
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// csv, json or md
    #[arg(long)]
    pub format: Option<String>,
    /// Also write the full solve outcome as JSON here
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Clone)]
pub struct DessinArgs {
    /// Inferred from theta when absent
    #[arg(long)]
    pub n: Option<u64>,
    /// a,b,c
    #[arg(long)]
    pub theta: Option<String>,
    /// a,b,c with a+b+c = N
    #[arg(long)]
    pub m: Option<String>,
    /// Defaults to the sum of m
    #[arg(long = "N")]
    pub order: Option<u64>,
    /// Export the quotient dessin
    #[arg(long)]
    pub quotient: bool,
    /// dot or json
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Parsed `key=value` file.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "config line {}: expected key=value, got {raw:?}",
                    lineno + 1
                ))
            })?;
            let key = key.trim().trim_start_matches("--").to_string();
            if !allowed.contains(&key.as_str()) {
                return Err(usage(format!(
                    "config line {}: unknown key {key:?}",
                    lineno + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    fn load(path: &Option<PathBuf>, allowed: &[&str]) -> Result<Self, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                ConfigFile::parse(&text, allowed)
            }
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Flag value if given, else the parsed config value.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| usage(format!("config {key}={v}: {e}")))
            })
            .transpose()
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        match self.get(key) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(other) => Err(usage(format!(
                "config {key}={other}: expected true or false"
            ))),
        }
    }
}

const GRID_KEYS: &[&str] = &[
    "n",
    "n-range",
    "N-range",
    "mode",
    "eps",
    "format",
    "out",
    "no-header",
];
const SOLVE_KEYS: &[&str] = &[
    "n",
    "s",
    "t",
    "window",
    "seeds",
    "tol",
    "max-iter",
    "format",
    "out",
    "dump",
    "no-header",
];
const DESSIN_KEYS: &[&str] = &[
    "n",
    "theta",
    "m",
    "N",
    "quotient",
    "format",
    "out",
    "no-header",
];

/// Inclusive range `A..B`, or a single value.
pub fn parse_range(text: &str) -> Result<(u64, u64), CliError> {
    let bad = || usage(format!("bad range {text:?}: expected A..B"));
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let v = text.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if a > b {
        return Err(usage(format!("empty range {text:?}")));
    }
    Ok((a, b))
}

fn parse_triple(text: &str, what: &str) -> Result<[u64; 3], CliError> {
    let parts: Vec<u64> = text
        .split(',')
        .map(|p| p.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad {what} {text:?}: expected a,b,c")))?;
    parts
        .try_into()
        .map_err(|_| usage(format!("bad {what} {text:?}: expected three integers")))
}

pub fn parse_window(text: &str) -> Result<Window, CliError> {
    let v: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad window {text:?}: expected x0,x1,y0,y1")))?;
    match v.as_slice() {
        &[x0, x1, y0, y1] => Ok(Window { x0, x1, y0, y1 }),
        _ => Err(usage(format!("bad window {text:?}: expected four numbers"))),
    }
}

pub fn parse_seeds(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || usage(format!("bad seed grid {text:?}: expected RxC"));
    let (r, c) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
    Md,
}

impl FromStr for TableFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            "md" => Ok(TableFormat::Md),
            other => Err(format!(
                "unknown format {other:?} (expected csv, json or md)"
            )),
        }
    }
}

/// A rendered report: string cells for CSV and Markdown, typed rows for JSON.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub json_rows: Vec<Value>,
    pub summary: Vec<String>,
    pub extra: BTreeMap<String, Value>,
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
            json_rows: Vec::new(),
            summary: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    fn push<T: Serialize>(&mut self, cells: Vec<String>, typed: &T) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
        self.json_rows
            .push(serde_json::to_value(typed).expect("rows serialize"));
    }

    pub fn render(&self, format: TableFormat, meta: Option<&Meta>) -> String {
        match format {
            TableFormat::Csv => self.render_csv(meta),
            TableFormat::Md => self.render_md(meta),
            TableFormat::Json => self.render_json(meta),
        }
    }

    fn render_csv(&self, meta: Option<&Meta>) -> String {
        let mut out = String::new();
        if let Some(m) = meta {
            let _ = writeln!(out, "# {}", m.line());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory csv");
        for row in &self.rows {
            w.write_record(row).expect("in-memory csv");
        }
        out.push_str(
            &String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 cells"),
        );
        for line in &self.summary {
            let _ = writeln!(out, "# {line}");
        }
        out
    }

    fn render_md(&self, meta: Option<&Meta>) -> String {
        let mut out = String::new();
        if let Some(m) = meta {
            let _ = writeln!(out, "<!-- {} -->", m.line());
        }
        let _ = writeln!(out, "| {} |", self.columns.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.columns.len()));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        if !self.summary.is_empty() {
            let _ = writeln!(out, "\n## Summary\n");
            for line in &self.summary {
                let _ = writeln!(out, "- {line}");
            }
        }
        out
    }

    fn render_json(&self, meta: Option<&Meta>) -> String {
        let mut doc = serde_json::Map::new();
        if let Some(m) = meta {
            doc.insert(
                "meta".into(),
                serde_json::to_value(m).expect("meta serializes"),
            );
        }
        doc.insert("rows".into(), Value::Array(self.json_rows.clone()));
        doc.insert("summary".into(), json!(self.summary));
        for (k, v) in &self.extra {
            doc.insert(k.clone(), v.clone());
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json serializes");
        text.push('\n');
        text
    }
}

/// Run metadata: tool version, subcommand and resolved arguments. No clock values.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub command: &'static str,
    pub args: BTreeMap<String, String>,
}

impl Meta {
    fn new(command: &'static str, args: BTreeMap<String, String>) -> Self {
        Meta {
            tool: "lame-census",
            version: env!("CARGO_PKG_VERSION"),
            schema: 1,
            command,
            args,
        }
    }

    pub fn line(&self) -> String {
        let args: Vec<String> = self.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{} {} {} {}",
            self.tool,
            self.version,
            self.command,
            args.join(" ")
        )
    }
}

/// Resolved options of a grid subcommand.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub ns: (u64, u64),
    pub orders: (u64, u64),
    pub mode: Mode,
    pub eps: EpsilonVariant,
    pub format: TableFormat,
    pub out: Option<PathBuf>,
    pub no_header: bool,
}

impl GridConfig {
    fn resolve(args: &GridArgs, min_order: u64) -> Result<Self, CliError> {
        let cfg = ConfigFile::load(&args.common.config, GRID_KEYS)?;
        let ns = match (args.n, &args.n_range, cfg.get("n"), cfg.get("n-range")) {
            (Some(_), Some(_), _, _) => return Err(usage("give --n or --n-range, not both")),
            (Some(n), None, _, _) => (n, n),
            (None, Some(r), _, _) => parse_range(r)?,
            (None, None, Some(_), Some(_)) => return Err(usage("config gives both n and n-range")),
            (None, None, Some(n), None) => parse_range(n)?,
            (None, None, None, Some(r)) => parse_range(r)?,
            (None, None, None, None) => (1, 6),
        };
        if ns.0 == 0 {
            return Err(usage("n must be at least 1"));
        }
        let orders = match cfg.pick(args.order_range.clone(), "N-range")? {
            Some(r) => parse_range(&r)?,
            None => (min_order.max(3), 40),
        };
        if orders.0 < min_order {
            return Err(usage(format!(
                "N must be at least {min_order} for this subcommand, got range starting at {}",
                orders.0
            )));
        }
        let mode = cfg
            .pick(args.mode.clone(), "mode")?
            .map(|m| m.parse::<Mode>().map_err(usage))
            .transpose()?
            .unwrap_or(Mode::Projective);
        let eps = cfg
            .pick(args.eps.clone(), "eps")?
            .map(|m| m.parse::<EpsilonVariant>().map_err(usage))
            .transpose()?
            .unwrap_or(EpsilonVariant::Oracle);
        let format = cfg
            .pick(args.format.clone(), "format")?
            .map(|m| m.parse::<TableFormat>().map_err(usage))
            .transpose()?
            .unwrap_or(TableFormat::Csv);
        Ok(GridConfig {
            ns,
            orders,
            mode,
            eps,
            format,
            out: cfg.pick(args.common.out.clone(), "out")?,
            no_header: cfg.flag(args.common.no_header, "no-header")?,
        })
    }

    fn cells(&self) -> Vec<(u64, u64)> {
        (self.ns.0..=self.ns.1)
            .flat_map(|n| (self.orders.0..=self.orders.1).map(move |order| (n, order)))
            .collect()
    }

    fn meta(&self, command: &'static str) -> Meta {
        let mut args = BTreeMap::new();
        args.insert("n-range".into(), format!("{}..{}", self.ns.0, self.ns.1));
        args.insert(
            "N-range".into(),
            format!("{}..{}", self.orders.0, self.orders.1),
        );
        args.insert("mode".into(), self.mode.as_str().into());
        args.insert("eps".into(), self.eps.as_str().into());
        Meta::new(command, args)
    }
}

fn flag_str(b: bool) -> String {
    b.to_string()
}

pub fn census_table(cfg: &GridConfig) -> Table {
    let rows: Vec<_> = cfg
        .cells()
        .into_par_iter()
        .map(|(n, order)| census_row(n, order, cfg.mode, cfg.eps).expect("validated grid"))
        .collect();
    let mut table = Table::new(vec![
        "n",
        "N",
        "mode",
        "eps",
        "formula",
        "formula_printed",
        "formula_oracle",
        "oracle",
        "fixed",
        "configs",
        "discrepancy",
        "notes",
    ]);
    for r in &rows {
        table.push(
            vec![
                r.n.to_string(),
                r.order.to_string(),
                r.mode.as_str().into(),
                r.variant.as_str().into(),
                r.formula_value.to_string(),
                r.formula_printed.to_string(),
                r.formula_oracle.to_string(),
                r.oracle_value.to_string(),
                r.fixed_count.to_string(),
                r.configs.to_string(),
                flag_str(r.discrepancy),
                r.notes.clone(),
            ],
            r,
        );
    }
    let flagged: Vec<String> = rows
        .iter()
        .filter(|r| r.discrepancy)
        .map(|r| format!("({},{})", r.n, r.order))
        .collect();
    table.summary.push(format!(
        "{} rows, {} with discrepancy{}",
        rows.len(),
        flagged.len(),
        list_suffix(&flagged)
    ));
    table
}

fn list_suffix(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!(": {}", items.join(" "))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub n: u64,
    #[serde(rename = "N")]
    pub order: u64,
    pub mode: Mode,
    pub configs: u64,
    pub fixed: u64,
    pub orbits: u64,
}

pub fn oracle_table(cfg: &GridConfig) -> Table {
    let rows: Vec<OracleRow> = cfg
        .cells()
        .into_par_iter()
        .map(|(n, order)| {
            let b = burnside_count(n, order, cfg.mode);
            OracleRow {
                n,
                order,
                mode: cfg.mode,
                configs: b.configs,
                fixed: b.fixed,
                orbits: b.orbits,
            }
        })
        .collect();
    let mut table = Table::new(vec!["n", "N", "mode", "configs", "fixed", "orbits"]);
    for r in &rows {
        table.push(
            vec![
                r.n.to_string(),
                r.order.to_string(),
                r.mode.as_str().into(),
                r.configs.to_string(),
                r.fixed.to_string(),
                r.orbits.to_string(),
            ],
            r,
        );
    }
    table
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconcileRow {
    #[serde(flatten)]
    pub identity: crate::census::DivisorIdentityReport,
    pub eps_printed: u64,
    pub eps_oracle: u64,
    pub eps_agree: bool,
    /// Formula value under the printed epsilon; absent for `N < 3`.
    pub formula_printed: Option<Rational>,
    pub printed_integral: Option<bool>,
}

pub fn reconcile_table(cfg: &GridConfig) -> Table {
    let rows: Vec<ReconcileRow> = cfg
        .cells()
        .into_par_iter()
        .map(|(n, order)| {
            let identity = verify_divisor_identity(n, order, cfg.mode);
            let eps_printed = epsilon_printed(n, order);
            let eps_oracle = burnside_count(n, order, cfg.mode).fixed;
            let formula_printed = (order >= 3)
                .then(|| formula(n, order, cfg.mode, EpsilonVariant::Printed).expect("N >= 3"));
            ReconcileRow {
                identity,
                eps_printed,
                eps_oracle,
                eps_agree: eps_printed == eps_oracle,
                printed_integral: formula_printed.as_ref().map(Rational::is_integer),
                formula_printed,
            }
        })
        .collect();
    let mut table = Table::new(vec![
        "n",
        "N",
        "mode",
        "lhs",
        "closed_printed",
        "closed_corrected",
        "matches_printed",
        "matches_corrected",
        "printed_ratio",
        "inverted",
        "direct",
        "eps_printed",
        "eps_oracle",
        "eps_agree",
        "formula_printed",
        "printed_integral",
        "notes",
    ]);
    for r in &rows {
        let id = &r.identity;
        table.push(
            vec![
                id.n.to_string(),
                id.modulus.to_string(),
                id.mode.as_str().into(),
                id.lhs.to_string(),
                id.closed_printed.to_string(),
                id.closed_corrected.to_string(),
                flag_str(id.matches_printed),
                flag_str(id.matches_corrected),
                id.printed_ratio
                    .as_ref()
                    .map(ToString::to_string)
                    .unwrap_or_default(),
                id.inverted.to_string(),
                id.direct.to_string(),
                r.eps_printed.to_string(),
                r.eps_oracle.to_string(),
                flag_str(r.eps_agree),
                r.formula_printed
                    .as_ref()
                    .map(ToString::to_string)
                    .unwrap_or_default(),
                r.printed_integral.map(flag_str).unwrap_or_default(),
                id.notes.clone(),
            ],
            r,
        );
    }
    table.summary = reconcile_summary(&rows, cfg.mode);
    table
}

fn cell(n: u64, order: u64) -> String {
    format!("({n},{order})")
}

fn reconcile_summary(rows: &[ReconcileRow], mode: Mode) -> Vec<String> {
    let mut out = Vec::new();
    let nonzero: Vec<&ReconcileRow> = rows.iter().filter(|r| r.identity.lhs != 0).collect();
    let printed_bad: Vec<&ReconcileRow> = rows
        .iter()
        .filter(|r| !r.identity.matches_printed)
        .collect();
    let mut ratios: Vec<String> = printed_bad
        .iter()
        .filter_map(|r| r.identity.printed_ratio.as_ref().map(ToString::to_string))
        .collect();
    ratios.sort();
    ratios.dedup();
    out.push(format!(
        "printed closed form: {} of {} cells mismatch ({} cells with nonzero enumerated sum); printed/enumerated ratios seen: {}",
        printed_bad.len(),
        rows.len(),
        nonzero.len(),
        match ratios.len() {
            0 => "none".to_string(),
            1..=6 => ratios.join(" "),
            k => format!("{k} distinct values"),
        }
    ));
    if mode == Mode::Projective
        && !nonzero.is_empty()
        && nonzero
            .iter()
            .all(|r| r.identity.printed_ratio == Some(Rational::from_integer(2)))
    {
        out.push(
            "printed projective form is exactly twice the enumerated sum at every nonzero cell"
                .into(),
        );
    }
    if !printed_bad.is_empty() {
        let cells: Vec<String> = printed_bad
            .iter()
            .map(|r| cell(r.identity.n, r.identity.modulus))
            .collect();
        out.push(format!(
            "printed closed form mismatches at: {}",
            cells.join(" ")
        ));
    }
    if mode == Mode::Ordinary && !printed_bad.is_empty() {
        // differences grouped by n, with the parities of N where they occur
        let mut by_n: BTreeMap<u64, BTreeMap<String, BTreeSet<&'static str>>> = BTreeMap::new();
        for r in &printed_bad {
            let d = &r.identity.closed_printed - &Rational::from_integer(r.identity.lhs as i64);
            let parity = if r.identity.modulus % 2 == 1 {
                "odd N"
            } else {
                "even N"
            };
            by_n.entry(r.identity.n)
                .or_default()
                .entry(d.to_string())
                .or_default()
                .insert(parity);
        }
        let parts: Vec<String> = by_n
            .iter()
            .map(|(n, diffs)| {
                let ds: Vec<String> = diffs
                    .iter()
                    .map(|(d, parities)| {
                        format!(
                            "{d} ({})",
                            parities.iter().copied().collect::<Vec<_>>().join(", ")
                        )
                    })
                    .collect();
                format!("n={n}: {}", ds.join(" "))
            })
            .collect();
        out.push(format!(
            "printed minus enumerated, by n: {}",
            parts.join("; ")
        ));
    }
    let corrected_bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.identity.matches_corrected)
        .map(|r| cell(r.identity.n, r.identity.modulus))
        .collect();
    out.push(format!(
        "corrected closed form: {} mismatches{}",
        corrected_bad.len(),
        list_suffix(&corrected_bad)
    ));
    let inversion_bad: Vec<String> = rows
        .iter()
        .filter(|r| r.identity.inverted != Rational::from_integer(r.identity.direct as i64))
        .map(|r| cell(r.identity.n, r.identity.modulus))
        .collect();
    out.push(format!(
        "moebius inversion vs direct count: {} mismatches{}",
        inversion_bad.len(),
        list_suffix(&inversion_bad)
    ));
    let eps_bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.eps_agree)
        .map(|r| {
            format!(
                "{}:printed={},oracle={}",
                cell(r.identity.n, r.identity.modulus),
                r.eps_printed,
                r.eps_oracle
            )
        })
        .collect();
    out.push(format!(
        "epsilon disagreements: {}{}",
        eps_bad.len(),
        list_suffix(&eps_bad)
    ));
    let non_integral: Vec<String> = rows
        .iter()
        .filter(|r| r.printed_integral == Some(false))
        .map(|r| cell(r.identity.n, r.identity.modulus))
        .collect();
    out.push(format!(
        "non-integral formula under printed epsilon: {}{}",
        non_integral.len(),
        list_suffix(&non_integral)
    ));
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheckRow {
    pub n: u64,
    #[serde(rename = "N")]
    pub order: u64,
    pub mode: Mode,
    pub formula_oracle: Option<Rational>,
    pub oracle: u64,
    pub formula_ok: bool,
    pub divisor_lhs: u64,
    pub divisor_closed: Rational,
    pub divisor_ok: bool,
    pub inverted: Rational,
    pub direct: u64,
    pub inversion_ok: bool,
    pub pass: bool,
}

pub fn identity_table(cfg: &GridConfig) -> Table {
    let rows: Vec<IdentityCheckRow> = cfg
        .cells()
        .into_par_iter()
        .map(|(n, order)| {
            let oracle = burnside_count(n, order, cfg.mode).orbits;
            let formula_oracle = (order >= 3)
                .then(|| formula(n, order, cfg.mode, EpsilonVariant::Oracle).expect("N >= 3"));
            let formula_ok = formula_oracle
                .as_ref()
                .is_none_or(|f| *f == Rational::from_integer(oracle as i64));
            let id = verify_divisor_identity(n, order, cfg.mode);
            let inversion_ok = id.inverted == Rational::from_integer(id.direct as i64);
            IdentityCheckRow {
                n,
                order,
                mode: cfg.mode,
                formula_oracle,
                oracle,
                formula_ok,
                divisor_lhs: id.lhs,
                divisor_closed: id.closed_corrected.clone(),
                divisor_ok: id.matches_corrected,
                inverted: id.inverted.clone(),
                direct: id.direct,
                inversion_ok,
                pass: formula_ok && id.matches_corrected && inversion_ok,
            }
        })
        .collect();
    let mut table = Table::new(vec![
        "n",
        "N",
        "mode",
        "formula_oracle",
        "oracle",
        "formula_ok",
        "divisor_lhs",
        "divisor_closed",
        "divisor_ok",
        "inverted",
        "direct",
        "inversion_ok",
        "pass",
    ]);
    for r in &rows {
        table.push(
            vec![
                r.n.to_string(),
                r.order.to_string(),
                r.mode.as_str().into(),
                r.formula_oracle
                    .as_ref()
                    .map(ToString::to_string)
                    .unwrap_or_default(),
                r.oracle.to_string(),
                flag_str(r.formula_ok),
                r.divisor_lhs.to_string(),
                r.divisor_closed.to_string(),
                flag_str(r.divisor_ok),
                r.inverted.to_string(),
                r.direct.to_string(),
                flag_str(r.inversion_ok),
                flag_str(r.pass),
            ],
            r,
        );
    }
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| cell(r.n, r.order))
        .collect();
    table.summary.push(format!(
        "{} cells checked, {} failed{}",
        rows.len(),
        failed.len(),
        list_suffix(&failed)
    ));
    table
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub request: SolveRequest,
    pub format: TableFormat,
    pub out: Option<PathBuf>,
    pub dump: Option<PathBuf>,
    pub no_header: bool,
}

impl SolveConfig {
    fn resolve(args: &SolveArgs) -> Result<Self, CliError> {
        let cfg = ConfigFile::load(&args.common.config, SOLVE_KEYS)?;
        let n = cfg
            .pick(args.n, "n")?
            .ok_or_else(|| usage("solve needs --n"))?;
        let rational = |flag: Option<String>, key: &str| -> Result<Rational, CliError> {
            let text = cfg
                .pick(flag, key)?
                .ok_or_else(|| usage(format!("solve needs --{key}")))?;
            text.parse::<Rational>()
                .map_err(|e| usage(format!("--{key} {text}: {e}")))
        };
        let s = rational(args.s.clone(), "s")?;
        let t = rational(args.t.clone(), "t")?;
        let mut request = SolveRequest::new(n, s, t);
        if let Some(w) = cfg.pick(args.window.clone(), "window")? {
            request.window = parse_window(&w)?;
        }
        if let Some(g) = cfg.pick(args.seeds.clone(), "seeds")? {
            request.seed_grid = parse_seeds(&g)?;
        }
        if let Some(tol) = cfg.pick(args.tol, "tol")? {
            request.tol = tol;
        }
        if let Some(it) = cfg.pick(args.max_iter, "max-iter")? {
            request.max_iter = it;
        }
        let format = cfg
            .pick(args.format.clone(), "format")?
            .map(|m| m.parse::<TableFormat>().map_err(usage))
            .transpose()?
            .unwrap_or(TableFormat::Csv);
        Ok(SolveConfig {
            request,
            format,
            out: cfg.pick(args.common.out.clone(), "out")?,
            dump: cfg.pick(args.dump.clone(), "dump")?,
            no_header: cfg.flag(args.common.no_header, "no-header")?,
        })
    }

    fn meta(&self) -> Meta {
        let r = &self.request;
        let mut args = BTreeMap::new();
        args.insert("n".into(), r.n.to_string());
        args.insert("s".into(), r.s.to_string());
        args.insert("t".into(), r.t.to_string());
        let w = &r.window;
        args.insert(
            "window".into(),
            format!("{},{},{},{}", w.x0, w.x1, w.y0, w.y1),
        );
        args.insert(
            "seeds".into(),
            format!("{}x{}", r.seed_grid.0, r.seed_grid.1),
        );
        args.insert("tol".into(), format!("{:e}", r.tol));
        args.insert("max-iter".into(), r.max_iter.to_string());
        Meta::new("solve", args)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RootRow {
    pub index: usize,
    pub tau: [String; 2],
    pub j: [String; 2],
    #[serde(rename = "B")]
    pub b: [String; 2],
    pub points: Vec<[String; 2]>,
    pub hecke: String,
    pub system: String,
    pub ode: String,
    pub monodromy: String,
    pub exponent1: [String; 2],
    pub exponent2: [String; 2],
    pub verified: bool,
}

pub fn solve_table(outcome: &SolveOutcome) -> Table {
    let mut table = Table::new(vec![
        "index",
        "tau_re",
        "tau_im",
        "j_re",
        "j_im",
        "B_re",
        "B_im",
        "points",
        "hecke",
        "system",
        "ode",
        "monodromy",
        "exp1_re",
        "exp1_im",
        "exp2_re",
        "exp2_im",
        "verified",
    ]);
    let pair = |z: num_complex::Complex64| [fmt_float(z.re), fmt_float(z.im)];
    for (index, root) in outcome.roots.iter().enumerate() {
        let rep = verify_solution(root);
        let nan = num_complex::Complex64::new(f64::NAN, f64::NAN);
        let e1 = rep.monodromy.first().map_or(nan, |c| c.computed);
        let e2 = rep.monodromy.get(1).map_or(nan, |c| c.computed);
        let points: Vec<[String; 2]> = root
            .ansatz
            .points
            .iter()
            .map(|p| [fmt_float(p.t), fmt_float(p.s)])
            .collect();
        let row = RootRow {
            index,
            tau: pair(root.tau),
            j: pair(root.j_invariant),
            b: pair(root.b),
            hecke: fmt_float(root.residuals.hecke),
            system: fmt_float(root.residuals.system),
            ode: fmt_float(root.residuals.ode),
            monodromy: fmt_float(root.residuals.monodromy),
            exponent1: pair(e1),
            exponent2: pair(e2),
            verified: rep.passed(),
            points,
        };
        let points_cell: Vec<String> = row.points.iter().map(|[t, s]| format!("{t}:{s}")).collect();
        table.push(
            vec![
                index.to_string(),
                row.tau[0].clone(),
                row.tau[1].clone(),
                row.j[0].clone(),
                row.j[1].clone(),
                row.b[0].clone(),
                row.b[1].clone(),
                points_cell.join(";"),
                row.hecke.clone(),
                row.system.clone(),
                row.ode.clone(),
                row.monodromy.clone(),
                row.exponent1[0].clone(),
                row.exponent1[1].clone(),
                row.exponent2[0].clone(),
                row.exponent2[1].clone(),
                flag_str(row.verified),
            ],
            &row,
        );
    }
    let stats = json!({
        "seeds_tried": outcome.seeds_tried,
        "seeds_converged": outcome.seeds_converged,
        "rejected_outside_window": outcome.rejected_outside_window,
        "rejected_unverified": outcome.rejected_unverified,
        "roots": outcome.roots.len(),
    });
    table.summary.push(format!(
        "{} roots; seeds tried {}, converged {}, outside window {}, failed verification {}",
        outcome.roots.len(),
        outcome.seeds_tried,
        outcome.seeds_converged,
        outcome.rejected_outside_window,
        outcome.rejected_unverified
    ));
    // pairs of roots whose j-invariants nearly agree may be the same equation
    for (i, a) in outcome.roots.iter().enumerate() {
        for (k, b) in outcome.roots.iter().enumerate().skip(i + 1) {
            let scale = 1.0 + a.j_invariant.norm().max(b.j_invariant.norm());
            if (a.j_invariant - b.j_invariant).norm() < 1e-6 * scale {
                table.summary.push(format!(
                    "roots {i} and {k} have matching j-invariants (possible modular images)"
                ));
            }
        }
    }
    table.extra.insert("stats".into(), stats);
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DessinFormat {
    Dot,
    Json,
}

impl FromStr for DessinFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(DessinFormat::Dot),
            "json" => Ok(DessinFormat::Json),
            other => Err(format!(
                "unknown dessin format {other:?} (expected dot or json)"
            )),
        }
    }
}

/// Renders the requested dessin; DOT output carries a `//` header line.
pub fn dessin_output(args: &DessinArgs) -> Result<(String, Option<PathBuf>), CliError> {
    let cfg = ConfigFile::load(&args.common.config, DESSIN_KEYS)?;
    let theta_text = cfg
        .pick(args.theta.clone(), "theta")?
        .ok_or_else(|| usage("dessin needs --theta"))?;
    let m_text = cfg
        .pick(args.m.clone(), "m")?
        .ok_or_else(|| usage("dessin needs --m"))?;
    let theta =
        ThetaTriple::new(parse_triple(&theta_text, "theta")?).map_err(|e| usage(e.to_string()))?;
    let m = parse_triple(&m_text, "m")?;
    let n = cfg.pick(args.n, "n")?.unwrap_or(theta.n());
    let order = cfg.pick(args.order, "N")?.unwrap_or(m.iter().sum());
    let quotient = cfg.flag(args.quotient, "quotient")?;
    let no_header = cfg.flag(args.common.no_header, "no-header")?;
    let format = cfg
        .pick(args.format.clone(), "format")?
        .map(|f| f.parse::<DessinFormat>().map_err(usage))
        .transpose()?
        .unwrap_or(DessinFormat::Dot);
    let torus =
        dessin_from_config(n, theta, m, order).map_err(|e: DessinError| usage(e.to_string()))?;
    let body = match (format, quotient) {
        (DessinFormat::Dot, false) => torus.to_dot(),
        (DessinFormat::Dot, true) => quotient_dessin(&torus).to_dot(),
        (DessinFormat::Json, false) => torus.to_json() + "\n",
        (DessinFormat::Json, true) => quotient_dessin(&torus).to_json() + "\n",
    };
    let text = if format == DessinFormat::Dot && !no_header {
        format!(
            "// lame-census {} dessin n={n} N={order} theta={theta} m={},{},{} quotient={quotient}\n{body}",
            env!("CARGO_PKG_VERSION"),
            m[0],
            m[1],
            m[2]
        )
    } else {
        body
    };
    Ok((text, cfg.pick(args.common.out.clone(), "out")?))
}

fn emit(text: &str, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_grid(
    args: &GridArgs,
    command: &'static str,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let min_order = match command {
        "census" | "oracle" => 3,
        _ => 1,
    };
    let cfg = GridConfig::resolve(args, min_order)?;
    let table = match command {
        "census" => census_table(&cfg),
        "oracle" => oracle_table(&cfg),
        "reconcile" => reconcile_table(&cfg),
        _ => identity_table(&cfg),
    };
    let meta = (!cfg.no_header).then(|| cfg.meta(command));
    emit(&table.render(cfg.format, meta.as_ref()), &cfg.out, stdout)?;
    if command == "verify-identities" && table.json_rows.iter().any(|r| r["pass"] == json!(false)) {
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

fn run_solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = SolveConfig::resolve(args)?;
    let outcome = solve(&cfg.request).map_err(|e| match e {
        SolverError::Degenerate(msg) => CliError::Degenerate(msg),
        SolverError::InvalidRequest(msg) => CliError::Usage(msg),
    })?;
    let table = solve_table(&outcome);
    let meta = (!cfg.no_header).then(|| cfg.meta());
    emit(&table.render(cfg.format, meta.as_ref()), &cfg.out, stdout)?;
    if let Some(path) = &cfg.dump {
        let text =
            serde_json::to_string_pretty(&outcome).map_err(|e| CliError::Numeric(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
    }
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let result = match &cli.command {
        Command::Census(a) => run_grid(a, "census", stdout),
        Command::Oracle(a) => run_grid(a, "oracle", stdout),
        Command::Reconcile(a) => run_grid(a, "reconcile", stdout),
        Command::VerifyIdentities(a) => run_grid(a, "verify-identities", stdout),
        Command::Solve(a) => run_solve(a, stdout),
        Command::Dessin(a) => {
            dessin_output(a).and_then(|(text, out)| emit(&text, &out, stdout).map(|_| EXIT_OK))
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
