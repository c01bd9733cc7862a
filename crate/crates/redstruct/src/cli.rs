//! Batch front end: declarative input files, catalog selection, and the
//! verify / catalog / series / period commands with text or JSON reports.
//!
//! Exit codes: 0 all checks pass, 1 any check fails, 2 on inconclusive
//! results, guard violations, or parse errors.

use crate::cone_calculus::{Sector, Verdict};
use crate::period_evaluator::{
    assemble_period, brute_force_period, eval_at_one, eval_family_at_one, temperedness_margin,
    EvalPoint, FamilyOutcome, PeriodResult, VolumeConfig,
};
use crate::reduction_verifier::{
    catalog, derive_template, theta_label, verify, CatalogEntry, ReductionStructure, Report,
    Triple, VerifyOptions,
};
use crate::ring::{rat_int, Coeff, Rat, RatFn, UPoly};
use crate::root_datum::{build_catalog_pair, SphericalPair};
use crate::series_engine::{
    expand, reduce, specialize, truncate, ExpPoly, ExpPolyTerm, MultiPoly, ToyModule,
};
use clap::{Parser, Subcommand, ValueEnum};
use num::{Signed, ToPrimitive};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

// ---------------------------------------------------------------------------
// Guard ranges.

const MAX_NMAX: u32 = 8;
const MAX_RANK: usize = 6;
const MAX_ORDER: i64 = 200;

// ---------------------------------------------------------------------------
// Command line.

#[derive(Parser, Debug)]
#[command(name = "redstruct", version, about = "Exact verification of reduction structures and the rationality recursion for cone-indexed series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Add decimal approximations next to exact fractions.
    #[arg(long, global = true)]
    pub float: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Verify reduction structures: membership, decomposition (F1),
    /// finiteness (F2), and minimality.
    Verify {
        /// Catalog selection: `all`, an exact key, or a key prefix
        /// (e.g. `table3` or `gl/n2`).
        #[arg(long)]
        catalog: Option<String>,
        /// Select catalog structures by pair name
        /// (triple, waldspurger, gl2, gl3, so3, so4, gl4gl2, sp6sp4).
        #[arg(long)]
        pair: Option<String>,
        /// Restrict to one Θ_H label (e.g. `empty`, `a1`, `full`).
        #[arg(long)]
        theta: Option<String>,
        /// Restrict to one sector (plus, zero, minus, none).
        #[arg(long)]
        sector: Option<String>,
        /// Translation depth for the decomposition check (1..=8).
        #[arg(long, default_value_t = 4)]
        nmax: u32,
        /// Input file with [pair] and [structure] sections.
        input: Option<PathBuf>,
    },
    /// List the built-in catalog, or dump entries in the input format.
    Catalog {
        /// Filter by pair name.
        #[arg(long)]
        pair: Option<String>,
        /// Print full entries in the declarative input format.
        #[arg(long)]
        dump: bool,
    },
    /// Closed rational form of a module's cone series, with the
    /// truncation oracle and the specialization to S.
    Series {
        /// Input file with [pair] and [module] sections.
        input: PathBuf,
        /// Θ_H as `empty`, `full`, or a comma list of Δ_H root names.
        #[arg(long)]
        theta: Option<String>,
        /// Sector (plus, zero, minus, none).
        #[arg(long)]
        sector: Option<String>,
        /// Expansion order to print (1..=200).
        #[arg(long, default_value_t = 12)]
        order: i64,
        /// Residue-field size used in the specialization.
        #[arg(long)]
        q: Option<String>,
        /// Family evaluation points u₀ (repeatable).
        #[arg(long = "eval-u", allow_hyphen_values = true)]
        eval_u: Vec<String>,
    },
    /// Toy local period: evaluate the assembled series at S = 1 and
    /// cross-check against brute-force partial sums.
    Period {
        /// Input file with [pair] and [module] (and optional [volume]).
        input: PathBuf,
        /// Residue-field size (overrides the [volume] section).
        #[arg(long)]
        q: Option<String>,
        /// Brute-force truncation depth (1..=200).
        #[arg(long, default_value_t = 200)]
        order: i64,
        /// Family evaluation point u₀ (required for family modules).
        #[arg(long = "eval-u", allow_hyphen_values = true)]
        eval_u: Vec<String>,
        /// Skip the temperedness-margin guard.
        #[arg(long)]
        skip_margin: bool,
    },
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Verify {
            catalog: sel,
            pair,
            theta,
            sector,
            nmax,
            input,
        } => cmd_verify(cli, sel.as_deref(), pair.as_deref(), theta.as_deref(), sector.as_deref(), *nmax, input.as_deref()),
        Command::Catalog { pair, dump } => cmd_catalog(cli, pair.as_deref(), *dump),
        Command::Series {
            input,
            theta,
            sector,
            order,
            q,
            eval_u,
        } => cmd_series(cli, input, theta.as_deref(), sector.as_deref(), *order, q.as_deref(), eval_u),
        Command::Period {
            input,
            q,
            order,
            eval_u,
            skip_margin,
        } => cmd_period(cli, input, q.as_deref(), *order, eval_u, *skip_margin),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), String> {
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("writing {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Input format.
//
// Line oriented; `#` starts a comment; sections in square brackets; one
// `key = value` per line. Sections: [pair] (name), [structure] (thetaH,
// sector, triple...), [module] (term...), [volume] (q, constant...).
// Triples are written `(theta; w; s)` with theta a comma list of Δ_G root
// names or `empty`; module terms are `lambda; chi1,chi2,...; poly`.

#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ParseError {}

fn perr(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError { line, msg: msg.into() }
}

/// A module's coefficient data, over ℚ or over the family ring ℚ(u).
#[derive(Debug, Clone)]
pub enum ModuleSpec {
    Exact(ExpPoly<Rat>),
    Family(ExpPoly<RatFn>),
}

#[derive(Debug, Default)]
pub struct InputFile {
    pub pair: Option<SphericalPair>,
    pub structures: Vec<ReductionStructure>,
    pub module: Option<ModuleSpec>,
    pub q: Option<Rat>,
    /// Volume-constant overrides keyed by Θ_H.
    pub constants: Vec<(BTreeSet<usize>, Rat)>,
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Pair,
    Structure,
    Module,
    Volume,
}

struct StructureDraft {
    line: usize,
    theta_h: Option<BTreeSet<usize>>,
    sector: Option<Sector>,
    triples: Vec<(usize, Triple)>,
}

pub fn parse_input(text: &str) -> Result<InputFile, ParseError> {
    let mut out = InputFile::default();
    let mut section = Section::None;
    let mut draft: Option<StructureDraft> = None;
    let mut terms: Vec<(usize, RatFn, Vec<RatFn>, RatFn)> = Vec::new();
    let mut saw_section = false;

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            saw_section = true;
            finish_structure(&mut draft, &out.pair, &mut out.structures)?;
            section = match name {
                "pair" => Section::Pair,
                "structure" => {
                    if out.pair.is_none() {
                        return Err(perr(ln, "[structure] section before [pair]"));
                    }
                    draft = Some(StructureDraft {
                        line: ln,
                        theta_h: None,
                        sector: None,
                        triples: Vec::new(),
                    });
                    Section::Structure
                }
                "module" => {
                    if out.pair.is_none() {
                        return Err(perr(ln, "[module] section before [pair]"));
                    }
                    Section::Module
                }
                "volume" => Section::Volume,
                other => {
                    return Err(perr(
                        ln,
                        format!("unknown section `[{other}]` (expected pair, structure, module, volume)"),
                    ))
                }
            };
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(perr(ln, "expected `key = value`"));
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        match section {
            Section::None => return Err(perr(ln, "key outside any section")),
            Section::Pair => match key {
                "name" => {
                    out.pair = Some(pair_by_name(value).map_err(|m| perr(ln, m))?);
                }
                k => return Err(perr(ln, format!("unknown key `{k}` in [pair] (expected name)"))),
            },
            Section::Structure => {
                let pair = out.pair.as_ref().unwrap();
                let d = draft.as_mut().unwrap();
                match key {
                    "thetaH" => {
                        d.theta_h = Some(parse_theta_h(pair, value).map_err(|m| perr(ln, m))?);
                    }
                    "sector" => {
                        d.sector = Some(parse_sector(value).map_err(|m| perr(ln, m))?);
                    }
                    "triple" => {
                        d.triples.push((ln, parse_triple(pair, value).map_err(|m| perr(ln, m))?));
                    }
                    k => {
                        return Err(perr(
                            ln,
                            format!("unknown key `{k}` in [structure] (expected thetaH, sector, triple)"),
                        ))
                    }
                }
            }
            Section::Module => match key {
                "term" => {
                    let pair = out.pair.as_ref().unwrap();
                    let (l, chi, p) = parse_term(pair, value).map_err(|m| perr(ln, m))?;
                    terms.push((ln, l, chi, p));
                }
                k => return Err(perr(ln, format!("unknown key `{k}` in [module] (expected term)"))),
            },
            Section::Volume => match key {
                "q" => {
                    out.q = Some(parse_rat(value).map_err(|m| perr(ln, m))?);
                }
                "constant" => {
                    let pair = out
                        .pair
                        .as_ref()
                        .ok_or_else(|| perr(ln, "volume constant before [pair]"))?;
                    let (names, v) = value
                        .split_once(';')
                        .ok_or_else(|| perr(ln, "expected `constant = thetaH; value`"))?;
                    let theta = parse_theta_h(pair, names.trim()).map_err(|m| perr(ln, m))?;
                    out.constants.push((theta, parse_rat(v.trim()).map_err(|m| perr(ln, m))?));
                }
                k => return Err(perr(ln, format!("unknown key `{k}` in [volume] (expected q, constant)"))),
            },
        }
    }
    if !saw_section {
        return Err(perr(1, "no sections"));
    }
    finish_structure(&mut draft, &out.pair, &mut out.structures)?;
    if !terms.is_empty() {
        out.module = Some(build_module(out.pair.as_ref().unwrap(), terms)?);
    }
    Ok(out)
}

fn finish_structure(
    draft: &mut Option<StructureDraft>,
    pair: &Option<SphericalPair>,
    out: &mut Vec<ReductionStructure>,
) -> Result<(), ParseError> {
    let Some(d) = draft.take() else {
        return Ok(());
    };
    let pair = pair.as_ref().unwrap();
    let theta_h = d
        .theta_h
        .ok_or_else(|| perr(d.line, "structure missing `thetaH`"))?;
    let sector = d.sector.unwrap_or(Sector::None);
    let ctx = crate::cone_calculus::StdConeId::new(theta_h.clone(), sector);
    let mut entries = Vec::new();
    for (ln, t) in d.triples {
        let tpl = derive_template(pair, &ctx, &t.s)
            .map_err(|e| perr(ln, format!("template derivation failed: {e}")))?;
        entries.push((t, tpl));
    }
    out.push(ReductionStructure { theta_h, sector, entries });
    Ok(())
}

fn build_module(
    pair: &SphericalPair,
    terms: Vec<(usize, RatFn, Vec<RatFn>, RatFn)>,
) -> Result<ModuleSpec, ParseError> {
    let dim = pair.h_rank();
    let first_line = terms.first().map_or(1, |(ln, ..)| *ln);
    for (ln, _, chi, _) in &terms {
        if chi.len() != dim {
            return Err(perr(*ln, format!("chi has {} entries but the H-rank is {dim}", chi.len())));
        }
    }
    let all_const = terms
        .iter()
        .all(|(_, l, chi, p)| as_const(l).is_some() && chi.iter().all(|c| as_const(c).is_some()) && as_const(p).is_some());
    if all_const {
        let ts = terms
            .into_iter()
            .map(|(_, l, chi, p)| ExpPolyTerm {
                lambda: as_const(&l).unwrap(),
                chi: chi.iter().map(|c| as_const(c).unwrap()).collect(),
                poly: MultiPoly::constant(dim, as_const(&p).unwrap()),
            })
            .collect();
        let ep = ExpPoly::new(dim, ts).map_err(|e| perr(first_line, e.to_string()))?;
        Ok(ModuleSpec::Exact(ep))
    } else {
        let ts = terms
            .into_iter()
            .map(|(_, l, chi, p)| ExpPolyTerm {
                lambda: l,
                chi,
                poly: MultiPoly::constant(dim, p),
            })
            .collect();
        let ep = ExpPoly::new(dim, ts).map_err(|e| perr(first_line, e.to_string()))?;
        Ok(ModuleSpec::Family(ep))
    }
}

fn pair_by_name(name: &str) -> Result<SphericalPair, String> {
    let built = match name {
        "triple" | "waldspurger" | "gl4gl2" | "sp6sp4" => build_catalog_pair(name, None),
        "gl2" => build_catalog_pair("gl", Some(2)),
        "gl3" => build_catalog_pair("gl", Some(3)),
        "so3" => build_catalog_pair("so", Some(3)),
        "so4" => build_catalog_pair("so", Some(4)),
        _ => {
            return Err(format!(
                "unknown pair `{name}` (expected triple, waldspurger, gl2, gl3, so3, so4, gl4gl2, sp6sp4)"
            ))
        }
    };
    built.map_err(|e| e.to_string())
}

fn parse_sector(s: &str) -> Result<Sector, String> {
    match s {
        "plus" => Ok(Sector::Plus),
        "zero" => Ok(Sector::Zero),
        "minus" => Ok(Sector::Minus),
        "none" => Ok(Sector::None),
        _ => Err(format!("unknown sector `{s}` (expected plus, zero, minus, none)")),
    }
}

/// `empty`, `full`, or a comma list of Δ_H root names.
fn parse_theta_h(pair: &SphericalPair, s: &str) -> Result<BTreeSet<usize>, String> {
    match s {
        "empty" => Ok(BTreeSet::new()),
        "full" => Ok((0..pair.delta_h.len()).collect()),
        _ => s
            .split(',')
            .map(|n| {
                let n = n.trim();
                pair.delta_h_index(n).ok_or_else(|| format!("unknown Δ_H root `{n}`"))
            })
            .collect(),
    }
}

fn parse_theta_g(pair: &SphericalPair, s: &str) -> Result<BTreeSet<usize>, String> {
    match s {
        "empty" => Ok(BTreeSet::new()),
        "full" => Ok((0..pair.delta_g.len()).collect()),
        _ => s
            .split(',')
            .map(|n| {
                let n = n.trim();
                pair.delta_g_index(n).ok_or_else(|| format!("unknown Δ_G root `{n}`"))
            })
            .collect(),
    }
}

/// `(theta; w; s)` with s a comma list of integers.
fn parse_triple(pair: &SphericalPair, s: &str) -> Result<Triple, String> {
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or("expected `(theta; w; s)`")?;
    let parts: Vec<&str> = inner.split(';').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected three `;`-separated fields in triple".into());
    }
    let theta = parse_theta_g(pair, parts[0])?;
    if pair.weyl_by_name(parts[1]).is_none() {
        return Err(format!("unknown Weyl element `{}`", parts[1]));
    }
    let s_pt: Result<Vec<i64>, _> = parts[2].split(',').map(|c| c.trim().parse::<i64>()).collect();
    let s_pt = s_pt.map_err(|e| format!("bad shift coordinate: {e}"))?;
    if s_pt.len() != pair.h_rank() {
        return Err(format!("shift has {} coordinates but the H-rank is {}", s_pt.len(), pair.h_rank()));
    }
    Ok(Triple {
        theta,
        w: parts[1].to_string(),
        s: s_pt,
    })
}

/// `lambda; chi1,chi2,...; poly`, each a scalar expression over ℚ(u).
fn parse_term(pair: &SphericalPair, s: &str) -> Result<(RatFn, Vec<RatFn>, RatFn), String> {
    let parts: Vec<&str> = s.split(';').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected `lambda; chi1,chi2,...; poly`".into());
    }
    let lambda = parse_scalar(parts[0])?;
    let chi: Result<Vec<RatFn>, _> = parts[1].split(',').map(|c| parse_scalar(c.trim())).collect();
    let chi = chi?;
    if chi.len() != pair.h_rank() {
        return Err(format!("chi has {} entries but the H-rank is {}", chi.len(), pair.h_rank()));
    }
    Ok((lambda, chi, parse_scalar(parts[2])?))
}

// ---------------------------------------------------------------------------
// Scalar expressions: rationals and rational functions in `u`.
// expr := term (('+'|'-') term)* ; term := factor (('*'|'/') factor)* ;
// factor := ['-'] atom ['^' int] ; atom := integer | 'u' | '(' expr ')'.

struct Scanner<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(s: &'a str) -> Self {
        Scanner { src: s.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn integer(&mut self) -> Result<i64, String> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse::<i64>()
            .map_err(|_| "expected an integer".to_string())
    }

    fn expr(&mut self) -> Result<RatFn, String> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RatFn, String> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.bump();
                    acc = acc.mul(&self.factor()?);
                }
                Some(b'/') => {
                    self.bump();
                    let d = self.factor()?;
                    let inv = d.inv().ok_or("division by zero")?;
                    acc = acc.mul(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<RatFn, String> {
        if self.peek() == Some(b'-') {
            self.bump();
            return Ok(self.factor()?.neg());
        }
        let mut base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.bump();
            let e = self.integer()?;
            base = base.pow_i(e).ok_or("zero raised to a negative power")?;
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<RatFn, String> {
        match self.peek() {
            Some(b'u') => {
                self.bump();
                Ok(RatFn::var())
            }
            Some(b'(') => {
                self.bump();
                let v = self.expr()?;
                if self.bump() != Some(b')') {
                    return Err("expected `)`".into());
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(RatFn::from_poly(UPoly::constant(rat_int(n))))
            }
            Some(c) => Err(format!("unexpected character `{}`", c as char)),
            None => Err("unexpected end of expression".into()),
        }
    }
}

pub fn parse_scalar(s: &str) -> Result<RatFn, String> {
    let mut sc = Scanner::new(s);
    let v = sc.expr()?;
    if sc.peek().is_some() {
        return Err(format!("trailing input in expression `{s}`"));
    }
    Ok(v)
}

pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let f = parse_scalar(s)?;
    as_const(&f).ok_or_else(|| format!("expected a rational number, got `{s}`"))
}

fn as_const(f: &RatFn) -> Option<Rat> {
    let p = f.as_poly()?;
    match p.0.len() {
        0 => Some(rat_int(0)),
        1 => Some(p.0[0].clone()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Serialization of catalog entries to the input format.

fn theta_g_names(pair: &SphericalPair, theta: &BTreeSet<usize>) -> String {
    if theta.is_empty() {
        "empty".into()
    } else if theta.len() == pair.delta_g.len() {
        "full".into()
    } else {
        theta
            .iter()
            .map(|&i| pair.delta_g[i].0.clone())
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn theta_h_names(pair: &SphericalPair, theta: &BTreeSet<usize>) -> String {
    if theta.is_empty() {
        "empty".into()
    } else if theta.len() == pair.delta_h.len() {
        "full".into()
    } else {
        theta
            .iter()
            .map(|&i| pair.delta_h[i].0.clone())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Emit one catalog entry in the input format. Templates are not written;
/// parsing re-derives them, and the derivation is deterministic, so
/// `parse_input(serialize_entry(e))` reproduces the structure exactly.
pub fn serialize_entry(e: &CatalogEntry) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", e.key);
    let _ = writeln!(s, "[pair]");
    let _ = writeln!(s, "name = {}", e.pair.name);
    let _ = writeln!(s);
    let _ = writeln!(s, "[structure]");
    let _ = writeln!(s, "thetaH = {}", theta_h_names(&e.pair, &e.structure.theta_h));
    let _ = writeln!(s, "sector = {}", e.structure.sector.label());
    for (t, _) in &e.structure.entries {
        let coords: Vec<String> = t.s.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            s,
            "triple = ({}; {}; {})",
            theta_g_names(&e.pair, &t.theta),
            t.w,
            coords.join(",")
        );
    }
    s
}

// ---------------------------------------------------------------------------
// Reports.

fn sha_hex(data: &str) -> String {
    let mut h = Sha256::new();
    h.update(data.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn agg_verdicts(vs: &[Verdict]) -> &'static str {
    if vs.iter().all(Verdict::is_pass) {
        "pass"
    } else if vs.iter().any(|v| matches!(v, Verdict::Inconclusive(_))) {
        "inconclusive"
    } else {
        "fail"
    }
}

fn verdict_status(v: &Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Inconclusive(_) => "inconclusive",
        _ => "fail",
    }
}

fn report_witnesses(r: &Report) -> Vec<String> {
    let mut w = Vec::new();
    for (name, vs) in [("membership", &r.membership), ("f1", &r.f1)] {
        for (i, v) in vs.iter().enumerate() {
            if !v.is_pass() {
                w.push(format!("{name}[{i}]: {v}"));
            }
        }
    }
    for (name, v) in [("f2", &r.f2), ("minimality", &r.minimality)] {
        if !v.is_pass() {
            w.push(format!("{name}: {v}"));
        }
    }
    w
}

fn report_item(r: &Report) -> serde_json::Value {
    json!({
        "key": r.key,
        "checks": {
            "membership": agg_verdicts(&r.membership),
            "f1": agg_verdicts(&r.f1),
            "f2": verdict_status(&r.f2),
            "minimality": verdict_status(&r.minimality),
        },
        "witnesses": report_witnesses(r),
        "timings": { "elapsed_ms": r.elapsed_ms as u64 },
    })
}

fn overall_status(reports: &[Report]) -> (&'static str, i32) {
    if reports.iter().all(Report::passed) {
        ("pass", 0)
    } else if reports.iter().any(|r| !r.passed() && !r.inconclusive()) {
        ("fail", 1)
    } else {
        ("inconclusive", 2)
    }
}

fn float_suffix(on: bool, r: &Rat) -> String {
    if on {
        match r.to_f64() {
            Some(f) => format!(" (≈ {f})"),
            None => String::new(),
        }
    } else {
        String::new()
    }
}

// ---------------------------------------------------------------------------
// verify.

fn cmd_verify(
    cli: &Cli,
    sel: Option<&str>,
    pair: Option<&str>,
    theta: Option<&str>,
    sector: Option<&str>,
    nmax: u32,
    input: Option<&std::path::Path>,
) -> Result<i32, String> {
    if !(1..=MAX_NMAX).contains(&nmax) {
        return Err(format!("nmax must be in 1..={MAX_NMAX}"));
    }
    let sector_filter = sector.map(parse_sector).transpose()?;
    let mut entries: Vec<CatalogEntry> = Vec::new();
    let mut digest_src = String::new();
    if let Some(path) = input {
        let text = std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
        let parsed = parse_input(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let p = parsed.pair.ok_or("input file has no [pair] section")?;
        if parsed.structures.is_empty() {
            return Err("input file has no [structure] section".into());
        }
        for st in parsed.structures {
            let sector_seg = match st.sector {
                Sector::None => String::new(),
                s => format!("{}/", s.label()),
            };
            let key = format!("{}/{}{}", p.name, sector_seg, theta_label(&p, &st.theta_h));
            entries.push(CatalogEntry {
                key,
                pair: p.clone(),
                structure: st,
            });
        }
        digest_src = text;
    } else {
        let all = catalog();
        for e in all {
            let keep = match (sel, pair) {
                (Some("all"), _) => true,
                (Some(k), _) => e.key == k || e.key.starts_with(&format!("{k}/")),
                (None, Some(p)) => {
                    e.pair.name == p
                        && sector_filter.map_or(true, |s| e.structure.sector == s)
                        && theta.map_or(true, |t| theta_label(&e.pair, &e.structure.theta_h) == t)
                }
                (None, None) => true,
            };
            if keep {
                digest_src.push_str(&serialize_entry(&e));
                entries.push(e);
            }
        }
    }
    if entries.is_empty() {
        return Err("no structures selected".into());
    }
    for e in &entries {
        if e.pair.h_rank() > MAX_RANK {
            return Err(format!("pair `{}` exceeds the rank guard ({MAX_RANK})", e.pair.name));
        }
    }
    let opts = VerifyOptions {
        n_max: nmax,
        ..VerifyOptions::default()
    };
    let reports: Vec<Report> = entries
        .iter()
        .map(|e| verify(&e.pair, &e.key, &e.structure, &opts))
        .collect();
    let (status, code) = overall_status(&reports);
    let text = match cli.format {
        Format::Json => {
            let doc = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "digest": sha_hex(&digest_src),
                "items": reports.iter().map(report_item).collect::<Vec<_>>(),
                "status": status,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        Format::Text => {
            let mut s = String::new();
            for r in &reports {
                let _ = writeln!(
                    s,
                    "{}: {} ({} triples, {} ms)",
                    r.key,
                    r.status(),
                    r.membership.len(),
                    r.elapsed_ms
                );
                for w in report_witnesses(r) {
                    let _ = writeln!(s, "  {w}");
                }
            }
            let _ = writeln!(s, "overall: {status}");
            s
        }
    };
    emit(cli, &text)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// catalog.

fn cmd_catalog(cli: &Cli, pair: Option<&str>, dump: bool) -> Result<i32, String> {
    let entries: Vec<CatalogEntry> = catalog()
        .into_iter()
        .filter(|e| pair.map_or(true, |p| e.pair.name == p))
        .collect();
    if entries.is_empty() {
        return Err("no catalog entries match".into());
    }
    let text = if dump {
        let mut s = String::new();
        for e in &entries {
            s.push_str(&serialize_entry(e));
            s.push('\n');
        }
        s
    } else {
        match cli.format {
            Format::Json => {
                let items: Vec<_> = entries
                    .iter()
                    .map(|e| {
                        json!({
                            "key": e.key,
                            "pair": e.pair.name,
                            "sector": e.structure.sector.label(),
                            "triples": e.structure.entries.len(),
                        })
                    })
                    .collect();
                let doc = json!({
                    "version": env!("CARGO_PKG_VERSION"),
                    "items": items,
                    "status": "pass",
                });
                format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
            }
            Format::Text => {
                let mut s = String::new();
                for e in &entries {
                    let _ = writeln!(
                        s,
                        "{}  pair={} sector={} triples={}",
                        e.key,
                        e.pair.name,
                        e.structure.sector.label(),
                        e.structure.entries.len()
                    );
                }
                s
            }
        }
    };
    emit(cli, &text)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// series.

const ORACLE_ORDER: i64 = 40;

fn poly_in_s<R: Coeff>(coeffs: &[R]) -> String {
    let mut parts = Vec::new();
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let m = match k {
            0 => format!("({c})"),
            1 => format!("({c})*S"),
            _ => format!("({c})*S^{k}"),
        };
        parts.push(m);
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

struct SeriesRun {
    text: String,
    oracle_ok: bool,
    notes: Vec<String>,
}

fn run_series<R: Coeff>(
    module: &ToyModule<R>,
    theta: &BTreeSet<usize>,
    sector: Sector,
    order: i64,
    q: &Rat,
    structures: &[CatalogEntry],
) -> Result<(SeriesRun, Vec<R>, Vec<R>), String> {
    let mut text = String::new();
    let rs = reduce(module, theta, sector, structures).map_err(|e| e.to_string())?;
    let _ = writeln!(text, "closed form: {rs}");
    let truncated = truncate(module, theta, sector, ORACLE_ORDER).map_err(|e| e.to_string())?;
    let oracle_ok = expand(&rs, ORACLE_ORDER) == truncated;
    let _ = writeln!(
        text,
        "expansion oracle: {} @{ORACLE_ORDER}",
        if oracle_ok { "match" } else { "MISMATCH" }
    );
    let _ = writeln!(text, "expansion to order {order}: {}", expand(&rs, order));
    let (qp, pp) = specialize(&rs, q, &module.pair.n_exp);
    let _ = writeln!(text, "Q(S) = {}", poly_in_s(&qp));
    let _ = writeln!(text, "P(S) = {}", poly_in_s(&pp));
    let notes = if oracle_ok {
        Vec::new()
    } else {
        vec!["expansion oracle mismatch".to_string()]
    };
    Ok((SeriesRun { text, oracle_ok, notes }, qp, pp))
}

fn cmd_series(
    cli: &Cli,
    input: &std::path::Path,
    theta: Option<&str>,
    sector: Option<&str>,
    order: i64,
    q: Option<&str>,
    eval_u: &[String],
) -> Result<i32, String> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(format!("order must be in 1..={MAX_ORDER}"));
    }
    let text_in = std::fs::read_to_string(input).map_err(|e| format!("reading {}: {e}", input.display()))?;
    let parsed = parse_input(&text_in).map_err(|e| format!("{}: {e}", input.display()))?;
    let pair = parsed.pair.ok_or("input file has no [pair] section")?;
    if pair.h_rank() > MAX_RANK {
        return Err(format!("pair `{}` exceeds the rank guard ({MAX_RANK})", pair.name));
    }
    let module = parsed.module.ok_or("input file has no [module] section")?;
    let theta_set = parse_theta_h(&pair, theta.unwrap_or("empty"))?;
    let sector = match sector {
        Some(s) => parse_sector(s)?,
        None if pair.c_h.is_some() => {
            return Err("this pair has a center form; pass --sector plus|zero|minus".into())
        }
        None => Sector::None,
    };
    let qv = match (q, &parsed.q) {
        (Some(s), _) => parse_rat(s)?,
        (None, Some(v)) => v.clone(),
        (None, None) => rat_int(3),
    };
    let structures = catalog();
    let (run, mut notes, key_base): (SeriesRun, Vec<String>, String) = match module {
        ModuleSpec::Exact(coeff) => {
            let m = ToyModule::new(pair.clone(), coeff).map_err(|e| e.to_string())?;
            let (mut run, qp, pp) = run_series(&m, &theta_set, sector, order, &qv, &structures)?;
            match eval_at_one(&qp, &pp, &EvalPoint::identity()) {
                Ok(r) => {
                    let _ = writeln!(run.text, "value at S=1: {r}");
                }
                Err(e) => {
                    let _ = writeln!(run.text, "value at S=1: error: {e}");
                }
            }
            let notes = run.notes.clone();
            (run, notes, format!("series/{}", pair.name))
        }
        ModuleSpec::Family(coeff) => {
            let m = ToyModule::new(pair.clone(), coeff).map_err(|e| e.to_string())?;
            let (mut run, qp, pp) = run_series(&m, &theta_set, sector, order, &qv, &structures)?;
            for u in eval_u {
                let u0 = parse_rat(u)?;
                match eval_family_at_one(&qp, &pp, &u0) {
                    Ok(FamilyOutcome::Result(r)) => {
                        let _ = writeln!(run.text, "value at S=1, u={u0}: {r}");
                    }
                    Ok(FamilyOutcome::OrderJump {
                        generic_order,
                        special_order,
                    }) => {
                        let _ = writeln!(
                            run.text,
                            "value at S=1, u={u0}: order jump (generic {generic_order}, special {special_order})"
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(run.text, "value at S=1, u={u0}: error: {e}");
                    }
                }
            }
            let notes = run.notes.clone();
            (run, notes, format!("series/{}", pair.name))
        }
    };
    let status = if run.oracle_ok { "pass" } else { "fail" };
    notes.dedup();
    let out_text = match cli.format {
        Format::Json => {
            let doc = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "digest": sha_hex(&text_in),
                "items": [{
                    "key": format!("{key_base}/{}/{}", theta_label(&pair, &theta_set), sector.label()),
                    "checks": { "oracle": status },
                    "witnesses": notes,
                    "timings": {},
                }],
                "status": status,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        Format::Text => run.text,
    };
    emit(cli, &out_text)?;
    Ok(if run.oracle_ok { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// period.

fn family_to_exact(coeff: &ExpPoly<RatFn>, u0: &Rat) -> Result<ExpPoly<Rat>, String> {
    let eval = |f: &RatFn| -> Result<Rat, String> {
        f.eval(u0)
            .ok_or_else(|| format!("coefficient denominator vanishes at u = {u0}"))
    };
    let mut terms = Vec::new();
    for t in &coeff.terms {
        let chi: Result<Vec<Rat>, _> = t.chi.iter().map(eval).collect();
        let mut poly = MultiPoly::zero(coeff.dim);
        for (e, c) in &t.poly.terms {
            poly.add_term(e.clone(), eval(c)?);
        }
        terms.push(ExpPolyTerm {
            lambda: eval(&t.lambda)?,
            chi: chi?,
            poly,
        });
    }
    ExpPoly::new(coeff.dim, terms).map_err(|e| e.to_string())
}

fn cmd_period(
    cli: &Cli,
    input: &std::path::Path,
    q: Option<&str>,
    order: i64,
    eval_u: &[String],
    skip_margin: bool,
) -> Result<i32, String> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(format!("order must be in 1..={MAX_ORDER}"));
    }
    let text_in = std::fs::read_to_string(input).map_err(|e| format!("reading {}: {e}", input.display()))?;
    let parsed = parse_input(&text_in).map_err(|e| format!("{}: {e}", input.display()))?;
    let pair = parsed.pair.ok_or("input file has no [pair] section")?;
    if pair.h_rank() > MAX_RANK {
        return Err(format!("pair `{}` exceeds the rank guard ({MAX_RANK})", pair.name));
    }
    let coeff = match parsed.module.ok_or("input file has no [module] section")? {
        ModuleSpec::Exact(c) => c,
        ModuleSpec::Family(c) => {
            let [u] = eval_u else {
                return Err("family module: pass exactly one --eval-u point".into());
            };
            family_to_exact(&c, &parse_rat(u)?)?
        }
    };
    let module = ToyModule::new(pair.clone(), coeff).map_err(|e| e.to_string())?;
    let qv = match (q, &parsed.q) {
        (Some(s), _) => parse_rat(s)?,
        (None, Some(v)) => v.clone(),
        (None, None) => rat_int(3),
    };
    let mut cfg = VolumeConfig::for_pair(&pair, qv);
    for (theta, v) in &parsed.constants {
        cfg.constants.insert(theta.iter().copied().collect(), v.clone());
    }
    let margin = temperedness_margin(&module, &cfg.q);
    let margin_ok = matches!(&margin, Some(m) if m > &rat_int(0));
    if !margin_ok && !skip_margin {
        let m = match &margin {
            Some(m) => format!("{m}"),
            None => "undefined".into(),
        };
        emit(cli, &format!("margin violated (margin = {m}); pass --skip-margin to evaluate anyway\n"))?;
        return Ok(2);
    }
    let structures = catalog();
    let bd = assemble_period(&module, &cfg, &structures).map_err(|e| e.to_string())?;

    let mut text = String::new();
    for (theta, sector, c, r) in &bd.summands {
        let tset: BTreeSet<usize> = theta.iter().copied().collect();
        let _ = writeln!(
            text,
            "summand Θ_H={} sector={}: C = {c}, value = {r}",
            theta_label(&pair, &tset),
            sector.label()
        );
    }
    match &bd.margin {
        Some(m) => {
            let _ = writeln!(text, "temperedness margin: {m}{}", float_suffix(cli.float, m));
        }
        None => {
            let _ = writeln!(text, "temperedness margin: undefined");
        }
    }
    let mut notes: Vec<String> = Vec::new();
    let (status, code) = match &bd.total {
        PeriodResult::Value(v) => {
            let _ = writeln!(text, "period: {v}{}", float_suffix(cli.float, v));
            let brute = brute_force_period(&module, &cfg, order).map_err(|e| e.to_string())?;
            let diff = (v - &brute).abs();
            let _ = writeln!(text, "brute force @N={order}: {brute}{}", float_suffix(cli.float, &brute));
            let _ = writeln!(text, "|difference|: {diff}{}", float_suffix(cli.float, &diff));
            ("pass", 0)
        }
        PeriodResult::Pole { ord_p, ord_q } => {
            let _ = writeln!(text, "period: pole at S=1 (denominator order {ord_p}, numerator order {ord_q})");
            notes.push(format!("pole at S=1 (denominator order {ord_p}, numerator order {ord_q})"));
            ("pole", 1)
        }
    };
    let out_text = match cli.format {
        Format::Json => {
            let doc = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "digest": sha_hex(&text_in),
                "items": [{
                    "key": format!("period/{}", pair.name),
                    "checks": { "period": status },
                    "witnesses": notes,
                    "timings": {},
                }],
                "status": status,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        Format::Text => text,
    };
    emit(cli, &out_text)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
