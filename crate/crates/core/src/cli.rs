//! Command-line front end.
//!
//! Exit codes: `0` success, `1` bad flags or configuration, `2` singular `C`,
//! `3` eigensolver failure, `4` a verification or spectrum check failed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, BasePotential, BoundState, Direction};
use crate::error::Error;
use crate::factorize::{self, AffineScale, CScale, ChainOutcome, ChainStep};
use crate::grid::{self, Grid, GridFunction};
use crate::spectral::{self, FdHamiltonian};
use crate::verify::{self, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SINGULAR: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "isospec",
    version,
    about = "Isospectral deformations of 1D Schrödinger potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the base potentials.
    Catalog {
        #[arg(long)]
        json: bool,
        /// Show one entry in detail.
        #[arg(long)]
        potential: Option<String>,
    },
    /// Write V, the deformed potential and optional f and state columns.
    Deform(DeformArgs),
    /// Compare the FD spectrum of the deformed potential with the prediction.
    Spectrum(SpectrumArgs),
    /// Write deformed (or base) eigenstates and their derivatives.
    State(StateArgs),
    /// Apply a ladder operator, composed with the deformation when `C` is given.
    Ladder(LadderArgs),
    /// Evaluate a list or range of C values, one CSV per value plus index.json.
    Sweep(SweepArgs),
    /// Run the numerical property suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleFlag {
    /// `C` relative to a unit-norm seed; forbidden interval `[−1, 0]`.
    Normalized,
    /// The unnormalized closed-form convention of each family.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionFlag {
    Up,
    Down,
}

/// Options shared by every deformation command. All are optional here so a
/// `--config` file can supply them; flags win over the file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    /// oscillator | morse | well | cprs
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long = "A", allow_negative_numbers = true)]
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[arg(long = "B", allow_negative_numbers = true)]
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Well width (default π).
    #[arg(long = "L", allow_negative_numbers = true)]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Level of the seed state.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "C", allow_negative_numbers = true)]
    #[serde(rename = "C")]
    pub c: Option<f64>,
    /// Convention for C values (default normalized).
    #[arg(long, value_enum)]
    pub c_scale: Option<ScaleFlag>,
    /// Chained deformation `level:C,level:C,...`.
    #[arg(long, allow_hyphen_values = true)]
    pub chain: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Number of tracked levels (default 5).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Spectrum comparison tolerance (default 1e-2).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
struct Common {
    #[command(flatten)]
    flags: ConfigFile,
    /// JSON file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DeformArgs {
    #[command(flatten)]
    common: Common,
    /// Add `psi_k` columns for these levels.
    #[arg(long, value_delimiter = ',')]
    states: Vec<usize>,
    /// Add the deformation function column.
    #[arg(long)]
    with_f: bool,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct StateArgs {
    #[command(flatten)]
    common: Common,
    /// Levels to write (default all tracked).
    #[arg(long, value_delimiter = ',')]
    states: Vec<usize>,
}

#[derive(Debug, Args)]
struct LadderArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "up")]
    direction: DirectionFlag,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated C values.
    #[arg(long = "C-list", allow_hyphen_values = true, value_delimiter = ',')]
    c_list: Vec<f64>,
    /// Linear range `start:stop:count`, endpoints included.
    #[arg(long = "C-range", allow_hyphen_values = true)]
    c_range: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Evaluate sequentially.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Restrict to these check groups.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Refinement factor for convergence checks; 1 disables them.
    #[arg(long, default_value_t = 2)]
    grid_refine: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn code_for(e: &Error) -> i32 {
    match e {
        Error::SingularC { .. } => EXIT_SINGULAR,
        Error::NoConvergence(_) => EXIT_SOLVER,
        Error::ChainStep { source, .. } => code_for(source),
        _ => EXIT_USAGE,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: code_for(&e),
            message: e.to_string(),
        }
    }
}

/// Validated configuration of a deformation command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub potential: BasePotential,
    pub steps: Vec<ChainStep>,
    pub scale: ScaleFlag,
    pub grid: Grid,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub levels: usize,
    pub tol: f64,
}

impl ConfigFile {
    /// Fields set in `self` win over `base`.
    fn over(self, base: ConfigFile) -> ConfigFile {
        ConfigFile {
            potential: self.potential.or(base.potential),
            a: self.a.or(base.a),
            b: self.b.or(base.b),
            alpha: self.alpha.or(base.alpha),
            l: self.l.or(base.l),
            n: self.n.or(base.n),
            c: self.c.or(base.c),
            c_scale: self.c_scale.or(base.c_scale),
            chain: self.chain.or(base.chain),
            x_min: self.x_min.or(base.x_min),
            x_max: self.x_max.or(base.x_max),
            points: self.points.or(base.points),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            levels: self.levels.or(base.levels),
            tol: self.tol.or(base.tol),
        }
    }
}

impl Common {
    fn merged(&self) -> CliResult<ConfigFile> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        Ok(self.flags.clone().over(file))
    }
}

fn parse_potential(cfg: &ConfigFile) -> CliResult<BasePotential> {
    let name = cfg
        .potential
        .as_deref()
        .ok_or_else(|| Failure::usage("--potential is required"))?;
    Ok(match name {
        "oscillator" => BasePotential::Oscillator,
        "morse" => BasePotential::morse(cfg.a.unwrap_or(2.0), cfg.b.unwrap_or(1.0), cfg.alpha.unwrap_or(1.0))?,
        "well" => BasePotential::square_well(cfg.l.unwrap_or(std::f64::consts::PI))?,
        "cprs" => BasePotential::Cprs,
        other => {
            return Err(Failure::usage(format!(
                "unknown potential '{other}'; expected oscillator, morse, well or cprs"
            )))
        }
    })
}

fn parse_chain(text: &str) -> CliResult<Vec<(usize, f64)>> {
    text.split(',')
        .map(|item| {
            let (level, c) = item
                .split_once(':')
                .ok_or_else(|| Failure::usage(format!("chain step '{item}' is not level:C")))?;
            let level = level
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("bad level in chain step '{item}'")))?;
            let c = c
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("bad C in chain step '{item}'")))?;
            Ok((level, c))
        })
        .collect()
}

fn step_scale(p: &BasePotential, scale: ScaleFlag, index: usize) -> CScale {
    match (scale, index) {
        (ScaleFlag::Normalized, _) => CScale::Normalized,
        (ScaleFlag::Paper, 0) => CScale::paper_for(p),
        (ScaleFlag::Paper, _) => CScale::PaperChain,
    }
}

impl RunConfig {
    fn resolve(cfg: ConfigFile, require_c: bool) -> CliResult<RunConfig> {
        let potential = parse_potential(&cfg)?;
        let scale = cfg.c_scale.unwrap_or(ScaleFlag::Normalized);
        let raw_steps = match (&cfg.chain, cfg.c) {
            (Some(_), Some(_)) => return Err(Failure::usage("use either --chain or --C, not both")),
            (Some(chain), None) => parse_chain(chain)?,
            (None, Some(c)) => vec![(cfg.n.unwrap_or(0), c)],
            (None, None) if require_c => return Err(Failure::usage("--C (or --chain) is required")),
            (None, None) => Vec::new(),
        };
        let steps = raw_steps
            .into_iter()
            .enumerate()
            .map(|(i, (level, c))| ChainStep {
                level,
                c,
                scale: step_scale(&potential, scale, i),
            })
            .collect();
        let default = potential.default_grid();
        let grid = Grid::new(
            cfg.x_min.unwrap_or(default.x_min()),
            cfg.x_max.unwrap_or(default.x_max()),
            cfg.points.unwrap_or(default.len()),
        )?;
        let tol = cfg.tol.unwrap_or(verify::SPECTRUM_TOLERANCE);
        if tol.is_nan() || tol <= 0.0 {
            return Err(Failure::usage("--tol must be positive"));
        }
        let levels = cfg.levels.unwrap_or(5);
        if levels == 0 || levels > spectral::DEFAULT_EIGEN_CAP {
            return Err(Failure::usage(format!(
                "--levels must be in 1..={}",
                spectral::DEFAULT_EIGEN_CAP
            )));
        }
        Ok(RunConfig {
            potential,
            steps,
            scale,
            grid,
            out: cfg.out,
            format: cfg.format.unwrap_or(Format::Csv),
            levels,
            tol,
        })
    }

    fn tracked(&self) -> usize {
        let needed = self.steps.iter().map(|s| s.level + 1).max().unwrap_or(0);
        self.levels.max(needed)
    }

    /// Rejects singular `C` before any work, reporting both scales.
    fn check_validity(&self) -> CliResult<()> {
        // later chain steps depend on earlier ones; deform_chain reports them
        let Some(first) = self.steps.first() else {
            return Ok(());
        };
        let map = first
            .scale
            .affine(&self.potential, first.level)
            .map_err(Failure::from)?;
        let c_norm = map.to_normalized(first.c);
        if c_norm.is_finite() && !(-1.0..=0.0).contains(&c_norm) {
            return Ok(());
        }
        Err(singular_failure(first.c, first.scale, map, 0))
    }

    fn run_chain(&self) -> CliResult<ChainOutcome> {
        self.check_validity()?;
        factorize::deform_chain(&self.potential, &self.grid, &self.steps, self.tracked()).map_err(|e| match &e {
            Error::ChainStep { index, source } if *index > 0 && matches!(**source, Error::SingularC { .. }) => {
                let step = self.steps[*index];
                let Error::SingularC { c: c_norm, .. } = **source else {
                    unreachable!()
                };
                let map = match step.scale {
                    // later steps only accept the chain scale, whose slope is fixed
                    CScale::PaperChain => {
                        let slope = std::f64::consts::PI.sqrt() / 2.0;
                        AffineScale {
                            slope,
                            offset: step.c - slope * c_norm,
                        }
                    }
                    _ => AffineScale::IDENTITY,
                };
                singular_failure(step.c, step.scale, map, *index)
            }
            _ => Failure::from(e),
        })
    }
}

fn singular_failure(c: f64, scale: CScale, map: AffineScale, index: usize) -> Failure {
    let (lo, hi) = map.forbidden();
    let message = if scale.is_paper() {
        format!(
            "step {index}: C = {c} makes the denominator vanish; forbidden interval is [{lo}, {hi}] ({} scale) \
             = [-1, 0] (normalized scale)",
            scale_name(scale)
        )
    } else {
        format!("step {index}: C = {c} makes the denominator vanish; forbidden interval is [-1, 0] (normalized scale)")
    };
    Failure {
        code: EXIT_SINGULAR,
        message,
    }
}

fn scale_name(scale: CScale) -> &'static str {
    match scale {
        CScale::Normalized => "normalized",
        CScale::PaperMorse => "morse paper",
        CScale::PaperWell => "well paper",
        CScale::PaperCprs => "cprs paper",
        CScale::PaperOscillator => "oscillator paper",
        CScale::PaperChain => "chain paper",
    }
}

// ---------------------------------------------------------------------------
// output

/// Columns written as CSV (header + rows) or JSON.
struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    fn new() -> Self {
        Table {
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.names.push(name.into());
        self.columns.push(values);
    }

    /// Header row, comma separator, shortest round-trip reals, LF endings.
    fn to_csv(&self) -> String {
        let rows = self.columns.first().map_or(0, Vec::len);
        let mut s = self.names.join(",");
        s.push('\n');
        for r in 0..rows {
            for (j, col) in self.columns.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&format!("{:?}", col[r]));
            }
            s.push('\n');
        }
        s
    }

    fn to_map(&self) -> BTreeMap<String, Vec<f64>> {
        self.names.iter().cloned().zip(self.columns.iter().cloned()).collect()
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
        }
        // a closed downstream pipe is not an error
        None => match stdout.write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(Failure::usage(format!("cannot write output: {e}")))
            }
            _ => Ok(()),
        },
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct StepJson {
    level: usize,
    c: f64,
    c_scale: &'static str,
    c_normalized: f64,
}

#[derive(Serialize)]
struct DeformJson {
    potential: &'static str,
    parameters: BTreeMap<String, f64>,
    steps: Vec<StepJson>,
    total_shift: f64,
    columns: BTreeMap<String, Vec<f64>>,
}

fn steps_json(cfg: &RunConfig, outcome: &ChainOutcome) -> Vec<StepJson> {
    cfg.steps
        .iter()
        .zip(&outcome.steps)
        .map(|(s, d)| StepJson {
            level: s.level,
            c: s.c,
            c_scale: scale_name(s.scale),
            c_normalized: d.c_normalized(),
        })
        .collect()
}

fn deform_table(outcome: &ChainOutcome, with_f: bool, states: &[usize]) -> CliResult<Table> {
    let grid = outcome.potential.grid();
    let mut t = Table::new();
    t.push("x", grid.points().collect());
    t.push("V", outcome.reference.values().to_vec());
    t.push("Vtilde", outcome.potential.values().to_vec());
    if with_f {
        let f = outcome
            .steps
            .last()
            .map(|d| d.deformation_function())
            .unwrap_or_else(|| GridFunction::zeros(*grid));
        t.push("f", f.into_values());
    }
    for &k in states {
        let s = find_state(outcome, k)?;
        t.push(format!("psi_{k}"), s.wavefunction().values().to_vec());
    }
    Ok(t)
}

fn find_state(outcome: &ChainOutcome, k: usize) -> CliResult<&factorize::DeformedState> {
    outcome
        .states
        .iter()
        .find(|s| s.level() == k)
        .ok_or_else(|| Failure::usage(format!("level {k} is not tracked; raise --levels")))
}

// ---------------------------------------------------------------------------
// commands

fn cmd_catalog(json: bool, potential: Option<String>, stdout: &mut dyn Write) -> CliResult<i32> {
    let entries = catalog::catalog_entries();
    let selected: Vec<_> = match &potential {
        Some(name) => {
            let e: Vec<_> = entries.into_iter().filter(|e| e.name == name).collect();
            if e.is_empty() {
                return Err(Failure::usage(format!("unknown potential '{name}'")));
            }
            e
        }
        None => entries,
    };
    let text = if json {
        to_json(&selected)
    } else if potential.is_some() {
        let e = &selected[0];
        format!(
            "name:         {}\npotential:    {}\nparameters:   {}\nenergies:     {}\nbound states: {}\ndefault grid: [{}, {}] x {}\nladder:       {}\nC scale:      {}\n",
            e.name,
            e.potential,
            if e.parameters.is_empty() { "none".to_string() } else { e.parameters.join(", ") },
            e.energy_formula,
            e.bound_count,
            e.default_grid[0],
            e.default_grid[1],
            e.default_grid[2],
            e.ladder,
            e.paper_scale,
        )
    } else {
        let mut s = String::new();
        for e in &selected {
            s.push_str(&format!(
                "{:<11} {:<58} params: {:<10} bound: {:<32} ladder: {}\n",
                e.name,
                e.potential,
                if e.parameters.is_empty() {
                    "-".to_string()
                } else {
                    e.parameters.join(",")
                },
                e.bound_count,
                e.ladder
            ));
        }
        s
    };
    emit(&None, &text, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_deform(args: DeformArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let cfg = RunConfig::resolve(args.common.merged()?, true)?;
    let mut cfg = cfg;
    if let Some(&m) = args.states.iter().max() {
        cfg.levels = cfg.levels.max(m + 1);
    }
    let outcome = cfg.run_chain()?;
    let table = deform_table(&outcome, args.with_f, &args.states)?;
    let text = match cfg.format {
        Format::Csv => table.to_csv(),
        Format::Json => to_json(&DeformJson {
            potential: cfg.potential.name(),
            parameters: cfg.potential.parameters(),
            steps: steps_json(&cfg, &outcome),
            total_shift: outcome.total_shift,
            columns: table.to_map(),
        }),
    };
    emit(&cfg.out, &text, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_spectrum(args: SpectrumArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let cfg = RunConfig::resolve(args.common.merged()?, true)?;
    let outcome = cfg.run_chain()?;
    let mut analytic: Vec<f64> = outcome.states.iter().map(|s| s.energy()).collect();
    analytic.sort_by(f64::total_cmp);
    analytic.truncate(cfg.levels);
    let threshold = cfg.potential.continuum_threshold() - outcome.total_shift;
    let h = FdHamiltonian::from_values(cfg.grid, outcome.potential.values())?;
    let mut params = cfg.potential.parameters();
    for (i, (s, d)) in cfg.steps.iter().zip(&outcome.steps).enumerate() {
        params.insert(format!("step{i}.level"), s.level as f64);
        params.insert(format!("step{i}.C"), s.c);
        params.insert(format!("step{i}.C_normalized"), d.c_normalized());
    }
    let report = spectral::compare_spectra(cfg.potential.name(), params, &analytic, &h, threshold, cfg.tol)?;
    let pass = report.pass;
    emit(&cfg.out, &to_json(&report), stdout)?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[derive(Serialize)]
struct StateJson {
    level: usize,
    energy: f64,
    missing: bool,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
}

fn cmd_state(args: StateArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let mut cfg = RunConfig::resolve(args.common.merged()?, false)?;
    if let Some(&m) = args.states.iter().max() {
        cfg.levels = cfg.levels.max(m + 1);
    }
    let outcome = cfg.run_chain()?;
    let levels: Vec<usize> = if args.states.is_empty() {
        outcome.states.iter().map(|s| s.level()).collect()
    } else {
        args.states.clone()
    };
    let text = match cfg.format {
        Format::Csv => {
            let mut t = Table::new();
            t.push("x", cfg.grid.points().collect());
            for &k in &levels {
                let s = find_state(&outcome, k)?;
                t.push(format!("psi_{k}"), s.wavefunction().values().to_vec());
                t.push(format!("dpsi_{k}"), s.derivative().values().to_vec());
            }
            t.to_csv()
        }
        Format::Json => {
            let mut states = Vec::new();
            for &k in &levels {
                let s = find_state(&outcome, k)?;
                states.push(StateJson {
                    level: k,
                    energy: s.energy(),
                    missing: s.is_missing_state(),
                    psi: s.wavefunction().values().to_vec(),
                    dpsi: s.derivative().values().to_vec(),
                });
            }
            let mut doc = BTreeMap::new();
            doc.insert(
                "x",
                serde_json::to_value(cfg.grid.points().collect::<Vec<f64>>()).expect("json"),
            );
            doc.insert("states", serde_json::to_value(states).expect("json"));
            to_json(&doc)
        }
    };
    emit(&cfg.out, &text, stdout)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct LadderJson {
    potential: &'static str,
    k: usize,
    direction: Direction,
    target_level: usize,
    cosine: f64,
    proportionality: f64,
    x: Vec<f64>,
    image: Vec<f64>,
    target: Vec<f64>,
}

fn cmd_ladder(args: LadderArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let mut cfg = RunConfig::resolve(args.common.merged()?, false)?;
    if cfg.steps.len() > 1 {
        return Err(Failure::usage("ladder supports a single deformation step"));
    }
    let direction = match args.direction {
        DirectionFlag::Up => Direction::Up,
        DirectionFlag::Down => Direction::Down,
    };
    let k = args.k;
    let target_level = match direction {
        Direction::Up => k + 1,
        Direction::Down => k
            .checked_sub(1)
            .ok_or_else(|| Failure::from(Error::GroundStateAnnihilated(cfg.potential.name().into())))?,
    };
    cfg.levels = cfg.levels.max(k.max(target_level) + 1);
    let ladder = cfg.potential.ladder();
    let (image, target) = if cfg.steps.is_empty() {
        let s = cfg.potential.eigenstate(k, &cfg.grid)?;
        let t = cfg.potential.eigenstate(target_level, &cfg.grid)?;
        (ladder.apply(&s, direction)?, t.wavefunction().clone())
    } else {
        let outcome = cfg.run_chain()?;
        let d = &outcome.steps[0];
        let s = find_state(&outcome, k)?;
        let t = find_state(&outcome, target_level)?;
        (d.composite_ladder(&ladder, s, direction)?, t.wavefunction().clone())
    };
    let cosine = grid::abs_cosine(&image, &target)?;
    let ratio = catalog::proportionality(&image, &target)?;
    let text = match cfg.format {
        Format::Csv => {
            let mut t = Table::new();
            t.push("x", cfg.grid.points().collect());
            t.push("image", image.values().to_vec());
            t.push("target", target.values().to_vec());
            t.to_csv()
        }
        Format::Json => to_json(&LadderJson {
            potential: cfg.potential.name(),
            k,
            direction,
            target_level,
            cosine,
            proportionality: ratio,
            x: cfg.grid.points().collect(),
            image: image.into_values(),
            target: target.into_values(),
        }),
    };
    emit(&cfg.out, &text, stdout)?;
    let _ = writeln!(stderr, "cosine = {cosine:?}, proportionality = {ratio:?}");
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize)]
struct SweepEntry {
    index: usize,
    c: f64,
    c_scale: &'static str,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    forbidden: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    c_normalized: Option<f64>,
    /// `max |Ṽ − (V − E_n)|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    sup_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_location: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

#[derive(Serialize)]
struct SweepIndex {
    potential: &'static str,
    parameters: BTreeMap<String, f64>,
    level: usize,
    entries: Vec<SweepEntry>,
}

fn parse_range(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::usage("--C-range must be start:stop:count"));
    }
    let bad = || Failure::usage(format!("invalid --C-range '{text}'"));
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    })
}

fn sweep_one(
    cfg: &RunConfig,
    level: usize,
    scale: CScale,
    map: AffineScale,
    index: usize,
    c: f64,
    out_dir: &Path,
) -> CliResult<SweepEntry> {
    let mut entry = SweepEntry {
        index,
        c,
        c_scale: scale_name(scale),
        status: "ok",
        file: None,
        forbidden: map.forbidden(),
        c_normalized: None,
        sup_deviation: None,
        min_location: None,
        min_value: None,
        message: None,
    };
    let mut one = cfg.clone();
    one.steps = vec![ChainStep { level, c, scale }];
    let outcome = match one.run_chain() {
        Ok(o) => o,
        Err(f) if f.code == EXIT_SINGULAR => {
            entry.status = "singular";
            entry.message = Some(f.message);
            return Ok(entry);
        }
        Err(f) => return Err(f),
    };
    let vt = &outcome.potential;
    let (imin, vmin) = vt
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    entry.c_normalized = Some(outcome.steps[0].c_normalized());
    entry.sup_deviation = Some(vt.max_abs_diff(&outcome.reference)?);
    entry.min_location = Some(cfg.grid.point(imin));
    entry.min_value = Some(vmin);
    let name = format!("c_{index:03}.csv");
    let table = deform_table(&outcome, false, &[])?;
    let path = out_dir.join(&name);
    fs::write(&path, table.to_csv()).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    entry.file = Some(name);
    Ok(entry)
}

fn cmd_sweep(args: SweepArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let merged = args.common.merged()?;
    if merged.chain.is_some() || merged.c.is_some() {
        return Err(Failure::usage("sweep takes --C-list or --C-range, not --C or --chain"));
    }
    let cfg = RunConfig::resolve(merged.clone(), false)?;
    let mut cs = args.c_list.clone();
    if let Some(r) = &args.c_range {
        cs.extend(parse_range(r)?);
    }
    if cs.is_empty() {
        return Err(Failure::usage("sweep needs --C-list or --C-range"));
    }
    let level = merged.n.unwrap_or(0);
    let scale = step_scale(&cfg.potential, cfg.scale, 0);
    let map = scale.affine(&cfg.potential, level)?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let run = |(i, &c): (usize, &f64)| sweep_one(&cfg, level, scale, map, i, c, &args.out_dir);
    let entries: CliResult<Vec<SweepEntry>> = if args.serial {
        cs.iter().enumerate().map(run).collect()
    } else {
        cs.par_iter().enumerate().map(run).collect()
    };
    let index = SweepIndex {
        potential: cfg.potential.name(),
        parameters: cfg.potential.parameters(),
        level,
        entries: entries?,
    };
    let path = args.out_dir.join("index.json");
    fs::write(&path, to_json(&index)).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    let singular = index.entries.iter().filter(|e| e.status == "singular").count();
    let _ = writeln!(
        stdout,
        "{} values, {} singular, index at {}",
        index.entries.len(),
        singular,
        path.display()
    );
    Ok(EXIT_OK)
}

fn cmd_verify(args: VerifyArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let report = verify::run_suite(&VerifyOptions {
        only: args.only,
        grid_refine: args.grid_refine,
    })?;
    emit(&args.out, &to_json(&report), stdout)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Catalog { json, potential } => cmd_catalog(json, potential, stdout),
        Command::Deform(a) => cmd_deform(a, stdout),
        Command::Spectrum(a) => cmd_spectrum(a, stdout),
        Command::State(a) => cmd_state(a, stdout),
        Command::Ladder(a) => cmd_ladder(a, stdout, stderr),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
