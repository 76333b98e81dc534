//! `qpolar` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a computed invariant or verification
//! check fails (or the channel is unsuitable for the command), 2 on usage,
//! parse and resource-limit errors.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::btpm::{self, Btpm, BtpmVerdict, DEFAULT_SEED};
use crate::channels;
use crate::coherent::{self, DEFAULT_GRID};
use crate::oracle::{self, OracleError, MAX_ORACLE_N};
use crate::polarize::{self, ConstructionMode, PolarizationReport, PolarizeError, DEFAULT_MU};
use crate::quantum::{c, ComplexMatrix, DensityOperator, KrausSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Oracle and closed form must agree to this in the `theorem7` suite.
pub const AGREEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("channel spec: {0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Refused(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Refused(_) | CliError::Failed(_) => EXIT_FAILED,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qpolar",
    version,
    about = "Quantum channel polarization toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the BTPM and report the symmetry class.
    Classify(CommonArgs),
    /// Coherent information at a diagonal input, or a sweep over q.
    Coherent(CoherentArgs),
    /// Coordinate-channel MSLCI for every index of a length-N transform.
    Polarize(PolarizeArgs),
    /// Oracle checks against the closed forms.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Auto,
    Quantized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Single-letter sweep of the base channel peaks at q = ½.
    Theorem4,
    /// Oracle check of the combined-channel symmetry.
    Theorem5,
    /// Oracle coordinate coherent information matches the closed form.
    Theorem7,
    All,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Channel spec (JSON).
    #[arg(long)]
    pub input: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Seed for the randomized diagonalization weights.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CoherentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Weight of the first input basis state.
    #[arg(long, conflicts_with = "sweep")]
    pub q: Option<f64>,
    /// Sweep q over this many grid points (odd, ≥ 3).
    #[arg(long)]
    pub sweep: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PolarizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Block length (power of two).
    #[arg(long = "N")]
    pub n: usize,
    /// Thresholds δ for the fraction of indices with I ≥ 1 − δ.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1")]
    pub deltas: Vec<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: ModeArg,
    /// Output alphabet size for quantized construction.
    #[arg(long, default_value_t = DEFAULT_MU)]
    pub mu: usize,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "N", default_value_t = 2)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Grid size for the theorem4 sweep.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub sweep: usize,
}

/// On-disk channel description. Complex entries are `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelSpecFile {
    /// `{√p·I, √(1−p)·X}`, computational basis.
    Bitflip { p: f64 },
    /// `{√p·I, √(1−p)·Z}`, symmetric in the `|±⟩` basis.
    Phaseflip { p: f64 },
    /// Realized by the Kraus set built from the matrix.
    Btpm { matrix: Vec<Vec<f64>> },
    Kraus {
        operators: Vec<Vec<Vec<[f64; 2]>>>,
        /// Input basis as columns; computational when absent.
        #[serde(skip_serializing_if = "Option::is_none")]
        basis: Option<Vec<Vec<[f64; 2]>>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Bitflip,
    Phaseflip,
    Btpm,
    Kraus,
}

// Flat on purpose: serde_json keeps line/column positions for type errors
// in plain structs, which it cannot do for internally tagged enums.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: Kind,
    p: Option<f64>,
    matrix: Option<Vec<Vec<f64>>>,
    operators: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    basis: Option<Vec<Vec<[f64; 2]>>>,
}

/// A loaded channel: Kraus operators, the input basis its BTPM is taken in,
/// and the BTPM itself when the spec gave one.
#[derive(Debug, Clone)]
pub struct Channel {
    pub kraus: KrausSet,
    pub basis: ComplexMatrix,
    pub given_btpm: Option<Btpm>,
}

fn complex_matrix(rows: &[Vec<[f64; 2]>], what: &str) -> Result<ComplexMatrix, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(CliError::Parse(format!("{what}: empty matrix")));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
        return Err(CliError::Parse(format!(
            "{what}: row {r} has {} entries, expected {ncols}",
            rows[r].len()
        )));
    }
    Ok(ComplexMatrix::from_fn(nrows, ncols, |r, col| {
        let [re, im] = rows[r][col];
        c(re, im)
    }))
}

impl ChannelSpecFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: RawSpec =
            serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        let missing = |field: &str| {
            CliError::Parse(format!("missing field `{field}` for kind {:?}", raw.kind))
        };
        let unexpected = |field: &str, present: bool| {
            if present {
                Err(CliError::Parse(format!(
                    "field `{field}` is not used by kind {:?}",
                    raw.kind
                )))
            } else {
                Ok(())
            }
        };
        match raw.kind {
            Kind::Bitflip | Kind::Phaseflip => {
                unexpected("matrix", raw.matrix.is_some())?;
                unexpected("operators", raw.operators.is_some())?;
                unexpected("basis", raw.basis.is_some())?;
                let p = raw.p.ok_or_else(|| missing("p"))?;
                Ok(if matches!(raw.kind, Kind::Bitflip) {
                    Self::Bitflip { p }
                } else {
                    Self::Phaseflip { p }
                })
            }
            Kind::Btpm => {
                unexpected("p", raw.p.is_some())?;
                unexpected("operators", raw.operators.is_some())?;
                unexpected("basis", raw.basis.is_some())?;
                Ok(Self::Btpm {
                    matrix: raw.matrix.clone().ok_or_else(|| missing("matrix"))?,
                })
            }
            Kind::Kraus => {
                unexpected("p", raw.p.is_some())?;
                unexpected("matrix", raw.matrix.is_some())?;
                Ok(Self::Kraus {
                    operators: raw.operators.clone().ok_or_else(|| missing("operators"))?,
                    basis: raw.basis.clone(),
                })
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<Channel, CliError> {
        let parse =
            |e: &dyn std::fmt::Display, field: &str| CliError::Parse(format!("{field}: {e}"));
        match self {
            ChannelSpecFile::Bitflip { p } => Ok(Channel {
                kraus: channels::bit_flip(*p).map_err(|e| parse(&e, "p"))?,
                basis: channels::computational_basis(2),
                given_btpm: None,
            }),
            ChannelSpecFile::Phaseflip { p } => Ok(Channel {
                kraus: channels::phase_flip(*p).map_err(|e| parse(&e, "p"))?,
                basis: channels::x_basis(),
                given_btpm: None,
            }),
            ChannelSpecFile::Btpm { matrix } => {
                let b = Btpm::new(matrix.clone()).map_err(|e| parse(&e, "matrix"))?;
                Ok(Channel {
                    kraus: btpm::kraus_from_btpm(&b),
                    basis: channels::computational_basis(b.input_dim()),
                    given_btpm: Some(b),
                })
            }
            ChannelSpecFile::Kraus { operators, basis } => {
                let ops = operators
                    .iter()
                    .enumerate()
                    .map(|(k, m)| complex_matrix(m, &format!("operators[{k}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let kraus = KrausSet::new(ops).map_err(|e| parse(&e, "operators"))?;
                let basis = match basis {
                    Some(b) => complex_matrix(b, "basis")?,
                    None => channels::computational_basis(kraus.input_dim()),
                };
                Ok(Channel {
                    kraus,
                    basis,
                    given_btpm: None,
                })
            }
        }
    }
}

impl Channel {
    pub fn btpm(&self, seed: u64) -> Result<BtpmVerdict, CliError> {
        if let Some(b) = &self.given_btpm {
            return Ok(BtpmVerdict::Found(btpm::ExtractedBtpm {
                btpm: b.clone(),
                input_basis: self.basis.clone(),
                output_basis: channels::computational_basis(b.output_dim()),
            }));
        }
        btpm::extract_btpm(&self.kraus, &self.basis, seed)
            .map_err(|e| CliError::Parse(e.to_string()))
    }

    fn require_btpm(&self, seed: u64) -> Result<Btpm, CliError> {
        match self.btpm(seed)? {
            BtpmVerdict::Found(e) => Ok(e.btpm),
            BtpmVerdict::NoBtpm { max_commutator } => Err(CliError::Refused(format!(
                "channel has no BTPM: basis images fail to commute (max commutator {max_commutator:e})"
            ))),
        }
    }
}

/// 17 significant digits, positional notation; parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let prec = (16 - exp).max(0) as usize;
    format!("{x:.prec$}")
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn emit(common: &CommonArgs, body: &str) -> Result<(), CliError> {
    match &common.output {
        Some(path) => fs::write(path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
pub struct ClassifyReport {
    pub has_btpm: bool,
    pub max_commutator: Option<f64>,
    pub btpm: Option<Vec<Vec<f64>>>,
    pub symmetry_class: Option<btpm::SymmetryClass>,
    pub canonical: Option<btpm::QqscCanonicalForm>,
    pub seed: u64,
    pub commutation_tolerance: f64,
}

pub fn classify_report(channel: &Channel, seed: u64) -> Result<ClassifyReport, CliError> {
    Ok(match channel.btpm(seed)? {
        BtpmVerdict::NoBtpm { max_commutator } => ClassifyReport {
            has_btpm: false,
            max_commutator: Some(max_commutator),
            btpm: None,
            symmetry_class: None,
            canonical: None,
            seed,
            commutation_tolerance: btpm::COMMUTATION_TOL,
        },
        BtpmVerdict::Found(e) => {
            let class = btpm::classify(&e.btpm);
            let canonical = (e.btpm.input_dim() == 2 && class.is_quasi_symmetric())
                .then(|| btpm::qqsc_canonical_form(&e.btpm).ok())
                .flatten();
            ClassifyReport {
                has_btpm: true,
                max_commutator: None,
                btpm: Some(e.btpm.rows().to_vec()),
                symmetry_class: Some(class),
                canonical,
                seed,
                commutation_tolerance: btpm::COMMUTATION_TOL,
            }
        }
    })
}

fn cmd_classify(args: &CommonArgs) -> Result<bool, CliError> {
    let channel = ChannelSpecFile::load(&args.input)?.resolve()?;
    let report = classify_report(&channel, args.seed)?;
    let body = match args.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let rows = report.btpm.iter().flat_map(|m| {
                m.iter().enumerate().flat_map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(move |(k, p)| vec![i.to_string(), k.to_string(), format_f64(*p)])
                })
            });
            csv(
                &["input", "output", "probability"],
                rows.collect::<Vec<_>>(),
            )
        }
    };
    emit(args, &body)?;
    Ok(true)
}

fn cmd_coherent(args: &CoherentArgs) -> Result<bool, CliError> {
    let channel = ChannelSpecFile::load(&args.common.input)?.resolve()?;
    if channel.kraus.input_dim() != 2 {
        return Err(CliError::Refused(format!(
            "coherent needs a two-dimensional input, got {}",
            channel.kraus.input_dim()
        )));
    }
    let failed = |e: coherent::CoherentError| CliError::Failed(e.to_string());
    let body = match (args.q, args.sweep) {
        (Some(q), None) => {
            if !(0.0..=1.0).contains(&q) {
                return Err(CliError::Usage(format!("--q {q} outside [0, 1]")));
            }
            let rho = DensityOperator::mixture_in_basis(&[q, 1.0 - q], &channel.basis)
                .map_err(|e| CliError::Failed(e.to_string()))?;
            let r = coherent::coherent_information(&channel.kraus, &rho).map_err(failed)?;
            match args.common.format {
                Format::Json => to_json(&json!({
                    "q": q,
                    "coherent_information": r.value,
                    "output_entropy": r.output_entropy,
                    "entropy_exchange": r.entropy_exchange,
                })),
                Format::Csv => csv(
                    &[
                        "q",
                        "coherent_information",
                        "output_entropy",
                        "entropy_exchange",
                    ],
                    [vec![
                        format_f64(q),
                        format_f64(r.value),
                        format_f64(r.output_entropy),
                        format_f64(r.entropy_exchange),
                    ]],
                ),
            }
        }
        (None, Some(grid)) => {
            if grid < 3 || grid.is_multiple_of(2) {
                return Err(CliError::Usage(format!(
                    "--sweep needs an odd grid size ≥ 3, got {grid}"
                )));
            }
            let s = coherent::mslci_sweep(&channel.kraus, &channel.basis, grid).map_err(failed)?;
            match args.common.format {
                Format::Json => to_json(&json!({
                    "q_star": s.q_star,
                    "i_star": s.i_star,
                    "grid": grid,
                    "tie_tolerance": coherent::ARGMAX_TIE_TOL,
                    "curve": s.curve.iter().map(|(q, v)| json!({"q": q, "coherent_information": v})).collect::<Vec<_>>(),
                })),
                Format::Csv => csv(
                    &["q", "coherent_information"],
                    s.curve
                        .iter()
                        .map(|(q, v)| vec![format_f64(*q), format_f64(*v)])
                        .collect::<Vec<_>>(),
                ),
            }
        }
        _ => {
            return Err(CliError::Usage(
                "coherent needs exactly one of --q or --sweep".into(),
            ))
        }
    };
    emit(&args.common, &body)?;
    Ok(true)
}

fn polarize_error(e: PolarizeError) -> CliError {
    match e {
        PolarizeError::NotFullySymmetric(_) | PolarizeError::NotBinary(..) => {
            CliError::Refused(e.to_string())
        }
        PolarizeError::NotPowerOfTwo(_)
        | PolarizeError::BadMu(_)
        | PolarizeError::ResourceLimit { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Failed(e.to_string()),
    }
}

pub fn polarize_csv(report: &PolarizationReport) -> String {
    csv(
        &["i", "I_i"],
        report
            .per_index
            .iter()
            .map(|p| vec![p.i.to_string(), format_f64(p.value)])
            .collect::<Vec<_>>(),
    )
}

fn cmd_polarize(args: &PolarizeArgs) -> Result<bool, CliError> {
    if let Some(t) = args.threads {
        // A second build in the same process fails harmlessly; the pool
        // already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let channel = ChannelSpecFile::load(&args.common.input)?.resolve()?;
    let base = channel.require_btpm(args.common.seed)?;
    let mode = match args.mode {
        ModeArg::Exact => ConstructionMode::Exact,
        ModeArg::Auto => ConstructionMode::auto(args.n, args.mu),
        ModeArg::Quantized => ConstructionMode::Quantized { mu: args.mu },
    };
    let report = polarize::polarization_report(&base, args.n, &args.deltas, mode).map_err(|e| {
        if let PolarizeError::NotFullySymmetric(class) = &e {
            CliError::Refused(format!(
                "polarize needs a fully symmetric 2×2 BTPM; classified {class}, BTPM {base}"
            ))
        } else {
            polarize_error(e)
        }
    })?;
    let body = match args.common.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut summary = serde_json::to_value(&report).expect("report serializes");
            summary.as_object_mut().expect("object").remove("per_index");
            eprintln!(
                "{}",
                serde_json::to_string(&summary).expect("summary serializes")
            );
            polarize_csv(&report)
        }
    };
    emit(&args.common, &body)?;
    match report.check_invariants() {
        Ok(()) => Ok(true),
        Err(e) => {
            eprintln!("{e}");
            Ok(false)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub passed: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub passed: bool,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::Unsupported(_)
        | OracleError::IndexOutOfRange { .. }
        | OracleError::BadParameter(_) => CliError::Usage(e.to_string()),
        OracleError::NotQubit(..) | OracleError::NoBtpm(_) => CliError::Refused(e.to_string()),
        _ => CliError::Failed(e.to_string()),
    }
}

fn suite_theorem4(channel: &Channel, grid: usize) -> Result<SuiteResult, CliError> {
    let s = coherent::mslci_sweep(&channel.kraus, &channel.basis, grid)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let gap = (s.q_star - 0.5).abs();
    Ok(SuiteResult {
        suite: "theorem4".into(),
        passed: gap == 0.0,
        max_violation: gap,
        tolerance: 0.0,
        detail: format!(
            "sweep maximum I = {} at q = {} on {grid} points",
            s.i_star, s.q_star
        ),
    })
}

fn suite_theorem5(channel: &Channel, n: usize, seed: u64) -> Result<SuiteResult, CliError> {
    let v = oracle::verify_combined_symmetry(&channel.kraus, &channel.basis, n, seed)
        .map_err(oracle_error)?;
    Ok(SuiteResult {
        suite: "theorem5".into(),
        passed: v.passed,
        max_violation: v.max_violation,
        tolerance: v.tolerance,
        detail: format!("{} (a, Q, V) triples checked", v.checks),
    })
}

fn suite_theorem7(channel: &Channel, n: usize, seed: u64) -> Result<SuiteResult, CliError> {
    let base = channel.require_btpm(seed)?;
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for i in 1..=n {
        let sim = oracle::simulate_coordinate_in_basis(&channel.kraus, &channel.basis, n, i, 0.5)
            .map_err(oracle_error)?;
        let closed = match polarize::coordinate_mslci(&base, n, i, ConstructionMode::Exact) {
            Ok(v) => v,
            Err(e @ PolarizeError::NotFullySymmetric(_))
            | Err(e @ PolarizeError::NotBinary(..)) => {
                return Ok(SuiteResult {
                    suite: "theorem7".into(),
                    passed: false,
                    max_violation: f64::INFINITY,
                    tolerance: AGREEMENT_TOL,
                    detail: format!("closed form unavailable: {e}"),
                })
            }
            Err(e) => return Err(polarize_error(e)),
        };
        worst = worst.max((sim - closed).abs());
        let _ = write!(
            detail,
            "{}i={i}: oracle {sim}, closed form {closed}",
            if i > 1 { "; " } else { "" }
        );
    }
    Ok(SuiteResult {
        suite: "theorem7".into(),
        passed: worst < AGREEMENT_TOL,
        max_violation: worst,
        tolerance: AGREEMENT_TOL,
        detail,
    })
}

pub fn verify_report(
    channel: &Channel,
    n: usize,
    suite: Suite,
    seed: u64,
    grid: usize,
) -> Result<VerifyReport, CliError> {
    if n == 0 || !n.is_power_of_two() || n > MAX_ORACLE_N {
        return Err(CliError::Usage(format!(
            "oracle suites support N ∈ {{1, 2, 4}}, got {n}"
        )));
    }
    let mut suites = Vec::new();
    if matches!(suite, Suite::Theorem4 | Suite::All) {
        suites.push(suite_theorem4(channel, grid)?);
    }
    if matches!(suite, Suite::Theorem5 | Suite::All) {
        suites.push(suite_theorem5(channel, n, seed)?);
    }
    if matches!(suite, Suite::Theorem7 | Suite::All) {
        suites.push(suite_theorem7(channel, n, seed)?);
    }
    Ok(VerifyReport {
        n,
        passed: suites.iter().all(|s| s.passed),
        seed,
        suites,
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool, CliError> {
    let channel = ChannelSpecFile::load(&args.common.input)?.resolve()?;
    let report = verify_report(&channel, args.n, args.suite, args.common.seed, args.sweep)?;
    let body = match args.common.format {
        Format::Json => to_json(&report),
        Format::Csv => csv(
            &["suite", "passed", "max_violation", "tolerance"],
            report
                .suites
                .iter()
                .map(|s| {
                    vec![
                        s.suite.clone(),
                        s.passed.to_string(),
                        format_f64(s.max_violation),
                        format_f64(s.tolerance),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    emit(&args.common, &body)?;
    Ok(report.passed)
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Classify(a) => cmd_classify(a),
        Command::Coherent(a) => cmd_coherent(a),
        Command::Polarize(a) => cmd_polarize(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            eprintln!("qpolar: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_round_trips() {
        for x in [
            0.531_004_406_410_718_8,
            1.0,
            0.1,
            1e-300,
            123456.789,
            -2.5e-7,
            0.0,
            1.0 - 1e-16,
        ] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            assert!(!s.contains('e'), "{s}");
        }
        assert_eq!(format_f64(0.5), "0.50000000000000000");
    }

    #[test]
    fn spec_parsing() {
        let s = ChannelSpecFile::from_json(r#"{"kind":"bitflip","p":0.9}"#).unwrap();
        assert_eq!(s, ChannelSpecFile::Bitflip { p: 0.9 });
        let err = ChannelSpecFile::from_json(r#"{"kind":"bitflip"}"#).unwrap_err();
        assert!(err.to_string().contains("missing field `p`"), "{err}");
        let err = ChannelSpecFile::from_json("{\"kind\":\"btpm\",\n\"matrix\": 3}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ChannelSpecFile::Bitflip { p: 1.5 }.resolve().is_err());
        let k = ChannelSpecFile::from_json(
            r#"{"kind":"kraus","operators":[[[[1,0],[0,0]],[[0,0],[1,0]]]]}"#,
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(k.kraus.len(), 1);
        let bad = ChannelSpecFile::from_json(
            r#"{"kind":"kraus","operators":[[[[0.5,0],[0,0]],[[0,0],[1,0]]]]}"#,
        )
        .unwrap()
        .resolve();
        assert!(matches!(bad, Err(CliError::Parse(_))));
    }

    #[test]
    fn classify_examples() {
        let bf = ChannelSpecFile::Bitflip { p: 0.9 }.resolve().unwrap();
        let r = classify_report(&bf, 42).unwrap();
        assert!(r.symmetry_class.unwrap().is_fully_symmetric());
        let canon = r.canonical.unwrap();
        assert!((canon.probs[0] - 0.9).abs() < 1e-12 && (canon.probs[1] - 0.1).abs() < 1e-12);
        assert_eq!(canon.permutation, vec![1, 0]);

        let ad = ChannelSpecFile::Btpm {
            matrix: vec![vec![1.0, 0.0], vec![0.3, 0.7]],
        }
        .resolve()
        .unwrap();
        let r = classify_report(&ad, 42).unwrap();
        assert_eq!(r.symmetry_class.unwrap().tag, btpm::SymmetryTag::Asymmetric);
    }

    #[test]
    fn verify_rejects_large_n() {
        let bf = ChannelSpecFile::Bitflip { p: 0.9 }.resolve().unwrap();
        let e = verify_report(&bf, 8, Suite::All, 42, 101).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }
}
