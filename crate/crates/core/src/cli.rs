//! Command-line frontend.
//!
//! Exit codes (stable):
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 1 | internal error |
//! | 2 | usage error (bad flags, bad input spec, bad noise config) |
//! | 3 | file could not be read or written |
//! | 4 | circuit file parse error |
//! | 5 | OAM truncation overflow |
//! | 6 | other physics error (precondition, normalization, interferometer) |
//! | 7 | tomography error (empty subspace, missing analyzer, no counts, no convergence) |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::circuit::{detection_probabilities, run_exact, run_shots, sample_binomial};
use crate::circuitio::{
    emit_density_block, emit_fidelity_table, emit_run_result, parse_circuit, CircuitDoc,
};
use crate::error::Error;
use crate::experiments::prepare_input;
use crate::experiments::{oam_sign_detector, run_table, NoiseConfig, SetupId, SignDetector};
use crate::hilbert::{c64, describe_logical, fidelity, Cardinal, LogicalSubspace, Qubit};
use crate::tomography::{reconstruct_linear_from, reconstruct_mle_from, Frequencies, ProjectorSet};

pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const TRUNCATION: i32 = 5;
    pub const PHYSICS: i32 = 6;
    pub const TOMOGRAPHY: i32 = 7;
}

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  internal error
  2  usage error (flags, input spec, noise config)
  3  file could not be read or written
  4  circuit file parse error
  5  OAM truncation overflow
  6  other physics error
  7  tomography error";

const INPUT_HELP: &str = "Input qubit: `pol:H` (one of H V A D L R), `oam2:h` (one of l r h v a d), \
or amplitudes `pol:0.6,0.8i` / `oam4:1,-1`. A single `x+yi` is read as H amplitude x and V amplitude yi. \
Amplitudes are normalized; OAM inputs ride on an H photon.";

#[derive(Debug, Parser)]
#[command(name = "qplate", version, about = "Polarization and OAM qubit transferrer simulator", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Sampling {
    /// Use exact probabilities (the default when --shots is absent).
    #[arg(long, conflicts_with = "shots")]
    pub exact: bool,
    /// Photons sent to each analyzer.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub shots: Option<u64>,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Sampling {
    fn shots(&self) -> u64 {
        if self.exact {
            0
        } else {
            self.shots.unwrap_or(0)
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write the result here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    /// Versioned `key: value` document.
    Schema,
    /// Tab-separated rows.
    Tsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DetectorKind {
    Qplate,
    Hologram,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a circuit on one input and print the output state.
    #[command(after_help = EXIT_CODES)]
    Run {
        #[arg(long, value_name = "FILE")]
        circuit: PathBuf,
        #[arg(long, value_name = "STATE", help = INPUT_HELP)]
        input: String,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        output: Output,
    },
    /// Run a circuit and reconstruct the output qubit from analyzer counts.
    #[command(after_help = EXIT_CODES)]
    Tomo {
        #[arg(long, value_name = "FILE")]
        circuit: PathBuf,
        #[arg(long, value_name = "STATE", help = INPUT_HELP)]
        input: String,
        /// Output subspace (`pi`, `o2`, `o4`, ...); detected from the output when absent.
        #[arg(long)]
        subspace: Option<String>,
        /// Report the fidelity with this state (same syntax as --input).
        #[arg(long, value_name = "STATE")]
        target: Option<String>,
        /// Hologram analyzer efficiency.
        #[arg(long, default_value_t = 1.0)]
        efficiency: f64,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        output: Output,
    },
    /// Reproduce a setup's six-row fidelity table.
    #[command(after_help = EXIT_CODES)]
    Table {
        /// One of a, b, c, d, det-fwd, det-rev.
        #[arg(long, value_parser = parse_setup)]
        setup: SetupId,
        /// TOML noise configuration.
        #[arg(long, value_name = "FILE")]
        noise: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TableFormat::Schema)]
        format: TableFormat,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        output: Output,
    },
    /// Check a circuit file and print its summary.
    #[command(after_help = EXIT_CODES)]
    Validate {
        #[arg(long, value_name = "FILE")]
        circuit: PathBuf,
        /// Also print the canonical form.
        #[arg(long)]
        canonical: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Efficiency of OAM-sign detection on |l> and |r> photons.
    #[command(name = "detector-eff", after_help = EXIT_CODES)]
    DetectorEff {
        #[arg(long, value_enum, default_value_t = DetectorKind::Qplate)]
        analyzer: DetectorKind,
        /// Hologram efficiency, for `--analyzer hologram`.
        #[arg(long, default_value_t = 0.12)]
        efficiency: f64,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        output: Output,
    },
}

fn parse_setup(s: &str) -> Result<SetupId, String> {
    SetupId::parse(s)
        .ok_or_else(|| format!("unknown setup `{s}` (expected a, b, c, d, det-fwd or det-rev)"))
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: exit::IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) => exit::PARSE,
            Error::TruncationOverflow { .. } => exit::TRUNCATION,
            Error::InvalidParameter(_) => exit::USAGE,
            Error::NotNormalized { .. }
            | Error::DimensionMismatch { .. }
            | Error::Precondition { .. }
            | Error::MalformedInterferometer(_) => exit::PHYSICS,
            Error::EmptySubspace { .. }
            | Error::EmptyAnalyzers
            | Error::MissingAnalyzer(_)
            | Error::ZeroCounts(_)
            | Error::NonConvergence { .. } => exit::TOMOGRAPHY,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses an input-state spec into its subspace and normalized qubit.
pub fn parse_input_spec(spec: &str) -> Result<(LogicalSubspace, Qubit), String> {
    let (tag, body) = spec.split_once(':').ok_or_else(|| {
        format!("input `{spec}` needs a subspace prefix such as `pol:` or `oam2:`")
    })?;
    let sub = LogicalSubspace::parse_tag(tag).ok_or_else(|| format!("unknown subspace `{tag}`"))?;
    let body = body.trim();
    let mut chars = body.chars();
    if let (Some(ch), None) = (chars.next(), chars.next()) {
        let c = match sub {
            LogicalSubspace::Polarization => Cardinal::from_pol_letter(ch),
            LogicalSubspace::Oam(_) => Cardinal::from_oam_letter(ch),
        };
        if let Some(c) = c {
            return Ok((sub, sub.cardinal(c)));
        }
    }
    let (a, b) = match body.split_once(',') {
        Some((a, b)) => (parse_complex(a)?, parse_complex(b)?),
        None => split_two_terms(body)?,
    };
    let q = Qubit::normalized(a, b).map_err(|e| format!("input `{spec}`: {e}"))?;
    Ok((sub, q))
}

fn parse_complex(s: &str) -> Result<c64, String> {
    let s = s.trim();
    let s = s.strip_prefix('+').unwrap_or(s);
    s.parse::<c64>()
        .map_err(|_| format!("`{s}` is not a complex number"))
}

/// `x+yi` as two amplitudes: the first term for H (or +m), the second for V (or −m).
fn split_two_terms(s: &str) -> Result<(c64, c64), String> {
    let bytes = s.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        None => Ok((parse_complex(s)?, c64::new(0.0, 0.0))),
        Some(i) => Ok((parse_complex(&s[..i])?, parse_complex(&s[i..])?)),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn load_circuit(path: &Path) -> Result<CircuitDoc, Failure> {
    let text = read(path)?;
    parse_circuit(&text).map_err(|e| Failure {
        code: exit::PARSE,
        message: format!("{}: {e}", path.display()),
    })
}

fn emit(out: &Output, text: &str) -> Result<Option<String>, Failure> {
    match &out.output {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::io(path, e))?;
            Ok(None)
        }
        None => Ok(Some(text.to_string())),
    }
}

/// Executes a parsed command, returning what should go to standard output.
pub fn execute(cli: Cli) -> Result<Option<String>, Failure> {
    match cli.command {
        Command::Run {
            circuit,
            input,
            sampling,
            output,
        } => {
            let doc = load_circuit(&circuit)?;
            let c = doc.build()?;
            let (sub, q) = parse_input_spec(&input).map_err(Failure::usage)?;
            let state = prepare_input(doc.ladder()?, sub, q)?;
            let r = run_exact(&c, &state)?;
            let mut text = emit_run_result(&r);
            let shots = sampling.shots();
            if shots > 0 {
                let hits = sample_binomial(shots, r.success_probability, sampling.seed, 0);
                writeln!(
                    text,
                    "shots: {shots}\nseed: {}\ndetections: {hits}",
                    sampling.seed
                )
                .unwrap();
            }
            emit(&output, &text)
        }
        Command::Tomo {
            circuit,
            input,
            subspace,
            target,
            efficiency,
            sampling,
            output,
        } => {
            let doc = load_circuit(&circuit)?;
            let c = doc.build()?;
            let (sub, q) = parse_input_spec(&input).map_err(Failure::usage)?;
            let state = prepare_input(doc.ladder()?, sub, q)?;
            let run = run_exact(&c, &state)?;
            let out_sub = match subspace {
                Some(tag) => LogicalSubspace::parse_tag(&tag)
                    .ok_or_else(|| Failure::usage(format!("unknown subspace `{tag}`")))?,
                None => describe_logical(&run.final_state)
                    .map(|d| d.0)
                    .ok_or_else(|| {
                        Failure::usage("output is not a recognizable qubit; pass --subspace")
                    })?,
            };
            let target = match target {
                Some(t) => {
                    let (tsub, tq) = parse_input_spec(&t).map_err(Failure::usage)?;
                    if tsub != out_sub {
                        return Err(Failure::usage(format!(
                            "target lives in {tsub}, output in {out_sub}"
                        )));
                    }
                    Some((t, tq))
                }
                None => None,
            };
            let analyzers = ProjectorSet::new(out_sub).analyzers(efficiency)?;
            let shots = sampling.shots();
            let mut text = format!("format_version: 1\nkind: tomography\nsubspace: {out_sub}\n");
            writeln!(text, "mode: {}", if shots == 0 { "exact" } else { "shots" }).unwrap();
            writeln!(text, "success_probability: {}", run.success_probability).unwrap();
            let freqs = if shots == 0 {
                Frequencies::from_probabilities(&detection_probabilities(&c, &state, &analyzers)?)?
            } else {
                let rec =
                    run_shots(&c, &state, &analyzers, shots, sampling.seed)?.with_subspace(out_sub);
                writeln!(text, "shots: {shots}\nseed: {}\ncounts:", sampling.seed).unwrap();
                for e in &rec.entries {
                    writeln!(text, "  {} {} {}", e.label, e.counts, e.shots).unwrap();
                }
                Frequencies::from_record(&rec)?
            };
            let lin = reconstruct_linear_from(&freqs)?;
            let mle = reconstruct_mle_from(&freqs)?;
            writeln!(text, "linear_physical: {}", lin.physical).unwrap();
            emit_density_block(&mut text, "linear.", &lin.rho);
            emit_density_block(&mut text, "mle.", &mle);
            if let Some((label, tq)) = target {
                writeln!(text, "target: {label}\nfidelity: {}", fidelity(&mle, &tq)).unwrap();
            }
            emit(&output, &text)
        }
        Command::Table {
            setup,
            noise,
            format,
            sampling,
            output,
        } => {
            let noise = match noise {
                Some(p) => Some(NoiseConfig::from_toml(&read(&p)?)?),
                None => None,
            };
            let t = run_table(setup, sampling.shots(), sampling.seed, noise.as_ref())?;
            let text = match format {
                TableFormat::Schema => emit_fidelity_table(&t),
                TableFormat::Tsv => t.to_tsv(),
            };
            emit(&output, &text)
        }
        Command::Validate {
            circuit,
            canonical,
            output,
        } => {
            let doc = load_circuit(&circuit)?;
            doc.build()?;
            let mut text = format!(
                "ok name={} stages={} m_max={} seed={}\n",
                doc.name,
                doc.len(),
                doc.m_max,
                doc.seed
            );
            if canonical {
                text.push_str(&doc.unparse());
            }
            emit(&output, &text)
        }
        Command::DetectorEff {
            analyzer,
            efficiency,
            sampling,
            output,
        } => {
            let kind = match analyzer {
                DetectorKind::Qplate => SignDetector::QPlate,
                DetectorKind::Hologram => SignDetector::Hologram { efficiency },
            };
            let r = oam_sign_detector(kind, sampling.shots(), sampling.seed)?;
            let text = format!(
                "format_version: 1\nkind: detector_efficiency\nanalyzer: {}\nefficiency: {}\ncrosstalk: {}\n",
                match analyzer {
                    DetectorKind::Qplate => "qplate",
                    DetectorKind::Hologram => "hologram",
                },
                r.efficiency,
                r.crosstalk
            );
            emit(&output, &text)
        }
    }
}

/// Parses `args`, runs the command and prints results or a diagnostic.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    match execute(cli) {
        Ok(Some(text)) => {
            print!("{text}");
            exit::OK
        }
        Ok(None) => exit::OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
