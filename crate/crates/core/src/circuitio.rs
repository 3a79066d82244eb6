//! Circuit description format and result serialization.
//!
//! Circuit files are line oriented:
//!
//! ```text
//! circuit format_version=1 name=setup_a m_max=6 seed=0
//! # comments run to end of line
//! qwp theta=0deg
//! qwp theta=45deg
//! qplate q=1 delta=pi
//! polarizer axis=H
//! begin_mz reflections_a=2 reflections_b=2
//! arm_a:
//! arm_b:
//!   dove alpha=pi/8
//! end_mz
//! ```
//!
//! Angles take `deg` or `rad` suffixes (bare numbers are radians) and may be
//! written with `pi`: `pi`, `-pi/16`, `0.5pi`, `3pi/4`. The header line is
//! optional. [`CircuitDoc::unparse`] writes the canonical form, in which
//! every angle is in radians at full precision.
//!
//! Results are `key: value` documents with indented blocks, always starting
//! with `format_version` and `kind`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::circuit::{Circuit, InterferometerBlock, RunResult, StageRecord};
use crate::elements::{
    dove_prism, hologram_analyze_with, hologram_generate_with, hwp, mirror, pbs_filter, phase,
    polarizer, qplate, qwp, smf, waveplate, Element, PbsPort,
};
use crate::error::Result;
use crate::experiments::{FidelityRow, FidelityTable, SetupId};
use crate::hilbert::{
    c64, describe_logical, Cardinal, DensityMatrix2, LogicalSubspace, OamLadder, PathMode,
    PhotonState, Pol, Qubit, DEFAULT_M_MAX, MIN_M_MAX,
};

pub const FORMAT_VERSION: u32 = 1;
pub const RESULTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(line: usize, column: usize, kind: ParseErrorKind) -> Self {
        Self { line, column, kind }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.kind
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("`{element}` is missing parameter `{name}`")]
    MissingParameter { element: String, name: String },
    #[error("bad value for `{name}`: {reason}")]
    BadParameter { name: String, reason: String },
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("interferometer block is never closed with `end_mz`")]
    UnclosedBlock,
    #[error("malformed interferometer: {0}")]
    Block(String),
    #[error("{0}")]
    Syntax(String),
}

// ---------------------------------------------------------------------------
// Circuit documents

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HologramMode {
    Generate,
    Analyze,
}

/// One optical element with its parameters; angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementSpec {
    QPlate {
        q: f64,
        delta: f64,
    },
    Hwp {
        theta: f64,
    },
    Qwp {
        theta: f64,
    },
    Waveplate {
        retardance: f64,
        theta: f64,
    },
    Polarizer {
        axis: Cardinal,
    },
    Smf,
    Hologram {
        mode: HologramMode,
        state: Cardinal,
        order: u32,
        efficiency: f64,
        invert: bool,
    },
    Dove {
        alpha: f64,
    },
    Mirror,
    Phase {
        phi: f64,
    },
    Pbs {
        port: PbsPort,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub reflections_a: u32,
    pub reflections_b: u32,
    pub compensated: bool,
    pub arm_a: Vec<ElementSpec>,
    pub arm_b: Vec<ElementSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Element(ElementSpec),
    Block(BlockSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitDoc {
    pub name: String,
    pub m_max: usize,
    pub seed: u64,
    pub statements: Vec<Statement>,
}

impl Default for CircuitDoc {
    fn default() -> Self {
        Self {
            name: "circuit".into(),
            m_max: DEFAULT_M_MAX,
            seed: 0,
            statements: Vec::new(),
        }
    }
}

/// Degrees to radians, as used for `deg` suffixes.
pub fn degrees(x: f64) -> f64 {
    x * PI / 180.0
}

impl ElementSpec {
    pub fn build(&self) -> Result<Element> {
        Ok(match *self {
            ElementSpec::QPlate { q, delta } => qplate(q, delta)?,
            ElementSpec::Hwp { theta } => hwp(theta),
            ElementSpec::Qwp { theta } => qwp(theta),
            ElementSpec::Waveplate { retardance, theta } => waveplate(retardance, theta),
            ElementSpec::Polarizer { axis } => {
                let sub = LogicalSubspace::Polarization;
                polarizer(sub.cardinal(axis))?.renamed(format!("polarizer({})", axis.letter(sub)))
            }
            ElementSpec::Smf => smf(),
            ElementSpec::Hologram {
                mode,
                state,
                order,
                efficiency,
                invert,
            } => {
                let sub = LogicalSubspace::Oam(order);
                let q = sub.cardinal(state);
                let label = state.letter(sub);
                match mode {
                    HologramMode::Generate => hologram_generate_with(q, order, efficiency)?
                        .renamed(format!(
                            "hologram_gen({label}, order={order}, efficiency={efficiency})"
                        )),
                    HologramMode::Analyze => hologram_analyze_with(q, order, efficiency, invert)?
                        .renamed(format!(
                            "hologram_analyze({label}, order={order}, efficiency={efficiency}{})",
                            if invert { ", inverted" } else { "" }
                        )),
                }
            }
            ElementSpec::Dove { alpha } => dove_prism(alpha),
            ElementSpec::Mirror => mirror(),
            ElementSpec::Phase { phi } => phase(phi),
            ElementSpec::Pbs { port } => pbs_filter(port),
        })
    }

    fn unparse(&self) -> String {
        match *self {
            ElementSpec::QPlate { q, delta } => format!("qplate q={q} delta={}", rad(delta)),
            ElementSpec::Hwp { theta } => format!("hwp theta={}", rad(theta)),
            ElementSpec::Qwp { theta } => format!("qwp theta={}", rad(theta)),
            ElementSpec::Waveplate { retardance, theta } => {
                format!(
                    "waveplate retardance={} theta={}",
                    rad(retardance),
                    rad(theta)
                )
            }
            ElementSpec::Polarizer { axis } => {
                format!(
                    "polarizer axis={}",
                    axis.letter(LogicalSubspace::Polarization)
                )
            }
            ElementSpec::Smf => "smf".into(),
            ElementSpec::Hologram {
                mode,
                state,
                order,
                efficiency,
                invert,
            } => {
                let letter = state.letter(LogicalSubspace::Oam(order));
                match mode {
                    HologramMode::Generate => {
                        format!("hologram gen state={letter} order={order} efficiency={efficiency}")
                    }
                    HologramMode::Analyze => format!(
                        "hologram analyze state={letter} order={order} efficiency={efficiency} invert={invert}"
                    ),
                }
            }
            ElementSpec::Dove { alpha } => format!("dove alpha={}", rad(alpha)),
            ElementSpec::Mirror => "mirror".into(),
            ElementSpec::Phase { phi } => format!("phase phi={}", rad(phi)),
            ElementSpec::Pbs { port } => format!(
                "pbs port={}",
                match port {
                    PbsPort::TransmitH => "H",
                    PbsPort::ReflectV => "V",
                }
            ),
        }
    }
}

fn rad(x: f64) -> String {
    format!("{x}rad")
}

impl BlockSpec {
    pub fn build(&self) -> Result<InterferometerBlock> {
        let arm = |specs: &[ElementSpec]| {
            specs
                .iter()
                .map(ElementSpec::build)
                .collect::<Result<Vec<_>>>()
        };
        InterferometerBlock::new(
            arm(&self.arm_a)?,
            arm(&self.arm_b)?,
            self.reflections_a,
            self.reflections_b,
            self.compensated,
        )
    }
}

impl CircuitDoc {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, e: ElementSpec) -> &mut Self {
        self.statements.push(Statement::Element(e));
        self
    }

    pub fn ladder(&self) -> Result<OamLadder> {
        OamLadder::new(self.m_max)
    }

    pub fn build(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.name.clone());
        for s in &self.statements {
            match s {
                Statement::Element(e) => c.push(e.build()?),
                Statement::Block(b) => c.push_block(b.build()?),
            };
        }
        Ok(c)
    }

    /// Number of top-level stages.
    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn unparse(&self) -> String {
        let mut out = format!(
            "circuit format_version={FORMAT_VERSION} name={} m_max={} seed={}\n",
            self.name, self.m_max, self.seed
        );
        for s in &self.statements {
            match s {
                Statement::Element(e) => {
                    out.push_str(&e.unparse());
                    out.push('\n');
                }
                Statement::Block(b) => {
                    write!(
                        out,
                        "begin_mz reflections_a={} reflections_b={}",
                        b.reflections_a, b.reflections_b
                    )
                    .unwrap();
                    if b.compensated {
                        out.push_str(" compensated=true");
                    }
                    out.push('\n');
                    for (label, arm) in [("arm_a:", &b.arm_a), ("arm_b:", &b.arm_b)] {
                        out.push_str(label);
                        out.push('\n');
                        for e in arm {
                            writeln!(out, "  {}", e.unparse()).unwrap();
                        }
                    }
                    out.push_str("end_mz\n");
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Circuit parser

#[derive(Clone, Copy)]
struct Tok<'a> {
    col: usize,
    text: &'a str,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in code.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok {
                    col: code[..s].chars().count() + 1,
                    text: &code[s..i],
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            col: code[..s].chars().count() + 1,
            text: &code[s..],
        });
    }
    out
}

/// `key=value` parameters of one statement.
struct Params<'a> {
    line: usize,
    element: String,
    end_col: usize,
    map: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> Params<'a> {
    fn collect(
        line: usize,
        element: &str,
        end_col: usize,
        toks: &[Tok<'a>],
    ) -> std::result::Result<Self, ParseError> {
        let mut map = BTreeMap::new();
        for t in toks {
            let Some((k, v)) = t.text.split_once('=') else {
                return Err(ParseError::new(
                    line,
                    t.col,
                    ParseErrorKind::Syntax(format!("expected `name=value`, found `{}`", t.text)),
                ));
            };
            if k.is_empty() {
                return Err(ParseError::new(
                    line,
                    t.col,
                    ParseErrorKind::Syntax("empty parameter name".into()),
                ));
            }
            if map.insert(k, (t.col, v)).is_some() {
                return Err(ParseError::new(
                    line,
                    t.col,
                    ParseErrorKind::DuplicateParameter(k.to_string()),
                ));
            }
        }
        Ok(Self {
            line,
            element: element.to_string(),
            end_col,
            map,
        })
    }

    fn bad(&self, name: &str, col: usize, reason: impl Into<String>) -> ParseError {
        ParseError::new(
            self.line,
            col,
            ParseErrorKind::BadParameter {
                name: name.to_string(),
                reason: reason.into(),
            },
        )
    }

    fn take_opt(&mut self, name: &str) -> Option<(usize, &'a str)> {
        self.map.remove(name)
    }

    fn take(&mut self, name: &str) -> std::result::Result<(usize, &'a str), ParseError> {
        self.take_opt(name).ok_or_else(|| {
            ParseError::new(
                self.line,
                self.end_col,
                ParseErrorKind::MissingParameter {
                    element: self.element.clone(),
                    name: name.to_string(),
                },
            )
        })
    }

    fn angle(&mut self, name: &str) -> std::result::Result<f64, ParseError> {
        let (col, v) = self.take(name)?;
        parse_angle(v).ok_or_else(|| self.bad(name, col, format!("`{v}` is not an angle")))
    }

    fn number<T: std::str::FromStr>(
        &mut self,
        name: &str,
        default: Option<T>,
    ) -> std::result::Result<T, ParseError> {
        let (col, v) = match (self.take_opt(name), default) {
            (Some(x), _) => x,
            (None, Some(d)) => return Ok(d),
            (None, None) => self.take(name)?,
        };
        v.parse()
            .map_err(|_| self.bad(name, col, format!("`{v}` is not a valid number")))
    }

    fn flag(&mut self, name: &str) -> std::result::Result<bool, ParseError> {
        match self.take_opt(name) {
            None => Ok(false),
            Some((_, "true")) => Ok(true),
            Some((_, "false")) => Ok(false),
            Some((col, v)) => {
                Err(self.bad(name, col, format!("expected true or false, got `{v}`")))
            }
        }
    }

    fn finish(self) -> std::result::Result<(), ParseError> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, (col, _))) => Err(ParseError::new(
                self.line,
                col,
                ParseErrorKind::UnknownParameter(k.to_string()),
            )),
        }
    }
}

/// `[sign] (number | [coef]pi) [/ number] [deg|rad]`.
pub fn parse_angle(s: &str) -> Option<f64> {
    let (body, scale) = if let Some(b) = s.strip_suffix("deg") {
        (b, PI / 180.0)
    } else if let Some(b) = s.strip_suffix("rad") {
        (b, 1.0)
    } else {
        (s, 1.0)
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, Some(d.parse::<f64>().ok()?)),
        None => (body, None),
    };
    let value = if let Some(coef) = num.strip_suffix("pi") {
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().ok()?,
        };
        c * PI
    } else {
        if num.is_empty() {
            return None;
        }
        num.parse::<f64>().ok()?
    };
    let value = match den {
        Some(d) if d == 0.0 => return None,
        Some(d) => value / d,
        None => value,
    };
    // Apply the degree scale the same way `degrees` does, so files written in
    // degrees agree bit for bit with programmatic constructions.
    let out = if scale == 1.0 { value } else { degrees(value) };
    out.is_finite().then_some(out)
}

fn parse_element(
    line: usize,
    toks: &[Tok<'_>],
    end_col: usize,
) -> std::result::Result<ElementSpec, ParseError> {
    let head = toks[0];
    let mut rest = &toks[1..];
    let mut mode = None;
    if head.text == "hologram" {
        let Some(m) = rest.first() else {
            return Err(ParseError::new(
                line,
                end_col,
                ParseErrorKind::Syntax("`hologram` needs a mode: `gen` or `analyze`".into()),
            ));
        };
        mode = Some(match m.text {
            "gen" | "generate" => HologramMode::Generate,
            "analyze" | "analyse" => HologramMode::Analyze,
            other => {
                return Err(ParseError::new(
                    line,
                    m.col,
                    ParseErrorKind::Syntax(format!(
                        "hologram mode must be `gen` or `analyze`, found `{other}`"
                    )),
                ))
            }
        });
        rest = &rest[1..];
    }
    let mut p = Params::collect(line, head.text, end_col, rest)?;
    let spec = match head.text {
        "qplate" => {
            let (col, v) = p.take("q")?;
            let q: f64 = v
                .parse()
                .map_err(|_| p.bad("q", col, format!("`{v}` is not a number")))?;
            let two_q = 2.0 * q;
            if !two_q.is_finite() || two_q.fract() != 0.0 || two_q == 0.0 {
                return Err(p.bad(
                    "q",
                    col,
                    "charge must be a non-zero integer or half-integer",
                ));
            }
            let delta = p.angle("delta")?;
            ElementSpec::QPlate { q, delta }
        }
        "hwp" => ElementSpec::Hwp {
            theta: p.angle("theta")?,
        },
        "qwp" => ElementSpec::Qwp {
            theta: p.angle("theta")?,
        },
        "waveplate" => {
            let retardance = p.angle("retardance")?;
            ElementSpec::Waveplate {
                retardance,
                theta: p.angle("theta")?,
            }
        }
        "polarizer" => {
            let (col, v) = p.take("axis")?;
            let axis = single_char(v)
                .and_then(Cardinal::from_pol_letter)
                .ok_or_else(|| {
                    p.bad(
                        "axis",
                        col,
                        format!("expected one of H V A D L R, got `{v}`"),
                    )
                })?;
            ElementSpec::Polarizer { axis }
        }
        "smf" => ElementSpec::Smf,
        "hologram" => {
            let (scol, sv) = p.take("state")?;
            let state = single_char(sv)
                .and_then(Cardinal::from_oam_letter)
                .ok_or_else(|| {
                    p.bad(
                        "state",
                        scol,
                        format!("expected one of l r h v a d, got `{sv}`"),
                    )
                })?;
            let (ocol, _) = p.map.get("order").copied().unwrap_or((end_col, ""));
            let order: u32 = p.number("order", None)?;
            if order == 0 {
                return Err(p.bad("order", ocol, "order must be positive"));
            }
            let (ecol, _) = p.map.get("efficiency").copied().unwrap_or((end_col, ""));
            let efficiency: f64 = p.number("efficiency", Some(1.0))?;
            if !(efficiency > 0.0 && efficiency <= 1.0) {
                return Err(p.bad("efficiency", ecol, "efficiency must lie in (0, 1]"));
            }
            let mode = mode.expect("set above");
            let invert = match mode {
                HologramMode::Analyze => p.flag("invert")?,
                HologramMode::Generate => false,
            };
            ElementSpec::Hologram {
                mode,
                state,
                order,
                efficiency,
                invert,
            }
        }
        "dove" => ElementSpec::Dove {
            alpha: p.angle("alpha")?,
        },
        "mirror" => ElementSpec::Mirror,
        "phase" => ElementSpec::Phase {
            phi: p.angle("phi")?,
        },
        "pbs" => {
            let (col, v) = p.take("port")?;
            let port = match v {
                "H" | "transmit" => PbsPort::TransmitH,
                "V" | "reflect" => PbsPort::ReflectV,
                _ => return Err(p.bad("port", col, format!("expected H or V, got `{v}`"))),
            };
            ElementSpec::Pbs { port }
        }
        other => {
            return Err(ParseError::new(
                line,
                head.col,
                ParseErrorKind::UnknownElement(other.to_string()),
            ))
        }
    };
    p.finish()?;
    Ok(spec)
}

fn single_char(s: &str) -> Option<char> {
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

struct OpenBlock {
    line: usize,
    col: usize,
    spec: BlockSpec,
    arm: Option<PathMode>,
    seen_b: bool,
}

pub fn parse_circuit(text: &str) -> std::result::Result<CircuitDoc, ParseError> {
    let mut doc = CircuitDoc::default();
    let mut seen_statement = false;
    let mut block: Option<OpenBlock> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokenize(raw);
        let Some(head) = toks.first().copied() else {
            continue;
        };
        let end_col = raw
            .split('#')
            .next()
            .unwrap_or("")
            .trim_end()
            .chars()
            .count()
            + 1;
        match head.text {
            "circuit" => {
                if seen_statement || block.is_some() {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        ParseErrorKind::Syntax(
                            "`circuit` header must come before any statement".into(),
                        ),
                    ));
                }
                seen_statement = true;
                let mut p = Params::collect(line, "circuit", end_col, &toks[1..])?;
                if let Some((col, v)) = p.take_opt("format_version") {
                    if v != FORMAT_VERSION.to_string() {
                        return Err(p.bad(
                            "format_version",
                            col,
                            format!("unsupported version `{v}`"),
                        ));
                    }
                }
                if let Some((col, v)) = p.take_opt("name") {
                    if v.is_empty() {
                        return Err(p.bad("name", col, "name must not be empty"));
                    }
                    doc.name = v.to_string();
                }
                let mcol = p.map.get("m_max").map(|x| x.0).unwrap_or(end_col);
                doc.m_max = p.number("m_max", Some(DEFAULT_M_MAX))?;
                if doc.m_max < MIN_M_MAX {
                    return Err(p.bad(
                        "m_max",
                        mcol,
                        format!("m_max must be at least {MIN_M_MAX}"),
                    ));
                }
                doc.seed = p.number("seed", Some(0))?;
                p.finish()?;
            }
            "begin_mz" => {
                if let Some(b) = &block {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        ParseErrorKind::Syntax(format!(
                            "nested `begin_mz` (block opened on line {})",
                            b.line
                        )),
                    ));
                }
                seen_statement = true;
                let mut p = Params::collect(line, "begin_mz", end_col, &toks[1..])?;
                let reflections_a = p.number("reflections_a", Some(0))?;
                let reflections_b = p.number("reflections_b", Some(0))?;
                let compensated = p.flag("compensated")?;
                p.finish()?;
                block = Some(OpenBlock {
                    line,
                    col: head.col,
                    spec: BlockSpec {
                        reflections_a,
                        reflections_b,
                        compensated,
                        arm_a: Vec::new(),
                        arm_b: Vec::new(),
                    },
                    arm: None,
                    seen_b: false,
                });
            }
            "end_mz" => {
                let Some(b) = block.take() else {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        ParseErrorKind::Syntax("`end_mz` without matching `begin_mz`".into()),
                    ));
                };
                if let Some(t) = toks.get(1) {
                    return Err(ParseError::new(
                        line,
                        t.col,
                        ParseErrorKind::Syntax(format!("unexpected `{}` after `end_mz`", t.text)),
                    ));
                }
                if let Err(e) = b.spec.build() {
                    return Err(ParseError::new(
                        b.line,
                        b.col,
                        ParseErrorKind::Block(e.to_string()),
                    ));
                }
                doc.statements.push(Statement::Block(b.spec));
            }
            "arm_a:" | "arm_b:" => {
                let Some(b) = block.as_mut() else {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        ParseErrorKind::Syntax(format!(
                            "`{}` outside an interferometer block",
                            head.text
                        )),
                    ));
                };
                let target = if head.text == "arm_a:" {
                    PathMode::ArmA
                } else {
                    PathMode::ArmB
                };
                let repeated = match target {
                    PathMode::ArmA => b.arm.is_some(),
                    _ => b.seen_b,
                };
                if repeated {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        ParseErrorKind::Syntax(format!("`{}` repeated or out of order", head.text)),
                    ));
                }
                b.arm = Some(target);
                if target == PathMode::ArmB {
                    b.seen_b = true;
                }
                if toks.len() > 1 {
                    let e = parse_element(line, &toks[1..], end_col)?;
                    push_arm(b, e);
                }
            }
            _ => {
                let e = parse_element(line, &toks, end_col)?;
                seen_statement = true;
                match block.as_mut() {
                    None => doc.statements.push(Statement::Element(e)),
                    Some(b) if b.arm.is_none() => {
                        return Err(ParseError::new(
                            line,
                            head.col,
                            ParseErrorKind::Syntax(
                                "expected `arm_a:` or `arm_b:` before elements inside a block"
                                    .into(),
                            ),
                        ))
                    }
                    Some(b) => push_arm(b, e),
                }
            }
        }
    }
    if let Some(b) = block {
        return Err(ParseError::new(
            b.line,
            b.col,
            ParseErrorKind::UnclosedBlock,
        ));
    }
    Ok(doc)
}

fn push_arm(b: &mut OpenBlock, e: ElementSpec) {
    match b.arm {
        Some(PathMode::ArmB) => b.spec.arm_b.push(e),
        _ => b.spec.arm_a.push(e),
    }
}

// ---------------------------------------------------------------------------
// Result documents

/// A parsed results document.
#[derive(Debug, Clone, PartialEq)]
pub enum ResultDoc {
    Run(RunResult),
    Table(FidelityTable),
    Density(DensityMatrix2),
}

fn header(kind: &str) -> String {
    format!("format_version: {RESULTS_FORMAT_VERSION}\nkind: {kind}\n")
}

fn write_matrix(out: &mut String, prefix: &str, rho: &DensityMatrix2) {
    let m = rho.entries();
    writeln!(out, "{prefix}real:").unwrap();
    for row in m {
        writeln!(out, "  {} {}", row[0].re, row[1].re).unwrap();
    }
    writeln!(out, "{prefix}imag:").unwrap();
    for row in m {
        writeln!(out, "  {} {}", row[0].im, row[1].im).unwrap();
    }
}

pub fn emit_density_matrix(rho: &DensityMatrix2) -> String {
    let mut out = header("density_matrix");
    write_matrix(&mut out, "", rho);
    out
}

/// Matrix blocks under `<prefix>real:` and `<prefix>imag:`, for documents
/// holding more than one estimate.
pub fn emit_density_block(out: &mut String, prefix: &str, rho: &DensityMatrix2) {
    write_matrix(out, prefix, rho);
}

/// Ket label of a state when it is recognizably a logical qubit.
pub fn logical_label(state: &PhotonState) -> Option<String> {
    let (sub, q, carrier) = describe_logical(state)?;
    let q = Qubit::normalized(q.0[0], q.0[1]).ok()?;
    let ket = Cardinal::ALL
        .iter()
        .find(|&&c| sub.cardinal(c).overlap(&q) > 1.0 - 1e-9)
        .map(|c| c.ket(sub))
        .unwrap_or_else(|| format!("({}, {})_{}", fmt_c(q.0[0]), fmt_c(q.0[1]), sub.tag()));
    Some(match carrier {
        Some(p) => format!("{ket} carrier={}", if p == Pol::H { 'H' } else { 'V' }),
        None => ket,
    })
}

fn fmt_c(z: c64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

pub fn emit_run_result(r: &RunResult) -> String {
    let mut out = header("run_result");
    writeln!(out, "success_probability: {}", r.success_probability).unwrap();
    writeln!(out, "null_output: {}", r.null_output).unwrap();
    match r.conversion_efficiency() {
        Some(c) => writeln!(out, "conversion_efficiency: {c}").unwrap(),
        None => writeln!(out, "conversion_efficiency: none").unwrap(),
    }
    if let Some(label) = logical_label(&r.final_state) {
        writeln!(out, "logical_state: {label}").unwrap();
    }
    writeln!(out, "m_max: {}", r.final_state.m_max()).unwrap();
    writeln!(out, "amplitudes:").unwrap();
    for (path, pol, m, a) in r.final_state.support(0.0) {
        let p = if pol == Pol::H { 'H' } else { 'V' };
        writeln!(out, "  {} {p} {m:+} {} {}", path.name(), a.re, a.im).unwrap();
    }
    writeln!(out, "stage_trace:").unwrap();
    for s in &r.stage_trace {
        let conv = s
            .conversion
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".into());
        writeln!(out, "  {} {conv} {}", s.norm2, s.label).unwrap();
    }
    out
}

pub fn emit_fidelity_table(t: &FidelityTable) -> String {
    let mut out = header("fidelity_table");
    writeln!(out, "setup: {}", t.setup.name()).unwrap();
    writeln!(
        out,
        "mode: {}",
        if t.shots == 0 { "exact" } else { "shots" }
    )
    .unwrap();
    writeln!(out, "shots: {}", t.shots).unwrap();
    writeln!(out, "seed: {}", t.seed).unwrap();
    writeln!(out, "average_fidelity: {}", t.average_fidelity()).unwrap();
    writeln!(out, "average_std: {}", t.average_std()).unwrap();
    writeln!(
        out,
        "average_success_probability: {}",
        t.average_success_probability()
    )
    .unwrap();
    match t.conversion_efficiency {
        Some(c) => writeln!(out, "conversion_efficiency: {c}").unwrap(),
        None => writeln!(out, "conversion_efficiency: none").unwrap(),
    }
    writeln!(out, "rows:").unwrap();
    for r in &t.rows {
        writeln!(
            out,
            "  {} {} {} {} {}",
            r.initial, r.expected, r.fidelity, r.std, r.success_probability
        )
        .unwrap();
    }
    out
}

struct Field<'a> {
    line: usize,
    value: &'a str,
    rows: Vec<(usize, &'a str)>,
}

fn fields(text: &str) -> std::result::Result<BTreeMap<&str, Field<'_>>, ParseError> {
    let mut out: BTreeMap<&str, Field<'_>> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        if raw.starts_with(' ') || raw.starts_with('\t') {
            let Some(key) = current else {
                return Err(ParseError::new(
                    line,
                    1,
                    ParseErrorKind::Syntax("indented line outside a block".into()),
                ));
            };
            out.get_mut(key)
                .expect("current key present")
                .rows
                .push((line, raw.trim()));
            continue;
        }
        let Some((k, v)) = raw.split_once(':') else {
            return Err(ParseError::new(
                line,
                1,
                ParseErrorKind::Syntax("expected `key: value`".into()),
            ));
        };
        if out.contains_key(k) {
            return Err(ParseError::new(
                line,
                1,
                ParseErrorKind::DuplicateParameter(k.to_string()),
            ));
        }
        out.insert(
            k,
            Field {
                line,
                value: v.trim(),
                rows: Vec::new(),
            },
        );
        current = Some(k);
    }
    Ok(out)
}

struct Doc<'a> {
    fields: BTreeMap<&'a str, Field<'a>>,
    last_line: usize,
}

impl<'a> Doc<'a> {
    fn get(&self, key: &str) -> std::result::Result<&Field<'a>, ParseError> {
        self.fields.get(key).ok_or_else(|| {
            ParseError::new(
                self.last_line,
                1,
                ParseErrorKind::MissingParameter {
                    element: "results".into(),
                    name: key.to_string(),
                },
            )
        })
    }

    fn value<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, ParseError> {
        let f = self.get(key)?;
        f.value.parse().map_err(|_| bad_value(f.line, key, f.value))
    }

    fn optional_f64(&self, key: &str) -> std::result::Result<Option<f64>, ParseError> {
        let f = self.get(key)?;
        if f.value == "none" {
            return Ok(None);
        }
        f.value
            .parse()
            .map(Some)
            .map_err(|_| bad_value(f.line, key, f.value))
    }
}

fn bad_value(line: usize, key: &str, v: &str) -> ParseError {
    ParseError::new(
        line,
        1,
        ParseErrorKind::BadParameter {
            name: key.to_string(),
            reason: format!("cannot parse `{v}`"),
        },
    )
}

fn num<T: std::str::FromStr>(
    line: usize,
    what: &str,
    s: &str,
) -> std::result::Result<T, ParseError> {
    s.parse().map_err(|_| bad_value(line, what, s))
}

fn read_matrix(doc: &Doc<'_>, prefix: &str) -> std::result::Result<DensityMatrix2, ParseError> {
    let mut m = [[c64::new(0.0, 0.0); 2]; 2];
    for (part, is_im) in [("real", false), ("imag", true)] {
        let key = format!("{prefix}{part}");
        let f = doc.get(&key)?;
        if f.rows.len() != 2 {
            return Err(ParseError::new(
                f.line,
                1,
                ParseErrorKind::Syntax(format!("`{key}` needs two rows")),
            ));
        }
        for (i, (line, row)) in f.rows.iter().enumerate() {
            let vals: Vec<&str> = row.split_whitespace().collect();
            if vals.len() != 2 {
                return Err(ParseError::new(
                    *line,
                    1,
                    ParseErrorKind::Syntax("matrix rows need two entries".into()),
                ));
            }
            for j in 0..2 {
                let x: f64 = num(*line, &key, vals[j])?;
                if is_im {
                    m[i][j].im = x;
                } else {
                    m[i][j].re = x;
                }
            }
        }
    }
    DensityMatrix2::new_unchecked_psd(m).map_err(|e| {
        ParseError::new(
            doc.get(&format!("{prefix}real"))
                .map(|f| f.line)
                .unwrap_or(1),
            1,
            ParseErrorKind::Syntax(e.to_string()),
        )
    })
}

/// Parses any document written by the `emit_*` functions.
pub fn parse_results(text: &str) -> std::result::Result<ResultDoc, ParseError> {
    let doc = Doc {
        fields: fields(text)?,
        last_line: text.lines().count().max(1),
    };
    let version: u32 = doc.value("format_version")?;
    if version != RESULTS_FORMAT_VERSION {
        let f = doc.get("format_version")?;
        return Err(bad_value(f.line, "format_version", f.value));
    }
    let kind = doc.get("kind")?;
    match kind.value {
        "density_matrix" => Ok(ResultDoc::Density(read_matrix(&doc, "")?)),
        "run_result" => parse_run(&doc).map(ResultDoc::Run),
        "fidelity_table" => parse_table(&doc).map(ResultDoc::Table),
        other => Err(bad_value(kind.line, "kind", other)),
    }
}

fn parse_run(doc: &Doc<'_>) -> std::result::Result<RunResult, ParseError> {
    let m_max: usize = doc.value("m_max")?;
    let mf = doc.get("m_max")?;
    let ladder = OamLadder::new(m_max).map_err(|_| bad_value(mf.line, "m_max", mf.value))?;
    let mut state = PhotonState::zero(ladder);
    let mut amps = state.amplitudes().to_vec();
    for &(line, row) in &doc.get("amplitudes")?.rows {
        let v: Vec<&str> = row.split_whitespace().collect();
        if v.len() != 5 {
            return Err(ParseError::new(
                line,
                1,
                ParseErrorKind::Syntax("expected `path pol m re im`".into()),
            ));
        }
        let path = PathMode::ALL
            .into_iter()
            .find(|p| p.name() == v[0])
            .ok_or_else(|| bad_value(line, "path", v[0]))?;
        let pol = match v[1] {
            "H" => Pol::H,
            "V" => Pol::V,
            other => return Err(bad_value(line, "pol", other)),
        };
        let m: i64 = num(line, "m", v[2])?;
        let idx = state
            .index(path, pol, m)
            .ok_or_else(|| bad_value(line, "m", v[2]))?;
        amps[idx] = c64::new(num(line, "re", v[3])?, num(line, "im", v[4])?);
    }
    state = PhotonState::from_amplitudes_unbounded(ladder, amps);
    let mut trace = Vec::new();
    for &(line, row) in &doc.get("stage_trace")?.rows {
        let mut parts = row.splitn(3, ' ');
        let (Some(n), Some(c), Some(label)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ParseError::new(
                line,
                1,
                ParseErrorKind::Syntax("expected `norm2 conversion label`".into()),
            ));
        };
        trace.push(StageRecord {
            label: label.to_string(),
            norm2: num(line, "norm2", n)?,
            conversion: if c == "-" {
                None
            } else {
                Some(num(line, "conversion", c)?)
            },
        });
    }
    Ok(RunResult {
        final_state: state,
        success_probability: doc.value("success_probability")?,
        null_output: doc.value("null_output")?,
        stage_trace: trace,
    })
}

fn parse_table(doc: &Doc<'_>) -> std::result::Result<FidelityTable, ParseError> {
    let sf = doc.get("setup")?;
    let setup = SetupId::parse(sf.value).ok_or_else(|| bad_value(sf.line, "setup", sf.value))?;
    let mut rows = Vec::new();
    for &(line, row) in &doc.get("rows")?.rows {
        let v: Vec<&str> = row.split_whitespace().collect();
        if v.len() != 5 {
            return Err(ParseError::new(
                line,
                1,
                ParseErrorKind::Syntax(
                    "expected `initial expected fidelity std success_probability`".into(),
                ),
            ));
        }
        rows.push(FidelityRow {
            initial: v[0].to_string(),
            expected: v[1].to_string(),
            fidelity: num(line, "fidelity", v[2])?,
            std: num(line, "std", v[3])?,
            success_probability: num(line, "success_probability", v[4])?,
        });
    }
    Ok(FidelityTable {
        setup,
        shots: doc.value("shots")?,
        seed: doc.value("seed")?,
        rows,
        conversion_efficiency: doc.optional_f64("conversion_efficiency")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::run_exact;
    use crate::hilbert::{make_source_state, pol};

    const SETUP_A: &str = "\
# box a
circuit format_version=1 name=setup_a m_max=6 seed=0
qwp theta=0deg
qwp theta=45deg   # fast axis at 45
qplate q=1 delta=pi
polarizer axis=H
";

    #[test]
    fn setup_a_text_gives_four_stages() {
        let doc = parse_circuit(SETUP_A).unwrap();
        assert_eq!(doc.name, "setup_a");
        assert_eq!(doc.len(), 4);
        assert_eq!(
            doc.statements[1],
            Statement::Element(ElementSpec::Qwp {
                theta: degrees(45.0)
            })
        );
        let c = doc.build().unwrap();
        let r = run_exact(
            &c,
            &make_source_state(c64::new(1.0, 0.0), c64::new(0.0, 0.0)).unwrap(),
        )
        .unwrap();
        assert!((r.success_probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_file_is_empty_circuit() {
        let doc = parse_circuit("").unwrap();
        assert!(doc.is_empty());
        assert_eq!(doc.m_max, DEFAULT_M_MAX);
        assert!(parse_circuit("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn missing_delta_is_named() {
        let e = parse_circuit("qplate q=1").unwrap_err();
        assert_eq!(e.line, 1);
        assert_eq!(
            e.kind,
            ParseErrorKind::MissingParameter {
                element: "qplate".into(),
                name: "delta".into()
            }
        );
        assert!(e.to_string().contains("delta"));
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi"), Some(PI));
        assert_eq!(parse_angle("-pi/16"), Some(-PI / 16.0));
        assert_eq!(parse_angle("0.5pi"), Some(0.5 * PI));
        assert_eq!(parse_angle("3pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_angle("22.5deg"), Some(degrees(22.5)));
        assert_eq!(parse_angle("0.25rad"), Some(0.25));
        assert_eq!(parse_angle("0.25"), Some(0.25));
        assert_eq!(parse_angle("pi/8rad"), Some(PI / 8.0));
        for bad in ["", "deg", "pie", "1/0", "x", "pi/", "inf", "1e999"] {
            assert_eq!(parse_angle(bad), None, "{bad}");
        }
    }

    #[test]
    fn errors_are_located() {
        let cases: [(&str, usize, usize); 8] = [
            ("smf\nfrobnicate x=1\n", 2, 1),
            ("hwp theta=abc", 1, 5),
            ("hwp theta=1 theta=2", 1, 13),
            ("  hwp theta=1 phi=2", 1, 15),
            ("begin_mz\narm_a:\n", 1, 1),
            ("end_mz", 1, 1),
            ("begin_mz\nsmf\nend_mz", 2, 1),
            ("begin_mz reflections_a=1\narm_a:\narm_b:\nend_mz", 1, 1),
        ];
        for (text, line, col) in cases {
            let e = parse_circuit(text).unwrap_err();
            assert_eq!((e.line, e.column), (line, col), "{text:?}: {e}");
        }
        assert_eq!(
            parse_circuit("begin_mz\narm_a:\n").unwrap_err().kind,
            ParseErrorKind::UnclosedBlock
        );
        assert!(matches!(
            parse_circuit("polarizer axis=l").unwrap_err().kind,
            ParseErrorKind::BadParameter { .. }
        ));
        assert!(matches!(
            parse_circuit("qplate q=0 delta=pi").unwrap_err().kind,
            ParseErrorKind::BadParameter { .. }
        ));
    }

    #[test]
    fn block_round_trip() {
        let text = "\
circuit name=det
begin_mz reflections_a=2 reflections_b=2
arm_a:
arm_b: dove alpha=pi/8
  dove alpha=0
  phase phi=pi/2
end_mz
hologram analyze state=h order=2 efficiency=0.12 invert=true
";
        let doc = parse_circuit(text).unwrap();
        let Statement::Block(b) = &doc.statements[0] else {
            panic!()
        };
        assert_eq!(b.arm_b.len(), 3);
        assert!(b.arm_a.is_empty());
        let again = parse_circuit(&doc.unparse()).unwrap();
        assert_eq!(again, doc);
        assert_eq!(again.unparse(), doc.unparse());
        doc.build().unwrap();
    }

    #[test]
    fn density_matrix_emission() {
        let l = LogicalSubspace::Oam(2).cardinal(Cardinal::ZPlus);
        let text = emit_density_matrix(&DensityMatrix2::pure(&l));
        assert_eq!(
            text,
            "format_version: 1\nkind: density_matrix\nreal:\n  1 0\n  0 0\nimag:\n  0 0\n  0 0\n"
        );
        let rho = DensityMatrix2::pure(&pol::l());
        assert_eq!(
            parse_results(&emit_density_matrix(&rho)).unwrap(),
            ResultDoc::Density(rho)
        );
    }

    #[test]
    fn run_result_emission_round_trips() {
        let doc = parse_circuit(SETUP_A).unwrap();
        let r = run_exact(
            &doc.build().unwrap(),
            &make_source_state(c64::new(1.0, 0.0), c64::new(0.0, 0.0)).unwrap(),
        )
        .unwrap();
        let text = emit_run_result(&r);
        assert!(text.contains("\nsuccess_probability: 0.5"), "{text}");
        assert!(text.contains("logical_state: |l>_o2 carrier=H"), "{text}");
        assert_eq!(parse_results(&text).unwrap(), ResultDoc::Run(r));
    }

    #[test]
    fn malformed_results_are_located() {
        let e = parse_results("format_version: 1\nkind: density_matrix\nreal:\n  1 x\n  0 0\n")
            .unwrap_err();
        assert_eq!(e.line, 4);
        assert!(parse_results("format_version: 2\nkind: density_matrix\n").is_err());
        assert!(parse_results("  1 0\n").is_err());
    }
}
