//! Optical elements acting on [`PhotonState`].
//!
//! Every element except the polarizing beam splitter acts identically and
//! independently on each path. Efficiency scalars are power efficiencies:
//! a hologram with efficiency `η` multiplies amplitudes by `√η`, so a
//! generate/analyze pair scales amplitude by `η`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::hilbert::{c64, OamLadder, PathMode, PhotonState, Qubit, I, ONE, ZERO};

/// Squared amplitude that may be pushed past the ladder end without error.
const OVERFLOW_TOL: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Unitary,
    Filter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PbsPort {
    TransmitH,
    ReflectV,
}

impl PbsPort {
    pub fn name(self) -> &'static str {
        match self {
            PbsPort::TransmitH => "transmit_H",
            PbsPort::ReflectV => "reflect_V",
        }
    }
}

/// Entry splits the single path into the two interferometer arms
/// (`H → arm_a`, `V → arm_b`); exit recombines them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PbsMode {
    Entry,
    Exit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Linear retarder `R(−θ)·diag(1, e^{−iΓ})·R(θ)`.
    Waveplate {
        retardance: f64,
        theta: f64,
    },
    /// `e^{−iδ/2}·(cos(δ/2)·1 + i·sin(δ/2)·Q)` with `Q: |L,m⟩ ↔ |R,m+shift⟩`.
    QPlate {
        shift: i64,
        delta: f64,
    },
    Polarizer {
        axis: Qubit,
    },
    Smf,
    HologramGenerate {
        target: Qubit,
        order: u32,
        efficiency: f64,
    },
    HologramAnalyze {
        analysis: Qubit,
        order: u32,
        efficiency: f64,
    },
    /// `|m⟩ → e^{−2imα}|−m⟩`.
    DovePrism {
        alpha: f64,
    },
    Mirror,
    Phase {
        phi: f64,
    },
    PbsFilter {
        port: PbsPort,
    },
    PbsSplit {
        mode: PbsMode,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    name: String,
    action: Action,
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn qplate(q: f64, delta: f64) -> Result<Element> {
    let two_q = 2.0 * q;
    if !two_q.is_finite() || (two_q - two_q.round()).abs() > 1e-9 || two_q.round() == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "q-plate charge must be a non-zero integer or half-integer, got {q}"
        )));
    }
    if !delta.is_finite() {
        return Err(Error::InvalidParameter(
            "q-plate retardation must be finite".into(),
        ));
    }
    Ok(Element {
        name: format!("qplate(q={q}, delta={delta})"),
        action: Action::QPlate {
            shift: two_q.round() as i64,
            delta,
        },
    })
}

pub fn waveplate(retardance: f64, theta: f64) -> Element {
    Element {
        name: format!("waveplate(retardance={retardance}, theta={theta})"),
        action: Action::Waveplate { retardance, theta },
    }
}

/// Half-wave plate: `H → cos2θ·H + sin2θ·V`, `V → sin2θ·H − cos2θ·V`.
pub fn hwp(theta: f64) -> Element {
    Element {
        name: format!("hwp(theta={theta})"),
        action: Action::Waveplate {
            retardance: std::f64::consts::PI,
            theta,
        },
    }
}

/// Quarter-wave plate `R(−θ)·diag(1, −i)·R(θ)`. With this sign,
/// `qwp(0)` followed by `qwp(π/4)` sends `H → L` and `V → R` with a common phase.
pub fn qwp(theta: f64) -> Element {
    Element {
        name: format!("qwp(theta={theta})"),
        action: Action::Waveplate {
            retardance: FRAC_PI_2,
            theta,
        },
    }
}

pub fn polarizer(axis: Qubit) -> Result<Element> {
    let axis = Qubit::new(axis.0[0], axis.0[1])?;
    Ok(Element {
        name: format!("polarizer({:?})", axis.0),
        action: Action::Polarizer { axis },
    })
}

/// Single-mode fiber: projector onto `m = 0`.
pub fn smf() -> Element {
    Element {
        name: "smf".into(),
        action: Action::Smf,
    }
}

pub fn hologram_generate(target: Qubit, order: u32) -> Result<Element> {
    hologram_generate_with(target, order, 1.0)
}

pub fn hologram_generate_with(target: Qubit, order: u32, efficiency: f64) -> Result<Element> {
    let target = Qubit::new(target.0[0], target.0[1])?;
    check_hologram(order, efficiency)?;
    Ok(Element {
        name: format!("hologram_gen(order={order}, efficiency={efficiency})"),
        action: Action::HologramGenerate {
            target,
            order,
            efficiency,
        },
    })
}

pub fn hologram_analyze(analysis: Qubit, order: u32) -> Result<Element> {
    hologram_analyze_with(analysis, order, 1.0, false)
}

/// Hologram followed by a single-mode fiber. `invert_sign` analyzes the
/// state with `m → −m`, for holograms mounted with reversed handedness.
pub fn hologram_analyze_with(
    analysis: Qubit,
    order: u32,
    efficiency: f64,
    invert_sign: bool,
) -> Result<Element> {
    let mut analysis = Qubit::new(analysis.0[0], analysis.0[1])?;
    if invert_sign {
        analysis.0.swap(0, 1);
    }
    check_hologram(order, efficiency)?;
    Ok(Element {
        name: format!("hologram_analyze(order={order}, efficiency={efficiency})"),
        action: Action::HologramAnalyze {
            analysis,
            order,
            efficiency,
        },
    })
}

fn check_hologram(order: u32, efficiency: f64) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidParameter(
            "hologram order must be positive".into(),
        ));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hologram efficiency must lie in (0, 1], got {efficiency}"
        )));
    }
    Ok(())
}

pub fn dove_prism(alpha: f64) -> Element {
    Element {
        name: format!("dove(alpha={alpha})"),
        action: Action::DovePrism { alpha },
    }
}

pub fn mirror() -> Element {
    Element {
        name: "mirror".into(),
        action: Action::Mirror,
    }
}

pub fn phase(phi: f64) -> Element {
    Element {
        name: format!("phase(phi={phi})"),
        action: Action::Phase { phi },
    }
}

pub fn pbs_filter(port: PbsPort) -> Element {
    Element {
        name: format!("pbs({})", port.name()),
        action: Action::PbsFilter { port },
    }
}

pub fn pbs_split(mode: PbsMode) -> Element {
    Element {
        name: format!("pbs_split({mode:?})").to_lowercase(),
        action: Action::PbsSplit { mode },
    }
}

impl Element {
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn action(&self) -> &Action {
        &self.action
    }

    pub fn kind(&self) -> ElementKind {
        match self.action {
            Action::Waveplate { .. }
            | Action::QPlate { .. }
            | Action::DovePrism { .. }
            | Action::Mirror
            | Action::Phase { .. }
            | Action::PbsSplit {
                mode: PbsMode::Entry,
            } => ElementKind::Unitary,
            _ => ElementKind::Filter,
        }
    }

    /// Largest `|Δm|` the element can impose.
    pub fn oam_shift_reach(&self) -> u32 {
        match self.action {
            Action::QPlate { shift, .. } => shift.unsigned_abs() as u32,
            Action::HologramGenerate { order, .. } | Action::HologramAnalyze { order, .. } => order,
            _ => 0,
        }
    }

    /// Number of `m → −m` reflections the element contributes to an arm.
    pub fn oam_flips(&self) -> u32 {
        matches!(self.action, Action::DovePrism { .. } | Action::Mirror) as u32
    }

    /// Fraction of the norm a q-plate moves to a new OAM level, `sin²(δ/2)`.
    pub fn conversion_fraction(&self) -> Option<f64> {
        match self.action {
            Action::QPlate { delta, .. } => Some((0.5 * delta).sin().powi(2)),
            _ => None,
        }
    }

    pub fn adjoint(&self) -> Element {
        let action = match &self.action {
            Action::Waveplate { retardance, theta } => Action::Waveplate {
                retardance: -retardance,
                theta: *theta,
            },
            Action::QPlate { shift, delta } => Action::QPlate {
                shift: *shift,
                delta: -delta,
            },
            Action::Phase { phi } => Action::Phase { phi: -phi },
            Action::HologramGenerate {
                target,
                order,
                efficiency,
            } => Action::HologramAnalyze {
                analysis: *target,
                order: *order,
                efficiency: *efficiency,
            },
            Action::HologramAnalyze {
                analysis,
                order,
                efficiency,
            } => Action::HologramGenerate {
                target: *analysis,
                order: *order,
                efficiency: *efficiency,
            },
            Action::PbsSplit { mode } => Action::PbsSplit {
                mode: match mode {
                    PbsMode::Entry => PbsMode::Exit,
                    PbsMode::Exit => PbsMode::Entry,
                },
            },
            other => other.clone(),
        };
        Element {
            name: format!("{}^dagger", self.name),
            action,
        }
    }

    pub fn apply(&self, state: &PhotonState) -> Result<PhotonState> {
        if let Action::PbsSplit { mode } = self.action {
            return self.apply_split(mode, state);
        }
        let ladder = state.ladder();
        let mut amps = Vec::with_capacity(state.amplitudes().len());
        for path in PathMode::ALL {
            amps.extend(self.apply_slab(ladder, state.path_slab(path))?);
        }
        finish(ladder, amps)
    }

    /// Applies the element to one path only, leaving the others untouched.
    pub fn apply_on_path(&self, state: &PhotonState, path: PathMode) -> Result<PhotonState> {
        if matches!(self.action, Action::PbsSplit { .. }) {
            return Err(Error::Precondition {
                element: self.name.clone(),
                reason: "a beam splitter cannot be placed inside an arm".into(),
            });
        }
        let ladder = state.ladder();
        let mut amps = Vec::with_capacity(state.amplitudes().len());
        for p in PathMode::ALL {
            if p == path {
                amps.extend(self.apply_slab(ladder, state.path_slab(p))?);
            } else {
                amps.extend_from_slice(state.path_slab(p));
            }
        }
        finish(ladder, amps)
    }

    fn apply_split(&self, mode: PbsMode, state: &PhotonState) -> Result<PhotonState> {
        let ladder = state.ladder();
        let n = ladder.levels();
        let slab = |p: PathMode| state.path_slab(p);
        let mut out = PhotonState::zero(ladder).into_amplitudes();
        let base = |p: PathMode| p as usize * 2 * n;
        match mode {
            PbsMode::Entry => {
                let stray = state.path_norm2(PathMode::ArmA) + state.path_norm2(PathMode::ArmB);
                if stray > OVERFLOW_TOL {
                    return Err(self.path_error("entry requires all amplitude on the single path"));
                }
                let s = slab(PathMode::Single);
                out[base(PathMode::ArmA)..base(PathMode::ArmA) + n].copy_from_slice(&s[..n]);
                out[base(PathMode::ArmB) + n..base(PathMode::ArmB) + 2 * n]
                    .copy_from_slice(&s[n..]);
            }
            PbsMode::Exit => {
                if state.path_norm2(PathMode::Single) > OVERFLOW_TOL {
                    return Err(self.path_error("exit requires all amplitude inside the arms"));
                }
                // H from arm A and V from arm B leave through the collected face;
                // the remainder exits the other face and is lost.
                let a = slab(PathMode::ArmA);
                let b = slab(PathMode::ArmB);
                out[..n].copy_from_slice(&a[..n]);
                out[n..2 * n].copy_from_slice(&b[n..]);
            }
        }
        finish(ladder, out)
    }

    fn path_error(&self, reason: &str) -> Error {
        Error::Precondition {
            element: self.name.clone(),
            reason: reason.into(),
        }
    }

    fn overflow(&self, ladder: OamLadder, m: i64) -> Error {
        Error::TruncationOverflow {
            element: self.name.clone(),
            m,
            m_max: ladder.m_max(),
        }
    }

    /// Acts on one path: `slab = [H levels..., V levels...]`.
    fn apply_slab(&self, ladder: OamLadder, slab: &[c64]) -> Result<Vec<c64>> {
        let n = ladder.levels();
        let (h, v) = slab.split_at(n);
        let mut out = vec![ZERO; 2 * n];
        match &self.action {
            Action::Waveplate { retardance, theta } => {
                let j = jones_retarder(*retardance, *theta);
                for k in 0..n {
                    out[k] = j[0][0] * h[k] + j[0][1] * v[k];
                    out[n + k] = j[1][0] * h[k] + j[1][1] * v[k];
                }
            }
            Action::QPlate { shift, delta } => {
                // e^{−iδ/2}(cos(δ/2) + i·sin(δ/2)·Q): identity at δ = 0, exactly Q at δ = π.
                let global = c64::from_polar(1.0, -0.5 * delta);
                let c = global * (0.5 * delta).cos();
                let s = global * I * (0.5 * delta).sin();
                let r2 = std::f64::consts::FRAC_1_SQRT_2;
                // Circular components: ψ_L = (ψ_H − iψ_V)/√2, ψ_R = (ψ_H + iψ_V)/√2.
                let mut l_out = vec![ZERO; n];
                let mut r_out = vec![ZERO; n];
                for k in 0..n {
                    let psi_l = (h[k] - I * v[k]) * r2;
                    let psi_r = (h[k] + I * v[k]) * r2;
                    l_out[k] += c * psi_l;
                    r_out[k] += c * psi_r;
                    if s.norm() == 0.0 {
                        continue;
                    }
                    let m = ladder.m_at(k);
                    if psi_l.norm_sqr() > 0.0 {
                        match ladder.offset(m + shift) {
                            Some(t) => r_out[t] += s * psi_l,
                            None if (s * psi_l).norm_sqr() > OVERFLOW_TOL => {
                                return Err(self.overflow(ladder, m + shift))
                            }
                            None => {}
                        }
                    }
                    if psi_r.norm_sqr() > 0.0 {
                        match ladder.offset(m - shift) {
                            Some(t) => l_out[t] += s * psi_r,
                            None if (s * psi_r).norm_sqr() > OVERFLOW_TOL => {
                                return Err(self.overflow(ladder, m - shift))
                            }
                            None => {}
                        }
                    }
                }
                for k in 0..n {
                    out[k] = (l_out[k] + r_out[k]) * r2;
                    out[n + k] = I * (l_out[k] - r_out[k]) * r2;
                }
            }
            Action::Polarizer { axis } => {
                let [a0, a1] = axis.0;
                for k in 0..n {
                    let proj = a0.conj() * h[k] + a1.conj() * v[k];
                    out[k] = a0 * proj;
                    out[n + k] = a1 * proj;
                }
            }
            Action::Smf => {
                let z = ladder.offset(0).unwrap();
                out[z] = h[z];
                out[n + z] = v[z];
            }
            Action::HologramGenerate {
                target,
                order,
                efficiency,
            } => {
                let z = ladder.offset(0).unwrap();
                let outside: f64 = slab
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % n != z)
                    .map(|(_, a)| a.norm_sqr())
                    .sum();
                if outside > OVERFLOW_TOL {
                    return Err(self.path_error("input must lie entirely at m = 0"));
                }
                let o = *order as i64;
                let (plus, minus) = match (ladder.offset(o), ladder.offset(-o)) {
                    (Some(p), Some(q)) => (p, q),
                    _ => {
                        if h[z].norm_sqr() + v[z].norm_sqr() > OVERFLOW_TOL {
                            return Err(self.overflow(ladder, o));
                        }
                        return Ok(out);
                    }
                };
                let amp = efficiency.sqrt();
                for (base, x) in [(0, h[z]), (n, v[z])] {
                    out[base + plus] = amp * x * target.0[0];
                    out[base + minus] = amp * x * target.0[1];
                }
            }
            Action::HologramAnalyze {
                analysis,
                order,
                efficiency,
            } => {
                let o = *order as i64;
                let z = ladder.offset(0).unwrap();
                if let (Some(plus), Some(minus)) = (ladder.offset(o), ladder.offset(-o)) {
                    let amp = efficiency.sqrt();
                    for (base, x) in [(0, h), (n, v)] {
                        out[base + z] = amp
                            * (analysis.0[0].conj() * x[plus] + analysis.0[1].conj() * x[minus]);
                    }
                }
            }
            Action::DovePrism { alpha } => {
                for k in 0..n {
                    let m = ladder.m_at(k);
                    let t = ladder.offset(-m).unwrap();
                    let ph = c64::from_polar(1.0, -2.0 * m as f64 * alpha);
                    out[t] = ph * h[k];
                    out[n + t] = ph * v[k];
                }
            }
            Action::Mirror => {
                for k in 0..n {
                    let t = n - 1 - k;
                    out[t] = h[k];
                    out[n + t] = v[k];
                }
            }
            Action::Phase { phi } => {
                let ph = c64::from_polar(1.0, *phi);
                for (o, x) in out.iter_mut().zip(slab) {
                    *o = ph * x;
                }
            }
            Action::PbsFilter { port } => match port {
                PbsPort::TransmitH => out[..n].copy_from_slice(h),
                PbsPort::ReflectV => out[n..].copy_from_slice(v),
            },
            Action::PbsSplit { .. } => unreachable!("handled on the full state"),
        }
        Ok(out)
    }
}

fn finish(ladder: OamLadder, amps: Vec<c64>) -> Result<PhotonState> {
    // Elements never raise the norm, so the bound held by the input carries over.
    Ok(PhotonState::from_amplitudes_unbounded(ladder, amps))
}

/// Jones matrix of a linear retarder with axis angle `theta`.
pub fn jones_retarder(retardance: f64, theta: f64) -> [[c64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let e = c64::from_polar(1.0, -retardance);
    let off = (ONE - e) * c * s;
    [
        [ONE * (c * c) + e * (s * s), off],
        [off, ONE * (s * s) + e * (c * c)],
    ]
}
