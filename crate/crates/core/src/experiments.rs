//! The transferrer setups and the drivers that reproduce their fidelity
//! tables.
//!
//! | setup | direction | stages |
//! |---|---|---|
//! | a | π → o₂ | qwp 0°, qwp 45°, q-plate, polarizer H |
//! | b | o₂ → π | q-plate, qwp 135°, qwp 90°, single-mode fiber |
//! | c | π → o₂ → π | a then b |
//! | d | π → o₄ | qwp 0°, qwp 45°, q-plate, hwp 0°, q-plate, polarizer H |
//! | det-fwd | π → o₂ | qwp 0°, qwp 45°, q-plate, qwp 90°, σ_z interferometer, hwp 22.5° |
//! | det-rev | o₂ → π | det-fwd traversed backwards |

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Deserialize;

use crate::circuit::{detection_probabilities, run_exact, run_shots, sample_binomial, Circuit};
use crate::circuitio::{degrees, BlockSpec, CircuitDoc, ElementSpec, HologramMode, Statement};
use crate::elements::{hologram_analyze_with, pbs_filter, PbsPort};
use crate::error::{Error, Result};
use crate::hilbert::{
    fidelity, make_source_state_in, pol, Cardinal, LogicalSubspace, OamLadder, PhotonState, Qubit,
};
use crate::tomography::{
    bootstrap_fidelity, reconstruct_linear_from, reconstruct_mle, Frequencies, ProjectorSet,
};

/// Bootstrap resamples per table row in shot mode.
pub const BOOTSTRAP_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetupId {
    A,
    B,
    C,
    D,
    DetFwd,
    DetRev,
}

impl SetupId {
    pub const ALL: [SetupId; 6] = [
        SetupId::A,
        SetupId::B,
        SetupId::C,
        SetupId::D,
        SetupId::DetFwd,
        SetupId::DetRev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SetupId::A => "a",
            SetupId::B => "b",
            SetupId::C => "c",
            SetupId::D => "d",
            SetupId::DetFwd => "det-fwd",
            SetupId::DetRev => "det-rev",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .or(match s {
                "det" => Some(SetupId::DetFwd),
                _ => None,
            })
    }

    pub fn input_subspace(self) -> LogicalSubspace {
        match self {
            SetupId::B | SetupId::DetRev => LogicalSubspace::Oam(2),
            _ => LogicalSubspace::Polarization,
        }
    }

    pub fn output_subspace(self) -> LogicalSubspace {
        match self {
            SetupId::A | SetupId::DetFwd => LogicalSubspace::Oam(2),
            SetupId::D => LogicalSubspace::Oam(4),
            _ => LogicalSubspace::Polarization,
        }
    }

    /// Input cardinal states in table order. Every setup maps a cardinal
    /// state to the cardinal state of the same Pauli eigenvalue.
    pub fn table_inputs(self) -> [Cardinal; 6] {
        use Cardinal::*;
        match self {
            SetupId::A | SetupId::DetFwd => [ZPlus, ZMinus, XPlus, XMinus, YPlus, YMinus],
            SetupId::B | SetupId::DetRev => [ZPlus, ZMinus, YPlus, YMinus, XPlus, XMinus],
            SetupId::C => [ZPlus, ZMinus, XPlus, XMinus, YMinus, YPlus],
            SetupId::D => [ZPlus, ZMinus, YPlus, YMinus, XPlus, XMinus],
        }
    }
}

/// Departures from the ideal optics. Plate detuning is given either as a
/// conversion fraction `sin²(δ/2)` or as the retardation `δ` itself, for
/// all plates at once or one value per plate.
///
/// ```toml
/// qplate_conversion = 0.894
/// hologram_efficiency = 0.12
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub qplate_conversion: Option<PerPlate>,
    pub qplate_delta: Option<PerPlate>,
    pub hologram_efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PerPlate {
    All(f64),
    Each(Vec<f64>),
}

impl PerPlate {
    fn get(&self, k: usize, plates: usize) -> Result<f64> {
        match self {
            PerPlate::All(x) => Ok(*x),
            PerPlate::Each(v) if v.len() == plates => Ok(v[k]),
            PerPlate::Each(v) => Err(Error::InvalidParameter(format!(
                "noise lists {} q-plate values but the circuit has {plates}",
                v.len()
            ))),
        }
    }
}

impl NoiseConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: NoiseConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("noise config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same conversion fraction on every plate.
    pub fn uniform_conversion(fraction: f64) -> Self {
        Self {
            qplate_conversion: Some(PerPlate::All(fraction)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.qplate_conversion.is_some() && self.qplate_delta.is_some() {
            return Err(Error::InvalidParameter(
                "give either qplate_conversion or qplate_delta, not both".into(),
            ));
        }
        if let Some(c) = &self.qplate_conversion {
            let vals = match c {
                PerPlate::All(x) => vec![*x],
                PerPlate::Each(v) => v.clone(),
            };
            if let Some(bad) = vals.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidParameter(format!(
                    "q-plate conversion must lie in [0, 1], got {bad}"
                )));
            }
        }
        if let Some(e) = self.hologram_efficiency {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "hologram efficiency must lie in (0, 1], got {e}"
                )));
            }
        }
        Ok(())
    }

    pub fn hologram_efficiency(&self) -> f64 {
        self.hologram_efficiency.unwrap_or(1.0)
    }

    fn plate_delta(&self, nominal: f64, k: usize, plates: usize) -> Result<f64> {
        if let Some(c) = &self.qplate_conversion {
            return Ok(2.0 * c.get(k, plates)?.sqrt().asin());
        }
        if let Some(d) = &self.qplate_delta {
            return d.get(k, plates);
        }
        Ok(nominal)
    }
}

fn qplate(delta: f64) -> ElementSpec {
    ElementSpec::QPlate { q: 1.0, delta }
}

fn qwp(deg: f64) -> ElementSpec {
    ElementSpec::Qwp {
        theta: degrees(deg),
    }
}

fn pi_to_o2() -> Vec<ElementSpec> {
    vec![qwp(0.0), qwp(45.0), qplate(PI)]
}

fn ideal_statements(id: SetupId) -> Vec<Statement> {
    let polarizer_h = ElementSpec::Polarizer {
        axis: Cardinal::ZPlus,
    };
    let a: Vec<ElementSpec> = pi_to_o2()
        .into_iter()
        .chain([polarizer_h.clone()])
        .collect();
    let b = vec![qplate(PI), qwp(135.0), qwp(90.0), ElementSpec::Smf];
    let el = |v: Vec<ElementSpec>| v.into_iter().map(Statement::Element).collect::<Vec<_>>();
    match id {
        SetupId::A => el(a),
        SetupId::B => el(b),
        SetupId::C => el(a.into_iter().chain(b).collect()),
        SetupId::D => {
            let mut v = pi_to_o2();
            v.extend([ElementSpec::Hwp { theta: 0.0 }, qplate(PI), polarizer_h]);
            el(v)
        }
        SetupId::DetFwd => {
            let mut v = el(pi_to_o2());
            // R → A, L → D before the polarizing split.
            v.push(Statement::Element(qwp(90.0)));
            v.push(Statement::Block(BlockSpec {
                reflections_a: 2,
                reflections_b: 2,
                compensated: false,
                arm_a: vec![],
                arm_b: vec![
                    ElementSpec::Dove { alpha: FRAC_PI_8 },
                    ElementSpec::Dove { alpha: 0.0 },
                    // Locks the interferometer working point.
                    ElementSpec::Phase { phi: FRAC_PI_2 },
                ],
            }));
            v.push(Statement::Element(ElementSpec::Hwp {
                theta: degrees(22.5),
            }));
            v
        }
        SetupId::DetRev => adjoint_statements(&ideal_statements(SetupId::DetFwd)),
    }
}

fn adjoint_spec(e: &ElementSpec) -> ElementSpec {
    match *e {
        ElementSpec::QPlate { q, delta } => ElementSpec::QPlate { q, delta: -delta },
        ElementSpec::Qwp { theta } => ElementSpec::Waveplate {
            retardance: -FRAC_PI_2,
            theta,
        },
        ElementSpec::Waveplate { retardance, theta } => ElementSpec::Waveplate {
            retardance: -retardance,
            theta,
        },
        ElementSpec::Phase { phi } => ElementSpec::Phase { phi: -phi },
        ElementSpec::Hologram {
            mode,
            state,
            order,
            efficiency,
            invert,
        } => {
            let sub = LogicalSubspace::Oam(order);
            let state = if invert {
                let q = sub.cardinal(state);
                let swapped = Qubit([q.0[1], q.0[0]]);
                *Cardinal::ALL
                    .iter()
                    .find(|&&c| sub.cardinal(c).overlap(&swapped) > 1.0 - 1e-12)
                    .expect("cardinal states are closed under m → −m")
            } else {
                state
            };
            ElementSpec::Hologram {
                mode: match mode {
                    HologramMode::Generate => HologramMode::Analyze,
                    HologramMode::Analyze => HologramMode::Generate,
                },
                state,
                order,
                efficiency,
                invert: false,
            }
        }
        // hwp, polarizers, fibers, Dove prisms, mirrors and filters are self-adjoint.
        ref other => other.clone(),
    }
}

fn adjoint_statements(stmts: &[Statement]) -> Vec<Statement> {
    stmts
        .iter()
        .rev()
        .map(|s| match s {
            Statement::Element(e) => Statement::Element(adjoint_spec(e)),
            Statement::Block(b) => {
                let rev = |arm: &[ElementSpec], refl: u32| {
                    let mut out = Vec::new();
                    if refl % 2 == 1 {
                        out.push(ElementSpec::Mirror);
                    }
                    out.extend(arm.iter().rev().map(adjoint_spec));
                    out
                };
                Statement::Block(BlockSpec {
                    reflections_a: b.reflections_a - b.reflections_a % 2,
                    reflections_b: b.reflections_b - b.reflections_b % 2,
                    compensated: b.compensated,
                    arm_a: rev(&b.arm_a, b.reflections_a),
                    arm_b: rev(&b.arm_b, b.reflections_b),
                })
            }
        })
        .collect()
}

/// Name used for the setup's circuit document.
pub fn setup_doc_name(id: SetupId) -> &'static str {
    match id {
        SetupId::A => "setup_a",
        SetupId::B => "setup_b",
        SetupId::C => "setup_c",
        SetupId::D => "setup_d",
        SetupId::DetFwd => "setup_det",
        SetupId::DetRev => "setup_det_rev",
    }
}

/// Circuit document of a setup with noise applied to its plates.
pub fn setup_doc(id: SetupId, noise: Option<&NoiseConfig>) -> Result<CircuitDoc> {
    let mut statements = ideal_statements(id);
    if let Some(noise) = noise {
        noise.validate()?;
        let plates = statements
            .iter()
            .filter(|s| matches!(s, Statement::Element(ElementSpec::QPlate { .. })))
            .count();
        let mut k = 0;
        for s in statements.iter_mut() {
            if let Statement::Element(ElementSpec::QPlate { delta, .. }) = s {
                let sign = if *delta < 0.0 { -1.0 } else { 1.0 };
                *delta = sign * noise.plate_delta(delta.abs(), k, plates)?;
                k += 1;
            }
        }
    }
    Ok(CircuitDoc {
        name: setup_doc_name(id).to_string(),
        statements,
        ..CircuitDoc::default()
    })
}

pub fn build_setup(id: SetupId, noise: Option<&NoiseConfig>) -> Result<Circuit> {
    setup_doc(id, noise)?.build()
}

/// Photon carrying `q` in `sub`: polarization on `m = 0`, or an OAM qubit
/// written by an ideal hologram onto an `H` photon.
pub fn prepare_input(ladder: OamLadder, sub: LogicalSubspace, q: Qubit) -> Result<PhotonState> {
    match sub {
        LogicalSubspace::Polarization => make_source_state_in(ladder, q.0[0], q.0[1]),
        LogicalSubspace::Oam(order) => {
            let h0 = make_source_state_in(ladder, pol::h().0[0], pol::h().0[1])?;
            crate::elements::hologram_generate(q, order)?.apply(&h0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityRow {
    pub initial: String,
    pub expected: String,
    pub fidelity: f64,
    pub std: f64,
    pub success_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTable {
    pub setup: SetupId,
    /// 0 for exact mode.
    pub shots: u64,
    pub seed: u64,
    pub rows: Vec<FidelityRow>,
    pub conversion_efficiency: Option<f64>,
}

impl FidelityTable {
    pub fn average_fidelity(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.fidelity))
    }

    /// Standard error of the average, treating rows as independent.
    pub fn average_std(&self) -> f64 {
        let n = self.rows.len().max(1) as f64;
        self.rows.iter().map(|r| r.std * r.std).sum::<f64>().sqrt() / n
    }

    pub fn average_success_probability(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.success_probability))
    }

    /// Tab-separated rows with a header and a closing `average` line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("initial\texpected\tfidelity\tstd\tsuccess_probability\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.initial, r.expected, r.fidelity, r.std, r.success_probability
            )
            .unwrap();
        }
        writeln!(
            out,
            "average\t\t{}\t{}\t{}",
            self.average_fidelity(),
            self.average_std(),
            self.average_success_probability()
        )
        .unwrap();
        out
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Seed for table row `i`, so rows are independent of scheduling order.
pub fn row_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the six table inputs through the setup and reconstructs each output
/// qubit. `shots == 0` uses exact outcome probabilities and linear inversion;
/// otherwise counts are sampled per analyzer and reconstructed by maximum
/// likelihood, with a bootstrap standard deviation.
pub fn run_table(
    id: SetupId,
    shots: u64,
    seed: u64,
    noise: Option<&NoiseConfig>,
) -> Result<FidelityTable> {
    let doc = setup_doc(id, noise)?;
    let circuit = doc.build()?;
    let ladder = doc.ladder()?;
    let eta = noise.map(NoiseConfig::hologram_efficiency).unwrap_or(1.0);
    let (in_sub, out_sub) = (id.input_subspace(), id.output_subspace());
    let analyzers = ProjectorSet::new(out_sub).analyzers(eta)?;

    let rows: Vec<(FidelityRow, Option<f64>)> = id
        .table_inputs()
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let input = prepare_input(ladder, in_sub, in_sub.cardinal(c))?;
            let target = out_sub.cardinal(c);
            let run = run_exact(&circuit, &input)?;
            let (fid, std) = if shots == 0 {
                let p = detection_probabilities(&circuit, &input, &analyzers)?;
                let est = reconstruct_linear_from(&Frequencies::from_probabilities(&p)?)?;
                (fidelity(&est.rho, &target), 0.0)
            } else {
                let s = row_seed(seed, i);
                let record =
                    run_shots(&circuit, &input, &analyzers, shots, s)?.with_subspace(out_sub);
                let rho = reconstruct_mle(&record)?;
                let (_, std) =
                    bootstrap_fidelity(&record, &target, BOOTSTRAP_RESAMPLES, s.rotate_left(17))?;
                (fidelity(&rho, &target), std)
            };
            Ok((
                FidelityRow {
                    initial: c.ket(in_sub),
                    expected: c.ket(out_sub),
                    fidelity: fid,
                    std,
                    success_probability: run.success_probability,
                },
                run.conversion_efficiency(),
            ))
        })
        .collect::<Result<_>>()?;
    let conversion_efficiency = rows.first().and_then(|r| r.1);
    Ok(FidelityTable {
        setup: id,
        shots,
        seed,
        rows: rows.into_iter().map(|r| r.0).collect(),
        conversion_efficiency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignDetector {
    /// Setup b followed by a polarizing beam splitter.
    QPlate,
    /// One fork hologram plus fiber per sign, at the given efficiency.
    Hologram { efficiency: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorReport {
    /// Fraction of input photons registered at the correct output.
    pub efficiency: f64,
    /// Fraction of registered photons found at the wrong output.
    pub crosstalk: f64,
}

/// Sorts `|l⟩` and `|r⟩` photons by OAM sign. `shots == 0` is exact.
pub fn oam_sign_detector(kind: SignDetector, shots: u64, seed: u64) -> Result<DetectorReport> {
    let ladder = OamLadder::default();
    let o2 = LogicalSubspace::Oam(2);
    let b = build_setup(SetupId::B, None)?;
    let mut correct = 0.0;
    let mut wrong = 0.0;
    for (k, c) in [Cardinal::ZPlus, Cardinal::ZMinus].into_iter().enumerate() {
        let input = prepare_input(ladder, o2, o2.cardinal(c))?;
        let (p_right, p_wrong) = match kind {
            SignDetector::QPlate => {
                let out = run_exact(&b, &input)?;
                let ports = [
                    pbs_filter(PbsPort::TransmitH)
                        .apply(&out.final_state)?
                        .norm2(),
                    pbs_filter(PbsPort::ReflectV)
                        .apply(&out.final_state)?
                        .norm2(),
                ];
                let p = out.success_probability;
                (p * ports[k], p * ports[1 - k])
            }
            SignDetector::Hologram { efficiency } => {
                let probe = |target: Cardinal| -> Result<f64> {
                    Ok(
                        hologram_analyze_with(o2.cardinal(target), 2, efficiency, false)?
                            .apply(&input)?
                            .norm2(),
                    )
                };
                (probe(c)?, probe(c.partner())?)
            }
        };
        if shots == 0 {
            correct += p_right;
            wrong += p_wrong;
        } else {
            let n = shots as f64;
            correct += sample_binomial(shots, p_right, seed, 2 * k as u64) as f64 / n;
            wrong += sample_binomial(shots, p_wrong, seed, 2 * k as u64 + 1) as f64 / n;
        }
    }
    Ok(DetectorReport {
        efficiency: correct / 2.0,
        crosstalk: if correct + wrong > 0.0 {
            wrong / (correct + wrong)
        } else {
            0.0
        },
    })
}

/// Detection efficiency of the q-plate OAM-sign detector.
pub fn oam_sign_detector_efficiency(shots: u64, seed: u64) -> Result<f64> {
    Ok(oam_sign_detector(SignDetector::QPlate, shots, seed)?.efficiency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{overlap_up_to_phase, reduce_to_qubit};

    fn output_qubit(id: SetupId, c: Cardinal) -> (f64, f64) {
        let circuit = build_setup(id, None).unwrap();
        let input = prepare_input(
            OamLadder::default(),
            id.input_subspace(),
            id.input_subspace().cardinal(c),
        )
        .unwrap();
        let run = run_exact(&circuit, &input).unwrap();
        let (rho, _) = reduce_to_qubit(&run.final_state, id.output_subspace()).unwrap();
        (
            fidelity(&rho, &id.output_subspace().cardinal(c)),
            run.success_probability,
        )
    }

    #[test]
    fn a_sends_l_to_a() {
        let (f, p) = output_qubit(SetupId::A, Cardinal::YPlus);
        assert!((f - 1.0).abs() < 1e-12);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn d_sends_a_to_h4() {
        let (f, _) = output_qubit(SetupId::D, Cardinal::XPlus);
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c_returns_d() {
        let (f, p) = output_qubit(SetupId::C, Cardinal::XMinus);
        assert!((f - 1.0).abs() < 1e-12);
        assert!((p - 0.25).abs() < 1e-12);
    }

    #[test]
    fn det_rev_inverts_det_fwd() {
        let fwd = build_setup(SetupId::DetFwd, None).unwrap();
        let rev = build_setup(SetupId::DetRev, None).unwrap();
        let lad = OamLadder::default();
        let q = Qubit::normalized(
            crate::hilbert::c64::new(0.3, -0.1),
            crate::hilbert::c64::new(0.2, 0.9),
        )
        .unwrap();
        let input = prepare_input(lad, LogicalSubspace::Polarization, q).unwrap();
        let mid = run_exact(&fwd, &input).unwrap();
        assert!((mid.success_probability - 1.0).abs() < 1e-12);
        let back = run_exact(&rev, &mid.final_state).unwrap();
        assert!((back.success_probability - 1.0).abs() < 1e-12);
        assert!((overlap_up_to_phase(&back.final_state, &input).unwrap() - 1.0).abs() < 1e-12);
        // The programmatic adjoint agrees with the document adjoint.
        let back2 = run_exact(&fwd.adjoint(), &mid.final_state).unwrap();
        assert!(back2.final_state.max_abs_diff(&back.final_state) < 1e-12);
    }

    #[test]
    fn exact_table_a() {
        let t = run_table(SetupId::A, 0, 0, None).unwrap();
        assert_eq!(t.rows.len(), 6);
        let labels: Vec<_> = t
            .rows
            .iter()
            .map(|r| (r.initial.as_str(), r.expected.as_str()))
            .collect();
        assert_eq!(labels[0], ("|H>_pi", "|l>_o2"));
        assert_eq!(labels[5], ("|R>_pi", "|d>_o2"));
        for r in &t.rows {
            assert!((r.fidelity - 1.0).abs() < 1e-9, "{r:?}");
            assert!((r.success_probability - 0.5).abs() < 1e-10);
        }
        assert!(t.to_tsv().lines().count() == 8);
    }

    #[test]
    fn detuned_plates_report_eighty_percent() {
        let noise = NoiseConfig::uniform_conversion(0.894);
        let t = run_table(SetupId::C, 0, 0, Some(&noise)).unwrap();
        let c = t.conversion_efficiency.unwrap();
        assert!((c - 0.894 * 0.894).abs() < 1e-12, "{c}");
        assert!((c - 0.80).abs() < 0.01);
    }

    #[test]
    fn noise_toml() {
        let n = NoiseConfig::from_toml("qplate_delta = [3.0, 3.1]\nhologram_efficiency = 0.5\n")
            .unwrap();
        assert_eq!(n.qplate_delta, Some(PerPlate::Each(vec![3.0, 3.1])));
        let doc = setup_doc(SetupId::C, Some(&n)).unwrap();
        assert!(doc
            .statements
            .contains(&Statement::Element(ElementSpec::QPlate {
                q: 1.0,
                delta: 3.1
            })));
        assert!(setup_doc(SetupId::A, Some(&n)).is_err());
        assert!(NoiseConfig::from_toml("bogus = 1").is_err());
        assert!(NoiseConfig::from_toml("qplate_conversion = 1.5").is_err());
        assert!(NoiseConfig::from_toml("hologram_efficiency = 0").is_err());
    }

    #[test]
    fn sign_detector() {
        let r = oam_sign_detector(SignDetector::QPlate, 0, 0).unwrap();
        assert!((r.efficiency - 0.5).abs() < 1e-12);
        assert!(r.crosstalk.abs() < 1e-12);
        let h = oam_sign_detector(SignDetector::Hologram { efficiency: 0.12 }, 0, 0).unwrap();
        assert!((h.efficiency - 0.12).abs() < 1e-12);
        let s = oam_sign_detector_efficiency(100_000, 3).unwrap();
        assert!((s - 0.5).abs() < 0.01);
        assert_eq!(s, oam_sign_detector_efficiency(100_000, 3).unwrap());
    }

    #[test]
    fn setup_names_parse() {
        for id in SetupId::ALL {
            assert_eq!(SetupId::parse(id.name()), Some(id));
        }
        assert_eq!(SetupId::parse("DET-FWD"), Some(SetupId::DetFwd));
        assert_eq!(SetupId::parse("e"), None);
    }
}
