//! Circuits: ordered element sequences with optional Mach-Zehnder blocks,
//! exact execution with post-selection bookkeeping, and shot sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::elements::{mirror, pbs_split, Element, PbsMode};
use crate::error::{Error, Result};
use crate::hilbert::{PathMode, PhotonState, EMPTY_TOL, STRUCT_TOL};
use crate::tomography::{Analyzer, CountEntry, CountRecord};

/// Dual-rail block: polarizing split (`H → arm_a`, `V → arm_b`), one element
/// list per arm, fixed mirror reflections per arm, polarizing recombination.
///
/// Declared reflections act after the arm elements. Every reflection, and every
/// Dove prism or mirror element in an arm, flips `m → −m`; recombination is
/// only accepted when both arms flip an even number of times, unless the block
/// is marked compensated.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerBlock {
    arm_a: Vec<Element>,
    arm_b: Vec<Element>,
    reflections_a: u32,
    reflections_b: u32,
    compensated: bool,
}

impl InterferometerBlock {
    pub fn new(
        arm_a: Vec<Element>,
        arm_b: Vec<Element>,
        reflections_a: u32,
        reflections_b: u32,
        compensated: bool,
    ) -> Result<Self> {
        let block = Self {
            arm_a,
            arm_b,
            reflections_a,
            reflections_b,
            compensated,
        };
        for arm in [&block.arm_a, &block.arm_b] {
            if let Some(e) = arm
                .iter()
                .find(|e| matches!(e.action(), crate::elements::Action::PbsSplit { .. }))
            {
                return Err(Error::MalformedInterferometer(format!(
                    "`{e}` cannot be nested inside an arm"
                )));
            }
        }
        let (fa, fb) = (block.flips_a(), block.flips_b());
        if !compensated && (fa % 2 != 0 || fb % 2 != 0) {
            return Err(Error::MalformedInterferometer(format!(
                "arm OAM flip counts must both be even (arm_a {fa}, arm_b {fb})"
            )));
        }
        Ok(block)
    }

    pub fn arm_a(&self) -> &[Element] {
        &self.arm_a
    }

    pub fn arm_b(&self) -> &[Element] {
        &self.arm_b
    }

    pub fn reflections(&self) -> (u32, u32) {
        (self.reflections_a, self.reflections_b)
    }

    pub fn compensated(&self) -> bool {
        self.compensated
    }

    pub fn flips_a(&self) -> u32 {
        self.reflections_a + self.arm_a.iter().map(Element::oam_flips).sum::<u32>()
    }

    pub fn flips_b(&self) -> u32 {
        self.reflections_b + self.arm_b.iter().map(Element::oam_flips).sum::<u32>()
    }

    pub fn apply(&self, state: &PhotonState) -> Result<PhotonState> {
        let mut s = pbs_split(PbsMode::Entry).apply(state)?;
        for (path, arm, refl) in [
            (PathMode::ArmA, &self.arm_a, self.reflections_a),
            (PathMode::ArmB, &self.arm_b, self.reflections_b),
        ] {
            for e in arm {
                s = e.apply_on_path(&s, path)?;
            }
            if refl % 2 == 1 {
                s = mirror().apply_on_path(&s, path)?;
            }
        }
        pbs_split(PbsMode::Exit).apply(&s)
    }

    /// The same block traversed backwards. Odd reflection parity moves to the
    /// front of each arm as an explicit mirror.
    pub fn adjoint(&self) -> Self {
        let rev = |arm: &[Element], refl: u32| {
            let mut out: Vec<Element> = Vec::with_capacity(arm.len() + 1);
            if refl % 2 == 1 {
                out.push(mirror());
            }
            out.extend(arm.iter().rev().map(Element::adjoint));
            out
        };
        Self {
            arm_a: rev(&self.arm_a, self.reflections_a),
            arm_b: rev(&self.arm_b, self.reflections_b),
            reflections_a: self.reflections_a - self.reflections_a % 2,
            reflections_b: self.reflections_b - self.reflections_b % 2,
            compensated: self.compensated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Element(Element),
    Interferometer(InterferometerBlock),
}

impl Stage {
    pub fn label(&self) -> String {
        match self {
            Stage::Element(e) => e.name().to_string(),
            Stage::Interferometer(_) => "mach_zehnder".to_string(),
        }
    }

    fn apply(&self, state: &PhotonState) -> Result<PhotonState> {
        match self {
            Stage::Element(e) => e.apply(state),
            Stage::Interferometer(b) => b.apply(state),
        }
    }

    fn adjoint(&self) -> Stage {
        match self {
            Stage::Element(e) => Stage::Element(e.adjoint()),
            Stage::Interferometer(b) => Stage::Interferometer(b.adjoint()),
        }
    }

    fn conversion_fraction(&self) -> Option<f64> {
        match self {
            Stage::Element(e) => e.conversion_fraction(),
            Stage::Interferometer(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    label: String,
    stages: Vec<Stage>,
}

impl Circuit {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            stages: Vec::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn push(&mut self, e: Element) -> &mut Self {
        self.stages.push(Stage::Element(e));
        self
    }

    pub fn push_block(&mut self, b: InterferometerBlock) -> &mut Self {
        self.stages.push(Stage::Interferometer(b));
        self
    }

    pub fn with(mut self, e: Element) -> Self {
        self.push(e);
        self
    }

    /// `self` followed by `other`.
    pub fn then(mut self, other: &Circuit) -> Self {
        self.stages.extend(other.stages.iter().cloned());
        self
    }

    /// Reversed stage order with every stage replaced by its adjoint.
    pub fn adjoint(&self) -> Self {
        Self {
            label: format!("{}^dagger", self.label),
            stages: self.stages.iter().rev().map(Stage::adjoint).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// The circuit's linear map, without normalization checks.
    pub fn apply(&self, state: &PhotonState) -> Result<PhotonState> {
        self.stages
            .iter()
            .try_fold(state.clone(), |s, stage| stage.apply(&s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub label: String,
    pub norm2: f64,
    /// `sin²(δ/2)` for q-plate stages.
    pub conversion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Normalized output; the zero state when nothing survived.
    pub final_state: PhotonState,
    pub success_probability: f64,
    pub null_output: bool,
    pub stage_trace: Vec<StageRecord>,
}

impl RunResult {
    /// Product of the q-plate conversion fractions met along the circuit.
    pub fn conversion_efficiency(&self) -> Option<f64> {
        let mut fractions = self
            .stage_trace
            .iter()
            .filter_map(|r| r.conversion)
            .peekable();
        fractions.peek()?;
        Some(fractions.product())
    }
}

pub fn run_exact(circuit: &Circuit, input: &PhotonState) -> Result<RunResult> {
    if (input.norm2() - 1.0).abs() > STRUCT_TOL {
        return Err(Error::NotNormalized {
            norm2: input.norm2(),
        });
    }
    let mut state = input.clone();
    let mut trace = Vec::with_capacity(circuit.stages.len());
    for stage in &circuit.stages {
        state = stage.apply(&state)?;
        trace.push(StageRecord {
            label: stage.label(),
            norm2: state.norm2(),
            conversion: stage.conversion_fraction(),
        });
    }
    let p = state.norm2().min(1.0);
    let (final_state, null_output) = match state.normalized() {
        Some(s) if p > EMPTY_TOL * EMPTY_TOL => (s, false),
        _ => (PhotonState::zero(state.ladder()), true),
    };
    Ok(RunResult {
        final_state,
        success_probability: if null_output { 0.0 } else { p },
        null_output,
        stage_trace: trace,
    })
}

/// Exact detection probability of each analyzer on the circuit output,
/// including the circuit's own success probability.
pub fn detection_probabilities(
    circuit: &Circuit,
    input: &PhotonState,
    analyzers: &[Analyzer],
) -> Result<Vec<f64>> {
    if analyzers.is_empty() {
        return Err(Error::EmptyAnalyzers);
    }
    let run = run_exact(circuit, input)?;
    analyzers
        .iter()
        .map(|a| {
            if run.null_output {
                return Ok(0.0);
            }
            let q = a.element.apply(&run.final_state)?.norm2();
            Ok((q * run.success_probability).clamp(0.0, 1.0))
        })
        .collect()
}

/// Draws independent binomial counts per analyzer. Analyzer `i` uses ChaCha
/// stream `i` of `seed`, so results do not depend on evaluation order.
pub fn run_shots(
    circuit: &Circuit,
    input: &PhotonState,
    analyzers: &[Analyzer],
    shots: u64,
    seed: u64,
) -> Result<CountRecord> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    let probs = detection_probabilities(circuit, input, analyzers)?;
    let entries = analyzers
        .par_iter()
        .zip(probs.par_iter())
        .enumerate()
        .map(|(i, (a, &p))| {
            let counts = sample_binomial(shots, p, seed, i as u64);
            CountEntry {
                label: a.label.clone(),
                counts,
                shots,
            }
        })
        .collect();
    Ok(CountRecord {
        subspace: None,
        seed,
        entries,
    })
}

pub(crate) fn sample_binomial(n: u64, p: f64, seed: u64, stream: u64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Binomial::new(n, p)
        .expect("probability in (0, 1)")
        .sample(&mut rng)
}
