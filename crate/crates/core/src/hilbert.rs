//! Single-photon states on the composite path ⊗ polarization ⊗ OAM space.
//!
//! Amplitudes are stored densely over `3 × 2 × (2·m_max + 1)` entries,
//! ordered path-major, then polarization (`H`, `V`), then OAM from `-m_max`
//! to `+m_max`. Polarization kets use `L = (H + iV)/√2`, `R = (H − iV)/√2`,
//! `A = (H + V)/√2` and `D = (H − V)/√2`. Inside an OAM subspace of order
//! `|m|` the logical basis is `l = |+|m|⟩`, `r = |−|m|⟩`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(non_camel_case_types)]
pub type c64 = Complex64;

/// Structural tolerance used for normalization, hermiticity and trace checks.
pub const STRUCT_TOL: f64 = 1e-10;
/// Probability mass below which a subspace is considered empty.
pub const EMPTY_TOL: f64 = 1e-12;
/// Slack allowed on `norm2 ≤ 1`.
pub const NORM_EPS: f64 = 1e-12;
/// Default OAM truncation bound: the largest index any scheme reaches (|m| = 4)
/// plus one q-plate step.
pub const DEFAULT_M_MAX: usize = 6;
/// Smallest accepted truncation bound.
pub const MIN_M_MAX: usize = 4;

pub(crate) const ZERO: c64 = c64::new(0.0, 0.0);
pub(crate) const ONE: c64 = c64::new(1.0, 0.0);
pub(crate) const I: c64 = c64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pol {
    H = 0,
    V = 1,
}

impl Pol {
    pub const ALL: [Pol; 2] = [Pol::H, Pol::V];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathMode {
    Single = 0,
    ArmA = 1,
    ArmB = 2,
}

impl PathMode {
    pub const ALL: [PathMode; 3] = [PathMode::Single, PathMode::ArmA, PathMode::ArmB];

    pub fn name(self) -> &'static str {
        match self {
            PathMode::Single => "single",
            PathMode::ArmA => "arm_a",
            PathMode::ArmB => "arm_b",
        }
    }
}

/// Truncated OAM ladder `m ∈ {−m_max, …, +m_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OamLadder {
    m_max: usize,
}

impl OamLadder {
    pub fn new(m_max: usize) -> Result<Self> {
        if m_max < MIN_M_MAX {
            return Err(Error::InvalidParameter(format!(
                "m_max must be at least {MIN_M_MAX}, got {m_max}"
            )));
        }
        Ok(Self { m_max })
    }

    pub fn m_max(self) -> usize {
        self.m_max
    }

    /// Number of OAM levels.
    pub fn levels(self) -> usize {
        2 * self.m_max + 1
    }

    pub fn contains(self, m: i64) -> bool {
        m.unsigned_abs() as usize <= self.m_max
    }

    pub fn offset(self, m: i64) -> Option<usize> {
        self.contains(m).then(|| (m + self.m_max as i64) as usize)
    }

    pub fn m_at(self, offset: usize) -> i64 {
        offset as i64 - self.m_max as i64
    }

    pub fn iter(self) -> impl Iterator<Item = i64> {
        let m = self.m_max as i64;
        -m..=m
    }
}

impl Default for OamLadder {
    fn default() -> Self {
        Self {
            m_max: DEFAULT_M_MAX,
        }
    }
}

/// A pure state of a logical qubit, written in the subspace's logical basis:
/// `{H, V}` for polarization, `{l, r}` for an OAM subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit(pub [c64; 2]);

impl Qubit {
    pub fn new(c0: c64, c1: c64) -> Result<Self> {
        let q = Qubit([c0, c1]);
        let n = q.norm2();
        if (n - 1.0).abs() > STRUCT_TOL {
            return Err(Error::NotNormalized { norm2: n });
        }
        Ok(q)
    }

    /// Normalizes an arbitrary non-zero pair.
    pub fn normalized(c0: c64, c1: c64) -> Result<Self> {
        let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if n < EMPTY_TOL {
            return Err(Error::NotNormalized { norm2: n * n });
        }
        Ok(Qubit([c0 / n, c1 / n]))
    }

    pub fn norm2(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    pub fn inner(&self, other: &Qubit) -> c64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }

    /// `|⟨a|b⟩|²` for normalized states; insensitive to global phase.
    pub fn overlap(&self, other: &Qubit) -> f64 {
        self.inner(other).norm_sqr() / (self.norm2() * other.norm2())
    }

    pub fn cardinal(c: Cardinal, sub: LogicalSubspace) -> Qubit {
        let s = FRAC_1_SQRT_2;
        match sub {
            LogicalSubspace::Polarization => match c {
                Cardinal::ZPlus => Qubit([ONE, ZERO]),
                Cardinal::ZMinus => Qubit([ZERO, ONE]),
                Cardinal::XPlus => Qubit([ONE * s, ONE * s]),
                Cardinal::XMinus => Qubit([ONE * s, -ONE * s]),
                Cardinal::YPlus => Qubit([ONE * s, I * s]),
                Cardinal::YMinus => Qubit([ONE * s, -I * s]),
            },
            // OAM analogs keep the phases of their defining expressions.
            LogicalSubspace::Oam(_) => match c {
                Cardinal::ZPlus => Qubit([ONE, ZERO]),
                Cardinal::ZMinus => Qubit([ZERO, ONE]),
                Cardinal::XPlus => Qubit([ONE * s, ONE * s]),
                // (l − r)/(i√2)
                Cardinal::XMinus => Qubit([-I * s, I * s]),
                // e^{−iπ/4}(l + i r)/√2
                Cardinal::YPlus => {
                    let p = c64::from_polar(s, -FRAC_PI_4);
                    Qubit([p, p * I])
                }
                // e^{iπ/4}(l − i r)/√2
                Cardinal::YMinus => {
                    let p = c64::from_polar(s, FRAC_PI_4);
                    Qubit([p, -p * I])
                }
            },
        }
    }
}

/// The six eigenstates of the three Pauli operators on a logical qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cardinal {
    ZPlus,
    ZMinus,
    XPlus,
    XMinus,
    YPlus,
    YMinus,
}

impl Cardinal {
    pub const ALL: [Cardinal; 6] = [
        Cardinal::ZPlus,
        Cardinal::ZMinus,
        Cardinal::XPlus,
        Cardinal::XMinus,
        Cardinal::YPlus,
        Cardinal::YMinus,
    ];

    /// Letter used in the lab notation: `H V A D L R` for polarization,
    /// `l r h v a d` for OAM.
    pub fn letter(self, sub: LogicalSubspace) -> char {
        let upper = match self {
            Cardinal::ZPlus => 'H',
            Cardinal::ZMinus => 'V',
            Cardinal::XPlus => 'A',
            Cardinal::XMinus => 'D',
            Cardinal::YPlus => 'L',
            Cardinal::YMinus => 'R',
        };
        match sub {
            LogicalSubspace::Polarization => upper,
            LogicalSubspace::Oam(_) => match self {
                Cardinal::ZPlus => 'l',
                Cardinal::ZMinus => 'r',
                Cardinal::XPlus => 'h',
                Cardinal::XMinus => 'v',
                Cardinal::YPlus => 'a',
                Cardinal::YMinus => 'd',
            },
        }
    }

    /// Ket notation, e.g. `|H>_pi` or `|a>_o2`.
    pub fn ket(self, sub: LogicalSubspace) -> String {
        format!("|{}>_{}", self.letter(sub), sub.tag())
    }

    pub fn from_pol_letter(c: char) -> Option<Cardinal> {
        Some(match c {
            'H' => Cardinal::ZPlus,
            'V' => Cardinal::ZMinus,
            'A' => Cardinal::XPlus,
            'D' => Cardinal::XMinus,
            'L' => Cardinal::YPlus,
            'R' => Cardinal::YMinus,
            _ => return None,
        })
    }

    pub fn from_oam_letter(c: char) -> Option<Cardinal> {
        Some(match c {
            'l' => Cardinal::ZPlus,
            'r' => Cardinal::ZMinus,
            'h' => Cardinal::XPlus,
            'v' => Cardinal::XMinus,
            'a' => Cardinal::YPlus,
            'd' => Cardinal::YMinus,
            _ => return None,
        })
    }

    /// The orthogonal partner within the same basis pair.
    pub fn partner(self) -> Cardinal {
        match self {
            Cardinal::ZPlus => Cardinal::ZMinus,
            Cardinal::ZMinus => Cardinal::ZPlus,
            Cardinal::XPlus => Cardinal::XMinus,
            Cardinal::XMinus => Cardinal::XPlus,
            Cardinal::YPlus => Cardinal::YMinus,
            Cardinal::YMinus => Cardinal::YPlus,
        }
    }
}

/// Named polarization states.
pub mod pol {
    use super::{Cardinal, LogicalSubspace, Qubit};

    pub fn h() -> Qubit {
        Qubit::cardinal(Cardinal::ZPlus, LogicalSubspace::Polarization)
    }
    pub fn v() -> Qubit {
        Qubit::cardinal(Cardinal::ZMinus, LogicalSubspace::Polarization)
    }
    pub fn a() -> Qubit {
        Qubit::cardinal(Cardinal::XPlus, LogicalSubspace::Polarization)
    }
    pub fn d() -> Qubit {
        Qubit::cardinal(Cardinal::XMinus, LogicalSubspace::Polarization)
    }
    pub fn l() -> Qubit {
        Qubit::cardinal(Cardinal::YPlus, LogicalSubspace::Polarization)
    }
    pub fn r() -> Qubit {
        Qubit::cardinal(Cardinal::YMinus, LogicalSubspace::Polarization)
    }
}

/// Which two-dimensional subspace carries the logical qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicalSubspace {
    Polarization,
    /// OAM subspace `{|+order⟩, |−order⟩}`.
    Oam(u32),
}

impl LogicalSubspace {
    /// Short tag: `pi`, `o2`, `o4`, ...
    pub fn tag(self) -> String {
        match self {
            LogicalSubspace::Polarization => "pi".to_string(),
            LogicalSubspace::Oam(order) => format!("o{order}"),
        }
    }

    pub fn parse_tag(s: &str) -> Option<Self> {
        match s {
            "pi" | "pol" => Some(LogicalSubspace::Polarization),
            _ => {
                let rest = s.strip_prefix("oam").or_else(|| s.strip_prefix('o'))?;
                let order: u32 = rest.parse().ok()?;
                (order > 0).then_some(LogicalSubspace::Oam(order))
            }
        }
    }

    pub fn cardinal(self, c: Cardinal) -> Qubit {
        Qubit::cardinal(c, self)
    }
}

impl fmt::Display for LogicalSubspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// Dense single-photon amplitude vector.
///
/// `norm2` is at most one; the deficit is the probability discarded by
/// post-selecting elements upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonState {
    ladder: OamLadder,
    amps: Vec<c64>,
    norm2: f64,
}

impl PhotonState {
    pub fn zero(ladder: OamLadder) -> Self {
        Self {
            ladder,
            amps: vec![ZERO; 6 * ladder.levels()],
            norm2: 0.0,
        }
    }

    pub fn from_amplitudes(ladder: OamLadder, amps: Vec<c64>) -> Result<Self> {
        let expected = 6 * ladder.levels();
        if amps.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "expected {expected} amplitudes, got {}",
                amps.len()
            )));
        }
        let norm2 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm2 > 1.0 + NORM_EPS {
            return Err(Error::NotNormalized { norm2 });
        }
        Ok(Self {
            ladder,
            amps,
            norm2,
        })
    }

    /// Builds a state from amplitudes without the `norm2 ≤ 1` check. Used for
    /// linear combinations in tests of linearity.
    pub fn from_amplitudes_unbounded(ladder: OamLadder, amps: Vec<c64>) -> Self {
        assert_eq!(amps.len(), 6 * ladder.levels());
        let norm2 = amps.iter().map(|a| a.norm_sqr()).sum();
        Self {
            ladder,
            amps,
            norm2,
        }
    }

    pub fn basis(ladder: OamLadder, path: PathMode, pol: Pol, m: i64) -> Result<Self> {
        let mut s = Self::zero(ladder);
        let idx = s
            .index(path, pol, m)
            .ok_or_else(|| Error::TruncationOverflow {
                element: "basis".into(),
                m,
                m_max: ladder.m_max(),
            })?;
        s.amps[idx] = ONE;
        s.norm2 = 1.0;
        Ok(s)
    }

    /// `pol ⊗ oam` on the single path, with the OAM qubit spread over
    /// `{|+order⟩, |−order⟩}`.
    pub fn product(ladder: OamLadder, pol: Qubit, order: u32, oam: Qubit) -> Result<Self> {
        let o = order as i64;
        if !ladder.contains(o) {
            return Err(Error::TruncationOverflow {
                element: "product".into(),
                m: o,
                m_max: ladder.m_max(),
            });
        }
        let mut amps = vec![ZERO; 6 * ladder.levels()];
        for p in Pol::ALL {
            let cp = pol.0[p as usize];
            let base = Self::slab_base(ladder, PathMode::Single) + p as usize * ladder.levels();
            if order == 0 {
                amps[base + ladder.offset(0).unwrap()] += cp * (oam.0[0] + oam.0[1]);
            } else {
                amps[base + ladder.offset(o).unwrap()] += cp * oam.0[0];
                amps[base + ladder.offset(-o).unwrap()] += cp * oam.0[1];
            }
        }
        Self::from_amplitudes(ladder, amps)
    }

    /// Polarization qubit at `m = 0` on the single path.
    pub fn polarization(ladder: OamLadder, pol: Qubit) -> Self {
        let mut s = Self::zero(ladder);
        let z = ladder.offset(0).unwrap();
        for p in Pol::ALL {
            let i = Self::slab_base(ladder, PathMode::Single) + p as usize * ladder.levels() + z;
            s.amps[i] = pol.0[p as usize];
        }
        s.norm2 = pol.norm2();
        s
    }

    pub fn ladder(&self) -> OamLadder {
        self.ladder
    }

    pub fn m_max(&self) -> usize {
        self.ladder.m_max()
    }

    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<c64> {
        self.amps
    }

    pub fn index(&self, path: PathMode, pol: Pol, m: i64) -> Option<usize> {
        let off = self.ladder.offset(m)?;
        Some(Self::slab_base(self.ladder, path) + pol as usize * self.ladder.levels() + off)
    }

    pub fn amp(&self, path: PathMode, pol: Pol, m: i64) -> c64 {
        self.index(path, pol, m).map_or(ZERO, |i| self.amps[i])
    }

    pub(crate) fn slab_base(ladder: OamLadder, path: PathMode) -> usize {
        path as usize * 2 * ladder.levels()
    }

    /// Amplitudes of one path: `[H levels..., V levels...]`.
    pub fn path_slab(&self, path: PathMode) -> &[c64] {
        let n = 2 * self.ladder.levels();
        let b = Self::slab_base(self.ladder, path);
        &self.amps[b..b + n]
    }

    pub fn path_norm2(&self, path: PathMode) -> f64 {
        self.path_slab(path).iter().map(|a| a.norm_sqr()).sum()
    }

    /// Squared norm of amplitude outside the given OAM level.
    pub fn norm2_outside_level(&self, m: i64) -> f64 {
        let mut total = 0.0;
        for path in PathMode::ALL {
            for pol in Pol::ALL {
                for k in self.ladder.iter().filter(|&k| k != m) {
                    total += self.amp(path, pol, k).norm_sqr();
                }
            }
        }
        total
    }

    /// Returns the state rescaled to unit norm, or `None` for the null state.
    pub fn normalized(&self) -> Option<Self> {
        if self.norm2 < EMPTY_TOL * EMPTY_TOL {
            return None;
        }
        let s = 1.0 / self.norm2.sqrt();
        Some(Self {
            ladder: self.ladder,
            amps: self.amps.iter().map(|a| a * s).collect(),
            norm2: 1.0,
        })
    }

    pub fn scaled(&self, k: c64) -> Self {
        Self::from_amplitudes_unbounded(self.ladder, self.amps.iter().map(|a| a * k).collect())
    }

    /// `self + other`, without a norm bound.
    pub fn added(&self, other: &Self) -> Result<Self> {
        check_same(self, other)?;
        Ok(Self::from_amplitudes_unbounded(
            self.ladder,
            self.amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    /// Largest absolute amplitude difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Non-zero amplitudes as `(path, pol, m, amplitude)`.
    pub fn support(&self, threshold: f64) -> Vec<(PathMode, Pol, i64, c64)> {
        let mut out = Vec::new();
        for path in PathMode::ALL {
            for pol in Pol::ALL {
                for m in self.ladder.iter() {
                    let a = self.amp(path, pol, m);
                    if a.norm() > threshold {
                        out.push((path, pol, m, a));
                    }
                }
            }
        }
        out
    }
}

fn check_same(a: &PhotonState, b: &PhotonState) -> Result<()> {
    if a.ladder != b.ladder {
        return Err(Error::DimensionMismatch {
            left: a.m_max(),
            right: b.m_max(),
        });
    }
    Ok(())
}

/// Source photon `(α|H⟩ + β|V⟩)|0⟩` at the default truncation.
pub fn make_source_state(alpha: c64, beta: c64) -> Result<PhotonState> {
    make_source_state_in(OamLadder::default(), alpha, beta)
}

pub fn make_source_state_in(ladder: OamLadder, alpha: c64, beta: c64) -> Result<PhotonState> {
    let q = Qubit::new(alpha, beta)?;
    Ok(PhotonState::polarization(ladder, q))
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner(a: &PhotonState, b: &PhotonState) -> Result<c64> {
    check_same(a, b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`: one for states equal up to global phase.
pub fn overlap_up_to_phase(a: &PhotonState, b: &PhotonState) -> Result<f64> {
    let ip = inner(a, b)?;
    let d = a.norm2() * b.norm2();
    if d < EMPTY_TOL * EMPTY_TOL {
        return Err(Error::EmptySubspace { weight: d });
    }
    Ok(ip.norm_sqr() / d)
}

/// Projects the single-path part of `state` onto a logical qubit subspace.
///
/// For the polarization subspace the OAM is traced out; for an OAM subspace
/// the polarization is traced out and only `m = ±order` survives. Returns the
/// normalized 2×2 density matrix and the probability mass found in the
/// subspace.
pub fn reduce_to_qubit(state: &PhotonState, sub: LogicalSubspace) -> Result<(DensityMatrix2, f64)> {
    let mut rho = [[ZERO; 2]; 2];
    let mut add = |v: [c64; 2]| {
        for i in 0..2 {
            for j in 0..2 {
                rho[i][j] += v[i] * v[j].conj();
            }
        }
    };
    match sub {
        LogicalSubspace::Polarization => {
            for m in state.ladder.iter() {
                add([
                    state.amp(PathMode::Single, Pol::H, m),
                    state.amp(PathMode::Single, Pol::V, m),
                ]);
            }
        }
        LogicalSubspace::Oam(order) => {
            let o = order as i64;
            for p in Pol::ALL {
                add([
                    state.amp(PathMode::Single, p, o),
                    state.amp(PathMode::Single, p, -o),
                ]);
            }
        }
    }
    let weight = (rho[0][0] + rho[1][1]).re;
    if weight < EMPTY_TOL {
        return Err(Error::EmptySubspace { weight });
    }
    for row in rho.iter_mut() {
        for x in row.iter_mut() {
            *x /= weight;
        }
    }
    Ok((DensityMatrix2::new(rho)?, weight))
}

/// Recognizes a single-path state that is a polarization qubit at `m = 0`,
/// or an OAM qubit on `±k` carried by one polarization. Returns the subspace,
/// the (unnormalized) qubit and, for OAM, the carrier polarization.
pub fn describe_logical(state: &PhotonState) -> Option<(LogicalSubspace, Qubit, Option<Pol>)> {
    let total = state.norm2();
    if total < EMPTY_TOL || state.path_norm2(PathMode::Single) < total - STRUCT_TOL {
        return None;
    }
    let support = state.support(1e-12);
    if support.iter().all(|&(_, _, m, _)| m == 0) {
        let q = Qubit([
            state.amp(PathMode::Single, Pol::H, 0),
            state.amp(PathMode::Single, Pol::V, 0),
        ]);
        return Some((LogicalSubspace::Polarization, q, None));
    }
    let (_, p0, m0, _) = support[0];
    let k = m0.unsigned_abs();
    if k == 0
        || !support
            .iter()
            .all(|&(_, p, m, _)| p == p0 && m.unsigned_abs() == k)
    {
        return None;
    }
    let q = Qubit([
        state.amp(PathMode::Single, p0, k as i64),
        state.amp(PathMode::Single, p0, -(k as i64)),
    ]);
    Some((LogicalSubspace::Oam(k as u32), q, Some(p0)))
}

/// `F = ⟨ψ|ρ|ψ⟩`.
pub fn fidelity(rho: &DensityMatrix2, psi: &Qubit) -> f64 {
    rho.expectation(psi)
}

pub type Mat2 = [[c64; 2]; 2];

/// Density matrix of a logical qubit.
///
/// [`DensityMatrix2::new`] enforces hermiticity, unit trace and positivity.
/// Linear-inversion estimates can be unphysical; those are built with
/// [`DensityMatrix2::new_unchecked_psd`] and flagged by [`is_physical`].
///
/// [`is_physical`]: DensityMatrix2::is_physical
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2 {
    m: Mat2,
}

impl DensityMatrix2 {
    pub fn new(m: Mat2) -> Result<Self> {
        let rho = Self::new_unchecked_psd(m)?;
        let (lo, _) = rho.eigenvalues();
        if lo < -STRUCT_TOL {
            return Err(Error::InvalidParameter(format!(
                "density matrix has negative eigenvalue {lo:e}"
            )));
        }
        Ok(rho)
    }

    /// Checks hermiticity and trace only.
    pub fn new_unchecked_psd(m: Mat2) -> Result<Self> {
        let herm = (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs())
            .max(m[1][1].im.abs());
        if herm > STRUCT_TOL {
            return Err(Error::InvalidParameter(format!(
                "matrix is not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = m[0][0].re + m[1][1].re;
        if (tr - 1.0).abs() > STRUCT_TOL {
            return Err(Error::InvalidParameter(format!(
                "trace is {tr}, expected 1"
            )));
        }
        // Symmetrize exactly.
        let off = (m[0][1] + m[1][0].conj()) * 0.5;
        Ok(Self {
            m: [
                [c64::new(m[0][0].re, 0.0), off],
                [off.conj(), c64::new(m[1][1].re, 0.0)],
            ],
        })
    }

    pub fn pure(q: &Qubit) -> Self {
        let n = q.norm2();
        let mut m = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = q.0[i] * q.0[j].conj() / n;
            }
        }
        Self { m }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            m: [[ONE * 0.5, ZERO], [ZERO, ONE * 0.5]],
        }
    }

    /// `ρ = ½(I + s_x σ_x + s_y σ_y + s_z σ_z)`; positivity is not enforced.
    pub fn from_stokes(s: [f64; 3]) -> Self {
        let [x, y, z] = s;
        Self {
            m: [
                [c64::new(0.5 * (1.0 + z), 0.0), c64::new(0.5 * x, -0.5 * y)],
                [c64::new(0.5 * x, 0.5 * y), c64::new(0.5 * (1.0 - z), 0.0)],
            ],
        }
    }

    pub fn stokes(&self) -> [f64; 3] {
        [
            2.0 * self.m[1][0].re,
            2.0 * self.m[1][0].im,
            self.m[0][0].re - self.m[1][1].re,
        ]
    }

    pub fn entries(&self) -> &Mat2 {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0].re + self.m[1][1].re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let half = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + self.m[0][1].norm_sqr()).sqrt();
        (half - r, half + r)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().0
    }

    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue() >= -STRUCT_TOL
    }

    /// Closest physical state in the Bloch ball: the Stokes vector is shrunk
    /// to unit length when it lies outside.
    pub fn project_physical(&self) -> Self {
        let s = self.stokes();
        let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        if n <= 1.0 {
            *self
        } else {
            Self::from_stokes([s[0] / n, s[1] / n, s[2] / n])
        }
    }

    pub fn expectation(&self, psi: &Qubit) -> f64 {
        let v = psi.0;
        let mut acc = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                acc += v[i].conj() * self.m[i][j] * v[j];
            }
        }
        acc.re / psi.norm2()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: c64, b: c64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn derived_polarizations_are_orthonormal() {
        for q in [pol::l(), pol::r(), pol::a(), pol::d()] {
            assert!((q.norm2() - 1.0).abs() < 1e-15);
        }
        assert!(pol::l().inner(&pol::r()).norm() < 1e-15);
        assert!(pol::a().inner(&pol::d()).norm() < 1e-15);
    }

    #[test]
    fn cardinal_sets_are_mutually_unbiased() {
        for sub in [LogicalSubspace::Polarization, LogicalSubspace::Oam(2)] {
            for x in Cardinal::ALL {
                for y in Cardinal::ALL {
                    let o = sub.cardinal(x).overlap(&sub.cardinal(y));
                    let expected = if x == y {
                        1.0
                    } else if x.partner() == y {
                        0.0
                    } else {
                        0.5
                    };
                    assert!((o - expected).abs() < 1e-12, "{x:?} {y:?} {sub}");
                }
            }
        }
    }

    #[test]
    fn oam_a_matches_both_defining_forms() {
        let sub = LogicalSubspace::Oam(2);
        let h = sub.cardinal(Cardinal::XPlus);
        let v = sub.cardinal(Cardinal::XMinus);
        let s = FRAC_1_SQRT_2;
        let a = sub.cardinal(Cardinal::YPlus);
        let d = sub.cardinal(Cardinal::YMinus);
        for k in 0..2 {
            assert!(close(a.0[k], (h.0[k] + v.0[k]) * s));
            assert!(close(d.0[k], (h.0[k] - v.0[k]) * s));
        }
    }

    #[test]
    fn source_state_examples() {
        let s = FRAC_1_SQRT_2;
        let h = make_source_state(ONE, ZERO).unwrap();
        assert_eq!(h.amp(PathMode::Single, Pol::H, 0), ONE);
        assert_eq!(h.norm2(), 1.0);

        let a = make_source_state(ONE * s, ONE * s).unwrap();
        let expected = PhotonState::polarization(OamLadder::default(), pol::a());
        assert!(a.max_abs_diff(&expected) < 1e-15);

        let l = make_source_state(ONE * s, I * s).unwrap();
        let expected = PhotonState::polarization(OamLadder::default(), pol::l());
        assert!(l.max_abs_diff(&expected) < 1e-15);

        assert!(matches!(
            make_source_state(ONE, ONE),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn inner_examples() {
        let lad = OamLadder::default();
        let h0 = PhotonState::basis(lad, PathMode::Single, Pol::H, 0).unwrap();
        assert_eq!(inner(&h0, &h0).unwrap(), ONE);
        let hp = PhotonState::basis(lad, PathMode::Single, Pol::H, 2).unwrap();
        let hm = PhotonState::basis(lad, PathMode::Single, Pol::H, -2).unwrap();
        assert_eq!(inner(&hp, &hm).unwrap(), ZERO);

        // h = (l + r)/√2, so ⟨h|l⟩ = 1/√2.
        let sub = LogicalSubspace::Oam(2);
        let h = PhotonState::product(lad, pol::h(), 2, sub.cardinal(Cardinal::XPlus)).unwrap();
        let l = PhotonState::product(lad, pol::h(), 2, sub.cardinal(Cardinal::ZPlus)).unwrap();
        assert!((inner(&h, &l).unwrap() - ONE * FRAC_1_SQRT_2).norm() < 1e-15);

        let other = PhotonState::zero(OamLadder::new(8).unwrap());
        assert!(matches!(
            inner(&h0, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reduce_examples() {
        let lad = OamLadder::default();
        let sub = LogicalSubspace::Oam(2);
        let h = sub.cardinal(Cardinal::XPlus);
        let st = PhotonState::product(lad, pol::h(), 2, h).unwrap();
        let (rho, w) = reduce_to_qubit(&st, sub).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        assert!(rho.max_abs_diff(&DensityMatrix2::pure(&h)) < 1e-12);

        let h0 = PhotonState::basis(lad, PathMode::Single, Pol::H, 0).unwrap();
        assert!(matches!(
            reduce_to_qubit(&h0, sub),
            Err(Error::EmptySubspace { .. })
        ));

        // α|H,+2⟩ + β|V,0⟩ → |l⟩⟨l| with weight |α|².
        let (alpha, beta) = (c64::new(0.6, 0.0), c64::new(0.0, 0.8));
        let mut amps = vec![ZERO; 6 * lad.levels()];
        amps[h0.index(PathMode::Single, Pol::H, 2).unwrap()] = alpha;
        amps[h0.index(PathMode::Single, Pol::V, 0).unwrap()] = beta;
        let st = PhotonState::from_amplitudes(lad, amps).unwrap();
        let (rho, w) = reduce_to_qubit(&st, sub).unwrap();
        assert!((w - 0.36).abs() < 1e-12);
        assert!(rho.max_abs_diff(&DensityMatrix2::pure(&sub.cardinal(Cardinal::ZPlus))) < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let sub = LogicalSubspace::Oam(2);
        let l = sub.cardinal(Cardinal::ZPlus);
        let r = sub.cardinal(Cardinal::ZMinus);
        let rho = DensityMatrix2::pure(&l);
        assert!((fidelity(&rho, &l) - 1.0).abs() < 1e-15);
        assert!(fidelity(&rho, &r).abs() < 1e-15);
        let mixed = DensityMatrix2::maximally_mixed();
        for c in Cardinal::ALL {
            assert!((fidelity(&mixed, &sub.cardinal(c)) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix2::new([[ONE, ONE], [ZERO, ZERO]]).is_err());
        assert!(DensityMatrix2::new([[ONE, ZERO], [ZERO, ONE]]).is_err());
        let bad = DensityMatrix2::from_stokes([0.0, 0.0, 1.5]);
        assert!(!bad.is_physical());
        assert!(DensityMatrix2::new(*bad.entries()).is_err());
        let p = bad.project_physical();
        assert!(p.is_physical());
        assert!((p.stokes()[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stokes_round_trip() {
        let s = [0.3, -0.2, 0.5];
        let back = DensityMatrix2::from_stokes(s).stokes();
        for k in 0..3 {
            assert!((s[k] - back[k]).abs() < 1e-15);
        }
        // Stokes of L along +y, with L = (H + iV)/√2.
        let y = DensityMatrix2::pure(&pol::l()).stokes();
        assert!((y[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ladder_bounds() {
        assert!(OamLadder::new(3).is_err());
        let lad = OamLadder::new(4).unwrap();
        assert_eq!(lad.levels(), 9);
        assert_eq!(lad.offset(-4), Some(0));
        assert_eq!(lad.offset(5), None);
    }

    #[test]
    fn subspace_tags() {
        assert_eq!(
            LogicalSubspace::parse_tag("o4"),
            Some(LogicalSubspace::Oam(4))
        );
        assert_eq!(
            LogicalSubspace::parse_tag("oam2"),
            Some(LogicalSubspace::Oam(2))
        );
        assert_eq!(
            LogicalSubspace::parse_tag("pi"),
            Some(LogicalSubspace::Polarization)
        );
        assert_eq!(LogicalSubspace::parse_tag("o0"), None);
        assert_eq!(Cardinal::YPlus.ket(LogicalSubspace::Oam(2)), "|a>_o2");
    }
}
