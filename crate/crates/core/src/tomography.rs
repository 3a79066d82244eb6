//! Six-projector qubit tomography: analyzer sets, count records, linear
//! (Stokes) inversion and maximum-likelihood reconstruction.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::circuit::sample_binomial;
use crate::circuitio::{ParseError, ParseErrorKind};
use crate::elements::{hologram_analyze_with, polarizer, Element};
use crate::error::{Error, Result};
use crate::hilbert::{fidelity, Cardinal, DensityMatrix2, LogicalSubspace, Qubit};

/// Record text format version.
pub const COUNT_FORMAT_VERSION: u32 = 1;

/// Stop when an accepted step improves the per-count log-likelihood by less than this.
pub const MLE_TOLERANCE: f64 = 1e-10;
pub const MLE_MAX_ITERATIONS: usize = 10_000;

/// Basis pairs in Stokes order `x, y, z`.
const PAIRS: [(Cardinal, Cardinal); 3] = [
    (Cardinal::XPlus, Cardinal::XMinus),
    (Cardinal::YPlus, Cardinal::YMinus),
    (Cardinal::ZPlus, Cardinal::ZMinus),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Analyzer {
    pub label: String,
    pub element: Element,
}

/// The three mutually unbiased bases of a logical subspace, realized as
/// polarizers (polarization) or hologram + fiber analyzers (OAM).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectorSet {
    subspace: LogicalSubspace,
}

impl ProjectorSet {
    pub fn new(subspace: LogicalSubspace) -> Self {
        Self { subspace }
    }

    pub fn subspace(&self) -> LogicalSubspace {
        self.subspace
    }

    /// `(label, state)` in the order `z+, z−, x+, x−, y+, y−`.
    pub fn states(&self) -> Vec<(String, Qubit)> {
        Cardinal::ALL
            .iter()
            .map(|&c| {
                (
                    c.letter(self.subspace).to_string(),
                    self.subspace.cardinal(c),
                )
            })
            .collect()
    }

    pub fn analyzers(&self, hologram_efficiency: f64) -> Result<Vec<Analyzer>> {
        self.states()
            .into_iter()
            .map(|(label, q)| {
                let element = match self.subspace {
                    LogicalSubspace::Polarization => polarizer(q)?,
                    LogicalSubspace::Oam(order) => {
                        hologram_analyze_with(q, order, hologram_efficiency, false)?
                    }
                };
                Ok(Analyzer { label, element })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountEntry {
    pub label: String,
    pub counts: u64,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRecord {
    pub subspace: Option<LogicalSubspace>,
    pub seed: u64,
    pub entries: Vec<CountEntry>,
}

impl CountRecord {
    pub fn with_subspace(mut self, sub: LogicalSubspace) -> Self {
        self.subspace = Some(sub);
        self
    }

    pub fn get(&self, label: &str) -> Option<&CountEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// ```text
    /// countrecord format_version=1 subspace=o2 seed=7
    /// l 4987 10000
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = format!("countrecord format_version={COUNT_FORMAT_VERSION}");
        if let Some(sub) = self.subspace {
            write!(out, " subspace={sub}").unwrap();
        }
        writeln!(out, " seed={}", self.seed).unwrap();
        for e in &self.entries {
            writeln!(out, "{} {} {}", e.label, e.counts, e.shots).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, ParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or_else(|| {
            ParseError::new(1, 1, ParseErrorKind::Syntax("empty count record".into()))
        })?;
        let mut words = header.split_whitespace();
        if words.next() != Some("countrecord") {
            return Err(ParseError::new(
                hline,
                col_of(header, header.trim_start()),
                ParseErrorKind::Syntax("expected `countrecord` header".into()),
            ));
        }
        let mut record = CountRecord {
            subspace: None,
            seed: 0,
            entries: Vec::new(),
        };
        for w in words {
            let col = col_of(header, w);
            let (k, v) = w.split_once('=').ok_or_else(|| {
                ParseError::new(
                    hline,
                    col,
                    ParseErrorKind::Syntax(format!("expected key=value, got `{w}`")),
                )
            })?;
            let bad = |what: &str| {
                ParseError::new(
                    hline,
                    col,
                    ParseErrorKind::BadParameter {
                        name: k.to_string(),
                        reason: what.to_string(),
                    },
                )
            };
            match k {
                "format_version" => {
                    let ver: u32 = v.parse().map_err(|_| bad("not an integer"))?;
                    if ver != COUNT_FORMAT_VERSION {
                        return Err(bad("unsupported version"));
                    }
                }
                "subspace" => {
                    record.subspace =
                        Some(LogicalSubspace::parse_tag(v).ok_or_else(|| bad("unknown subspace"))?)
                }
                "seed" => record.seed = v.parse().map_err(|_| bad("not an integer"))?,
                _ => {
                    return Err(ParseError::new(
                        hline,
                        col,
                        ParseErrorKind::UnknownParameter(k.to_string()),
                    ))
                }
            }
        }
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(ParseError::new(
                    lineno,
                    col_of(line, line.trim_start()),
                    ParseErrorKind::Syntax("expected `<label> <counts> <shots>`".into()),
                ));
            }
            let num = |s: &str| {
                s.parse::<u64>().map_err(|_| {
                    ParseError::new(
                        lineno,
                        col_of(line, s),
                        ParseErrorKind::Syntax(format!("`{s}` is not a count")),
                    )
                })
            };
            let counts = num(fields[1])?;
            let shots = num(fields[2])?;
            if counts > shots {
                return Err(ParseError::new(
                    lineno,
                    col_of(line, fields[1]),
                    ParseErrorKind::Syntax("counts exceed shots".into()),
                ));
            }
            record.entries.push(CountEntry {
                label: fields[0].to_string(),
                counts,
                shots,
            });
        }
        Ok(record)
    }
}

fn col_of(line: &str, part: &str) -> usize {
    part.as_ptr() as usize - line.as_ptr() as usize + 1
}

/// Outcome weights for one basis pair. `exposure` scales the outcome rate
/// (shots spent on that analyzer); exact probabilities use unit exposure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairData {
    pub plus: f64,
    pub minus: f64,
    pub exposure_plus: f64,
    pub exposure_minus: f64,
}

impl PairData {
    fn total(&self) -> f64 {
        self.plus + self.minus
    }

    /// Rate-normalized probability of the `+` outcome.
    fn p_plus(&self) -> f64 {
        let rp = self.plus / self.exposure_plus;
        let rm = self.minus / self.exposure_minus;
        rp / (rp + rm)
    }
}

/// Tomographic data in Stokes order `x, y, z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequencies {
    pub pairs: [PairData; 3],
}

impl Frequencies {
    /// Exact outcome probabilities of `rho`.
    pub fn exact(rho: &DensityMatrix2) -> Self {
        let s = rho.stokes();
        let pair = |k: usize| PairData {
            plus: 0.5 * (1.0 + s[k]),
            minus: 0.5 * (1.0 - s[k]),
            exposure_plus: 1.0,
            exposure_minus: 1.0,
        };
        Self {
            pairs: [pair(0), pair(1), pair(2)],
        }
    }

    /// From detection probabilities listed in `z+, z−, x+, x−, y+, y−` order.
    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        if p.len() != 6 {
            return Err(Error::InvalidParameter(format!(
                "expected 6 probabilities, got {}",
                p.len()
            )));
        }
        let pair = |a: f64, b: f64| PairData {
            plus: a,
            minus: b,
            exposure_plus: 1.0,
            exposure_minus: 1.0,
        };
        let f = Self {
            pairs: [pair(p[2], p[3]), pair(p[4], p[5]), pair(p[0], p[1])],
        };
        f.check()?;
        Ok(f)
    }

    pub fn from_record(record: &CountRecord) -> Result<Self> {
        let by_cardinal = |c: Cardinal| -> Result<&CountEntry> {
            let found = record.entries.iter().find(|e| {
                let mut ch = e.label.chars();
                match (ch.next(), ch.next()) {
                    (Some(x), None) => {
                        Cardinal::from_pol_letter(x) == Some(c)
                            || Cardinal::from_oam_letter(x) == Some(c)
                    }
                    _ => false,
                }
            });
            found.ok_or_else(|| {
                let sub = record.subspace.unwrap_or(LogicalSubspace::Polarization);
                Error::MissingAnalyzer(c.letter(sub).to_string())
            })
        };
        let mut pairs = [PairData {
            plus: 0.0,
            minus: 0.0,
            exposure_plus: 1.0,
            exposure_minus: 1.0,
        }; 3];
        for (k, (p, m)) in PAIRS.iter().enumerate() {
            let ep = by_cardinal(*p)?;
            let em = by_cardinal(*m)?;
            if ep.shots == 0 || em.shots == 0 {
                return Err(Error::ZeroCounts(format!("{}/{}", ep.label, em.label)));
            }
            pairs[k] = PairData {
                plus: ep.counts as f64,
                minus: em.counts as f64,
                exposure_plus: ep.shots as f64,
                exposure_minus: em.shots as f64,
            };
        }
        let f = Self { pairs };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        for (k, pair) in self.pairs.iter().enumerate() {
            if !(pair.total() > 0.0) || pair.plus < 0.0 || pair.minus < 0.0 {
                let (p, m) = PAIRS[k];
                return Err(Error::ZeroCounts(format!(
                    "{}/{}",
                    p.letter(LogicalSubspace::Polarization),
                    m.letter(LogicalSubspace::Polarization)
                )));
            }
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.pairs.iter().map(PairData::total).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearEstimate {
    /// Hermitian, unit trace; may have a negative eigenvalue.
    pub rho: DensityMatrix2,
    pub physical: bool,
}

/// Stokes inversion: `s_k = p₊ − p₋` within each basis pair,
/// `ρ = ½(I + Σ s_k σ_k)`.
pub fn reconstruct_linear(record: &CountRecord) -> Result<LinearEstimate> {
    reconstruct_linear_from(&Frequencies::from_record(record)?)
}

pub fn reconstruct_linear_from(f: &Frequencies) -> Result<LinearEstimate> {
    f.check()?;
    let s = f.pairs.map(|p| 2.0 * p.p_plus() - 1.0);
    let rho = DensityMatrix2::from_stokes(s);
    Ok(LinearEstimate {
        physical: rho.is_physical(),
        rho,
    })
}

/// Log-likelihood of `rho` given the data, divided by the total weight.
pub fn log_likelihood(f: &Frequencies, rho: &DensityMatrix2) -> f64 {
    log_likelihood_stokes(f, rho.stokes())
}

fn log_likelihood_stokes(f: &Frequencies, s: [f64; 3]) -> f64 {
    let mut total = 0.0;
    for (pair, sk) in f.pairs.iter().zip(s) {
        let pp = 0.5 * (1.0 + sk);
        let pm = 0.5 * (1.0 - sk);
        let norm = pair.exposure_plus * pp + pair.exposure_minus * pm;
        if pair.plus > 0.0 {
            total += pair.plus * (pair.exposure_plus * pp / norm).ln();
        }
        if pair.minus > 0.0 {
            total += pair.minus * (pair.exposure_minus * pm / norm).ln();
        }
    }
    let t = total / f.total_weight();
    if t.is_nan() {
        f64::NEG_INFINITY
    } else {
        t
    }
}

fn dlog_likelihood_dstokes(f: &Frequencies, s: [f64; 3]) -> [f64; 3] {
    let w = f.total_weight();
    let mut g = [0.0; 3];
    for (k, pair) in f.pairs.iter().enumerate() {
        let pp = 0.5 * (1.0 + s[k]);
        let pm = 0.5 * (1.0 - s[k]);
        let norm = pair.exposure_plus * pp + pair.exposure_minus * pm;
        let mut d = -pair.total() * 0.5 * (pair.exposure_plus - pair.exposure_minus) / norm;
        if pair.plus > 0.0 {
            d += pair.plus / (2.0 * pp);
        }
        if pair.minus > 0.0 {
            d -= pair.minus / (2.0 * pm);
        }
        g[k] = d / w;
    }
    g
}

/// Cholesky-style factor `T = [[t1, 0], [t3 + i·t4, t2]]`; `ρ = T†T / tr(T†T)`.
fn stokes_of(t: &[f64; 4]) -> [f64; 3] {
    let [t1, t2, t3, t4] = *t;
    let n = t1 * t1 + t2 * t2 + t3 * t3 + t4 * t4;
    [
        2.0 * t2 * t3 / n,
        2.0 * t2 * t4 / n,
        (t1 * t1 + t3 * t3 + t4 * t4 - t2 * t2) / n,
    ]
}

fn objective(f: &Frequencies, t: &[f64; 4]) -> f64 {
    log_likelihood_stokes(f, stokes_of(t))
}

fn gradient(f: &Frequencies, t: &[f64; 4]) -> [f64; 4] {
    let [t1, t2, t3, t4] = *t;
    let n = t1 * t1 + t2 * t2 + t3 * t3 + t4 * t4;
    let a = [
        2.0 * t2 * t3,
        2.0 * t2 * t4,
        t1 * t1 + t3 * t3 + t4 * t4 - t2 * t2,
    ];
    let da = [
        [0.0, 0.0, 2.0 * t1],
        [2.0 * t3, 2.0 * t4, -2.0 * t2],
        [2.0 * t2, 0.0, 2.0 * t3],
        [0.0, 2.0 * t2, 2.0 * t4],
    ];
    let gs = dlog_likelihood_dstokes(f, stokes_of(t));
    let mut g = [0.0; 4];
    for j in 0..4 {
        for k in 0..3 {
            let ds = da[j][k] / n - a[k] * 2.0 * t[j] / (n * n);
            g[j] += gs[k] * ds;
        }
    }
    g
}

fn hessian(f: &Frequencies, t: &[f64; 4]) -> [[f64; 4]; 4] {
    let h = 1e-6;
    let mut out = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut up = *t;
        let mut dn = *t;
        up[j] += h;
        dn[j] -= h;
        let (gu, gd) = (gradient(f, &up), gradient(f, &dn));
        for i in 0..4 {
            out[i][j] = (gu[i] - gd[i]) / (2.0 * h);
        }
    }
    for i in 0..4 {
        for j in 0..i {
            let avg = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = avg;
            out[j][i] = avg;
        }
    }
    out
}

/// `P H P − t tᵀ` with `P = I − t tᵀ`. The objective ignores the scale of
/// `T`, so the raw Hessian is near-singular along `t` and a Newton step
/// would blow up there; pinning that direction to `−1` keeps it out of the
/// step since the gradient has no `t` component.
fn tangent_hessian(h: [[f64; 4]; 4], t: &[f64; 4]) -> [[f64; 4]; 4] {
    let mut p = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            p[i][j] = if i == j { 1.0 } else { 0.0 } - t[i] * t[j];
        }
    }
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    acc += p[i][k] * h[k][l] * p[l][j];
                }
            }
            out[i][j] = acc - t[i] * t[j];
        }
    }
    out
}

/// Eigen-decomposition of a symmetric 4×4 matrix by cyclic Jacobi rotations.
/// Column `k` of the returned matrix is the eigenvector of eigenvalue `k`.
fn symmetric_eigen(mut a: [[f64; 4]; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut v = [[0.0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..64 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..4).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..3 {
            for q in p + 1..4 {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2], a[3][3]], v)
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the component along the (unit) parameter vector: the likelihood
/// is invariant under rescaling `T`.
fn tangent(mut g: [f64; 4], t: &[f64; 4]) -> [f64; 4] {
    let r = dot(&g, t);
    for (x, ti) in g.iter_mut().zip(t) {
        *x -= r * ti;
    }
    g
}

fn normalize(t: &mut [f64; 4]) {
    let n = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in t.iter_mut() {
        *x /= n;
    }
}

/// On a pure-state face ρ is quadratic in the vanishing entry of T, so the
/// optimizer stops a little short. A linear estimate that is unphysical only
/// by roundoff sits on that face exactly and wins when it is at least as likely.
fn finish(f: &Frequencies, t: &[f64; 4]) -> DensityMatrix2 {
    let rho = rho_of(t);
    match reconstruct_linear_from(f) {
        Ok(lin) if lin.rho.min_eigenvalue() > -1e-12 => {
            let cand = lin.rho.project_physical();
            if log_likelihood(f, &cand) >= log_likelihood(f, &rho) {
                cand
            } else {
                rho
            }
        }
        _ => rho,
    }
}

fn rho_of(t: &[f64; 4]) -> DensityMatrix2 {
    DensityMatrix2::from_stokes(stokes_of(t)).project_physical()
}

/// Maximum-likelihood estimate over `{ρ ≽ 0, tr ρ = 1}`, parameterized as
/// `T†T / tr(T†T)` and maximized with damped Newton steps.
pub fn reconstruct_mle(record: &CountRecord) -> Result<DensityMatrix2> {
    reconstruct_mle_from(&Frequencies::from_record(record)?)
}

pub fn reconstruct_mle_from(f: &Frequencies) -> Result<DensityMatrix2> {
    f.check()?;
    // Each basis pair's likelihood peaks at its observed split, so a
    // physical linear estimate is already the maximum.
    let lin = reconstruct_linear_from(f)?;
    if lin.rho.min_eigenvalue() >= 0.0 {
        return Ok(lin.rho);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut t = [r, r, 0.0, 0.0];
    let mut value = objective(f, &t);
    // Relative damping; steps use |eigenvalues| of the Hessian so that every
    // step ascends, including near the saddle at t1 = 0.
    let mut damping = 1e-3;
    for _ in 0..MLE_MAX_ITERATIONS {
        let g = tangent(gradient(f, &t), &t);
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-12 {
            return Ok(finish(f, &t));
        }
        let (lambda, vecs) = symmetric_eigen(tangent_hessian(hessian(f, &t), &t));
        let scale = lambda
            .iter()
            .fold(0.0f64, |m, l| m.max(l.abs()))
            .max(1e-300);
        let coeffs: Vec<f64> = (0..4)
            .map(|k| (0..4).map(|i| vecs[i][k] * g[i]).sum())
            .collect();
        let mut accepted = false;
        while damping < 1e12 {
            let mut step = [0.0; 4];
            for k in 0..4 {
                let w = coeffs[k] / (lambda[k].abs() + damping * scale);
                for (i, s) in step.iter_mut().enumerate() {
                    *s += w * vecs[i][k];
                }
            }
            let step = tangent(step, &t);
            let mut trial = [
                t[0] + step[0],
                t[1] + step[1],
                t[2] + step[2],
                t[3] + step[3],
            ];
            normalize(&mut trial);
            let tv = objective(f, &trial);
            if tv > value {
                let improvement = tv - value;
                t = trial;
                value = tv;
                damping = (damping / 3.0).max(1e-9);
                accepted = true;
                // The second test catches steps that only shuffle roundoff.
                if (improvement < MLE_TOLERANCE && gnorm < 1e-7)
                    || improvement < 1e-15 * value.abs().max(1.0)
                {
                    return Ok(finish(f, &t));
                }
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            // No ascent left at working precision.
            return Ok(finish(f, &t));
        }
    }
    Err(Error::NonConvergence {
        iterations: MLE_MAX_ITERATIONS,
        best: Box::new(rho_of(&t)),
    })
}

/// Multinomial bootstrap of the MLE fidelity: each basis pair's total is
/// redistributed binomially at its observed split, then reconstructed.
/// Resample `j` draws from ChaCha stream `3j + k` of `seed` for pair `k`.
pub fn bootstrap_fidelity(
    record: &CountRecord,
    target: &Qubit,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if resamples < 100 {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least 100 resamples, got {resamples}"
        )));
    }
    let base = Frequencies::from_record(record)?;
    let fids: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|j| {
            let mut f = base;
            for (k, pair) in f.pairs.iter_mut().enumerate() {
                let n = pair.total().round() as u64;
                let p = pair.plus / pair.total();
                let plus = sample_binomial(n, p, seed, 3 * j as u64 + k as u64);
                pair.plus = plus as f64;
                pair.minus = (n - plus) as f64;
            }
            reconstruct_mle_from(&f).map(|rho| fidelity(&rho, target))
        })
        .collect::<Result<_>>()?;
    let n = fids.len() as f64;
    let mean = fids.iter().sum::<f64>() / n;
    let var = fids.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::c64;

    fn record(labels: &[&str], counts: &[u64], shots: u64) -> CountRecord {
        CountRecord {
            subspace: Some(LogicalSubspace::Oam(2)),
            seed: 0,
            entries: labels
                .iter()
                .zip(counts)
                .map(|(l, &c)| CountEntry {
                    label: l.to_string(),
                    counts: c,
                    shots,
                })
                .collect(),
        }
    }

    #[test]
    fn linear_inversion_on_exact_l() {
        // (l, r, h, v, a, d) = (1, 0, .5, .5, .5, .5) → s = (0, 0, 1).
        let f = Frequencies::from_probabilities(&[1.0, 0.0, 0.5, 0.5, 0.5, 0.5]).unwrap();
        let est = reconstruct_linear_from(&f).unwrap();
        let l = LogicalSubspace::Oam(2).cardinal(Cardinal::ZPlus);
        assert!(est.rho.max_abs_diff(&DensityMatrix2::pure(&l)) < 1e-15);
        assert!(est.physical);
    }

    #[test]
    fn linear_inversion_balanced_counts_is_mixed() {
        let r = record(
            &["l", "r", "h", "v", "a", "d"],
            &[50, 50, 30, 30, 70, 70],
            100,
        );
        let est = reconstruct_linear(&r).unwrap();
        assert!(est.rho.max_abs_diff(&DensityMatrix2::maximally_mixed()) < 1e-15);
    }

    #[test]
    fn linear_inversion_errors() {
        let r = record(&["l", "r", "h", "v", "a"], &[1, 1, 1, 1, 1], 10);
        assert!(matches!(reconstruct_linear(&r), Err(Error::MissingAnalyzer(l)) if l == "d"));
        let r = record(&["l", "r", "h", "v", "a", "d"], &[1, 1, 0, 0, 1, 1], 10);
        assert!(matches!(reconstruct_linear(&r), Err(Error::ZeroCounts(_))));
    }

    #[test]
    fn unequal_shots_are_rate_normalized() {
        let mut r = record(
            &["H", "V", "A", "D", "L", "R"],
            &[80, 20, 50, 50, 50, 50],
            100,
        );
        r.entries[1] = CountEntry {
            label: "V".into(),
            counts: 40,
            shots: 200,
        };
        let est = reconstruct_linear(&r).unwrap();
        assert!((est.rho.stokes()[2] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn mle_on_exact_pure_states() {
        let sub = LogicalSubspace::Oam(2);
        for c in Cardinal::ALL {
            let q = sub.cardinal(c);
            let f = Frequencies::exact(&DensityMatrix2::pure(&q));
            let rho = reconstruct_mle_from(&f).unwrap();
            assert!((fidelity(&rho, &q) - 1.0).abs() < 1e-6, "{c:?}");
        }
        let q = Qubit::normalized(c64::new(0.3, 0.2), c64::new(-0.5, 0.7)).unwrap();
        let rho = reconstruct_mle_from(&Frequencies::exact(&DensityMatrix2::pure(&q))).unwrap();
        assert!((fidelity(&rho, &q) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mle_matches_linear_for_interior_states() {
        let truth = DensityMatrix2::from_stokes([0.3, -0.4, 0.5]);
        let f = Frequencies::exact(&truth);
        let rho = reconstruct_mle_from(&f).unwrap();
        assert!(
            rho.max_abs_diff(&truth) < 1e-8,
            "{}",
            rho.max_abs_diff(&truth)
        );
    }

    #[test]
    fn mle_is_physical_for_unphysical_counts() {
        let r = record(&["l", "r", "h", "v", "a", "d"], &[20, 0, 16, 4, 14, 6], 20);
        let lin = reconstruct_linear(&r).unwrap();
        assert!(!lin.physical);
        let rho = reconstruct_mle(&r).unwrap();
        assert!(rho.is_physical());
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        let f = Frequencies::from_record(&r).unwrap();
        assert!(
            log_likelihood(&f, &rho) >= log_likelihood(&f, &lin.rho.project_physical()) - 1e-12
        );
    }

    #[test]
    fn count_record_text_round_trip() {
        let r = record(&["l", "r", "h", "v", "a", "d"], &[10, 0, 5, 5, 6, 4], 10);
        let text = r.to_text();
        assert!(text.starts_with("countrecord format_version=1 subspace=o2 seed=0\nl 10 10\n"));
        assert_eq!(CountRecord::from_text(&text).unwrap(), r);
    }

    #[test]
    fn count_record_parse_errors_are_located() {
        let e = CountRecord::from_text("countrecord seed=1\nl 5\n").unwrap_err();
        assert_eq!((e.line, e.column), (2, 1));
        let e = CountRecord::from_text("countrecord seed=x\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 13));
        let e = CountRecord::from_text("countrecord\nl 11 10\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(CountRecord::from_text("").is_err());
    }

    #[test]
    fn bootstrap_is_deterministic_and_checks_resamples() {
        let r = record(
            &["l", "r", "h", "v", "a", "d"],
            &[990, 10, 520, 480, 505, 495],
            1000,
        );
        let l = LogicalSubspace::Oam(2).cardinal(Cardinal::ZPlus);
        let a = bootstrap_fidelity(&r, &l, 100, 3).unwrap();
        let b = bootstrap_fidelity(&r, &l, 100, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.0 > 0.95 && a.1 > 0.0);
        assert!(bootstrap_fidelity(&r, &l, 99, 3).is_err());
    }

    #[test]
    fn noiseless_bootstrap_has_no_spread() {
        let r = record(
            &["l", "r", "h", "v", "a", "d"],
            &[100000, 0, 50000, 50000, 50000, 50000],
            100000,
        );
        let l = LogicalSubspace::Oam(2).cardinal(Cardinal::ZPlus);
        let (_, std) = bootstrap_fidelity(&r, &l, 100, 1).unwrap();
        // x and y pairs are redrawn binomially, z is exact; F ≈ 1 − (s_x² + s_y²)/4.
        assert!(std < 1e-4, "{std}");
    }
}
