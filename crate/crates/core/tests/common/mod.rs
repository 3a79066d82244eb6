//! Strategies and invariant checks shared by the property suite and the
//! acceptance harness.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use qplate::circuit::{run_exact, Circuit};
use qplate::elements::{
    dove_prism, hologram_analyze_with, hologram_generate_with, hwp, mirror, pbs_filter, phase,
    polarizer, qplate, qwp, smf, waveplate, Element, PbsPort,
};
use qplate::error::Error;
use qplate::hilbert::{c64, inner, OamLadder, PathMode, PhotonState, Pol, Qubit};

pub const TOL: f64 = 1e-10;

pub fn ladder() -> OamLadder {
    OamLadder::default()
}

fn complex() -> impl Strategy<Value = c64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| c64::new(re, im))
}

pub fn qubit() -> impl Strategy<Value = Qubit> {
    (complex(), complex())
        .prop_filter("non-zero", |(a, b)| a.norm_sqr() + b.norm_sqr() > 1e-3)
        .prop_map(|(a, b)| Qubit::normalized(a, b).unwrap())
}

/// Normalized state on all paths and polarizations with `|m| ≤ reach`.
pub fn state(reach: i64) -> impl Strategy<Value = PhotonState> {
    let lad = ladder();
    let n = PhotonState::zero(lad).amplitudes().len();
    proptest::collection::vec(complex(), n)
        .prop_map(move |mut amps| {
            for (i, a) in amps.iter_mut().enumerate() {
                let m = lad.m_at(i % lad.levels());
                if m.abs() > reach {
                    *a = c64::new(0.0, 0.0);
                }
            }
            PhotonState::from_amplitudes_unbounded(lad, amps)
        })
        .prop_filter_map("non-zero", |s| s.normalized())
}

fn angle() -> impl Strategy<Value = f64> {
    -7.0f64..7.0
}

/// Unitary elements whose OAM shift stays within 3.
pub fn unitary_element() -> impl Strategy<Value = Element> {
    prop_oneof![
        (angle(), angle()).prop_map(|(g, t)| waveplate(g, t)),
        angle().prop_map(hwp),
        angle().prop_map(qwp),
        (
            prop_oneof![Just(0.5), Just(1.0), Just(1.5), Just(-1.0)],
            angle()
        )
            .prop_map(|(q, d)| qplate(q, d).unwrap()),
        angle().prop_map(dove_prism),
        Just(mirror()),
        angle().prop_map(phase),
    ]
}

pub fn filter_element() -> impl Strategy<Value = Element> {
    prop_oneof![
        qubit().prop_map(|q| polarizer(q).unwrap()),
        Just(smf()),
        Just(pbs_filter(PbsPort::TransmitH)),
        Just(pbs_filter(PbsPort::ReflectV)),
        (qubit(), 1u32..=3, 0.05f64..=1.0, any::<bool>())
            .prop_map(|(q, o, e, inv)| hologram_analyze_with(q, o, e, inv).unwrap()),
    ]
}

pub fn any_element() -> impl Strategy<Value = Element> {
    prop_oneof![3 => unitary_element(), 1 => filter_element()]
}

/// At most `len` elements; q-plates are capped so the total shift stays in range.
pub fn circuit(len: usize) -> impl Strategy<Value = Circuit> {
    proptest::collection::vec(any_element(), 0..=len).prop_map(|els| {
        let mut c = Circuit::new("random");
        for e in els {
            c.push(e);
        }
        c
    })
}

fn close(a: c64, b: c64) -> bool {
    (a - b).norm() < TOL
}

pub fn check_unitarity(e: &Element, a: &PhotonState, b: &PhotonState) -> Result<(), TestCaseError> {
    let ua = e.apply(a).map_err(fail)?;
    let ub = e.apply(b).map_err(fail)?;
    prop_assert!(
        (ua.norm2() - a.norm2()).abs() < TOL,
        "{e}: norm {} -> {}",
        a.norm2(),
        ua.norm2()
    );
    let before = inner(a, b).unwrap();
    let after = inner(&ua, &ub).unwrap();
    prop_assert!(close(before, after), "{e}: <a|b> {before} -> {after}");
    // The adjoint undoes the element.
    let back = e.adjoint().apply(&ua).map_err(fail)?;
    prop_assert!(back.max_abs_diff(a) < TOL, "{e}: adjoint does not invert");
    Ok(())
}

pub fn check_linearity(
    c: &Circuit,
    a: &PhotonState,
    b: &PhotonState,
    x: c64,
    y: c64,
) -> Result<(), TestCaseError> {
    let combo = a.scaled(x).added(&b.scaled(y)).unwrap();
    let lhs = match c.apply(&combo) {
        Ok(s) => s,
        // Overflow is amplitude-dependent only through exact cancellation; skip those draws.
        Err(Error::TruncationOverflow { .. }) => return Ok(()),
        Err(e) => return Err(fail(e)),
    };
    let (ca, cb) = match (c.apply(a), c.apply(b)) {
        (Ok(ca), Ok(cb)) => (ca, cb),
        _ => return Ok(()),
    };
    let rhs = ca.scaled(x).added(&cb.scaled(y)).unwrap();
    prop_assert!(
        lhs.max_abs_diff(&rhs) < TOL,
        "deviation {}",
        lhs.max_abs_diff(&rhs)
    );
    Ok(())
}

pub fn check_norm_monotone(c: &Circuit, s: &PhotonState) -> Result<(), TestCaseError> {
    let r = match run_exact(c, s) {
        Ok(r) => r,
        Err(Error::TruncationOverflow { .. }) => return Ok(()),
        Err(e) => return Err(fail(e)),
    };
    let mut prev = 1.0;
    for st in &r.stage_trace {
        prop_assert!(
            st.norm2 <= prev + TOL,
            "{}: {} after {}",
            st.label,
            st.norm2,
            prev
        );
        prev = st.norm2;
    }
    prop_assert!((0.0..=1.0).contains(&r.success_probability));
    Ok(())
}

/// A q-plate on `|pol, m⟩` overflows exactly when a converted component
/// would land outside the ladder.
pub fn check_overflow(q: f64, delta: f64, pol: Pol, m: i64) -> Result<(), TestCaseError> {
    let lad = ladder();
    let s = PhotonState::basis(lad, PathMode::Single, pol, m).unwrap();
    let shift = (2.0 * q).round() as i64;
    let converts = (0.5 * delta).sin().powi(2) > 1e-20;
    // H and V hold both circular components, which shift in opposite directions.
    let out_of_range = !lad.contains(m + shift) || !lad.contains(m - shift);
    let result = qplate(q, delta).unwrap().apply(&s);
    match result {
        Err(Error::TruncationOverflow { m: bad, m_max, .. }) => {
            prop_assert!(converts && out_of_range, "spurious overflow at m={bad}");
            prop_assert!(bad.unsigned_abs() as usize > m_max);
        }
        Ok(out) => {
            prop_assert!(!(converts && out_of_range), "missed overflow from m={m}");
            prop_assert!((out.norm2() - 1.0).abs() < TOL);
        }
        Err(e) => return Err(fail(e)),
    }
    Ok(())
}

/// `⟨G a|b⟩ = ⟨a|A b⟩` for a generate hologram `G` and its analyzing
/// adjoint `A`, and `A G = η` on the `m = 0` input space.
pub fn check_hologram_adjoint(
    target: Qubit,
    order: u32,
    eta: f64,
    pol_q: Qubit,
    b: &PhotonState,
) -> Result<(), TestCaseError> {
    let lad = ladder();
    let g = hologram_generate_with(target, order, eta).unwrap();
    let a_el = g.adjoint();
    let a = PhotonState::polarization(lad, pol_q);
    let ga = g.apply(&a).map_err(fail)?;
    let ab = a_el.apply(b).map_err(fail)?;
    let lhs = inner(&ga, b).unwrap();
    let rhs = inner(&a, &ab).unwrap();
    prop_assert!(close(lhs, rhs), "<Ga|b> {lhs} vs <a|Ab> {rhs}");
    let round = a_el.apply(&ga).map_err(fail)?;
    prop_assert!(round.max_abs_diff(&a.scaled(c64::new(eta, 0.0))) < TOL);
    // The analyzer built directly agrees with the adjoint.
    let direct = hologram_analyze_with(target, order, eta, false)
        .unwrap()
        .apply(b)
        .map_err(fail)?;
    prop_assert!(direct.max_abs_diff(&ab) < TOL);
    Ok(())
}

pub fn fail(e: Error) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}
