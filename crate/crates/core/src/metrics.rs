//! Closed-form analytics for the two-transmission protocol: transmission
//! efficiency, CHSH functionals, QBER, binary entropy, Holevo bound and the
//! secret-message capacity, plus a density-matrix oracle path that
//! recomputes S and Q from states assembled in [`crate::qcore`].
//!
//! The closed forms and the oracle are deliberately independent code paths;
//! the test suites check that they agree to machine precision.

use crate::channels::ChannelKind;
use crate::qcore::{
    apply_kraus_side, expectation, mix_white_noise, tensor, BellLabel, ComplexMatrix,
    DensityMatrix, Side,
};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::SQRT_2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("negative parameter {0}")]
    Negative(f64),
    #[error("CHSH value {0} is at or below the classical bound; the protocol must abort")]
    BelowClassicalBound(f64),
}

/// Fiber link budget: attenuation `alpha` (dB/km) over `distance` (km).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBudget {
    alpha_db_per_km: f64,
    distance_km: f64,
}

impl LinkBudget {
    pub fn new(alpha_db_per_km: f64, distance_km: f64) -> Result<Self, MetricsError> {
        if alpha_db_per_km < 0.0 {
            return Err(MetricsError::Negative(alpha_db_per_km));
        }
        if distance_km < 0.0 {
            return Err(MetricsError::Negative(distance_km));
        }
        Ok(Self {
            alpha_db_per_km,
            distance_km,
        })
    }

    pub fn alpha_db_per_km(&self) -> f64 {
        self.alpha_db_per_km
    }

    pub fn distance_km(&self) -> f64 {
        self.distance_km
    }

    /// Photon transmission efficiency `eta = 10^(-alpha D / 10)`.
    pub fn efficiency(&self) -> f64 {
        10f64.powf(-self.alpha_db_per_km * self.distance_km / 10.0)
    }
}

/// First or second photon transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransmissionRound {
    First,
    Second,
}

/// CHSH value and QBER for one transmission round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub s_value: f64,
    pub qber: f64,
    pub round: TransmissionRound,
}

impl RoundMetrics {
    /// Closed-form metrics at decay value `p` and efficiency `eta`.
    pub fn closed_form(kind: ChannelKind, p: f64, eta: f64, round: TransmissionRound) -> Self {
        Self {
            s_value: chsh_closed_form(kind, p, eta, round),
            qber: qber_closed_form(kind, p, eta, round),
            round,
        }
    }
}

fn check_unit(x: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x), "parameter {x} outside [0, 1]");
    x
}

/// Closed-form CHSH functional after the first or second transmission.
///
/// Amplitude damping: `S1 = (1 + sqrt(p)) eta sqrt(2p)`,
/// `S2 = (1 - p + 2p^2) eta^2 sqrt(2)`.
/// Dephasing: `S1 = (1 + p) eta sqrt(2)`, `S2 = (1 + p^2) eta^2 sqrt(2)`.
pub fn chsh_closed_form(kind: ChannelKind, p: f64, eta: f64, round: TransmissionRound) -> f64 {
    let (p, eta) = (check_unit(p), check_unit(eta));
    match (kind, round) {
        (ChannelKind::AmplitudeDamping, TransmissionRound::First) => {
            (1.0 + p.sqrt()) * eta * (2.0 * p).sqrt()
        }
        (ChannelKind::AmplitudeDamping, TransmissionRound::Second) => {
            (1.0 - p + 2.0 * p * p) * eta * eta * SQRT_2
        }
        (ChannelKind::Dephasing, TransmissionRound::First) => (1.0 + p) * eta * SQRT_2,
        (ChannelKind::Dephasing, TransmissionRound::Second) => (1.0 + p * p) * eta * eta * SQRT_2,
    }
}

/// Closed-form total QBER (phase-flip plus bit-flip) per round.
///
/// Amplitude damping: `Q1 = 1 - (eta sqrt(p)/2)(1 + sqrt(p))`,
/// `Q2 = 1 - (eta^2/2)(1 - p + 2p^2)`.
/// Dephasing: `Q1 = 1 - (eta/2)(1 + p)`, `Q2 = 1 - (eta^2/2)(1 + p^2)`.
pub fn qber_closed_form(kind: ChannelKind, p: f64, eta: f64, round: TransmissionRound) -> f64 {
    let (p, eta) = (check_unit(p), check_unit(eta));
    match (kind, round) {
        (ChannelKind::AmplitudeDamping, TransmissionRound::First) => {
            1.0 - eta * p.sqrt() / 2.0 * (1.0 + p.sqrt())
        }
        (ChannelKind::AmplitudeDamping, TransmissionRound::Second) => {
            1.0 - eta * eta / 2.0 * (1.0 - p + 2.0 * p * p)
        }
        (ChannelKind::Dephasing, TransmissionRound::First) => 1.0 - eta / 2.0 * (1.0 + p),
        (ChannelKind::Dephasing, TransmissionRound::Second) => {
            1.0 - eta * eta / 2.0 * (1.0 + p * p)
        }
    }
}

/// Binary entropy in bits, with the continuity convention `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MetricsError::OutOfRange(p));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Holevo bound on the eavesdropper's information given an observed CHSH
/// value: `chi(S) = h((1 + sqrt((S/2)^2 - 1)) / 2)`.
///
/// Defined for `S >= 2`; below the classical bound the protocol aborts and
/// the bound is meaningless, signalled as an error. Values above the
/// Tsirelson bound (possible for finite-sample estimates) are treated as
/// maximal violation, `chi = 0`.
pub fn holevo_bound(s: f64) -> Result<f64, MetricsError> {
    if s < 2.0 {
        return Err(MetricsError::BelowClassicalBound(s));
    }
    let radicand = ((s / 2.0) * (s / 2.0) - 1.0).clamp(0.0, 1.0);
    binary_entropy((1.0 + radicand.sqrt()) / 2.0)
}

/// Secret-message capacity lower bound, `Cs >= 1 - h(Q2) - chi(S1)`,
/// reported per encoded pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityReport {
    /// Clamped capacity, `max(0, mutual_info_ab - holevo_s1)`; 0 when aborted.
    pub capacity: f64,
    /// `I(A:B) = 1 - h(Q2)`.
    pub mutual_info_ab: f64,
    /// `chi(S1)`; absent when the run aborted at the classical bound.
    pub holevo_s1: Option<f64>,
    pub aborted: bool,
}

impl CapacityReport {
    /// Signed (unclamped) rate, where defined.
    pub fn net(&self) -> Option<f64> {
        self.holevo_s1.map(|chi| self.mutual_info_ab - chi)
    }
}

/// Capacity from the second-round QBER and the first-round CHSH value.
/// `s1 <= 2` yields an aborted report rather than an error.
pub fn capacity(q2: f64, s1: f64) -> Result<CapacityReport, MetricsError> {
    let mutual_info_ab = 1.0 - binary_entropy(q2)?;
    if s1 <= 2.0 {
        return Ok(CapacityReport {
            capacity: 0.0,
            mutual_info_ab,
            holevo_s1: None,
            aborted: true,
        });
    }
    let chi = holevo_bound(s1)?;
    Ok(CapacityReport {
        capacity: (mutual_info_ab - chi).max(0.0),
        mutual_info_ab,
        holevo_s1: Some(chi),
        aborted: false,
    })
}

/// `coefficient * log2(argument)` with the `0 log 0 = 0` convention
/// (the coefficient vanishes whenever the argument does).
fn weighted_log2(coefficient: f64, argument: f64) -> f64 {
    if argument <= 0.0 {
        0.0
    } else {
        coefficient * argument.log2()
    }
}

/// Signed secret-message capacity in closed form.
///
/// Amplitude damping:
/// `Cs = W log2 W + (1-W) log2(1-W) + ((1-d)/2) log2(1-d) + ((1+d)/2) log2(1+d)`
/// with `W = (eta^2/2)(1 - p + 2p^2)` and
/// `d = sqrt((eta^2 p/2)(1 + sqrt(p))^2 - 1)`; the dephasing channel uses
/// `W = (eta^2/2)(1 + p^2)` and `d = sqrt((eta^2/2)(1 + p)^2 - 1)`.
///
/// A negative radicand means the first-round CHSH value is at or below the
/// classical bound (the abort condition) and is reported as an error.
pub fn capacity_closed_form(kind: ChannelKind, p: f64, eta: f64) -> Result<f64, MetricsError> {
    let (p, eta) = (check_unit(p), check_unit(eta));
    let (omega, radicand) = match kind {
        ChannelKind::AmplitudeDamping => (
            eta * eta / 2.0 * (1.0 - p + 2.0 * p * p),
            eta * eta * p / 2.0 * (1.0 + p.sqrt()) * (1.0 + p.sqrt()) - 1.0,
        ),
        ChannelKind::Dephasing => (
            eta * eta / 2.0 * (1.0 + p * p),
            eta * eta / 2.0 * (1.0 + p) * (1.0 + p) - 1.0,
        ),
    };
    if radicand < 0.0 {
        let s1 = chsh_closed_form(kind, p, eta, TransmissionRound::First);
        return Err(MetricsError::BelowClassicalBound(s1));
    }
    let delta = radicand.min(1.0).sqrt();
    Ok(weighted_log2(omega, omega)
        + weighted_log2(1.0 - omega, 1.0 - omega)
        + weighted_log2((1.0 - delta) / 2.0, 1.0 - delta)
        + weighted_log2((1.0 + delta) / 2.0, 1.0 + delta))
}

/// Information loss and error rates: `r_lr = 1 - eta^2`,
/// `r_er = (1 - p^2)/2`, with `p` the decay value of whichever channel is
/// in use.
pub fn loss_error_rates(p: f64, eta: f64) -> (f64, f64) {
    let (p, eta) = (check_unit(p), check_unit(eta));
    (1.0 - eta * eta, (1.0 - p * p) / 2.0)
}

/// Alice's measurement settings `A0 = sigma_x`, `A1 = (sigma_z + sigma_x)/sqrt(2)`,
/// `A2 = (sigma_z - sigma_x)/sqrt(2)`, `A3 = sigma_z`.
pub fn alice_setting(index: usize) -> ComplexMatrix {
    let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let (sx, sz) = (ComplexMatrix::pauli_x(), ComplexMatrix::pauli_z());
    match index {
        0 => sx,
        1 => sz.add(&sx).expect("dim 2").scale(inv),
        2 => sz
            .add(&sx.scale(Complex64::new(-1.0, 0.0)))
            .expect("dim 2")
            .scale(inv),
        3 => sz,
        _ => panic!("Alice has settings 0..=3"),
    }
}

/// Bob's measurement settings `B0 = sigma_x`, `B1 = sigma_z`.
pub fn bob_setting(index: usize) -> ComplexMatrix {
    match index {
        0 => ComplexMatrix::pauli_x(),
        1 => ComplexMatrix::pauli_z(),
        _ => panic!("Bob has settings 0..=1"),
    }
}

/// CHSH functional evaluated directly from a two-qubit state:
/// `S = <A1 B1> + <A1 B0> + <A2 B1> - <A2 B0>`.
pub fn chsh_oracle(rho: &DensityMatrix) -> f64 {
    let e = |a: usize, b: usize| {
        let obs = tensor(&alice_setting(a), &bob_setting(b)).expect("2x2 factors");
        expectation(rho, &obs).expect("settings are Hermitian")
    };
    e(1, 1) + e(1, 0) + e(2, 1) - e(2, 0)
}

/// Total QBER evaluated directly from a two-qubit state:
/// `Q = P(a0 != b0) + P(a3 != b1) = 1 - (<xx> + <zz>)/2`.
pub fn qber_oracle(rho: &DensityMatrix) -> f64 {
    let xx = tensor(&ComplexMatrix::pauli_x(), &ComplexMatrix::pauli_x()).expect("2x2 factors");
    let zz = tensor(&ComplexMatrix::pauli_z(), &ComplexMatrix::pauli_z()).expect("2x2 factors");
    1.0 - (expectation(rho, &xx).expect("Hermitian") + expectation(rho, &zz).expect("Hermitian"))
        / 2.0
}

/// Shared state after the first transmission: the channel acts on the
/// second qubit of a fresh `phi+` pair, then transmission loss mixes in
/// white noise, `rho1 = eta rho_AB + (1 - eta) I/4`.
pub fn first_round_state(
    kind: ChannelKind,
    p: f64,
    eta: f64,
) -> Result<DensityMatrix, MetricsError> {
    let kraus = kind
        .kraus_from_decay(p)
        .map_err(|_| MetricsError::OutOfRange(p))?;
    let rho0 = DensityMatrix::bell(BellLabel::PhiPlus);
    let damped = apply_kraus_side(&rho0, &kraus, Side::Second).expect("valid state stays valid");
    mix_white_noise(&damped, eta).map_err(|_| MetricsError::OutOfRange(eta))
}

/// Second transmission applied to an arbitrary first-round state: the
/// channel now acts on the first qubit, followed by another white-noise
/// mixing, `rho2 = eta rho~_AB + (1 - eta) I/4`.
pub fn second_round_state_from(
    rho1: &DensityMatrix,
    kind: ChannelKind,
    p: f64,
    eta: f64,
) -> Result<DensityMatrix, MetricsError> {
    let kraus = kind
        .kraus_from_decay(p)
        .map_err(|_| MetricsError::OutOfRange(p))?;
    let damped = apply_kraus_side(rho1, &kraus, Side::First).expect("valid state stays valid");
    mix_white_noise(&damped, eta).map_err(|_| MetricsError::OutOfRange(eta))
}

/// Shared state after both transmissions at a common decay value.
pub fn second_round_state(
    kind: ChannelKind,
    p: f64,
    eta: f64,
) -> Result<DensityMatrix, MetricsError> {
    let rho1 = first_round_state(kind, p, eta)?;
    second_round_state_from(&rho1, kind, p, eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [ChannelKind; 2] = [ChannelKind::AmplitudeDamping, ChannelKind::Dephasing];
    const ROUNDS: [TransmissionRound; 2] = [TransmissionRound::First, TransmissionRound::Second];
    const TSIRELSON: f64 = 2.0 * SQRT_2;

    fn round_state(kind: ChannelKind, p: f64, eta: f64, round: TransmissionRound) -> DensityMatrix {
        match round {
            TransmissionRound::First => first_round_state(kind, p, eta).unwrap(),
            TransmissionRound::Second => second_round_state(kind, p, eta).unwrap(),
        }
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(LinkBudget::new(0.2, 0.0).unwrap().efficiency(), 1.0);
        let eta = LinkBudget::new(0.2, 1.0).unwrap().efficiency();
        assert!((eta - 0.9550).abs() < 1e-4);
        let eta = LinkBudget::new(0.2, 100.0).unwrap().efficiency();
        assert!((eta - 0.01).abs() < 1e-12);
        assert!(LinkBudget::new(-0.1, 1.0).is_err());
        assert!(LinkBudget::new(0.2, -1.0).is_err());
    }

    #[test]
    fn chsh_noiseless_reaches_tsirelson() {
        for kind in KINDS {
            for round in ROUNDS {
                assert!((chsh_closed_form(kind, 1.0, 1.0, round) - TSIRELSON).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chsh_closed_form_matches_state_oracle_at_spec_points() {
        let s = chsh_closed_form(
            ChannelKind::AmplitudeDamping,
            0.9524,
            0.95,
            TransmissionRound::First,
        );
        assert!((s - 2.5906898209).abs() < 1e-9, "{s}");
        let oracle = chsh_oracle(&round_state(
            ChannelKind::AmplitudeDamping,
            0.9524,
            0.95,
            TransmissionRound::First,
        ));
        assert!((s - oracle).abs() < 1e-12);
        assert!((s - 2.5907).abs() < 1e-3);

        let s = chsh_closed_form(
            ChannelKind::Dephasing,
            0.6699,
            0.95,
            TransmissionRound::Second,
        );
        assert!((s - 1.8491002474).abs() < 1e-9, "{s}");
        let oracle = chsh_oracle(&round_state(
            ChannelKind::Dephasing,
            0.6699,
            0.95,
            TransmissionRound::Second,
        ));
        assert!((s - oracle).abs() < 1e-12);
        assert!((s - 1.849).abs() < 1e-3);
    }

    #[test]
    fn qber_examples() {
        for kind in KINDS {
            for round in ROUNDS {
                assert!(qber_closed_form(kind, 1.0, 1.0, round).abs() < 1e-12);
            }
        }
        let q = qber_closed_form(
            ChannelKind::AmplitudeDamping,
            0.0,
            1.0,
            TransmissionRound::First,
        );
        assert!((q - 1.0).abs() < 1e-12);
        let q = qber_closed_form(
            ChannelKind::Dephasing,
            0.6699,
            0.95,
            TransmissionRound::First,
        );
        assert!((q - 0.2067975).abs() < 1e-9);
        assert!((q - 0.2068).abs() < 1e-3);
        let oracle = qber_oracle(&round_state(
            ChannelKind::Dephasing,
            0.6699,
            0.95,
            TransmissionRound::First,
        ));
        assert!((q - oracle).abs() < 1e-12);
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.1465).unwrap() - 0.6010117982).abs() < 1e-9);
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.01).is_err());
    }

    #[test]
    fn holevo_bound_examples() {
        assert!(holevo_bound(TSIRELSON).unwrap().abs() < 1e-12);
        assert!((holevo_bound(2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((holevo_bound(2.6133).unwrap() - 0.4003590504).abs() < 1e-9);
        assert!((holevo_bound(2.6133).unwrap() - 0.3998).abs() < 1e-3);
        assert!(matches!(
            holevo_bound(1.99),
            Err(MetricsError::BelowClassicalBound(_))
        ));
        // finite-sample estimates can stray above the Tsirelson bound
        assert!(holevo_bound(2.9).unwrap().abs() < 1e-12);
    }

    #[test]
    fn holevo_is_monotone_decreasing() {
        let mut prev = holevo_bound(2.0).unwrap();
        for i in 1..=100 {
            let s = 2.0 + (TSIRELSON - 2.0) * i as f64 / 100.0;
            let chi = holevo_bound(s).unwrap();
            assert!(chi <= prev + 1e-12);
            prev = chi;
        }
    }

    #[test]
    fn capacity_reports() {
        let perfect = capacity(0.0, TSIRELSON).unwrap();
        assert!((perfect.capacity - 1.0).abs() < 1e-12);
        assert!(!perfect.aborted);

        let aborted = capacity(0.1, 1.9).unwrap();
        assert!(aborted.aborted);
        assert_eq!(aborted.capacity, 0.0);
        assert!(aborted.holevo_s1.is_none());

        assert!(capacity(1.5, 2.5).is_err());
    }

    #[test]
    fn capacity_vanishes_at_the_maximum_distance_operating_point() {
        // amplitude damping, Gamma = 0.1 gamma, gamma t = 0.15, 0.2 dB/km at 1.7 km
        let ch =
            crate::channels::NoiseChannel::from_ratio(ChannelKind::AmplitudeDamping, 0.1).unwrap();
        let p = ch.decay(0.15).unwrap();
        let eta = LinkBudget::new(0.2, 1.7).unwrap().efficiency();
        assert!((p - 0.9988).abs() < 1e-4);
        assert!((eta - 0.9247).abs() < 1e-4);
        let s1 = chsh_closed_form(
            ChannelKind::AmplitudeDamping,
            p,
            eta,
            TransmissionRound::First,
        );
        let q2 = qber_closed_form(
            ChannelKind::AmplitudeDamping,
            p,
            eta,
            TransmissionRound::Second,
        );
        let report = capacity(q2, s1).unwrap();
        assert!(report.capacity.abs() < 0.01);
        assert!(report.net().unwrap().abs() < 0.01);
    }

    #[test]
    fn capacity_closed_form_examples() {
        for kind in KINDS {
            let cs = capacity_closed_form(kind, 1.0, 1.0).unwrap();
            assert!((cs - 1.0).abs() < 1e-12, "{kind:?}: {cs}");
        }
        let cs = capacity_closed_form(ChannelKind::AmplitudeDamping, 0.9988, 0.9247).unwrap();
        assert!(cs.abs() < 0.01, "{cs}");
        // heavy damping puts S1 below the classical bound
        assert!(matches!(
            capacity_closed_form(ChannelKind::AmplitudeDamping, 0.1, 0.95),
            Err(MetricsError::BelowClassicalBound(_))
        ));
    }

    #[test]
    fn capacity_closed_form_equals_composed_pipeline() {
        // the worked dephasing point
        let cs = capacity_closed_form(ChannelKind::Dephasing, 0.9761, 0.95).unwrap();
        let s1 = chsh_closed_form(
            ChannelKind::Dephasing,
            0.9761,
            0.95,
            TransmissionRound::First,
        );
        let q2 = qber_closed_form(
            ChannelKind::Dephasing,
            0.9761,
            0.95,
            TransmissionRound::Second,
        );
        let composed = 1.0 - binary_entropy(q2).unwrap() - holevo_bound(s1).unwrap();
        assert!((cs - composed).abs() < 1e-10);

        for kind in KINDS {
            for pi in 0..=10 {
                for eta in [0.9, 0.925, 0.95, 0.975, 1.0] {
                    let p = pi as f64 / 10.0;
                    match capacity_closed_form(kind, p, eta) {
                        Ok(cs) => {
                            let s1 = chsh_closed_form(kind, p, eta, TransmissionRound::First);
                            let q2 = qber_closed_form(kind, p, eta, TransmissionRound::Second);
                            let report = capacity(q2, s1).unwrap();
                            let net = report.net().unwrap();
                            assert!(
                                (cs - net).abs() < 1e-10,
                                "{kind:?} p={p} eta={eta}: {cs} vs {net}"
                            );
                        }
                        Err(_) => {
                            let s1 = chsh_closed_form(kind, p, eta, TransmissionRound::First);
                            assert!(s1 <= 2.0 + 1e-12, "{kind:?} p={p} eta={eta}: S1={s1}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn loss_error_rate_examples() {
        assert_eq!(loss_error_rates(1.0, 1.0), (0.0, 0.0));
        let (r_lr, _) = loss_error_rates(0.3, 0.95);
        assert!((r_lr - 0.0975).abs() < 1e-12);
        let (_, r_er) = loss_error_rates(0.6699, 0.95);
        assert!((r_er - 0.2756169950).abs() < 1e-9);
        assert!((r_er - 0.2756).abs() < 1e-4);
    }

    #[test]
    fn chsh_oracle_examples() {
        assert!((chsh_oracle(&DensityMatrix::bell(BellLabel::PhiPlus)) - TSIRELSON).abs() < 1e-12);
        assert!(chsh_oracle(&DensityMatrix::maximally_mixed(4).unwrap()).abs() < 1e-12);
        let rho = first_round_state(ChannelKind::AmplitudeDamping, 0.49, 1.0).unwrap();
        let expected = SQRT_2 * (0.49 + 0.7);
        assert!((chsh_oracle(&rho) - expected).abs() < 1e-10);
    }

    #[test]
    fn closed_forms_match_oracle_over_grid() {
        for kind in KINDS {
            for round in ROUNDS {
                for pi in 0..=10 {
                    let p = pi as f64 / 10.0;
                    for eta in [0.0, 0.25, 0.5, 0.75, 0.95, 1.0] {
                        let rho = round_state(kind, p, eta, round);
                        let s_closed = chsh_closed_form(kind, p, eta, round);
                        let q_closed = qber_closed_form(kind, p, eta, round);
                        assert!(
                            (s_closed - chsh_oracle(&rho)).abs() < 1e-10,
                            "S mismatch {kind:?} {round:?} p={p} eta={eta}"
                        );
                        assert!(
                            (q_closed - qber_oracle(&rho)).abs() < 1e-10,
                            "Q mismatch {kind:?} {round:?} p={p} eta={eta}"
                        );
                        // S_l = 2 sqrt(2) (1 - Q_l), an exact identity
                        assert!(
                            (s_closed - TSIRELSON * (1.0 - q_closed)).abs() < 1e-12,
                            "identity violated {kind:?} {round:?} p={p} eta={eta}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn second_round_never_beats_first_in_the_active_regime() {
        // Dephasing satisfies S1 >= S2 for every (p, eta); amplitude
        // damping does so wherever the protocol can proceed (S1 > 2).
        for pi in 0..=100 {
            let p = pi as f64 / 100.0;
            for eta in [0.0, 0.25, 0.5, 0.75, 0.95, 1.0] {
                let s1 = chsh_closed_form(ChannelKind::Dephasing, p, eta, TransmissionRound::First);
                let s2 =
                    chsh_closed_form(ChannelKind::Dephasing, p, eta, TransmissionRound::Second);
                assert!(s1 >= s2 - 1e-12, "dephasing p={p} eta={eta}");

                let s1 = chsh_closed_form(
                    ChannelKind::AmplitudeDamping,
                    p,
                    eta,
                    TransmissionRound::First,
                );
                if s1 > 2.0 {
                    let s2 = chsh_closed_form(
                        ChannelKind::AmplitudeDamping,
                        p,
                        eta,
                        TransmissionRound::Second,
                    );
                    assert!(s1 >= s2 - 1e-12, "AD p={p} eta={eta}");
                    // same comparison through the QBER identity
                    let q1 = qber_closed_form(
                        ChannelKind::AmplitudeDamping,
                        p,
                        eta,
                        TransmissionRound::First,
                    );
                    let q2 = qber_closed_form(
                        ChannelKind::AmplitudeDamping,
                        p,
                        eta,
                        TransmissionRound::Second,
                    );
                    assert!(q1 <= q2 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn measurement_marginals_of_round_states() {
        // Dephasing preserves populations, so every single-party marginal
        // vanishes. Amplitude damping biases the damped qubit toward |0>:
        // its sigma_z marginal is eta(1-p) after one hop and eta^2(1-p)
        // after two, while the sigma_x marginals stay zero. The CHSH and
        // QBER estimators use only two-party correlators, so the bias
        // does not enter them.
        let id2 = ComplexMatrix::identity(2).unwrap();
        let sx = ComplexMatrix::pauli_x();
        let sz = ComplexMatrix::pauli_z();
        for p in [0.0, 0.3, 0.7, 1.0] {
            for eta in [0.5, 0.95, 1.0] {
                let rho1 = first_round_state(ChannelKind::Dephasing, p, eta).unwrap();
                let rho2 = second_round_state(ChannelKind::Dephasing, p, eta).unwrap();
                for rho in [&rho1, &rho2] {
                    for obs in [&sx, &sz] {
                        let alice = tensor(obs, &id2).unwrap();
                        let bob = tensor(&id2, obs).unwrap();
                        assert!(expectation(rho, &alice).unwrap().abs() < 1e-12);
                        assert!(expectation(rho, &bob).unwrap().abs() < 1e-12);
                    }
                }

                let rho1 = first_round_state(ChannelKind::AmplitudeDamping, p, eta).unwrap();
                let rho2 = second_round_state(ChannelKind::AmplitudeDamping, p, eta).unwrap();
                let z_bob = tensor(&id2, &sz).unwrap();
                let z_alice = tensor(&sz, &id2).unwrap();
                let bias = eta * (1.0 - p);
                assert!((expectation(&rho1, &z_bob).unwrap() - bias).abs() < 1e-12);
                assert!(expectation(&rho1, &z_alice).unwrap().abs() < 1e-12);
                assert!((expectation(&rho2, &z_alice).unwrap() - bias).abs() < 1e-12);
                assert!((expectation(&rho2, &z_bob).unwrap() - eta * bias).abs() < 1e-12);
                for rho in [&rho1, &rho2] {
                    assert!(expectation(rho, &tensor(&sx, &id2).unwrap()).unwrap().abs() < 1e-12);
                    assert!(expectation(rho, &tensor(&id2, &sx).unwrap()).unwrap().abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn round_metrics_bundles_both_closed_forms() {
        let m = RoundMetrics::closed_form(
            ChannelKind::AmplitudeDamping,
            0.9524,
            0.95,
            TransmissionRound::First,
        );
        assert_eq!(m.round, TransmissionRound::First);
        assert!((m.s_value - 2.5906898209).abs() < 1e-9);
        assert!((m.s_value - TSIRELSON * (1.0 - m.qber)).abs() < 1e-12);
        assert!(m.qber >= 0.0 && m.qber <= 1.0 && m.s_value >= 0.0);
    }

    #[test]
    fn holevo_ordering_follows_chsh_ordering() {
        for kind in KINDS {
            for pi in 0..=100 {
                let p = pi as f64 / 100.0;
                let s1 = chsh_closed_form(kind, p, 0.95, TransmissionRound::First);
                let s2 = chsh_closed_form(kind, p, 0.95, TransmissionRound::Second);
                if s1 > s2 && s2 > 2.0 {
                    let chi1 = holevo_bound(s1).unwrap();
                    let chi2 = holevo_bound(s2).unwrap();
                    assert!(chi1 < chi2 + 1e-15, "{kind:?} p={p}");
                }
            }
        }
    }
}
