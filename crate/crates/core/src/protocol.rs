//! Seeded Monte Carlo implementation of the five-stage protocol:
//! pair generation, two noisy transmissions, sampled security checks with
//! the four measurement cases, unitary encoding, shuffling, and Bell-state
//! decoding.
//!
//! A run is single-threaded and fully deterministic given its seed; the
//! finite-sample estimates converge to the [`crate::metrics`] closed forms
//! as the pair count grows.

use crate::channels::ChannelError;
use crate::channels::NoiseChannel;
use crate::metrics::{self, alice_setting, bob_setting, CapacityReport, LinkBudget, MetricsError};
use crate::qcore::{
    apply_unitary, bell_probabilities, expectation, tensor, ComplexMatrix, DensityMatrix,
    QcoreError,
};
use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "message needs {needed} pairs but only {available} are available after check sampling"
    )]
    MessageDoesNotFit { needed: usize, available: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

/// Sampling weights for the measurement settings. Alice draws from
/// `{A0, A1, A2, A3}`, Bob from `{B0, B1}`. Uniform by default; rebalancing
/// toward the CHSH settings (A1, A2) tightens the S estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingsDistribution {
    alice_weights: [f64; 4],
    bob_weights: [f64; 2],
}

impl Default for SettingsDistribution {
    fn default() -> Self {
        Self {
            alice_weights: [0.25; 4],
            bob_weights: [0.5; 2],
        }
    }
}

impl SettingsDistribution {
    pub fn new(alice_weights: [f64; 4], bob_weights: [f64; 2]) -> Result<Self, ProtocolError> {
        let ok =
            |w: &[f64]| w.iter().all(|&x| x >= 0.0) && ((w.iter().sum::<f64>()) - 1.0).abs() < 1e-9;
        if !ok(&alice_weights) || !ok(&bob_weights) {
            return Err(ProtocolError::InvalidConfig(
                "settings weights must be non-negative and sum to 1".into(),
            ));
        }
        Ok(Self {
            alice_weights,
            bob_weights,
        })
    }

    fn sample_alice<R: Rng>(&self, rng: &mut R) -> usize {
        sample_weighted(&self.alice_weights, rng)
    }

    fn sample_bob<R: Rng>(&self, rng: &mut R) -> usize {
        sample_weighted(&self.bob_weights, rng)
    }
}

fn sample_weighted<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Full configuration of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    /// Number of EPR pairs prepared in stage 1.
    pub n_pairs: usize,
    /// Probability that a pair is tagged as a first-round check pair.
    pub check_fraction: f64,
    /// Fraction of the message sequence reserved as second-round check pairs.
    pub round2_check_fraction: f64,
    pub channel: NoiseChannel,
    /// Dimensionless noise exposure (gamma * t) per transmission.
    pub gamma_t_per_hop: f64,
    pub link: LinkBudget,
    pub seed: u64,
    /// Bits to transmit, one encoded pair per bit.
    pub message_bits: Vec<u8>,
    pub settings: SettingsDistribution,
}

impl ProtocolConfig {
    fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_pairs < 1 {
            return Err(ProtocolError::InvalidConfig("n_pairs must be >= 1".into()));
        }
        if !(self.check_fraction > 0.0 && self.check_fraction < 1.0) {
            return Err(ProtocolError::InvalidConfig(
                "check_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.round2_check_fraction) {
            return Err(ProtocolError::InvalidConfig(
                "round2_check_fraction must lie in [0, 1)".into(),
            ));
        }
        if self.gamma_t_per_hop < 0.0 {
            return Err(ProtocolError::InvalidConfig(
                "gamma_t_per_hop must be non-negative".into(),
            ));
        }
        if self.message_bits.iter().any(|&b| b > 1) {
            return Err(ProtocolError::InvalidConfig(
                "message bits must be 0 or 1".into(),
            ));
        }
        Ok(())
    }
}

/// Stage at which a run terminated early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AbortStage {
    Stage2,
    Stage4,
}

/// Per-case sample counts for one security round. The four CHSH cells are
/// ordered (A1,B0), (A1,B1), (A2,B0), (A2,B1); `case1_cell_products` holds
/// the per-cell sums of the +-1 outcome products, from which the binomial
/// standard error of the CHSH estimate can be reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RoundCounts {
    pub case1: u64,
    pub case2: u64,
    pub case3: u64,
    pub case4: u64,
    pub case1_cells: [u64; 4],
    pub case1_cell_products: [i64; 4],
}

/// Sampled estimates from one security round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecuritySample {
    pub s_hat: f64,
    pub q_p_hat: f64,
    pub q_b_hat: f64,
    /// Total QBER estimate, clamped into [0, 1].
    pub q_hat: f64,
    pub counts: RoundCounts,
}

impl SecuritySample {
    /// Binomial standard error of the CHSH estimate, from the per-cell
    /// counts. Infinite when any cell is unsampled.
    pub fn chsh_standard_error(&self) -> f64 {
        let mut variance = 0.0;
        for (i, &n) in self.counts.case1_cells.iter().enumerate() {
            if n == 0 {
                return f64::INFINITY;
            }
            let mean = self.counts.case1_cell_products[i] as f64 / n as f64;
            variance += (1.0 - mean * mean) / n as f64;
        }
        variance.sqrt()
    }

    /// Binomial standard error of the total QBER estimate.
    pub fn qber_standard_error(&self) -> f64 {
        if self.counts.case2 == 0 || self.counts.case3 == 0 {
            return f64::INFINITY;
        }
        let vp = self.q_p_hat * (1.0 - self.q_p_hat) / self.counts.case2 as f64;
        let vb = self.q_b_hat * (1.0 - self.q_b_hat) / self.counts.case3 as f64;
        (vp + vb).sqrt()
    }
}

/// Per-run record of the protocol outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolOutcome {
    pub round1: SecuritySample,
    pub round2: Option<SecuritySample>,
    pub aborted_at: Option<AbortStage>,
    /// One character per encoded pair: '0', '1', or '?' for an
    /// inconclusive Bell measurement.
    pub decoded_bits: String,
    /// Capacity estimate from the sampled Q2 and S1; absent on abort.
    pub capacity: Option<CapacityReport>,
}

impl ProtocolOutcome {
    pub fn s1_hat(&self) -> f64 {
        self.round1.s_hat
    }

    pub fn q1_hat(&self) -> f64 {
        self.round1.q_hat
    }

    pub fn s2_hat(&self) -> Option<f64> {
        self.round2.map(|r| r.s_hat)
    }

    pub fn q2_hat(&self) -> Option<f64> {
        self.round2.map(|r| r.q_hat)
    }
}

/// Joint +-1 outcome distribution of one product observable, as cumulative
/// probabilities over (+,+), (+,-), (-,+), (-,-).
#[derive(Debug, Clone, Copy)]
struct JointOutcomes {
    cumulative: [f64; 4],
}

impl JointOutcomes {
    fn build(rho: &DensityMatrix, a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        let half = Complex64::new(0.5, 0.0);
        let id = ComplexMatrix::identity(2).expect("dim 2");
        let proj = |obs: &ComplexMatrix, sign: f64| {
            id.add(&obs.scale(Complex64::new(sign, 0.0)))
                .expect("dim 2")
                .scale(half)
        };
        let mut probs = [0.0f64; 4];
        for (i, (sa, sb)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .enumerate()
        {
            let op = tensor(&proj(a, *sa), &proj(b, *sb)).expect("2x2 factors");
            probs[i] = expectation(rho, &op)
                .expect("projectors are Hermitian")
                .max(0.0);
        }
        let total: f64 = probs.iter().sum();
        let mut cumulative = [0.0f64; 4];
        let mut acc = 0.0;
        for i in 0..4 {
            acc += probs[i] / total;
            cumulative[i] = acc;
        }
        cumulative[3] = 1.0;
        Self { cumulative }
    }

    /// Sample (a, b) outcomes in {-1, +1}.
    fn sample<R: Rng>(&self, rng: &mut R) -> (i8, i8) {
        let u: f64 = rng.random();
        let outcomes = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
        for (i, &out) in outcomes.iter().enumerate() {
            if u < self.cumulative[i] {
                return out;
            }
        }
        (-1, -1)
    }
}

/// One security round: measure `n_check` pairs, each in the state `rho`,
/// with independently sampled settings, and route every pair to one of the
/// four announcement cases. Case 1 (Alice chose A1 or A2) feeds the CHSH
/// estimate; case 2 (A0, B0) the phase-flip rate; case 3 (A3, B1) the
/// bit-flip rate; case 4 is discarded.
pub fn sample_security_round<R: Rng>(
    rho: &DensityMatrix,
    n_check: usize,
    dist: &SettingsDistribution,
    rng: &mut R,
) -> SecuritySample {
    // Joint tables for all eight setting combinations, indexed [alice][bob].
    let tables: Vec<[JointOutcomes; 2]> = (0..4)
        .map(|a| {
            let a_obs = alice_setting(a);
            [
                JointOutcomes::build(rho, &a_obs, &bob_setting(0)),
                JointOutcomes::build(rho, &a_obs, &bob_setting(1)),
            ]
        })
        .collect();

    let mut counts = RoundCounts::default();
    let mut phase_flips = 0u64;
    let mut bit_flips = 0u64;
    for _ in 0..n_check {
        let ai = dist.sample_alice(rng);
        let bj = dist.sample_bob(rng);
        let (a, b) = tables[ai][bj].sample(rng);
        match (ai, bj) {
            (1, _) | (2, _) => {
                counts.case1 += 1;
                let cell = (ai - 1) * 2 + bj;
                counts.case1_cells[cell] += 1;
                counts.case1_cell_products[cell] += (a * b) as i64;
            }
            (0, 0) => {
                counts.case2 += 1;
                if a != b {
                    phase_flips += 1;
                }
            }
            (3, 1) => {
                counts.case3 += 1;
                if a != b {
                    bit_flips += 1;
                }
            }
            _ => counts.case4 += 1,
        }
    }

    let cell_mean = |cell: usize| {
        if counts.case1_cells[cell] == 0 {
            0.0
        } else {
            counts.case1_cell_products[cell] as f64 / counts.case1_cells[cell] as f64
        }
    };
    // cells: 0 = (A1,B0), 1 = (A1,B1), 2 = (A2,B0), 3 = (A2,B1)
    let s_hat = cell_mean(1) + cell_mean(0) + cell_mean(3) - cell_mean(2);
    let q_p_hat = if counts.case2 == 0 {
        0.0
    } else {
        phase_flips as f64 / counts.case2 as f64
    };
    let q_b_hat = if counts.case3 == 0 {
        0.0
    } else {
        bit_flips as f64 / counts.case3 as f64
    };
    SecuritySample {
        s_hat,
        q_p_hat,
        q_b_hat,
        q_hat: (q_p_hat + q_b_hat).clamp(0.0, 1.0),
        counts,
    }
}

/// Encoding unitary on Alice's qubit: `U0 = sigma_x` for bit 0,
/// `U1 = i sigma_y` for bit 1. Bit 0 maps `phi+` to `psi+`, bit 1 to `psi-`.
pub fn encoding_unitary(bit: u8) -> ComplexMatrix {
    match bit {
        0 => ComplexMatrix::pauli_x(),
        1 => ComplexMatrix::from_real_2x2([0.0, 1.0, -1.0, 0.0]),
        _ => panic!("message bits are 0 or 1"),
    }
}

/// Applies the encoding unitary for `bit` to Alice's qubit (the first
/// tensor factor).
pub fn encode_pair(rho: &DensityMatrix, bit: u8) -> DensityMatrix {
    let lifted = tensor(
        &encoding_unitary(bit),
        &ComplexMatrix::identity(2).expect("dim 2"),
    )
    .expect("2x2 factors");
    apply_unitary(rho, &lifted).expect("unitary conjugation preserves validity")
}

/// Record of the permutation applied by [`shuffle_sequence`]:
/// `shuffled[i] = original[record[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationRecord(Vec<usize>);

impl PermutationRecord {
    pub fn positions(&self) -> &[usize] {
        &self.0
    }
}

/// Uniformly shuffles a sequence (Fisher-Yates on the given generator) and
/// records the permutation so the receiver can restore the original order.
pub fn shuffle_sequence<T: Clone, R: Rng>(
    sequence: &[T],
    rng: &mut R,
) -> (Vec<T>, PermutationRecord) {
    let n = sequence.len();
    let mut positions: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        positions.swap(i, j);
    }
    let shuffled = positions.iter().map(|&p| sequence[p].clone()).collect();
    (shuffled, PermutationRecord(positions))
}

/// Inverts [`shuffle_sequence`]: returns the sequence in its original order.
pub fn restore_sequence<T: Clone>(shuffled: &[T], record: &PermutationRecord) -> Vec<T> {
    assert_eq!(
        shuffled.len(),
        record.0.len(),
        "permutation record does not match the sequence length"
    );
    let mut slots: Vec<Option<T>> = vec![None; shuffled.len()];
    for (i, &p) in record.0.iter().enumerate() {
        slots[p] = Some(shuffled[i].clone());
    }
    slots
        .into_iter()
        .map(|slot| slot.expect("a permutation covers every position"))
        .collect()
}

/// Result of a Bell-state measurement on one received pair. Only `psi+`
/// and `psi-` are unambiguously distinguishable; the `phi` outcomes are
/// inconclusive and discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeOutcome {
    Bit0,
    Bit1,
    Inconclusive,
}

/// Samples a Bell label from the state's Bell-basis distribution and maps
/// `psi+ -> 0`, `psi- -> 1`, `phi+- -> inconclusive`.
pub fn decode_pair<R: Rng>(rho: &DensityMatrix, rng: &mut R) -> DecodeOutcome {
    let probs = bell_probabilities(rho);
    let u: f64 = rng.random::<f64>() * probs.sum();
    if u < probs.psi_plus {
        DecodeOutcome::Bit0
    } else if u < probs.psi_plus + probs.psi_minus {
        DecodeOutcome::Bit1
    } else {
        DecodeOutcome::Inconclusive
    }
}

/// Runs the five-stage protocol. Deterministic for a fixed configuration
/// and seed. Aborts (as an outcome, not an error) at stage 2 or stage 4
/// when the sampled CHSH value fails to violate the classical bound.
pub fn run(config: &ProtocolConfig) -> Result<ProtocolOutcome, ProtocolError> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let kind = config.channel.kind();
    let eta = config.link.efficiency();
    let p = config.channel.decay(config.gamma_t_per_hop)?;
    let rho1 = metrics::first_round_state(kind, p, eta)?;

    // Stage 1: prepare N pairs and randomly tag check (C) vs message (M).
    let round1_check: Vec<bool> = (0..config.n_pairs)
        .map(|_| rng.random_bool(config.check_fraction))
        .collect();
    let n_check1 = round1_check.iter().filter(|&&c| c).count();

    // Stage 2: first transmission already folded into rho1; run the first
    // security round on the C sequence.
    let round1 = sample_security_round(&rho1, n_check1, &config.settings, &mut rng);
    if round1.s_hat <= 2.0 {
        return Ok(ProtocolOutcome {
            round1,
            round2: None,
            aborted_at: Some(AbortStage::Stage2),
            decoded_bits: String::new(),
            capacity: None,
        });
    }

    // Stage 4 check photons come from the message sequence and stay
    // unencoded; pick them before encoding.
    let message_pool: Vec<usize> = (0..config.n_pairs).filter(|&i| !round1_check[i]).collect();
    let round2_check: Vec<bool> = message_pool
        .iter()
        .map(|_| rng.random_bool(config.round2_check_fraction))
        .collect();
    let n_check2 = round2_check.iter().filter(|&&c| c).count();
    let available = message_pool.len() - n_check2;
    if available < config.message_bits.len() {
        return Err(ProtocolError::MessageDoesNotFit {
            needed: config.message_bits.len(),
            available,
        });
    }

    // Stage 3: encode one message bit per remaining message pair.
    let rho1_encoded = [encode_pair(&rho1, 0), encode_pair(&rho1, 1)];

    // Stage 4: shuffle the outgoing sequence, transmit, and restore.
    let outgoing: Vec<usize> = message_pool.clone();
    let (shuffled, record) = shuffle_sequence(&outgoing, &mut rng);
    let restored = restore_sequence(&shuffled, &record);
    debug_assert_eq!(restored, outgoing);

    let rho2_check_state = metrics::second_round_state_from(&rho1, kind, p, eta)?;
    let rho2_encoded = [
        metrics::second_round_state_from(&rho1_encoded[0], kind, p, eta)?,
        metrics::second_round_state_from(&rho1_encoded[1], kind, p, eta)?,
    ];

    let round2 = sample_security_round(&rho2_check_state, n_check2, &config.settings, &mut rng);
    if round2.s_hat <= 2.0 {
        return Ok(ProtocolOutcome {
            round1,
            round2: Some(round2),
            aborted_at: Some(AbortStage::Stage4),
            decoded_bits: String::new(),
            capacity: None,
        });
    }

    // Stage 5: Bell-measure the encoded pairs in original sequence order.
    let mut decoded_bits = String::with_capacity(config.message_bits.len());
    for &bit in &config.message_bits {
        let outcome = decode_pair(&rho2_encoded[bit as usize], &mut rng);
        decoded_bits.push(match outcome {
            DecodeOutcome::Bit0 => '0',
            DecodeOutcome::Bit1 => '1',
            DecodeOutcome::Inconclusive => '?',
        });
    }

    let capacity = metrics::capacity(round2.q_hat, round1.s_hat)?;
    Ok(ProtocolOutcome {
        round1,
        round2: Some(round2),
        aborted_at: None,
        decoded_bits,
        capacity: Some(capacity),
    })
}
