//! Block encoding and decoding at the information layer.
//!
//! One logical bit is carried by a whole block of photon pairs: Alice
//! applies the two encoding unitaries as a 50% duty-cycle square wave at a
//! bit-dependent modulation frequency, Bob Bell-measures the few photons
//! that survive the channel and recovers the frequency from the discrete
//! Fourier transform of his timestamped outcomes. An eavesdropper without
//! the measurement outcomes sees only a white-noise spectrum.

use crate::protocol::{decode_pair, encoding_unitary, DecodeOutcome};
use crate::qcore::{apply_unitary, tensor, ComplexMatrix, DensityMatrix};
use num_complex::Complex64;
use rand::{Rng, RngExt};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("invalid block configuration: {0}")]
    InvalidConfig(String),
    #[error("empty detection record cannot be decoded")]
    EmptyRecord,
}

/// Configuration for block encoding.
///
/// The defaults model a 1 ms block of 10000 photons of which roughly 100
/// survive 20 dB of channel loss, with 25 kHz modulation for bit 0 and
/// 50 kHz for bit 1. `freq_grid` is the decoder's search grid; the default
/// steps by the block's natural frequency resolution `1/block_duration`
/// (1 kHz), on which an unmodulated detection stream is spectrally flat.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockConfig {
    /// Block length in seconds.
    pub block_duration: f64,
    pub photons_per_block: usize,
    /// Expected number of surviving photons; the per-photon survival
    /// probability is `expected_detections / photons_per_block`.
    pub expected_detections: usize,
    /// Modulation frequency (Hz) encoding bit 0.
    pub freq_for_zero: f64,
    /// Modulation frequency (Hz) encoding bit 1.
    pub freq_for_one: f64,
    /// Ascending decoder grid over (0, 50 kHz].
    pub freq_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            block_duration: 1e-3,
            photons_per_block: 10_000,
            expected_detections: 100,
            freq_for_zero: 25_000.0,
            freq_for_one: 50_000.0,
            freq_grid: Self::grid_with_step(1_000.0),
            seed: 7,
        }
    }
}

impl BlockConfig {
    /// Grid `{step, 2 step, ...}` up to 50 kHz inclusive.
    pub fn grid_with_step(step: f64) -> Vec<f64> {
        assert!(step > 0.0, "grid step must be positive");
        let count = (50_000.0 / step).floor() as usize;
        (1..=count).map(|k| k as f64 * step).collect()
    }

    pub fn validate(&self) -> Result<(), BlockError> {
        if self.block_duration <= 0.0 {
            return Err(BlockError::InvalidConfig(
                "block_duration must be positive".into(),
            ));
        }
        if self.photons_per_block < 1 {
            return Err(BlockError::InvalidConfig(
                "photons_per_block must be >= 1".into(),
            ));
        }
        if self.expected_detections > self.photons_per_block {
            return Err(BlockError::InvalidConfig(
                "expected_detections cannot exceed photons_per_block".into(),
            ));
        }
        if self.freq_for_zero == self.freq_for_one {
            return Err(BlockError::InvalidConfig(
                "the two modulation frequencies must differ".into(),
            ));
        }
        if self.freq_grid.is_empty()
            || self.freq_grid.windows(2).any(|w| w[0] >= w[1])
            || self.freq_grid[0] <= 0.0
            || *self.freq_grid.last().expect("nonempty") > 50_000.0
        {
            return Err(BlockError::InvalidConfig(
                "freq_grid must be ascending within (0, 50000]".into(),
            ));
        }
        for f in [self.freq_for_zero, self.freq_for_one] {
            if !self.freq_grid.iter().any(|&g| (g - f).abs() < 1e-9) {
                return Err(BlockError::InvalidConfig(format!(
                    "modulation frequency {f} Hz is not on the decoder grid"
                )));
            }
        }
        Ok(())
    }

    pub fn survival_probability(&self) -> f64 {
        self.expected_detections as f64 / self.photons_per_block as f64
    }

    fn modulation_frequency(&self, bit: u8) -> f64 {
        match bit {
            0 => self.freq_for_zero,
            1 => self.freq_for_one,
            _ => panic!("message bits are 0 or 1"),
        }
    }
}

/// Timestamped Bell-measurement outcomes for one block, ordered by
/// detection time. `x = 0` records `psi+`, `x = 1` records `psi-`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    detections: Vec<(f64, u8)>,
}

impl DetectionRecord {
    /// Builds a record, sorting by timestamp.
    pub fn new(mut detections: Vec<(f64, u8)>) -> Self {
        detections.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite timestamps"));
        Self { detections }
    }

    pub fn detections(&self) -> &[(f64, u8)] {
        &self.detections
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.detections.iter().map(|&(tau, _)| tau).collect()
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

/// Which encoding unitary the square-wave modulation applies at offset
/// `tau` into the block: `U0` while the wave is high (first half-period),
/// `U1` while it is low.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationOp {
    ApplyU0,
    ApplyU1,
}

pub fn modulation_bit_at(config: &BlockConfig, bit: u8, tau: f64) -> ModulationOp {
    assert!(
        (0.0..config.block_duration).contains(&tau),
        "tau outside the block"
    );
    let f = config.modulation_frequency(bit);
    let half_periods = (tau * 2.0 * f).floor() as u64;
    if half_periods.is_multiple_of(2) {
        ModulationOp::ApplyU0
    } else {
        ModulationOp::ApplyU1
    }
}

/// Simulates one encoded block: every photon gets a uniform detection
/// time, survives with the configured probability, is modulated by the
/// square wave at its timestamp and Bell-measured. Inconclusive outcomes
/// (`phi+-`) are dropped as non-detections.
pub fn simulate_block<F, R>(
    config: &BlockConfig,
    bit: u8,
    mut pair_state: F,
    rng: &mut R,
) -> DetectionRecord
where
    F: FnMut() -> DensityMatrix,
    R: Rng,
{
    let survival = config.survival_probability();
    let id2 = ComplexMatrix::identity(2).expect("dim 2");
    let lifted_u0 = tensor(&encoding_unitary(0), &id2).expect("2x2 factors");
    let lifted_u1 = tensor(&encoding_unitary(1), &id2).expect("2x2 factors");
    let mut detections = Vec::with_capacity(config.expected_detections * 2);
    for _ in 0..config.photons_per_block {
        if !rng.random_bool(survival) {
            continue;
        }
        let tau: f64 = rng.random::<f64>() * config.block_duration;
        let unitary = match modulation_bit_at(config, bit, tau) {
            ModulationOp::ApplyU0 => &lifted_u0,
            ModulationOp::ApplyU1 => &lifted_u1,
        };
        let modulated = apply_unitary(&pair_state(), unitary).expect("unitary preserves validity");
        match decode_pair(&modulated, rng) {
            DecodeOutcome::Bit0 => detections.push((tau, 0)),
            DecodeOutcome::Bit1 => detections.push((tau, 1)),
            DecodeOutcome::Inconclusive => {}
        }
    }
    DetectionRecord::new(detections)
}

/// Magnitude spectrum `|X(f)| = |sum_i x_i exp(-j 2 pi f tau_i)|` per grid
/// frequency. The `x = 0` detections contribute nothing by construction.
pub fn dft_spectrum(record: &DetectionRecord, freqs: &[f64]) -> Result<Vec<f64>, BlockError> {
    if record.is_empty() {
        return Err(BlockError::EmptyRecord);
    }
    Ok(freqs
        .iter()
        .map(|&f| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(tau, x) in record.detections() {
                if x == 1 {
                    acc += Complex64::from_polar(1.0, -TAU * f * tau);
                }
            }
            acc.norm()
        })
        .collect())
}

/// Decoded value of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockDecode {
    Bit0,
    Bit1,
    Undecodable,
}

/// Decodes a block as the grid frequency maximizing `|X(f)|`, with ties
/// broken toward the lower frequency. Returns `Undecodable` when the
/// record is empty or the peak sits at neither modulation frequency.
pub fn decode_block(record: &DetectionRecord, config: &BlockConfig) -> BlockDecode {
    let spectrum = match dft_spectrum(record, &config.freq_grid) {
        Ok(s) => s,
        Err(_) => return BlockDecode::Undecodable,
    };
    let mut best = 0usize;
    for (i, &mag) in spectrum.iter().enumerate() {
        if mag > spectrum[best] {
            best = i;
        }
    }
    let peak = config.freq_grid[best];
    if (peak - config.freq_for_zero).abs() < 1e-9 {
        BlockDecode::Bit0
    } else if (peak - config.freq_for_one).abs() < 1e-9 {
        BlockDecode::Bit1
    } else {
        BlockDecode::Undecodable
    }
}

/// The eavesdropper's view: she has the detection timestamps but not the
/// Bell outcomes, so her `x` values are independent fair coin flips. With
/// no detections the spectrum is identically zero.
pub fn eve_spectrum<R: Rng>(timestamps: &[f64], config: &BlockConfig, rng: &mut R) -> Vec<f64> {
    let xs: Vec<u8> = timestamps
        .iter()
        .map(|_| if rng.random_bool(0.5) { 1 } else { 0 })
        .collect();
    config
        .freq_grid
        .iter()
        .map(|&f| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&tau, &x) in timestamps.iter().zip(&xs) {
                if x == 1 {
                    acc += Complex64::from_polar(1.0, -TAU * f * tau);
                }
            }
            acc.norm()
        })
        .collect()
}
