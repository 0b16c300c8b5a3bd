//! Non-Markovian amplitude-damping and dephasing channel models.
//!
//! A channel carries a coupling rate `gamma` (qubit relaxation) and a
//! linewidth `big_gamma` (reservoir correlation). Time enters only through
//! the dimensionless products `gamma * t` and the ratio `big_gamma / gamma`,
//! so callers typically build channels with [`NoiseChannel::from_ratio`] and
//! pass `gamma * t` as the time argument.

use crate::qcore::{ComplexMatrix, KrausSet};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("rate {0} must be positive")]
    NonPositiveRate(f64),
    #[error("time {0} must be non-negative")]
    NegativeTime(f64),
    #[error("decay value {0} outside [0, 1]")]
    DecayOutOfRange(f64),
    #[error("backflow witness needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    AmplitudeDamping,
    Dephasing,
}

impl ChannelKind {
    /// Kraus operators at a given decay value.
    ///
    /// Amplitude damping: `E0 = |0><0| + sqrt(p)|1><1|`,
    /// `E1 = sqrt(1-p)|0><1|`. Dephasing: `E0 = |0><0| + p|1><1|`,
    /// `E1 = sqrt(1-p^2)|1><1|`.
    pub fn kraus_from_decay(self, p: f64) -> Result<KrausSet, ChannelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ChannelError::DecayOutOfRange(p));
        }
        let c = |x: f64| Complex64::new(x, 0.0);
        let (e0, e1) = match self {
            ChannelKind::AmplitudeDamping => {
                let mut e0 = ComplexMatrix::zeros(2).expect("dim 2");
                e0.set(0, 0, c(1.0));
                e0.set(1, 1, c(p.sqrt()));
                let mut e1 = ComplexMatrix::zeros(2).expect("dim 2");
                e1.set(0, 1, c((1.0 - p).sqrt()));
                (e0, e1)
            }
            ChannelKind::Dephasing => {
                let mut e0 = ComplexMatrix::zeros(2).expect("dim 2");
                e0.set(0, 0, c(1.0));
                e0.set(1, 1, c(p));
                let mut e1 = ComplexMatrix::zeros(2).expect("dim 2");
                e1.set(1, 1, c((1.0 - p * p).max(0.0).sqrt()));
                (e0, e1)
            }
        };
        KrausSet::new(vec![e0, e1]).map_err(|_| ChannelError::DecayOutOfRange(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeLabel {
    Markovian,
    NonMarkovian,
}

/// A noise channel with coupling rate `gamma > 0` and linewidth
/// `big_gamma > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannel {
    kind: ChannelKind,
    gamma: f64,
    big_gamma: f64,
}

impl NoiseChannel {
    pub fn new(kind: ChannelKind, gamma: f64, big_gamma: f64) -> Result<Self, ChannelError> {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(ChannelError::NonPositiveRate(gamma));
        }
        if big_gamma.is_nan() || big_gamma <= 0.0 {
            return Err(ChannelError::NonPositiveRate(big_gamma));
        }
        Ok(Self {
            kind,
            gamma,
            big_gamma,
        })
    }

    /// Channel with `gamma = 1`, so times are the dimensionless `gamma * t`
    /// and `ratio` is `big_gamma / gamma`.
    pub fn from_ratio(kind: ChannelKind, ratio: f64) -> Result<Self, ChannelError> {
        Self::new(kind, 1.0, ratio)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn big_gamma(&self) -> f64 {
        self.big_gamma
    }

    /// Decay function p(t), clamped into [0, 1].
    ///
    /// Amplitude damping:
    /// `p_a(t) = e^{-Gamma t} [cos(b t/2) + (Gamma/b) sin(b t/2)]^2` with
    /// `b = sqrt(2 gamma Gamma - Gamma^2)`. For `2 gamma < Gamma` the root
    /// is imaginary and the expression continues to the hyperbolic form
    /// with `b~ = sqrt(Gamma^2 - 2 gamma Gamma)`; at `2 gamma = Gamma` the
    /// analytic limit is `e^{-Gamma t}(1 + Gamma t/2)^2`.
    ///
    /// Dephasing:
    /// `p_d(t) = exp[-(gamma/2){t + (e^{-Gamma t} - 1)/Gamma}]`.
    pub fn decay(&self, t: f64) -> Result<f64, ChannelError> {
        if t < 0.0 {
            return Err(ChannelError::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        let (g, gg) = (self.gamma, self.big_gamma);
        let p = match self.kind {
            ChannelKind::AmplitudeDamping => {
                let disc = 2.0 * g * gg - gg * gg;
                if disc > 0.0 {
                    let b = disc.sqrt();
                    let inner = (b * t / 2.0).cos() + (gg / b) * (b * t / 2.0).sin();
                    (-gg * t).exp() * inner * inner
                } else if disc < 0.0 {
                    // Evaluated in log space: the naive cosh/sinh product
                    // overflows to inf * 0 for large Gamma t even though
                    // p itself decays like e^{-(Gamma - b) t}.
                    let b = (-disc).sqrt();
                    let r = gg / b;
                    let x = b * t / 2.0;
                    let ln_inner = x + (((1.0 + r) + (-2.0 * x).exp() * (1.0 - r)) / 2.0).ln();
                    (-gg * t + 2.0 * ln_inner).exp()
                } else {
                    let inner = 1.0 + gg * t / 2.0;
                    (-gg * t).exp() * inner * inner
                }
            }
            ChannelKind::Dephasing => (-(g / 2.0) * (t + ((-gg * t).exp() - 1.0) / gg)).exp(),
        };
        Ok(p.clamp(0.0, 1.0))
    }

    /// Kraus set of this channel at time `t`.
    pub fn kraus_at(&self, t: f64) -> Result<KrausSet, ChannelError> {
        self.kind.kraus_from_decay(self.decay(t)?)
    }

    /// Markovian iff `2 gamma <= Gamma`, applied to both channel kinds.
    pub fn regime(&self) -> RegimeLabel {
        if 2.0 * self.gamma <= self.big_gamma {
            RegimeLabel::Markovian
        } else {
            RegimeLabel::NonMarkovian
        }
    }

    /// True iff the decay function strictly increases between two
    /// consecutive points of a uniform grid over `[0, t_max]` by more than
    /// 1e-9, the signature of information flowing back from the
    /// environment.
    pub fn backflow_witness(&self, t_max: f64, steps: usize) -> Result<bool, ChannelError> {
        if steps < 2 {
            return Err(ChannelError::TooFewSteps(steps));
        }
        let mut previous = self.decay(0.0)?;
        for i in 1..=steps {
            let t = t_max * i as f64 / steps as f64;
            let current = self.decay(t)?;
            if current > previous + 1e-9 {
                return Ok(true);
            }
            previous = current;
        }
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATIO_GRID: [f64; 7] = [0.01, 0.1, 1.0, 2.0, 5.0, 10.0, 100.0];

    fn ad(ratio: f64) -> NoiseChannel {
        NoiseChannel::from_ratio(ChannelKind::AmplitudeDamping, ratio).unwrap()
    }

    fn dephasing(ratio: f64) -> NoiseChannel {
        NoiseChannel::from_ratio(ChannelKind::Dephasing, ratio).unwrap()
    }

    /// Independent oracle for the amplitude-damping decay: RK4 integration
    /// of the damped amplitude equation G'' + Gamma G' + (gamma Gamma/2) G = 0
    /// with G(0) = 1, G'(0) = 0; p(t) = G(t)^2.
    fn p_a_oracle(gamma: f64, big_gamma: f64, t_end: f64) -> f64 {
        let n = 200_000usize;
        let h = t_end / n as f64;
        let spring = gamma * big_gamma / 2.0;
        let accel = |g: f64, v: f64| -big_gamma * v - spring * g;
        let (mut g, mut v) = (1.0f64, 0.0f64);
        for _ in 0..n {
            let (k1g, k1v) = (v, accel(g, v));
            let (k2g, k2v) = (
                v + h / 2.0 * k1v,
                accel(g + h / 2.0 * k1g, v + h / 2.0 * k1v),
            );
            let (k3g, k3v) = (
                v + h / 2.0 * k2v,
                accel(g + h / 2.0 * k2g, v + h / 2.0 * k2v),
            );
            let (k4g, k4v) = (v + h * k3v, accel(g + h * k3g, v + h * k3v));
            g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        g * g
    }

    /// Independent oracle for the dephasing decay: Simpson quadrature of
    /// the accumulated exponent, p(t) = exp(-(gamma/2) int_0^t 1 - e^{-Gamma s} ds).
    fn p_d_oracle(gamma: f64, big_gamma: f64, t_end: f64) -> f64 {
        let n = 200_000usize;
        let h = t_end / n as f64;
        let f = |s: f64| 1.0 - (-big_gamma * s).exp();
        let mut acc = f(0.0) + f(t_end);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        (-(gamma / 2.0) * acc * h / 3.0).exp()
    }

    #[test]
    fn decay_is_one_at_time_zero() {
        for ratio in RATIO_GRID {
            assert_eq!(ad(ratio).decay(0.0).unwrap(), 1.0);
            assert_eq!(dephasing(ratio).decay(0.0).unwrap(), 1.0);
        }
        assert!(ad(1.0).decay(-0.1).is_err());
    }

    #[test]
    fn amplitude_damping_decay_matches_oracle() {
        // hyperbolic branch, frozen oracle value
        let p = ad(5.0).decay(1.0).unwrap();
        assert!((p - 0.4228960055).abs() < 1e-6, "{p}");
        assert!((p - p_a_oracle(1.0, 5.0, 1.0)).abs() < 1e-8);
        assert!((p - 0.4228).abs() < 1e-3);
        // trigonometric branch
        let p = ad(0.1).decay(1.0).unwrap();
        assert!((p - 0.9524058827).abs() < 1e-6, "{p}");
        assert!((p - p_a_oracle(1.0, 0.1, 1.0)).abs() < 1e-8);
        assert!((p - 0.9524).abs() < 1e-3);
    }

    #[test]
    fn dephasing_decay_matches_oracle() {
        let p = dephasing(5.0).decay(1.0).unwrap();
        assert!((p - 0.6698685401).abs() < 1e-6, "{p}");
        assert!((p - p_d_oracle(1.0, 5.0, 1.0)).abs() < 1e-8);
        let p = dephasing(0.1).decay(1.0).unwrap();
        assert!((p - 0.9761030734).abs() < 1e-6, "{p}");
        assert!((p - p_d_oracle(1.0, 0.1, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn decay_stays_in_unit_interval_on_grid() {
        for ratio in RATIO_GRID {
            for ch in [ad(ratio), dephasing(ratio)] {
                for i in 0..=1000 {
                    let t = 10.0 * i as f64 / 1000.0;
                    let p = ch.decay(t).unwrap();
                    assert!((0.0..=1.0).contains(&p), "p={p} ratio={ratio} t={t}");
                }
            }
        }
    }

    #[test]
    fn decay_is_continuous_across_branch_point() {
        let eps = 1e-6;
        for i in 0..=100 {
            let t = 10.0 * i as f64 / 100.0;
            let below = ad(2.0 - eps).decay(t).unwrap();
            let at = ad(2.0).decay(t).unwrap();
            let above = ad(2.0 + eps).decay(t).unwrap();
            assert!((below - above).abs() < 1e-4, "t={t}");
            assert!((below - at).abs() < 1e-4, "t={t}");
        }
    }

    #[test]
    fn kraus_sets_are_complete_and_match_closed_forms() {
        for ratio in RATIO_GRID {
            for t in [0.0, 0.3, 1.0, 4.0] {
                // KrausSet::new enforces completeness to 1e-10
                ad(ratio).kraus_at(t).unwrap();
                dephasing(ratio).kraus_at(t).unwrap();
            }
        }
        // noiseless limit: {I, 0}
        let set = ChannelKind::AmplitudeDamping.kraus_from_decay(1.0).unwrap();
        assert!((set.operators()[0].get(1, 1).re - 1.0).abs() < 1e-12);
        assert!(set.operators()[1].get(0, 1).norm() < 1e-12);
        // full decay: {|0><0|, |0><1|}
        let set = ChannelKind::AmplitudeDamping.kraus_from_decay(0.0).unwrap();
        assert!(set.operators()[0].get(1, 1).norm() < 1e-12);
        assert!((set.operators()[1].get(0, 1).re - 1.0).abs() < 1e-12);
        // dephasing at p = 0.5: diag(1, 0.5) and diag(0, sqrt(0.75))
        let set = ChannelKind::Dephasing.kraus_from_decay(0.5).unwrap();
        assert!((set.operators()[0].get(1, 1).re - 0.5).abs() < 1e-12);
        assert!((set.operators()[1].get(1, 1).re - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn regime_threshold_is_inclusive() {
        assert_eq!(ad(5.0).regime(), RegimeLabel::Markovian);
        assert_eq!(ad(0.1).regime(), RegimeLabel::NonMarkovian);
        assert_eq!(ad(2.0).regime(), RegimeLabel::Markovian);
        assert_eq!(dephasing(2.0).regime(), RegimeLabel::Markovian);
        assert_eq!(dephasing(1.99).regime(), RegimeLabel::NonMarkovian);
    }

    #[test]
    fn backflow_examples() {
        assert!(ad(0.1).backflow_witness(10.0, 1000).unwrap());
        assert!(!ad(5.0).backflow_witness(10.0, 1000).unwrap());
        for ratio in RATIO_GRID {
            assert!(!dephasing(ratio).backflow_witness(10.0, 1000).unwrap());
        }
        assert!(ad(0.1).backflow_witness(10.0, 1).is_err());
    }

    #[test]
    fn backflow_matches_regime_for_amplitude_damping() {
        // The first revival sits at gamma*t = (2/b)(pi - atan(b/Gamma)),
        // which reaches ~23.3 for ratio 0.01; 30 covers the whole grid.
        for ratio in RATIO_GRID {
            let ch = ad(ratio);
            let witnessed = ch.backflow_witness(30.0, 3000).unwrap();
            assert_eq!(
                witnessed,
                ch.regime() == RegimeLabel::NonMarkovian,
                "ratio={ratio}"
            );
        }
    }

    #[test]
    fn markovian_amplitude_damping_is_monotone() {
        for ratio in [2.0, 5.0, 10.0, 100.0] {
            let ch = ad(ratio);
            let mut prev = ch.decay(0.0).unwrap();
            for i in 1..=1000 {
                let p = ch.decay(10.0 * i as f64 / 1000.0).unwrap();
                assert!(p <= prev + 1e-12, "ratio={ratio}");
                prev = p;
            }
        }
    }

    #[test]
    fn dephasing_is_monotone_for_all_ratios() {
        for ratio in RATIO_GRID {
            let ch = dephasing(ratio);
            let mut prev = ch.decay(0.0).unwrap();
            for i in 1..=1000 {
                let p = ch.decay(10.0 * i as f64 / 1000.0).unwrap();
                assert!(p <= prev + 1e-12, "ratio={ratio}");
                prev = p;
            }
        }
    }

    #[test]
    fn channel_construction_validates_rates() {
        assert!(NoiseChannel::new(ChannelKind::Dephasing, 0.0, 1.0).is_err());
        assert!(NoiseChannel::new(ChannelKind::Dephasing, 1.0, -1.0).is_err());
    }
}
