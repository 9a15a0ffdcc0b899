//! Ground-truth evaluation: RMS error, synthetic error injection and label
//! sampling.

pub mod bench;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{RepairError, Result};
use crate::series::{LabeledSeries, TimeSeries};

/// Generator identity recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9) seeded via seed_from_u64; \
     Gaussian draws via rand_distr 0.5 Normal";

pub const DEFAULT_DECAY: f64 = 0.8;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` independent seeds drawn from one master seed.
pub fn derive_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| rng.random()).collect()
}

pub fn rms(truth: &[f64], repair: &[f64]) -> Result<f64> {
    if truth.len() != repair.len() {
        return Err(RepairError::LengthMismatch {
            expected: truth.len(),
            actual: repair.len(),
        });
    }
    if truth.is_empty() {
        return Err(RepairError::EmptySeries);
    }
    let sq: f64 = truth
        .iter()
        .zip(repair)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / truth.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Shift,
    Innovational,
    Spike,
}

impl ErrorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorKind::Shift => "shift",
            ErrorKind::Innovational => "innovational",
            ErrorKind::Spike => "spike",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorKind {
    type Err = RepairError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift" => Ok(ErrorKind::Shift),
            "innovational" => Ok(ErrorKind::Innovational),
            "spike" => Ok(ErrorKind::Spike),
            other => Err(RepairError::InvalidParameter(format!(
                "unknown error kind '{other}' (expected shift, innovational or spike)"
            ))),
        }
    }
}

/// One window of injected errors. `start` is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSpec {
    pub kind: ErrorKind,
    pub start: usize,
    pub length: usize,
    pub amount: f64,
    pub variance: f64,
    pub decay: f64,
    pub seed: u64,
}

impl ErrorSpec {
    pub fn shift(start: usize, length: usize, amount: f64, variance: f64, seed: u64) -> Self {
        Self {
            kind: ErrorKind::Shift,
            start,
            length,
            amount,
            variance,
            decay: DEFAULT_DECAY,
            seed,
        }
    }

    pub fn spike(start: usize, amount: f64, variance: f64, seed: u64) -> Self {
        Self {
            kind: ErrorKind::Spike,
            length: 1,
            ..Self::shift(start, 1, amount, variance, seed)
        }
    }

    pub fn innovational(
        start: usize,
        length: usize,
        amount: f64,
        decay: f64,
        variance: f64,
        seed: u64,
    ) -> Self {
        Self {
            kind: ErrorKind::Innovational,
            decay,
            ..Self::shift(start, length, amount, variance, seed)
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if self.length == 0 {
            return Err(RepairError::InvalidParameter(
                "error length must be at least 1".into(),
            ));
        }
        if self.kind == ErrorKind::Spike && self.length != 1 {
            return Err(RepairError::InvalidParameter(format!(
                "spike errors have length 1, got {}",
                self.length
            )));
        }
        if !self.amount.is_finite() {
            return Err(RepairError::InvalidParameter(
                "amount must be finite".into(),
            ));
        }
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return Err(RepairError::InvalidParameter(format!(
                "variance must be finite and non-negative, got {}",
                self.variance
            )));
        }
        if self.kind == ErrorKind::Innovational && !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(RepairError::InvalidParameter(format!(
                "decay must lie in (0, 1), got {}",
                self.decay
            )));
        }
        let last = self.start.saturating_add(self.length - 1);
        if last >= len {
            return Err(RepairError::IndexOutOfRange { index: last, len });
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<f64> {
        let mut rng = rng_from_seed(self.seed);
        let sd = self.variance.sqrt();
        match self.kind {
            ErrorKind::Shift | ErrorKind::Spike => {
                let dist = Normal::new(self.amount, sd).expect("validated spread");
                (0..self.length).map(|_| rng.sample(dist)).collect()
            }
            ErrorKind::Innovational => {
                let dist = Normal::new(0.0, sd).expect("validated spread");
                let mut level = self.amount;
                (0..self.length)
                    .map(|_| {
                        let v = level + rng.sample(dist);
                        level *= self.decay;
                        v
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectedErrors {
    pub dirty: TimeSeries,
    pub mask: BTreeSet<usize>,
}

pub fn inject_errors(
    truth: &TimeSeries,
    spec: &ErrorSpec,
) -> Result<(TimeSeries, BTreeSet<usize>)> {
    let out = inject_all(truth, std::slice::from_ref(spec))?;
    Ok((out.dirty, out.mask))
}

/// Applies every window in order. Offsets add up where windows overlap.
pub fn inject_all(truth: &TimeSeries, specs: &[ErrorSpec]) -> Result<InjectedErrors> {
    let mut dirty = truth.values().to_vec();
    let mut mask = BTreeSet::new();
    for spec in specs {
        spec.validate(truth.len())?;
        for (k, off) in spec.offsets().into_iter().enumerate() {
            dirty[spec.start + k] += off;
            mask.insert(spec.start + k);
        }
    }
    Ok(InjectedErrors {
        dirty: TimeSeries::new(dirty)?,
        mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    #[default]
    Uniform,
    Prefix,
}

impl LabelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelMode::Uniform => "uniform",
            LabelMode::Prefix => "prefix",
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelMode {
    type Err = RepairError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(LabelMode::Uniform),
            "prefix" => Ok(LabelMode::Prefix),
            other => Err(RepairError::InvalidParameter(format!(
                "unknown label mode '{other}' (expected uniform or prefix)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelingPolicy {
    pub rate: f64,
    pub seed: u64,
    pub mode: LabelMode,
}

/// Labels positions with their true value. Selection ignores where errors
/// were injected.
pub fn sample_labels(truth: &TimeSeries, policy: &LabelingPolicy) -> Result<LabeledSeries> {
    if !(0.0..=1.0).contains(&policy.rate) {
        return Err(RepairError::InvalidParameter(format!(
            "labeling rate must lie in [0, 1], got {}",
            policy.rate
        )));
    }
    match policy.mode {
        LabelMode::Uniform => {
            let mut rng = rng_from_seed(policy.seed);
            LabeledSeries::from_pairs(
                truth
                    .iter()
                    .enumerate()
                    .filter(|_| rng.random_bool(policy.rate))
                    .map(|(i, &v)| (i, v)),
            )
        }
        LabelMode::Prefix => {
            let count = ((policy.rate * truth.len() as f64).ceil() as usize).min(truth.len());
            LabeledSeries::prefix(&truth[..count])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(n: usize, v: f64) -> TimeSeries {
        TimeSeries::new(vec![v; n]).unwrap()
    }

    #[test]
    fn rms_cases() {
        assert_eq!(rms(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rms(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355).abs() < 1e-4);
        assert!(rms(&[0.0], &[0.0, 1.0]).is_err());
        assert!(rms(&[], &[]).is_err());
    }

    #[test]
    fn rms_of_published_ar_output() {
        let truth = [6.0, 5.6, 5.4, 5.2, 5.4, 5.4, 5.6, 5.9, 6.3, 6.8, 7.5, 8.5];
        let ar = [
            6.0, 5.6, 5.4, 5.52, 5.64, 5.4, 5.6, 5.72, 5.84, 5.97, 6.10, 8.5,
        ];
        assert!((rms(&truth, &ar).unwrap() - 0.51).abs() < 0.02);
    }

    #[test]
    fn shift_without_noise() {
        let truth = constant(12, 10.0);
        let (dirty, mask) = inject_errors(&truth, &ErrorSpec::shift(4, 4, 3.0, 0.0, 1)).unwrap();
        for i in 0..12 {
            let want = if (4..8).contains(&i) { 13.0 } else { 10.0 };
            assert_eq!(dirty[i], want);
        }
        assert_eq!(mask, (4..8).collect());
    }

    #[test]
    fn shift_noise_mean() {
        let truth = constant(500, 0.0);
        let spec = ErrorSpec::shift(100, 200, 3.0, 0.1, 42);
        let (dirty, _) = inject_errors(&truth, &spec).unwrap();
        let mean = dirty[100..300].iter().sum::<f64>() / 200.0;
        assert!((mean - 3.0).abs() <= 3.0 * (0.1f64 / 200.0).sqrt());
    }

    #[test]
    fn innovational_geometric() {
        let truth = constant(6, 0.0);
        let spec = ErrorSpec::innovational(1, 3, 4.0, 0.5, 0.0, 9);
        let (dirty, _) = inject_errors(&truth, &spec).unwrap();
        assert_eq!(dirty.values(), &[0.0, 4.0, 2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn spec_validation() {
        let truth = constant(10, 0.0);
        assert!(inject_errors(&truth, &ErrorSpec::shift(8, 3, 1.0, 0.0, 0)).is_err());
        assert!(inject_errors(&truth, &ErrorSpec::shift(0, 0, 1.0, 0.0, 0)).is_err());
        assert!(inject_errors(&truth, &ErrorSpec::shift(0, 2, 1.0, -1.0, 0)).is_err());
        let mut spike = ErrorSpec::spike(3, 1.0, 0.0, 0);
        assert!(inject_errors(&truth, &spike).is_ok());
        spike.length = 2;
        assert!(inject_errors(&truth, &spike).is_err());
        let bad_decay = ErrorSpec::innovational(0, 2, 1.0, 1.0, 0.0, 0);
        assert!(inject_errors(&truth, &bad_decay).is_err());
        assert!(inject_errors(&truth, &ErrorSpec::shift(usize::MAX, 2, 1.0, 0.0, 0)).is_err());
    }

    #[test]
    fn label_rate_extremes() {
        let truth = TimeSeries::new((0..50).map(f64::from).collect()).unwrap();
        for mode in [LabelMode::Uniform, LabelMode::Prefix] {
            let all = sample_labels(
                &truth,
                &LabelingPolicy {
                    rate: 1.0,
                    seed: 3,
                    mode,
                },
            )
            .unwrap();
            assert_eq!(all.len(), 50);
            let none = sample_labels(
                &truth,
                &LabelingPolicy {
                    rate: 0.0,
                    seed: 3,
                    mode,
                },
            )
            .unwrap();
            assert!(none.is_empty());
        }
        assert!(sample_labels(
            &truth,
            &LabelingPolicy {
                rate: 1.5,
                seed: 0,
                mode: LabelMode::Uniform
            }
        )
        .is_err());
    }

    #[test]
    fn uniform_label_count() {
        let truth = constant(1000, 1.0);
        let policy = LabelingPolicy {
            rate: 0.2,
            seed: 2024,
            mode: LabelMode::Uniform,
        };
        let n = sample_labels(&truth, &policy).unwrap().len();
        assert!((160..=240).contains(&n), "{n}");
    }

    #[test]
    fn prefix_labels() {
        let truth = TimeSeries::new((0..10).map(f64::from).collect()).unwrap();
        let policy = LabelingPolicy {
            rate: 0.25,
            seed: 0,
            mode: LabelMode::Prefix,
        };
        let labels = sample_labels(&truth, &policy).unwrap();
        assert_eq!(labels.indices().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(labels.prefix_len(), 3);
    }

    #[test]
    fn parsing() {
        for k in [ErrorKind::Shift, ErrorKind::Innovational, ErrorKind::Spike] {
            assert_eq!(k.as_str().parse::<ErrorKind>().unwrap(), k);
        }
        assert!("burst".parse::<ErrorKind>().is_err());
        assert_eq!("prefix".parse::<LabelMode>().unwrap(), LabelMode::Prefix);
        assert!("random".parse::<LabelMode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn outside_window_untouched(
                truth in prop::collection::vec(-50.0f64..50.0, 5..80),
                start in 0usize..80,
                length in 1usize..10,
                variance in 0.0f64..2.0,
                seed in any::<u64>(),
            ) {
                let n = truth.len();
                prop_assume!(start + length <= n);
                let truth = TimeSeries::new(truth).unwrap();
                let spec = ErrorSpec::shift(start, length, 3.0, variance, seed);
                let (dirty, mask) = inject_errors(&truth, &spec).unwrap();
                for i in 0..n {
                    if !mask.contains(&i) {
                        prop_assert_eq!(dirty[i].to_bits(), truth[i].to_bits());
                    }
                }
                let (again, _) = inject_errors(&truth, &spec).unwrap();
                prop_assert_eq!(dirty, again);
            }

            #[test]
            fn labels_equal_truth(
                truth in prop::collection::vec(-50.0f64..50.0, 1..80),
                rate in 0.0f64..=1.0,
                seed in any::<u64>(),
            ) {
                let truth = TimeSeries::new(truth).unwrap();
                let policy = LabelingPolicy { rate, seed, mode: LabelMode::Uniform };
                let labels = sample_labels(&truth, &policy).unwrap();
                for (i, v) in labels.iter() {
                    prop_assert_eq!(v, truth[i]);
                }
                prop_assert_eq!(labels, sample_labels(&truth, &policy).unwrap());
            }
        }
    }
}
