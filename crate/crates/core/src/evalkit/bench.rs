//! Consecutive-error sweep over synthetic sensor data.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::Normal;
use rayon::prelude::*;

use super::{inject_all, rms, rng_from_seed, sample_labels, ErrorSpec, LabelMode, LabelingPolicy};
use crate::error::{RepairError, Result};
use crate::pipeline::{run_method, Method, MethodParams};
use crate::series::TimeSeries;

/// Slow sinusoid around 20 with AR(1) sensor noise.
pub fn synthetic_sensor_series(n: usize, seed: u64) -> Result<TimeSeries> {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, 0.05).expect("constant spread");
    let mut e = 0.0;
    let values = (0..n)
        .map(|t| {
            e = 0.9 * e + rng.sample(noise);
            20.0 + 2.0 * (2.0 * PI * t as f64 / 500.0).sin() + e
        })
        .collect();
    TimeSeries::new(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n: usize,
    pub error_lengths: Vec<usize>,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub label_rate: f64,
    pub amount: f64,
    pub variance: f64,
    /// Fraction of the series covered by error windows.
    pub error_fraction: f64,
    pub params: MethodParams,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            n: 3000,
            error_lengths: vec![1, 10, 50],
            reps: 5,
            methods: vec![Method::Imr, Method::Arx, Method::Ewma],
            seed: 0,
            label_rate: 0.2,
            amount: 3.0,
            variance: 0.1,
            error_fraction: 0.1,
            params: MethodParams {
                order: 3,
                ..MethodParams::default()
            },
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RepairError::InvalidParameter(msg));
        if self.n == 0 {
            return bad("scenario n must be positive".into());
        }
        if self.reps == 0 || self.methods.is_empty() || self.error_lengths.is_empty() {
            return bad("scenario needs at least one rep, method and error length".into());
        }
        if let Some(&len) = self.error_lengths.iter().find(|&&l| l == 0 || l > self.n) {
            return bad(format!(
                "error length {len} does not fit a series of {}",
                self.n
            ));
        }
        if !(self.error_fraction > 0.0 && self.error_fraction <= 1.0) {
            return bad(format!(
                "error_fraction must lie in (0, 1], got {}",
                self.error_fraction
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub error_length: usize,
    pub rep: usize,
    pub rms: f64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

/// Independent seed for one (error length, repetition) cell.
fn cell_seed(base: u64, error_length: usize, rep: usize) -> u64 {
    let mut rng = rng_from_seed(base);
    rng.set_stream(((error_length as u64) << 32) | rep as u64);
    rng.next_u64()
}

/// Non-overlapping windows of `length` covering about `fraction` of `n`,
/// one placed at random inside each of `count` equal slots.
pub fn error_windows(
    n: usize,
    length: usize,
    fraction: f64,
    amount: f64,
    variance: f64,
    seed: u64,
) -> Vec<ErrorSpec> {
    let wanted = ((fraction * n as f64) / length as f64).round().max(1.0) as usize;
    let count = wanted.min(n / length).max(1);
    let slot = n / count;
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|k| {
            let start = k * slot + rng.random_range(0..=slot - length);
            ErrorSpec::shift(start, length, amount, variance, rng.next_u64())
        })
        .collect()
}

fn run_cell(s: &Scenario, error_length: usize, rep: usize) -> Result<Vec<BenchRow>> {
    let mut rng = rng_from_seed(cell_seed(s.seed, error_length, rep));
    let truth = synthetic_sensor_series(s.n, rng.next_u64())?;
    let specs = error_windows(
        s.n,
        error_length,
        s.error_fraction,
        s.amount,
        s.variance,
        rng.next_u64(),
    );
    let dirty = inject_all(&truth, &specs)?.dirty;
    let policy = LabelingPolicy {
        rate: s.label_rate,
        seed: rng.next_u64(),
        mode: LabelMode::Uniform,
    };
    let labels = sample_labels(&truth, &policy)?;
    s.methods
        .iter()
        .map(|&method| {
            let out = run_method(method, &dirty, &labels, &s.params)?;
            Ok(BenchRow {
                method,
                error_length,
                rep,
                rms: rms(&truth, &out.values)?,
                iterations: out.iterations,
                converged: out.converged,
            })
        })
        .collect()
}

/// Runs every cell in parallel. Rows are ordered by error length, then
/// repetition, then method.
pub fn run_scenario(s: &Scenario) -> Result<Vec<BenchRow>> {
    s.validate()?;
    let cells: Vec<(usize, usize)> = s
        .error_lengths
        .iter()
        .flat_map(|&len| (0..s.reps).map(move |rep| (len, rep)))
        .collect();
    let rows: Vec<Vec<BenchRow>> = cells
        .par_iter()
        .map(|&(len, rep)| run_cell(s, len, rep))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Median RMS of `method` at `error_length`.
pub fn median_rms(rows: &[BenchRow], method: Method, error_length: usize) -> Option<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.error_length == error_length)
        .map(|r| r.rms)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}
