//! Iterative minimum repairing.
//!
//! Each pass estimates `φ` from the current displacements, proposes an ARX
//! candidate for every unlabeled position whose prediction disagrees with the
//! current value by more than `τ`, and commits only the candidate closest to
//! its observation. Any committed change exceeds `τ`, so the loop has
//! converged exactly when a pass finds no candidate.

use std::time::{Duration, Instant};

use crate::error::{RepairError, Result};
use crate::estimation::{check_len, check_order, Backend, Estimator, ModelParams};
use crate::series::{diff, init_repair_state, LabeledSeries, TimeSeries};

pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RepairConfig {
    pub order: usize,
    pub tau: f64,
    pub max_iterations: usize,
    pub backend: Backend,
}

impl RepairConfig {
    pub fn new(order: usize, tau: f64) -> Self {
        Self {
            order,
            tau,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            backend: Backend::default(),
        }
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.order)?;
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(RepairError::InvalidParameter(format!(
                "tau must be non-negative, got {}",
                self.tau
            )));
        }
        if self.max_iterations == 0 {
            return Err(RepairError::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub value: f64,
}

/// Candidates ordered by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn from_candidates(mut entries: Vec<Candidate>) -> Self {
        entries.sort_by_key(|c| c.index);
        entries.dedup_by_key(|c| c.index);
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&index, |c| c.index)
            .ok()
            .map(|i| self.entries[i].value)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairChange {
    pub iteration: usize,
    pub index: usize,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairResult {
    pub values: Vec<f64>,
    /// Passes of the main loop, including the final pass that found no
    /// candidate.
    pub iterations: usize,
    pub converged: bool,
    pub phi_trace: Vec<ModelParams>,
    pub changed_trace: Vec<RepairChange>,
    /// Passes where the normal equations were singular and `φ = 0` was used.
    pub singular_fallbacks: usize,
    pub estimation_time: Duration,
}

#[inline]
fn candidate_at(x: &[f64], z: &[f64], phi: &ModelParams, t: usize) -> f64 {
    phi.predict(z, t) + x[t]
}

/// Best candidate of one pass, equal to
/// `select_minimum_repair(generate_candidates(..))` without materializing the
/// set.
fn best_candidate(
    x: &[f64],
    z: &[f64],
    labeled: &[bool],
    phi: &ModelParams,
    tau: f64,
) -> Option<Candidate> {
    let mut best: Option<(f64, Candidate)> = None;
    for t in phi.order()..x.len() {
        if labeled[t] {
            continue;
        }
        let value = candidate_at(x, z, phi, t);
        let current = z[t] + x[t];
        if (value - current).abs() <= tau {
            continue;
        }
        let dist = (value - x[t]).abs();
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, Candidate { index: t, value }));
        }
    }
    best.map(|(_, c)| c)
}

pub fn generate_candidates(
    x: &TimeSeries,
    state: &crate::series::RepairState,
    phi: &ModelParams,
    tau: f64,
) -> Result<CandidateSet> {
    let z = diff(state, x)?;
    check_len(x.len(), phi.order())?;
    let labeled = state.labeled_mask();
    let entries = (phi.order()..x.len())
        .filter(|&t| !labeled[t])
        .filter_map(|t| {
            let value = candidate_at(x, &z, phi, t);
            ((value - state[t]).abs() > tau).then_some(Candidate { index: t, value })
        })
        .collect();
    Ok(CandidateSet { entries })
}

/// Candidate closest to its observation; the smallest index wins ties.
pub fn select_minimum_repair(cands: &CandidateSet, x: &[f64]) -> Option<Candidate> {
    let mut best: Option<(f64, Candidate)> = None;
    for &c in cands.iter() {
        let dist = (c.value - x[c.index]).abs();
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, c));
        }
    }
    best.map(|(_, c)| c)
}

/// True when no element moved by more than `tau`.
pub fn converged(prev: &[f64], next: &[f64], tau: f64) -> Result<bool> {
    if prev.len() != next.len() {
        return Err(RepairError::LengthMismatch {
            expected: prev.len(),
            actual: next.len(),
        });
    }
    Ok(prev.iter().zip(next).all(|(a, b)| (a - b).abs() <= tau))
}

pub fn imr_repair(
    x: &TimeSeries,
    labels: &LabeledSeries,
    cfg: &RepairConfig,
) -> Result<RepairResult> {
    run(x, labels, cfg, None)
}

/// Same loop with `φ` held fixed instead of re-estimated each pass.
pub fn imr_repair_static(
    x: &TimeSeries,
    labels: &LabeledSeries,
    cfg: &RepairConfig,
    phi: &ModelParams,
) -> Result<RepairResult> {
    if phi.order() != cfg.order {
        return Err(RepairError::InvalidParameter(format!(
            "static parameter has order {}, config has order {}",
            phi.order(),
            cfg.order
        )));
    }
    run(x, labels, cfg, Some(phi))
}

fn run(
    x: &TimeSeries,
    labels: &LabeledSeries,
    cfg: &RepairConfig,
    fixed: Option<&ModelParams>,
) -> Result<RepairResult> {
    cfg.validate()?;
    check_len(x.len(), cfg.order)?;
    let mut state = init_repair_state(x, labels)?;
    let mut z = diff(&state, x)?.into_values();
    let mut estimator = Estimator::new(cfg.order, cfg.backend)?;
    let zero = ModelParams::zeros(cfg.order)?;

    let mut result = RepairResult {
        values: Vec::new(),
        iterations: 0,
        converged: false,
        phi_trace: Vec::new(),
        changed_trace: Vec::new(),
        singular_fallbacks: 0,
        estimation_time: Duration::ZERO,
    };

    while result.iterations < cfg.max_iterations {
        let iteration = result.iterations;
        result.iterations += 1;

        let phi = match fixed {
            Some(phi) => phi.clone(),
            None => {
                let started = Instant::now();
                let estimated = estimator.estimate(&z);
                result.estimation_time += started.elapsed();
                match estimated {
                    Ok(phi) => phi,
                    Err(RepairError::SingularSystem { .. }) => {
                        result.singular_fallbacks += 1;
                        zero.clone()
                    }
                    Err(e) => return Err(e),
                }
            }
        };

        let best = best_candidate(x, &z, state.labeled_mask(), &phi, cfg.tau);
        result.phi_trace.push(phi);
        let Some(c) = best else {
            result.converged = true;
            break;
        };

        let z_new = c.value - x[c.index];
        if fixed.is_none() {
            let started = Instant::now();
            estimator.record_change(&z, c.index, z_new)?;
            result.estimation_time += started.elapsed();
        }
        let old = state.repair(c.index, c.value)?;
        z[c.index] = z_new;
        result.changed_trace.push(RepairChange {
            iteration,
            index: c.index,
            old,
            new: c.value,
        });
    }

    result.values = state.into_values();
    Ok(result)
}
