//! One-pass reference repairers and smoothers.

use crate::error::{RepairError, Result};
use crate::estimation::{
    build_design_matrices, check_len, normal_from_design, solve_normal, ModelParams,
};
use crate::series::{init_repair_state, LabeledSeries, TimeSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRepair {
    pub values: Vec<f64>,
    pub phi: ModelParams,
    /// Unlabeled positions overwritten during the pass.
    pub modified: usize,
    /// The normal equations were singular and `φ = 0` was used.
    pub singular_fallback: bool,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau < 0.0 {
        return Err(RepairError::InvalidParameter(format!(
            "tau must be non-negative, got {tau}"
        )));
    }
    Ok(())
}

/// OLS on `seq`, falling back to zeros when the system is singular.
fn fit_or_zero(seq: &[f64], order: usize, prune: bool) -> Result<(ModelParams, bool)> {
    let ne = normal_from_design(&build_design_matrices(seq, order, prune)?);
    match solve_normal(&ne) {
        Ok(phi) => Ok((phi, false)),
        Err(RepairError::SingularSystem { .. }) => Ok((ModelParams::zeros(order)?, true)),
        Err(e) => Err(e),
    }
}

/// AR(p) repair: labels substituted, `φ` fit to the raw values, then a
/// left-to-right pass replacing each unlabeled value whose prediction differs
/// by more than `tau`. Repairs feed into later predictions.
pub fn ar_repair(
    x: &TimeSeries,
    labels: &LabeledSeries,
    order: usize,
    tau: f64,
) -> Result<ModelRepair> {
    check_tau(tau)?;
    check_len(x.len(), order)?;
    let state = init_repair_state(x, labels)?;
    let labeled = state.labeled_mask().to_vec();
    let mut y = state.into_values();
    let (phi, singular_fallback) = fit_or_zero(&y, order, false)?;

    let mut modified = 0;
    for t in order..y.len() {
        if labeled[t] {
            continue;
        }
        let pred = phi.predict(&y, t);
        if (pred - y[t]).abs() > tau {
            y[t] = pred;
            modified += 1;
        }
    }
    Ok(ModelRepair {
        values: y,
        phi,
        modified,
        singular_fallback,
    })
}

/// ARX(p) repair: `φ` fit to the initial displacements (or supplied), then a
/// single left-to-right pass over unlabeled positions.
pub fn arx_repair(
    x: &TimeSeries,
    labels: &LabeledSeries,
    order: usize,
    tau: f64,
    phi: Option<&ModelParams>,
) -> Result<ModelRepair> {
    check_tau(tau)?;
    check_len(x.len(), order)?;
    let state = init_repair_state(x, labels)?;
    let labeled = state.labeled_mask().to_vec();
    let mut y = state.into_values();
    let mut z: Vec<f64> = y.iter().zip(x.iter()).map(|(y, x)| y - x).collect();
    let (phi, singular_fallback) = match phi {
        Some(phi) if phi.order() != order => {
            return Err(RepairError::InvalidParameter(format!(
                "supplied parameter has order {}, expected {order}",
                phi.order()
            )))
        }
        Some(phi) => (phi.clone(), false),
        None => fit_or_zero(&z, order, true)?,
    };

    let mut modified = 0;
    for t in order..y.len() {
        if labeled[t] {
            continue;
        }
        let cand = phi.predict(&z, t) + x[t];
        if (cand - x[t]).abs() > tau {
            y[t] = cand;
            z[t] = cand - x[t];
            modified += 1;
        }
    }
    Ok(ModelRepair {
        values: y,
        phi,
        modified,
        singular_fallback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    pub alpha: f64,
    pub window: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            window: 5,
        }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_window(self.window)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(RepairError::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 {
        return Err(RepairError::InvalidParameter(
            "window must be at least 1".into(),
        ));
    }
    Ok(())
}

/// `s_0 = x_0`, `s_t = α·x_t + (1-α)·s_{t-1}`.
pub fn ewma(x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let mut out = Vec::with_capacity(x.len());
    let mut prev: Option<f64> = None;
    for &v in x {
        let s = match prev {
            None => v,
            Some(p) => alpha * v + (1.0 - alpha) * p,
        };
        out.push(s);
        prev = Some(s);
    }
    Ok(out)
}

/// Trailing mean over the last `window` points (fewer at the start).
pub fn sma(x: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(window)?;
    Ok((0..x.len())
        .map(|t| {
            let lo = (t + 1).saturating_sub(window);
            let slice = &x[lo..=t];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}
