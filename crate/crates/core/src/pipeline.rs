//! Uniform entry point over every repair method.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{ar_repair, arx_repair, ewma, sma};
use crate::engine::{
    imr_repair, imr_repair_static, RepairChange, RepairConfig, DEFAULT_MAX_ITERATIONS,
};
use crate::error::{RepairError, Result};
use crate::estimation::{
    build_design_matrices, normal_from_design, solve_normal, Backend, ModelParams,
};
use crate::online::{
    check_bound_condition, repair_multi_segment, repair_single, OnlinePrefixModel,
};
use crate::series::{init_repair_state, LabeledSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Imr,
    ImrStatic,
    Ar,
    Arx,
    Ewma,
    Sma,
    Online,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Imr,
        Method::ImrStatic,
        Method::Ar,
        Method::Arx,
        Method::Ewma,
        Method::Sma,
        Method::Online,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Imr => "imr",
            Method::ImrStatic => "imr-static",
            Method::Ar => "ar",
            Method::Arx => "arx",
            Method::Ewma => "ewma",
            Method::Sma => "sma",
            Method::Online => "online",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = RepairError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                RepairError::InvalidParameter(format!(
                    "unknown method '{s}' (expected imr, imr-static, ar, arx, ewma, sma or online)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodParams {
    pub order: usize,
    pub tau: f64,
    pub max_iterations: usize,
    pub backend: Backend,
    pub alpha: f64,
    pub window: usize,
    /// Fixed parameter for `arx` and `imr-static`; learned when absent.
    pub phi: Option<Vec<f64>>,
    pub fixpoint_tol: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            order: 1,
            tau: 0.1,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            backend: Backend::default(),
            alpha: 0.3,
            window: 5,
            phi: None,
            fixpoint_tol: 1e-10,
        }
    }
}

impl MethodParams {
    fn repair_config(&self) -> RepairConfig {
        RepairConfig::new(self.order, self.tau)
            .with_max_iterations(self.max_iterations)
            .with_backend(self.backend)
    }

    fn fixed_phi(&self) -> Result<Option<ModelParams>> {
        self.phi.clone().map(ModelParams::new).transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixpointInfo {
    pub residual: f64,
    pub roots: Vec<f64>,
    pub multiple_roots: bool,
    pub settled: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MethodOutput {
    pub values: Vec<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    /// Final (or only) parameter.
    pub phi: Option<Vec<f64>>,
    pub phi_trace: Option<Vec<Vec<f64>>>,
    pub changed_trace: Option<Vec<RepairChange>>,
    pub modified: Option<usize>,
    pub singular_fallbacks: Option<usize>,
    pub bound_condition: Option<bool>,
    pub fixpoint: Option<FixpointInfo>,
}

/// `φ(0)` from the initial displacements, zero when singular.
fn initial_phi(x: &TimeSeries, labels: &LabeledSeries, order: usize) -> Result<ModelParams> {
    let state = init_repair_state(x, labels)?;
    let z: Vec<f64> = state
        .values()
        .iter()
        .zip(x.iter())
        .map(|(y, x)| y - x)
        .collect();
    match solve_normal(&normal_from_design(&build_design_matrices(
        &z, order, true,
    )?)) {
        Ok(phi) => Ok(phi),
        Err(RepairError::SingularSystem { .. }) => ModelParams::zeros(order),
        Err(e) => Err(e),
    }
}

pub fn run_method(
    method: Method,
    x: &TimeSeries,
    labels: &LabeledSeries,
    params: &MethodParams,
) -> Result<MethodOutput> {
    match method {
        Method::Imr | Method::ImrStatic => {
            let cfg = params.repair_config();
            let res = if method == Method::Imr {
                imr_repair(x, labels, &cfg)?
            } else {
                let phi = match params.fixed_phi()? {
                    Some(phi) => phi,
                    None => initial_phi(x, labels, params.order)?,
                };
                imr_repair_static(x, labels, &cfg, &phi)?
            };
            Ok(MethodOutput {
                phi: res.phi_trace.last().map(|p| p.phi().to_vec()),
                phi_trace: Some(res.phi_trace.iter().map(|p| p.phi().to_vec()).collect()),
                iterations: Some(res.iterations),
                converged: Some(res.converged),
                modified: Some(res.changed_trace.len()),
                singular_fallbacks: Some(res.singular_fallbacks),
                changed_trace: Some(res.changed_trace),
                values: res.values,
                ..Default::default()
            })
        }
        Method::Ar | Method::Arx => {
            let res = if method == Method::Ar {
                ar_repair(x, labels, params.order, params.tau)?
            } else {
                let phi = params.fixed_phi()?;
                arx_repair(x, labels, params.order, params.tau, phi.as_ref())?
            };
            Ok(MethodOutput {
                phi: Some(res.phi.phi().to_vec()),
                modified: Some(res.modified),
                singular_fallbacks: Some(usize::from(res.singular_fallback)),
                values: res.values,
                ..Default::default()
            })
        }
        Method::Ewma => Ok(MethodOutput {
            values: ewma(x, params.alpha)?,
            ..Default::default()
        }),
        Method::Sma => Ok(MethodOutput {
            values: sma(x, params.window)?,
            ..Default::default()
        }),
        Method::Online => {
            let ell = labels.prefix_len().min(x.len());
            if ell >= 2 && ell == labels.len() {
                let model = OnlinePrefixModel::fit(x, labels, ell)?;
                Ok(MethodOutput {
                    values: repair_single(x, &model)?,
                    phi: Some(vec![model.phi1()]),
                    bound_condition: Some(check_bound_condition(x, labels, ell)?),
                    ..Default::default()
                })
            } else {
                let res = repair_multi_segment(x, labels, params.fixpoint_tol)?;
                Ok(MethodOutput {
                    values: res.values,
                    phi: Some(vec![res.phi1]),
                    fixpoint: Some(FixpointInfo {
                        residual: res.residual,
                        roots: res.roots,
                        multiple_roots: res.multiple_roots,
                        settled: res.fixpoint_settled,
                    }),
                    ..Default::default()
                })
            }
        }
    }
}
