//! TOML benchmark scenarios. Every key is optional.
//!
//! ```toml
//! n = 3000
//! error_lengths = [1, 10, 50]
//! reps = 5
//! methods = ["imr", "arx", "ewma"]
//! seed = 7
//! label_rate = 0.2
//!
//! [params]
//! order = 3
//! tau = 0.1
//! ```

use imr_core::evalkit::bench::Scenario;
use imr_core::{Backend, Method, MethodParams};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    n: Option<usize>,
    error_lengths: Option<Vec<usize>>,
    reps: Option<usize>,
    methods: Option<Vec<String>>,
    seed: Option<u64>,
    label_rate: Option<f64>,
    amount: Option<f64>,
    variance: Option<f64>,
    error_fraction: Option<f64>,
    #[serde(default)]
    params: ParamsFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    order: Option<usize>,
    tau: Option<f64>,
    max_iterations: Option<usize>,
    backend: Option<String>,
    alpha: Option<f64>,
    window: Option<usize>,
    phi: Option<Vec<f64>>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn into_scenario(self) -> Result<Scenario, CliError> {
        let d = Scenario::default();
        let p = self.params;
        let params = MethodParams {
            order: p.order.unwrap_or(d.params.order),
            tau: p.tau.unwrap_or(d.params.tau),
            max_iterations: p.max_iterations.unwrap_or(d.params.max_iterations),
            backend: match p.backend {
                Some(b) => b.parse::<Backend>()?,
                None => d.params.backend,
            },
            alpha: p.alpha.unwrap_or(d.params.alpha),
            window: p.window.unwrap_or(d.params.window),
            phi: p.phi.or(d.params.phi),
            fixpoint_tol: d.params.fixpoint_tol,
        };
        let methods = match self.methods {
            Some(names) => names
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<_, _>>()?,
            None => d.methods,
        };
        Ok(Scenario {
            n: self.n.unwrap_or(d.n),
            error_lengths: self.error_lengths.unwrap_or(d.error_lengths),
            reps: self.reps.unwrap_or(d.reps),
            methods,
            seed: self.seed.unwrap_or(d.seed),
            label_rate: self.label_rate.unwrap_or(d.label_rate),
            amount: self.amount.unwrap_or(d.amount),
            variance: self.variance.unwrap_or(d.variance),
            error_fraction: self.error_fraction.unwrap_or(d.error_fraction),
            params,
        })
    }
}
