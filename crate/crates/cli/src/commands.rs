use std::fs;
use std::io::Write;
use std::time::Instant;

use imr_core::evalkit::bench::{median_rms, run_scenario};
use imr_core::evalkit::{
    derive_seeds, inject_all, rms, sample_labels, ErrorKind, ErrorSpec, LabelMode, LabelingPolicy,
    RNG_ALGORITHM,
};
use imr_core::{run_method, Backend, Method, MethodParams, StreamRepairer};
use serde_json::{json, Value};

use crate::csvio::{read_table, write_atomic, write_table, SeriesTable};
use crate::error::CliError;
use crate::scenario::ScenarioFile;
use crate::{BenchArgs, EvaluateArgs, InjectArgs, RepairArgs, StreamArgs};

fn elapsed_ms(started: Instant) -> f64 {
    started.elapsed().as_secs_f64() * 1e3
}

fn rng_meta(seed: u64) -> Value {
    json!({ "seed": seed, "algorithm": RNG_ALGORITHM })
}

pub fn repair(a: &RepairArgs) -> Result<Option<Value>, CliError> {
    let method: Method = a.method.parse()?;
    let backend: Backend = a.backend.parse()?;
    let params = MethodParams {
        order: a.order,
        tau: a.tau,
        max_iterations: a.max_iter,
        backend,
        alpha: a.alpha,
        window: a.window,
        phi: a.phi.clone(),
        fixpoint_tol: a.fixpoint_tol,
    };
    let table = read_table(&a.input)?;
    let x = table.series()?;
    let labels = table.labeled()?;
    let truth = table.truth_series()?;

    let started = Instant::now();
    let out = run_method(method, &x, &labels, &params)?;
    let wall = elapsed_ms(started);

    let repaired = SeriesTable {
        values: out.values.clone(),
        labels: table.labels.clone(),
        truth: table.truth.clone(),
    };
    write_table(&a.output, &repaired)?;
    if let (Some(path), Some(changes)) = (&a.trace_out, &out.changed_trace) {
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["iteration", "index", "old", "new"])?;
            for c in changes {
                csv.write_record([
                    (c.iteration + 1).to_string(),
                    (c.index + 1).to_string(),
                    c.old.to_string(),
                    c.new.to_string(),
                ])?;
            }
            csv.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;
    }

    let mut report = json!({
        "command": "repair",
        "method": method.as_str(),
        "config": {
            "order": params.order,
            "tau": params.tau,
            "max_iterations": params.max_iterations,
            "backend": params.backend.as_str(),
            "alpha": params.alpha,
            "window": params.window,
            "phi": params.phi,
        },
        "n": x.len(),
        "labeled": labels.len(),
        "iterations": out.iterations,
        "converged": out.converged,
        "modified": out.modified,
        "phi": out.phi,
        "singular_fallbacks": out.singular_fallbacks,
        "wall_time_ms": wall,
    });
    let obj = report.as_object_mut().expect("object literal");
    if let Some(bound) = out.bound_condition {
        obj.insert("bound_condition".into(), json!(bound));
    }
    if let Some(fp) = &out.fixpoint {
        obj.insert(
            "fixpoint".into(),
            json!({
                "residual": fp.residual,
                "roots": fp.roots,
                "multiple_roots": fp.multiple_roots,
                "settled": fp.settled,
            }),
        );
    }
    if let Some(truth) = &truth {
        obj.insert("rms".into(), json!(rms(truth, &out.values)?));
    }
    if a.trace {
        obj.insert("phi_trace".into(), json!(out.phi_trace));
    }
    obj.retain(|_, v| !v.is_null());
    Ok(Some(report))
}

pub fn inject(a: &InjectArgs) -> Result<Option<Value>, CliError> {
    let kind: ErrorKind = a.kind.parse()?;
    let mode: LabelMode = a.label_mode.parse()?;
    let table = read_table(&a.input)?;
    let truth = table.series()?;

    let started = Instant::now();
    let seeds = derive_seeds(a.seed, a.start.len() + 1);
    if a.start.contains(&0) {
        return Err(CliError::Parse(
            "--start is 1-based and must be at least 1".into(),
        ));
    }
    let specs: Vec<ErrorSpec> = a
        .start
        .iter()
        .zip(&seeds)
        .map(|(&start, &seed)| ErrorSpec {
            kind,
            start: start - 1,
            length: a.length,
            amount: a.amount,
            variance: a.variance,
            decay: a.decay,
            seed,
        })
        .collect();
    let injected = inject_all(&truth, &specs)?;
    let policy = LabelingPolicy {
        rate: a.rate,
        seed: seeds[a.start.len()],
        mode,
    };
    let labels = sample_labels(&truth, &policy)?;
    let wall = elapsed_ms(started);

    let out = SeriesTable {
        values: injected.dirty.values().to_vec(),
        labels: Some((0..truth.len()).map(|i| labels.get(i)).collect()),
        truth: Some(truth.values().to_vec()),
    };
    write_table(&a.output, &out)?;

    Ok(Some(json!({
        "command": "inject",
        "n": truth.len(),
        "kind": kind.as_str(),
        "windows": specs.iter().map(|s| json!({"start": s.start + 1, "len": s.length})).collect::<Vec<_>>(),
        "errors": injected.mask.len(),
        "labeled": labels.len(),
        "label_mode": mode.as_str(),
        "rate": a.rate,
        "rng": rng_meta(a.seed),
        "wall_time_ms": wall,
    })))
}

pub fn evaluate(a: &EvaluateArgs) -> Result<Option<Value>, CliError> {
    let truth_table = read_table(&a.truth)?;
    let repair_table = read_table(&a.repair)?;
    let truth = truth_table.truth.as_ref().unwrap_or(&truth_table.values);
    Ok(Some(json!({
        "command": "evaluate",
        "n": truth.len(),
        "rms": rms(truth, &repair_table.values)?,
    })))
}

pub fn bench(a: &BenchArgs) -> Result<Option<Value>, CliError> {
    let text = fs::read_to_string(&a.scenario).map_err(|e| CliError::io(&a.scenario, e))?;
    let mut scenario = ScenarioFile::parse(&text)?.into_scenario()?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }

    let started = Instant::now();
    let rows = run_scenario(&scenario)?;
    let wall = elapsed_ms(started);

    write_atomic(&a.output, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record([
            "method",
            "error_length",
            "rep",
            "rms",
            "iterations",
            "converged",
        ])?;
        for r in &rows {
            csv.write_record([
                r.method.as_str().to_string(),
                r.error_length.to_string(),
                (r.rep + 1).to_string(),
                r.rms.to_string(),
                r.iterations.map(|v| v.to_string()).unwrap_or_default(),
                r.converged.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    })?;

    let medians: Vec<Value> = scenario
        .error_lengths
        .iter()
        .flat_map(|&len| {
            let rows = &rows;
            scenario.methods.iter().map(move |&m| {
                json!({
                    "method": m.as_str(),
                    "error_length": len,
                    "median_rms": median_rms(rows, m, len),
                })
            })
        })
        .collect();
    Ok(Some(json!({
        "command": "bench",
        "n": scenario.n,
        "reps": scenario.reps,
        "rows": rows.len(),
        "medians": medians,
        "rng": rng_meta(scenario.seed),
        "wall_time_ms": wall,
    })))
}

pub fn stream(a: &StreamArgs) -> Result<Option<Value>, CliError> {
    let table = read_table(&a.input)?;
    let labels = table
        .labels
        .clone()
        .unwrap_or_else(|| vec![None; table.values.len()]);
    let mut repairer = StreamRepairer::new();
    let started = Instant::now();
    let values = table
        .values
        .iter()
        .zip(&labels)
        .map(|(&x, l)| match l {
            Some(y) => repairer.push_label(x, *y),
            None => repairer.push_observation(x),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let wall = elapsed_ms(started);
    let out = SeriesTable {
        values,
        labels: Some(labels),
        truth: table.truth.clone(),
    };
    write_table(&a.output, &out)?;
    let report = json!({
        "command": "stream",
        "n": out.values.len(),
        "labeled": out.labels.iter().flatten().filter(|l| l.is_some()).count(),
        "phi": repairer.phi1(),
        "wall_time_ms": wall,
    });
    if a.output.as_os_str() == "-" {
        let _ = writeln!(std::io::stderr(), "{report}");
        return Ok(None);
    }
    Ok(Some(report))
}
